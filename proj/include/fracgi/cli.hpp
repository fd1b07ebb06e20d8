#pragma once

// Subcommand implementations behind the `fracgi` executable. Each returns
// the process exit code; UsageError and DomainError propagate to the caller,
// which maps them to exit codes 2 and 3.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fracgi/analytic.hpp"
#include "fracgi/builtin_masks.hpp"
#include "fracgi/error.hpp"
#include "fracgi/metrics.hpp"
#include "fracgi/moment_engine.hpp"
#include "fracgi/object_model.hpp"
#include "fracgi/reporting_io.hpp"
#include "fracgi/speckle_sim.hpp"

namespace fracgi::cli {

// The six-order panel at fixed nu = 0.5 used as the default order list.
inline const char* kDefaultOrders = "-2.7183:0.5,-1.414:0.5,-0.618:0.5,0.618:0.5,1.414:0.5,2.7183:0.5";

struct CliConfig {
  std::optional<std::string> object_path;
  std::optional<double> binarize;
  std::size_t builtin_m = 20;
  double i0 = 1.0;
  std::uint64_t seed = 0;
  std::size_t samples = 200000;
  std::string orders = kDefaultOrders;
  bool allow_nonpositive_nu = false;
  std::string out_dir;
  std::size_t workers = 1;
  bool null_pairing = false;
  std::optional<std::string> dump_raw;
};

namespace detail {

inline double parse_number(const std::string& text, const std::string& flag) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw UsageError(flag + ": cannot parse number '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v))
    throw UsageError(flag + ": cannot parse number '" + text + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::string fmt(double x, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

} // namespace detail

/// Parses "mu:nu,mu:nu,...".
inline std::vector<MomentOrder> parse_orders(const std::string& text, bool allow_nonpositive_nu) {
  if (text.empty()) throw UsageError("--orders: at least one mu:nu pair is required");
  std::vector<MomentOrder> out;
  const auto policy = allow_nonpositive_nu ? MomentOrder::NuPolicy::allow_nonpositive
                                           : MomentOrder::NuPolicy::positive_only;
  for (const auto& pair : detail::split(text, ',')) {
    const auto parts = detail::split(pair, ':');
    if (parts.size() != 2) throw UsageError("--orders: expected mu:nu, got '" + pair + "'");
    const double mu = detail::parse_number(parts[0], "--orders");
    const double nu = detail::parse_number(parts[1], "--orders");
    if (mu == 0.0) throw UsageError("--orders: mu must be nonzero (got '" + pair + "')");
    try {
      out.emplace_back(mu, nu, policy);
    } catch (const DomainError& e) {
      throw DomainError(std::string("--orders: ") + e.what());
    }
  }
  return out;
}

struct Range {
  double start;
  double stop;
  double step;
};

/// Parses "start:stop:step" (inclusive) or a single value.
inline Range parse_range(const std::string& text, const std::string& flag) {
  const auto parts = detail::split(text, ':');
  if (parts.size() == 1) {
    const double v = detail::parse_number(parts[0], flag);
    return {v, v, 1.0};
  }
  if (parts.size() != 3) throw UsageError(flag + ": expected start:stop:step, got '" + text + "'");
  Range r{detail::parse_number(parts[0], flag), detail::parse_number(parts[1], flag),
          detail::parse_number(parts[2], flag)};
  if (!(r.step > 0.0)) throw UsageError(flag + ": step must be positive");
  if (r.stop < r.start) throw UsageError(flag + ": stop must not be below start");
  return r;
}

inline std::vector<double> expand_range(const Range& r) {
  std::vector<double> out;
  for (std::size_t k = 0;; ++k) {
    const double v = r.start + static_cast<double>(k) * r.step;
    if (v > r.stop + 1e-9 * r.step) break;
    out.push_back(std::round(v * 1e12) / 1e12);
  }
  return out;
}

inline std::vector<std::size_t> parse_m_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& item : detail::split(text, ',')) {
    const double v = detail::parse_number(item, "--m");
    if (v < 1.0 || v != std::floor(v)) throw UsageError("--m: expected positive integers, got '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw UsageError("--m: at least one value is required");
  return out;
}

inline ObjectMask resolve_mask(const CliConfig& cfg) {
  if (cfg.object_path) return load_object(*cfg.object_path, cfg.binarize);
  return builtin_binary_mask(cfg.builtin_m);
}

inline void check_config(const CliConfig& cfg) {
  if (!(cfg.i0 > 0.0) || !std::isfinite(cfg.i0)) throw UsageError("--i0 must be positive");
  if (cfg.samples < 2) throw UsageError("--n-samples must be at least 2");
  if (cfg.workers < 1) throw UsageError("--workers must be at least 1");
  if (cfg.binarize && !(*cfg.binarize > 0.0 && *cfg.binarize < 1.0))
    throw UsageError("--binarize must lie in (0,1)");
}

// Orders whose moments diverge for this mask are refused before simulating.
inline void check_orders_for_mask(const std::vector<MomentOrder>& orders, const ObjectMask& mask,
                                  std::ostream& err) {
  for (const auto& o : orders) {
    const auto v = validity_domain(mask, o.mu(), o.nu());
    if (!v.moment_finite)
      throw DomainError("--orders: mu=" + detail::fmt(o.mu()) + " nu=" + detail::fmt(o.nu()) +
                        " gives a divergent moment: " + v.describe());
    if (!v.variance_finite)
      err << "warning: mu=" << o.mu() << " nu=" << o.nu()
          << " has infinite estimator variance: " << v.describe() << "\n";
    if (o.heavy_tailed()) err << "warning: nu=" << o.nu() << " <= 0 gives heavy-tailed estimates\n";
  }
}

inline std::size_t default_groups(std::size_t samples) { return std::min<std::size_t>(20, samples); }

inline std::size_t frames_per_block_for(std::size_t samples) {
  return std::clamp<std::size_t>(samples / 20, 1, 4096);
}

/// Forward simulation plus reconstruction for every order. Writes
/// order_XX.pgm/.json, mask.csv, report.json and, for binary masks,
/// predictions.csv into the output directory.
inline int cmd_simulate(const CliConfig& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  check_config(cfg);
  if (cfg.out_dir.empty()) throw UsageError("--out is required");
  const auto orders = parse_orders(cfg.orders, cfg.allow_nonpositive_nu);
  const ObjectMask mask = resolve_mask(cfg);
  check_orders_for_mask(orders, mask, err);
  const auto classes = classify_units(mask);

  std::filesystem::create_directories(cfg.out_dir);
  const std::filesystem::path dir(cfg.out_dir);

  SpeckleConfig speckle{cfg.i0, cfg.seed, mask.size()};
  SampleSet samples(speckle, mask, cfg.samples, cfg.null_pairing ? Pairing::decorrelated : Pairing::matched);
  if (cfg.dump_raw) write_raw_dump(samples, *cfg.dump_raw);

  PassOptions opts;
  opts.workers = cfg.workers;
  const auto pass = accumulate_orders(samples, orders, opts);

  RunReport report;
  report.mask_digest = mask_digest(mask);
  report.width = mask.width();
  report.height = mask.height();
  report.m = classes.m;
  report.i0 = cfg.i0;
  report.seed = cfg.seed;
  report.samples = cfg.samples;
  report.pairing = cfg.null_pairing ? "decorrelated" : "matched";

  const bool binary_theory = classes.m && *classes.m >= 2;
  std::vector<SweepRow> predictions;
  for (std::size_t k = 0; k < orders.size(); ++k) {
    const auto image = finalize(pass.totals[k]);
    char name[32];
    std::snprintf(name, sizeof name, "order_%02zu.pgm", k);
    write_ghost_image(image, (dir / name).string());

    OrderResult res;
    res.mu = orders[k].mu();
    res.nu = orders[k].nu();
    res.image = name;
    res.excluded_units = classes.fractional_units.size();
    if (!classes.one_units.empty()) {
      const auto cm = class_moments(pass.totals[k], classes);
      res.mean_signal = cm.mean_signal;
      res.mean_background = cm.mean_background;
      if (!classes.zero_units.empty()) res.empirical_visibility = empirical_visibility(image, classes);
      try {
        res.empirical_peak_snr = empirical_peak_snr(pass.totals[k], classes);
      } catch (const DomainError& e) {
        err << "warning: " << e.what() << "\n";
      }
    }
    if (binary_theory) {
      const auto p = predict(*classes.m, res.mu, res.nu, static_cast<double>(cfg.samples), cfg.i0);
      res.analytic_visibility = p.visibility;
      res.analytic_peak_snr = p.peak_snr;
      predictions.push_back({*classes.m, res.mu, res.nu, p.visibility, p.peak_snr_relative,
                             p.validity.moment_finite, p.validity.variance_finite});
    }
    report.results.push_back(res);
    out << name << "  mu=" << detail::fmt(res.mu) << " nu=" << detail::fmt(res.nu);
    if (res.empirical_visibility) out << "  V=" << detail::fmt(*res.empirical_visibility, 4);
    if (res.analytic_visibility) out << " (theory " << detail::fmt(*res.analytic_visibility, 4) << ")";
    if (res.empirical_peak_snr) out << "  Rp=" << detail::fmt(*res.empirical_peak_snr, 4);
    if (res.analytic_peak_snr) out << " (theory " << detail::fmt(*res.analytic_peak_snr, 4) << ")";
    out << "\n";
  }
  write_mask_csv(mask, (dir / "mask.csv").string());
  write_report(report, (dir / "report.json").string());
  if (binary_theory) write_sweep_csv(predictions, (dir / "predictions.csv").string());
  return 0;
}

/// Prints the closed-form predictions as canonical JSON. Exit 3 when any
/// quantity is undefined for the given orders.
inline int cmd_predict(std::size_t m, double mu, double nu, double samples, double i0,
                       std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  if (m < 1) throw UsageError("--m must be at least 1");
  if (!(samples > 0.0)) throw UsageError("--n must be positive");
  if (!(i0 > 0.0)) throw UsageError("--i0 must be positive");
  const auto p = predict(m, mu, nu, samples, i0);
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  auto reasons = p.validity.reasons;
  if (m < 2) reasons.push_back("m < 2 (visibility and peak SNR need two transmitting units)");
  nlohmann::json j = {{"m", m},
                      {"mu", mu},
                      {"nu", nu},
                      {"N", samples},
                      {"I0", i0},
                      {"moment_background", opt(p.moment_background)},
                      {"moment_signal", opt(p.moment_signal)},
                      {"visibility", opt(p.visibility)},
                      {"peak_snr", opt(p.peak_snr)},
                      {"peak_snr_over_sqrt_n", opt(p.peak_snr_relative)},
                      {"moment_finite", p.validity.moment_finite},
                      {"variance_finite", p.validity.variance_finite},
                      {"reasons", reasons}};
  out << j.dump(2) << "\n";
  if (!reasons.empty()) {
    std::string all;
    for (const auto& r : reasons) all += (all.empty() ? "" : "; ") + r;
    err << "domain error: " << all << "\n";
    return static_cast<int>(ExitCode::domain);
  }
  return 0;
}

/// Visibility and relative peak SNR over an (m, mu, nu) grid. mu = 0 is
/// dropped from the grid.
inline std::vector<SweepRow> sweep_rows(const std::vector<std::size_t>& ms, const Range& mu_range,
                                        const Range& nu_range, std::ostream& err) {
  const auto mus = expand_range(mu_range);
  const auto nus = expand_range(nu_range);
  std::vector<SweepRow> rows;
  bool dropped_zero = false;
  for (auto m : ms) {
    for (double mu : mus) {
      if (std::fabs(mu) < 1e-9 * mu_range.step) {
        dropped_zero = true;
        continue;
      }
      for (double nu : nus) {
        const auto p = predict(m, mu, nu);
        rows.push_back({m, mu, nu, p.visibility, p.peak_snr_relative, p.validity.moment_finite,
                        p.validity.variance_finite});
      }
    }
  }
  if (dropped_zero) err << "note: mu = 0 excluded from the grid\n";
  return rows;
}

inline int cmd_sweep(const std::string& m_list, const std::string& mu_spec, const std::string& nu_spec,
                     const std::string& out_path, std::ostream& err = std::cerr) {
  if (out_path.empty()) throw UsageError("--out is required");
  const auto rows = sweep_rows(parse_m_list(m_list), parse_range(mu_spec, "--mu"),
                               parse_range(nu_spec, "--nu"), err);
  write_sweep_csv(rows, out_path);
  return 0;
}

struct ValidationCheck {
  std::string order;
  std::string name;
  double observed = 0.0;
  double expected = 0.0;
  double margin = 0.0; // allowed |observed - expected|, or |z| bound
  bool pass = false;
};

/// Monte Carlo self-check of the built-in binary mask against the closed
/// forms. Every check uses a 5-standard-error band.
inline std::vector<ValidationCheck> run_validation(const CliConfig& cfg) {
  check_config(cfg);
  const auto orders = parse_orders(cfg.orders, cfg.allow_nonpositive_nu);
  const ObjectMask mask = builtin_binary_mask(cfg.builtin_m);
  const auto classes = classify_units(mask);
  const std::size_t m = *classes.m;
  if (m < 2) throw DomainError("validation needs m >= 2");
  for (const auto& o : orders) {
    const auto v = validity_domain(static_cast<double>(m), o.mu(), o.nu());
    if (!v.ok()) throw DomainError("mu=" + detail::fmt(o.mu()) + " nu=" + detail::fmt(o.nu()) + ": " + v.describe());
  }
  SampleSet samples({cfg.i0, cfg.seed, mask.size()}, mask, cfg.samples,
                    cfg.null_pairing ? Pairing::decorrelated : Pairing::matched);
  PassOptions opts;
  opts.workers = cfg.workers;
  opts.frames_per_block = frames_per_block_for(cfg.samples);
  const std::size_t blocks = (cfg.samples + opts.frames_per_block - 1) / opts.frames_per_block;
  opts.groups = std::min(default_groups(cfg.samples), blocks);
  const auto pass = accumulate_orders(samples, orders, opts);

  constexpr double z = 5.0;
  std::vector<ValidationCheck> checks;
  for (std::size_t k = 0; k < orders.size(); ++k) {
    const double mu = orders[k].mu(), nu = orders[k].nu();
    const std::string label = "mu=" + detail::fmt(mu) + " nu=" + detail::fmt(nu);
    const auto img = finalize(pass.totals[k]);
    const double m0 = moment_background(m, mu, nu, cfg.i0);
    const double m1 = moment_signal(m, mu, nu, cfg.i0);

    auto worst_z = [&](const std::vector<std::size_t>& idx, double expected) {
      double worst = 0.0;
      for (auto i : idx) worst = std::max(worst, std::fabs(img.joint_mean[i] - expected) / img.joint_se[i]);
      return worst;
    };
    if (cfg.null_pairing) {
      std::vector<std::size_t> all(mask.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      const double wz = worst_z(all, m0);
      checks.push_back({label, "raw moment, all pixels = background (max |z|)", wz, 0.0, z, wz < z});
      double worst = 0.0;
      for (std::size_t i = 0; i < img.size(); ++i) worst = std::max(worst, std::fabs(img.g[i] - 1.0) / img.g_se[i]);
      checks.push_back({label, "null contrast |g-1|/SE (max)", worst, 0.0, z, worst < z});
      continue;
    }
    const double wz0 = worst_z(classes.zero_units, m0);
    checks.push_back({label, "raw moment t=0 (max |z|)", wz0, 0.0, z, wz0 < z});
    const double wz1 = worst_z(classes.one_units, m1);
    checks.push_back({label, "raw moment t=1 (max |z|)", wz1, 0.0, z, wz1 < z});
    const double bm = bucket_moment(m, mu, cfg.i0);
    checks.push_back({label, "<I_B^mu>", img.bucket_mean, bm, z * img.bucket_se,
                      std::fabs(img.bucket_mean - bm) <= z * img.bucket_se});
    double weakest = std::numeric_limits<double>::infinity();
    bool signs_ok = true;
    for (auto i : classes.one_units) {
      const double c = img.g[i] - 1.0;
      signs_ok = signs_ok && ((c > 0.0) == (mu > 0.0));
      weakest = std::min(weakest, std::fabs(c) / img.g_se[i]);
    }
    checks.push_back({label, "contrast sign = sign(mu), min |g-1|/SE", weakest, 0.0, z, signs_ok && weakest > z});

    std::vector<MomentAccumulator> groups;
    for (const auto& grp : pass.groups) groups.push_back(grp[k]);
    const auto jv = jackknife(groups, [&](const MomentAccumulator& a) {
      const auto cm = class_moments(a, classes);
      return std::fabs(cm.mean_signal - cm.mean_background) / (cm.mean_signal + cm.mean_background);
    });
    const double va = visibility(m, mu, nu);
    checks.push_back({label, "visibility V", jv.value, va, z * jv.se, std::fabs(jv.value - va) <= z * jv.se});

    const auto jr = jackknife(groups, [&](const MomentAccumulator& a) {
      return empirical_peak_snr(a, classes) / std::sqrt(static_cast<double>(a.count()));
    });
    const double sqrt_n = std::sqrt(static_cast<double>(cfg.samples));
    const double ra = peak_snr(m, mu, nu, static_cast<double>(cfg.samples));
    checks.push_back({label, "peak SNR R_p", jr.value * sqrt_n, ra, z * jr.se * sqrt_n,
                      std::fabs(jr.value * sqrt_n - ra) <= z * jr.se * sqrt_n});
  }
  return checks;
}

inline int cmd_validate(const CliConfig& cfg, std::ostream& out = std::cout) {
  const auto checks = run_validation(cfg);
  bool all = true;
  char line[256];
  for (const auto& c : checks) {
    std::snprintf(line, sizeof line, "%s  %-26s %-44s observed=%-13.6g expected=%-13.6g margin=%-11.4g\n",
                  c.pass ? "PASS" : "FAIL", c.order.c_str(), c.name.c_str(), c.observed, c.expected, c.margin);
    out << line;
    all = all && c.pass;
  }
  out << (all ? "all checks within 5 standard errors\n" : "some checks failed\n");
  return all ? 0 : static_cast<int>(ExitCode::runtime);
}

} // namespace fracgi::cli
