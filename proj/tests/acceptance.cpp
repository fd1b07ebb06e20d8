// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "fracgi/analytic.hpp"
#include "fracgi/builtin_masks.hpp"
#include "fracgi/cli.hpp"
#include "fracgi/metrics.hpp"
#include "fracgi/moment_engine.hpp"
#include "fracgi/speckle_sim.hpp"

using namespace fracgi;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::printf("[%s] %d. %s: %s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const std::vector<MomentOrder> kPanel{{-2.7183, 0.5}, {-1.414, 0.5}, {-0.618, 0.5},
                                      {0.618, 0.5},   {1.414, 0.5},  {2.7183, 0.5}};

// Shared by criteria 1 and 2: m = 20, I_0 = 1, N = 200000.
struct PanelRun {
  std::vector<GhostImage> images;
  double seconds = 0.0;
};

const PanelRun& panel_run() {
  static const PanelRun run = [] {
    const auto t0 = Clock::now();
    const auto mask = letter_a_mask();
    const SampleSet set({1.0, 20240601, mask.size()}, mask, 200000);
    PanelRun r;
    r.images = multi_order_pass(set, kPanel, 1);
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

Outcome criterion_moments() {
  const auto& run = panel_run();
  const auto classes = classify_units(letter_a_mask());
  double worst = 0.0;
  for (const auto& img : run.images) {
    const double mu = img.order.mu(), nu = img.order.nu();
    const double m0 = moment_background(20, mu, nu), m1 = moment_signal(20, mu, nu);
    for (auto i : classes.zero_units) worst = std::max(worst, std::fabs(img.joint_mean[i] - m0) / img.joint_se[i]);
    for (auto i : classes.one_units) worst = std::max(worst, std::fabs(img.joint_mean[i] - m1) / img.joint_se[i]);
  }
  return {worst < 5.0 && run.seconds < 60.0,
          fmt("max per-pixel |z| = %.2f over 6 orders x 63 pixels, pass time %.2f s", worst, run.seconds)};
}

Outcome criterion_sign_law() {
  const auto& run = panel_run();
  const auto classes = classify_units(letter_a_mask());
  bool ok = true;
  double weakest = 1e300;
  for (const auto& img : run.images) {
    double mean = 0.0, se = 0.0;
    for (auto i : classes.one_units) {
      mean += img.g[i] - 1.0;
      se += img.g_se[i];
      ok = ok && ((img.g[i] - 1.0 > 0.0) == (img.order.mu() > 0.0));
      weakest = std::min(weakest, std::fabs(img.g[i] - 1.0) / img.g_se[i]);
    }
    mean /= static_cast<double>(classes.one_units.size());
    ok = ok && ((mean > 0.0) == (img.order.mu() > 0.0));
  }
  ok = ok && weakest > 5.0;
  return {ok, fmt("sign(g-1) = sign(mu) at every signal pixel, min |g-1|/SE = %.1f", weakest)};
}

Outcome criterion_classic_contrast() {
  bool ok = true;
  std::string detail;
  for (std::size_t m : {5, 20}) {
    const auto mask = builtin_binary_mask(m);
    const auto classes = classify_units(mask);
    const SampleSet set({1.0, 500 + m, mask.size()}, mask, 200000);
    const auto img = multi_order_pass(set, std::vector<MomentOrder>{{1.0, 1.0}})[0];
    double worst = 0.0;
    for (auto i : classes.one_units)
      worst = std::max(worst, std::fabs(img.g[i] - 1.0 - 1.0 / static_cast<double>(m)) / img.g_se[i]);
    const double v = visibility(m, 1.0, 1.0), exact = 1.0 / (2.0 * m + 1.0);
    const double rel = std::fabs(v - exact) / exact;
    ok = ok && worst < 5.0 && rel < 1e-13;
    detail += fmt("%sm=%zu: max |g-1-1/m|/SE = %.2f, |V-1/(2m+1)|/V = %.1e", detail.empty() ? "" : "; ", m, worst, rel);
  }
  return {ok, detail};
}

Outcome criterion_visibility_properties() {
  const auto t0 = Clock::now();
  std::size_t violations = 0, findings = 0, points = 0;
  for (std::size_t m : {20, 30})
    for (int k = -30; k <= 30; ++k) {
      if (k == 0) continue;
      const double mu = k / 10.0;
      double prev = 0.0;
      for (int q = 1; q <= 30; ++q) {
        const double nu = q / 10.0;
        const double v = visibility(m, mu, nu);
        ++points;
        if (!(v > prev)) ++violations;
        prev = v;
        if (std::abs(k) > 1 && !(v > visibility(m, mu - (mu > 0 ? 0.1 : -0.1), nu))) ++violations;
        if (m == 20 && !(visibility(30, mu, nu) < v)) ++violations;
        if (mu > 0.0 && !(visibility(m, -mu, nu) > v)) ++findings;
      }
    }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < 5.0,
          fmt("%zu grid points, %zu monotonicity violations, %zu V(-mu) <= V(mu) findings, %.3f s", points,
              violations, findings, secs)};
}

Outcome criterion_snr_shape() {
  double peak[2] = {0, 0}, where[2] = {0, 0};
  bool interior = true;
  const double mus[] = {1.0, -1.0};
  for (int s = 0; s < 2; ++s) {
    for (int k = 1; k <= 3000; ++k) {
      const double nu = k / 1000.0;
      const double r = peak_snr_relative(20, mus[s], nu);
      if (r > peak[s]) peak[s] = r, where[s] = nu;
    }
    interior = interior && where[s] > 0.001 && where[s] < 3.0 &&
               peak_snr_relative(20, mus[s], 0.001) < peak[s] && peak_snr_relative(20, mus[s], 3.0) < peak[s];
  }
  return {interior && peak[1] > peak[0],
          fmt("mu=+1 max %.8f at nu=%.3f; mu=-1 max %.8f at nu=%.3f", peak[0], where[0], peak[1], where[1])};
}

Outcome criterion_distributions() {
  std::string detail;
  bool ok = true;
  for (std::size_t m : {2, 5}) {
    const auto mask = builtin_binary_mask(m);
    const std::size_t n = 100000;
    const SampleSet set({1.0, 7000 + m, mask.size()}, mask, n);
    std::vector<double> b(n), ref(mask.size());
    for (std::size_t j = 0; j < n; ++j) b[j] = set.load(j, ref, {});
    const auto model = bucket_pdf_binary(m);
    const double p = ks_pvalue(ks_statistic(b, [&](double x) { return model.cdf(x); }), n);
    ok = ok && p > 1e-3;
    detail += fmt("Erlang m=%zu KS p=%.3f; ", m, p);
  }
  const ObjectMask gray(3, 1, {0.2, 0.5, 1.0});
  const auto model = bucket_pdf_general(gray);
  boost::math::quadrature::exp_sinh<double> integrator;
  const double norm = integrator.integrate([&](double x) { return model.pdf(x); }, 0.0,
                                           std::numeric_limits<double>::infinity(), 1e-13);
  const std::size_t n = 1000000;
  const SampleSet set({1.0, 8080, 3}, gray, n);
  std::vector<double> b(n), ref(3);
  for (std::size_t j = 0; j < n; ++j) b[j] = set.load(j, ref, {});
  const double p = ks_pvalue(ks_statistic(b, [&](double x) { return model.cdf(x); }), n);
  ok = ok && std::fabs(norm - 1.0) < 1e-9 && p > 1e-3;
  detail += fmt("3-pole |integral-1| = %.1e, KS p=%.3f (N=10^6)", std::fabs(norm - 1.0), p);
  return {ok, detail};
}

Outcome criterion_quadrature() {
  const auto mask = letter_a_mask();
  const auto classes = classify_units(mask);
  double worst = 0.0;
  for (const auto& o : kPanel) {
    const double s = moment_general(mask, classes.one_units[0], o.mu(), o.nu());
    const double b = moment_general(mask, classes.zero_units[0], o.mu(), o.nu());
    worst = std::max(worst, std::fabs(s / moment_signal(20, o.mu(), o.nu()) - 1.0));
    worst = std::max(worst, std::fabs(b / moment_background(20, o.mu(), o.nu()) - 1.0));
  }
  const double gray = moment_general(ObjectMask(3, 1, {0.2, 0.5, 1.0}), 1, 1.0, 1.0);
  const double gray_rel = std::fabs(gray - 2.2) / 2.2;
  return {worst < 1e-6 && gray_rel < 1e-8,
          fmt("binary max rel. error %.1e; grayscale E[I_B I_i] = %.12f (rel. error %.1e)", worst, gray, gray_rel)};
}

std::string dir_bytes(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    all += f.filename().string() + "\n" + std::string(std::istreambuf_iterator<char>(in), {});
  }
  return all;
}

Outcome criterion_determinism() {
  const auto root = fs::temp_directory_path() / "fracgi_acceptance_determinism";
  fs::remove_all(root);
  cli::CliConfig cfg;
  cfg.samples = 50000;
  cfg.seed = 7;
  std::ostringstream sink;
  std::vector<std::string> runs;
  for (std::size_t workers : {1, 1, 2, 4}) {
    cfg.workers = workers;
    cfg.out_dir = (root / ("w" + std::to_string(workers) + "_" + std::to_string(runs.size()))).string();
    if (cli::cmd_simulate(cfg, sink, sink) != 0) return {false, "simulate failed"};
    runs.push_back(dir_bytes(cfg.out_dir));
  }
  bool same = true;
  for (const auto& r : runs) same = same && r == runs[0];
  fs::remove_all(root);
  return {same, fmt("4 runs (workers 1, 1, 2, 4): %s, %zu bytes per run", same ? "byte-identical" : "DIFFER",
                    runs[0].size())};
}

Outcome criterion_null() {
  const auto mask = letter_a_mask();
  const SampleSet set({1.0, 99, mask.size()}, mask, 200000, Pairing::decorrelated);
  const auto images = multi_order_pass(set, kPanel);
  double worst = 0.0;
  for (const auto& img : images)
    for (std::size_t i = 0; i < img.size(); ++i) worst = std::max(worst, std::fabs(img.g[i] - 1.0) / img.g_se[i]);
  return {worst < 5.0, fmt("decorrelated pairing: max |g-1|/SE = %.2f over 6 orders x 63 pixels", worst)};
}

} // namespace

int main() {
  report(1, "Monte Carlo moments vs closed forms", criterion_moments);
  report(2, "contrast sign follows sign(mu)", criterion_sign_law);
  report(3, "classic contrast anchor mu=nu=1", criterion_classic_contrast);
  report(4, "visibility grid properties", criterion_visibility_properties);
  report(5, "peak SNR shape in nu", criterion_snr_shape);
  report(6, "bucket law distribution checks", criterion_distributions);
  report(7, "quadrature moments vs exact values", criterion_quadrature);
  report(8, "simulate output determinism", criterion_determinism);
  report(9, "decorrelated null test", criterion_null);
  std::printf("%s: %d of 9 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
