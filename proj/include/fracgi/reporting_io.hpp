#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "fracgi/error.hpp"
#include "fracgi/moment_engine.hpp"
#include "fracgi/object_model.hpp"

namespace fracgi {

inline constexpr const char* kReportVersion = "1";

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write failure on '" + path + "'");
}

inline std::string format_g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

} // namespace detail

/// Hex SHA-256 of the mask shape and its transmittances as little-endian
/// doubles.
inline std::string mask_digest(const ObjectMask& mask) {
  std::vector<unsigned char> bytes;
  auto put = [&](const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    bytes.insert(bytes.end(), c, c + n);
  };
  const std::uint64_t w = mask.width(), h = mask.height();
  put(&w, sizeof w);
  put(&h, sizeof h);
  put(mask.units().data(), mask.size() * sizeof(double));
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

// ---------------------------------------------------------------------------
// Ghost images: 16-bit P5 graymap, min-max scaled, with a JSON sidecar that
// records the scale.

inline std::string sidecar_path(const std::string& image_path) {
  return std::filesystem::path(image_path).replace_extension(".json").string();
}

inline void write_ghost_image(const GhostImage& image, const std::string& path) {
  if (image.g.size() != image.width * image.height) throw UsageError("ghost image size mismatch");
  for (double v : image.g)
    if (!std::isfinite(v)) throw DomainError("ghost image contains non-finite values");
  const auto [lo_it, hi_it] = std::minmax_element(image.g.begin(), image.g.end());
  const double lo = *lo_it, hi = *hi_it;
  std::string data = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                     "\n65535\n";
  for (double v : image.g) {
    const std::uint16_t q =
        hi > lo ? static_cast<std::uint16_t>(std::lround((v - lo) / (hi - lo) * 65535.0)) : 32768;
    data.push_back(static_cast<char>(q >> 8));
    data.push_back(static_cast<char>(q & 0xff));
  }
  detail::write_text(path, data);
  nlohmann::json side = {{"format", "fracgi-ghost-image"},
                         {"version", kReportVersion},
                         {"width", image.width},
                         {"height", image.height},
                         {"mu", image.order.mu()},
                         {"nu", image.order.nu()},
                         {"samples", image.count},
                         {"g_min", lo},
                         {"g_max", hi}};
  detail::write_text(sidecar_path(path), side.dump(2) + "\n");
}

struct DecodedImage {
  std::size_t width = 0;
  std::size_t height = 0;
  double g_min = 0.0;
  double g_max = 0.0;
  std::vector<double> values;
};

/// Reads a ghost image back through its sidecar; values carry the
/// quantization error of at most (g_max - g_min) / 65535 / 2.
inline DecodedImage read_ghost_image(const std::string& path) {
  const auto g = parse_pgm(detail::read_file(path));
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(detail::read_file(sidecar_path(path)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("ghost image sidecar: ") + e.what());
  }
  DecodedImage out{g.width, g.height, side.at("g_min").get<double>(), side.at("g_max").get<double>(), {}};
  out.values.resize(g.pixels.size());
  for (std::size_t i = 0; i < g.pixels.size(); ++i)
    out.values[i] = out.g_max > out.g_min
                        ? out.g_min + (out.g_max - out.g_min) * g.pixels[i] / static_cast<double>(g.maxval)
                        : out.g_min;
  return out;
}

// ---------------------------------------------------------------------------
// Sweep tables.

struct SweepRow {
  std::size_t m = 0;
  double mu = 0.0;
  double nu = 0.0;
  std::optional<double> visibility;
  std::optional<double> rp_over_sqrt_n;
  bool moment_finite = false;
  bool variance_finite = false;
};

inline constexpr const char* kSweepHeader = "m,mu,nu,V,Rp_over_sqrtN,moment_finite,variance_finite";

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = std::string(kSweepHeader) + "\n";
  auto opt = [](const std::optional<double>& v) { return v ? detail::format_g17(*v) : std::string(); };
  for (const auto& r : rows) {
    out += std::to_string(r.m) + "," + detail::format_g17(r.mu) + "," + detail::format_g17(r.nu) + "," +
           opt(r.visibility) + "," + opt(r.rp_over_sqrt_n) + "," +
           (r.moment_finite ? "true" : "false") + "," + (r.variance_finite ? "true" : "false") + "\n";
  }
  return out;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  detail::write_text(path, sweep_csv(rows));
}

// ---------------------------------------------------------------------------
// Run reports.

struct OrderResult {
  double mu = 0.0;
  double nu = 0.0;
  std::optional<double> empirical_visibility;
  std::optional<double> empirical_peak_snr;
  std::optional<double> analytic_visibility;
  std::optional<double> analytic_peak_snr;
  double mean_signal = 0.0;
  double mean_background = 0.0;
  std::size_t excluded_units = 0;
  std::string image;

  bool operator==(const OrderResult&) const = default;
};

struct RunReport {
  std::string version = kReportVersion;
  std::string mask_digest;
  std::size_t width = 0;
  std::size_t height = 0;
  std::optional<std::size_t> m;
  double i0 = 1.0;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  std::string pairing = "matched";
  std::vector<OrderResult> results;

  bool operator==(const RunReport&) const = default;
};

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline const nlohmann::json& require_key(const nlohmann::json& j, const char* key,
                                         const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw FormatError("report schema: missing required key '" + std::string(key) + "'" +
                      (where.empty() ? "" : " in " + where));
  return j.at(key);
}

inline std::optional<double> read_opt(const nlohmann::json& j, const char* key, const std::string& where) {
  const auto& v = require_key(j, key, where);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

} // namespace detail

inline nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json results = nlohmann::json::array();
  for (const auto& o : r.results) {
    results.push_back({{"mu", o.mu},
                       {"nu", o.nu},
                       {"empirical_visibility", detail::opt_json(o.empirical_visibility)},
                       {"empirical_peak_snr", detail::opt_json(o.empirical_peak_snr)},
                       {"analytic_visibility", detail::opt_json(o.analytic_visibility)},
                       {"analytic_peak_snr", detail::opt_json(o.analytic_peak_snr)},
                       {"mean_signal", o.mean_signal},
                       {"mean_background", o.mean_background},
                       {"excluded_units", o.excluded_units},
                       {"image", o.image}});
  }
  nlohmann::json config = {{"mask_digest", r.mask_digest},
                           {"width", r.width},
                           {"height", r.height},
                           {"m", r.m ? nlohmann::json(*r.m) : nlohmann::json(nullptr)},
                           {"I0", r.i0},
                           {"seed", r.seed},
                           {"samples", r.samples},
                           {"pairing", r.pairing}};
  return {{"version", r.version}, {"config", config}, {"results", results}};
}

inline RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  try {
    const auto& version = detail::require_key(j, "version", "");
    if (!version.is_string() || version.get<std::string>() != kReportVersion)
      throw FormatError("report version " + version.dump() + " is not supported (expected \"" +
                        kReportVersion + "\")");
    r.version = version.get<std::string>();
    const auto& c = detail::require_key(j, "config", "");
    r.mask_digest = detail::require_key(c, "mask_digest", "config").get<std::string>();
    r.width = detail::require_key(c, "width", "config").get<std::size_t>();
    r.height = detail::require_key(c, "height", "config").get<std::size_t>();
    const auto& m = detail::require_key(c, "m", "config");
    if (!m.is_null()) r.m = m.get<std::size_t>();
    r.i0 = detail::require_key(c, "I0", "config").get<double>();
    r.seed = detail::require_key(c, "seed", "config").get<std::uint64_t>();
    r.samples = detail::require_key(c, "samples", "config").get<std::size_t>();
    r.pairing = detail::require_key(c, "pairing", "config").get<std::string>();
    const auto& results = detail::require_key(j, "results", "");
    for (const auto& o : results) {
      OrderResult out;
      out.mu = detail::require_key(o, "mu", "results").get<double>();
      out.nu = detail::require_key(o, "nu", "results").get<double>();
      out.empirical_visibility = detail::read_opt(o, "empirical_visibility", "results");
      out.empirical_peak_snr = detail::read_opt(o, "empirical_peak_snr", "results");
      out.analytic_visibility = detail::read_opt(o, "analytic_visibility", "results");
      out.analytic_peak_snr = detail::read_opt(o, "analytic_peak_snr", "results");
      out.mean_signal = detail::require_key(o, "mean_signal", "results").get<double>();
      out.mean_background = detail::require_key(o, "mean_background", "results").get<double>();
      out.excluded_units = detail::require_key(o, "excluded_units", "results").get<std::size_t>();
      out.image = detail::require_key(o, "image", "results").get<std::string>();
      r.results.push_back(std::move(out));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report schema: ") + e.what());
  }
  return r;
}

inline std::string report_text(const RunReport& r) { return report_to_json(r).dump(2) + "\n"; }

inline void write_report(const RunReport& r, const std::string& path) {
  detail::write_text(path, report_text(r));
}

inline RunReport read_report(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed report '" + path + "': " + e.what());
  }
  return report_from_json(j);
}

} // namespace fracgi
