#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fracgi/error.hpp"

namespace fracgi {

/// Transmittance map of the imaged object, stored row-major. Unit i sits at
/// column i % width, row i / width.
class ObjectMask {
public:
  ObjectMask(std::size_t width, std::size_t height, std::vector<double> units)
      : width_(width), height_(height), units_(std::move(units)) {
    if (width_ == 0 || height_ == 0)
      throw UsageError("object mask must be at least 1x1");
    if (width_ * height_ != units_.size())
      throw UsageError("object mask size " + std::to_string(units_.size()) +
                       " does not match " + std::to_string(width_) + "x" +
                       std::to_string(height_));
    for (std::size_t i = 0; i < units_.size(); ++i) {
      const double t = units_[i];
      if (!(t >= 0.0 && t <= 1.0))
        throw UsageError("transmittance of unit " + std::to_string(i) +
                         " is outside [0,1]");
    }
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return units_.size(); }
  double operator[](std::size_t i) const noexcept { return units_[i]; }
  std::span<const double> units() const noexcept { return units_; }

  bool operator==(const ObjectMask&) const = default;

private:
  std::size_t width_;
  std::size_t height_;
  std::vector<double> units_;
};

struct UnitClasses {
  std::vector<std::size_t> zero_units;
  std::vector<std::size_t> one_units;
  std::vector<std::size_t> fractional_units;
  // Number of unit-transmittance pixels; only defined for binary masks.
  std::optional<std::size_t> m;

  bool is_binary() const noexcept { return fractional_units.empty(); }
};

inline UnitClasses classify_units(const ObjectMask& mask, double tol = 0.0) {
  UnitClasses out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double t = mask[i];
    if (t <= tol)
      out.zero_units.push_back(i);
    else if (t >= 1.0 - tol)
      out.one_units.push_back(i);
    else
      out.fractional_units.push_back(i);
  }
  if (out.fractional_units.empty()) out.m = out.one_units.size();
  return out;
}

struct HistogramBin {
  double value;
  std::size_t count;
  bool operator==(const HistogramBin&) const = default;
};

/// Distinct transmittance values in ascending order with their multiplicities.
inline std::vector<HistogramBin> histogram(const ObjectMask& mask) {
  std::vector<double> sorted(mask.units().begin(), mask.units().end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<HistogramBin> bins;
  for (double t : sorted) {
    if (!bins.empty() && bins.back().value == t)
      ++bins.back().count;
    else
      bins.push_back({t, 1});
  }
  return bins;
}

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on '" + path + "'");
  return data;
}

// Next whitespace-delimited header token of a netpbm file, skipping comments.
inline std::string pnm_token(std::string_view data, std::size_t& pos) {
  for (;;) {
    while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    if (pos < data.size() && data[pos] == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
  return std::string(data.substr(start, pos - start));
}

inline std::size_t parse_header_int(const std::string& token, const char* what) {
  if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos)
    throw FormatError(std::string("graymap header: bad ") + what + " '" + token + "'");
  return std::stoul(token);
}

} // namespace detail

/// Raw samples of a binary portable graymap together with its maxval.
struct Graymap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::uint32_t maxval = 0;
  std::vector<std::uint16_t> pixels;
};

inline Graymap parse_pgm(std::string_view data) {
  std::size_t pos = 0;
  if (detail::pnm_token(data, pos) != "P5") throw FormatError("not a binary graymap (P5)");
  Graymap g;
  g.width = detail::parse_header_int(detail::pnm_token(data, pos), "width");
  g.height = detail::parse_header_int(detail::pnm_token(data, pos), "height");
  const auto maxval = detail::parse_header_int(detail::pnm_token(data, pos), "maxval");
  if (maxval == 0 || maxval > 65535) throw FormatError("graymap maxval out of range");
  g.maxval = static_cast<std::uint32_t>(maxval);
  if (g.width == 0 || g.height == 0) throw FormatError("empty graymap");
  ++pos; // single whitespace byte before the raster
  const std::size_t count = g.width * g.height;
  const std::size_t bytes_per = g.maxval < 256 ? 1 : 2;
  if (pos > data.size() || data.size() - pos < count * bytes_per)
    throw FormatError("graymap raster truncated");
  g.pixels.resize(count);
  const auto* raw = reinterpret_cast<const unsigned char*>(data.data() + pos);
  for (std::size_t i = 0; i < count; ++i) {
    g.pixels[i] = bytes_per == 1
                      ? raw[i]
                      : static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    if (g.pixels[i] > g.maxval) throw FormatError("graymap sample exceeds maxval");
  }
  return g;
}

/// Rows are separated by newlines or ';', values by ','. Values are taken as
/// transmittances directly.
inline ObjectMask parse_mask_csv(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::string row;
  auto flush_row = [&]() {
    const auto first = row.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
      row.clear();
      return;
    }
    std::vector<double> values;
    std::stringstream ss(row);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw FormatError("mask CSV: cannot parse '" + cell + "'");
      }
      if (cell.find_first_not_of(" \t\r", used) != std::string::npos)
        throw FormatError("mask CSV: trailing characters in '" + cell + "'");
      values.push_back(v);
    }
    rows.push_back(std::move(values));
    row.clear();
  };
  for (char c : text) {
    if (c == '\n' || c == ';')
      flush_row();
    else
      row.push_back(c);
  }
  flush_row();
  if (rows.empty()) throw FormatError("mask CSV is empty");
  const std::size_t width = rows.front().size();
  std::vector<double> units;
  for (const auto& r : rows) {
    if (r.size() != width) throw FormatError("mask CSV rows have unequal lengths");
    units.insert(units.end(), r.begin(), r.end());
  }
  for (double t : units)
    if (!(t >= 0.0 && t <= 1.0)) throw FormatError("mask CSV value outside [0,1]");
  return ObjectMask(width, rows.size(), std::move(units));
}

inline ObjectMask binarize(const ObjectMask& mask, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw UsageError("binarize threshold must lie in (0,1)");
  std::vector<double> out(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] >= threshold ? 1.0 : 0.0;
  return ObjectMask(mask.width(), mask.height(), std::move(out));
}

/// Graymap samples are scaled by 1/maxval; no min-max normalization.
inline ObjectMask mask_from_graymap(const Graymap& g) {
  std::vector<double> units(g.pixels.size());
  for (std::size_t i = 0; i < units.size(); ++i)
    units[i] = static_cast<double>(g.pixels[i]) / static_cast<double>(g.maxval);
  return ObjectMask(g.width, g.height, std::move(units));
}

/// Decodes a P5 graymap or a CSV mask (sniffed from the leading magic).
inline ObjectMask load_object_from_bytes(std::string_view data,
                                         std::optional<double> binarize_threshold = {}) {
  if (data.empty()) throw FormatError("object source is empty");
  ObjectMask mask = data.starts_with("P5") ? mask_from_graymap(parse_pgm(data))
                                           : parse_mask_csv(data);
  if (binarize_threshold) return binarize(mask, *binarize_threshold);
  return mask;
}

inline ObjectMask load_object(const std::string& path,
                              std::optional<double> binarize_threshold = {}) {
  return load_object_from_bytes(detail::read_file(path), binarize_threshold);
}

inline std::string mask_to_csv(const ObjectMask& mask) {
  std::string out;
  char buf[32];
  for (std::size_t r = 0; r < mask.height(); ++r) {
    for (std::size_t c = 0; c < mask.width(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", mask[r * mask.width() + c]);
      if (c) out.push_back(',');
      out += buf;
    }
    out.push_back('\n');
  }
  return out;
}

inline void write_mask_csv(const ObjectMask& mask, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << mask_to_csv(mask);
  if (!out) throw IoError("write failure on '" + path + "'");
}

} // namespace fracgi
