#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fracgi/error.hpp"
#include "fracgi/object_model.hpp"
#include "fracgi/philox.hpp"
#include "fracgi/summation.hpp"

namespace fracgi {

struct SpeckleConfig {
  double mean_intensity = 1.0; // I_0
  std::uint64_t seed = 0;
  std::size_t n = 1;

  void validate() const {
    if (!(mean_intensity > 0.0) || !std::isfinite(mean_intensity))
      throw UsageError("mean intensity must be positive and finite");
    if (n == 0) throw UsageError("unit count must be at least 1");
  }
};

struct SpeckleFrame {
  std::vector<double> reference;
  double bucket = 0.0;
};

/// Fills `out` with i.i.d. exponential intensities of mean I_0 for the given
/// frame. The draw is -I_0 ln U with U in (0,1]; results below the smallest
/// normal double are clamped up to it so later logarithms stay finite.
inline void generate_frame(const SpeckleConfig& config, std::uint64_t frame_index,
                           std::span<double> out) {
  config.validate();
  if (out.size() != config.n) throw UsageError("frame buffer size does not match unit count");
  PhiloxStream rng(config.seed, frame_index);
  constexpr double floor = std::numeric_limits<double>::min();
  for (double& v : out) {
    const double x = -config.mean_intensity * std::log(rng.next_open_closed());
    v = x < floor ? floor : x;
  }
}

inline std::vector<double> generate_frame(const SpeckleConfig& config, std::uint64_t frame_index) {
  std::vector<double> out(config.n);
  generate_frame(config, frame_index, out);
  return out;
}

inline double bucket_signal(std::span<const double> reference, const ObjectMask& mask) {
  if (reference.size() != mask.size())
    throw UsageError("reference length " + std::to_string(reference.size()) +
                     " does not match mask size " + std::to_string(mask.size()));
  CompensatedSum s;
  for (std::size_t i = 0; i < reference.size(); ++i)
    if (mask[i] != 0.0) s.add(mask[i] * reference[i]);
  return s.value();
}

// How bucket values are paired with reference frames. `decorrelated` pairs
// frame j's reference with the bucket of frame (j + N/2) mod N, which keeps
// both marginals but destroys their correlation.
enum class Pairing { matched, decorrelated };

/// N speckle frames of one simulated acquisition. Frames are produced on
/// demand; frame j depends only on (seed, j).
class SampleSet {
public:
  SampleSet(SpeckleConfig config, ObjectMask mask, std::size_t frame_count,
            Pairing pairing = Pairing::matched)
      : config_(config), mask_(std::move(mask)), frame_count_(frame_count), pairing_(pairing) {
    config_.validate();
    if (config_.n != mask_.size()) throw UsageError("speckle unit count does not match mask size");
    if (frame_count_ == 0) throw UsageError("number of samples must be at least 1");
    if (pairing_ == Pairing::decorrelated && frame_count_ < 2)
      throw UsageError("decorrelated pairing needs at least 2 samples");
  }

  std::size_t size() const noexcept { return frame_count_; }
  const SpeckleConfig& config() const noexcept { return config_; }
  const ObjectMask& mask() const noexcept { return mask_; }
  Pairing pairing() const noexcept { return pairing_; }

  // Writes the reference intensities of frame j into `reference` and returns
  // the bucket value paired with it.
  double load(std::size_t j, std::span<double> reference, std::span<double> scratch) const {
    generate_frame(config_, j, reference);
    if (pairing_ == Pairing::matched) return bucket_signal(reference, mask_);
    generate_frame(config_, partner(j), scratch);
    return bucket_signal(scratch, mask_);
  }

  SpeckleFrame frame(std::size_t j) const {
    SpeckleFrame f;
    f.reference.resize(config_.n);
    std::vector<double> scratch(pairing_ == Pairing::matched ? 0 : config_.n);
    f.bucket = load(j, f.reference, scratch);
    return f;
  }

private:
  std::size_t partner(std::size_t j) const noexcept {
    return (j + frame_count_ / 2) % frame_count_;
  }

  SpeckleConfig config_;
  ObjectMask mask_;
  std::size_t frame_count_;
  Pairing pairing_;
};

inline SampleSet run_simulation(const SpeckleConfig& config, const ObjectMask& mask,
                                std::size_t frame_count) {
  return SampleSet(config, mask, frame_count);
}

// Raw dump layout: one line of JSON header, then per frame a little-endian
// record (frame_index: u64, I_B: f64, n x f64 reference).
inline void write_raw_dump(const SampleSet& samples, const std::string& path) {
  static_assert(std::endian::native == std::endian::little, "raw dump assumes little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  const auto& cfg = samples.config();
  nlohmann::json header = {{"format", "fracgi-raw"}, {"version", 1},       {"n", cfg.n},
                           {"N", samples.size()},    {"I0", cfg.mean_intensity}, {"seed", cfg.seed}};
  out << header.dump() << '\n';
  std::vector<double> ref(cfg.n), scratch(cfg.n);
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const std::uint64_t idx = j;
    const double bucket = samples.load(j, ref, scratch);
    out.write(reinterpret_cast<const char*>(&idx), sizeof idx);
    out.write(reinterpret_cast<const char*>(&bucket), sizeof bucket);
    out.write(reinterpret_cast<const char*>(ref.data()),
              static_cast<std::streamsize>(ref.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failure on '" + path + "'");
}

struct RawDump {
  nlohmann::json header;
  std::vector<std::uint64_t> frame_index;
  std::vector<SpeckleFrame> frames;
};

inline RawDump read_raw_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  RawDump dump;
  try {
    dump.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("raw dump header: ") + e.what());
  }
  const auto n = dump.header.at("n").get<std::size_t>();
  const auto count = dump.header.at("N").get<std::size_t>();
  for (std::size_t j = 0; j < count; ++j) {
    std::uint64_t idx = 0;
    SpeckleFrame f;
    f.reference.resize(n);
    in.read(reinterpret_cast<char*>(&idx), sizeof idx);
    in.read(reinterpret_cast<char*>(&f.bucket), sizeof f.bucket);
    in.read(reinterpret_cast<char*>(f.reference.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw FormatError("raw dump truncated at frame " + std::to_string(j));
    dump.frame_index.push_back(idx);
    dump.frames.push_back(std::move(f));
  }
  return dump;
}

} // namespace fracgi
