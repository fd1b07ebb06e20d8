#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fracgi/error.hpp"
#include "fracgi/parallel.hpp"
#include "fracgi/speckle_sim.hpp"
#include "fracgi/summation.hpp"

namespace fracgi {

/// Order pair (mu, nu) of the moment <I_B^mu I_i^nu>. mu = 0 is rejected
/// outright. nu must be positive unless the caller opts in, and even then
/// nu <= -1/2 is refused because Gamma(1 + 2 nu) diverges and the estimator
/// has infinite variance.
class MomentOrder {
public:
  enum class NuPolicy { positive_only, allow_nonpositive };

  MomentOrder(double mu, double nu, NuPolicy policy = NuPolicy::positive_only) : mu_(mu), nu_(nu) {
    if (!std::isfinite(mu) || !std::isfinite(nu)) throw UsageError("orders must be finite");
    if (mu == 0.0) throw UsageError("mu must be nonzero (mu = 0 gives an object-independent image)");
    if (nu <= -0.5)
      throw DomainError("1+2nu <= 0: estimator variance diverges for nu = " + std::to_string(nu));
    if (nu <= 0.0 && policy == NuPolicy::positive_only)
      throw DomainError("nu <= 0 is outside the default domain nu > 0 (nu = " + std::to_string(nu) +
                        ")");
  }

  double mu() const noexcept { return mu_; }
  double nu() const noexcept { return nu_; }
  // Non-positive nu gives heavy-tailed reference powers.
  bool heavy_tailed() const noexcept { return nu_ <= 0.0; }

  bool operator==(const MomentOrder&) const = default;

private:
  double mu_;
  double nu_;
};

/// Streaming sums for one order pair. Besides the sums needed for the
/// normalized image and the peak-SNR second moment, it keeps the cross
/// sums that give a delta-method standard error for the normalized image.
class MomentAccumulator {
public:
  MomentAccumulator(std::size_t width, std::size_t height, MomentOrder order)
      : width_(width), height_(height), order_(order), joint_(width * height),
        joint2_(width * height), ref_(width * height), ref2_(width * height),
        joint_bb_(width * height), joint_rr_(width * height) {}

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return joint_.size(); }
  std::size_t count() const noexcept { return count_; }
  const MomentOrder& order() const noexcept { return order_; }

  /// Adds one frame. Inputs are clamped to the smallest positive normal
  /// double before taking logarithms.
  void accumulate(double bucket, std::span<const double> reference) {
    std::vector<double> ref_pow(reference.size());
    for (std::size_t i = 0; i < reference.size(); ++i)
      ref_pow[i] = std::exp(order_.nu() * std::log(clamp_positive(reference[i])));
    accumulate_powers(std::exp(order_.mu() * std::log(clamp_positive(bucket))), ref_pow);
  }

  void accumulate(const SpeckleFrame& frame) { accumulate(frame.bucket, frame.reference); }

  /// Adds one frame given I_B^mu and the per-pixel I_i^nu.
  void accumulate_powers(double bucket_pow, std::span<const double> ref_pow) {
    if (ref_pow.size() != size())
      throw UsageError("frame has " + std::to_string(ref_pow.size()) + " units, accumulator " +
                       std::to_string(size()));
    const double b = bucket_pow;
    const double b2 = b * b;
    // Checked before any sum is touched so a rejected frame leaves no trace.
    bool finite = std::isfinite(b2);
    for (std::size_t i = 0; i < ref_pow.size() && finite; ++i) {
      const double p = ref_pow[i], j = b * p;
      finite = std::isfinite(j * j) && std::isfinite(b2 * p) && std::isfinite(b * p * p) &&
               std::isfinite(p * p);
    }
    if (!finite)
      throw DomainError("non-finite power: I_B^mu = " + std::to_string(b) + " for mu = " +
                        std::to_string(order_.mu()) + ", nu = " + std::to_string(order_.nu()) +
                        " (order too large for the intensity scale)");
    for (std::size_t i = 0; i < ref_pow.size(); ++i) {
      const double p = ref_pow[i];
      const double j = b * p;
      joint_[i].add(j);
      joint2_[i].add(j * j);
      ref_[i].add(p);
      ref2_[i].add(p * p);
      joint_bb_[i].add(b2 * p);
      joint_rr_[i].add(b * p * p);
    }
    bucket_.add(b);
    bucket2_.add(b2);
    ++count_;
  }

  /// Appends another accumulator's stream after this one.
  void merge(const MomentAccumulator& other) {
    if (other.size() != size() || !(other.order_ == order_))
      throw UsageError("cannot merge accumulators of different shape or order");
    for (std::size_t i = 0; i < size(); ++i) {
      joint_[i].merge(other.joint_[i]);
      joint2_[i].merge(other.joint2_[i]);
      ref_[i].merge(other.ref_[i]);
      ref2_[i].merge(other.ref2_[i]);
      joint_bb_[i].merge(other.joint_bb_[i]);
      joint_rr_[i].merge(other.joint_rr_[i]);
    }
    bucket_.merge(other.bucket_);
    bucket2_.merge(other.bucket2_);
    count_ += other.count_;
  }

  // Raw sums, in the accumulator's compensated form.
  double sum_joint(std::size_t i) const noexcept { return joint_[i].value(); }
  double sum_joint2(std::size_t i) const noexcept { return joint2_[i].value(); }
  double sum_ref(std::size_t i) const noexcept { return ref_[i].value(); }
  double sum_ref2(std::size_t i) const noexcept { return ref2_[i].value(); }
  double sum_joint_bucket2(std::size_t i) const noexcept { return joint_bb_[i].value(); }
  double sum_joint_ref2(std::size_t i) const noexcept { return joint_rr_[i].value(); }
  double sum_bucket() const noexcept { return bucket_.value(); }
  double sum_bucket2() const noexcept { return bucket2_.value(); }

private:
  static double clamp_positive(double x) noexcept {
    constexpr double floor = std::numeric_limits<double>::min();
    return x < floor ? floor : x;
  }

  std::size_t width_;
  std::size_t height_;
  MomentOrder order_;
  std::size_t count_ = 0;
  std::vector<CompensatedSum> joint_;    // sum I_B^mu I_i^nu
  std::vector<CompensatedSum> joint2_;   // sum I_B^2mu I_i^2nu
  std::vector<CompensatedSum> ref_;      // sum I_i^nu
  std::vector<CompensatedSum> ref2_;     // sum I_i^2nu
  std::vector<CompensatedSum> joint_bb_; // sum I_B^2mu I_i^nu
  std::vector<CompensatedSum> joint_rr_; // sum I_B^mu I_i^2nu
  CompensatedSum bucket_;                // sum I_B^mu
  CompensatedSum bucket2_;               // sum I_B^2mu
};

/// Normalized fractional-order moment image
/// g_i = <I_B^mu I_i^nu> / (<I_B^mu> <I_i^nu>) plus the raw estimates it is
/// built from.
struct GhostImage {
  std::size_t width = 0;
  std::size_t height = 0;
  MomentOrder order{1.0, 1.0};
  std::size_t count = 0;
  std::vector<double> g;
  std::vector<double> g_se;         // delta-method standard error of g
  std::vector<double> joint_mean;   // <I_B^mu I_i^nu>
  std::vector<double> joint_se;     // sqrt((<I_B^2mu I_i^2nu> - <.>^2) / N)
  std::vector<double> joint2_mean;  // <I_B^2mu I_i^2nu>
  std::vector<double> ref_mean;     // <I_i^nu>
  double bucket_mean = 0.0;         // <I_B^mu>
  double bucket_se = 0.0;

  std::size_t size() const noexcept { return g.size(); }
};

inline GhostImage finalize(const MomentAccumulator& acc) {
  if (acc.count() < 2)
    throw UsageError("at least 2 samples are needed, got " + std::to_string(acc.count()));
  const double n = static_cast<double>(acc.count());
  GhostImage img;
  img.width = acc.width();
  img.height = acc.height();
  img.order = acc.order();
  img.count = acc.count();
  const double B = acc.sum_bucket() / n;
  if (!(B > 0.0) || !std::isfinite(B)) throw DomainError("bucket moment <I_B^mu> is zero or non-finite");
  const double EB2 = acc.sum_bucket2() / n;
  img.bucket_mean = B;
  img.bucket_se = std::sqrt(std::max(0.0, EB2 - B * B) / n);
  const std::size_t size = acc.size();
  img.g.resize(size);
  img.g_se.resize(size);
  img.joint_mean.resize(size);
  img.joint_se.resize(size);
  img.joint2_mean.resize(size);
  img.ref_mean.resize(size);
  for (std::size_t i = 0; i < size; ++i) {
    const double A = acc.sum_joint(i) / n;
    const double C = acc.sum_ref(i) / n;
    if (!(C > 0.0)) throw DomainError("reference moment <I_i^nu> is zero at pixel " + std::to_string(i));
    const double EA2 = acc.sum_joint2(i) / n;
    const double EC2 = acc.sum_ref2(i) / n;
    const double EAB = acc.sum_joint_bucket2(i) / n;
    const double EAC = acc.sum_joint_ref2(i) / n;
    const double var_a = EA2 - A * A;
    const double var_b = EB2 - B * B;
    const double var_c = EC2 - C * C;
    const double cov_ab = EAB - A * B;
    const double cov_ac = EAC - A * C;
    const double cov_bc = A - B * C;
    const double var_log_g = var_a / (A * A) + var_b / (B * B) + var_c / (C * C) -
                             2.0 * cov_ab / (A * B) - 2.0 * cov_ac / (A * C) +
                             2.0 * cov_bc / (B * C);
    img.joint_mean[i] = A;
    img.joint_se[i] = std::sqrt(std::max(0.0, var_a) / n);
    img.joint2_mean[i] = EA2;
    img.ref_mean[i] = C;
    img.g[i] = A / (B * C);
    img.g_se[i] = img.g[i] * std::sqrt(std::max(0.0, var_log_g) / n);
  }
  return img;
}

struct PassOptions {
  std::size_t workers = 1;
  // Block partition is fixed by frame index only, so results do not depend
  // on the worker count.
  std::size_t frames_per_block = 4096;
  // When nonzero, also return this many contiguous sub-run accumulators per
  // order (for jackknife error estimates).
  std::size_t groups = 0;
};

struct PassResult {
  std::vector<MomentAccumulator> totals;              // one per order
  std::vector<std::vector<MomentAccumulator>> groups; // [group][order]
};

namespace detail {

inline std::vector<MomentAccumulator> fresh_accumulators(const ObjectMask& mask,
                                                         std::span<const MomentOrder> orders) {
  std::vector<MomentAccumulator> out;
  out.reserve(orders.size());
  for (const auto& o : orders) out.emplace_back(mask.width(), mask.height(), o);
  return out;
}

// Accumulates frames [first, last) for every order, sharing the logarithms
// and the reference powers of equal nu across orders.
inline void accumulate_block(const SampleSet& samples, std::span<const MomentOrder> orders,
                             std::size_t first, std::size_t last,
                             std::vector<MomentAccumulator>& accs) {
  const std::size_t n = samples.mask().size();
  std::vector<double> distinct_nu;
  std::vector<std::size_t> nu_slot(orders.size());
  for (std::size_t k = 0; k < orders.size(); ++k) {
    const auto it = std::find(distinct_nu.begin(), distinct_nu.end(), orders[k].nu());
    nu_slot[k] = static_cast<std::size_t>(it - distinct_nu.begin());
    if (it == distinct_nu.end()) distinct_nu.push_back(orders[k].nu());
  }
  std::vector<double> ref(n), scratch(samples.pairing() == Pairing::matched ? 0 : n), log_ref(n);
  std::vector<std::vector<double>> ref_pow(distinct_nu.size(), std::vector<double>(n));
  constexpr double floor = std::numeric_limits<double>::min();
  for (std::size_t j = first; j < last; ++j) {
    const double bucket = samples.load(j, ref, scratch);
    const double log_bucket = std::log(bucket < floor ? floor : bucket);
    for (std::size_t i = 0; i < n; ++i) log_ref[i] = std::log(ref[i]);
    for (std::size_t s = 0; s < distinct_nu.size(); ++s)
      for (std::size_t i = 0; i < n; ++i) ref_pow[s][i] = std::exp(distinct_nu[s] * log_ref[i]);
    for (std::size_t k = 0; k < orders.size(); ++k)
      accs[k].accumulate_powers(std::exp(orders[k].mu() * log_bucket), ref_pow[nu_slot[k]]);
  }
}

} // namespace detail

/// One streaming pass over the samples with one accumulator per order.
/// Blocks are computed in parallel in bounded waves and merged strictly in
/// block order.
inline PassResult accumulate_orders(const SampleSet& samples, std::span<const MomentOrder> orders,
                                    const PassOptions& options = {}) {
  if (orders.empty()) throw UsageError("at least one moment order is required");
  if (options.frames_per_block == 0) throw UsageError("frames_per_block must be positive");
  const std::size_t total = samples.size();
  const std::size_t block = options.frames_per_block;
  const std::size_t num_blocks = (total + block - 1) / block;
  if (options.groups > num_blocks)
    throw UsageError("requested " + std::to_string(options.groups) + " groups but only " +
                     std::to_string(num_blocks) + " blocks are available");

  PassResult result;
  result.totals = detail::fresh_accumulators(samples.mask(), orders);
  std::vector<MomentAccumulator> current_group = detail::fresh_accumulators(samples.mask(), orders);
  std::size_t current_group_index = 0;
  auto group_of = [&](std::size_t b) { return options.groups ? b * options.groups / num_blocks : 0; };

  const std::size_t workers = std::max<std::size_t>(options.workers, 1);
  const std::size_t wave = 2 * workers;
  for (std::size_t start = 0; start < num_blocks; start += wave) {
    const std::size_t stop = std::min(num_blocks, start + wave);
    std::vector<std::vector<MomentAccumulator>> partial(stop - start);
    parallel_for(stop - start, workers, [&](std::size_t k) {
      const std::size_t b = start + k;
      partial[k] = detail::fresh_accumulators(samples.mask(), orders);
      detail::accumulate_block(samples, orders, b * block, std::min(total, (b + 1) * block),
                               partial[k]);
    });
    for (std::size_t k = 0; k < partial.size(); ++k) {
      const std::size_t b = start + k;
      for (std::size_t o = 0; o < orders.size(); ++o) result.totals[o].merge(partial[k][o]);
      if (!options.groups) continue;
      if (group_of(b) != current_group_index) {
        result.groups.push_back(std::move(current_group));
        current_group = detail::fresh_accumulators(samples.mask(), orders);
        current_group_index = group_of(b);
      }
      for (std::size_t o = 0; o < orders.size(); ++o) current_group[o].merge(partial[k][o]);
    }
  }
  if (options.groups) result.groups.push_back(std::move(current_group));
  return result;
}

inline std::vector<GhostImage> multi_order_pass(const SampleSet& samples,
                                                std::span<const MomentOrder> orders,
                                                std::size_t workers = 1) {
  PassOptions options;
  options.workers = workers;
  auto pass = accumulate_orders(samples, orders, options);
  std::vector<GhostImage> images;
  images.reserve(pass.totals.size());
  for (const auto& acc : pass.totals) images.push_back(finalize(acc));
  return images;
}

} // namespace fracgi
