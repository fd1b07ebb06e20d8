#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "fracgi/error.hpp"
#include "fracgi/moment_engine.hpp"
#include "fracgi/object_model.hpp"

namespace fracgi {

struct ImageMetrics {
  double visibility = 0.0;
  double peak_snr = 0.0;
  double mean_signal = 0.0;     // <I_B^mu I_i^nu>_1 pooled over t = 1 pixels
  double mean_background = 0.0; // <I_B^mu I_i^nu>_0 pooled over t = 0 pixels
  double signal_second_moment = 0.0;
  std::size_t count = 0;
  // Fractional-transmittance pixels left out of both classes.
  std::size_t excluded = 0;
};

namespace detail {

inline double class_mean(std::span<const double> values, const std::vector<std::size_t>& idx) {
  double s = 0.0;
  for (auto i : idx) s += values[i];
  return s / static_cast<double>(idx.size());
}

} // namespace detail

/// V = |<>_1 - <>_0| / (<>_1 + <>_0) from class means of a raw moment image.
inline double empirical_visibility(std::span<const double> raw_moments, const UnitClasses& classes) {
  if (classes.one_units.empty()) throw UsageError("visibility needs at least one t = 1 pixel");
  if (classes.zero_units.empty()) throw UsageError("visibility needs at least one t = 0 pixel");
  const double s = detail::class_mean(raw_moments, classes.one_units);
  const double b = detail::class_mean(raw_moments, classes.zero_units);
  return std::fabs(s - b) / (s + b);
}

inline double empirical_visibility(const GhostImage& image, const UnitClasses& classes) {
  return empirical_visibility(image.joint_mean, classes);
}

/// Pooled moments of the two classes. Without t = 0 pixels the background
/// falls back to the factorized product <I_B^mu> <I_i^nu>.
inline ImageMetrics class_moments(const MomentAccumulator& acc, const UnitClasses& classes) {
  if (classes.one_units.empty()) throw UsageError("peak SNR needs at least one t = 1 pixel");
  if (acc.count() < 2) throw UsageError("peak SNR needs at least 2 samples");
  const double n = static_cast<double>(acc.count());
  ImageMetrics out;
  out.count = acc.count();
  out.excluded = classes.fractional_units.size();
  for (auto i : classes.one_units) {
    out.mean_signal += acc.sum_joint(i) / n;
    out.signal_second_moment += acc.sum_joint2(i) / n;
  }
  out.mean_signal /= static_cast<double>(classes.one_units.size());
  out.signal_second_moment /= static_cast<double>(classes.one_units.size());
  if (!classes.zero_units.empty()) {
    for (auto i : classes.zero_units) out.mean_background += acc.sum_joint(i) / n;
    out.mean_background /= static_cast<double>(classes.zero_units.size());
  } else {
    double ref = 0.0;
    for (auto i : classes.one_units) ref += acc.sum_ref(i) / n;
    out.mean_background = acc.sum_bucket() / n * ref / static_cast<double>(classes.one_units.size());
  }
  return out;
}

/// R_p = sqrt(N) |<>_1 - <>_0| / sqrt(|<I_B^2mu I_i^2nu>_1 - <>_1^2|).
inline double empirical_peak_snr(const MomentAccumulator& acc, const UnitClasses& classes) {
  const auto m = class_moments(acc, classes);
  const double var = m.signal_second_moment - m.mean_signal * m.mean_signal;
  if (!(var > 0.0)) throw DomainError("pooled signal variance is not positive (undersampled)");
  return std::sqrt(static_cast<double>(m.count)) * std::fabs(m.mean_signal - m.mean_background) /
         std::sqrt(var);
}

inline ImageMetrics evaluate_metrics(const MomentAccumulator& acc, const UnitClasses& classes) {
  auto out = class_moments(acc, classes);
  if (!classes.zero_units.empty())
    out.visibility = std::fabs(out.mean_signal - out.mean_background) /
                     (out.mean_signal + out.mean_background);
  out.peak_snr = empirical_peak_snr(acc, classes);
  return out;
}

struct JackknifeEstimate {
  double value = 0.0;
  double se = 0.0;
};

/// Delete-one-group jackknife over contiguous sub-runs of one order. `stat`
/// maps a merged accumulator to a scalar.
inline JackknifeEstimate jackknife(std::span<const MomentAccumulator> groups,
                                   const std::function<double(const MomentAccumulator&)>& stat) {
  const std::size_t g = groups.size();
  if (g < 2) throw UsageError("jackknife needs at least 2 groups");
  MomentAccumulator total = groups[0];
  for (std::size_t k = 1; k < g; ++k) total.merge(groups[k]);
  std::vector<double> loo(g);
  for (std::size_t out = 0; out < g; ++out) {
    MomentAccumulator part(total.width(), total.height(), total.order());
    for (std::size_t k = 0; k < g; ++k)
      if (k != out) part.merge(groups[k]);
    loo[out] = stat(part);
  }
  double mean = 0.0;
  for (double v : loo) mean += v;
  mean /= static_cast<double>(g);
  double ss = 0.0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  const double gd = static_cast<double>(g);
  return {stat(total), std::sqrt((gd - 1.0) / gd * ss)};
}

/// One-sample Kolmogorov-Smirnov statistic sup |F_n - F|.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw UsageError("KS statistic needs samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double f = cdf(samples[k]);
    d = std::max({d, static_cast<double>(k + 1) / n - f, f - static_cast<double>(k) / n});
  }
  return d;
}

/// Asymptotic p-value P(D_n > d) of the Kolmogorov distribution, with
/// Stephens' finite-n correction.
inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.0) {
    // Small-lambda form converges faster.
    const double pi = std::numbers::pi;
    double s = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double odd = 2.0 * k - 1.0;
      s += std::exp(-odd * odd * pi * pi / (8.0 * lambda * lambda));
    }
    return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

} // namespace fracgi
