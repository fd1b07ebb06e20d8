#pragma once

// Closed-form and semi-analytic theory of fractional-order moments for
// ideal thermal-light ghost imaging. Every reference intensity I_i is
// exponential with mean I_0 and the bucket is I_B = sum_i t_i I_i.
//
// Binary masks (m units at t = 1):
//   <I_B^mu I_i^nu>_0 = Gamma(m+mu) Gamma(1+nu) / Gamma(m)    I_0^(mu+nu)
//   <I_B^mu I_i^nu>_1 = Gamma(m+mu+nu) Gamma(1+nu) / Gamma(m+nu) I_0^(mu+nu)
// Visibility and peak SNR follow from these two and from the signal-pixel
// second moment <I_B^2mu I_i^2nu>_1.
//
// General masks: the bucket law is hypoexponential, the inverse Laplace
// transform of prod_i 1 / (1 + s I_0 t_i). It is expanded in partial
// fractions as a signed mixture of Gamma(l, I_0 tau_j) densities, or inverted
// numerically on a Talbot contour when the expansion is ill-conditioned.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "fracgi/error.hpp"
#include "fracgi/object_model.hpp"
#include "fracgi/quadrature.hpp"

namespace fracgi {

struct Validity {
  bool moment_finite = true;
  bool variance_finite = true;
  std::vector<std::string> reasons;

  bool ok() const noexcept { return moment_finite && variance_finite; }
  std::string describe() const {
    std::string out;
    for (const auto& r : reasons) out += (out.empty() ? "" : "; ") + r;
    return out;
  }
};

namespace detail {

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline void require_positive_intensity(double i0) {
  if (!(i0 > 0.0) || !std::isfinite(i0)) throw UsageError("I_0 must be positive and finite");
}

inline void require_finite_orders(double mu, double nu) {
  if (!std::isfinite(mu) || !std::isfinite(nu)) throw UsageError("orders must be finite");
}

} // namespace detail

/// Existence of the fractional moments and of the signal-pixel variance for
/// a binary object with m transmitting units. m is real so the same rule can
/// take the small-x exponent of a grayscale bucket law.
inline Validity validity_domain(double m, double mu, double nu) {
  Validity v;
  auto check = [&](bool& flag, double value, const char* expr) {
    if (!(value > 0.0)) {
      flag = false;
      v.reasons.push_back(std::string(expr) + " <= 0 (= " + detail::num(value) + ")");
    }
  };
  check(v.moment_finite, m + mu + nu, "m+mu+nu");
  check(v.moment_finite, m + mu, "m+mu");
  check(v.moment_finite, 1.0 + nu, "1+nu");
  check(v.variance_finite, m + 2.0 * mu + 2.0 * nu, "m+2mu+2nu");
  check(v.variance_finite, 1.0 + 2.0 * nu, "1+2nu");
  return v;
}

/// Grayscale rule: m is replaced by the number of nonzero units, the power of
/// x in the bucket density near zero plus one.
inline Validity validity_domain(const ObjectMask& mask, double mu, double nu) {
  const auto nonzero = static_cast<double>(
      std::count_if(mask.units().begin(), mask.units().end(), [](double t) { return t > 0.0; }));
  return validity_domain(nonzero, mu, nu);
}

namespace detail {

inline void require_m(std::size_t m, std::size_t min_m) {
  if (m < min_m)
    throw DomainError("m = " + std::to_string(m) + " but at least " + std::to_string(min_m) +
                      " transmitting units are required");
}

// ln(Gamma(a + delta) / Gamma(a)) without the cancellation of two lgammas.
inline double log_gamma_ratio(double a, double delta) {
  if (delta == 0.0) return 0.0;
  try {
    const double r = boost::math::tgamma_delta_ratio(a, delta);
    if (std::isfinite(r) && r > 0.0) return -std::log(r);
  } catch (const std::exception&) {
  }
  return log_gamma(a + delta) - log_gamma(a);
}

inline double log_moment_background(double m, double mu, double nu) {
  return log_gamma_ratio(m, mu) + log_gamma(1.0 + nu);
}

inline double log_moment_signal(double m, double mu, double nu) {
  return log_gamma_ratio(m + nu, mu) + log_gamma(1.0 + nu);
}

inline void require_moment_finite(std::size_t m, double mu, double nu) {
  const auto v = validity_domain(static_cast<double>(m), mu, nu);
  if (!v.moment_finite) {
    std::string why;
    for (const auto& r : v.reasons)
      if (r.starts_with("m+mu") || r.starts_with("1+nu")) why += (why.empty() ? "" : "; ") + r;
    throw DomainError("moment diverges: " + why);
  }
}

} // namespace detail

/// <I_B^mu> = Gamma(m+mu)/Gamma(m) I_0^mu for a binary object.
inline double bucket_moment(std::size_t m, double mu, double i0 = 1.0) {
  detail::require_m(m, 1);
  detail::require_positive_intensity(i0);
  if (!(static_cast<double>(m) + mu > 0.0))
    throw DomainError("m+mu <= 0 (= " + detail::num(static_cast<double>(m) + mu) + ")");
  const double md = static_cast<double>(m);
  return std::exp(detail::log_gamma_ratio(md, mu) + mu * std::log(i0));
}

/// Background-pixel (t_i = 0) moment <I_B^mu I_i^nu>_0.
inline double moment_background(std::size_t m, double mu, double nu, double i0 = 1.0) {
  detail::require_m(m, 1);
  detail::require_positive_intensity(i0);
  detail::require_finite_orders(mu, nu);
  const double md = static_cast<double>(m);
  if (!(md + mu > 0.0)) throw DomainError("m+mu <= 0 (= " + detail::num(md + mu) + ")");
  if (!(1.0 + nu > 0.0)) throw DomainError("1+nu <= 0 (= " + detail::num(1.0 + nu) + ")");
  return std::exp(detail::log_moment_background(md, mu, nu) + (mu + nu) * std::log(i0));
}

/// Signal-pixel (t_i = 1) moment <I_B^mu I_i^nu>_1. At m = 1 this is the
/// one-unit limit I_B = I_i, Gamma(1+mu+nu) I_0^(mu+nu).
inline double moment_signal(std::size_t m, double mu, double nu, double i0 = 1.0) {
  detail::require_m(m, 1);
  detail::require_positive_intensity(i0);
  detail::require_finite_orders(mu, nu);
  const double md = static_cast<double>(m);
  if (!(md + mu + nu > 0.0)) throw DomainError("m+mu+nu <= 0 (= " + detail::num(md + mu + nu) + ")");
  if (!(1.0 + nu > 0.0)) throw DomainError("1+nu <= 0 (= " + detail::num(1.0 + nu) + ")");
  return std::exp(detail::log_moment_signal(md, mu, nu) + (mu + nu) * std::log(i0));
}

/// V = |M1 - M0| / (M1 + M0) = |tanh((ln M1 - ln M0) / 2)|.
inline double visibility(std::size_t m, double mu, double nu) {
  detail::require_m(m, 2);
  detail::require_finite_orders(mu, nu);
  detail::require_moment_finite(m, mu, nu);
  const double md = static_cast<double>(m);
  const double d = detail::log_gamma_ratio(md + nu, mu) - detail::log_gamma_ratio(md, mu);
  return std::fabs(std::tanh(0.5 * d));
}

/// R_p / sqrt(N): contrast over the standard deviation of the signal-pixel
/// product I_B^mu I_i^nu. Independent of I_0.
inline double peak_snr_relative(std::size_t m, double mu, double nu) {
  detail::require_m(m, 2);
  detail::require_finite_orders(mu, nu);
  const double md = static_cast<double>(m);
  const auto v = validity_domain(md, mu, nu);
  if (!v.ok()) throw DomainError("peak SNR undefined: " + v.describe());
  const double l1 = detail::log_moment_signal(md, mu, nu);
  const double l2 = detail::log_gamma_ratio(md + 2.0 * nu, 2.0 * mu) + log_gamma(1.0 + 2.0 * nu);
  const double spread = std::fabs(std::expm1(2.0 * l1 - l2));
  if (!(spread > 0.0)) throw DomainError("peak SNR undefined: signal variance is zero");
  return std::exp(l1 - 0.5 * l2) * std::fabs(std::expm1(detail::log_gamma_ratio(md, mu) - detail::log_gamma_ratio(md + nu, mu))) / std::sqrt(spread);
}

inline double peak_snr(std::size_t m, double mu, double nu, double samples) {
  if (!(samples > 0.0)) throw UsageError("number of samples must be positive");
  return std::sqrt(samples) * peak_snr_relative(m, mu, nu);
}

/// Everything the binary theory predicts for one order pair. Values whose
/// existence condition fails are empty.
struct AnalyticPrediction {
  std::size_t m = 0;
  double mu = 0.0;
  double nu = 0.0;
  double samples = 1.0;
  double i0 = 1.0;
  std::optional<double> moment_background;
  std::optional<double> moment_signal;
  std::optional<double> visibility;
  std::optional<double> peak_snr;
  std::optional<double> peak_snr_relative;
  Validity validity;
};

inline AnalyticPrediction predict(std::size_t m, double mu, double nu, double samples = 1.0,
                                  double i0 = 1.0) {
  detail::require_m(m, 1);
  detail::require_positive_intensity(i0);
  detail::require_finite_orders(mu, nu);
  AnalyticPrediction p;
  p.m = m;
  p.mu = mu;
  p.nu = nu;
  p.samples = samples;
  p.i0 = i0;
  p.validity = validity_domain(static_cast<double>(m), mu, nu);
  if (!p.validity.moment_finite) return p;
  p.moment_background = moment_background(m, mu, nu, i0);
  p.moment_signal = moment_signal(m, mu, nu, i0);
  if (m < 2) return p;
  p.visibility = visibility(m, mu, nu);
  if (!p.validity.variance_finite) return p;
  p.peak_snr_relative = peak_snr_relative(m, mu, nu);
  p.peak_snr = std::sqrt(samples) * *p.peak_snr_relative;
  return p;
}

/// Joint density of (I_B, I_i) for a binary object with m transmitting units.
inline double joint_pdf_binary(std::size_t m, double i0, double bucket, double ref, int t) {
  detail::require_positive_intensity(i0);
  if (t != 0 && t != 1) throw UsageError("binary joint density needs t_i in {0, 1}");
  if (bucket < 0.0 || ref < 0.0) return 0.0;
  if (t == 1) {
    if (m < 2) throw DomainError("t_i = 1 branch needs m >= 2 ((m-2)! undefined)");
    if (ref > bucket) return 0.0;
    const double md = static_cast<double>(m);
    const double rest = bucket - ref;
    if (rest == 0.0 && m > 2) return 0.0;
    const double log_rest = m == 2 ? 0.0 : (md - 2.0) * std::log(rest);
    return std::exp(log_rest - bucket / i0 - log_gamma(md - 1.0) - md * std::log(i0));
  }
  detail::require_m(m, 1);
  const double md = static_cast<double>(m);
  if (bucket == 0.0 && m > 1) return 0.0;
  const double log_b = m == 1 ? 0.0 : (md - 1.0) * std::log(bucket);
  return std::exp(log_b - (bucket + ref) / i0 - log_gamma(md) - (md + 1.0) * std::log(i0));
}

/// One exponential family member of the bucket sum: `multiplicity` units
/// whose intensities have mean `scale` = I_0 t.
struct PoleGroup {
  double scale;
  std::size_t multiplicity;
};

/// Signed mixture component: weight * Gamma(shape, scale) density.
struct GammaTerm {
  double weight;
  std::size_t shape;
  double scale;
};

namespace detail {

inline double log_gamma_pdf(double x, std::size_t shape, double scale) {
  const double k = static_cast<double>(shape);
  return (k - 1.0) * std::log(x) - x / scale - log_gamma(k) - k * std::log(scale);
}

inline double gamma_pdf(double x, std::size_t shape, double scale) {
  if (x < 0.0) return 0.0;
  if (x == 0.0) return shape == 1 ? 1.0 / scale : 0.0;
  return std::exp(log_gamma_pdf(x, shape, scale));
}

// Partial-fraction weights of prod_i (1 + s theta_i)^{-k_i}. For pole j the
// weights are the coefficients [z^{k_j - l}] of 1 / prod_{i != j}
// (1 - r_i + r_i z)^{k_i} with r_i = theta_i / theta_j, computed by expanding
// the cofactor polynomial and dividing it into 1 as a truncated power series.
inline std::vector<GammaTerm> partial_fraction_terms(const std::vector<PoleGroup>& poles) {
  std::vector<GammaTerm> terms;
  for (std::size_t j = 0; j < poles.size(); ++j) {
    const std::size_t degree = poles[j].multiplicity; // coefficients 0..k_j-1
    std::vector<double> cofactor(degree, 0.0);
    cofactor[0] = 1.0;
    double log_prefactor = 0.0;
    bool negative = false;
    for (std::size_t i = 0; i < poles.size(); ++i) {
      if (i == j) continue;
      const double r = poles[i].scale / poles[j].scale;
      const double base = 1.0 - r;
      const double a = r / base;
      const auto k = poles[i].multiplicity;
      log_prefactor += static_cast<double>(k) * std::log(std::fabs(base));
      if (base < 0.0 && (k % 2 == 1)) negative = !negative;
      for (std::size_t rep = 0; rep < k; ++rep)
        for (std::size_t d = degree; d-- > 1;) cofactor[d] += a * cofactor[d - 1];
    }
    // Long division 1 / cofactor up to degree k_j - 1.
    std::vector<double> inverse(degree, 0.0);
    inverse[0] = 1.0 / cofactor[0];
    for (std::size_t d = 1; d < degree; ++d) {
      double s = 0.0;
      for (std::size_t e = 1; e <= d; ++e) s += cofactor[e] * inverse[d - e];
      inverse[d] = -s / cofactor[0];
    }
    const double scale = (negative ? -1.0 : 1.0) * std::exp(-log_prefactor);
    for (std::size_t l = 1; l <= poles[j].multiplicity; ++l) {
      const double w = scale * inverse[poles[j].multiplicity - l];
      if (w != 0.0) terms.push_back({w, l, poles[j].scale});
    }
  }
  return terms;
}

} // namespace detail

/// Probability law of the bucket signal.
class BucketPdfModel {
public:
  enum class Kind { erlang, hypoexponential, numerical_inversion };

  // Fixed-Talbot node count of the numerical fallback.
  static constexpr std::size_t kTalbotNodes = 32;
  // Two distinct transmittances closer than this (relative) count as a
  // clustered pole pair and force the numerical fallback.
  static constexpr double kPoleClusterTolerance = 1e-6;
  // Largest admissible sum of |weights| of the partial-fraction expansion.
  static constexpr double kConditionLimit = 1e8;

  static BucketPdfModel erlang(std::size_t shape, double scale) {
    BucketPdfModel model;
    model.kind_ = Kind::erlang;
    model.poles_ = {{scale, shape}};
    model.terms_ = {{1.0, shape, scale}};
    model.condition_ = 1.0;
    return model;
  }

  static BucketPdfModel from_poles(std::vector<PoleGroup> poles) {
    if (poles.empty()) throw DomainError("bucket law needs at least one nonzero unit");
    std::sort(poles.begin(), poles.end(),
              [](const PoleGroup& a, const PoleGroup& b) { return a.scale < b.scale; });
    if (poles.size() == 1) return erlang(poles[0].multiplicity, poles[0].scale);
    BucketPdfModel model;
    model.poles_ = std::move(poles);
    bool clustered = false;
    for (std::size_t j = 1; j < model.poles_.size(); ++j) {
      const double hi = model.poles_[j].scale;
      if ((hi - model.poles_[j - 1].scale) < kPoleClusterTolerance * hi) clustered = true;
    }
    if (!clustered) {
      model.terms_ = detail::partial_fraction_terms(model.poles_);
      model.condition_ = 0.0;
      for (const auto& t : model.terms_) model.condition_ += std::fabs(t.weight);
    }
    if (clustered || !(model.condition_ <= kConditionLimit)) {
      model.kind_ = Kind::numerical_inversion;
      model.terms_.clear();
    } else {
      model.kind_ = Kind::hypoexponential;
    }
    return model;
  }

  Kind kind() const noexcept { return kind_; }
  const std::vector<PoleGroup>& poles() const noexcept { return poles_; }
  const std::vector<GammaTerm>& terms() const noexcept { return terms_; }
  // Sum of |weights| of the expansion; infinity for the numerical fallback.
  double condition() const noexcept {
    return kind_ == Kind::numerical_inversion ? std::numeric_limits<double>::infinity() : condition_;
  }
  std::size_t talbot_nodes() const noexcept { return kTalbotNodes; }

  // Number of exponential units; the density behaves as x^(K-1) near 0.
  std::size_t small_x_exponent() const noexcept {
    std::size_t k = 0;
    for (const auto& p : poles_) k += p.multiplicity;
    return k;
  }

  double mean() const noexcept {
    double s = 0.0;
    for (const auto& p : poles_) s += static_cast<double>(p.multiplicity) * p.scale;
    return s;
  }

  double max_scale() const noexcept { return poles_.back().scale; }

  // Smallest Gamma shape carrying weight in the expansion.
  std::size_t min_shape() const noexcept {
    std::size_t l = std::numeric_limits<std::size_t>::max();
    for (const auto& t : terms_) l = std::min(l, t.shape);
    return l;
  }

  // ln of the Laplace transform prod (1 + s theta)^{-k}.
  std::complex<double> log_laplace(std::complex<double> s) const {
    std::complex<double> acc = 0.0;
    for (const auto& p : poles_)
      acc -= static_cast<double>(p.multiplicity) * std::log(1.0 + s * p.scale);
    return acc;
  }

  double pdf(double x) const {
    if (x < 0.0) return 0.0;
    if (x == 0.0) return small_x_exponent() == 1 ? 1.0 / poles_[0].scale : 0.0;
    if (kind_ == Kind::numerical_inversion)
      return std::max(0.0, talbot_inverse([this](auto s) { return log_laplace(s); }, x, kTalbotNodes));
    double s = 0.0;
    for (const auto& t : terms_) s += t.weight * detail::gamma_pdf(x, t.shape, t.scale);
    return std::max(0.0, s);
  }

  double cdf(double x) const {
    if (x <= 0.0) return 0.0;
    double s = 0.0;
    if (kind_ == Kind::numerical_inversion) {
      s = talbot_inverse([this](auto z) { return log_laplace(z) - std::log(z); }, x, kTalbotNodes);
    } else {
      for (const auto& t : terms_)
        s += t.weight * boost::math::gamma_p(static_cast<double>(t.shape), x / t.scale);
    }
    return std::clamp(s, 0.0, 1.0);
  }

private:
  BucketPdfModel() = default;

  Kind kind_ = Kind::erlang;
  std::vector<PoleGroup> poles_;
  std::vector<GammaTerm> terms_;
  double condition_ = 1.0;
};

/// Erlang law of the bucket for m units at t = 1:
/// x^(m-1) e^(-x/I_0) / ((m-1)! I_0^m).
inline BucketPdfModel bucket_pdf_binary(std::size_t m, double i0 = 1.0) {
  detail::require_m(m, 1);
  detail::require_positive_intensity(i0);
  return BucketPdfModel::erlang(m, i0);
}

/// Hypoexponential bucket law of an arbitrary mask. Opaque units drop out,
/// equal transmittances are grouped into repeated poles.
inline BucketPdfModel bucket_pdf_general(const ObjectMask& mask, double i0 = 1.0) {
  detail::require_positive_intensity(i0);
  std::vector<PoleGroup> poles;
  for (const auto& bin : histogram(mask))
    if (bin.value > 0.0) poles.push_back({i0 * bin.value, bin.count});
  if (poles.empty()) throw DomainError("bucket law undefined for an all-zero mask");
  return BucketPdfModel::from_poles(std::move(poles));
}

namespace detail {

inline constexpr double kMomentRelTol = 1e-8;

// E[S^mu Y^nu] with S = X + a Y, X = sum_j Exp(a_j) (counted with
// multiplicity) and Y ~ Exp(i0), from the Laplace transform of S alone:
//   Phi(l) = E[e^(-l S) Y^nu] = Gamma(1+nu) i0^nu prod_j (1 + l a_j)^(-p_j).
// With n = ceil(mu) and f = mu - n in (-1, 0],
//   E[S^mu Y^nu] = 1/Gamma(-f) int l^(-f-1) (-d/dl)^n Phi(l) dl.
// (-d/dl)^n Phi = Phi B_n(psi_1..psi_n), a complete Bell polynomial in the
// positive log-derivatives psi_r = sum_j p_j (r-1)! (a_j / (1 + l a_j))^r, so
// nothing cancels. No partial fractions are involved.
inline double laplace_moment(const std::vector<PoleGroup>& rest, double a, double mu, double nu, double i0) {
  struct Factor {
    double a;
    double p;
  };
  std::vector<Factor> factors;
  double a_max = 0.0;
  for (const auto& g : rest) {
    factors.push_back({g.scale, static_cast<double>(g.multiplicity)});
    a_max = std::max(a_max, g.scale);
  }
  if (a > 0.0) {
    factors.push_back({a, 1.0 + nu});
    a_max = std::max(a_max, a);
  }
  const double log_pre = log_gamma(1.0 + nu) + nu * std::log(i0);
  const int n = mu > 0.0 ? static_cast<int>(std::ceil(mu)) : 0;
  const double f = mu - n;

  // ln Phi and B_n at l.
  std::vector<double> psi(static_cast<std::size_t>(n) + 1), bell(static_cast<std::size_t>(n) + 1);
  auto eval = [&](double l, double& log_phi) {
    log_phi = 0.0;
    std::fill(psi.begin(), psi.end(), 0.0);
    for (const auto& fac : factors) {
      const double x = fac.a / (1.0 + l * fac.a);
      log_phi -= fac.p * std::log1p(l * fac.a);
      double xr = 1.0, fact = 1.0;
      for (int r = 1; r <= n; ++r) {
        xr *= x;
        psi[static_cast<std::size_t>(r)] += fac.p * fact * xr;
        fact *= r;
      }
    }
    bell[0] = 1.0;
    for (int k = 0; k < n; ++k) {
      double acc = 0.0, binom = 1.0;
      for (int i = 0; i <= k; ++i) {
        acc += binom * psi[static_cast<std::size_t>(i + 1)] * bell[static_cast<std::size_t>(k - i)];
        binom = binom * (k - i) / (i + 1);
      }
      bell[static_cast<std::size_t>(k + 1)] = acc;
    }
    return bell[static_cast<std::size_t>(n)];
  };

  if (f == 0.0) {
    double log_phi = 0.0;
    return std::exp(log_pre) * eval(0.0, log_phi);
  }
  // l = x / a_max puts the bulk of the integrand near x ~ 1.
  const double sigma = 1.0 / a_max;
  auto integrand = [&](double x) {
    if (!(x > 0.0)) return 0.0;
    const double l = sigma * x;
    double log_phi = 0.0;
    const double b = eval(l, log_phi);
    return std::exp((-f - 1.0) * std::log(x) + log_phi) * b;
  };
  thread_local boost::math::quadrature::exp_sinh<double> integrator;
  double error = 0.0, l1 = 0.0;
  const double integral = integrator.integrate(integrand, 0.0, std::numeric_limits<double>::infinity(),
                                               1e-12, &error, &l1);
  if (!std::isfinite(integral) || error > kMomentRelTol * std::fabs(integral))
    throw ConvergenceError("moment_general: Laplace-domain quadrature did not converge (error estimate " +
                           num(error / std::fabs(integral)) + ")");
  return std::exp(log_pre + (-f) * std::log(sigma) - log_gamma(-f)) * integral;
}

// E[(X + t Y)^mu Y^nu] for X ~ Gamma(l, theta) and Y ~ Exp(i0). With
// x = s u, t y = s (1 - u) the s-integral is a gamma function and what is
// left is a one-dimensional integral over u in (0,1) with only endpoint
// singularities:
//   Gamma(p) / (Gamma(l) theta^l i0 t^(nu+1)) * int u^(l-1) (1-u)^nu c(u)^(-p) du
// with p = mu + nu + l + 1 and c(u) = u / theta + (1 - u) / (t i0).
inline double gamma_term_moment(std::size_t shape, double theta, double t, double mu, double nu,
                                double i0) {
  const double l = static_cast<double>(shape);
  const double p = mu + nu + l + 1.0;
  const double a = 1.0 / theta, b = 1.0 / (t * i0);
  const double c0 = std::max(a, b);
  const double ra = a / c0, rb = b / c0;
  // Boost passes the signed distance to the nearest endpoint as the second
  // argument, which keeps 1 - u accurate near u = 1.
  auto f = [&](double u, double dist) {
    const double uc = dist > 0.0 ? dist : 1.0 - u;
    const double uu = dist < 0.0 ? -dist : u;
    if (uu <= 0.0 || uc <= 0.0) return 0.0;
    const double c = uu * ra + uc * rb;
    return std::exp((l - 1.0) * std::log(uu) + nu * std::log(uc) - p * std::log(c));
  };
  thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  const double integral = integrator.integrate(f, 0.0, 1.0, 1e-14);
  const double log_pre = log_gamma(p) - log_gamma(l) - l * std::log(theta) - std::log(i0) -
                         (nu + 1.0) * std::log(t) - p * std::log(c0);
  return std::exp(log_pre) * integral;
}

} // namespace detail

/// <I_B^mu I_i^nu> at pixel i of an arbitrary mask, as E[(X + t_i Y)^mu Y^nu]
/// with Y ~ Exp(I_0) the pixel intensity and X the bucket contribution of all
/// other units. Gamma-mixture rests reduce to one tanh-sinh integral per
/// term; rests whose partial fractions are unusable go through the Laplace
/// transform of the bucket instead.
inline double moment_general(const ObjectMask& mask, std::size_t pixel, double mu, double nu,
                             double i0 = 1.0) {
  detail::require_positive_intensity(i0);
  detail::require_finite_orders(mu, nu);
  if (pixel >= mask.size()) throw UsageError("pixel index out of range");
  if (!(nu > -1.0)) throw DomainError("1+nu <= 0 (= " + detail::num(1.0 + nu) + ")");
  const double t = mask[pixel];
  const double log_ref_moment = log_gamma(1.0 + nu) + nu * std::log(i0);

  std::vector<double> rest(mask.units().begin(), mask.units().end());
  rest[pixel] = 0.0;
  const bool rest_empty = std::all_of(rest.begin(), rest.end(), [](double v) { return v == 0.0; });
  if (rest_empty) {
    if (t == 0.0) {
      if (mu > 0.0) return 0.0;
      throw DomainError("bucket is identically zero; I_B^mu diverges for mu <= 0");
    }
    if (!(1.0 + mu + nu > 0.0)) throw DomainError("1+mu+nu <= 0 (= " + detail::num(1.0 + mu + nu) + ")");
    return std::exp(mu * std::log(t) + log_gamma(1.0 + mu + nu) + (mu + nu) * std::log(i0));
  }

  const ObjectMask rest_mask(mask.width(), mask.height(), std::move(rest));
  const auto model = bucket_pdf_general(rest_mask, i0);
  const double k_rest = static_cast<double>(model.small_x_exponent());
  const bool use_terms =
      model.kind() != BucketPdfModel::Kind::numerical_inversion &&
      static_cast<double>(model.min_shape()) + mu > 0.0;

  if (t == 0.0) {
    if (!(k_rest + mu > 0.0))
      throw DomainError("K+mu <= 0 (= " + detail::num(k_rest + mu) + "): <I_B^mu> diverges");
    if (!use_terms) return detail::laplace_moment(model.poles(), 0.0, mu, nu, i0);
    double bucket_part = 0.0;
    for (const auto& term : model.terms())
      bucket_part += term.weight * std::exp(log_gamma(static_cast<double>(term.shape) + mu) -
                                            log_gamma(static_cast<double>(term.shape)) +
                                            mu * std::log(term.scale));
    return bucket_part * std::exp(log_ref_moment);
  }

  if (!(k_rest + 1.0 + mu + nu > 0.0))
    throw DomainError("K+mu+nu <= 0 (= " + detail::num(k_rest + 1.0 + mu + nu) + "): moment diverges");

  if (model.kind() != BucketPdfModel::Kind::numerical_inversion &&
      static_cast<double>(model.min_shape()) + mu + nu + 1.0 > 0.0) {
    double value = 0.0;
    for (const auto& term : model.terms())
      value += term.weight * detail::gamma_term_moment(term.shape, term.scale, t, mu, nu, i0);
    return value;
  }

  return detail::laplace_moment(model.poles(), t * i0, mu, nu, i0);
}

} // namespace fracgi
