#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "fracgi/error.hpp"

namespace fracgi {

/// ln Gamma(x) for x > 0. Uses the reentrant glibc entry point where
/// available (std::lgamma writes the global signgam).
inline double log_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw DomainError("log_gamma requires a positive finite argument, got " + std::to_string(x));
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

/// Gauss rule for integrals against the Gamma(alpha + 1, 1) probability
/// density, x^alpha e^{-x} / Gamma(alpha + 1). Weights sum to 1.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

// Golub-Welsch: eigen-decomposition of the Jacobi matrix of the generalized
// Laguerre polynomials.
inline QuadratureRule build_gauss_laguerre(std::size_t n, double alpha) {
  Eigen::VectorXd diag(static_cast<Eigen::Index>(n));
  Eigen::VectorXd sub(static_cast<Eigen::Index>(n > 0 ? n - 1 : 0));
  for (std::size_t k = 0; k < n; ++k) {
    diag[static_cast<Eigen::Index>(k)] = 2.0 * static_cast<double>(k) + alpha + 1.0;
    if (k + 1 < n) {
      const double kk = static_cast<double>(k + 1);
      sub[static_cast<Eigen::Index>(k)] = std::sqrt(kk * (kk + alpha));
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw ConvergenceError("Gauss-Laguerre eigen-solve failed");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    rule.nodes[k] = solver.eigenvalues()[kk];
    const double v0 = solver.eigenvectors()(0, kk);
    rule.weights[k] = v0 * v0;
  }
  return rule;
}

} // namespace detail

/// n-point generalized Gauss-Laguerre rule with probability-normalized
/// weights. Rules are cached per (n, alpha).
inline std::shared_ptr<const QuadratureRule> gauss_laguerre(std::size_t n, double alpha) {
  if (n == 0) throw UsageError("quadrature needs at least one node");
  if (!(alpha > -1.0)) throw DomainError("Gauss-Laguerre requires alpha > -1");
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, double>, std::shared_ptr<const QuadratureRule>> cache;
  const std::pair key{n, alpha};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto rule = std::make_shared<const QuadratureRule>(detail::build_gauss_laguerre(n, alpha));
  std::lock_guard lock(mutex);
  return cache.emplace(key, std::move(rule)).first->second;
}

/// Fixed-Talbot numerical inverse Laplace transform (Abate & Valko 2004).
/// `log_transform` returns ln F(s) on the complex plane. The contour is
/// s(theta) = r theta (cot theta + i), r = 2M / (5t), with M nodes.
template <class LogTransform>
double talbot_inverse(LogTransform&& log_transform, double t, std::size_t nodes) {
  if (!(t > 0.0)) throw DomainError("Talbot inversion needs t > 0");
  using cplx = std::complex<double>;
  const double M = static_cast<double>(nodes);
  const double r = 2.0 * M / (5.0 * t);
  double acc = 0.5 * std::exp(std::real(log_transform(cplx(r, 0.0))) + r * t);
  for (std::size_t k = 1; k < nodes; ++k) {
    const double theta = static_cast<double>(k) * std::numbers::pi / M;
    const double cot = 1.0 / std::tan(theta);
    const cplx s(r * theta * cot, r * theta);
    const double sigma = theta + (theta * cot - 1.0) * cot;
    acc += std::real(std::exp(t * s + log_transform(s)) * cplx(1.0, sigma));
  }
  return r / M * acc;
}

} // namespace fracgi
