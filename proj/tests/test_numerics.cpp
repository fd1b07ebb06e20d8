#include <cmath>
#include <complex>
#include <vector>

#include <gtest/gtest.h>

#include "fracgi/error.hpp"
#include "fracgi/philox.hpp"
#include "fracgi/quadrature.hpp"
#include "fracgi/summation.hpp"

using namespace fracgi;

// Known-answer vectors of the Random123 reference implementation.
TEST(Philox, KnownAnswerVectors) {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  EXPECT_EQ(Philox4x32::block(C{0, 0, 0, 0}, K{0, 0}),
            (C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(Philox4x32::block(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                              K{0xffffffffu, 0xffffffffu}),
            (C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(Philox4x32::block(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                              K{0xa4093822u, 0x299f31d0u}),
            (C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, UniformsStayInOpenClosedInterval) {
  PhiloxStream s(42, 7);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double u = s.next_open_closed();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LE(hi, 1.0);
  EXPECT_NEAR(sum / n, 0.5, 5.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Philox, StreamsAreIndependentOfCallOrder) {
  PhiloxStream a(3, 10), b(3, 10), c(3, 11);
  for (int k = 0; k < 5; ++k) c.next_u64();
  for (int k = 0; k < 5; ++k) EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(PhiloxStream(3, 10).next_u64(), PhiloxStream(3, 11).next_u64());
  EXPECT_NE(PhiloxStream(3, 10).next_u64(), PhiloxStream(4, 10).next_u64());
}

TEST(CompensatedSum, RecoversSmallTermsNextToLargeOnes) {
  CompensatedSum s;
  s.add(1.0);
  for (int k = 0; k < 1000000; ++k) s.add(1e-16);
  s.add(-1.0);
  EXPECT_NEAR(s.value(), 1e-10, 1e-19);
}

TEST(CompensatedSum, MergeMatchesSerial) {
  CompensatedSum serial, left, right;
  for (int k = 0; k < 1000; ++k) {
    const double x = std::sin(k) * std::pow(10.0, k % 7);
    serial.add(x);
    (k < 400 ? left : right).add(x);
  }
  left.merge(right);
  EXPECT_NEAR(left.value(), serial.value(), 1e-12 * std::fabs(serial.value()));
}

struct LogGammaCase {
  double x;
  double expected;
};

// Reference values from 30-digit mpmath evaluation.
TEST(LogGamma, MatchesHighPrecisionReference) {
  const LogGammaCase cases[] = {
      {0.001, 6.907178885383853661683681},
      {0.5, 0.5723649429247000870717137},
      {0.999, 0.0005780385328913802381689031},
      {1.001, -0.0005763935982833061515191624},
      {1.5, -0.1207822376352452223455184},
      {1.999, -0.0004224618006921072841757456},
      {2.001, 0.0004231067348001169911902936},
      {2.5, 0.2846828704729191596324947},
      {10.3, 13.48203678613835859265301},
      {20.618, 41.18535701448931217139603},
      {21.0, 42.3356164607534850296598759707},
      {123.456, 469.605547129929483500194},
      {1000.0, 5905.220423209181211826077},
  };
  for (const auto& c : cases)
    EXPECT_NEAR(log_gamma(c.x), c.expected, 1e-13 * std::fabs(c.expected)) << "x = " << c.x;
  EXPECT_EQ(log_gamma(1.0), 0.0);
  EXPECT_EQ(log_gamma(2.0), 0.0);
}

TEST(LogGamma, RejectsNonPositiveArguments) {
  EXPECT_THROW(log_gamma(0.0), DomainError);
  EXPECT_THROW(log_gamma(-1.5), DomainError);
  EXPECT_THROW(log_gamma(std::nan("")), DomainError);
}

TEST(GaussLaguerre, IntegratesPolynomialMomentsExactly) {
  for (double alpha : {0.0, -0.5, 0.5, 2.3}) {
    const auto rule = gauss_laguerre(12, alpha);
    double wsum = 0.0;
    for (double w : rule->weights) wsum += w;
    EXPECT_NEAR(wsum, 1.0, 1e-13);
    // E[x^k] under Gamma(alpha+1, 1) is Gamma(alpha+1+k)/Gamma(alpha+1).
    for (int k = 1; k <= 20; ++k) {
      double q = 0.0;
      for (std::size_t i = 0; i < rule->nodes.size(); ++i) q += rule->weights[i] * std::pow(rule->nodes[i], k);
      const double exact = std::exp(log_gamma(alpha + 1.0 + k) - log_gamma(alpha + 1.0));
      EXPECT_NEAR(q, exact, 1e-10 * exact) << "alpha " << alpha << " k " << k;
    }
  }
}

TEST(GaussLaguerre, RulesAreCached) {
  EXPECT_EQ(gauss_laguerre(16, 0.5).get(), gauss_laguerre(16, 0.5).get());
  EXPECT_THROW(gauss_laguerre(0, 0.0), UsageError);
  EXPECT_THROW(gauss_laguerre(4, -1.0), DomainError);
}

TEST(Talbot, InvertsKnownTransforms) {
  // 1/(s+1)^2 <-> t e^{-t};  1/(s (s+2)) <-> (1 - e^{-2t}) / 2
  auto erlang2 = [](std::complex<double> s) { return -2.0 * std::log(s + 1.0); };
  auto step = [](std::complex<double> s) { return -std::log(s) - std::log(s + 2.0); };
  for (double t : {0.1, 0.5, 1.0, 3.0, 10.0}) {
    EXPECT_NEAR(talbot_inverse(erlang2, t, 32), t * std::exp(-t), 1e-10);
    EXPECT_NEAR(talbot_inverse(step, t, 32), 0.5 * (1.0 - std::exp(-2.0 * t)), 1e-10);
  }
}
