#include "rbdpipe/trig.hpp"

#include <cmath>
#include <cstdint>
#include <limits>

namespace rbdpipe {
namespace {

constexpr double kTwoOverPi = 6.36619772367581343076e-01;
// pi/2 = kPio2Hi + kPio2Lo to ~107 bits; kPio2Hi carries 33 significant
// bits so k * kPio2Hi is exact for |k| < 2^20.
constexpr double kPio2Hi = 1.57079632673412561417e+00;
constexpr double kPio2Lo = 6.07710050650619224932e-11;

// Taylor polynomials on [-pi/4, pi/4]: degree 13 for sine, degree 12 for
// cosine. Truncation error ~2e-14 (sine), ~4e-13 (cosine), and the sine
// polynomial's derivative is exactly the cosine polynomial.
double sin_poly(double r) {
  const double r2 = r * r;
  double p = -1.0 / 6227020800.0;  // -1/13!
  p = p * r2 + 1.0 / 39916800.0;
  p = p * r2 - 1.0 / 362880.0;
  p = p * r2 + 1.0 / 5040.0;
  p = p * r2 - 1.0 / 120.0;
  p = p * r2 + 1.0 / 6.0;
  return r - r * r2 * p;
}

double cos_poly(double r) {
  const double r2 = r * r;
  double p = 1.0 / 479001600.0;  // 1/12!
  p = p * r2 - 1.0 / 3628800.0;
  p = p * r2 + 1.0 / 40320.0;
  p = p * r2 - 1.0 / 720.0;
  p = p * r2 + 1.0 / 24.0;
  p = p * r2 - 0.5;
  return 1.0 + r2 * p;
}

}  // namespace

void sincos_poly(double q, double* s, double* c) {
  if (!std::isfinite(q)) {
    *s = std::numeric_limits<double>::quiet_NaN();
    *c = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  // Beyond the compensated-reduction range (|k| >= 2^20) the leading
  // product is no longer exact; defer to the C library there.
  if (std::fabs(q) > 0x1p20) {
    *s = std::sin(q);
    *c = std::cos(q);
    return;
  }

  const double kd = std::nearbyint(q * kTwoOverPi);
  const std::int64_t k = static_cast<std::int64_t>(kd);
  const double r = (q - kd * kPio2Hi) - kd * kPio2Lo;

  const double sr = sin_poly(r);
  const double cr = cos_poly(r);
  switch (k & 3) {
    case 0: *s = sr; *c = cr; break;
    case 1: *s = cr; *c = -sr; break;
    case 2: *s = -sr; *c = -cr; break;
    default: *s = -cr; *c = sr; break;
  }
}

void sincos_poly(const Eigen::VectorXd& q, Eigen::VectorXd& sinq, Eigen::VectorXd& cosq) {
  sinq.resize(q.size());
  cosq.resize(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    sincos_poly(q[i], &sinq[i], &cosq[i]);
  }
}

}  // namespace rbdpipe
