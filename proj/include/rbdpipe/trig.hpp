#pragma once

#include <Eigen/Dense>

namespace rbdpipe {

/// Polynomial sine/cosine with quadrant range reduction. Maximum absolute
/// error against the exact functions is below 1e-9 for all finite inputs;
/// within one reduction interval the pair is derivative-consistent
/// (d/dq of the sine approximant is exactly the cosine approximant).
void sincos_poly(double q, double* s, double* c);

/// Evaluate sincos_poly over a vector of joint positions.
void sincos_poly(const Eigen::VectorXd& q, Eigen::VectorXd& sinq, Eigen::VectorXd& cosq);

}  // namespace rbdpipe
