#pragma once

#include <Eigen/Dense>

namespace rbdpipe {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// 6-D spatial vector with the angular components above the linear ones.
/// Used for twists (velocity, acceleration) and wrenches (force) alike;
/// the interpretation is set by context.
struct SpatialVector {
  Vec3 angular{Vec3::Zero()};
  Vec3 linear{Vec3::Zero()};

  SpatialVector() = default;
  SpatialVector(const Vec3& ang, const Vec3& lin) : angular(ang), linear(lin) {}

  static SpatialVector Zero() { return {}; }

  Vec6 vec() const {
    Vec6 v;
    v << angular, linear;
    return v;
  }
  static SpatialVector from_vec(const Vec6& v) {
    return {v.head<3>(), v.tail<3>()};
  }

  SpatialVector operator+(const SpatialVector& o) const {
    return {angular + o.angular, linear + o.linear};
  }
  SpatialVector operator-(const SpatialVector& o) const {
    return {angular - o.angular, linear - o.linear};
  }
  SpatialVector operator-() const { return {-angular, -linear}; }
  SpatialVector operator*(double s) const { return {angular * s, linear * s}; }
  SpatialVector& operator+=(const SpatialVector& o) {
    angular += o.angular;
    linear += o.linear;
    return *this;
  }
  SpatialVector& operator-=(const SpatialVector& o) {
    angular -= o.angular;
    linear -= o.linear;
    return *this;
  }

  bool isZero(double tol = 0.0) const {
    return angular.isZero(tol) && linear.isZero(tol);
  }
};

inline SpatialVector operator*(double s, const SpatialVector& v) { return v * s; }

/// Power pairing <f, v> between a wrench and a twist.
inline double pair(const SpatialVector& f, const SpatialVector& v) {
  return f.angular.dot(v.angular) + f.linear.dot(v.linear);
}

/// Plücker coordinate transform between two link frames, stored as a
/// rotation and a translation. The implied 6x6 motion matrix is
///   X = [ R      0 ]
///       [ -R tx  R ]
/// with tx the cross-product matrix of t (translation of the child origin,
/// expressed in the parent frame). The dense form is never materialized
/// here; test oracles build it on their own.
struct SpatialTransform {
  Mat3 R{Mat3::Identity()};
  Vec3 t{Vec3::Zero()};

  SpatialTransform() = default;
  SpatialTransform(const Mat3& rot, const Vec3& trans) : R(rot), t(trans) {}

  static SpatialTransform Identity() { return {}; }

  /// Composition: this * other, i.e. apply `other` first.
  SpatialTransform operator*(const SpatialTransform& o) const {
    // [R1 0; -R1 t1x R1][R2 0; -R2 t2x R2] = [R1R2 0; -R1R2 (t2 + R2^T t1)x R1R2]
    return {R * o.R, o.t + o.R.transpose() * t};
  }

  SpatialTransform inverse() const { return {R.transpose(), -(R * t)}; }
};

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

/// Spatial motion cross product v x m (angular part w x mw, linear part
/// w x mv + vlin x mw).
inline SpatialVector cross_motion(const SpatialVector& v, const SpatialVector& m) {
  return {v.angular.cross(m.angular),
          v.angular.cross(m.linear) + v.linear.cross(m.angular)};
}

/// Force-dual cross product v x* f. Satisfies
/// <cross_motion(v,m), f> + <m, cross_force(v,f)> = 0.
inline SpatialVector cross_force(const SpatialVector& v, const SpatialVector& f) {
  return {v.angular.cross(f.angular) + v.linear.cross(f.linear),
          v.angular.cross(f.linear)};
}

/// Apply the motion transform: X v.
inline SpatialVector xform_motion(const SpatialTransform& X, const SpatialVector& v) {
  return {X.R * v.angular, X.R * (v.linear - X.t.cross(v.angular))};
}

/// Apply the inverse motion transform: X^{-1} v.
inline SpatialVector xform_motion_inv(const SpatialTransform& X, const SpatialVector& v) {
  const Vec3 ang = X.R.transpose() * v.angular;
  return {ang, X.R.transpose() * v.linear + X.t.cross(ang)};
}

/// Apply X^T to a force vector. With X the child-from-parent transform this
/// maps a wrench from child to parent coordinates; composition with
/// xform_motion preserves the power pairing.
inline SpatialVector xform_force_transpose(const SpatialTransform& X, const SpatialVector& f) {
  const Vec3 lin = X.R.transpose() * f.linear;
  return {X.R.transpose() * f.angular + X.t.cross(lin), lin};
}

/// Apply the force transform X* = X^{-T}: maps a wrench from parent to
/// child coordinates.
inline SpatialVector xform_force_star(const SpatialTransform& X, const SpatialVector& f) {
  return {X.R * (f.angular - X.t.cross(f.linear)), X.R * f.linear};
}

/// Rigid-body spatial inertia in compact form: mass, first moment
/// h = m * com, and the 3x3 rotational inertia about the frame origin.
/// These are the 10 independent parameters of the symmetric 6x6
///   I = [ Irot  hx  ]
///       [ -hx   m*1 ].
struct SpatialInertia {
  double mass{0.0};
  Vec3 h{Vec3::Zero()};
  Mat3 I{Mat3::Zero()};

  SpatialInertia() = default;
  SpatialInertia(double m, const Vec3& com_moment, const Mat3& rot_inertia)
      : mass(m), h(com_moment), I(rot_inertia) {}

  static SpatialInertia Zero() { return {}; }

  /// Build from mass, center of mass and rotational inertia about the CoM
  /// (parallel-axis shift to the frame origin).
  static SpatialInertia from_com(double m, const Vec3& com, const Mat3& I_com) {
    const Mat3 cx = skew(com);
    return {m, m * com, I_com - m * cx * cx};
  }

  SpatialInertia operator+(const SpatialInertia& o) const {
    return {mass + o.mass, h + o.h, I + o.I};
  }
};

/// Force produced by an inertia acting on a motion vector: I v.
inline SpatialVector inertia_apply(const SpatialInertia& I, const SpatialVector& v) {
  return {I.I * v.angular + I.h.cross(v.linear),
          I.mass * v.linear - I.h.cross(v.angular)};
}

/// Congruence transform X^T I X of an inertia to the parent frame
/// (X being the child-from-parent transform). Mass is unchanged.
inline SpatialInertia inertia_transform(const SpatialTransform& X, const SpatialInertia& I) {
  // Work through the physical parameters: a point at x_child has parent
  // coordinates x_parent = R^T x_child + t.
  const Vec3 h_p = X.R.transpose() * I.h + I.mass * X.t;
  const Mat3 cx_c = I.mass > 0 ? skew(Vec3(I.h / I.mass)) : Mat3::Zero();
  const Mat3 I_com = I.I + (I.mass > 0 ? (I.mass * cx_c * cx_c).eval() : Mat3::Zero());
  const Mat3 cx_p = I.mass > 0 ? skew(Vec3(h_p / I.mass)) : Mat3::Zero();
  Mat3 I_p = X.R.transpose() * I_com * X.R - I.mass * cx_p * cx_p;
  I_p = (0.5 * (I_p + I_p.transpose())).eval();  // keep exact symmetry
  return {I.mass, h_p, I_p};
}

/// Motion subspace of a joint: 6 x dof matrix whose columns map joint
/// velocities to the spatial velocity across the joint.
struct MotionSubspace {
  Eigen::Matrix<double, 6, Eigen::Dynamic> cols;
  int dof{0};

  MotionSubspace() = default;
  explicit MotionSubspace(int n) : cols(Eigen::Matrix<double, 6, Eigen::Dynamic>::Zero(6, n)), dof(n) {}

  SpatialVector column(int j) const {
    return SpatialVector::from_vec(cols.col(j));
  }
  void set_column(int j, const SpatialVector& s) { cols.col(j) = s.vec(); }

  /// S * qd for the joint's own velocity slice.
  SpatialVector apply(const Eigen::Ref<const VecX>& qd_joint) const {
    return SpatialVector::from_vec(cols * qd_joint);
  }
  /// S^T f.
  VecX apply_transpose(const SpatialVector& f) const {
    return cols.transpose() * f.vec();
  }
};

}  // namespace rbdpipe
