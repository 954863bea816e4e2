#pragma once

#include <string>

#include "rbdpipe/spatial.hpp"

namespace rbdpipe {

enum class JointKind {
  Revolute,
  Prismatic,
  Helical,
  Cylindrical,
  Planar,
  Spherical,
  Translation3,
  Floating,  // 6-DOF virtual root joint; split_root turns it into
             // Spherical + Translation3
};

int joint_dof(JointKind kind);
const char* joint_kind_name(JointKind kind);

/// Joint description: kind plus the axis/pitch parameters that need one.
/// `reversed` flips the joint's sense; it is produced by re-rooting and
/// only meaningful for multi-DOF kinds (single-DOF kinds reverse by
/// negating the axis instead).
struct JointType {
  JointKind kind{JointKind::Revolute};
  Vec3 axis{Vec3::UnitZ()};
  double pitch{0.0};
  bool reversed{false};

  int dof() const { return joint_dof(kind); }
};

/// Canonical motion subspace of a joint at q = 0 (constant for all
/// single-DOF kinds; multi-DOF kinds use it with body-rate velocity
/// semantics).
MotionSubspace joint_motion_subspace(const JointType& joint);

/// Joint transform and per-DOF derivative axes, evaluated at one joint's
/// configuration slice. On return:
///   X   - the joint transform (child from parent at the joint anchor),
///   psi - one spatial vector per DOF g with  dX/dq_g = -psi_g x X.
/// For single-DOF kinds psi equals the motion-subspace column; for
/// rotation composites it depends on q.
struct JointEval {
  SpatialTransform X;
  SpatialVector psi[6];
};

void eval_joint(const JointType& joint, const Eigen::Ref<const VecX>& q,
                const Eigen::Ref<const VecX>& sinq, const Eigen::Ref<const VecX>& cosq,
                JointEval& out);

}  // namespace rbdpipe
