#include "rbdpipe/joints.hpp"

#include <stdexcept>

namespace rbdpipe {

int joint_dof(JointKind kind) {
  switch (kind) {
    case JointKind::Revolute:
    case JointKind::Prismatic:
    case JointKind::Helical:
      return 1;
    case JointKind::Cylindrical:
      return 2;
    case JointKind::Planar:
    case JointKind::Spherical:
    case JointKind::Translation3:
      return 3;
    case JointKind::Floating:
      return 6;
  }
  throw std::logic_error("joint_dof: unknown joint kind");
}

const char* joint_kind_name(JointKind kind) {
  switch (kind) {
    case JointKind::Revolute: return "revolute";
    case JointKind::Prismatic: return "prismatic";
    case JointKind::Helical: return "helical";
    case JointKind::Cylindrical: return "cylindrical";
    case JointKind::Planar: return "planar";
    case JointKind::Spherical: return "spherical";
    case JointKind::Translation3: return "translation3";
    case JointKind::Floating: return "floating";
  }
  return "?";
}

namespace {

// Coordinate rotation (passive) about a unit axis: E = c I - s ax + (1-c) a a^T.
Mat3 axis_rotation(const Vec3& a, double s, double c) {
  Mat3 E = c * Mat3::Identity() - s * skew(a) + (1.0 - c) * (a * a.transpose());
  return E;
}

void spherical_eval(const Eigen::Ref<const VecX>& sinq, const Eigen::Ref<const VecX>& cosq,
                    Mat3& E, SpatialVector psi[3]) {
  const Mat3 Ex = axis_rotation(Vec3::UnitX(), sinq[0], cosq[0]);
  const Mat3 Ey = axis_rotation(Vec3::UnitY(), sinq[1], cosq[1]);
  const Mat3 Ez = axis_rotation(Vec3::UnitZ(), sinq[2], cosq[2]);
  E = Ex * Ey * Ez;
  psi[0] = {Vec3::UnitX(), Vec3::Zero()};
  psi[1] = {Ex * Vec3::UnitY(), Vec3::Zero()};
  psi[2] = {Ex * Ey * Vec3::UnitZ(), Vec3::Zero()};
}

}  // namespace

MotionSubspace joint_motion_subspace(const JointType& joint) {
  MotionSubspace S(joint.dof());
  switch (joint.kind) {
    case JointKind::Revolute:
      S.set_column(0, {joint.axis, Vec3::Zero()});
      break;
    case JointKind::Prismatic:
      S.set_column(0, {Vec3::Zero(), joint.axis});
      break;
    case JointKind::Helical:
      S.set_column(0, {joint.axis, joint.pitch * joint.axis});
      break;
    case JointKind::Cylindrical:
      S.set_column(0, {joint.axis, Vec3::Zero()});
      S.set_column(1, {Vec3::Zero(), joint.axis});
      break;
    case JointKind::Planar:
      S.set_column(0, {Vec3::UnitZ(), Vec3::Zero()});
      S.set_column(1, {Vec3::Zero(), Vec3::UnitX()});
      S.set_column(2, {Vec3::Zero(), Vec3::UnitY()});
      break;
    case JointKind::Spherical:
      for (int j = 0; j < 3; ++j) S.set_column(j, {Vec3::Unit(j), Vec3::Zero()});
      break;
    case JointKind::Translation3:
      for (int j = 0; j < 3; ++j) S.set_column(j, {Vec3::Zero(), Vec3::Unit(j)});
      break;
    case JointKind::Floating:
      for (int j = 0; j < 3; ++j) S.set_column(j, {Vec3::Unit(j), Vec3::Zero()});
      for (int j = 0; j < 3; ++j) S.set_column(3 + j, {Vec3::Zero(), Vec3::Unit(j)});
      break;
  }
  if (joint.reversed) S.cols = -S.cols;
  return S;
}

void eval_joint(const JointType& joint, const Eigen::Ref<const VecX>& q,
                const Eigen::Ref<const VecX>& sinq, const Eigen::Ref<const VecX>& cosq,
                JointEval& out) {
  switch (joint.kind) {
    case JointKind::Revolute:
      out.X = {axis_rotation(joint.axis, sinq[0], cosq[0]), Vec3::Zero()};
      out.psi[0] = {joint.axis, Vec3::Zero()};
      break;
    case JointKind::Prismatic:
      out.X = {Mat3::Identity(), q[0] * joint.axis};
      out.psi[0] = {Vec3::Zero(), joint.axis};
      break;
    case JointKind::Helical:
      out.X = {axis_rotation(joint.axis, sinq[0], cosq[0]), (q[0] * joint.pitch) * joint.axis};
      out.psi[0] = {joint.axis, joint.pitch * joint.axis};
      break;
    case JointKind::Cylindrical:
      out.X = {axis_rotation(joint.axis, sinq[0], cosq[0]), q[1] * joint.axis};
      out.psi[0] = {joint.axis, Vec3::Zero()};
      out.psi[1] = {Vec3::Zero(), joint.axis};
      break;
    case JointKind::Planar: {
      const Mat3 E = axis_rotation(Vec3::UnitZ(), sinq[0], cosq[0]);
      out.X = {E, Vec3(q[1], q[2], 0.0)};
      out.psi[0] = {Vec3::UnitZ(), Vec3::Zero()};
      out.psi[1] = {Vec3::Zero(), E * Vec3::UnitX()};
      out.psi[2] = {Vec3::Zero(), E * Vec3::UnitY()};
      break;
    }
    case JointKind::Spherical: {
      Mat3 E;
      spherical_eval(sinq, cosq, E, out.psi);
      out.X = {E, Vec3::Zero()};
      break;
    }
    case JointKind::Translation3:
      out.X = {Mat3::Identity(), q.head<3>()};
      for (int j = 0; j < 3; ++j) out.psi[j] = {Vec3::Zero(), Vec3::Unit(j)};
      break;
    case JointKind::Floating: {
      Mat3 E;
      SpatialVector psi_rot[3];
      spherical_eval(sinq.head<3>(), cosq.head<3>(), E, psi_rot);
      const Vec3 trans = q.tail<3>();
      // Translation stage applied after the rotation: X = X_t3 * X_sph.
      out.X = {E, E.transpose() * trans};
      for (int j = 0; j < 3; ++j) {
        out.psi[j] = {psi_rot[j].angular, -trans.cross(psi_rot[j].angular)};
        out.psi[3 + j] = {Vec3::Zero(), Vec3::Unit(j)};
      }
      break;
    }
  }
  if (joint.reversed) {
    const SpatialTransform Xr = out.X.inverse();
    for (int g = 0; g < joint.dof(); ++g) {
      out.psi[g] = -xform_motion(Xr, out.psi[g]);
    }
    out.X = Xr;
  }
}

}  // namespace rbdpipe
