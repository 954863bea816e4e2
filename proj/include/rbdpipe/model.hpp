#pragma once

#include <map>
#include <string>
#include <vector>

#include "rbdpipe/joints.hpp"
#include "rbdpipe/spatial.hpp"

namespace rbdpipe {

/// How the connection between the robot and the world is treated.
///   FloatingSplit - 6-DOF virtual joint at the base, evaluated as an
///                   ordinary joint (split_root turns it into spherical +
///                   translation3);
///   FixedBase     - base anchored: v0 = 0, a0 = -gravity;
///   StateInjected - base twist/acceleration supplied with each task;
///   Ignored       - base dynamics skipped, anchor semantics like FixedBase.
enum class RootMode { FloatingSplit, FixedBase, StateInjected, Ignored };

const char* root_mode_name(RootMode m);

/// Immutable kinematic tree. Joint i connects link parent[i] (or the world,
/// parent[i] < 0) to link i; joints and links share indices. Links created
/// by the loader or by split_root for virtual base joints are flagged in
/// is_virtual and may carry zero inertia; user links must have positive
/// mass. Topological order (parent[i] < i) holds after construction.
class RobotModel {
 public:
  std::string name;
  Vec3 gravity{0.0, 0.0, -9.81};
  RootMode root_mode{RootMode::FixedBase};

  std::vector<int> parent;
  std::vector<JointType> joints;
  std::vector<MotionSubspace> S;
  std::vector<SpatialInertia> inertia;
  std::vector<SpatialTransform> fixed_xform;  // parent frame -> joint anchor at q = 0
  std::vector<std::string> link_names;
  std::vector<bool> is_virtual;

  int n_bodies() const { return static_cast<int>(joints.size()); }
  int n_dof() const { return n_dof_; }
  int dof(int i) const { return joints[i].dof(); }
  int dof_offset(int i) const { return dof_offset_[i]; }
  int depth(int i) const { return depth_[i]; }
  int max_depth() const;
  const std::vector<int>& children(int i) const { return children_[i]; }

  /// DOF columns of the joint's ancestors and itself, ascending. These are
  /// the only derivative columns a link can touch during a forward sweep.
  const std::vector<int>& ancestor_cols(int i) const { return ancestor_cols_[i]; }
  /// DOF columns of subtree(i), ascending.
  const std::vector<int>& subtree_cols(int i) const { return subtree_cols_[i]; }
  /// Top-level ancestor joint (the joint whose parent is the world).
  int world_group(int i) const { return world_group_[i]; }

  double total_mass() const;

  /// Rebuild the derived tables; call after mutating the public arrays.
  /// Throws std::invalid_argument when the tree is malformed.
  void finalize();

 private:
  int n_dof_{0};
  std::vector<int> dof_offset_;
  std::vector<int> depth_;
  std::vector<std::vector<int>> children_;
  std::vector<std::vector<int>> ancestor_cols_;
  std::vector<std::vector<int>> subtree_cols_;
  std::vector<int> world_group_;
};

/// All descendants of joint i including i, ascending.
std::vector<int> subtree(const RobotModel& model, int i);
/// tree(i) \ {i}.
std::vector<int> subtree_excl(const RobotModel& model, int i);

enum class MultiplexPolicy {
  Off,    // one stage array per branch instance
  Pairs,  // merge symmetric branches two at a time
};

/// Decomposition of the joint tree into a root chain plus linear branches,
/// with symmetric branches merged for time-division multiplexing.
struct BranchLayout {
  std::vector<int> root_joints;
  /// Representative joint sequence per branch array.
  std::vector<std::vector<int>> branches;
  /// All merged instances per branch array (instances[b][0] == branches[b]).
  std::vector<std::vector<std::vector<int>>> instances;
  /// branch index -> replication count (instances[b].size()).
  std::map<int, int> multiplexed;
  /// Per-joint iteration depth: 1-based position within its chain.
  std::vector<int> depth;
};

BranchLayout branch_decompose(const RobotModel& model,
                              MultiplexPolicy policy = MultiplexPolicy::Pairs);

struct RerootResult {
  RobotModel model;
  int old_depth{0};
  int new_depth{0};
};

/// Re-root the tree at an existing (non-virtual) link. Joints along the old
/// root -> new root path are reversed, with their fixed transforms folded
/// into the re-framed child links and inertias re-expressed accordingly.
/// The anchor (virtual or first) joint relocates to the new root. This is a
/// structural transform: connectivity and total mass are preserved, but
/// generalized coordinates are not remapped between the two rootings.
RerootResult reroot(const RobotModel& model, int new_root_link);

/// Replace a 6-DOF floating root by a spherical joint followed by a
/// translation3 joint (inserting a massless virtual link). Total DOF is
/// unchanged and the composite motion freedom is identical.
RobotModel split_root(const RobotModel& model);

/// Structural nonzero pattern of the joint-space inertia matrix (and of the
/// inverse-dynamics derivative blocks), expanded per DOF: entry (i, j) is
/// set iff dof j belongs to ancestors(i) or tree(i).
Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> sparsity_pattern(const RobotModel& model);

/// Structural nonzero pattern of the *inverse* mass matrix: (i, j) is set
/// iff the two dofs share any dof-carrying ancestor (equivalently, belong
/// to the same world-anchored subtree). A strict superset of
/// sparsity_pattern whenever a common ancestor carries dofs.
Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> minv_sparsity_pattern(const RobotModel& model);

/// Evaluate a model under a different root treatment. Anchored modes
/// (FixedBase, StateInjected, Ignored) applied to a floating model drop the
/// virtual root joints and their dofs.
RobotModel reanchor(const RobotModel& model, RootMode mode);

}  // namespace rbdpipe
