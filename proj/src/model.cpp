#include "rbdpipe/model.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace rbdpipe {

const char* root_mode_name(RootMode m) {
  switch (m) {
    case RootMode::FloatingSplit: return "floating_split";
    case RootMode::FixedBase: return "fixed_base";
    case RootMode::StateInjected: return "state_injected";
    case RootMode::Ignored: return "ignored";
  }
  return "?";
}

void RobotModel::finalize() {
  const int nb = n_bodies();
  if (static_cast<int>(parent.size()) != nb || static_cast<int>(S.size()) != nb ||
      static_cast<int>(inertia.size()) != nb || static_cast<int>(fixed_xform.size()) != nb ||
      static_cast<int>(link_names.size()) != nb) {
    throw std::invalid_argument("RobotModel: inconsistent array sizes");
  }
  if (is_virtual.size() != joints.size()) is_virtual.assign(nb, false);

  dof_offset_.resize(nb);
  depth_.resize(nb);
  children_.assign(nb, {});
  world_group_.resize(nb);
  n_dof_ = 0;
  for (int i = 0; i < nb; ++i) {
    if (parent[i] >= i) {
      throw std::invalid_argument("RobotModel: link '" + link_names[i] +
                                  "' violates topological order");
    }
    dof_offset_[i] = n_dof_;
    n_dof_ += dof(i);
    if (parent[i] >= 0) {
      children_[parent[i]].push_back(i);
      depth_[i] = depth_[parent[i]] + 1;
      world_group_[i] = world_group_[parent[i]];
    } else {
      depth_[i] = 1;
      world_group_[i] = i;
    }
  }

  ancestor_cols_.assign(nb, {});
  subtree_cols_.assign(nb, {});
  for (int i = 0; i < nb; ++i) {
    std::vector<int> chain;
    for (int a = i; a >= 0; a = parent[a]) chain.push_back(a);
    std::sort(chain.begin(), chain.end());
    for (int a : chain) {
      for (int d = 0; d < dof(a); ++d) ancestor_cols_[i].push_back(dof_offset_[a] + d);
    }
    for (int j : subtree(*this, i)) {
      for (int d = 0; d < dof(j); ++d) subtree_cols_[i].push_back(dof_offset_[j] + d);
    }
  }
}

int RobotModel::max_depth() const {
  return depth_.empty() ? 0 : *std::max_element(depth_.begin(), depth_.end());
}

double RobotModel::total_mass() const {
  double m = 0.0;
  for (const auto& I : inertia) m += I.mass;
  return m;
}

std::vector<int> subtree(const RobotModel& model, int i) {
  const int nb = model.n_bodies();
  if (i < 0 || i >= nb) throw std::out_of_range("subtree: joint id out of range");
  std::vector<bool> in(nb, false);
  in[i] = true;
  std::vector<int> out{i};
  for (int j = i + 1; j < nb; ++j) {
    if (model.parent[j] >= 0 && in[model.parent[j]]) {
      in[j] = true;
      out.push_back(j);
    }
  }
  return out;
}

std::vector<int> subtree_excl(const RobotModel& model, int i) {
  auto t = subtree(model, i);
  t.erase(t.begin());
  return t;
}

namespace {

bool rootish(const RobotModel& m, int j) {
  return m.is_virtual[j] || m.dof(j) >= 2;
}

/// Signature used to detect symmetric branches: joint kinds, dofs, the
/// nonzero pattern of S (mirrored limbs differ only in parameter signs),
/// and the attachment link.
std::string branch_signature(const RobotModel& m, const std::vector<int>& chain) {
  std::string sig;
  for (int j : chain) {
    sig += joint_kind_name(m.joints[j].kind);
    sig += ':';
    const auto& S = m.S[j].cols;
    for (int c = 0; c < S.cols(); ++c) {
      for (int r = 0; r < 6; ++r) sig += (S(r, c) != 0.0) ? '1' : '0';
    }
    sig += '|';
  }
  sig += "@" + std::to_string(m.parent[chain.front()]);
  return sig;
}

}  // namespace

BranchLayout branch_decompose(const RobotModel& model, MultiplexPolicy policy) {
  BranchLayout layout;
  layout.depth.assign(model.n_bodies(), 0);

  std::vector<int> world_children;
  for (int i = 0; i < model.n_bodies(); ++i) {
    if (model.parent[i] < 0) world_children.push_back(i);
  }

  // Root chain: walk base-like joints from the world until fan-out or the
  // first ordinary joint.
  std::vector<int> branch_starts;
  if (world_children.size() == 1 && rootish(model, world_children[0])) {
    int cur = world_children[0];
    int pos = 0;
    while (true) {
      layout.root_joints.push_back(cur);
      layout.depth[cur] = ++pos;
      const auto& kids = model.children(cur);
      if (kids.size() == 1 && rootish(model, kids[0])) {
        cur = kids[0];
      } else {
        branch_starts = kids;
        break;
      }
    }
  } else {
    branch_starts = world_children;
  }

  // Maximal linear chains below the root.
  std::vector<std::vector<int>> chains;
  std::vector<int> queue = branch_starts;
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    int j = queue[qi];
    std::vector<int> chain{j};
    layout.depth[j] = 1;
    while (model.children(j).size() == 1) {
      j = model.children(j)[0];
      layout.depth[j] = static_cast<int>(chain.size()) + 1;
      chain.push_back(j);
    }
    for (int c : model.children(j)) queue.push_back(c);
    chains.push_back(std::move(chain));
  }

  // Group symmetric chains, then split each group into arrays of at most
  // `group_cap` instances.
  const int group_cap = (policy == MultiplexPolicy::Pairs) ? 2 : 1;
  std::map<std::string, std::vector<int>> groups;
  std::vector<std::string> order;
  for (size_t c = 0; c < chains.size(); ++c) {
    const std::string sig = branch_signature(model, chains[c]);
    if (!groups.count(sig)) order.push_back(sig);
    groups[sig].push_back(static_cast<int>(c));
  }
  for (const auto& sig : order) {
    const auto& members = groups[sig];
    for (size_t k = 0; k < members.size(); k += group_cap) {
      std::vector<std::vector<int>> inst;
      for (size_t m = k; m < std::min(members.size(), k + group_cap); ++m) {
        inst.push_back(chains[members[m]]);
      }
      const int b = static_cast<int>(layout.branches.size());
      layout.branches.push_back(inst[0]);
      layout.multiplexed[b] = static_cast<int>(inst.size());
      layout.instances.push_back(std::move(inst));
    }
  }
  return layout;
}

namespace {

JointType reversed_joint(const JointType& j) {
  JointType out = j;
  if (j.dof() == 1) {
    out.axis = -j.axis;
  } else {
    out.reversed = !j.reversed;
  }
  return out;
}

int find_world_root(const RobotModel& model) {
  int root = -1;
  for (int i = 0; i < model.n_bodies(); ++i) {
    if (model.parent[i] < 0) {
      if (root >= 0) throw std::invalid_argument("model has multiple world attachments");
      root = i;
    }
  }
  return root;
}

}  // namespace

RerootResult reroot(const RobotModel& model, int new_root_link) {
  if (new_root_link < 0 || new_root_link >= model.n_bodies() ||
      model.is_virtual[new_root_link]) {
    throw std::out_of_range("reroot: invalid link id");
  }

  RerootResult res;
  res.old_depth = model.max_depth();

  // The anchor is the chain of virtual joints connecting the tree to the
  // world; its purely virtual carrier links (zero-inertia rows whose child
  // is also virtual) relocate as-is, and the final anchor joint re-attaches
  // to the new root. phys_root is the link carrying that final joint.
  const int old_root = find_world_root(model);
  std::vector<int> dummy_rows;
  int phys_root = old_root;
  while (model.is_virtual[phys_root] && model.children(phys_root).size() == 1 &&
         model.is_virtual[model.children(phys_root)[0]]) {
    dummy_rows.push_back(phys_root);
    phys_root = model.children(phys_root)[0];
  }

  if (new_root_link == phys_root) {
    res.model = model;
    res.new_depth = res.old_depth;
    return res;
  }

  // Path from the physical old root to the new root (a_0 .. a_k).
  std::vector<int> path;
  for (int a = new_root_link; a != phys_root; a = model.parent[a]) {
    path.push_back(a);
    if (model.parent[a] < 0) throw std::logic_error("reroot: path search escaped the tree");
  }
  path.push_back(phys_root);
  std::reverse(path.begin(), path.end());
  const int k = static_cast<int>(path.size()) - 1;
  std::vector<int> path_pos(model.n_bodies(), -1);
  for (int p = 0; p <= k; ++p) path_pos[path[p]] = p;

  struct NewLink {
    int parent_old_id;  // -2 = new root (anchored)
    JointType joint;
    SpatialTransform xform;
    SpatialInertia inertia;
    bool virt{false};
  };
  std::map<int, NewLink> links;

  for (int i = 0; i < model.n_bodies(); ++i) {
    if (std::find(dummy_rows.begin(), dummy_rows.end(), i) != dummy_rows.end()) continue;
    NewLink nl;
    nl.inertia = model.inertia[i];
    const int pos = path_pos[i];
    if (pos == k) {
      // New root link, anchored by the relocated joint of phys_root.
      nl.parent_old_id = -2;
      nl.joint = model.joints[phys_root];
      nl.xform = model.fixed_xform[phys_root];
      nl.virt = model.is_virtual[phys_root];
    } else if (pos >= 0) {
      // Reversed edge: a_pos becomes a child of a_{pos+1}.
      const int old_child = path[pos + 1];
      nl.parent_old_id = old_child;
      nl.joint = reversed_joint(model.joints[old_child]);
      nl.xform = (pos + 1 < k) ? model.fixed_xform[path[pos + 2]].inverse()
                               : SpatialTransform::Identity();
      // The link frame absorbs the reversed joint's fixed transform.
      const SpatialTransform W = model.fixed_xform[old_child];
      nl.inertia = inertia_transform(W.inverse(), model.inertia[i]);
    } else {
      // Off-path link: unchanged, except when its parent got re-framed.
      const int p = model.parent[i];
      nl.parent_old_id = p;
      nl.joint = model.joints[i];
      nl.xform = model.fixed_xform[i];
      nl.virt = model.is_virtual[i];
      const int ppos = path_pos[p];
      if (ppos >= 0 && ppos < k) {
        const SpatialTransform W = model.fixed_xform[path[ppos + 1]];
        nl.xform = nl.xform * W.inverse();
      }
    }
    links[i] = nl;
  }

  RobotModel out;
  out.name = model.name;
  out.gravity = model.gravity;
  out.root_mode = model.root_mode;

  auto push_link = [&](int parent_new, const JointType& jt, const SpatialTransform& X,
                       const SpatialInertia& I, const std::string& nm, bool virt) {
    out.parent.push_back(parent_new);
    out.joints.push_back(jt);
    out.S.push_back(joint_motion_subspace(jt));
    out.fixed_xform.push_back(X);
    out.inertia.push_back(I);
    out.link_names.push_back(nm);
    out.is_virtual.push_back(virt);
    return static_cast<int>(out.parent.size()) - 1;
  };

  int anchor_tail = -1;
  for (int j : dummy_rows) {
    anchor_tail = push_link(anchor_tail, model.joints[j], model.fixed_xform[j],
                            model.inertia[j], model.link_names[j], true);
  }

  std::map<int, std::vector<int>> new_children;
  for (auto& [id, nl] : links) {
    if (nl.parent_old_id >= 0) new_children[nl.parent_old_id].push_back(id);
  }

  std::map<int, int> new_id;
  std::vector<int> bfs{new_root_link};
  for (size_t qi = 0; qi < bfs.size(); ++qi) {
    const int id = bfs[qi];
    const NewLink& nl = links.at(id);
    const int parent_new = (nl.parent_old_id == -2) ? anchor_tail : new_id.at(nl.parent_old_id);
    new_id[id] = push_link(parent_new, nl.joint, nl.xform, nl.inertia,
                           model.link_names[id], nl.virt);
    auto kids = new_children[id];
    std::sort(kids.begin(), kids.end());
    for (int c : kids) bfs.push_back(c);
  }

  out.finalize();
  res.new_depth = out.max_depth();
  res.model = std::move(out);
  return res;
}

RobotModel split_root(const RobotModel& model) {
  const int root = find_world_root(model);
  if (model.root_mode != RootMode::FloatingSplit || root != 0 ||
      model.joints[root].kind != JointKind::Floating) {
    throw std::invalid_argument("split_root: model has no 6-DOF floating root");
  }

  RobotModel out;
  out.name = model.name;
  out.gravity = model.gravity;
  out.root_mode = model.root_mode;

  // Spherical rotation stage on a massless carrier link, then the
  // translation stage on the original base link.
  JointType sph;
  sph.kind = JointKind::Spherical;
  out.parent.push_back(-1);
  out.joints.push_back(sph);
  out.S.push_back(joint_motion_subspace(sph));
  out.fixed_xform.push_back(model.fixed_xform[root]);
  out.inertia.push_back(SpatialInertia::Zero());
  out.link_names.push_back(model.link_names[root] + "_rot");
  out.is_virtual.push_back(true);

  JointType t3;
  t3.kind = JointKind::Translation3;
  out.parent.push_back(0);
  out.joints.push_back(t3);
  out.S.push_back(joint_motion_subspace(t3));
  out.fixed_xform.push_back(SpatialTransform::Identity());
  out.inertia.push_back(model.inertia[root]);
  out.link_names.push_back(model.link_names[root]);
  out.is_virtual.push_back(true);

  for (int i = 1; i < model.n_bodies(); ++i) {
    out.parent.push_back(model.parent[i] + 1);
    out.joints.push_back(model.joints[i]);
    out.S.push_back(model.S[i]);
    out.fixed_xform.push_back(model.fixed_xform[i]);
    out.inertia.push_back(model.inertia[i]);
    out.link_names.push_back(model.link_names[i]);
    out.is_virtual.push_back(model.is_virtual[i]);
  }
  out.finalize();
  return out;
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> sparsity_pattern(const RobotModel& model) {
  const int n = model.n_dof();
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> P(n, n);
  P.setConstant(false);
  for (int i = 0; i < model.n_bodies(); ++i) {
    for (int di = 0; di < model.dof(i); ++di) {
      const int row = model.dof_offset(i) + di;
      for (int col : model.ancestor_cols(i)) P(row, col) = P(col, row) = true;
    }
  }
  return P;
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> minv_sparsity_pattern(const RobotModel& model) {
  const int n = model.n_dof();
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> P(n, n);
  P.setConstant(false);
  for (int i = 0; i < model.n_bodies(); ++i) {
    for (int j = 0; j < model.n_bodies(); ++j) {
      if (model.world_group(i) != model.world_group(j)) continue;
      for (int di = 0; di < model.dof(i); ++di) {
        for (int dj = 0; dj < model.dof(j); ++dj) {
          P(model.dof_offset(i) + di, model.dof_offset(j) + dj) = true;
        }
      }
    }
  }
  return P;
}

RobotModel reanchor(const RobotModel& model, RootMode mode) {
  if (mode == model.root_mode) return model;
  if (mode == RootMode::FloatingSplit) {
    throw std::invalid_argument("reanchor: cannot synthesize a floating base");
  }
  RobotModel out;
  out.name = model.name;
  out.gravity = model.gravity;
  out.root_mode = mode;
  std::vector<int> new_id(model.n_bodies(), -1);
  for (int i = 0; i < model.n_bodies(); ++i) {
    if (model.is_virtual[i]) continue;  // drop virtual base joints and carriers
    new_id[i] = static_cast<int>(out.parent.size());
    int p = model.parent[i];
    while (p >= 0 && new_id[p] < 0) p = model.parent[p];
    out.parent.push_back(p < 0 ? -1 : new_id[p]);
    out.joints.push_back(model.joints[i]);
    out.S.push_back(model.S[i]);
    out.fixed_xform.push_back(model.fixed_xform[i]);
    out.inertia.push_back(model.inertia[i]);
    out.link_names.push_back(model.link_names[i]);
    out.is_virtual.push_back(false);
  }
  out.finalize();
  return out;
}

}  // namespace rbdpipe
