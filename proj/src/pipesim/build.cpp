#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rbdpipe/pipesim.hpp"

namespace rbdpipe::pipesim {
namespace {

constexpr int kSourceNode = -1;
constexpr int kSinkNode = -2;
constexpr int kUnboundedCap = 1 << 28;

struct Builder {
  const RobotModel& model;
  const BranchLayout& layout;
  const PipelineConfig& cfg;
  PipelineGraph g;

  int add_joint_stage(StageKind kind, int joint, int branch, int tpt) {
    StageSpec s = cost_model(model.joints[joint], layout.depth[joint], kind, cfg);
    s.id = static_cast<int>(g.stages.size());
    s.joint_id = joint;
    s.branch = branch;
    s.tokens_per_task = tpt;
    g.stages.push_back(s);
    return s.id;
  }

  int add_aux_stage(StageKind kind, double cost_override = -1.0) {
    StageSpec s = cost_model(JointType{}, 1, kind, cfg);
    if (cost_override > 0.0) {
      s.initiation_interval = std::max(1, static_cast<int>(std::lround(cost_override)));
      s.latency = s.initiation_interval + cfg.latency_pad;
    }
    s.id = static_cast<int>(g.stages.size());
    s.joint_id = -1;
    s.branch = -1;
    s.join = kind == StageKind::Broadcast || kind == StageKind::Reduce ||
             kind == StageKind::Schedule || kind == StageKind::Feedback;
    g.stages.push_back(s);
    return s.id;
  }

  /// Adds one FIFO per micro-instruction pass: passes share stages (and
  /// their initiation intervals) but never a queue, so their interleaving
  /// order can differ along the array without head-of-line coupling.
  void edge(int src, int dst, const std::vector<int>& insts, int tpt, int cap,
            bool feedback = false) {
    for (int inst : insts) {
      FifoEdge e;
      e.src = src;
      e.dst = dst;
      e.insts = {inst};
      e.tokens_per_task = tpt;
      e.capacity = cap;
      e.feedback = feedback;
      g.edges.push_back(e);
    }
  }

  int chain_cap(int tpt) const { return cfg.fifo_capacity * tpt; }

  /// Bypass FIFO between a forward/backward stage pair: sized to the full
  /// round-trip occupancy below the pair -- every downstream stage can hold
  /// work in service plus a queued backlog, per replica and per
  /// micro-instruction pass -- so shallow joints' tokens park without
  /// stalling the array.
  int bypass_cap(int pairs_below, int tpt, int stages_per_pair, int insts) const {
    const int stages_below = (pairs_below + 1) * stages_per_pair;
    return std::max(cfg.fifo_capacity, stages_below * (cfg.fifo_capacity + 2)) * tpt * insts;
  }
};

struct FbChains {
  // stage ids per chain position
  std::vector<int> rf, df, rb, db;
};

}  // namespace

PipelineGraph build_pipeline(const RobotModel& model, const BranchLayout& layout,
                             FunctionId fn, const PipelineConfig& cfg) {
  const bool want_r = fn == FunctionId::ID || fn == FunctionId::FD || fn == FunctionId::dID ||
                      fn == FunctionId::diFD || fn == FunctionId::dFD;
  const bool want_d = fn == FunctionId::dID || fn == FunctionId::diFD || fn == FunctionId::dFD;
  const bool want_bf = fn == FunctionId::M || fn == FunctionId::Minv || fn == FunctionId::FD ||
                       fn == FunctionId::dFD;
  const bool want_sched = fn == FunctionId::FD || fn == FunctionId::diFD || fn == FunctionId::dFD;

  Builder b{model, layout, cfg, {}};
  b.g.function_id = fn;
  b.g.branch_map = layout;
  b.g.source_ii = cfg.source_ii;
  b.g.n_insts = fn == FunctionId::dFD ? 2 : 1;

  // Micro-instruction passes: the derivative pass routes through the D
  // stages, the plain pass skips them.
  std::vector<int> plain_inst, deriv_inst;
  if (fn == FunctionId::dFD) {
    plain_inst = {0};
    deriv_inst = {1};
  } else if (want_d) {
    deriv_inst = {0};
  } else {
    plain_inst = {0};
  }
  std::vector<int> all_inst;
  for (int k = 0; k < b.g.n_insts; ++k) all_inst.push_back(k);

  const int n_branches = static_cast<int>(layout.branches.size());
  const int root_len = static_cast<int>(layout.root_joints.size());
  // Fan stages are needed whenever branch data must be copied or merged:
  // several branch arrays, or one multiplexed array whose replicas have to
  // be joined before the root or the global boundary.
  const bool aux_fan =
      n_branches >= 2 || (n_branches == 1 && layout.multiplexed.at(0) > 1);

  int sched = -1;
  if (want_sched) sched = b.add_aux_stage(StageKind::Schedule);

  // ---- Forward-Backward module -------------------------------------------
  if (want_r) {
    // Longest downstream chain length per segment, for bypass sizing.
    size_t longest_branch = 0;
    for (const auto& br : layout.branches) longest_branch = std::max(longest_branch, br.size());

    auto build_chain = [&](const std::vector<int>& joints, int branch, int tpt,
                           int pairs_past_end) {
      FbChains c;
      const int L = static_cast<int>(joints.size());
      for (int k = 0; k < L; ++k) {
        c.rf.push_back(b.add_joint_stage(StageKind::Rf, joints[k], branch, tpt));
        if (want_d) c.df.push_back(b.add_joint_stage(StageKind::Df, joints[k], branch, tpt));
      }
      for (int k = 0; k < L; ++k) {
        if (want_d) c.db.push_back(b.add_joint_stage(StageKind::Db, joints[k], branch, tpt));
        c.rb.push_back(b.add_joint_stage(StageKind::Rb, joints[k], branch, tpt));
      }
      // Forward chain: plain pass Rf->Rf, derivative pass Rf->Df->Rf.
      for (int k = 0; k < L - 1; ++k) {
        if (!plain_inst.empty()) b.edge(c.rf[k], c.rf[k + 1], plain_inst, tpt, b.chain_cap(tpt));
        if (want_d) {
          b.edge(c.rf[k], c.df[k], deriv_inst, tpt, b.chain_cap(tpt));
          b.edge(c.df[k], c.rf[k + 1], deriv_inst, tpt, b.chain_cap(tpt));
        }
      }
      if (want_d && L >= 1) b.edge(c.rf[L - 1], c.df[L - 1], deriv_inst, tpt, b.chain_cap(tpt));
      // Backward chain: Db_k -> Rb_k -> Db_{k-1}.
      for (int k = L - 1; k >= 1; --k) {
        if (!plain_inst.empty()) b.edge(c.rb[k], c.rb[k - 1], plain_inst, tpt, b.chain_cap(tpt));
        if (want_d) {
          b.edge(c.db[k], c.rb[k], deriv_inst, tpt, b.chain_cap(tpt));
          b.edge(c.rb[k], c.db[k - 1], deriv_inst, tpt, b.chain_cap(tpt));
        }
      }
      if (want_d && L >= 1) b.edge(c.db[0], c.rb[0], deriv_inst, tpt, b.chain_cap(tpt));
      // Round-trip bypasses (the deepest pair's bypass is the turnaround).
      for (int k = 0; k < L; ++k) {
        const int below = (L - 1 - k) + pairs_past_end;
        const int spp = want_d ? 4 : 2;
        b.edge(c.rf[k], c.rb[k], all_inst, tpt, b.bypass_cap(below, tpt, spp, b.g.n_insts));
        if (want_d) {
          b.edge(c.df[k], c.db[k], deriv_inst, tpt, b.bypass_cap(below, tpt, spp, b.g.n_insts));
        }
      }
      return c;
    };

    FbChains root;
    if (root_len > 0) {
      root = build_chain(layout.root_joints, -1, 1,
                         static_cast<int>(longest_branch) + (aux_fan ? 1 : 0));
    }
    int bcast = -1, red = -1;
    if (aux_fan) {
      bcast = b.add_aux_stage(StageKind::Broadcast);
      red = b.add_aux_stage(StageKind::Reduce);
    }

    std::vector<FbChains> branches;
    for (int br = 0; br < n_branches; ++br) {
      const int tpt = layout.multiplexed.at(br);
      branches.push_back(build_chain(layout.branches[br], br, tpt, 0));
    }

    // Stitch segments together. The plain pass leaves a forward chain at its
    // Rf tail and re-enters the backward chain at its Rb tail; the
    // derivative pass uses the interleaved Df/Db stages instead.
    auto fwd_head = [&](const FbChains& c) { return c.rf.front(); };
    auto stitch_fwd = [&](const FbChains& from, int dst, int tpt) {
      if (!plain_inst.empty()) b.edge(from.rf.back(), dst, plain_inst, tpt, b.chain_cap(tpt));
      if (want_d) b.edge(from.df.back(), dst, deriv_inst, tpt, b.chain_cap(tpt));
    };
    auto stitch_bwd = [&](int src, const FbChains& into, int tpt) {
      if (!plain_inst.empty()) b.edge(src, into.rb.back(), plain_inst, tpt, b.chain_cap(tpt));
      if (want_d) b.edge(src, into.db.back(), deriv_inst, tpt, b.chain_cap(tpt));
    };
    auto bwd_tail = [&](const FbChains& c) { return c.rb.front(); };

    if (root_len > 0) {
      b.edge(kSourceNode, fwd_head(root), all_inst, 1, b.chain_cap(1));
      if (aux_fan) {
        stitch_fwd(root, bcast, 1);
        stitch_bwd(red, root, 1);
      } else if (n_branches == 1) {
        stitch_fwd(root, fwd_head(branches[0]), layout.multiplexed.at(0));
        stitch_bwd(bwd_tail(branches[0]), root, layout.multiplexed.at(0));
      }
      // A bare root with no branch below turns around through its bypass.
    } else if (!aux_fan && n_branches == 1) {
      b.edge(kSourceNode, fwd_head(branches[0]), all_inst, layout.multiplexed.at(0),
             b.chain_cap(layout.multiplexed.at(0)));
    }
    if (aux_fan) {
      if (root_len == 0) b.edge(kSourceNode, bcast, all_inst, 1, b.chain_cap(1));
      for (int br = 0; br < n_branches; ++br) {
        const int tpt = layout.multiplexed.at(br);
        b.edge(bcast, fwd_head(branches[br]), all_inst, tpt, b.chain_cap(tpt));
        b.edge(bwd_tail(branches[br]), red, all_inst, tpt, b.chain_cap(tpt));
      }
    }

    // Backward terminal of the whole module.
    int fb_end;
    if (root_len > 0) {
      fb_end = bwd_tail(root);
    } else if (aux_fan) {
      fb_end = red;
    } else {
      fb_end = bwd_tail(branches[0]);
    }
    const int fb_end_tpt = (root_len > 0 || aux_fan) ? 1 : layout.multiplexed.at(0);
    if (want_sched) {
      b.edge(fb_end, sched, all_inst, fb_end_tpt, b.chain_cap(fb_end_tpt));
    } else {
      b.edge(fb_end, kSinkNode, all_inst, fb_end_tpt, kUnboundedCap);
    }
  }

  // ---- Backward-Forward module (mass matrix and inverse) ------------------
  if (want_bf) {
    struct BfChain {
      std::vector<int> mb, mf;  // indexed by chain position (root side first)
    };
    auto build_bf = [&](const std::vector<int>& joints, int branch, int tpt) {
      BfChain c;
      const int L = static_cast<int>(joints.size());
      for (int k = L - 1; k >= 0; --k) {
        c.mb.insert(c.mb.begin(), b.add_joint_stage(StageKind::Mb, joints[k], branch, tpt));
      }
      for (int k = 0; k < L; ++k) {
        c.mf.push_back(b.add_joint_stage(StageKind::Mf, joints[k], branch, tpt));
      }
      for (int k = L - 1; k >= 1; --k) {
        b.edge(c.mb[k], c.mb[k - 1], plain_inst, tpt, b.chain_cap(tpt));
      }
      for (int k = 0; k < L - 1; ++k) {
        b.edge(c.mf[k], c.mf[k + 1], plain_inst, tpt, b.chain_cap(tpt));
      }
      for (int k = 0; k < L; ++k) {
        b.edge(c.mb[k], c.mf[k], plain_inst, tpt, b.bypass_cap(k, tpt, 2, 1));
      }
      return c;
    };

    BfChain root;
    if (root_len > 0) root = build_bf(layout.root_joints, -1, 1);
    int bcast = -1, red = -1;
    if (aux_fan) {
      bcast = b.add_aux_stage(StageKind::Broadcast);
      red = b.add_aux_stage(StageKind::Reduce);
    }
    const int mb0 = b.add_aux_stage(StageKind::Mb, cfg.boundary_cost);
    const int mf0 = b.add_aux_stage(StageKind::Mf, cfg.boundary_cost);
    b.edge(mb0, mf0, plain_inst, 1, b.chain_cap(1));

    std::vector<BfChain> branches;
    for (int br = 0; br < n_branches; ++br) {
      branches.push_back(build_bf(layout.branches[br], br, layout.multiplexed.at(br)));
    }

    for (int br = 0; br < n_branches; ++br) {
      const int tpt = layout.multiplexed.at(br);
      b.edge(kSourceNode, branches[br].mb.back(), plain_inst, tpt, b.chain_cap(tpt));
      const int into = aux_fan ? red : (root_len > 0 ? root.mb.back() : mb0);
      b.edge(branches[br].mb.front(), into, plain_inst, tpt, b.chain_cap(tpt));
      const int from = aux_fan ? bcast : (root_len > 0 ? root.mf.back() : mf0);
      b.edge(from, branches[br].mf.front(), plain_inst, tpt, b.chain_cap(tpt));
      const int out_dst = want_sched ? sched : kSinkNode;
      b.edge(branches[br].mf.back(), out_dst, plain_inst, tpt,
             want_sched ? b.chain_cap(tpt) : kUnboundedCap);
    }
    if (aux_fan) {
      const int into = root_len > 0 ? root.mb.back() : mb0;
      const int from = root_len > 0 ? root.mf.back() : mf0;
      b.edge(red, into, plain_inst, 1, b.chain_cap(1));
      b.edge(from, bcast, plain_inst, 1, b.chain_cap(1));
    }
    if (root_len > 0) {
      b.edge(root.mb.front(), mb0, plain_inst, 1, b.chain_cap(1));
      b.edge(mf0, root.mf.front(), plain_inst, 1, b.chain_cap(1));
    }
    if (n_branches == 0) {
      // Degenerate: root chain only.
      b.edge(kSourceNode, root.mb.back(), plain_inst, 1, b.chain_cap(1));
      const int out_dst = want_sched ? sched : kSinkNode;
      b.edge(root.mf.back(), out_dst, plain_inst, 1,
             want_sched ? b.chain_cap(1) : kUnboundedCap);
    }
  }

  // ---- Schedule / feedback terminals --------------------------------------
  if (want_sched) {
    if (fn == FunctionId::dFD) {
      const int fbk = b.add_aux_stage(StageKind::Feedback);
      b.edge(sched, fbk, {0}, 1, b.chain_cap(1));
      b.edge(fbk, kSourceNode, {0}, 1, kUnboundedCap, /*feedback=*/true);
      b.edge(sched, kSinkNode, {1}, 1, kUnboundedCap);
    } else {
      b.edge(sched, kSinkNode, {0}, 1, kUnboundedCap);
    }
  }

  if (b.g.stages.empty()) {
    throw std::invalid_argument("build_pipeline: unsupported function");
  }
  return b.g;
}

TaskSet TaskSet::independent(int count, FunctionId fn) {
  TaskSet ts;
  for (int i = 0; i < count; ++i) ts.tasks.push_back({i, {}, fn});
  return ts;
}

TaskSet TaskSet::chains(int points, int length, FunctionId fn) {
  TaskSet ts;
  int id = 0;
  for (int p = 0; p < points; ++p) {
    for (int k = 0; k < length; ++k) {
      Task t;
      t.id = id;
      t.function_id = fn;
      if (k > 0) t.deps.push_back(id - 1);
      ts.tasks.push_back(t);
      ++id;
    }
  }
  return ts;
}

double bottleneck_interval(const PipelineGraph& g) {
  std::vector<char> visited_by(g.stages.size() * static_cast<size_t>(g.n_insts), 0);
  for (const auto& e : g.edges) {
    if (e.dst < 0) continue;
    for (int inst : e.insts) visited_by[e.dst * g.n_insts + inst] = 1;
  }
  double worst = g.source_ii * static_cast<double>(g.n_insts);
  for (const auto& s : g.stages) {
    double per_task = 0.0;
    for (int inst = 0; inst < g.n_insts; ++inst) {
      if (!visited_by[s.id * g.n_insts + inst]) continue;
      per_task += s.initiation_interval * static_cast<double>(s.join ? 1 : s.tokens_per_task);
    }
    worst = std::max(worst, per_task);
  }
  return worst;
}

}  // namespace rbdpipe::pipesim
