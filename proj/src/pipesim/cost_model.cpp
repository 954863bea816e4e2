#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "rbdpipe/pipesim.hpp"

namespace rbdpipe::pipesim {

const char* stage_kind_name(StageKind k) {
  switch (k) {
    case StageKind::Rf: return "Rf";
    case StageKind::Rb: return "Rb";
    case StageKind::Df: return "Df";
    case StageKind::Db: return "Db";
    case StageKind::Mb: return "Mb";
    case StageKind::Mf: return "Mf";
    case StageKind::Broadcast: return "broadcast";
    case StageKind::Reduce: return "reduce";
    case StageKind::Trig: return "trig";
    case StageKind::Schedule: return "schedule";
    case StageKind::Feedback: return "feedback";
  }
  return "?";
}

namespace {

bool onehot_cheap(const JointType& j) {
  if (j.kind != JointKind::Revolute && j.kind != JointKind::Prismatic) return false;
  int nonzero = 0;
  for (int k = 0; k < 3; ++k) nonzero += (j.axis[k] != 0.0);
  return nonzero == 1;
}

int to_cycles(double cost) { return std::max(1, static_cast<int>(std::lround(cost))); }

}  // namespace

StageSpec cost_model(const JointType& joint, int depth, StageKind kind,
                     const PipelineConfig& cfg) {
  if (depth < 1) throw std::invalid_argument("cost_model: depth must be >= 1");
  const int dof = joint.dof();
  double cost = 1.0;
  switch (kind) {
    case StageKind::Rf:
    case StageKind::Rb:
    case StageKind::Mb:
    case StageKind::Mf: {
      const double base = kind == StageKind::Rf   ? cfg.rf_base
                          : kind == StageKind::Rb ? cfg.rb_base
                          : kind == StageKind::Mb ? cfg.mb_base
                                                  : cfg.mf_base;
      // Depth-independent per-joint constant; one-hot axes keep the sparse
      // fast path, everything else pays per extra dof.
      cost = onehot_cheap(joint) ? base : base + cfg.dof_step * (dof - 1);
      break;
    }
    case StageKind::Df:
      cost = cfg.df_a + cfg.df_b * depth * dof;
      break;
    case StageKind::Db:
      cost = cfg.db_a + cfg.db_b * depth * dof;
      break;
    case StageKind::Broadcast: cost = cfg.broadcast_cost; break;
    case StageKind::Reduce: cost = cfg.reduce_cost; break;
    case StageKind::Trig: cost = cfg.trig_cost; break;
    case StageKind::Schedule: cost = cfg.schedule_cost; break;
    case StageKind::Feedback: cost = cfg.feedback_cost; break;
  }
  StageSpec s;
  s.kind = kind;
  s.initiation_interval = to_cycles(cost);
  s.latency = s.initiation_interval + cfg.latency_pad;
  return s;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pipeline config '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("pipeline config '" + path + "' is not valid JSON: " + e.what());
  }
  PipelineConfig cfg;
  const auto costs = doc.value("costs", nlohmann::json::object());
  cfg.rf_base = costs.value("rf_base", cfg.rf_base);
  cfg.rb_base = costs.value("rb_base", cfg.rb_base);
  cfg.mb_base = costs.value("mb_base", cfg.mb_base);
  cfg.mf_base = costs.value("mf_base", cfg.mf_base);
  cfg.dof_step = costs.value("dof_step", cfg.dof_step);
  cfg.df_a = costs.value("df_a", cfg.df_a);
  cfg.df_b = costs.value("df_b", cfg.df_b);
  cfg.db_a = costs.value("db_a", cfg.db_a);
  cfg.db_b = costs.value("db_b", cfg.db_b);
  cfg.broadcast_cost = costs.value("broadcast", cfg.broadcast_cost);
  cfg.reduce_cost = costs.value("reduce", cfg.reduce_cost);
  cfg.schedule_cost = costs.value("schedule", cfg.schedule_cost);
  cfg.feedback_cost = costs.value("feedback", cfg.feedback_cost);
  cfg.trig_cost = costs.value("trig", cfg.trig_cost);
  cfg.boundary_cost = costs.value("boundary", cfg.boundary_cost);
  cfg.latency_pad = costs.value("latency_pad", cfg.latency_pad);
  const auto fifo = doc.value("fifo", nlohmann::json::object());
  cfg.fifo_capacity = fifo.value("default_capacity", cfg.fifo_capacity);
  const auto io = doc.value("io", nlohmann::json::object());
  cfg.source_ii = io.value("source_ii", cfg.source_ii);
  const std::string mux = doc.value("multiplex", "pairs");
  if (mux == "pairs") {
    cfg.multiplex = MultiplexPolicy::Pairs;
  } else if (mux == "off") {
    cfg.multiplex = MultiplexPolicy::Off;
  } else {
    throw std::runtime_error("pipeline config: unknown multiplex policy '" + mux + "'");
  }
  return cfg;
}

}  // namespace rbdpipe::pipesim
