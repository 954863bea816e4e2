#include "rbdpipe/state_io.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace rbdpipe {
namespace {

using nlohmann::json;

VecX parse_vector(const json& j, int expect, const std::string& what) {
  if (!j.is_array() || (expect >= 0 && static_cast<int>(j.size()) != expect)) {
    throw std::runtime_error("state file: '" + what + "' must be a vector of length " +
                             std::to_string(expect));
  }
  VecX v(j.size());
  for (size_t k = 0; k < j.size(); ++k) v[k] = j[k].get<double>();
  return v;
}

SpatialVector parse_sv(const json& j, const std::string& what) {
  const VecX v = parse_vector(j, 6, what);
  return SpatialVector::from_vec(v);
}

MatX parse_matrix(const json& j, int n, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    throw std::runtime_error("state file: '" + what + "' must be a " + std::to_string(n) + "x" +
                             std::to_string(n) + " matrix");
  }
  MatX m(n, n);
  for (int r = 0; r < n; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || static_cast<int>(row.size()) != n) {
      throw std::runtime_error("state file: ragged rows in '" + what + "'");
    }
    for (int c = 0; c < n; ++c) m(r, c) = row[c].get<double>();
  }
  return m;
}

json vec_json(const VecX& v) {
  json a = json::array();
  for (int k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

json mat_json(const MatX& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

StateBatch parse_states(const RobotModel& model, const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("state file is not valid JSON: ") + e.what());
  }
  StateBatch batch;
  const std::string fname = doc.value("function", "ID");
  const auto fn = function_from_name(fname);
  if (!fn) throw std::runtime_error("state file: unknown function '" + fname + "'");
  batch.call.fn = *fn;
  batch.call.out_M = doc.value("out_M", false);
  batch.call.out_Minv = doc.value("out_Minv", false);

  if (!doc.contains("states") || !doc["states"].is_array()) {
    throw std::runtime_error("state file: missing 'states' array");
  }
  const int n = model.n_dof();
  const bool wants_accel = batch.call.fn == FunctionId::ID || batch.call.fn == FunctionId::dID ||
                           batch.call.fn == FunctionId::diFD;
  for (const auto& sj : doc["states"]) {
    RobotState s = RobotState::zero(model);
    if (!sj.contains("q")) throw std::runtime_error("state file: every state needs 'q'");
    s.q = parse_vector(sj["q"], n, "q");
    if (sj.contains("qd")) s.qd = parse_vector(sj["qd"], n, "qd");
    if (sj.contains("qdd") && sj.contains("tau")) {
      throw std::runtime_error("state file: give either 'qdd' or 'tau', not both");
    }
    if (sj.contains("qdd")) {
      s.qdd_or_tau = parse_vector(sj["qdd"], n, "qdd");
    } else if (sj.contains("tau")) {
      s.qdd_or_tau = parse_vector(sj["tau"], n, "tau");
    } else if (wants_accel && (batch.call.fn == FunctionId::ID || batch.call.fn == FunctionId::dID)) {
      // zero accelerations are a meaningful default for ID
    }
    if (sj.contains("f_ext")) {
      const auto& fj = sj["f_ext"];
      if (!fj.is_array() || static_cast<int>(fj.size()) != model.n_bodies()) {
        throw std::runtime_error("state file: f_ext needs one 6-vector per link");
      }
      s.f_ext.clear();
      for (const auto& w : fj) s.f_ext.push_back(parse_sv(w, "f_ext"));
    }
    if (sj.contains("base_velocity")) s.base_velocity = parse_sv(sj["base_velocity"], "base_velocity");
    if (sj.contains("base_acceleration")) {
      s.base_acceleration = parse_sv(sj["base_acceleration"], "base_acceleration");
    }
    if (sj.contains("minv")) {
      batch.call.minv_inputs.resize(batch.states.size() + 1);
      batch.call.minv_inputs.back() = parse_matrix(sj["minv"], n, "minv");
    }
    batch.states.push_back(std::move(s));
  }
  return batch;
}

StateBatch load_states(const RobotModel& model, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open state file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_states(model, ss.str());
}

std::string format_results(const RobotModel& model, const FunctionCall& call,
                           const std::vector<TaskResult>& results) {
  json doc;
  doc["function"] = function_name(call.fn);
  doc["model"] = model.name;
  json out = json::array();
  for (const auto& r : results) {
    json rec;
    if (!r.error.empty()) {
      rec["error"] = r.error;
      out.push_back(rec);
      continue;
    }
    if (r.tau.size() > 0) rec["tau"] = vec_json(r.tau);
    if (r.qdd.size() > 0) rec["qdd"] = vec_json(r.qdd);
    if (r.M) rec["M"] = mat_json(*r.M);
    if (r.Minv) rec["Minv"] = mat_json(*r.Minv);
    if (r.deriv) {
      const bool accel = call.fn == FunctionId::dFD || call.fn == FunctionId::diFD;
      rec[accel ? "dqdd_dq" : "dtau_dq"] = mat_json(r.deriv->d_dq);
      rec[accel ? "dqdd_dqd" : "dtau_dqd"] = mat_json(r.deriv->d_dqd);
    }
    out.push_back(rec);
  }
  doc["outputs"] = out;
  return doc.dump(1) + "\n";
}

std::vector<RobotState> generate_states(const RobotModel& model, FunctionId fn,
                                        std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uq(-1.5, 1.5);
  std::uniform_real_distribution<double> uv(-1.0, 1.0);
  std::vector<RobotState> out;
  out.reserve(count);
  for (int t = 0; t < count; ++t) {
    RobotState s = RobotState::zero(model);
    for (int i = 0; i < model.n_dof(); ++i) {
      s.q[i] = uq(rng);
      s.qd[i] = uv(rng);
      s.qdd_or_tau[i] = (fn == FunctionId::FD || fn == FunctionId::dFD) ? 2.0 * uv(rng) : uv(rng);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace rbdpipe
