#include <cstdlib>
#include <thread>

#include "rbdpipe/dynamics.hpp"

namespace rbdpipe {
namespace {

int thread_count(size_t batch) {
  if (const char* env = std::getenv("RBDPIPE_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return std::min<size_t>(v, batch);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::min<size_t>(hw ? hw : 1, batch));
}

void run_task(const RobotModel& model, const FunctionCall& call, RobotState& state,
              size_t index, DynamicsWorkspace& ws, TaskResult& out) {
  try {
    switch (call.fn) {
      case FunctionId::ID:
        out.tau = rnea(model, state, ws);
        break;
      case FunctionId::FD:
        out.qdd = fd(model, state, ws);
        break;
      case FunctionId::M:
      case FunctionId::Minv: {
        const bool want_m = call.fn == FunctionId::M || call.out_M;
        const bool want_minv = call.fn == FunctionId::Minv || call.out_Minv;
        const MassMatrixResult mm = mminv_gen(model, state, want_m, want_minv, ws);
        out.M = mm.M;
        out.Minv = mm.Minv;
        break;
      }
      case FunctionId::dID: {
        out.tau = rnea(model, state, ws);
        out.deriv = drnea(model, state, ws);
        break;
      }
      case FunctionId::dFD: {
        MatX minv;
        out.deriv = dfd(model, state, ws, &minv);
        if (call.out_Minv) out.Minv = std::move(minv);
        break;
      }
      case FunctionId::diFD: {
        MatX minv;
        if (index < call.minv_inputs.size() && call.minv_inputs[index].size() > 0) {
          minv = call.minv_inputs[index];
        } else {
          minv = *mminv_gen(model, state, false, true, ws).Minv;
        }
        out.deriv = difd(model, state, minv, ws);
        break;
      }
    }
  } catch (const std::exception& e) {
    out = TaskResult{};
    out.error = e.what();
  }
}

}  // namespace

std::vector<TaskResult> batch_evaluate(const RobotModel& model, const FunctionCall& call,
                                       std::vector<RobotState>& states) {
  validate_flags(call);
  const RobotModel* m = &model;
  RobotModel reanchored;
  if (call.root_mode_override && *call.root_mode_override != model.root_mode) {
    reanchored = reanchor(model, *call.root_mode_override);
    m = &reanchored;
  }

  std::vector<TaskResult> results(states.size());
  const int nthreads = thread_count(states.size());
  if (nthreads <= 1) {
    DynamicsWorkspace ws;
    for (size_t t = 0; t < states.size(); ++t) run_task(*m, call, states[t], t, ws, results[t]);
    return results;
  }

  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (int w = 0; w < nthreads; ++w) {
    pool.emplace_back([&, w]() {
      DynamicsWorkspace ws;
      for (size_t t = w; t < states.size(); t += nthreads) {
        run_task(*m, call, states[t], t, ws, results[t]);
      }
    });
  }
  for (auto& th : pool) th.join();
  return results;
}

}  // namespace rbdpipe
