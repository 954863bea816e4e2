#include "rbdpipe/cli_app.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "rbdpipe/model_io.hpp"
#include "rbdpipe/pipesim.hpp"
#include "rbdpipe/state_io.hpp"
#include "rbdpipe/trig.hpp"

namespace rbdpipe::cli {
namespace {

struct JobOptions {
  std::string model_path;
  std::string function{"ID"};
  std::string states_path;
  std::string out_path;
  std::string deps{"none"};
  std::string root_mode;
  std::uint64_t seed{20240901};
  int batch{256};
};

FunctionId parse_function(const std::string& name) {
  const auto fn = function_from_name(name);
  if (!fn) {
    throw CLI::ValidationError("--function",
                               "unknown function '" + name +
                                   "' (expected ID, FD, M, Minv, dID, dFD or diFD)");
  }
  return *fn;
}

std::optional<RootMode> parse_root_override(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (s == "fixed_base") return RootMode::FixedBase;
  if (s == "floating_split") return RootMode::FloatingSplit;
  if (s == "state_injected") return RootMode::StateInjected;
  if (s == "ignored") return RootMode::Ignored;
  throw CLI::ValidationError("--root-mode", "unknown root mode '" + s + "'");
}

void write_or_print(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
}

int cmd_compute(const JobOptions& opt, std::ostream& out) {
  const RobotModel model = load_model(opt.model_path);
  FunctionCall call;
  std::vector<RobotState> states;
  if (!opt.states_path.empty()) {
    StateBatch batch = load_states(model, opt.states_path);
    call = batch.call;
    states = std::move(batch.states);
    if (!opt.function.empty()) call.fn = parse_function(opt.function);
  } else {
    call.fn = parse_function(opt.function);
    states = generate_states(model, call.fn, opt.seed, opt.batch);
  }
  call.root_mode_override = parse_root_override(opt.root_mode);
  const std::vector<TaskResult> results = batch_evaluate(model, call, states);
  write_or_print(format_results(model, call, results), opt.out_path, out);
  for (const auto& r : results) {
    if (!r.error.empty()) return 3;
  }
  return 0;
}

struct Stats {
  double mean, p50, p99, min, max;
};

Stats stats_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  auto pct = [&](double p) { return xs[static_cast<size_t>(p * (xs.size() - 1))]; };
  return {mean, pct(0.5), pct(0.99), xs.front(), xs.back()};
}

int cmd_bench(const JobOptions& opt, int repeat, int latency_tasks, std::ostream& out) {
  const RobotModel model = load_model(opt.model_path);
  FunctionCall call;
  call.fn = parse_function(opt.function);
  call.root_mode_override = parse_root_override(opt.root_mode);

  using clock = std::chrono::steady_clock;

  // Single-task latency: one thread, sequential loop over distinct tasks,
  // averaged over repeats.
  std::vector<RobotState> lat_states = generate_states(model, call.fn, opt.seed, latency_tasks);
  DynamicsWorkspace ws;
  std::vector<double> per_task_ns;
  for (int r = 0; r < repeat; ++r) {
    const auto t0 = clock::now();
    for (auto& s : lat_states) {
      TaskResult res;
      switch (call.fn) {
        case FunctionId::ID: res.tau = rnea(model, s, ws); break;
        case FunctionId::FD: res.qdd = fd(model, s, ws); break;
        case FunctionId::M: mminv_gen(model, s, true, false, ws); break;
        case FunctionId::Minv: mminv_gen(model, s, false, true, ws); break;
        case FunctionId::dID:
          rnea(model, s, ws);
          drnea(model, s, ws);
          break;
        case FunctionId::dFD: dfd(model, s, ws); break;
        case FunctionId::diFD: {
          const MatX minv = *mminv_gen(model, s, false, true, ws).Minv;
          difd(model, s, minv, ws);
          break;
        }
      }
    }
    const auto dt = std::chrono::duration<double, std::nano>(clock::now() - t0).count();
    per_task_ns.push_back(dt / latency_tasks);
  }
  const Stats lat = stats_of(per_task_ns);

  // Batched throughput: full batches through batch_evaluate (threads from
  // RBDPIPE_THREADS or hardware concurrency), averaged over repeats.
  std::vector<RobotState> batch_states = generate_states(model, call.fn, opt.seed + 1, opt.batch);
  std::vector<double> batch_rate;
  for (int r = 0; r < repeat; ++r) {
    const auto t0 = clock::now();
    batch_evaluate(model, call, batch_states);
    const auto dt = std::chrono::duration<double>(clock::now() - t0).count();
    batch_rate.push_back(opt.batch / dt);
  }
  const Stats thr = stats_of(batch_rate);
  const double seq_rate = 1e9 / lat.mean;

  nlohmann::json doc{
      {"model", model.name},
      {"function", function_name(call.fn)},
      {"latency_tasks", latency_tasks},
      {"repeat", repeat},
      {"latency_ns", {{"mean", lat.mean}, {"p50", lat.p50}, {"p99", lat.p99}, {"min", lat.min}, {"max", lat.max}}},
      {"sequential_tasks_per_s", seq_rate},
      {"batch", opt.batch},
      {"batch_tasks_per_s", {{"mean", thr.mean}, {"p50", thr.p50}, {"p99", thr.p99}, {"min", thr.min}, {"max", thr.max}}},
  };

  out << "bench " << model.name << " " << function_name(call.fn) << ": latency mean "
      << lat.mean << " ns/task (p50 " << lat.p50 << ", p99 " << lat.p99 << "), sequential "
      << seq_rate << " tasks/s, batch-" << opt.batch << " throughput mean " << thr.mean
      << " tasks/s\n";
  if (!opt.out_path.empty()) {
    std::ofstream f(opt.out_path);
    if (!f) throw std::runtime_error("cannot write '" + opt.out_path + "'");
    f << doc.dump(1) << "\n";
  }
  return 0;
}

int cmd_simulate(const JobOptions& opt, const std::string& config_path,
                 const std::string& policy_name, const std::string& trace_path,
                 std::ostream& out) {
  RobotModel model = load_model(opt.model_path);
  if (model.root_mode == RootMode::FloatingSplit && !model.joints.empty() &&
      model.joints[0].kind == JointKind::Floating) {
    model = split_root(model);
  }
  pipesim::PipelineConfig cfg;
  if (!config_path.empty()) cfg = pipesim::load_pipeline_config(config_path);

  const FunctionId fn = parse_function(opt.function);
  const BranchLayout layout = branch_decompose(model, cfg.multiplex);
  const pipesim::PipelineGraph graph = pipesim::build_pipeline(model, layout, fn, cfg);

  pipesim::TaskSet tasks = opt.deps == "rk4" ? pipesim::TaskSet::chains(opt.batch / 4, 4, fn)
                                             : pipesim::TaskSet::independent(opt.batch, fn);
  const pipesim::SchedulePolicy policy = policy_name == "strict"
                                             ? pipesim::SchedulePolicy::StrictOrder
                                             : pipesim::SchedulePolicy::EligibleFirst;
  const pipesim::TraceReport trace = pipesim::simulate(graph, tasks, policy);
  out << pipesim::report_text(trace, graph);
  if (!trace_path.empty()) {
    std::ofstream f(trace_path);
    if (!f) throw std::runtime_error("cannot write '" + trace_path + "'");
    f << pipesim::report_records(trace, graph);
  }
  return 0;
}

/// The invariant-check suite: everything here runs against the public API
/// with seeded inputs and prints one PASS/FAIL line per invariant.
int cmd_check(const JobOptions& opt, int samples, std::ostream& out) {
  const RobotModel model = load_model(opt.model_path);
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> uq(-1.5, 1.5);
  std::uniform_real_distribution<double> uv(-1.0, 1.0);
  auto random_state = [&]() {
    RobotState s = RobotState::zero(model);
    for (int i = 0; i < model.n_dof(); ++i) {
      s.q[i] = uq(rng);
      s.qd[i] = uv(rng);
      s.qdd_or_tau[i] = uv(rng);
    }
    return s;
  };
  int failures = 0;
  auto report = [&](const std::string& name, bool ok, const std::string& detail = "") {
    out << (ok ? "PASS " : "FAIL ") << name;
    if (!ok && !detail.empty()) out << "  (" << detail << ")";
    out << "\n";
    failures += !ok;
  };

  {
    double worst = 0.0;
    VecX q(100000), s, c;
    std::uniform_real_distribution<double> u(-10.0 * M_PI, 10.0 * M_PI);
    for (int i = 0; i < q.size(); ++i) q[i] = u(rng);
    trig_approx(q, s, c);
    for (int i = 0; i < q.size(); ++i) {
      worst = std::max({worst, std::abs(s[i] - std::sin(q[i])), std::abs(c[i] - std::cos(q[i]))});
    }
    report("trig approximation error <= 1e-9", worst <= 1e-9, "max " + std::to_string(worst));
  }

  DynamicsWorkspace ws;
  const int n = model.n_dof();
  bool lin_ok = true, oracle_ok = true, spd_ok = true, inv_ok = true, round_ok = true;
  bool did_ok = true, dfd_ok = true;
  double lin_worst = 0, inv_worst = 0, round_worst = 0, did_worst = 0, dfd_worst = 0;
  std::string spd_msg;

  for (int t = 0; t < samples; ++t) {
    RobotState s = random_state();

    const MassMatrixResult mm = mminv_gen(model, s, true, true, ws);
    const MatX& M = *mm.M;
    const MatX& Minv = *mm.Minv;

    // tau(q,qd,qdd) - tau(q,qd,0) = M qdd
    const VecX tau = rnea(model, s, ws);
    RobotState s0 = s;
    s0.qdd_or_tau.setZero();
    const VecX bias = rnea(model, s0, ws);
    const double lin_err = ((tau - bias) - M * s.qdd_or_tau).cwiseAbs().maxCoeff() /
                           std::max(1.0, tau.cwiseAbs().maxCoeff());
    lin_worst = std::max(lin_worst, lin_err);
    lin_ok = lin_ok && lin_err <= 1e-9;

    // M column oracle via unit accelerations (gravity on).
    RobotState su = s;
    su.qd.setZero();
    su.f_ext.clear();
    su.qdd_or_tau.setZero();
    const VecX b0 = rnea(model, su, ws);
    double col_err = 0.0;
    for (int j = 0; j < n; ++j) {
      su.qdd_or_tau.setZero();
      su.qdd_or_tau[j] = 1.0;
      col_err = std::max(col_err,
                         (rnea(model, su, ws) - b0 - M.col(j)).cwiseAbs().maxCoeff());
    }
    oracle_ok = oracle_ok && col_err <= 1e-10 * std::max(1.0, M.cwiseAbs().maxCoeff());

    if (Eigen::LLT<MatX>(M).info() != Eigen::Success) {
      spd_ok = false;
      spd_msg = "Cholesky failed: mass matrix is not positive definite";
    }

    const double ierr = (M * Minv - MatX::Identity(n, n)).cwiseAbs().maxCoeff();
    inv_worst = std::max(inv_worst, ierr);
    inv_ok = inv_ok && ierr <= 1e-9;

    // fd then rnea closes the loop.
    const VecX tau_in = s.qdd_or_tau;
    RobotState sf = s;
    const VecX qdd = fd(model, sf, ws);
    RobotState sb = s;
    sb.qdd_or_tau = qdd;
    const double rerr = (rnea(model, sb, ws) - tau_in).cwiseAbs().maxCoeff() /
                        std::max(1.0, tau_in.cwiseAbs().maxCoeff());
    round_worst = std::max(round_worst, rerr);
    round_ok = round_ok && rerr <= 1e-8;
  }
  report("equation-of-motion linearity <= 1e-9", lin_ok,
         "worst " + std::to_string(lin_worst));
  report("mass matrix matches unit-acceleration oracle <= 1e-10", oracle_ok);
  report("mass matrix positive definite", spd_ok, spd_msg);
  report("M * Minv = I <= 1e-9", inv_ok, "worst " + std::to_string(inv_worst));
  report("forward/inverse dynamics roundtrip <= 1e-8", round_ok,
         "worst " + std::to_string(round_worst));

  // Derivatives against central finite differences (step 1e-6).
  const int dsamples = std::max(1, samples / 4);
  const double h = 1e-6;
  for (int t = 0; t < dsamples; ++t) {
    RobotState s = random_state();
    rnea(model, s, ws);
    const DerivativeBlocks an = drnea(model, s, ws);
    DerivativeBlocks fdif;
    fdif.d_dq.resize(n, n);
    fdif.d_dqd.resize(n, n);
    for (int j = 0; j < n; ++j) {
      for (int which : {0, 1}) {
        RobotState p = s, m = s;
        p.sinq.resize(0);
        m.sinq.resize(0);
        (which == 0 ? p.q[j] : p.qd[j]) += h;
        (which == 0 ? m.q[j] : m.qd[j]) -= h;
        (which == 0 ? fdif.d_dq : fdif.d_dqd).col(j) =
            (rnea(model, p, ws) - rnea(model, m, ws)) / (2 * h);
      }
    }
    const double scale = std::max(1.0, fdif.d_dq.cwiseAbs().maxCoeff());
    did_worst = std::max(did_worst,
                         std::max((an.d_dq - fdif.d_dq).cwiseAbs().maxCoeff(),
                                  (an.d_dqd - fdif.d_dqd).cwiseAbs().maxCoeff()) /
                             scale);
    did_ok = did_ok && did_worst <= 1e-5;

    RobotState sd = random_state();
    const DerivativeBlocks anf = dfd(model, sd, ws);
    DerivativeBlocks ffd;
    ffd.d_dq.resize(n, n);
    ffd.d_dqd.resize(n, n);
    for (int j = 0; j < n; ++j) {
      for (int which : {0, 1}) {
        RobotState p = sd, m = sd;
        p.sinq.resize(0);
        m.sinq.resize(0);
        (which == 0 ? p.q[j] : p.qd[j]) += h;
        (which == 0 ? m.q[j] : m.qd[j]) -= h;
        (which == 0 ? ffd.d_dq : ffd.d_dqd).col(j) = (fd(model, p, ws) - fd(model, m, ws)) / (2 * h);
      }
    }
    const double fscale = std::max(1.0, ffd.d_dq.cwiseAbs().maxCoeff());
    dfd_worst = std::max(dfd_worst,
                         std::max((anf.d_dq - ffd.d_dq).cwiseAbs().maxCoeff(),
                                  (anf.d_dqd - ffd.d_dqd).cwiseAbs().maxCoeff()) /
                             fscale);
    dfd_ok = dfd_ok && dfd_worst <= 1e-5;
  }
  report("inverse-dynamics derivatives match finite differences <= 1e-5", did_ok,
         "worst " + std::to_string(did_worst));
  report("forward-dynamics derivatives match finite differences <= 1e-5", dfd_ok,
         "worst " + std::to_string(dfd_worst));

  {
    const auto pat = sparsity_pattern(model);
    const auto ipat = minv_sparsity_pattern(model);
    RobotState s = random_state();
    const MassMatrixResult mm = mminv_gen(model, s, true, true, ws);
    rnea(model, s, ws);
    const DerivativeBlocks blocks = drnea(model, s, ws);
    bool zeros_ok = true;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (!pat(i, j)) {
          zeros_ok = zeros_ok && (*mm.M)(i, j) == 0.0 && blocks.d_dq(i, j) == 0.0 &&
                     blocks.d_dqd(i, j) == 0.0;
        }
        if (!ipat(i, j)) zeros_ok = zeros_ok && (*mm.Minv)(i, j) == 0.0;
      }
    }
    report("branch-induced structural zeros are exact", zeros_ok);
  }

  out << (failures == 0 ? "all checks passed" : "checks FAILED") << " (" << model.name << ", seed "
      << opt.seed << ")\n";
  return failures == 0 ? 0 : 2;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"rigid body dynamics toolkit with a pipelined-dataflow simulator", "rbdpipe"};
  app.require_subcommand(1);

  JobOptions opt;
  int repeat = 20;
  int latency_tasks = 128;
  int samples = 12;
  std::string sim_config, policy = "eligible", trace_path;

  auto add_common = [&](CLI::App* cmd, bool need_function) {
    cmd->add_option("--model", opt.model_path, "model document (JSON)")->required();
    auto* f = cmd->add_option("--function", opt.function,
                              "dynamics function: ID, FD, M, Minv, dID, dFD, diFD");
    if (need_function) f->required();
    cmd->add_option("--seed", opt.seed, "seed for generated states");
    cmd->add_option("--batch", opt.batch, "number of batched tasks");
    cmd->add_option("--out", opt.out_path, "output file (default: stdout)");
    cmd->add_option("--root-mode", opt.root_mode,
                    "override the model root mode (fixed_base, state_injected, ignored)");
  };

  auto* compute = app.add_subcommand("compute", "run one function over a batch of states");
  add_common(compute, false);
  compute->add_option("--states", opt.states_path, "state file (JSON); omit to generate");
  compute->add_option("--deps", opt.deps, "dependency structure: none or rk4");

  auto* bench = app.add_subcommand("bench", "measure single-task latency and batch throughput");
  add_common(bench, true);
  bench->add_option("--repeat", repeat, "measurement repetitions");
  bench->add_option("--latency-tasks", latency_tasks, "distinct tasks in the latency loop");

  auto* simulate = app.add_subcommand("simulate", "cycle-approximate pipeline simulation");
  add_common(simulate, true);
  simulate->add_option("--sim-config", sim_config, "pipeline cost/fifo configuration (JSON)");
  simulate->add_option("--policy", policy, "issue policy: eligible or strict");
  simulate->add_option("--deps", opt.deps, "dependency structure: none or rk4");
  simulate->add_option("--trace", trace_path, "write line-delimited trace records here");

  auto* check = app.add_subcommand("check", "run the invariant suite against a model");
  check->add_option("--model", opt.model_path, "model document (JSON)")->required();
  check->add_option("--seed", opt.seed, "rng seed");
  check->add_option("--samples", samples, "random states per invariant");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (compute->parsed()) return cmd_compute(opt, out);
    if (bench->parsed()) return cmd_bench(opt, repeat, latency_tasks, out);
    if (simulate->parsed()) return cmd_simulate(opt, sim_config, policy, trace_path, out);
    if (check->parsed()) return cmd_check(opt, samples, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace rbdpipe::cli
