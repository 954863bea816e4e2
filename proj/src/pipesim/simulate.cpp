#include <algorithm>
#include <deque>
#include <limits>
#include <queue>
#include <sstream>

#include "rbdpipe/pipesim.hpp"

namespace rbdpipe::pipesim {
namespace {

constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

struct Token {
  int task{0};
  int inst{0};
  int rep{0};
  bool operator==(const Token&) const = default;
  bool operator<(const Token& o) const {
    return std::tie(task, inst, rep) < std::tie(o.task, o.inst, o.rep);
  }
};

struct EdgeState {
  std::deque<Token> q;
  int reserved{0};
  int high_water{0};
};

struct EmitEvent {
  std::int64_t cycle;
  std::int64_t seq;
  int stage;
  Token token;
  bool operator>(const EmitEvent& o) const {
    return std::tie(cycle, seq) > std::tie(o.cycle, o.seq);
  }
};

struct PendingTask {
  int next_inst{0};
  bool issued_current{false};
  int feedback_seen{0};
  std::int64_t eligible_at{0};
  int unfinished_deps{0};
  bool finished{false};
  int sink_seen{0};
};

class Simulator {
 public:
  Simulator(const PipelineGraph& g, const TaskSet& ts, SchedulePolicy policy)
      : g_(g), ts_(ts), policy_(policy) {
    validate();
    const int ns = static_cast<int>(g_.stages.size());
    edges_.resize(g_.edges.size());
    in_edges_.resize(ns);
    out_edges_.resize(ns);
    for (size_t e = 0; e < g_.edges.size(); ++e) {
      if (g_.edges[e].dst >= 0) in_edges_[g_.edges[e].dst].push_back(static_cast<int>(e));
      if (g_.edges[e].src >= 0) {
        out_edges_[g_.edges[e].src].push_back(static_cast<int>(e));
      } else {
        entry_edges_.push_back(static_cast<int>(e));
      }
    }
    last_accept_.assign(ns, std::numeric_limits<std::int64_t>::min() / 2);
    last_issue_ = std::numeric_limits<std::int64_t>::min() / 2;

    sink_expected_.assign(g_.n_insts, 0);
    feedback_expected_.assign(g_.n_insts, 0);
    for (const auto& e : g_.edges) {
      for (int inst : e.insts) {
        if (e.dst == -2) sink_expected_[inst] += e.tokens_per_task;
        if (e.dst == -1) feedback_expected_[inst] += e.tokens_per_task;
      }
    }

    pending_.resize(ts_.tasks.size());
    dependents_.resize(ts_.tasks.size());
    trace_.tasks.resize(ts_.tasks.size());
    for (size_t t = 0; t < ts_.tasks.size(); ++t) {
      if (ts_.tasks[t].id != static_cast<int>(t)) {
        throw std::invalid_argument("simulate: task ids must match their positions");
      }
      trace_.tasks[t].id = static_cast<int>(t);
      pending_[t].unfinished_deps = static_cast<int>(ts_.tasks[t].deps.size());
      for (int d : ts_.tasks[t].deps) {
        if (d < 0 || d >= static_cast<int>(ts_.tasks.size())) {
          throw std::invalid_argument("simulate: dependency on unknown task id");
        }
        dependents_[d].push_back(static_cast<int>(t));
      }
    }

    trace_.stage_busy.assign(ns, 0);
    trace_.stage_tokens.assign(ns, 0);
    trace_.fifo_high_water.assign(g_.edges.size(), 0);
  }

  TraceReport run() {
    std::int64_t cycle = 0;
    while (finished_ < static_cast<int>(ts_.tasks.size())) {
      bool progressed = false;
      // Deliver arrivals scheduled for this cycle first; same-cycle
      // consumption downstream is allowed.
      while (!emits_.empty() && emits_.top().cycle == cycle) {
        deliver(emits_.top(), cycle);
        emits_.pop();
        progressed = true;
      }
      // Accept/issue fixpoint at this cycle.
      while (step_accepts(cycle)) progressed = true;

      if (finished_ == static_cast<int>(ts_.tasks.size())) break;

      // Genuine future wake-ups only: scheduled arrivals, or stages/source
      // still gated by an initiation interval. Anything else is blocked on
      // data or space that no pending event can provide.
      const std::int64_t next = next_event_cycle(cycle);
      if (next == kNever) {
        throw DeadlockError(deadlock_message(cycle), cycle);
      }
      (void)progressed;
      cycle = next;
    }

    trace_.makespan = max_finish_;
    if (!trace_.tasks.empty()) {
      const TaskTrace& first = trace_.tasks[first_issued_];
      trace_.first_latency = first.finish - first.issue;
      const auto b = static_cast<std::int64_t>(trace_.tasks.size());
      trace_.steady_ii =
          b > 1 ? static_cast<double>(trace_.makespan - trace_.first_latency) / (b - 1) : 0.0;
    }
    return std::move(trace_);
  }

 private:
  void validate() const {
    // Non-feedback edges must form a DAG per micro-instruction pass.
    for (int inst = 0; inst < g_.n_insts; ++inst) {
      const int ns = static_cast<int>(g_.stages.size());
      std::vector<int> indeg(ns, 0);
      for (const auto& e : g_.edges) {
        if (e.feedback || e.src < 0 || e.dst < 0) continue;
        if (std::find(e.insts.begin(), e.insts.end(), inst) == e.insts.end()) continue;
        ++indeg[e.dst];
      }
      std::vector<int> q;
      for (int s = 0; s < ns; ++s) {
        if (indeg[s] == 0) q.push_back(s);
      }
      size_t seen = q.size();
      for (size_t h = 0; h < q.size(); ++h) {
        for (int e : out_edges_safe(q[h])) {
          const auto& ed = g_.edges[e];
          if (ed.feedback || ed.dst < 0) continue;
          if (std::find(ed.insts.begin(), ed.insts.end(), inst) == ed.insts.end()) continue;
          if (--indeg[ed.dst] == 0) {
            q.push_back(ed.dst);
            ++seen;
          }
        }
      }
      if (seen != static_cast<size_t>(ns)) {
        throw std::invalid_argument("simulate: stage graph has a non-feedback cycle");
      }
    }
    for (const auto& t : ts_.tasks) {
      if (t.function_id != g_.function_id) {
        throw std::invalid_argument("simulate: task function does not match the pipeline");
      }
    }
  }

  std::vector<int> out_edges_safe(int stage) const {
    std::vector<int> out;
    for (size_t e = 0; e < g_.edges.size(); ++e) {
      if (g_.edges[e].src == stage) out.push_back(static_cast<int>(e));
    }
    return out;
  }

  bool edge_carries(const FifoEdge& e, int inst) const {
    return std::find(e.insts.begin(), e.insts.end(), inst) != e.insts.end();
  }

  void deliver(const EmitEvent& ev, std::int64_t cycle) {
    const StageSpec& s = g_.stages[ev.stage];
    for (int ei : out_edges_[ev.stage]) {
      const FifoEdge& e = g_.edges[ei];
      if (!edge_carries(e, ev.token.inst)) continue;
      const bool expand = s.join || e.tokens_per_task != s.tokens_per_task;
      const int count = expand ? e.tokens_per_task : 1;
      for (int r = 0; r < count; ++r) {
        push_token(ei, {ev.token.task, ev.token.inst, expand ? r : ev.token.rep}, cycle);
      }
    }
  }

  void push_token(int ei, const Token& tok, std::int64_t cycle) {
    const FifoEdge& e = g_.edges[ei];
    EdgeState& st = edges_[ei];
    if (e.dst == -2) {
      PendingTask& p = pending_[tok.task];
      if (++p.sink_seen == sink_expected_[tok.inst] && tok.inst == g_.n_insts - 1) {
        p.finished = true;
        ++finished_;
        trace_.tasks[tok.task].finish = cycle;
        max_finish_ = std::max(max_finish_, cycle);
        for (int d : dependents_[tok.task]) {
          if (--pending_[d].unfinished_deps == 0) pending_[d].eligible_at = cycle;
        }
      }
      return;
    }
    if (e.dst == -1) {
      PendingTask& p = pending_[tok.task];
      if (++p.feedback_seen == feedback_expected_[tok.inst]) {
        p.next_inst = tok.inst + 1;
        p.issued_current = false;
        p.feedback_seen = 0;
        p.eligible_at = cycle;
      }
      return;
    }
    st.reserved -= 1;
    st.q.push_back(tok);
    st.high_water = std::max(st.high_water, static_cast<int>(st.q.size()));
    trace_.fifo_high_water[ei] = st.high_water;
  }

  /// One scan over the source and all stages; returns true if anything fired.
  bool step_accepts(std::int64_t cycle) {
    bool fired = false;
    if (try_issue(cycle)) fired = true;

    // Deterministic order: stages holding the smallest candidate token go
    // first, ties by stage id.
    std::vector<std::pair<Token, int>> cands;
    for (int s = 0; s < static_cast<int>(g_.stages.size()); ++s) {
      Token tok;
      if (stage_candidate(s, tok)) cands.push_back({tok, s});
    }
    std::sort(cands.begin(), cands.end());
    for (const auto& [tok, s] : cands) {
      if (try_accept(s, cycle)) fired = true;
    }
    return fired;
  }

  /// The token a stage would accept next, if its inputs align.
  bool stage_candidate(int s, Token& out) const {
    bool have = false;
    for (int ei : in_edges_[s]) {
      const EdgeState& st = edges_[ei];
      if (st.q.empty()) {
        // An empty mandatory input only blocks if some other input already
        // has data for this stage; candidates still need full alignment in
        // try_accept.
        continue;
      }
      if (!have || st.q.front() < out) {
        out = st.q.front();
        have = true;
      }
    }
    return have;
  }

  bool try_issue(std::int64_t cycle) {
    if (cycle < last_issue_ + g_.source_ii) return false;
    // Pick the entry to issue per policy.
    int pick = -1;
    if (policy_ == SchedulePolicy::StrictOrder) {
      // The lowest unissued listing position gates everything behind it.
      for (size_t t = 0; t < ts_.tasks.size(); ++t) {
        const PendingTask& p = pending_[t];
        if (p.finished || p.issued_current) continue;
        if (p.next_inst == 0 && (p.unfinished_deps > 0 || p.eligible_at > cycle)) return false;
        if (p.eligible_at > cycle) return false;
        pick = static_cast<int>(t);
        break;
      }
    } else {
      for (size_t t = 0; t < ts_.tasks.size(); ++t) {
        const PendingTask& p = pending_[t];
        if (p.finished || p.issued_current) continue;
        if (p.next_inst == 0 && p.unfinished_deps > 0) continue;
        if (p.eligible_at > cycle) continue;
        pick = static_cast<int>(t);
        break;
      }
    }
    if (pick < 0) return false;

    PendingTask& p = pending_[pick];
    // All entry edges for this inst need room.
    for (int ei : entry_edges_) {
      const FifoEdge& e = g_.edges[ei];
      if (!edge_carries(e, p.next_inst)) continue;
      const EdgeState& st = edges_[ei];
      if (static_cast<int>(st.q.size()) + st.reserved + e.tokens_per_task > e.capacity) {
        return false;
      }
    }
    for (int ei : entry_edges_) {
      const FifoEdge& e = g_.edges[ei];
      if (!edge_carries(e, p.next_inst)) continue;
      for (int r = 0; r < e.tokens_per_task; ++r) {
        edges_[ei].reserved += 1;  // balanced by push_token
        push_token(ei, {pick, p.next_inst, r}, cycle);
      }
    }
    p.issued_current = true;
    if (p.next_inst == 0) {
      trace_.tasks[pick].id = pick;
      trace_.tasks[pick].issue = cycle;
      trace_.issue_order.push_back(pick);
      if (first_issued_ < 0) first_issued_ = pick;
    }
    last_issue_ = cycle;
    return true;
  }

  bool try_accept(int s, std::int64_t cycle) {
    const StageSpec& spec = g_.stages[s];
    if (cycle < last_accept_[s] + spec.initiation_interval) return false;

    // Each input head is a candidate; with mixed micro-instruction traffic
    // only one of them can have aligned heads across all its edges.
    std::vector<Token> cands;
    for (int ei : in_edges_[s]) {
      const EdgeState& st = edges_[ei];
      if (!st.q.empty()) cands.push_back(st.q.front());
    }
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

    for (const Token& tok : cands) {
      if (accept_token(s, spec, tok, cycle)) return true;
    }
    return false;
  }

  /// Accept `tok` if every input edge carrying its pass has it at the head
  /// (join stages take the task's full replica set per edge) and every
  /// output FIFO it will reach has room.
  bool accept_token(int s, const StageSpec& spec, const Token& tok, std::int64_t cycle) {
    std::vector<std::pair<int, int>> pops;  // edge, count
    for (int ei : in_edges_[s]) {
      const FifoEdge& e = g_.edges[ei];
      if (!edge_carries(e, tok.inst)) continue;
      const EdgeState& st = edges_[ei];
      const int need = spec.join ? e.tokens_per_task : 1;
      if (static_cast<int>(st.q.size()) < need) return false;
      for (int k = 0; k < need; ++k) {
        const Token& h = st.q[k];
        if (h.task != tok.task || h.inst != tok.inst) return false;
        if (!spec.join && h.rep != tok.rep) return false;
      }
      pops.push_back({ei, need});
    }
    if (pops.empty()) return false;

    for (int ei : out_edges_[s]) {
      const FifoEdge& e = g_.edges[ei];
      if (!edge_carries(e, tok.inst)) continue;
      const bool expand = spec.join || e.tokens_per_task != spec.tokens_per_task;
      const int count = expand ? e.tokens_per_task : 1;
      const EdgeState& st = edges_[ei];
      if (e.dst >= 0 &&
          static_cast<int>(st.q.size()) + st.reserved + count > e.capacity) {
        return false;
      }
    }

    for (auto [ei, count] : pops) {
      for (int k = 0; k < count; ++k) edges_[ei].q.pop_front();
    }
    for (int ei : out_edges_[s]) {
      const FifoEdge& e = g_.edges[ei];
      if (!edge_carries(e, tok.inst)) continue;
      const bool expand = spec.join || e.tokens_per_task != spec.tokens_per_task;
      edges_[ei].reserved += expand ? e.tokens_per_task : 1;
    }
    last_accept_[s] = cycle;
    trace_.stage_busy[s] += spec.initiation_interval;
    trace_.stage_tokens[s] += 1;
    emits_.push({cycle + spec.latency, emit_seq_++, s, spec.join ? Token{tok.task, tok.inst, 0} : tok});
    return true;
  }

  std::int64_t next_event_cycle(std::int64_t cycle) const {
    std::int64_t next = emits_.empty() ? kNever : emits_.top().cycle;
    // Stages holding data whose initiation interval has not elapsed yet.
    for (int s = 0; s < static_cast<int>(g_.stages.size()); ++s) {
      bool has_data = false;
      for (int ei : in_edges_[s]) {
        if (!edges_[ei].q.empty()) has_data = true;
      }
      const std::int64_t unblock = last_accept_[s] + g_.stages[s].initiation_interval;
      if (has_data && unblock > cycle) next = std::min(next, unblock);
    }
    bool source_pending = false;
    std::int64_t soonest_eligible = kNever;
    for (size_t t = 0; t < ts_.tasks.size(); ++t) {
      const PendingTask& p = pending_[t];
      if (p.finished || p.issued_current) continue;
      if (p.next_inst == 0 && p.unfinished_deps > 0) continue;
      source_pending = true;
      soonest_eligible = std::min(soonest_eligible, p.eligible_at);
    }
    if (source_pending) {
      const std::int64_t unblock = std::max(last_issue_ + g_.source_ii, soonest_eligible);
      if (unblock > cycle) next = std::min(next, unblock);
    }
    return next;
  }

  std::string deadlock_message(std::int64_t cycle) const {
    std::ostringstream os;
    os << "simulate: deadlock at cycle " << cycle << "; FIFO occupancy:";
    for (size_t e = 0; e < g_.edges.size(); ++e) {
      if (edges_[e].q.empty()) continue;
      const Token& h = edges_[e].q.front();
      os << " [" << g_.edges[e].src << "->" << g_.edges[e].dst << ": " << edges_[e].q.size()
         << "/" << g_.edges[e].capacity << " head=t" << h.task << "i" << h.inst << "r" << h.rep
         << "]";
    }
    return os.str();
  }

  const PipelineGraph& g_;
  const TaskSet& ts_;
  SchedulePolicy policy_;

  std::vector<EdgeState> edges_;
  std::vector<std::vector<int>> in_edges_, out_edges_;
  std::vector<int> entry_edges_;
  std::vector<std::int64_t> last_accept_;
  std::int64_t last_issue_{0};
  std::priority_queue<EmitEvent, std::vector<EmitEvent>, std::greater<>> emits_;
  std::int64_t emit_seq_{0};

  std::vector<PendingTask> pending_;
  std::vector<std::vector<int>> dependents_;
  std::vector<int> sink_expected_, feedback_expected_;
  int finished_{0};
  int first_issued_{-1};
  std::int64_t max_finish_{0};
  TraceReport trace_;
};

}  // namespace

TraceReport simulate(const PipelineGraph& graph, const TaskSet& tasks, SchedulePolicy policy) {
  if (tasks.tasks.empty()) return {};
  return Simulator(graph, tasks, policy).run();
}

std::vector<int> schedule_tasks(const TaskSet& tasks, const PipelineGraph& graph,
                                SchedulePolicy policy) {
  // Reject dependency cycles up front.
  std::vector<int> indeg(tasks.tasks.size(), 0);
  for (const auto& t : tasks.tasks) indeg[t.id] = static_cast<int>(t.deps.size());
  std::vector<int> q;
  for (const auto& t : tasks.tasks) {
    if (t.deps.empty()) q.push_back(t.id);
  }
  std::vector<std::vector<int>> dependents(tasks.tasks.size());
  for (const auto& t : tasks.tasks) {
    for (int d : t.deps) dependents[d].push_back(t.id);
  }
  for (size_t h = 0; h < q.size(); ++h) {
    for (int d : dependents[q[h]]) {
      if (--indeg[d] == 0) q.push_back(d);
    }
  }
  if (q.size() != tasks.tasks.size()) {
    throw std::invalid_argument("schedule_tasks: dependency cycle");
  }
  return simulate(graph, tasks, policy).issue_order;
}

}  // namespace rbdpipe::pipesim
