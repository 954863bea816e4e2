#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "rbdpipe/pipesim.hpp"

namespace rbdpipe::pipesim {

std::string report_text(const TraceReport& trace, const PipelineGraph& graph) {
  std::ostringstream os;
  const auto b = static_cast<std::int64_t>(trace.tasks.size());
  const double throughput = trace.makespan > 0 ? 1000.0 * b / trace.makespan : 0.0;
  os << "pipeline " << function_name(graph.function_id) << ": " << graph.stages.size()
     << " stages, " << graph.edges.size() << " fifos, " << b << " tasks\n";
  os << "  makespan        " << trace.makespan << " cycles\n";
  os << "  first latency   " << trace.first_latency << " cycles\n";
  os << "  steady II       " << trace.steady_ii << " cycles/task (bound "
     << bottleneck_interval(graph) << ")\n";
  os << "  throughput      " << throughput << " tasks/kilocycle\n";

  std::vector<double> lat;
  for (const auto& t : trace.tasks) lat.push_back(static_cast<double>(t.finish - t.issue));
  std::sort(lat.begin(), lat.end());
  if (!lat.empty()) {
    auto pct = [&](double p) { return lat[static_cast<size_t>(p * (lat.size() - 1))]; };
    os << "  task latency    min " << lat.front() << " / p50 " << pct(0.5) << " / p99 "
       << pct(0.99) << " / max " << lat.back() << "\n";
  }

  os << "  stage utilization (busy/makespan):\n";
  for (const auto& s : graph.stages) {
    const double util =
        trace.makespan > 0 ? static_cast<double>(trace.stage_busy[s.id]) / trace.makespan : 0.0;
    os << "    #" << s.id << " " << stage_kind_name(s.kind);
    if (s.joint_id >= 0) os << "[j" << s.joint_id << "]";
    os << " ii=" << s.initiation_interval << " lat=" << s.latency << " tokens="
       << trace.stage_tokens[s.id] << " util=" << util << "\n";
  }
  os << "  fifo high-water marks:\n";
  for (size_t e = 0; e < graph.edges.size(); ++e) {
    if (trace.fifo_high_water[e] == 0) continue;
    os << "    " << graph.edges[e].src << "->" << graph.edges[e].dst << " "
       << trace.fifo_high_water[e] << "/" << graph.edges[e].capacity << "\n";
  }
  return os.str();
}

std::string report_records(const TraceReport& trace, const PipelineGraph& graph) {
  using nlohmann::json;
  std::ostringstream os;
  const auto b = static_cast<std::int64_t>(trace.tasks.size());
  json summary{{"type", "summary"},
               {"function", function_name(graph.function_id)},
               {"tasks", b},
               {"makespan", trace.makespan},
               {"first_latency", trace.first_latency},
               {"steady_ii", trace.steady_ii},
               {"ii_bound", bottleneck_interval(graph)},
               {"throughput_per_kilocycle",
                trace.makespan > 0 ? 1000.0 * b / trace.makespan : 0.0}};
  os << summary.dump() << "\n";
  for (const auto& s : graph.stages) {
    os << json{{"type", "stage"},
               {"id", s.id},
               {"kind", stage_kind_name(s.kind)},
               {"joint", s.joint_id},
               {"branch", s.branch},
               {"ii", s.initiation_interval},
               {"latency", s.latency},
               {"tokens", trace.stage_tokens[s.id]},
               {"busy", trace.stage_busy[s.id]}}
              .dump()
       << "\n";
  }
  for (size_t e = 0; e < graph.edges.size(); ++e) {
    os << json{{"type", "fifo"},
               {"src", graph.edges[e].src},
               {"dst", graph.edges[e].dst},
               {"capacity", graph.edges[e].capacity},
               {"high_water", trace.fifo_high_water[e]}}
              .dump()
       << "\n";
  }
  for (const auto& t : trace.tasks) {
    os << json{{"type", "task"}, {"id", t.id}, {"issue", t.issue}, {"finish", t.finish}}.dump()
       << "\n";
  }
  return os.str();
}

}  // namespace rbdpipe::pipesim
