#include <fstream>
#include <sstream>

#include "sasctl/error.hpp"
#include "sasctl/harness.hpp"

namespace sasctl::harness {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCategory::Io, "cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::Io, "cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCategory::Io, "write failed for '" + p.string() + "'");
}

Artifact write_artifact(const RunResult& run, const std::filesystem::path& out_dir) {
  if (run.trace.samples.empty()) throw Error(ErrorCategory::Metrics, "metrics: empty trace");
  Artifact a;
  a.dir = out_dir / (run.spec.name + "-" + std::string(controller_name(run.spec.controller)) + "-s" +
                     std::to_string(run.spec.rng_seed));
  a.trace_csv = a.dir / "trace.csv";
  a.metrics_json = a.dir / "metrics.json";
  a.hash = run.scenario_hash;
  write_file(a.trace_csv, trace_to_csv(run.trace));
  write_file(a.metrics_json, report_to_json(run));
  write_file(a.dir / "scenario.json", scenario_to_json(run.spec));
  return a;
}

ReportOutput report(const std::vector<std::filesystem::path>& dirs) {
  if (dirs.empty()) throw Error(ErrorCategory::Config, "report: at least one artifact directory required");
  std::vector<std::string> names;
  std::vector<std::vector<std::pair<std::string, metrics::MetricsReport>>> reports;
  std::string plot = "run,t,output,reference,measured\n";
  std::optional<std::uint64_t> proto;
  std::vector<std::string> outputs;
  for (const auto& d : dirs) {
    const auto spec = load_scenario(d / "scenario.json");
    const auto trace = trace_from_csv(read_file(d / "trace.csv"));
    const auto ph = protocol_hash(spec);
    if (proto && *proto != ph)
      throw Error(ErrorCategory::IncompatibleRuns, "report: '" + d.string() + "' uses a different protocol");
    if (!outputs.empty() && outputs != trace.output_names)
      throw Error(ErrorCategory::IncompatibleRuns, "report: '" + d.string() + "' has different outputs");
    proto = ph;
    outputs = trace.output_names;

    RunResult run;
    run.spec = spec;
    run.trace = trace;
    evaluate(run);
    std::vector<std::pair<std::string, metrics::MetricsReport>> rows{{"whole", run.whole}};
    rows.insert(rows.end(), run.phases.begin(), run.phases.end());
    const std::string name = d.filename().empty() ? d.parent_path().filename().string() : d.filename().string();
    names.push_back(name);
    reports.push_back(std::move(rows));

    char buf[96];
    for (const auto& s : trace.samples)
      for (std::size_t o = 0; o < trace.output_names.size(); ++o) {
        std::snprintf(buf, sizeof buf, ",%.3f,%s,%.9g,%.9g\n", s.t, trace.output_names[o].c_str(), s.references[o],
                      s.measured[o]);
        plot += name + buf;
      }
  }
  return {report_table(names, reports), plot};
}

}  // namespace sasctl::harness
