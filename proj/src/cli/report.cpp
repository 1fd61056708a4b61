#include <glob.h>

#include <algorithm>
#include <map>
#include <set>

#include "monorl/cli/commands.hpp"

namespace monorl {

namespace {

void CollectRuns(const fs::path& dir, std::set<fs::path>& out) {
  if (fs::exists(dir / "manifest.json")) {
    out.insert(dir);
    return;
  }
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(dir, ec); !ec && it != fs::end(it);
       it.increment(ec)) {
    if (it->is_directory() && fs::exists(it->path() / "manifest.json")) {
      out.insert(it->path());
      it.disable_recursion_pending();
    }
  }
}

}  // namespace

std::vector<fs::path> DiscoverRuns(const std::vector<std::string>& patterns) {
  std::set<fs::path> found;
  for (const std::string& pattern : patterns) {
    glob_t g{};
    const int rc = ::glob(pattern.c_str(), GLOB_NOSORT, nullptr, &g);
    if (rc == 0) {
      for (size_t i = 0; i < g.gl_pathc; ++i) {
        const fs::path p = fs::path(g.gl_pathv[i]).lexically_normal();
        if (fs::is_directory(p)) CollectRuns(p, found);
      }
    }
    ::globfree(&g);
  }
  return {found.begin(), found.end()};
}

std::vector<ChartSpec> BuildReportCharts(const std::vector<RunData>& runs,
                                         const std::string& metric, double smoothing_weight,
                                         int grid_points) {
  std::map<std::string, std::map<std::string, std::vector<Series>>> groups;
  std::string missing;
  for (const RunData& run : runs) {
    Series s = SeriesFor(run, metric);
    if (s.empty()) {
      missing += (missing.empty() ? "" : ", ") + run.manifest.run_id;
      continue;
    }
    groups[run.manifest.env_id][run.manifest.algo_id].push_back(EmaSmooth(s, smoothing_weight));
  }
  if (!missing.empty()) {
    throw TrackingError("metric '" + metric + "' absent from runs: " + missing);
  }
  std::vector<ChartSpec> charts;
  for (const auto& [env_id, by_algo] : groups) {
    ChartSpec chart;
    chart.metric = env_id + " " + metric;
    for (const auto& [algo_id, series] : by_algo) {
      chart.curves.push_back({algo_id, AggregateSeries(series, grid_points)});
    }
    charts.push_back(std::move(chart));
  }
  return charts;
}

ReportResult WriteReport(const std::vector<std::string>& patterns, const std::string& metric,
                         double smoothing_weight, int grid_points, const fs::path& out_path) {
  const std::vector<fs::path> dirs = DiscoverRuns(patterns);
  if (dirs.empty()) throw TrackingError("no run directories match the given patterns");
  std::vector<RunData> runs;
  runs.reserve(dirs.size());
  for (const fs::path& dir : dirs) runs.push_back(ParseRun(dir));
  const std::vector<ChartSpec> charts =
      BuildReportCharts(runs, metric, smoothing_weight, grid_points);
  RenderReport(charts, out_path);
  ReportResult result;
  result.runs = static_cast<int>(runs.size());
  result.charts = static_cast<int>(charts.size());
  for (const ChartSpec& c : charts) result.curves += static_cast<int>(c.curves.size());
  return result;
}

}  // namespace monorl
