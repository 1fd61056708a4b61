#ifndef MONORL_TRACKING_CURVES_HPP_
#define MONORL_TRACKING_CURVES_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "monorl/tracking/run.hpp"

namespace monorl {

struct SeriesPoint {
  double step = 0.0;
  double value = 0.0;
};
using Series = std::vector<SeriesPoint>;

// s_0 = x_0; s_t = w s_{t-1} + (1 - w) x_t. Steps are unchanged.
Series EmaSmooth(const Series& series, double weight);

struct AggregateCurve {
  std::vector<double> grid;
  std::vector<double> mean;
  std::vector<double> std;  // population std
  int n_runs = 0;
};

// Series of one run for `key`, in step order. Repeated steps are averaged.
Series SeriesFor(const RunData& run, std::string_view key);

// Piecewise-linear interpolation of a step-sorted series. Held flat outside
// the first and last step.
double Interpolate(const Series& series, double step);

// Interpolates each series onto a uniform grid of `grid_points` samples from
// 0 to min over series of the last step; pointwise mean and population std.
AggregateCurve AggregateSeries(const std::vector<Series>& series, int grid_points);

// aggregate_runs. Throws TrackingError listing the run_ids that lack `key`.
AggregateCurve AggregateRuns(const std::vector<RunData>& runs, std::string_view key,
                             int grid_points);

struct NamedCurve {
  std::string name;  // experiment group, shown in the legend
  AggregateCurve curve;
};

struct ChartSpec {
  std::string metric;  // chart title and y-axis label
  std::vector<NamedCurve> curves;
};

// Chart geometry. The plot area in SVG user units is
// [kPlotLeft, kPlotLeft + kPlotWidth] x [kPlotTop, kPlotTop + kPlotHeight],
// per chart, charts stacked vertically every kChartHeight units.
struct ReportLayout {
  static constexpr double kWidth = 720.0;
  static constexpr double kChartHeight = 360.0;
  static constexpr double kPlotLeft = 80.0;
  static constexpr double kPlotTop = 40.0;
  static constexpr double kPlotWidth = 440.0;
  static constexpr double kPlotHeight = 260.0;
};

// Axis ranges for one chart. A degenerate y range (flat curves) is widened
// to [y - 1, y + 1] so the line sits on the vertical centre.
struct AxisRange {
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
};
AxisRange ChartRange(const ChartSpec& chart);
double MapX(const AxisRange& range, double x);
double MapY(const AxisRange& range, double y);

// render_report: one chart per metric, mean line plus translucent +-1 std
// band per curve, legend and axis labels. Output is a pure function of the
// input. Throws std::invalid_argument on an empty chart list or a chart with
// no curves.
std::string RenderReportSvg(const std::vector<ChartSpec>& charts);
void RenderReport(const std::vector<ChartSpec>& charts, const std::filesystem::path& out_path);

}  // namespace monorl

#endif  // MONORL_TRACKING_CURVES_HPP_
