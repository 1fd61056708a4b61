#include "monorl/tracking/curves.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

namespace monorl {

Series EmaSmooth(const Series& series, double weight) {
  if (!(weight >= 0.0 && weight < 1.0)) {
    throw std::invalid_argument("ema_smooth: weight must be in [0, 1)");
  }
  Series out;
  out.reserve(series.size());
  double s = 0.0;
  for (size_t t = 0; t < series.size(); ++t) {
    s = t == 0 ? series[t].value : weight * s + (1.0 - weight) * series[t].value;
    out.push_back({series[t].step, s});
  }
  return out;
}

Series SeriesFor(const RunData& run, std::string_view key) {
  std::map<int64_t, std::pair<double, int>> by_step;
  for (const auto& e : EventsForKey(run, key)) {
    auto& [sum, count] = by_step[e.step];
    sum += e.value;
    ++count;
  }
  Series out;
  out.reserve(by_step.size());
  for (const auto& [step, acc] : by_step) {
    out.push_back({static_cast<double>(step), acc.first / acc.second});
  }
  return out;
}

double Interpolate(const Series& series, double step) {
  if (series.empty()) throw std::invalid_argument("interpolate: empty series");
  if (step <= series.front().step) return series.front().value;
  if (step >= series.back().step) return series.back().value;
  auto hi = std::lower_bound(series.begin(), series.end(), step,
                             [](const SeriesPoint& p, double s) { return p.step < s; });
  if (hi->step == step) return hi->value;
  auto lo = hi - 1;
  const double frac = (step - lo->step) / (hi->step - lo->step);
  return lo->value + frac * (hi->value - lo->value);
}

AggregateCurve AggregateSeries(const std::vector<Series>& series, int grid_points) {
  if (series.empty()) throw std::invalid_argument("aggregate: no runs");
  if (grid_points < 1) throw std::invalid_argument("aggregate: grid_points must be >= 1");
  double end = std::numeric_limits<double>::infinity();
  for (const auto& s : series) {
    if (s.empty()) throw std::invalid_argument("aggregate: empty series");
    end = std::min(end, s.back().step);
  }
  end = std::max(end, 0.0);
  AggregateCurve out;
  out.n_runs = static_cast<int>(series.size());
  std::vector<double> column(series.size());
  for (int g = 0; g < grid_points; ++g) {
    const double x = grid_points == 1 ? 0.0 : end * g / (grid_points - 1);
    for (size_t r = 0; r < series.size(); ++r) column[r] = Interpolate(series[r], x);
    // Sorted summation makes the result independent of run order.
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double v : column) sum += v;
    const double mean = sum / column.size();
    double sq = 0.0;
    for (double v : column) sq += (v - mean) * (v - mean);
    out.grid.push_back(x);
    out.mean.push_back(mean);
    out.std.push_back(std::sqrt(sq / column.size()));
  }
  return out;
}

AggregateCurve AggregateRuns(const std::vector<RunData>& runs, std::string_view key,
                             int grid_points) {
  std::vector<Series> series;
  std::string missing;
  for (const auto& run : runs) {
    series.push_back(SeriesFor(run, key));
    if (series.back().empty()) missing += (missing.empty() ? "" : ", ") + run.manifest.run_id;
  }
  if (!missing.empty()) {
    throw TrackingError("metric '" + std::string(key) + "' absent from runs: " + missing);
  }
  return AggregateSeries(series, grid_points);
}

namespace {

using L = ReportLayout;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  std::string s = buf;
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string Tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string Escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void RenderChart(std::string& svg, const ChartSpec& chart, int index) {
  const AxisRange range = ChartRange(chart);
  const double top = index * L::kChartHeight;
  svg += "<g class=\"chart\" transform=\"translate(0," + Num(top) + ")\" data-metric=\"" +
         Escape(chart.metric) + "\" data-x-min=\"" + Tick(range.x_min) + "\" data-x-max=\"" +
         Tick(range.x_max) + "\" data-y-min=\"" + Tick(range.y_min) + "\" data-y-max=\"" +
         Tick(range.y_max) + "\">\n";
  svg += "<text x=\"" + Num(L::kPlotLeft + L::kPlotWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" "
         "font-size=\"15\">" + Escape(chart.metric) + "</text>\n";
  svg += "<rect class=\"plot-area\" x=\"" + Num(L::kPlotLeft) + "\" y=\"" + Num(L::kPlotTop) +
         "\" width=\"" + Num(L::kPlotWidth) + "\" height=\"" + Num(L::kPlotHeight) +
         "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = range.x_min + (range.x_max - range.x_min) * k / 4.0;
    const double yv = range.y_min + (range.y_max - range.y_min) * k / 4.0;
    const double px = MapX(range, xv), py = MapY(range, yv);
    const double bottom = L::kPlotTop + L::kPlotHeight;
    svg += "<line x1=\"" + Num(px) + "\" y1=\"" + Num(bottom) + "\" x2=\"" + Num(px) + "\" y2=\"" +
           Num(bottom + 5) + "\" stroke=\"#333\"/>\n";
    svg += "<text x=\"" + Num(px) + "\" y=\"" + Num(bottom + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + Tick(xv) + "</text>\n";
    svg += "<line x1=\"" + Num(L::kPlotLeft - 5) + "\" y1=\"" + Num(py) + "\" x2=\"" +
           Num(L::kPlotLeft) + "\" y2=\"" + Num(py) + "\" stroke=\"#333\"/>\n";
    svg += "<text x=\"" + Num(L::kPlotLeft - 8) + "\" y=\"" + Num(py + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + Tick(yv) + "</text>\n";
  }
  svg += "<text class=\"x-label\" x=\"" + Num(L::kPlotLeft + L::kPlotWidth / 2) + "\" y=\"" +
         Num(L::kPlotTop + L::kPlotHeight + 40) +
         "\" text-anchor=\"middle\" font-size=\"12\">env steps</text>\n";
  const double ylx = 20.0, yly = L::kPlotTop + L::kPlotHeight / 2;
  svg += "<text class=\"y-label\" x=\"" + Num(ylx) + "\" y=\"" + Num(yly) +
         "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 " + Num(ylx) + " " +
         Num(yly) + ")\">" + Escape(chart.metric) + "</text>\n";

  for (size_t c = 0; c < chart.curves.size(); ++c) {
    const auto& [name, curve] = chart.curves[c];
    const std::string color = kPalette[c % std::size(kPalette)];
    std::string band, upper, lower, line;
    for (size_t i = 0; i < curve.grid.size(); ++i) {
      const std::string px = Num(MapX(range, curve.grid[i]));
      upper += (i ? " " : "") + px + "," + Num(MapY(range, curve.mean[i] + curve.std[i]));
      line += (i ? " " : "") + px + "," + Num(MapY(range, curve.mean[i]));
    }
    for (size_t i = curve.grid.size(); i-- > 0;) {
      lower += " " + Num(MapX(range, curve.grid[i])) + "," +
               Num(MapY(range, curve.mean[i] - curve.std[i]));
    }
    svg += "<polygon class=\"band\" data-series=\"" + Escape(name) + "\" points=\"" + upper + lower +
           "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    svg += "<polyline class=\"mean\" data-series=\"" + Escape(name) + "\" points=\"" + line +
           "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    const double ly = L::kPlotTop + 10 + 18.0 * c;
    const double lx = L::kPlotLeft + L::kPlotWidth + 16;
    svg += "<line class=\"legend\" x1=\"" + Num(lx) + "\" y1=\"" + Num(ly) + "\" x2=\"" +
           Num(lx + 20) + "\" y2=\"" + Num(ly) + "\" stroke=\"" + color +
           "\" stroke-width=\"3\"/>\n";
    svg += "<text x=\"" + Num(lx + 26) + "\" y=\"" + Num(ly + 4) + "\" font-size=\"11\">" +
           Escape(name) + " (n=" + std::to_string(curve.n_runs) + ")</text>\n";
  }
  svg += "</g>\n";
}

}  // namespace

AxisRange ChartRange(const ChartSpec& chart) {
  AxisRange r;
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& [name, curve] : chart.curves) {
    for (size_t i = 0; i < curve.grid.size(); ++i) {
      x_lo = std::min(x_lo, curve.grid[i]);
      x_hi = std::max(x_hi, curve.grid[i]);
      y_lo = std::min(y_lo, curve.mean[i] - curve.std[i]);
      y_hi = std::max(y_hi, curve.mean[i] + curve.std[i]);
    }
  }
  if (!std::isfinite(x_lo)) return r;
  r.x_min = x_lo;
  r.x_max = x_hi > x_lo ? x_hi : x_lo + 1.0;
  if (y_hi > y_lo) {
    r.y_min = y_lo;
    r.y_max = y_hi;
  } else {
    r.y_min = y_lo - 1.0;
    r.y_max = y_lo + 1.0;
  }
  return r;
}

double MapX(const AxisRange& range, double x) {
  return L::kPlotLeft + (x - range.x_min) / (range.x_max - range.x_min) * L::kPlotWidth;
}

double MapY(const AxisRange& range, double y) {
  return L::kPlotTop + (range.y_max - y) / (range.y_max - range.y_min) * L::kPlotHeight;
}

std::string RenderReportSvg(const std::vector<ChartSpec>& charts) {
  if (charts.empty()) throw std::invalid_argument("render_report: no curves to render");
  for (const auto& chart : charts) {
    if (chart.curves.empty()) {
      throw std::invalid_argument("render_report: chart '" + chart.metric + "' has no curves");
    }
    for (const auto& [name, curve] : chart.curves) {
      if (curve.grid.empty() || curve.mean.size() != curve.grid.size() ||
          curve.std.size() != curve.grid.size()) {
        throw std::invalid_argument("render_report: malformed curve '" + name + "'");
      }
    }
  }
  const double height = L::kChartHeight * charts.size();
  std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + Num(L::kWidth) + "\" height=\"" +
         Num(height) + "\" viewBox=\"0 0 " + Num(L::kWidth) + " " + Num(height) +
         "\" font-family=\"sans-serif\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (size_t i = 0; i < charts.size(); ++i) RenderChart(svg, charts[i], static_cast<int>(i));
  svg += "</svg>\n";
  return svg;
}

void RenderReport(const std::vector<ChartSpec>& charts, const std::filesystem::path& out_path) {
  const std::string svg = RenderReportSvg(charts);
  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  out << svg;
  if (!out) throw std::runtime_error("failed writing " + out_path.string());
}

}  // namespace monorl
