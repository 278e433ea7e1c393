// Plot-ready CSV and minimal static SVG charts for the experiment outputs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bidro/errors.hpp"
#include "bidro/experiments.hpp"
#include "bidro/instance_io.hpp"

namespace bidro {
namespace {

struct Series {
  std::string name;
  std::vector<double> x, y;
};

struct Box {
  std::string group;   // x label
  std::string series;  // colour
  double lo, q1, median, q3, hi;
};

const char* kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                          "#66a61e", "#e6ab02", "#a6761d", "#666666"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

class Frame {
 public:
  Frame(double x0, double x1, double y0, double y1, bool logx = false, bool logy = false)
      : logx_(logx), logy_(logy) {
    x0_ = tx(x0), x1_ = tx(x1), y0_ = ty(y0), y1_ = ty(y1);
    if (x1_ - x0_ < 1e-12) x1_ = x0_ + 1;
    if (y1_ - y0_ < 1e-12) y1_ = y0_ + 1;
    const double pad = 0.05 * (y1_ - y0_);
    y0_ -= pad;
    y1_ += pad;
  }
  double px(double x) const { return kLeft + (tx(x) - x0_) / (x1_ - x0_) * kPlotW; }
  double py(double y) const { return kTop + kPlotH - (ty(y) - y0_) / (y1_ - y0_) * kPlotH; }

  void axes(std::ostream& o, const std::string& title, const std::string& xl, const std::string& yl) const {
    o << "<text x='" << kWidth / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title << "</text>\n";
    o << "<rect x='" << kLeft << "' y='" << kTop << "' width='" << kPlotW << "' height='" << kPlotH
      << "' fill='none' stroke='#333'/>\n";
    o << "<text x='" << kLeft + kPlotW / 2 << "' y='" << kHeight - 10
      << "' text-anchor='middle' font-size='12'>" << xl << "</text>\n";
    o << "<text x='16' y='" << kTop + kPlotH / 2 << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 "
      << kTop + kPlotH / 2 << ")'>" << yl << "</text>\n";
    for (int k = 0; k <= 4; ++k) {
      const double v = y0_ + (y1_ - y0_) * k / 4.0;
      const double y = kTop + kPlotH - kPlotH * k / 4.0;
      o << "<text x='" << kLeft - 6 << "' y='" << y + 4 << "' text-anchor='end' font-size='10'>"
        << num(logy_ ? std::exp(v) : v) << "</text>\n";
    }
  }

  static constexpr double kWidth = 640, kHeight = 400, kLeft = 80, kTop = 40, kPlotW = 440, kPlotH = 300;

 private:
  double tx(double x) const { return logx_ ? std::log(x) : x; }
  double ty(double y) const { return logy_ ? std::log(std::max(y, 1e-9)) : y; }
  bool logx_, logy_;
  double x0_, x1_, y0_, y1_;
};

void svg_open(std::ostream& o) {
  o << "<svg xmlns='http://www.w3.org/2000/svg' width='" << Frame::kWidth << "' height='"
    << Frame::kHeight << "' font-family='sans-serif'>\n<rect width='100%' height='100%' fill='white'/>\n";
}

void legend(std::ostream& o, const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = Frame::kTop + 14 + 18 * static_cast<double>(i);
    const double x = Frame::kLeft + Frame::kPlotW + 12;
    o << "<rect x='" << x << "' y='" << y - 9 << "' width='10' height='10' fill='" << kPalette[i % 8]
      << "'/><text x='" << x + 14 << "' y='" << y << "' font-size='11'>" << names[i] << "</text>\n";
  }
}

std::string line_chart(const std::string& title, const std::string& xl, const std::string& yl,
                       const std::vector<Series>& series, bool log = false) {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const Series& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  std::ostringstream o;
  svg_open(o);
  if (x0 > x1) {
    o << "</svg>\n";
    return o.str();
  }
  const Frame f(x0, x1, y0, y1, log, log);
  f.axes(o, title, xl, yl);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    names.push_back(s.name);
    o << "<polyline fill='none' stroke-width='2' stroke='" << kPalette[i % 8] << "' points='";
    for (std::size_t k = 0; k < s.x.size(); ++k) o << num(f.px(s.x[k])) << ',' << num(f.py(s.y[k])) << ' ';
    o << "'/>\n";
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      o << "<circle r='3' fill='" << kPalette[i % 8] << "' cx='" << num(f.px(s.x[k])) << "' cy='"
        << num(f.py(s.y[k])) << "'/>\n";
    }
  }
  std::set<double> ticks;
  for (const Series& s : series) ticks.insert(s.x.begin(), s.x.end());
  for (double t : ticks) {
    o << "<text x='" << num(f.px(t)) << "' y='" << Frame::kTop + Frame::kPlotH + 14
      << "' text-anchor='middle' font-size='10'>" << num(t) << "</text>\n";
  }
  legend(o, names);
  o << "</svg>\n";
  return o.str();
}

std::string box_chart(const std::string& title, const std::string& xl, const std::string& yl,
                      const std::vector<Box>& boxes) {
  std::vector<std::string> groups, series;
  double y0 = 1e300, y1 = -1e300;
  for (const Box& b : boxes) {
    if (std::find(groups.begin(), groups.end(), b.group) == groups.end()) groups.push_back(b.group);
    if (std::find(series.begin(), series.end(), b.series) == series.end()) series.push_back(b.series);
    y0 = std::min(y0, b.lo);
    y1 = std::max(y1, b.hi);
  }
  std::ostringstream o;
  svg_open(o);
  if (boxes.empty()) {
    o << "</svg>\n";
    return o.str();
  }
  const Frame f(0, 1, y0, y1);
  f.axes(o, title, xl, yl);
  const double slot = Frame::kPlotW / static_cast<double>(groups.size());
  const double width = slot * 0.8 / static_cast<double>(series.size());
  for (const Box& b : boxes) {
    const auto g = std::find(groups.begin(), groups.end(), b.group) - groups.begin();
    const auto s = std::find(series.begin(), series.end(), b.series) - series.begin();
    const double x = Frame::kLeft + slot * g + slot * 0.1 + width * s;
    const double cx = x + width / 2;
    const char* colour = kPalette[s % 8];
    o << "<line x1='" << num(cx) << "' x2='" << num(cx) << "' y1='" << num(f.py(b.lo)) << "' y2='"
      << num(f.py(b.hi)) << "' stroke='" << colour << "'/>\n";
    o << "<rect x='" << num(x + 1) << "' width='" << num(width - 2) << "' y='" << num(f.py(b.q3))
      << "' height='" << num(std::max(1.0, f.py(b.q1) - f.py(b.q3))) << "' fill='" << colour
      << "' fill-opacity='0.4' stroke='" << colour << "'/>\n";
    o << "<line x1='" << num(x + 1) << "' x2='" << num(x + width - 1) << "' y1='" << num(f.py(b.median))
      << "' y2='" << num(f.py(b.median)) << "' stroke='black'/>\n";
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    o << "<text x='" << num(Frame::kLeft + slot * (g + 0.5)) << "' y='" << Frame::kTop + Frame::kPlotH + 14
      << "' text-anchor='middle' font-size='10'>" << groups[g] << "</text>\n";
  }
  legend(o, series);
  o << "</svg>\n";
  return o.str();
}

std::string series_name(const ExperimentResultRow& r) {
  return r.method == "DRO" ? "DRO(eps=" + num(r.eps) + ")" : r.method;
}

bool usable(const ExperimentResultRow& r) { return r.status.rfind("error", 0) != 0 && r.method != "ALL"; }

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double e : v) s += e;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

}  // namespace

void write_plots(const std::string& dir, const std::vector<ExperimentResultRow>& rows) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);

  // Costs and service level against eps, seed-averaged at zero bias when
  // present. Baselines do not depend on eps and are drawn flat.
  bool has_zero_bias = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.bias == 0.0; });
  std::vector<double> eps_grid;
  for (const auto& r : rows) {
    if (r.method == "DRO" && std::find(eps_grid.begin(), eps_grid.end(), r.eps) == eps_grid.end()) {
      eps_grid.push_back(r.eps);
    }
  }
  std::sort(eps_grid.begin(), eps_grid.end());
  std::map<std::string, std::map<double, std::vector<double>>> cost, service;
  std::vector<std::string> methods;
  for (const auto& r : rows) {
    if (!usable(r) || (has_zero_bias && r.bias != 0.0)) continue;
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    cost[r.method][r.eps].push_back(r.out_sample_mean_cost);
    service[r.method][r.eps].push_back(r.service_level_pct);
  }
  std::ostringstream csv;
  csv << "method,eps,out_sample_mean_cost,service_level_pct\n";
  std::vector<Series> cost_series, service_series;
  for (const std::string& m : methods) {
    Series c{m, {}, {}}, s{m, {}, {}};
    for (const auto& [eps, values] : cost[m]) {
      const double mc = mean_of(values);
      const double ms = mean_of(service[m][eps]);
      csv << m << ',' << num(eps) << ',' << num(mc) << ',' << num(ms) << '\n';
      if (m == "DRO") {
        c.x.push_back(eps), c.y.push_back(mc), s.x.push_back(eps), s.y.push_back(ms);
      } else {
        for (double e : eps_grid) c.x.push_back(e), c.y.push_back(mc), s.x.push_back(e), s.y.push_back(ms);
      }
    }
    cost_series.push_back(c);
    service_series.push_back(s);
  }
  write_text_file((base / "plot_costs_vs_eps.csv").string(), csv.str());
  write_text_file((base / "costs_vs_eps.svg").string(),
                  line_chart("Out-of-sample mean cost vs eps", "eps", "cost", cost_series));
  write_text_file((base / "service_vs_eps.svg").string(),
                  line_chart("Service level vs eps", "eps", "service level (%)", service_series));

  // Spread of total cost across seeds, per forecast bias.
  std::map<double, std::map<std::string, std::vector<double>>> by_bias;
  std::vector<std::string> names;
  for (const auto& r : rows) {
    if (!usable(r)) continue;
    const std::string n = series_name(r);
    if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
    by_bias[r.bias][n].push_back(r.out_sample_mean_cost);
  }
  std::ostringstream bcsv;
  bcsv << "bias,method,min,q1,median,q3,max\n";
  std::vector<Box> boxes;
  for (const auto& [bias, groups] : by_bias) {
    for (const std::string& n : names) {
      const auto it = groups.find(n);
      if (it == groups.end()) continue;
      const auto& v = it->second;
      Box b{num(bias), n, quantile(v, 0.0), quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75),
            quantile(v, 1.0)};
      bcsv << num(bias) << ',' << n << ',' << num(b.lo) << ',' << num(b.q1) << ',' << num(b.median)
           << ',' << num(b.q3) << ',' << num(b.hi) << '\n';
      boxes.push_back(b);
    }
  }
  write_text_file((base / "plot_cost_box_vs_bias.csv").string(), bcsv.str());
  write_text_file((base / "cost_box_vs_bias.svg").string(),
                  box_chart("Total cost across seeds vs forecast bias", "forecast bias", "cost", boxes));
}

void write_scaling_plot(const std::string& dir, const std::vector<ScalingRow>& rows) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  std::ostringstream csv;
  csv << "method,size,median_ms,loglog_slope\n";
  std::vector<Series> series;
  for (const ScalingSummary& s : summarize_scaling(rows)) {
    Series line{s.method, {}, {}};
    for (std::size_t k = 0; k < s.sizes.size(); ++k) {
      csv << s.method << ',' << s.sizes[k] << ',' << num(s.median_ms[k]) << ',' << num(s.loglog_slope) << '\n';
      line.x.push_back(s.sizes[k]);
      line.y.push_back(std::max(s.median_ms[k], 1e-3));
    }
    series.push_back(line);
  }
  write_text_file((base / "plot_time_vs_size.csv").string(), csv.str());
  write_text_file((base / "time_vs_size.svg").string(),
                  line_chart("Solve time vs problem size (log-log)", "nodes", "median ms", series, true));
}

}  // namespace bidro
