#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "ddc/harness.hpp"

namespace ddc {
namespace {

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double nice_step(double range) {
  if (!(range > 0.0)) return 1.0;
  const double raw = range / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  double step = 10.0;
  if (norm < 1.5) {
    step = 1.0;
  } else if (norm < 3.5) {
    step = 2.0;
  } else if (norm < 7.5) {
    step = 5.0;
  }
  return step * mag;
}

struct Panel {
  double x0, y0, w, h;      // plot area in pixels
  double tmin, tmax;        // data ranges
  double ymin, ymax;

  double px(double t) const { return x0 + (t - tmin) / (tmax - tmin) * w; }
  double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

void draw_frame(std::ostringstream& svg, const Panel& p, const std::string& y_label) {
  svg << "<rect x=\"" << num(p.x0) << "\" y=\"" << num(p.y0) << "\" width=\"" << num(p.w)
      << "\" height=\"" << num(p.h)
      << "\" fill=\"none\" stroke=\"#888888\" stroke-width=\"1\"/>\n";
  const double ty = nice_step(p.ymax - p.ymin);
  for (double v = std::ceil(p.ymin / ty) * ty; v <= p.ymax + 1e-9; v += ty) {
    const double y = p.py(v);
    svg << "<line x1=\"" << num(p.x0) << "\" y1=\"" << num(y) << "\" x2=\"" << num(p.x0 + p.w)
        << "\" y2=\"" << num(y)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << num(p.x0 - 8) << "\" y=\"" << num(y + 4)
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">" << label(v)
        << "</text>\n";
  }
  const double tx = nice_step(p.tmax - p.tmin);
  for (double v = std::ceil(p.tmin / tx) * tx; v <= p.tmax + 1e-9; v += tx) {
    const double x = p.px(v);
    svg << "<line x1=\"" << num(x) << "\" y1=\"" << num(p.y0 + p.h) << "\" x2=\"" << num(x)
        << "\" y2=\"" << num(p.y0 + p.h + 5)
        << "\" stroke=\"#888888\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << num(x) << "\" y=\"" << num(p.y0 + p.h + 18)
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << label(v)
        << "</text>\n";
  }
  svg << "<text x=\"" << num(p.x0 - 48) << "\" y=\"" << num(p.y0 + p.h / 2)
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 "
      << num(p.x0 - 48) << " " << num(p.y0 + p.h / 2) << ")\">" << y_label << "</text>\n";
}

void draw_series(std::ostringstream& svg, const Panel& p, const std::vector<RunRow>& rows,
                 double RunRow::*field, const char* color, const char* dash) {
  svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
  if (dash) svg << " stroke-dasharray=\"" << dash << "\"";
  svg << " points=\"";
  for (const RunRow& r : rows) {
    svg << num(p.px(r.time_s)) << "," << num(p.py(std::clamp(r.*field, p.ymin, p.ymax))) << " ";
  }
  svg << "\"/>\n";
}

void legend_entry(std::ostringstream& svg, double x, double y, const char* color,
                  const char* dash, const std::string& text) {
  svg << "<line x1=\"" << num(x) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x + 22)
      << "\" y2=\"" << num(y) << "\" stroke=\"" << color << "\" stroke-width=\"2\"";
  if (dash) svg << " stroke-dasharray=\"" << dash << "\"";
  svg << "/>\n";
  svg << "<text x=\"" << num(x + 28) << "\" y=\"" << num(y + 4)
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << text << "</text>\n";
}

}  // namespace

std::string render_run_svg(const std::vector<RunRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("render_run_svg: no rows to plot");

  const double width = 880.0;
  const double height = 600.0;
  const double target = rows.back().v_target_kmh;

  double tmin = rows.front().time_s;
  double tmax = rows.front().time_s;
  double vmax = 0.0;
  double umax = 0.0;
  for (const RunRow& r : rows) {
    tmin = std::min(tmin, r.time_s);
    tmax = std::max(tmax, r.time_s);
    vmax = std::max({vmax, r.v_kmh, r.v_target_kmh});
    umax = std::max({umax, r.u_cmd_deg, r.theta_deg});
  }
  if (tmax <= tmin) tmax = tmin + 1.0;
  vmax = vmax > 0.0 ? vmax * 1.15 : 1.0;
  umax = umax > 0.0 ? umax * 1.1 : 1.0;

  Panel top{70.0, 40.0, width - 70.0 - 190.0, 230.0, tmin, tmax, 0.0, vmax};
  Panel bottom{70.0, 330.0, width - 70.0 - 190.0, 230.0, tmin, tmax, 0.0, umax};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << label(width) << "\" height=\""
      << label(height) << "\" viewBox=\"0 0 " << label(width) << " " << label(height) << "\">\n";
  svg << "<rect width=\"" << label(width) << "\" height=\"" << label(height)
      << "\" fill=\"#ffffff\"/>\n";

  // Velocity panel: tolerance band, target, measured velocity.
  if (target > 0.0) {
    const double band = primary_band_percent(target) / 100.0 * target;
    const double y_hi = top.py(std::min(target + band, top.ymax));
    const double y_lo = top.py(std::max(target - band, top.ymin));
    svg << "<rect x=\"" << num(top.x0) << "\" y=\"" << num(y_hi) << "\" width=\"" << num(top.w)
        << "\" height=\"" << num(y_lo - y_hi) << "\" fill=\"#e3efd9\"/>\n";
  }
  draw_frame(svg, top, "velocity [km/h]");
  draw_series(svg, top, rows, &RunRow::v_target_kmh, "#777777", "6,4");
  draw_series(svg, top, rows, &RunRow::v_kmh, "#1f77b4", nullptr);

  // Pedal panel: command and actual angle.
  draw_frame(svg, bottom, "pedal [deg]");
  draw_series(svg, bottom, rows, &RunRow::u_cmd_deg, "#d62728", nullptr);
  draw_series(svg, bottom, rows, &RunRow::theta_deg, "#ff9d3c", nullptr);

  svg << "<text x=\"" << num(top.x0 + top.w / 2) << "\" y=\"" << num(top.y0 + top.h + 34)
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">time [s]</text>\n";
  svg << "<text x=\"" << num(bottom.x0 + bottom.w / 2) << "\" y=\""
      << num(bottom.y0 + bottom.h + 34)
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">time [s]</text>\n";

  const double lx = top.x0 + top.w + 20.0;
  legend_entry(svg, lx, top.y0 + 12.0, "#1f77b4", nullptr, "velocity");
  legend_entry(svg, lx, top.y0 + 32.0, "#777777", "6,4", "target");
  if (target > 0.0) {
    svg << "<rect x=\"" << num(lx) << "\" y=\"" << num(top.y0 + 46.0)
        << "\" width=\"22\" height=\"10\" fill=\"#e3efd9\"/>\n";
    svg << "<text x=\"" << num(lx + 28.0) << "\" y=\"" << num(top.y0 + 55.0)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << label(primary_band_percent(target))
        << "% band</text>\n";
  }
  legend_entry(svg, lx, bottom.y0 + 12.0, "#d62728", nullptr, "command");
  legend_entry(svg, lx, bottom.y0 + 32.0, "#ff9d3c", nullptr, "pedal angle");

  svg << "</svg>\n";
  return svg.str();
}

void emit_plot(const std::string& log_path, const std::string& out_path) {
  const std::vector<RunRow> rows = load_run_log_csv(log_path);
  if (rows.empty()) throw std::runtime_error(log_path + ": run log has no rows to plot");
  const std::string svg = render_run_svg(rows);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot open for writing: " + out_path);
  out << svg;
  if (!out) throw std::runtime_error("write failed: " + out_path);
}

}  // namespace ddc
