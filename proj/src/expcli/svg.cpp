#include "expcli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace expcli {

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                         "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  if (!(hi > lo)) hi = lo + 1;
  double span = hi - lo;
  double step = std::pow(10.0, std::floor(std::log10(span / target)));
  for (double mult : {1.0, 2.0, 5.0, 10.0}) {
    if (span / (step * mult) <= target) {
      step *= mult;
      break;
    }
  }
  std::vector<double> ticks;
  double t = std::ceil(lo / step) * step;
  for (; t <= hi + 1e-12 * span; t += step) ticks.push_back(t);
  return ticks;
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
  if (spec.series.empty()) throw std::invalid_argument("render_svg: no series");
  const double W = 720, H = 480, ml = 80, mr = 160, mt = 48, mb = 64;
  const double pw = W - ml - mr, ph = H - mt - mb;

  auto tx = [&](double v) { return spec.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  size_t points = 0;
  for (const auto& s : spec.series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, tx(s.x[i]));
      xmax = std::max(xmax, tx(s.x[i]));
      ymin = std::min(ymin, ty(s.y[i]));
      ymax = std::max(ymax, ty(s.y[i]));
      ++points;
    }
  if (points == 0) throw std::invalid_argument("render_svg: empty series");
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  double ypad = 0.06 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double v) { return ml + (tx(v) - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double v) { return mt + ph - (ty(v) - ymin) / (ymax - ymin) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
      << "' viewBox='0 0 " << W << " " << H << "'>\n";
  svg << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
  svg << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16' "
         "font-family='sans-serif'>"
      << spec.title << "</text>\n";

  // axes
  svg << "<rect x='" << ml << "' y='" << mt << "' width='" << pw << "' height='" << ph
      << "' fill='none' stroke='#333'/>\n";
  for (double t : nice_ticks(xmin, xmax)) {
    double x = ml + (t - xmin) / (xmax - xmin) * pw;
    svg << "<line x1='" << x << "' y1='" << mt + ph << "' x2='" << x << "' y2='" << mt + ph + 5
        << "' stroke='#333'/>\n";
    double shown = spec.log_x ? std::pow(10.0, t) : t;
    svg << "<text x='" << x << "' y='" << mt + ph + 20
        << "' text-anchor='middle' font-size='11' font-family='sans-serif'>" << fmt(shown)
        << "</text>\n";
    svg << "<line x1='" << x << "' y1='" << mt << "' x2='" << x << "' y2='" << mt + ph
        << "' stroke='#eee'/>\n";
  }
  for (double t : nice_ticks(ymin, ymax)) {
    double y = mt + ph - (t - ymin) / (ymax - ymin) * ph;
    svg << "<line x1='" << ml - 5 << "' y1='" << y << "' x2='" << ml << "' y2='" << y
        << "' stroke='#333'/>\n";
    double shown = spec.log_y ? std::pow(10.0, t) : t;
    svg << "<text x='" << ml - 8 << "' y='" << y + 4
        << "' text-anchor='end' font-size='11' font-family='sans-serif'>" << fmt(shown)
        << "</text>\n";
    svg << "<line x1='" << ml << "' y1='" << y << "' x2='" << ml + pw << "' y2='" << y
        << "' stroke='#eee'/>\n";
  }
  svg << "<text x='" << ml + pw / 2 << "' y='" << H - 16
      << "' text-anchor='middle' font-size='13' font-family='sans-serif'>" << spec.x_label
      << "</text>\n";
  svg << "<text x='20' y='" << mt + ph / 2
      << "' text-anchor='middle' font-size='13' font-family='sans-serif' transform='rotate(-90 "
         "20 "
      << mt + ph / 2 << ")'>" << spec.y_label << "</text>\n";

  for (size_t si = 0; si < spec.series.size(); ++si) {
    const auto& s = spec.series[si];
    const char* color = kColors[si % 8];
    std::ostringstream pts;
    for (size_t i = 0; i < s.x.size(); ++i)
      pts << (i ? " " : "") << px(s.x[i]) << "," << py(s.y[i]);
    svg << "<polyline points='" << pts.str() << "' fill='none' stroke='" << color
        << "' stroke-width='2'/>\n";
    for (size_t i = 0; i < s.x.size(); ++i)
      svg << "<circle cx='" << px(s.x[i]) << "' cy='" << py(s.y[i]) << "' r='3' fill='" << color
          << "'/>\n";
    double ly = mt + 16 + 18 * si;
    svg << "<line x1='" << ml + pw + 10 << "' y1='" << ly - 4 << "' x2='" << ml + pw + 34
        << "' y2='" << ly - 4 << "' stroke='" << color << "' stroke-width='2'/>\n";
    svg << "<text x='" << ml + pw + 40 << "' y='" << ly
        << "' font-size='12' font-family='sans-serif'>" << s.label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_svg(const std::string& path, const PlotSpec& spec) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write svg: " + path);
  os << render_svg(spec);
}

}  // namespace expcli
