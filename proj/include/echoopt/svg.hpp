#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "echoopt/common.hpp"

namespace echoopt {

namespace svg {

inline std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace svg

// Minimal SVG document builder; just enough for the sweep panels.
class SvgCanvas {
 public:
  SvgCanvas(double width, double height) : width_(width), height_(height) {}

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double stroke_width = 1.0, const std::string& dash = "") {
    body_ << "<line x1=\"" << svg::num(x1) << "\" y1=\"" << svg::num(y1) << "\" x2=\""
          << svg::num(x2) << "\" y2=\"" << svg::num(y2) << "\" stroke=\"" << stroke
          << "\" stroke-width=\"" << svg::num(stroke_width) << "\"";
    if (!dash.empty()) body_ << " stroke-dasharray=\"" << dash << "\"";
    body_ << "/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                double stroke_width = 1.5) {
    if (pts.empty()) return;
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\""
          << svg::num(stroke_width) << "\" points=\"";
    for (const auto& [x, y] : pts) body_ << svg::num(x) << ',' << svg::num(y) << ' ';
    body_ << "\"/>\n";
  }

  void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill,
               double opacity) {
    if (pts.empty()) return;
    body_ << "<polygon fill=\"" << fill << "\" fill-opacity=\"" << svg::num(opacity)
          << "\" stroke=\"none\" points=\"";
    for (const auto& [x, y] : pts) body_ << svg::num(x) << ',' << svg::num(y) << ' ';
    body_ << "\"/>\n";
  }

  void circle(double cx, double cy, double r, const std::string& fill) {
    body_ << "<circle cx=\"" << svg::num(cx) << "\" cy=\"" << svg::num(cy) << "\" r=\""
          << svg::num(r) << "\" fill=\"" << fill << "\"/>\n";
  }

  // Unconverged-cell marker.
  void cross(double cx, double cy, double r, const std::string& stroke) {
    line(cx - r, cy - r, cx + r, cy + r, stroke, 1.5);
    line(cx - r, cy + r, cx + r, cy - r, stroke, 1.5);
  }

  void text(double x, double y, const std::string& s, double size = 11.0,
            const std::string& fill = "#333333", const std::string& anchor = "start") {
    body_ << "<text x=\"" << svg::num(x) << "\" y=\"" << svg::num(y) << "\" font-size=\""
          << svg::num(size) << "\" font-family=\"sans-serif\" fill=\"" << fill
          << "\" text-anchor=\"" << anchor << "\">" << svg::escape(s) << "</text>\n";
  }

  void write(std::ostream& out) const {
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg::num(width_)
        << "\" height=\"" << svg::num(height_) << "\" viewBox=\"0 0 " << svg::num(width_) << ' '
        << svg::num(height_) << "\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << svg::num(width_) << "\" height=\""
        << svg::num(height_) << "\" fill=\"white\"/>\n"
        << body_.str() << "</svg>\n";
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    write(out);
  }

 private:
  double width_;
  double height_;
  std::ostringstream body_;
};

}  // namespace echoopt
