#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdlab/vec2.hpp"

namespace sdlab {

// Small dependency-free SVG scatter/line plotter. Data coordinates are mapped
// into a fixed frame; values outside the range are clipped to the frame edge.
class SvgPlot {
 public:
  SvgPlot(double x_min, double x_max, double y_min, double y_max, int width = 640,
          int height = 480)
      : x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max), width_(width),
        height_(height) {
    if (!(x_min < x_max && y_min < y_max))
      throw std::invalid_argument("SvgPlot: empty data range");
  }

  void polyline(std::span<const Vec2> pts, const std::string& color, double stroke_width = 1.0,
                double opacity = 1.0) {
    if (pts.size() < 2) return;
    std::ostringstream s;
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << stroke_width
      << "\" opacity=\"" << opacity << "\" points=\"";
    for (const Vec2& p : pts) s << px(p.x) << ',' << py(p.y) << ' ';
    s << "\"/>";
    body_.push_back(s.str());
  }

  void circles(std::span<const Vec2> pts, double radius, const std::string& color,
               double opacity = 1.0) {
    for (const Vec2& p : pts) circle(p, radius, color, opacity);
  }

  void circle(const Vec2& p, double radius, const std::string& color, double opacity = 1.0) {
    std::ostringstream s;
    s << "<circle cx=\"" << px(p.x) << "\" cy=\"" << py(p.y) << "\" r=\"" << radius
      << "\" fill=\"" << color << "\" opacity=\"" << opacity << "\"/>";
    body_.push_back(s.str());
  }

  void text(const Vec2& p, const std::string& label, const std::string& color = "#333333",
            int font_size = 12) {
    std::ostringstream s;
    s << "<text x=\"" << px(p.x) << "\" y=\"" << py(p.y) << "\" fill=\"" << color
      << "\" font-size=\"" << font_size << "\" font-family=\"sans-serif\">" << label
      << "</text>";
    body_.push_back(s.str());
  }

  void legend(std::span<const std::pair<std::string, std::string>> entries) {
    double y = kMargin + 14.0;
    for (const auto& [label, color] : entries) {
      std::ostringstream s;
      s << "<rect x=\"" << width_ - kMargin - 110 << "\" y=\"" << y - 9 << "\" width=\"10\""
        << " height=\"10\" fill=\"" << color << "\"/>"
        << "<text x=\"" << width_ - kMargin - 95 << "\" y=\"" << y
        << "\" font-size=\"12\" font-family=\"sans-serif\" fill=\"#333333\">" << label
        << "</text>";
      body_.push_back(s.str());
      y += 16.0;
    }
  }

  void write(const std::string& path, const std::string& title = "") const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\""
        << height_ << "\" viewBox=\"0 0 " << width_ << ' ' << height_ << "\">\n";
    out << "<rect width=\"" << width_ << "\" height=\"" << height_ << "\" fill=\"white\"/>\n";
    // frame + ticks
    out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << width_ - 2 * kMargin
        << "\" height=\"" << height_ - 2 * kMargin
        << "\" fill=\"none\" stroke=\"#888888\" stroke-width=\"1\"/>\n";
    for (int i = 0; i <= kTicks; ++i) {
      const double fx = x_min_ + (x_max_ - x_min_) * i / kTicks;
      const double fy = y_min_ + (y_max_ - y_min_) * i / kTicks;
      out << "<text x=\"" << px(fx) << "\" y=\"" << height_ - kMargin + 16
          << "\" font-size=\"10\" text-anchor=\"middle\" font-family=\"sans-serif\""
          << " fill=\"#555555\">" << tick_label(fx) << "</text>\n";
      out << "<text x=\"" << kMargin - 6 << "\" y=\"" << py(fy) + 3
          << "\" font-size=\"10\" text-anchor=\"end\" font-family=\"sans-serif\""
          << " fill=\"#555555\">" << tick_label(fy) << "</text>\n";
    }
    if (!title.empty())
      out << "<text x=\"" << width_ / 2 << "\" y=\"" << kMargin - 8
          << "\" font-size=\"14\" text-anchor=\"middle\" font-family=\"sans-serif\""
          << " fill=\"#222222\">" << title << "</text>\n";
    for (const std::string& el : body_) out << el << '\n';
    out << "</svg>\n";
    if (!out) throw std::runtime_error("failed writing " + path);
  }

 private:
  static constexpr double kMargin = 42.0;
  static constexpr int kTicks = 4;

  double clamp01(double f) const { return std::min(1.0, std::max(0.0, f)); }

  double px(double x) const {
    const double f = clamp01((x - x_min_) / (x_max_ - x_min_));
    return std::round((kMargin + f * (width_ - 2 * kMargin)) * 100.0) / 100.0;
  }

  double py(double y) const {
    const double f = clamp01((y - y_min_) / (y_max_ - y_min_));
    return std::round((height_ - kMargin - f * (height_ - 2 * kMargin)) * 100.0) / 100.0;
  }

  static std::string tick_label(double v) {
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
  }

  double x_min_, x_max_, y_min_, y_max_;
  int width_, height_;
  std::vector<std::string> body_;
};

}  // namespace sdlab
