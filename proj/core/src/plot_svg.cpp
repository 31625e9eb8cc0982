#include "modelmap/plot_svg.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace modelmap::svg {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 60.0;
constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                 "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string num(double x) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x,
                                 std::chars_format::general, 6);
  (void)ec;
  return std::string(buf.data(), ptr);
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const {
    return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin);
  }
  double py(double y) const {
    return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin);
  }
};

Frame make_frame(double x0, double x1, double y0, double y1) {
  if (!(x1 > x0)) { x0 -= 0.5; x1 += 0.5; }
  if (!(y1 > y0)) { y0 -= 0.5; y1 += 0.5; }
  const double px = 0.05 * (x1 - x0);
  const double py = 0.05 * (y1 - y0);
  return {x0 - px, x1 + px, y0 - py, y1 + py};
}

void open_svg(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">"
      << escape(title) << "</text>\n";
}

void axes(std::ostringstream& out, const Frame& f, const std::string& xlabel,
          const std::string& ylabel) {
  out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kWidth - 2 * kMargin
      << "\" height=\"" << kHeight - 2 * kMargin << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = f.x0 + (f.x1 - f.x0) * t / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * t / 4.0;
    out << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << kHeight - kMargin + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << num(xv)
        << "</text>\n";
    out << "<text x=\"" << kMargin - 6 << "\" y=\"" << num(f.py(yv) + 3)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << num(yv)
        << "</text>\n";
  }
  out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 16
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(xlabel)
      << "</text>\n";
  out << "<text x=\"16\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 16 " << kHeight / 2
      << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(ylabel)
      << "</text>\n";
}

void legend(std::ostringstream& out, const std::vector<std::string>& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = kMargin + 14.0 * static_cast<double>(i) + 10;
    out << "<rect x=\"" << kWidth - kMargin - 110 << "\" y=\"" << y - 8
        << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[i % kPalette.size()] << "\"/>\n";
    out << "<text x=\"" << kWidth - kMargin - 96 << "\" y=\"" << y
        << "\" font-family=\"sans-serif\" font-size=\"10\">" << escape(labels[i]) << "</text>\n";
  }
}

}  // namespace

std::string loglog_plot(const std::vector<LogLogSeries>& series, const std::string& title) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      if (p.lag <= 0 || p.sq_distance <= 0) continue;
      x0 = std::min(x0, std::log10(p.lag));
      x1 = std::max(x1, std::log10(p.lag));
      y0 = std::min(y0, std::log10(p.sq_distance));
      y1 = std::max(y1, std::log10(p.sq_distance));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  const Frame f = make_frame(x0, x1, y0, y1);
  std::ostringstream out;
  open_svg(out, title);
  axes(out, f, "log10 lag (steps)", "log10 squared displacement");
  std::vector<std::string> labels;
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % kPalette.size()];
    std::string label = s.label;
    if (s.fit) label += " (c=" + num(s.fit->c) + ")";
    labels.push_back(label);
    for (const auto& p : s.points) {
      if (p.lag <= 0 || p.sq_distance <= 0) continue;
      out << "<circle cx=\"" << num(f.px(std::log10(p.lag))) << "\" cy=\""
          << num(f.py(std::log10(p.sq_distance))) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    if (s.fit && !s.points.empty()) {
      const double lx0 = std::log10(s.points.front().lag);
      const double lx1 = std::log10(s.points.back().lag);
      // log10 y = (c ln x + b) / ln 10
      auto fy = [&](double lx) { return s.fit->c * lx + s.fit->log_intercept / std::log(10.0); };
      out << "<line x1=\"" << num(f.px(lx0)) << "\" y1=\"" << num(f.py(fy(lx0))) << "\" x2=\""
          << num(f.px(lx1)) << "\" y2=\"" << num(f.py(fy(lx1))) << "\" stroke=\"" << color
          << "\" stroke-dasharray=\"4 3\"/>\n";
    }
  }
  legend(out, labels);
  out << "</svg>\n";
  return out.str();
}

std::string trajectory_plot(const Matrix& coords, const std::vector<PathStyle>& paths,
                            const std::string& title) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  const bool two_d = coords.cols() >= 2;
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    const double x = coords(i, 0);
    const double y = two_d ? coords(i, 1) : 0.0;
    x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  const Frame f = make_frame(x0, x1, y0, y1);
  std::ostringstream out;
  open_svg(out, title);
  axes(out, f, "dim 1", "dim 2");
  std::vector<std::string> labels;
  auto pt = [&](std::size_t r) {
    const auto i = static_cast<Eigen::Index>(r);
    return std::pair{f.px(coords(i, 0)), f.py(two_d ? coords(i, 1) : 0.0)};
  };
  for (std::size_t pi = 0; pi < paths.size(); ++pi) {
    const auto& p = paths[pi];
    const char* color = kPalette[pi % kPalette.size()];
    labels.push_back(p.label);
    double wmax = 0.0;
    for (double w : p.segment_weights) wmax = std::max(wmax, w);
    for (std::size_t s = 0; s + 1 < p.rows.size(); ++s) {
      const auto [ax, ay] = pt(p.rows[s]);
      const auto [bx, by] = pt(p.rows[s + 1]);
      double width = 1.0;
      if (wmax > 0.0 && s < p.segment_weights.size()) width = 0.5 + 4.5 * p.segment_weights[s] / wmax;
      out << "<line x1=\"" << num(ax) << "\" y1=\"" << num(ay) << "\" x2=\"" << num(bx)
          << "\" y2=\"" << num(by) << "\" stroke=\"" << color << "\" stroke-width=\"" << num(width)
          << "\" stroke-opacity=\"0.7\"/>\n";
    }
    for (std::size_t s = 0; s < p.rows.size(); ++s) {
      const auto [x, y] = pt(p.rows[s]);
      // Lighter points are earlier in the path.
      const double opacity = p.rows.size() > 1 ? 0.25 + 0.75 * static_cast<double>(s) /
                                                           static_cast<double>(p.rows.size() - 1)
                                               : 1.0;
      out << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"2.5\" fill=\"" << color
          << "\" fill-opacity=\"" << num(opacity) << "\"/>\n";
    }
  }
  legend(out, labels);
  out << "</svg>\n";
  return out.str();
}

std::string line_plot(const std::vector<double>& x, const std::vector<std::vector<double>>& ys,
                      const std::vector<std::string>& labels, const std::string& title,
                      bool log_y) {
  auto ty = [&](double v) { return log_y ? std::log10(std::max(v, 1e-300)) : v; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (double v : x) x0 = std::min(x0, v), x1 = std::max(x1, v);
  for (const auto& y : ys) {
    for (double v : y) {
      if (!std::isfinite(ty(v))) continue;
      y0 = std::min(y0, ty(v)), y1 = std::max(y1, ty(v));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  if (!std::isfinite(y0)) y0 = 0, y1 = 1;
  const Frame f = make_frame(x0, x1, y0, y1);
  std::ostringstream out;
  open_svg(out, title);
  axes(out, f, "step", log_y ? "log10 value" : "value");
  for (std::size_t si = 0; si < ys.size(); ++si) {
    out << "<polyline fill=\"none\" stroke=\"" << kPalette[si % kPalette.size()]
        << "\" points=\"";
    for (std::size_t i = 0; i < x.size() && i < ys[si].size(); ++i) {
      out << num(f.px(x[i])) << ',' << num(f.py(ty(ys[si][i]))) << ' ';
    }
    out << "\"/>\n";
  }
  legend(out, labels);
  out << "</svg>\n";
  return out.str();
}

}  // namespace modelmap::svg
