#include <doctest.h>

#include <string>

#include "modelmap/plot_svg.hpp"

using namespace modelmap;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("log-log plot") {
  svg::LogLogSeries s{"map <q>", {{1, 1}, {2, 4}, {4, 16}}, std::nullopt};
  ScalingFit fit;
  fit.c = 2.0;
  fit.n_points = 3;
  s.fit = fit;
  const auto a = svg::loglog_plot({s}, "Displacement & lag");
  const auto b = svg::loglog_plot({s}, "Displacement & lag");
  CHECK(a == b);
  CHECK(a.rfind("<svg", 0) == 0);
  CHECK(a.find("</svg>") != std::string::npos);
  CHECK(a.find("&amp;") != std::string::npos);
  CHECK(a.find("&lt;q&gt;") != std::string::npos);
  CHECK(count(a, "<circle") == 3);
}

TEST_CASE("trajectory and line plots") {
  Matrix coords(3, 2);
  coords << 0, 0, 1, 1, 2, 0;
  const auto t = svg::trajectory_plot(coords, {{{0, 1, 2}, "path", {1.0, 3.0}}}, "traj");
  CHECK(t.find("</svg>") != std::string::npos);
  const auto l = svg::line_plot({1, 2, 3}, {{1, 2, 3}, {3, 2, 1}}, {"up", "down"}, "lines", true);
  CHECK(l.find("up") != std::string::npos);
  CHECK(l.find("</svg>") != std::string::npos);
}
