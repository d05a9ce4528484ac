#include "barflex/fixtures.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace barflex::fixtures {

namespace {

Framework heptagon(const std::vector<std::pair<double, double>>& coords,
                   std::pair<int, int> chord1, std::pair<int, int> chord2) {
  Framework fw;
  fw.topology.n_vertices = 7;
  fw.topology.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 0},
                       {1, 5}, chord1, chord2};
  fw.topology.free_edge = 7;

  fw.config.dim = 2;
  fw.config.coords.resize(14);
  for (int i = 0; i < 7; ++i) {
    fw.config.coords[2 * i] = coords[static_cast<std::size_t>(i)].first;
    fw.config.coords[2 * i + 1] = coords[static_cast<std::size_t>(i)].second;
  }

  fw.pins.pins = {{0, 0, 0.0}, {0, 1, 0.0}, {6, 1, 0.0}};
  set_rest_lengths_from_config(fw);
  fw.validate();
  return fw;
}

}  // namespace

Framework four_bar(double theta1, double theta2) {
  Framework fw;
  fw.topology.n_vertices = 4;
  fw.topology.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 0}};
  fw.topology.free_edge = 2;

  fw.config.dim = 2;
  fw.config.coords.resize(8);
  fw.config.coords << 0.0, 0.0, 1.0, 0.0, 1.0 + 2.0 * std::cos(theta2),
      2.0 * std::sin(theta2), 2.0 * std::cos(theta1), 2.0 * std::sin(theta1);

  fw.rest_lengths.resize(4);
  fw.rest_lengths << 1.0, 2.0, fw.measured_length(2), 2.0;
  fw.pins.pins = {{0, 0, 0.0}, {0, 1, 0.0}, {1, 1, 0.0}};
  fw.validate();
  return fw;
}

Framework heptagon_1() {
  return heptagon({{0.0, 0.0},
                   {-1.2, 1.34},
                   {-1.11, 2.63},
                   {0.39, 5.23},
                   {2.56, 3.98},
                   {3.62, 2.92},
                   {1.0, 0.0}},
                  {0, 2}, {3, 6});
}

Framework heptagon_2() {
  return heptagon({{0.0, 0.0},
                   {-0.0291611389336360, 1.79976377004764},
                   {-0.674484071819545, 2.92828417849913},
                   {1.15521103685379, 2.12068538621620},
                   {2.75549472728296, 0.921063733299569},
                   {3.70391276750481, 1.23808616307659},
                   {1.0, 0.0}},
                  {0, 4}, {2, 6});
}

Framework by_name(const std::string& name) {
  if (name == "four-bar") return four_bar();
  if (name == "heptagon-1") return heptagon_1();
  if (name == "heptagon-2") return heptagon_2();
  throw std::invalid_argument("unknown fixture '" + name +
                              "'; expected one of: four-bar, heptagon-1, heptagon-2");
}

std::vector<std::string> names() { return {"four-bar", "heptagon-1", "heptagon-2"}; }

}  // namespace barflex::fixtures
