// Minimal library use: grow a small fourfold crystal for a few steps and
// print energy, auxiliary variable and crystal area.

#include <dendrite/presets.hpp>
#include <dendrite/sim.hpp>

#include <iostream>

int main() {
  auto cfg = dendrite::preset("fourfold", dendrite::PresetVariant::desk).sim;
  cfg.grid = dendrite::Grid::periodic(2, 128);
  cfg.n_steps = 20;

  const auto result = dendrite::run(cfg);
  for (const auto& r : result.reports) {
    std::cout << "step " << r.step << "  E=" << r.E << "  q=" << r.q << "  area=" << r.area << '\n';
  }
  return result.status;
}
