// Maximise a small mixed function: one categorical variable with three
// levels, two continuous inputs in [0, 1].

#include <cmath>
#include <iostream>

#include "vpbo/vpbo.hpp"

int main() {
  const vpbo::CategorySpace space({3}, 2);
  const double centre[] = {0.2, 0.5, 0.8};
  const double height[] = {0.5, 1.0, 0.7};
  vpbo::ObjectiveFn f = [&](const vpbo::MixedPoint& z) {
    const double dx = z.x[0] - centre[z.h[0]], dy = z.x[1] - 0.3;
    return height[z.h[0]] * std::exp(-20.0 * (dx * dx + dy * dy));
  };

  vpbo::EngineOptions opt;
  opt.init_budget = 8;
  opt.horizon = 30;
  vpbo::VpboStrategy bo(opt);
  bo.initialise(f, space, 42);
  for (int t = 0; t < opt.horizon; ++t) bo.step(f);

  const auto& trace = bo.trace();
  std::cout << "initial best " << trace.initial_best() << "\n";
  for (const auto& r : trace.records) {
    if (r.t % 5 == 0) std::cout << "t=" << r.t << " h=" << r.z.h[0] << " y=" << r.y << " best=" << r.best << "\n";
  }
  std::cout << "optimum is 1 at h=1, x=(0.5, 0.3)\n";
}
