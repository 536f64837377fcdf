// Fit the lowpass FIR test system from one noisy record with a known noise
// variance, then again with the variance searched over a grid.

#include <iostream>

#include "resysid/resysid.hpp"

int main() {
  using namespace resysid;

  const ImpulseResponse truth = system_I({}, 100);
  const TrialData data = synthesize(truth, 1000, 20.0, /*master seed*/ 42, /*trial*/ 0);

  SelectionConfig cfg;
  cfg.ambient = 100;
  cfg.sigma_known = true;
  cfg.sigma2_grid = {data.sigma2};
  const Selection known = select_model(data.u, data.y, cfg);
  std::cout << "known variance:   d* = " << known.d << ", m* = " << known.m
            << ", RMSE = " << rmse_theta(truth, known.model.embedded(100), 100) << "\n";

  cfg.sigma_known = false;
  cfg.sigma2_grid = geometric_grid(data.y.power() * 1e-4, data.y.power());
  const Selection searched = select_model(data.u, data.y, cfg);
  std::cout << "searched variance: d* = " << searched.d << ", m* = " << searched.m
            << ", sigma2* / sigma2 = " << *searched.sigma2 / data.sigma2 << "\n";
}
