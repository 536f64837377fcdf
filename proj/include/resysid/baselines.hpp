#pragma once

// AIC / BIC order selection with the delay fixed at zero.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "resysid/errors.hpp"
#include "resysid/residual_grid.hpp"
#include "resysid/signals.hpp"

namespace resysid {

struct OrderSelection {
  std::string criterion;
  int m = 0;
  /// values[m - 1] is the criterion at length m.
  std::vector<double> values;
};

/// argmin over m = 1..M of N ln x_m + weight * m, where x[m-1] is the output
/// error at length m. A zero residual counts as minus infinity; ties go to
/// the smallest m.
inline OrderSelection order_select(const std::vector<double>& x, int n, double weight, std::string name) {
  if (x.empty()) throw InvalidArgument("order_select: empty residual curve");
  if (n < 1) throw InvalidArgument("order_select: N must be positive");
  OrderSelection sel;
  sel.criterion = std::move(name);
  sel.values.resize(x.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0.0 || !std::isfinite(x[i])) throw InvalidArgument("order_select: bad residual value");
    const double v = x[i] == 0.0 ? -std::numeric_limits<double>::infinity()
                                 : n * std::log(x[i]) + weight * static_cast<double>(i + 1);
    sel.values[i] = v;
    if (sel.m == 0 || v < best) {
      best = v;
      sel.m = static_cast<int>(i) + 1;
    }
  }
  return sel;
}

inline std::vector<double> zero_delay_errors(const ResidualGrid& grid) {
  if (grid.d_lo() != 0) throw InvalidArgument("baselines need the d = 0 row of the grid");
  std::vector<double> x(grid.ambient());
  for (int m = 1; m <= grid.ambient(); ++m) x[m - 1] = grid.x(0, m);
  return x;
}

inline OrderSelection aic_order(const ResidualGrid& grid, double weight = 2.0) {
  return order_select(zero_delay_errors(grid), grid.samples(), weight, "aic");
}

inline OrderSelection bic_order(const ResidualGrid& grid, double weight = 1.0) {
  return order_select(zero_delay_errors(grid), grid.samples(), weight * std::log(grid.samples()), "bic");
}

inline OrderSelection aic_order(const Signal& u, const Signal& y, int ambient, double weight = 2.0) {
  return aic_order(residual_grid(u, y, ambient, 0, 1), weight);
}

inline OrderSelection bic_order(const Signal& u, const Signal& y, int ambient, double weight = 1.0) {
  return bic_order(residual_grid(u, y, ambient, 0, 1), weight);
}

}  // namespace resysid
