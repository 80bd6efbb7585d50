#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "hydrolim/errors.hpp"

namespace hydrolim {

// Uniform cell-centered axis on [-extent, extent]: cell i owns
// [-extent + i*dx, -extent + (i+1)*dx] with center at the midpoint.
struct Axis {
  double extent = 0.0;
  int cells = 0;
  double dx = 0.0;

  Axis() = default;
  Axis(double extent_, int cells_) : extent(extent_), cells(cells_) {
    if (!(extent_ > 0.0) || cells_ < 2)
      throw ConfigInvalid("axis needs extent > 0 and at least 2 cells");
    dx = 2.0 * extent_ / cells_;
  }

  double center(int i) const { return -extent + (i + 0.5) * dx; }
  double interface(int k) const { return -extent + k * dx; }

  std::vector<double> centers() const {
    std::vector<double> c(cells);
    for (int i = 0; i < cells; ++i) c[i] = center(i);
    return c;
  }

  bool operator==(const Axis& o) const {
    return extent == o.extent && cells == o.cells;
  }
};

inline void require_same_axis(const Axis& a, const Axis& b, const char* what) {
  if (!(a == b)) throw IncompatibleGrids(std::string("axis mismatch: ") + what);
}

}  // namespace hydrolim
