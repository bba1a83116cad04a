#pragma once

#include <vector>

#include "alignmix/tensor.hpp"

namespace alignmix::ot {

struct LinearAssignment {
  std::vector<int> row_to_col;
  double cost = 0.0;
};

/// Exact minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres with
/// potentials, O(n^3)). Serves as the exact-transport oracle for the entropic solver:
/// with uniform marginals the unregularised optimum is (1/n) * this cost.
LinearAssignment solve_linear_assignment(const Matrix& cost);

}  // namespace alignmix::ot
