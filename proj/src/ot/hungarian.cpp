#include "alignmix/ot/hungarian.hpp"

#include <limits>

namespace alignmix::ot {

LinearAssignment solve_linear_assignment(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw dimension_error("solve_linear_assignment: matrix must be square");
  const int n = cost.rows();
  constexpr double inf = std::numeric_limits<double>::infinity();

  // 1-based potentials; column 0 is a virtual sink.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);

  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  LinearAssignment out;
  out.row_to_col.assign(n, -1);
  for (int j = 1; j <= n; ++j)
    if (match[j] != 0) out.row_to_col[match[j] - 1] = j - 1;
  for (int i = 0; i < n; ++i) out.cost += cost(i, out.row_to_col[i]);
  return out;
}

}  // namespace alignmix::ot
