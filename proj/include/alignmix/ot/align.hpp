#pragma once

// Alignment of stage-1 feature tensors by entropic optimal transport.
//
// A c x h x w feature tensor is viewed as r = h*w feature vectors in R^c. Two such
// tensors are matched by the transport plan P with uniform marginals 1/r that
// minimises <P, M> - eps * H(P), where M holds pairwise squared distances. The
// rescaled plan R = r*P is doubly stochastic and recombines the columns of one
// tensor onto the spatial positions of the other.

#include <vector>

#include "alignmix/tensor.hpp"

namespace alignmix::ot {

template <typename T>
using FeatureTensor = Tensor3<T>;

/// c x r view of a feature tensor; column j is the feature vector at spatial
/// position j = y * width + x. The original (height, width) is kept for unflattening.
template <typename T>
struct FeatureMatrix {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;  // row-major c x r

  [[nodiscard]] int columns() const { return height * width; }
  T operator()(int c, int j) const { return data[static_cast<std::size_t>(c) * columns() + j]; }
  T& operator()(int c, int j) { return data[static_cast<std::size_t>(c) * columns() + j]; }
};

template <typename T>
FeatureMatrix<T> flatten(const FeatureTensor<T>& t);
template <typename T>
FeatureTensor<T> unflatten(const FeatureMatrix<T>& m);

struct CostMatrix {
  Matrix values;
  [[nodiscard]] int size() const { return values.rows(); }
};

struct SinkhornConfig {
  double epsilon = 0.1;
  int max_iters = 100;
  double marginal_tol = 1e-9;

  void validate() const;
};

/// Below this epsilon the solver iterates on dual potentials in the log domain.
inline constexpr double kLogDomainThreshold = 1e-2;

struct TransportPlan {
  Matrix values;
  int iterations = 0;
  double max_marginal_deviation = 0.0;
  bool log_domain = false;
  bool rounded = false;  // iterations stopped short of marginal_tol; marginals fixed by projection

  [[nodiscard]] int size() const { return values.rows(); }
};

/// R = r * P. Never differentiated: the training losses treat it as a constant.
struct AssignmentMatrix {
  Matrix values;
  static constexpr bool gradient_opaque = true;

  [[nodiscard]] int size() const { return values.rows(); }
};

enum class AlignDirection {
  to_second,  // A' R^T: second tensor's columns placed at the first tensor's positions
  to_first,   // A R: first tensor's columns placed at the second tensor's positions
};

/// m_ij = ||a_i - b_j||^2.
template <typename T>
CostMatrix cost_matrix(const FeatureMatrix<T>& a, const FeatureMatrix<T>& b);

/// Entropic OT with uniform marginals. Picks the log domain for eps < 1e-2 and
/// falls back to it when the standard-domain kernel underflows. A plan still off
/// by more than marginal_tol after max_iters is projected onto the marginals.
TransportPlan sinkhorn(const CostMatrix& cost, const SinkhornConfig& cfg);

/// Row/column scaling of e^{-(M - rowmin)/eps}. Throws underflow_error when a
/// column of the kernel is entirely zero.
TransportPlan sinkhorn_standard(const CostMatrix& cost, const SinkhornConfig& cfg);

/// Same fixed point computed on dual potentials with log-sum-exp updates.
TransportPlan sinkhorn_log(const CostMatrix& cost, const SinkhornConfig& cfg);

double plan_entropy(const TransportPlan& plan);
double transport_cost(const TransportPlan& plan, const CostMatrix& cost);
/// max over rows and columns of |sum - 1/r|.
double max_marginal_deviation(const Matrix& plan);

AssignmentMatrix assignment(const TransportPlan& plan);

/// Sinkhorn solve for the pair (a, b); the plan's rows index a's positions.
template <typename T>
AssignmentMatrix solve_assignment(const FeatureTensor<T>& a, const FeatureTensor<T>& b,
                                  const SinkhornConfig& cfg);

/// Recombines columns with a fixed assignment matrix.
template <typename T>
FeatureTensor<T> apply_assignment(const FeatureTensor<T>& a, const FeatureTensor<T>& b,
                                  const AssignmentMatrix& r, AlignDirection direction);

/// to_second: A~ = A' R^T. to_first: A~' = A R.
template <typename T>
FeatureTensor<T> align(const FeatureTensor<T>& a, const FeatureTensor<T>& b,
                       const SinkhornConfig& cfg, AlignDirection direction);

}  // namespace alignmix::ot
