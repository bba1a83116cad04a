#include "alignmix/ot/align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace alignmix::ot {

namespace {

void require_square(const CostMatrix& cost) {
  const Matrix& m = cost.values;
  if (m.rows() != m.cols() || m.rows() < 1) throw dimension_error("cost matrix must be square and nonempty");
  for (double v : m.values())
    if (!std::isfinite(v) || v < 0.0) throw parameter_error("cost matrix entries must be finite and nonnegative");
}

double row_deviation(const Matrix& p, double target) {
  double worst = 0.0;
  for (int i = 0; i < p.rows(); ++i) {
    double s = 0.0;
    for (double v : p.row(i)) s += v;
    worst = std::max(worst, std::abs(s - target));
  }
  return worst;
}

double log_sum_exp(const std::vector<double>& xs) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - hi);
  return hi + std::log(s);
}

// Projects a nearly balanced plan onto exact uniform marginals: rows and then
// columns are scaled down to at most 1/r, and the remaining mass is added back as
// a rank-one term. Entries stay nonnegative and the L1 change is at most twice the
// marginal deviation.
void round_to_marginals(Matrix& p) {
  const int r = p.rows();
  const double target = 1.0 / r;
  std::vector<double> sums(r, 0.0);
  for (int i = 0; i < r; ++i) {
    double s = 0.0;
    for (double v : p.row(i)) s += v;
    if (s > target)
      for (int j = 0; j < r; ++j) p(i, j) *= target / s;
  }
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) sums[j] += p(i, j);
  for (int j = 0; j < r; ++j)
    if (sums[j] > target)
      for (int i = 0; i < r; ++i) p(i, j) *= target / sums[j];
  std::vector<double> row_gap(r), col_gap(r, 0.0);
  double total = 0.0;
  for (int i = 0; i < r; ++i) {
    double s = 0.0;
    for (int j = 0; j < r; ++j) {
      s += p(i, j);
      col_gap[j] += p(i, j);
    }
    row_gap[i] = std::max(0.0, target - s);
    total += row_gap[i];
  }
  if (total <= 0.0) return;
  for (auto& c : col_gap) c = std::max(0.0, target - c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) p(i, j) += row_gap[i] * col_gap[j] / total;
}

TransportPlan trivial_plan() {
  TransportPlan plan;
  plan.values = Matrix(1, 1, 1.0);
  return plan;
}

}  // namespace

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw parameter_error("sinkhorn epsilon must be positive");
  if (max_iters < 1) throw parameter_error("sinkhorn max_iters must be >= 1");
  if (!(marginal_tol > 0.0)) throw parameter_error("sinkhorn marginal_tol must be positive");
}

template <typename T>
FeatureMatrix<T> flatten(const FeatureTensor<T>& t) {
  // Channel planes are already row-major over (h, w), so the c x r matrix shares the buffer layout.
  return FeatureMatrix<T>{t.channels, t.height, t.width, t.data};
}

template <typename T>
FeatureTensor<T> unflatten(const FeatureMatrix<T>& m) {
  return FeatureTensor<T>(m.channels, m.height, m.width, m.data);
}

template <typename T>
CostMatrix cost_matrix(const FeatureMatrix<T>& a, const FeatureMatrix<T>& b) {
  if (a.channels != b.channels || a.columns() != b.columns())
    throw dimension_error("cost_matrix: feature matrices differ in shape");
  const int r = a.columns();
  CostMatrix out{Matrix(r, r)};
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) {
      double s = 0.0;
      for (int c = 0; c < a.channels; ++c) {
        const double d = static_cast<double>(a(c, i)) - static_cast<double>(b(c, j));
        s += d * d;
      }
      out.values(i, j) = s;
    }
  }
  return out;
}

double max_marginal_deviation(const Matrix& p) {
  const int r = p.rows();
  const double target = 1.0 / r;
  double worst = row_deviation(p, target);
  for (int j = 0; j < r; ++j) {
    double s = 0.0;
    for (int i = 0; i < r; ++i) s += p(i, j);
    worst = std::max(worst, std::abs(s - target));
  }
  return worst;
}

TransportPlan sinkhorn_standard(const CostMatrix& cost, const SinkhornConfig& cfg) {
  cfg.validate();
  require_square(cost);
  const int r = cost.size();
  if (r == 1) return trivial_plan();
  const double target = 1.0 / r;

  TransportPlan plan;
  Matrix& p = plan.values;
  p = Matrix(r, r);
  // Shifting each row by its minimum is a row rescaling, which the first row
  // normalisation absorbs; it keeps at least one unit entry per row.
  for (int i = 0; i < r; ++i) {
    const auto row = cost.values.row(i);
    const double lo = *std::min_element(row.begin(), row.end());
    for (int j = 0; j < r; ++j) p(i, j) = std::exp(-(row[j] - lo) / cfg.epsilon);
  }
  for (int j = 0; j < r; ++j) {
    bool any = false;
    for (int i = 0; i < r && !any; ++i) any = p(i, j) > 0.0;
    if (!any)
      throw underflow_error("sinkhorn: column " + std::to_string(j) + " of e^{-M/eps} underflowed to zero");
  }

  std::vector<double> sums(r);
  for (int it = 1; it <= cfg.max_iters; ++it) {
    for (int i = 0; i < r; ++i) {
      double s = 0.0;
      for (int j = 0; j < r; ++j) s += p(i, j);
      const double scale = target / s;
      for (int j = 0; j < r; ++j) p(i, j) *= scale;
    }
    std::fill(sums.begin(), sums.end(), 0.0);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) sums[j] += p(i, j);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) p(i, j) *= target / sums[j];
    plan.iterations = it;
    if (row_deviation(p, target) < cfg.marginal_tol) break;
  }
  plan.max_marginal_deviation = max_marginal_deviation(p);
  if (plan.max_marginal_deviation > cfg.marginal_tol) {
    round_to_marginals(p);
    plan.rounded = true;
    plan.max_marginal_deviation = max_marginal_deviation(p);
  }
  return plan;
}

constexpr int kScalingStageIters = 50;

TransportPlan sinkhorn_log(const CostMatrix& cost, const SinkhornConfig& cfg) {
  cfg.validate();
  require_square(cost);
  const int r = cost.size();
  if (r == 1) {
    TransportPlan plan = trivial_plan();
    plan.log_domain = true;
    return plan;
  }
  const double eps = cfg.epsilon;
  const double log_target = -std::log(static_cast<double>(r));
  const double target = 1.0 / r;
  const Matrix& m = cost.values;

  // P_ij = exp((f_i + g_j - m_ij) / eps)
  std::vector<double> f(r, 0.0), g(r, 0.0), buf(r);
  TransportPlan plan;
  plan.log_domain = true;
  plan.values = Matrix(r, r);
  Matrix& p = plan.values;

  auto fill_plan = [&] {
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) p(i, j) = std::exp((f[i] + g[j] - m(i, j)) / eps);
  };

  // One sweep at regularisation e: row update, column update, then the row deviation
  // (columns are exact after the g update).
  auto sweep = [&](double e) {
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < r; ++j) buf[j] = (g[j] - m(i, j)) / e;
      f[i] = e * (log_target - log_sum_exp(buf));
    }
    for (int j = 0; j < r; ++j) {
      for (int i = 0; i < r; ++i) buf[i] = (f[i] - m(i, j)) / e;
      g[j] = e * (log_target - log_sum_exp(buf));
    }
    double worst = 0.0;
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < r; ++j) buf[j] = (f[i] + g[j] - m(i, j)) / e;
      worst = std::max(worst, std::abs(std::exp(log_sum_exp(buf)) - target));
    }
    return worst;
  };

  // Epsilon scaling: potentials solved at a coarser regularisation are a warm start
  // for the next. Only the starting point changes; the final stage runs at eps.
  double spread = 0.0;
  for (double v : m.values()) spread = std::max(spread, v);
  std::vector<double> stages;
  for (double e = spread / 2.0; e > 4.0 * eps; e /= 4.0) stages.push_back(e);
  // Leave at least half of the iteration budget for the final stage.
  const int stage_iters =
      stages.empty() ? 0
                     : std::min(kScalingStageIters, cfg.max_iters / (2 * static_cast<int>(stages.size())));
  int it = 0;
  for (double e : stages) {
    for (int k = 0; k < stage_iters; ++k) {
      ++it;
      if (sweep(e) < 1e-3 * target) break;
    }
  }
  while (it < cfg.max_iters) {
    ++it;
    if (sweep(eps) < cfg.marginal_tol) break;
  }
  plan.iterations = it;
  fill_plan();
  plan.max_marginal_deviation = max_marginal_deviation(p);
  if (plan.max_marginal_deviation > cfg.marginal_tol) {
    round_to_marginals(p);
    plan.rounded = true;
    plan.max_marginal_deviation = max_marginal_deviation(p);
  }
  return plan;
}

TransportPlan sinkhorn(const CostMatrix& cost, const SinkhornConfig& cfg) {
  cfg.validate();
  if (cfg.epsilon < kLogDomainThreshold) return sinkhorn_log(cost, cfg);
  try {
    return sinkhorn_standard(cost, cfg);
  } catch (const underflow_error&) {
    return sinkhorn_log(cost, cfg);
  }
}

double plan_entropy(const TransportPlan& plan) {
  double h = 0.0;
  for (double v : plan.values.values())
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double transport_cost(const TransportPlan& plan, const CostMatrix& cost) {
  if (plan.size() != cost.size()) throw dimension_error("transport_cost: size mismatch");
  double s = 0.0;
  const auto p = plan.values.values();
  const auto m = cost.values.values();
  for (std::size_t k = 0; k < p.size(); ++k) s += p[k] * m[k];
  return s;
}

AssignmentMatrix assignment(const TransportPlan& plan) {
  AssignmentMatrix out{plan.values};
  const double r = plan.size();
  for (double& v : out.values.values()) v *= r;
  return out;
}

template <typename T>
AssignmentMatrix solve_assignment(const FeatureTensor<T>& a, const FeatureTensor<T>& b,
                                  const SinkhornConfig& cfg) {
  if (!a.same_shape(b)) throw dimension_error("align: feature tensors differ in shape");
  return assignment(sinkhorn(cost_matrix(flatten(a), flatten(b)), cfg));
}

template <typename T>
FeatureTensor<T> apply_assignment(const FeatureTensor<T>& a, const FeatureTensor<T>& b,
                                  const AssignmentMatrix& r, AlignDirection direction) {
  if (!a.same_shape(b)) throw dimension_error("align: feature tensors differ in shape");
  const int n = a.plane();
  if (r.size() != n) throw dimension_error("align: assignment matrix does not match spatial size");
  const int c = a.channels;
  FeatureTensor<T> out(a.channels, a.height, a.width);
  if (direction == AlignDirection::to_second) {
    // out[:, i] = sum_j R_ij b[:, j]
    for (int ch = 0; ch < c; ++ch) {
      const T* src = b.data.data() + static_cast<std::size_t>(ch) * n;
      T* dst = out.data.data() + static_cast<std::size_t>(ch) * n;
      for (int i = 0; i < n; ++i) {
        T s{0};
        for (int j = 0; j < n; ++j) s += static_cast<T>(r.values(i, j)) * src[j];
        dst[i] = s;
      }
    }
  } else {
    // out[:, j] = sum_i R_ij a[:, i]
    for (int ch = 0; ch < c; ++ch) {
      const T* src = a.data.data() + static_cast<std::size_t>(ch) * n;
      T* dst = out.data.data() + static_cast<std::size_t>(ch) * n;
      for (int j = 0; j < n; ++j) {
        T s{0};
        for (int i = 0; i < n; ++i) s += static_cast<T>(r.values(i, j)) * src[i];
        dst[j] = s;
      }
    }
  }
  return out;
}

template <typename T>
FeatureTensor<T> align(const FeatureTensor<T>& a, const FeatureTensor<T>& b, const SinkhornConfig& cfg,
                       AlignDirection direction) {
  if (!a.same_shape(b)) throw dimension_error("align: feature tensors differ in shape");
  if (a.plane() == 1) return direction == AlignDirection::to_second ? b : a;
  return apply_assignment(a, b, solve_assignment(a, b, cfg), direction);
}

#define ALIGNMIX_OT_INSTANTIATE(T)                                                                     \
  template FeatureMatrix<T> flatten<T>(const FeatureTensor<T>&);                                       \
  template FeatureTensor<T> unflatten<T>(const FeatureMatrix<T>&);                                     \
  template CostMatrix cost_matrix<T>(const FeatureMatrix<T>&, const FeatureMatrix<T>&);                \
  template AssignmentMatrix solve_assignment<T>(const FeatureTensor<T>&, const FeatureTensor<T>&,      \
                                                const SinkhornConfig&);                                \
  template FeatureTensor<T> apply_assignment<T>(const FeatureTensor<T>&, const FeatureTensor<T>&,      \
                                                const AssignmentMatrix&, AlignDirection);              \
  template FeatureTensor<T> align<T>(const FeatureTensor<T>&, const FeatureTensor<T>&,                 \
                                     const SinkhornConfig&, AlignDirection);

ALIGNMIX_OT_INSTANTIATE(float)
ALIGNMIX_OT_INSTANTIATE(double)

#undef ALIGNMIX_OT_INSTANTIATE

}  // namespace alignmix::ot
