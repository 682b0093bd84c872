#include "sparsescene/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sparsescene/error.hpp"

namespace sparsescene {

namespace {

constexpr double kGradientTol = 1e-10;  // inactive atoms enter below -kGradientTol
constexpr int kMaxHalvings = 20;
constexpr double kNormTol = 1e-6;

Vector floored(const Vector& v) { return v.cwiseMax(kKlFloor); }

std::vector<double> sums_per_block(const Vector& x, const std::vector<Block>& blocks) {
  std::vector<double> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) out.push_back(x.segment(b.start, b.size()).cwiseAbs().sum());
  return out;
}

// Exact minimiser of t -> KL(y || base + t d) over t >= 0, assuming the
// derivative at t = 0 is negative. Safeguarded Newton on the derivative.
double line_minimize(const Vector& y, const Vector& base, const Vector& d) {
  auto derivative = [&](double t, double* second) {
    double g = 0.0, h = 0.0;
    for (Eigen::Index p = 0; p < y.size(); ++p) {
      if (d(p) == 0.0) continue;
      const double yh = std::max(base(p) + t * d(p), kKlFloor);
      g += d(p) * (1.0 - y(p) / yh);
      h += d(p) * d(p) * y(p) / (yh * yh);
    }
    if (second) *second = h;
    return g;
  };
  double lo = 0.0, hi = std::max(1e-12, y.sum() / std::max(d.sum(), kKlFloor));
  for (int i = 0; i < 400 && derivative(hi, nullptr) < 0.0; ++i) hi *= 2.0;
  double t = hi;
  for (int i = 0; i < 200; ++i) {
    double h = 0.0;
    const double g = derivative(t, &h);
    if (g == 0.0) return t;
    if (g < 0.0) lo = t;
    else hi = t;
    double next = (h > 0.0) ? t - g / h : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-15 * std::max(1.0, t) || hi - lo <= 1e-15 * std::max(1.0, hi)) return next;
    t = next;
  }
  return t;
}

}  // namespace

double kl_divergence(const Vector& y, const Vector& yhat) {
  double f = 0.0;
  for (Eigen::Index p = 0; p < y.size(); ++p) {
    const double yh = yhat(p);
    if (y(p) > 0.0) f += y(p) * std::log(std::max(y(p), kKlFloor) / std::max(yh, kKlFloor));
    f += yh - y(p);
  }
  return f;
}

void RecoveryProblem::validate() const {
  if (!dictionary) throw DataError("recovery problem has no dictionary");
  const Matrix& D = *dictionary;
  if (target.size() != D.rows())
    throw DataError("target length " + std::to_string(target.size()) + " does not match dictionary rows " +
                    std::to_string(D.rows()));
  if (!target.allFinite() || (target.size() > 0 && target.minCoeff() < 0.0))
    throw DataError("target must be finite and non-negative");
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    if (b.start != at || b.end < b.start) throw DataError("blocks must be contiguous and ordered");
    at = b.end;
  }
  if (at != D.cols()) throw DataError("blocks do not cover all dictionary columns");
}

std::vector<Block> blocks_for(const std::vector<std::pair<std::string, Eigen::Index>>& sizes) {
  std::vector<Block> blocks;
  Eigen::Index at = 0;
  for (const auto& [label, n] : sizes) {
    blocks.push_back(Block{label, at, at + n});
    at += n;
  }
  return blocks;
}

RecoveryProblem make_problem(std::shared_ptr<const Matrix> dictionary, Vector target,
                             std::vector<Block> blocks) {
  RecoveryProblem p{std::move(dictionary), std::move(target), std::move(blocks)};
  if (p.blocks.empty() && p.dictionary) p.blocks.push_back(Block{"all", 0, p.dictionary->cols()});
  p.validate();
  return p;
}

RecoverySolution solve_asna(const RecoveryProblem& problem, const SolverOptions& options) {
  problem.validate();
  const Matrix& D = *problem.dictionary;
  const Vector& y = problem.target;
  const Eigen::Index M = D.cols();
  if (M == 0) throw DataError("empty dictionary");
  const double y_sum = y.sum();
  if (!(y_sum > 0.0)) throw NumericalError("degenerate target: all-zero frame", 0);

  RecoverySolution sol;
  const Vector col_norms = D.colwise().norm().transpose();
  sol.dictionary_normalized = ((col_norms.array() - 1.0).abs() <= kNormTol).all();
  const Vector col_sums = D.colwise().sum().transpose();

  // Start from the single atom with the smallest KL at its optimal scale.
  Eigen::Index first = -1;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < M; ++k) {
    if (!(col_sums(k) > 0.0)) continue;
    const double scale = y_sum / col_sums(k);
    const double f = kl_divergence(y, scale * D.col(k));
    if (f < best) {
      best = f;
      first = k;
    }
  }
  if (first < 0) throw NumericalError("numerical failure: dictionary has no usable atom", 0);

  Vector x = Vector::Zero(M);
  x(first) = y_sum / col_sums(first);
  std::vector<Eigen::Index> active{first};
  Vector yhat = x(first) * D.col(first);
  double f = kl_divergence(y, yhat);
  if (options.record_trace) sol.trace.push_back(f);

  auto fail_if_bad = [&](int it) {
    if (!std::isfinite(f) || !x.allFinite())
      throw NumericalError("numerical failure at iteration " + std::to_string(it), it);
  };

  int it = 0;
  for (it = 1; it <= options.max_iters; ++it) {
    const double f_prev = f;
    const Vector ratio = y.cwiseQuotient(floored(yhat));
    const Vector grad = D.transpose() * (Vector::Ones(y.size()) - ratio);

    // Enter the inactive atom with the most negative gradient.
    Eigen::Index entering = -1;
    double g_min = -kGradientTol;
    std::vector<bool> is_active(static_cast<std::size_t>(M), false);
    for (auto a : active) is_active[static_cast<std::size_t>(a)] = true;
    for (Eigen::Index m = 0; m < M; ++m) {
      if (!is_active[static_cast<std::size_t>(m)] && grad(m) < g_min) {
        g_min = grad(m);
        entering = m;
      }
    }
    if (entering >= 0) {
      const Vector d = D.col(entering);
      const double t = line_minimize(y, yhat, d);
      if (t > 0.0) {
        const Vector trial = yhat + t * d;
        const double f_trial = kl_divergence(y, trial);
        if (f_trial <= f) {
          x(entering) = t;
          yhat = trial;
          f = f_trial;
          active.push_back(entering);
        }
      }
    }

    // Newton step restricted to the active set.
    const auto a = static_cast<Eigen::Index>(active.size());
    const Matrix DA = D(Eigen::all, active);
    const Vector xa = x(active);
    const Vector yh_f = floored(yhat);
    const Vector g_a = DA.transpose() * (Vector::Ones(y.size()) - y.cwiseQuotient(yh_f));
    const Vector w = y.cwiseQuotient(yh_f.cwiseProduct(yh_f));
    Matrix H = DA.transpose() * w.asDiagonal() * DA;
    const double ridge = 1e-12 * std::max(H.diagonal().maxCoeff(), 1e-300);
    H.diagonal().array() += ridge;
    const Vector delta = H.ldlt().solve(g_a);

    bool accepted = false;
    Vector x_new;
    Vector yhat_new;
    double f_new = f;
    if (delta.allFinite()) {
      double alpha_max = 1.0;
      for (Eigen::Index i = 0; i < a; ++i)
        if (delta(i) > 0.0) alpha_max = std::min(alpha_max, xa(i) / delta(i));
      double alpha = alpha_max;
      for (int h = 0; h <= kMaxHalvings && alpha > 0.0; ++h, alpha *= 0.5) {
        Vector trial = xa - alpha * delta;
        // Atoms that reach the boundary are clamped to exactly zero.
        for (Eigen::Index i = 0; i < a; ++i)
          if (trial(i) < 0.0 || (delta(i) > 0.0 && alpha >= xa(i) / delta(i))) trial(i) = 0.0;
        const Vector yh_trial = DA * trial;
        const double f_trial = kl_divergence(y, yh_trial);
        if (f_trial < f) {
          accepted = true;
          x_new = std::move(trial);
          yhat_new = yh_trial;
          f_new = f_trial;
          break;
        }
      }
    }
    if (!accepted) {
      // Projected, diagonally scaled gradient step.
      const Vector step = g_a.cwiseQuotient(H.diagonal().cwiseMax(1e-300));
      double beta = 1.0;
      for (int h = 0; h < 40; ++h, beta *= 0.5) {
        const Vector trial = (xa - beta * step).cwiseMax(0.0);
        const Vector yh_trial = DA * trial;
        const double f_trial = kl_divergence(y, yh_trial);
        if (f_trial < f) {
          accepted = true;
          x_new = trial;
          yhat_new = yh_trial;
          f_new = f_trial;
          break;
        }
      }
    }
    if (accepted) {
      std::vector<Eigen::Index> still;
      for (Eigen::Index i = 0; i < a; ++i) {
        const auto col = active[static_cast<std::size_t>(i)];
        x(col) = x_new(i);
        if (x_new(i) > 0.0) still.push_back(col);
      }
      if (!still.empty()) {
        active = std::move(still);
        yhat = yhat_new;
        f = f_new;
      } else {
        // Never empty the support; keep the best single coordinate.
        for (Eigen::Index i = 0; i < a; ++i) x(active[static_cast<std::size_t>(i)]) = xa(i);
      }
    }
    fail_if_bad(it);
    if (options.record_trace) sol.trace.push_back(f);

    const double rel = (f_prev - f) / std::max(std::abs(f_prev), 1e-300);
    if (entering < 0 && rel < options.tol) break;
    if (f <= 0.0 && entering < 0) break;
    if (entering >= 0 && f_prev - f <= 0.0) break;  // no progress possible
  }

  sol.weights = x;
  sol.objective = f;
  sol.iterations = std::min(it, options.max_iters);
  sol.active_set_size = static_cast<int>((x.array() > 0.0).count());
  sol.block_sums = sums_per_block(x, problem.blocks);
  return sol;
}

RecoverySolution solve_mu(const RecoveryProblem& problem, int iters, bool record_trace) {
  problem.validate();
  if (iters < 0) throw UsageError("iteration count must be non-negative");
  const Matrix& D = *problem.dictionary;
  const Vector& y = problem.target;
  const Eigen::Index M = D.cols();
  if (M == 0) throw DataError("empty dictionary");

  RecoverySolution sol;
  const Vector col_sums = D.colwise().sum().transpose().cwiseMax(kKlFloor);
  Vector x = Vector::Constant(M, 1.0 / static_cast<double>(M));
  Vector yhat = D * x;
  if (record_trace) sol.trace.push_back(kl_divergence(y, yhat));
  const Matrix Dt = D.transpose();
  for (int it = 0; it < iters; ++it) {
    const Vector ratio = y.cwiseQuotient(floored(yhat));
    x = x.cwiseProduct(Dt * ratio).cwiseQuotient(col_sums);
    yhat.noalias() = D * x;
    if (record_trace) sol.trace.push_back(kl_divergence(y, yhat));
  }
  if (!x.allFinite()) throw NumericalError("numerical failure in multiplicative updates", iters);
  sol.weights = x;
  sol.objective = kl_divergence(y, yhat);
  sol.iterations = iters;
  sol.active_set_size = static_cast<int>((x.array() > 0.0).count());
  sol.block_sums = sums_per_block(x, problem.blocks);
  const Vector col_norms = D.colwise().norm().transpose();
  sol.dictionary_normalized = ((col_norms.array() - 1.0).abs() <= kNormTol).all();
  return sol;
}

std::vector<std::pair<std::string, double>> block_sums(const RecoverySolution& solution,
                                                       const RecoveryProblem& problem) {
  problem.validate();
  if (solution.weights.size() != problem.dictionary->cols())
    throw DataError("solution and problem shapes differ");
  std::vector<std::pair<std::string, double>> out;
  const auto sums = sums_per_block(solution.weights, problem.blocks);
  for (std::size_t i = 0; i < sums.size(); ++i) out.emplace_back(problem.blocks[i].label, sums[i]);
  return out;
}

}  // namespace sparsescene
