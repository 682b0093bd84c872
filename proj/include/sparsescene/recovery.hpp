#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sparsescene/features.hpp"

namespace sparsescene {

/// Contiguous column range [start, end) of a concatenated dictionary.
struct Block {
  std::string label;
  Eigen::Index start = 0;
  Eigen::Index end = 0;
  Eigen::Index size() const noexcept { return end - start; }
};

struct RecoveryProblem {
  std::shared_ptr<const Matrix> dictionary;  // P x M, shared across frames
  Vector target;                             // y, P entries, non-negative
  std::vector<Block> blocks;

  // Throws DataError unless blocks partition the columns and y is finite, >= 0.
  void validate() const;
};

struct SolverOptions {
  double tol = 1e-7;      // relative objective decrease
  int max_iters = 500;
  bool record_trace = false;
};

struct RecoverySolution {
  Vector weights;                    // x >= 0
  double objective = 0.0;            // generalised KL at x
  int iterations = 0;
  int active_set_size = 0;
  std::vector<double> block_sums;    // ||x_k||_1 in block order
  std::vector<double> trace;         // objective per accepted iteration
  bool dictionary_normalized = true;
};

inline constexpr double kKlFloor = 1e-12;

/// Generalised KL divergence sum_p y log(y / yhat) - y + yhat with both
/// arguments floored at kKlFloor inside the log.
double kl_divergence(const Vector& y, const Vector& yhat);

/// Builds a problem over [dicts...] with one block per dictionary.
RecoveryProblem make_problem(std::shared_ptr<const Matrix> dictionary, Vector target,
                             std::vector<Block> blocks);
std::vector<Block> blocks_for(const std::vector<std::pair<std::string, Eigen::Index>>& sizes);

/// Active-set Newton solver for min KL(y || Dx) subject to x >= 0.
RecoverySolution solve_asna(const RecoveryProblem& problem, const SolverOptions& options = {});

/// Classical KL multiplicative updates from the uniform start x = 1/M.
RecoverySolution solve_mu(const RecoveryProblem& problem, int iters, bool record_trace = false);

std::vector<std::pair<std::string, double>> block_sums(const RecoverySolution& solution,
                                                       const RecoveryProblem& problem);

}  // namespace sparsescene
