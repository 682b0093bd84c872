#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sparsescene/features.hpp"

namespace sparsescene {

enum class LearnMethod { Random, KMeans, KMedoid, Tdcs };

std::string to_string(LearnMethod method);
LearnMethod parse_method(const std::string& name);

struct LearnParams {
  LearnMethod method = LearnMethod::Random;
  int n_atoms = 500;
  std::uint64_t seed = 1;
  double t_within = 0.9;   // TDCS only
  double t_between = 0.9;  // TDCS only
  int max_iters = 0;       // 0 selects the method default
};

/// Unit-norm non-negative atoms (columns) for one source.
struct Dictionary {
  Matrix atoms;  // P x N
  std::string source_label;
  LearnParams params;
  int appended_count = 0;  // TDCS atoms added by the fallback, stored last

  Eigen::Index dim() const noexcept { return atoms.rows(); }
  Eigen::Index size() const noexcept { return atoms.cols(); }
  LearnMethod method() const noexcept { return params.method; }
};

struct DictionaryBank {
  std::vector<Dictionary> noise;
  std::vector<Dictionary> speakers;
  int atom_count = 0;

  Eigen::Index dim() const;
  // Throws DataError on mixed P or duplicate labels within a list.
  void validate() const;
  int noise_index(const std::string& label) const;
  int speaker_index(const std::string& label) const;
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_similarity(const Vector& a, const Vector& b);

/// Column-wise L2 normalisation; throws DataError on a zero column.
Matrix normalize_columns(const Matrix& m);

Dictionary learn_random(const Matrix& features, int n_atoms, std::uint64_t seed);

struct KMeansTrace {
  std::vector<double> objective;  // per iteration, after the update step
  int iterations = 0;
};

Dictionary learn_kmeans(const Matrix& features, int n_atoms, std::uint64_t seed,
                        int max_iters = 100, KMeansTrace* trace = nullptr);

Dictionary learn_kmedoid(const Matrix& features, int n_atoms, std::uint64_t seed,
                         int max_iters = 50);

/// Threshold-dependent cosine-similarity selection. `prior` holds the
/// dictionaries learnt earlier in bank order; candidates must stay below
/// t_between against all of their atoms.
Dictionary learn_tdcs(const Matrix& features, int n_atoms, double t_within, double t_between,
                      const std::vector<const Dictionary*>& prior, std::uint64_t seed);

/// Dispatches on params.method.
Dictionary learn(const Matrix& features, const LearnParams& params,
                 const std::vector<const Dictionary*>& prior = {});

/// Re-learns with the old method and atom budget on [old.atoms | new_features].
Dictionary update_dictionary(const Dictionary& old, const Matrix& new_features,
                             const std::vector<const Dictionary*>& prior = {});

void save_bank(const DictionaryBank& bank, const std::filesystem::path& path);
DictionaryBank load_bank(const std::filesystem::path& path);

inline constexpr int kBankFormatVersion = 1;

}  // namespace sparsescene
