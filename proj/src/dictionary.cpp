#include "sparsescene/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "sparsescene/error.hpp"

namespace sparsescene {

namespace {

constexpr int kDefaultKMeansIters = 100;
constexpr int kDefaultKMedoidIters = 50;
constexpr Eigen::Index kGramChunk = 256;

Dictionary make_dictionary(Matrix atoms, const LearnParams& params) {
  Dictionary d;
  d.atoms = normalize_columns(atoms);
  d.params = params;
  return d;
}

void require_non_negative(const Matrix& features) {
  if (!features.allFinite()) throw DataError("features must be finite");
  if (features.size() > 0 && features.minCoeff() < 0.0)
    throw DataError("features must be non-negative");
}

// Squared Euclidean distances between the columns of `a` and `b`.
Matrix squared_distances(const Matrix& a, const Matrix& b) {
  const Vector an = a.colwise().squaredNorm().transpose();
  const Vector bn = b.colwise().squaredNorm().transpose();
  Matrix d = -2.0 * (a.transpose() * b);
  d.colwise() += an;
  d.rowwise() += bn.transpose();
  return d.cwiseMax(0.0);
}

std::vector<Eigen::Index> assign_nearest(const Matrix& dist) {
  std::vector<Eigen::Index> out(static_cast<std::size_t>(dist.rows()));
  for (Eigen::Index i = 0; i < dist.rows(); ++i) {
    Eigen::Index best = 0;
    dist.row(i).minCoeff(&best);  // first minimum on ties
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

}  // namespace

std::string to_string(LearnMethod method) {
  switch (method) {
    case LearnMethod::Random: return "random";
    case LearnMethod::KMeans: return "kmeans";
    case LearnMethod::KMedoid: return "kmedoid";
    case LearnMethod::Tdcs: return "tdcs";
  }
  return "unknown";
}

LearnMethod parse_method(const std::string& name) {
  if (name == "random") return LearnMethod::Random;
  if (name == "kmeans") return LearnMethod::KMeans;
  if (name == "kmedoid") return LearnMethod::KMedoid;
  if (name == "tdcs") return LearnMethod::Tdcs;
  throw UsageError("unknown learning method: " + name);
}

Eigen::Index DictionaryBank::dim() const {
  if (!noise.empty()) return noise.front().dim();
  if (!speakers.empty()) return speakers.front().dim();
  return 0;
}

void DictionaryBank::validate() const {
  const Eigen::Index P = dim();
  auto check = [P](const std::vector<Dictionary>& list, const char* what) {
    std::set<std::string> seen;
    for (const auto& d : list) {
      if (d.dim() != P) throw DataError(std::string(what) + " dictionary '" + d.source_label + "' has mismatched dimension");
      if (!seen.insert(d.source_label).second)
        throw DataError(std::string("duplicate ") + what + " label: " + d.source_label);
    }
  };
  check(noise, "noise");
  check(speakers, "speaker");
}

int DictionaryBank::noise_index(const std::string& label) const {
  for (std::size_t i = 0; i < noise.size(); ++i)
    if (noise[i].source_label == label) return static_cast<int>(i);
  return -1;
}

int DictionaryBank::speaker_index(const std::string& label) const {
  for (std::size_t i = 0; i < speakers.size(); ++i)
    if (speakers[i].source_label == label) return static_cast<int>(i);
  return -1;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("cosine similarity of vectors with different lengths");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DataError("degenerate atom: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double cosine_similarity(const Vector& a, const Vector& b) {
  return cosine_similarity(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                           std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
}

Matrix normalize_columns(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double norm = out.col(j).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw DataError("degenerate atom: zero or non-finite column");
    out.col(j) /= norm;
  }
  return out;
}

Dictionary learn_random(const Matrix& features, int n_atoms, std::uint64_t seed) {
  require_non_negative(features);
  if (n_atoms <= 0) throw UsageError("atom count must be positive");
  if (features.cols() < n_atoms)
    throw DataError("too few features (" + std::to_string(features.cols()) + ") for " +
                    std::to_string(n_atoms) + " atoms");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(features.cols()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(n_atoms));
  return make_dictionary(features(Eigen::all, idx),
                         LearnParams{LearnMethod::Random, n_atoms, seed, 0.0, 0.0, 0});
}

Dictionary learn_kmeans(const Matrix& features, int n_atoms, std::uint64_t seed, int max_iters,
                        KMeansTrace* trace) {
  require_non_negative(features);
  if (n_atoms <= 0) throw UsageError("atom count must be positive");
  const Eigen::Index n = features.cols();
  const Eigen::Index k = n_atoms;
  if (n < k) throw DataError("too few features for k-means");
  if (max_iters <= 0) max_iters = kDefaultKMeansIters;

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(k));
  Matrix centroids = features(Eigen::all, idx);

  std::vector<Eigen::Index> assignment, previous;
  KMeansTrace local;
  for (int iter = 0; iter < max_iters; ++iter) {
    const Matrix dist = squared_distances(features, centroids);
    assignment = assign_nearest(dist);

    // Empty clusters take the feature farthest from its own centroid.
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (auto a : assignment) ++counts[static_cast<std::size_t>(a)];
    std::vector<bool> moved(static_cast<std::size_t>(n), false);
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto own = assignment[static_cast<std::size_t>(i)];
        if (moved[static_cast<std::size_t>(i)] || counts[static_cast<std::size_t>(own)] < 2) continue;
        const double d = dist(i, own);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) break;
      --counts[static_cast<std::size_t>(assignment[static_cast<std::size_t>(far)])];
      assignment[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      moved[static_cast<std::size_t>(far)] = true;
    }

    const bool stable = assignment == previous;
    Matrix sums = Matrix::Zero(features.rows(), k);
    for (Eigen::Index i = 0; i < n; ++i) sums.col(assignment[static_cast<std::size_t>(i)]) += features.col(i);
    for (Eigen::Index c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0)
        centroids.col(c) = sums.col(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);

    double objective = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      objective += (features.col(i) - centroids.col(assignment[static_cast<std::size_t>(i)])).squaredNorm();
    local.objective.push_back(objective);
    local.iterations = iter + 1;
    if (stable) break;
    previous = assignment;
  }
  if (trace) *trace = std::move(local);
  return make_dictionary(centroids, LearnParams{LearnMethod::KMeans, n_atoms, seed, 0.0, 0.0, max_iters});
}

Dictionary learn_kmedoid(const Matrix& features, int n_atoms, std::uint64_t seed, int max_iters) {
  require_non_negative(features);
  if (n_atoms <= 0) throw UsageError("atom count must be positive");
  const Eigen::Index n = features.cols();
  const Eigen::Index k = n_atoms;
  if (n < k) throw DataError("too few features for k-medoid");
  if (max_iters <= 0) max_iters = kDefaultKMedoidIters;

  // Park & Jun initialisation: v_j = sum_i d_ij / sum_l d_il.
  Vector row_sums(n);
  for (Eigen::Index start = 0; start < n; start += kGramChunk) {
    const Eigen::Index len = std::min(kGramChunk, n - start);
    row_sums.segment(start, len) =
        squared_distances(features.middleCols(start, len), features).cwiseSqrt().rowwise().sum();
  }
  Vector v = Vector::Zero(n);
  for (Eigen::Index start = 0; start < n; start += kGramChunk) {
    const Eigen::Index len = std::min(kGramChunk, n - start);
    const Matrix d = squared_distances(features.middleCols(start, len), features).cwiseSqrt();
    for (Eigen::Index r = 0; r < len; ++r)
      for (Eigen::Index j = 0; j < n; ++j)
        if (row_sums(start + r) > 0.0) v(j) += d(r, j) / row_sums(start + r);
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v(a) < v(b); });
  std::vector<Eigen::Index> medoids(order.begin(), order.begin() + k);

  for (int iter = 0; iter < max_iters; ++iter) {
    const Matrix dist = squared_distances(features, features(Eigen::all, medoids)).cwiseSqrt();
    std::vector<Eigen::Index> assignment = assign_nearest(dist);
    for (Eigen::Index c = 0; c < k; ++c) assignment[static_cast<std::size_t>(medoids[static_cast<std::size_t>(c)])] = c;

    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < n; ++i) members[static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)])].push_back(i);

    bool changed = false;
    for (Eigen::Index c = 0; c < k; ++c) {
      const auto& m = members[static_cast<std::size_t>(c)];
      if (m.size() < 2) continue;
      const Matrix sub = features(Eigen::all, m);
      const Vector cost = squared_distances(sub, sub).cwiseSqrt().rowwise().sum();
      const auto current = medoids[static_cast<std::size_t>(c)];
      std::size_t best = 0;
      double best_cost = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < m.size(); ++r) {
        const double cr = cost(static_cast<Eigen::Index>(r));
        if (cr < best_cost || (cr == best_cost && m[r] == current)) {
          best_cost = cr;
          best = r;
        }
      }
      // Keep the incumbent unless the swap strictly lowers the cost.
      const auto pos = std::find(m.begin(), m.end(), current) - m.begin();
      if (cost(pos) <= best_cost) continue;
      medoids[static_cast<std::size_t>(c)] = m[best];
      changed = true;
    }
    if (!changed) break;
  }
  return make_dictionary(features(Eigen::all, medoids),
                         LearnParams{LearnMethod::KMedoid, n_atoms, seed, 0.0, 0.0, max_iters});
}

Dictionary learn_tdcs(const Matrix& features, int n_atoms, double t_within, double t_between,
                      const std::vector<const Dictionary*>& prior, std::uint64_t seed) {
  require_non_negative(features);
  if (n_atoms <= 0) throw UsageError("atom count must be positive");
  if (!(t_within > 0.0 && t_within <= 1.0) || !(t_between > 0.0 && t_between <= 1.0))
    throw UsageError("TDCS thresholds must lie in (0, 1]");

  std::vector<Eigen::Index> usable;
  for (Eigen::Index j = 0; j < features.cols(); ++j)
    if (features.col(j).squaredNorm() > 0.0) usable.push_back(j);
  if (usable.empty()) throw DataError("TDCS needs at least one non-zero feature");
  const Matrix unit = normalize_columns(features(Eigen::all, usable));
  const auto n = unit.cols();

  std::vector<const Matrix*> prior_atoms;
  for (const Dictionary* d : prior) {
    if (d->dim() != unit.rows()) throw DataError("prior dictionary dimension mismatch");
    prior_atoms.push_back(&d->atoms);
  }
  const Matrix prior_all = hconcat(prior_atoms);
  Vector max_between = Vector::Zero(n);
  if (prior_all.cols() > 0) max_between = (prior_all.transpose() * unit).colwise().maxCoeff().transpose();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  Matrix accepted(unit.rows(), n_atoms);
  Eigen::Index count = 0;
  std::vector<Eigen::Index> rejected;
  for (auto t : order) {
    if (count == n_atoms) break;
    double max_within = 0.0;
    if (count > 0) max_within = (accepted.leftCols(count).transpose() * unit.col(t)).maxCoeff();
    if (max_within <= t_within && max_between(t) <= t_between) {
      accepted.col(count++) = unit.col(t);
    } else {
      rejected.push_back(t);
    }
  }

  Dictionary d;
  d.params = LearnParams{LearnMethod::Tdcs, n_atoms, seed, t_within, t_between, 0};
  const Eigen::Index accepted_count = count;
  if (count < n_atoms && !rejected.empty()) {
    // Fallback: rejected features ordered by increasing max within-CS
    // against the accepted set.
    Vector key = Vector::Zero(static_cast<Eigen::Index>(rejected.size()));
    if (accepted_count > 0)
      key = (accepted.leftCols(accepted_count).transpose() * unit(Eigen::all, rejected)).colwise().maxCoeff().transpose();
    std::vector<std::size_t> pos(rejected.size());
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    std::stable_sort(pos.begin(), pos.end(), [&](auto a, auto b) {
      return key(static_cast<Eigen::Index>(a)) < key(static_cast<Eigen::Index>(b));
    });
    for (std::size_t p : pos) {
      if (count == n_atoms) break;
      accepted.col(count++) = unit.col(rejected[p]);
    }
  }
  d.atoms = accepted.leftCols(count);
  d.appended_count = static_cast<int>(count - accepted_count);
  return d;
}

Dictionary learn(const Matrix& features, const LearnParams& params,
                 const std::vector<const Dictionary*>& prior) {
  switch (params.method) {
    case LearnMethod::Random: return learn_random(features, params.n_atoms, params.seed);
    case LearnMethod::KMeans:
      return learn_kmeans(features, params.n_atoms, params.seed,
                          params.max_iters > 0 ? params.max_iters : kDefaultKMeansIters);
    case LearnMethod::KMedoid:
      return learn_kmedoid(features, params.n_atoms, params.seed,
                           params.max_iters > 0 ? params.max_iters : kDefaultKMedoidIters);
    case LearnMethod::Tdcs:
      return learn_tdcs(features, params.n_atoms, params.t_within, params.t_between, prior, params.seed);
  }
  throw UsageError("unknown learning method");
}

Dictionary update_dictionary(const Dictionary& old, const Matrix& new_features,
                             const std::vector<const Dictionary*>& prior) {
  if (new_features.cols() > 0 && new_features.rows() != old.dim())
    throw DataError("dimension mismatch: update features have " + std::to_string(new_features.rows()) +
                    " bins, dictionary has " + std::to_string(old.dim()));
  const Matrix pool = hconcat({&old.atoms, &new_features});
  LearnParams params = old.params;
  params.n_atoms = static_cast<int>(std::min<Eigen::Index>(params.n_atoms, pool.cols()));
  Dictionary updated = learn(pool, params, prior);
  updated.params.n_atoms = old.params.n_atoms;
  updated.source_label = old.source_label;
  return updated;
}

}  // namespace sparsescene
