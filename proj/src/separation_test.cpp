#include <gtest/gtest.h>

#include <random>

#include "sparsescene/error.hpp"
#include "sparsescene/separation.hpp"
#include "test_util.hpp"

namespace sparsescene {
namespace {

using testing::band_noise;
using testing::harmonic_bursts;
using testing::random_nonneg;

Dictionary support_dict(Eigen::Index bins, Eigen::Index first, Eigen::Index width, int atoms, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dictionary d;
  d.atoms = Matrix::Zero(bins, atoms);
  d.atoms.middleRows(first, width) = random_nonneg(width, atoms, rng) + Matrix::Constant(width, atoms, 0.05);
  d.atoms = normalize_columns(d.atoms);
  return d;
}

FeatureMatrix frames_only(const Matrix& frames) {
  FeatureMatrix fm;
  fm.frame_length = 960;
  fm.hop = 240;
  fm.fft_size = 1024;
  fm.frames = frames;
  return fm;
}

std::vector<double> flat(const Matrix& m) { return {m.data(), m.data() + m.size()}; }

TEST(SeparateFeatures, DisjointAtomsSplitExactly) {
  const auto noise = support_dict(40, 0, 15, 3, 1), speech = support_dict(40, 20, 20, 4, 2);
  Matrix true_sp(40, 6), true_ns(40, 6);
  for (Eigen::Index j = 0; j < 6; ++j) {
    true_sp.col(j) = (0.5 + j) * speech.atoms.col(j % 4);
    true_ns.col(j) = (2.0 - 0.2 * j) * noise.atoms.col(j % 3);
  }
  const auto [sp, ns] = separate_features(frames_only(true_sp + true_ns), {0, 6}, noise, speech);
  EXPECT_GE(sdr(flat(true_sp), flat(sp)), 60.0);
  EXPECT_GE(sdr(flat(true_ns), flat(ns)), 60.0);
}

TEST(SeparateFeatures, SpeechFreeFramesGiveNoSpeech) {
  const auto noise = support_dict(40, 0, 15, 5, 3), speech = support_dict(40, 20, 20, 5, 4);
  std::mt19937_64 rng(5);
  const Matrix y = noise.atoms * random_nonneg(5, 30, rng);
  const auto [sp, ns] = separate_features(frames_only(y), {0, 30}, noise, speech);
  EXPECT_LE(sp.norm(), 1e-3 * y.norm());
}

TEST(SeparateFeatures, PartsAddUpToSolverReconstruction) {
  std::mt19937_64 rng(6);
  Dictionary noise, speech;
  noise.atoms = testing::random_atoms(30, 8, rng);
  speech.atoms = testing::random_atoms(30, 10, rng);
  const Matrix y = random_nonneg(30, 12, rng);
  const auto [sp, ns] = separate_features(frames_only(y), {0, 12}, noise, speech);
  const auto D = std::make_shared<const Matrix>(hconcat({&noise.atoms, &speech.atoms}));
  for (Eigen::Index j = 0; j < 12; ++j) {
    const auto sol = solve_asna(make_problem(D, y.col(j), {}));
    EXPECT_LE((sp.col(j) + ns.col(j) - *D * sol.weights).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GE(sp.minCoeff(), 0.0);
    EXPECT_GE(ns.minCoeff(), 0.0);
  }
}

TEST(SeparateFeatures, FailedFrameGoesToNoise) {
  const auto noise = support_dict(20, 0, 10, 2, 7), speech = support_dict(20, 10, 10, 2, 8);
  Matrix y = Matrix::Zero(20, 3);
  y.col(1) = speech.atoms.col(0);
  std::vector<Eigen::Index> failed;
  const auto [sp, ns] = separate_features(frames_only(y), {0, 3}, noise, speech, {}, &failed);
  EXPECT_EQ(failed, (std::vector<Eigen::Index>{0, 2}));
  EXPECT_EQ(sp.col(0).norm(), 0.0);
  EXPECT_NEAR((sp.col(1) - y.col(1)).norm(), 0.0, 1e-9);
}

TEST(SeparateFeatures, DimensionMismatchThrows) {
  const auto noise = support_dict(20, 0, 10, 2, 7), speech = support_dict(21, 10, 10, 2, 8);
  EXPECT_THROW(separate_features(frames_only(Matrix::Ones(20, 2)), {0, 2}, noise, speech), DataError);
}

class ZeroDbMixture : public ::testing::TestWithParam<int> {};

TEST_P(ZeroDbMixture, SeparationGainsThreeDecibels) {
  const int trial = GetParam();
  const std::size_t sr = kCanonicalRate;
  std::mt19937_64 rng(100 + trial);
  std::uniform_real_distribution<double> f0(130.0, 170.0);

  // Training material with a different seed and f0 than the test mixture.
  AudioSignal train_speech;
  for (int u = 0; u < 6; ++u) {
    const auto part = harmonic_bursts(2 * sr, f0(rng), {{0.0, 2.0}});
    train_speech.samples.insert(train_speech.samples.end(), part.samples.begin(), part.samples.end());
  }
  Dictionary speaker = learn_kmeans(prune_low_energy(extract_features(train_speech)).frames, 32, trial + 1);
  Dictionary noise = learn_kmeans(extract_features(band_noise(10 * sr, 100, 5000, 900 + trial)).frames, 32, trial + 1);

  const std::size_t n = 6 * sr;
  const auto speech = harmonic_bursts(n, f0(rng), {{1.0, 2.6}, {3.5, 5.2}});
  auto background = band_noise(n, 100, 5000, 500 + trial);
  SampleMask mask{{sr, static_cast<std::size_t>(2.6 * sr)}, {static_cast<std::size_t>(3.5 * sr), static_cast<std::size_t>(5.2 * sr)}};
  double es = 0.0, en = 0.0;
  for (const auto& [a, b] : mask)
    for (std::size_t i = a; i < b; ++i) {
      es += speech.samples[i] * speech.samples[i];
      en += background.samples[i] * background.samples[i];
    }
  const double gain = std::sqrt(es / en);
  AudioSignal mixed;
  mixed.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) mixed.samples[i] = speech.samples[i] + gain * background.samples[i];

  const auto fm = extract_features(mixed, {}, true);
  const auto result = separate(mixed, fm, noise, speaker);
  const double input_snr = sdr(speech, mixed, mask);
  EXPECT_NEAR(input_snr, 0.0, 0.5);
  EXPECT_GE(sdr(speech, result.speech, mask), input_snr + 3.0);
  for (std::size_t i = 0; i < n; ++i)
    ASSERT_NEAR(result.speech.samples[i] + result.noise.samples[i], mixed.samples[i], 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Trials, ZeroDbMixture, ::testing::Range(0, 3));

TEST(Separate, RequiresPhase) {
  const auto noise = support_dict(513, 0, 100, 2, 1), speech = support_dict(513, 200, 100, 2, 2);
  const auto signal = band_noise(8000, 200, 900, 3);
  EXPECT_THROW(separate(signal, extract_features(signal), noise, speech), DataError);
}

TEST(Sdr, Examples) {
  const std::vector<double> s{0.5, -1.0, 2.0, 0.25};
  EXPECT_EQ(sdr(s, s), kSdrCapDb);
  std::vector<double> half, zero(4, 0.0);
  for (double v : s) half.push_back(0.5 * v);
  EXPECT_NEAR(sdr(s, half), 20.0 * std::log10(2.0), 1e-12);
  EXPECT_NEAR(sdr(s, half), 6.0206, 1e-4);
  EXPECT_NEAR(sdr(s, zero), 0.0, 1e-12);
}

TEST(Sdr, PeaksAtUnitGain) {
  const auto s = band_noise(4000, 100, 3000, 9).samples;
  double best = -1e9, best_alpha = 0.0;
  for (double alpha : {0.25, 0.5, 1.0, 2.0}) {
    std::vector<double> e;
    for (double v : s) e.push_back(alpha * v);
    const double value = sdr(s, e);
    if (value > best) {
      best = value;
      best_alpha = alpha;
    }
  }
  EXPECT_EQ(best_alpha, 1.0);
}

TEST(Sdr, MaskRestrictsRegion) {
  const std::vector<double> s{1, 1, 1, 1}, e{1, 1, 0, 0};
  EXPECT_EQ(sdr(s, e, {{0, 2}}), kSdrCapDb);
  EXPECT_NEAR(sdr(s, e, {{0, 4}}), 10.0 * std::log10(2.0), 1e-12);
}

TEST(Sdr, LengthMismatchAndSilentReferenceThrow) {
  EXPECT_THROW(sdr(std::vector<double>{1, 2}, std::vector<double>{1}), DataError);
  EXPECT_THROW(sdr(std::vector<double>{0, 0}, std::vector<double>{1, 1}), DataError);
}

TEST(SegmentalSnrError, ExactEstimateHasNoError) {
  std::mt19937_64 rng(10);
  const Matrix sp = random_nonneg(8, 20, rng), ns = random_nonneg(8, 20, rng);
  const auto e = segmental_snr_error(sp, ns, sp, ns, {{0, 10}, {12, 20}});
  EXPECT_NEAR(e.mean_abs_db, 0.0, 1e-12);
  EXPECT_NEAR(e.std_db, 0.0, 1e-12);
}

TEST(SegmentalSnrError, DoubledSpeechEnergy) {
  std::mt19937_64 rng(11);
  const Matrix sp = random_nonneg(8, 10, rng), ns = random_nonneg(8, 10, rng);
  const auto e = segmental_snr_error(sp, ns, std::sqrt(2.0) * sp, ns, {{0, 10}});
  ASSERT_EQ(e.per_segment_db.size(), 1u);
  EXPECT_NEAR(e.per_segment_db[0], -10.0 * std::log10(2.0), 1e-12);
  EXPECT_NEAR(e.mean_abs_db, 3.0103, 1e-4);
  EXPECT_EQ(e.std_db, 0.0);
}

TEST(SegmentalSnrError, TwoSegmentsPlusMinusTwo) {
  // Segment errors of +2 dB and -2 dB by scaling the estimated noise energy.
  const Matrix sp = Matrix::Ones(4, 4), ns = Matrix::Ones(4, 4);
  Matrix est_ns = ns;
  est_ns.leftCols(2) *= std::pow(10.0, 2.0 / 20.0);
  est_ns.rightCols(2) *= std::pow(10.0, -2.0 / 20.0);
  const auto e = segmental_snr_error(sp, ns, sp, est_ns, {{0, 2}, {2, 4}});
  EXPECT_NEAR(e.per_segment_db[0], 2.0, 1e-12);
  EXPECT_NEAR(e.per_segment_db[1], -2.0, 1e-12);
  EXPECT_NEAR(e.mean_abs_db, 2.0, 1e-12);
  EXPECT_NEAR(e.std_db, 2.0 * std::sqrt(2.0), 1e-12);
}

TEST(SegmentalSnrError, ZeroEnergySegmentIsSkipped) {
  Matrix sp = Matrix::Ones(3, 4), ns = Matrix::Ones(3, 4);
  Matrix est_sp = sp;
  est_sp.leftCols(2).setZero();
  const auto e = segmental_snr_error(sp, ns, est_sp, ns, {{0, 2}, {2, 4}});
  EXPECT_EQ(e.skipped, 1);
  EXPECT_EQ(e.per_segment_db.size(), 1u);
  EXPECT_THROW(segmental_snr_error(sp, ns, est_sp, Matrix::Ones(3, 5), {{0, 2}}), DataError);
}

TEST(LocalMaxima, EdgesNeverCountAndPlateausDoNot) {
  EXPECT_EQ(local_maxima({5, 1, 3, 1, 2, 2, 1, 9}, {0, 8}), (std::vector<Eigen::Index>{2}));
  EXPECT_TRUE(local_maxima({1, 2, 3, 4, 5}, {0, 5}).empty());
}

TEST(KMeans1d, EquispacedStartAndConvergence) {
  const auto km = kmeans_1d({1.0, 1.2, 0.8, 10.0, 10.4}, 2);
  EXPECT_NEAR(km.centroids[0], 1.0, 1e-12);
  EXPECT_NEAR(km.centroids[1], 10.2, 1e-12);
  EXPECT_EQ(km.assignment, (std::vector<int>{0, 0, 0, 1, 1}));
}

TEST(KMeans1d, EmptyClusterIsReseededDeterministically) {
  // Start 0, 3, 6, 9: the middle centroids attract nothing at first.
  const std::vector<double> v{0.0, 0.5, 8.0, 9.0};
  const auto a = kmeans_1d(v, 4), b = kmeans_1d(v, 4);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.assignment, b.assignment);
  std::vector<int> used = a.assignment;
  std::sort(used.begin(), used.end());
  EXPECT_EQ(std::unique(used.begin(), used.end()) - used.begin(), 4);
}

TEST(DetectSpeech, SingleTallPeak) {
  std::vector<double> e(40, 1.0);
  for (std::size_t i = 0; i < e.size(); i += 2) e[i] = 1.1;  // flat ripple
  e[17] = 50.0;
  const auto seg = detect_speech_segments(e, {{0, 40}}, 2);
  EXPECT_EQ(seg.cluster_frames, (std::vector<Eigen::Index>{17}));
  EXPECT_FALSE(seg.reduced);
}

TEST(DetectSpeech, MonotoneEnergiesAreFlagged) {
  std::vector<double> e;
  for (int i = 0; i < 30; ++i) e.push_back(i);
  const auto seg = detect_speech_segments(e, {{0, 30}}, 2);
  EXPECT_TRUE(seg.cluster_frames.empty());
  EXPECT_TRUE(seg.reduced);
  EXPECT_EQ(seg.k_used, (std::vector<int>{0}));
}

TEST(DetectSpeech, TwoBurstsOverNoise) {
  const std::size_t sr = kCanonicalRate;
  const std::vector<std::pair<double, double>> bursts{{1.0, 2.2}, {3.4, 4.6}};
  const auto speech = harmonic_bursts(6 * sr, 150.0, bursts);
  auto mixed = band_noise(6 * sr, 100, 6000, 31, 48, 0.02);
  for (std::size_t i = 0; i < mixed.samples.size(); ++i) mixed.samples[i] += speech.samples[i];
  const auto fm = extract_features(mixed);
  const auto n = fm.num_frames();
  for (int k : {2, 4}) {
    const auto seg = detect_speech_segments(fm.frame_energies, {{0, n / 2}, {n / 2, n}}, k);
    ASSERT_FALSE(seg.cluster_frames.empty());
    const auto maxima = local_maxima(fm.frame_energies, {0, n});
    for (auto f : seg.cluster_frames) {
      const double t = fm.frame_time(f);
      EXPECT_TRUE((t >= 1.0 && t <= 2.2) || (t >= 3.4 && t <= 4.6)) << "k=" << k << " frame " << f;
      EXPECT_TRUE(std::binary_search(maxima.begin(), maxima.end(), f));
    }
    const auto rates = miss_false_rates(seg.cluster_frames, bursts, fm.hop, fm.frame_length);
    EXPECT_EQ(rates.false_alarm_rate, 0.0);
  }
}

TEST(MissFalseRates, Examples) {
  // Frame midpoints at (i * 240 + 480) / 16000 s: frame 100 -> 1.53 s.
  const std::vector<std::pair<double, double>> iv{{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}, {7.0, 8.0}};
  const auto hit = miss_false_rates({100, 230, 365, 498}, iv, 240, 960);
  EXPECT_EQ(hit.miss_rate, 0.0);
  EXPECT_EQ(hit.false_alarm_rate, 0.0);
  EXPECT_EQ(miss_false_rates({}, iv, 240, 960).miss_rate, 100.0);
  EXPECT_TRUE(miss_false_rates({}, iv, 240, 960).no_cluster_frames);
  const auto far = miss_false_rates({100, 101, 170}, {{1.0, 2.0}}, 240, 960);
  EXPECT_NEAR(far.false_alarm_rate, 100.0 / 3.0, 1e-12);
  EXPECT_TRUE(miss_false_rates({1}, {}, 240, 960).no_segments);
}

TEST(MissFalseRates, InvariantToCommonShift) {
  const std::vector<Eigen::Index> frames{10, 90, 95, 300, 520};
  const std::vector<std::pair<double, double>> iv{{0.5, 1.5}, {4.0, 5.0}, {7.0, 7.5}};
  const auto base = miss_false_rates(frames, iv, 240, 960);
  for (int shift : {16, 200, 1000}) {
    std::vector<Eigen::Index> f2;
    for (auto f : frames) f2.push_back(f + shift);
    std::vector<std::pair<double, double>> iv2;
    const double dt = shift * 240.0 / 16000.0;
    for (const auto& [a, b] : iv) iv2.emplace_back(a + dt, b + dt);
    const auto moved = miss_false_rates(f2, iv2, 240, 960);
    EXPECT_EQ(moved.miss_rate, base.miss_rate);
    EXPECT_EQ(moved.false_alarm_rate, base.false_alarm_rate);
  }
}

}  // namespace
}  // namespace sparsescene
