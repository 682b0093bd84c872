// Release checks. Prints one PASS/FAIL line per check and exits non-zero
// when any check fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "sparsescene/report.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace sparsescene;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

// Shared desk-scale setup: generated corpus, 40 two-noise scenarios.
struct Desk {
  Corpus corpus = synth_corpus(1);
  std::vector<MixScenario> scenarios;
  std::map<std::string, DictionaryBank> banks;  // by method label
  double kmeans_learn_s = 0.0;

  Desk() {
    Manifest m;
    m.seed = 1;
    m.repeats = 5;
    scenarios = manifest_scenarios(m, corpus);
  }

  const DictionaryBank& bank(const std::string& label, const LearnParams& lp) {
    auto it = banks.find(label);
    if (it == banks.end()) {
      const auto t0 = Clock::now();
      it = banks.emplace(label, learn_bank(corpus, lp)).first;
      if (label == "kmeans") kmeans_learn_s = seconds_since(t0);
    }
    return it->second;
  }
  const DictionaryBank& kmeans() { return bank("kmeans", {LearnMethod::KMeans, 32, 1, 0.9, 0.9, 0}); }

  std::vector<EvaluationReport> run(const DictionaryBank& b, Regime regime, double snr, Stage stop,
                                    const std::string& method) {
    RunParams p;
    p.stop_after = stop;
    p.method = method;
    std::vector<EvaluationReport> out;
    for (auto sc : scenarios) {
      sc.snr_db = snr;
      out.push_back(run_scenario(sc, corpus, b, regime, p));
    }
    return out;
  }
};

int failed_runs(const std::vector<EvaluationReport>& rs) {
  int n = 0;
  for (const auto& r : rs) n += !r.ok();
  return n;
}

Outcome solver_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(100);
  std::uniform_int_distribution<int> p_dist(2, 16), m_dist(1, 24);
  double worst = 0.0;
  bool nonneg = true;
  int bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int P = p_dist(rng), M = m_dist(rng);
    const Matrix D = testing::random_atoms(P, M, rng);
    const Vector y = testing::random_nonneg(P, 1, rng).col(0) + Vector::Constant(P, 0.01);
    const auto problem = make_problem(std::make_shared<const Matrix>(D), y, {});
    const auto asna = solve_asna(problem);
    const auto mu = solve_mu(problem, 200000);
    const double gap = std::abs(asna.objective - mu.objective);
    const double allowed = 1e-6 + 1e-4 * mu.objective;
    worst = std::max(worst, gap / allowed);
    bad += gap > allowed;
    nonneg = nonneg && asna.weights.minCoeff() >= 0.0 && mu.weights.minCoeff() >= 0.0;
  }
  const double t = seconds_since(t0);
  return {bad == 0 && nonneg && t < 60.0,
          fmt("100 problems, %d outside tolerance, worst gap %.3g of allowed, weights>=0 %s, %.1f s", bad, worst,
              nonneg ? "yes" : "no", t)};
}

Outcome exact_atoms() {
  std::mt19937_64 rng(200);
  std::vector<Matrix> dicts;
  std::vector<std::pair<std::string, Eigen::Index>> sizes;
  for (int k = 0; k < 5; ++k) {
    dicts.push_back(testing::random_atoms(64, 12, rng));
    sizes.emplace_back("d" + std::to_string(k), 12);
  }
  std::vector<const Matrix*> ptrs;
  for (const auto& d : dicts) ptrs.push_back(&d);
  const auto all = std::make_shared<const Matrix>(hconcat(ptrs));
  const auto blocks = blocks_for(sizes);
  int bad = 0;
  double worst_kl = 0.0, worst_other = 0.0;
  for (Eigen::Index k = 0; k < all->cols(); ++k) {
    const auto sol = solve_asna(make_problem(all, all->col(k), blocks));
    double other = 0.0;
    for (Eigen::Index j = 0; j < all->cols(); ++j)
      if (j != k) other = std::max(other, sol.weights(j));
    worst_kl = std::max(worst_kl, sol.objective);
    worst_other = std::max(worst_other, other);
    bad += !(sol.weights(k) > 1e-8 && other < 1e-8 && sol.objective <= 1e-10);
  }
  return {bad == 0, fmt("%d atoms over 5 dictionaries, %d failures, max KL %.2g, max other weight %.2g",
                        static_cast<int>(all->cols()), bad, worst_kl, worst_other)};
}

Outcome tdcs_structure(Desk& desk) {
  const auto& bank = desk.bank("tdcs-0.8-0.8", {LearnMethod::Tdcs, 32, 1, 0.8, 0.8, 0});
  std::vector<const Dictionary*> order;
  for (const auto& d : bank.noise) order.push_back(&d);
  for (const auto& d : bank.speakers) order.push_back(&d);
  double within = 0.0, between = 0.0;
  long pairs = 0;
  int appended = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& D = order[k]->atoms;
    const Eigen::Index own = D.cols() - order[k]->appended_count;
    appended += order[k]->appended_count;
    for (Eigen::Index a = 0; a < own; ++a) {
      for (Eigen::Index b = a + 1; b < own; ++b, ++pairs)
        within = std::max(within, cosine_similarity(Vector(D.col(a)), Vector(D.col(b))));
      for (std::size_t p = 0; p < k; ++p)
        for (Eigen::Index b = 0; b < order[p]->atoms.cols(); ++b, ++pairs)
          between = std::max(between, cosine_similarity(Vector(D.col(a)), Vector(order[p]->atoms.col(b))));
    }
  }
  return {within <= 0.8 && between <= 0.8,
          fmt("%ld pairs, max within %.4f, max between %.4f, %d appended atoms", pairs, within, between, appended)};
}

Outcome round_trip() {
  std::mt19937_64 rng(400);
  std::uniform_real_distribution<double> len(0.5, 6.0);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto n = static_cast<std::size_t>(len(rng) * kCanonicalRate);
    const auto x = i % 2 ? testing::white_noise(n, rng())
                         : testing::band_noise(n, 200.0, 3000.0, rng(), 40, 0.2);
    const auto fm = extract_features(x, {}, true);
    const auto y = reconstruct(fm);
    if (y.size() != x.size()) return {false, "length changed"};
    const std::size_t last = (static_cast<std::size_t>(fm.num_frames()) - 1) * static_cast<std::size_t>(fm.hop);
    worst = std::max(worst, testing::relative_l2(y.samples, x.samples, static_cast<std::size_t>(fm.frame_length), last));
  }
  return {worst <= 1e-6, fmt("20 signals, worst interior relative error %.2e", worst)};
}

Outcome transition(Desk& desk) {
  const auto t0 = Clock::now();
  const auto& bank = desk.kmeans();
  const auto rs = desk.run(bank, Regime::Complete, 0.0, Stage::Segmentation, "kmeans");
  std::vector<double> err;
  for (const auto& r : rs)
    if (r.ok()) err.push_back(std::abs(r.transition_error_s));
  const double mae = mean(err);
  const double t = seconds_since(t0) + desk.kmeans_learn_s;
  return {failed_runs(rs) == 0 && err.size() == 40 && mae <= 0.30 && t < 300.0,
          fmt("%zu scenarios at 0 dB, mean abs error %.4f s, %d failed runs, %.1f s", err.size(), mae,
              failed_runs(rs), t)};
}

Outcome noise_classification(Desk& desk) {
  const std::vector<std::pair<std::string, LearnParams>> methods{
      {"random", {LearnMethod::Random, 32, 1, 0.9, 0.9, 0}},
      {"kmeans", {LearnMethod::KMeans, 32, 1, 0.9, 0.9, 0}},
      {"kmedoid", {LearnMethod::KMedoid, 32, 1, 0.9, 0.9, 0}},
      {"tdcs-0.9-0.9", {LearnMethod::Tdcs, 32, 1, 0.9, 0.9, 0}},
      {"tdcs-0.8-0.8", {LearnMethod::Tdcs, 32, 1, 0.8, 0.8, 0}}};
  bool pass = true;
  std::string detail;
  for (const auto& [label, lp] : methods) {
    const auto rs = desk.run(desk.bank(label, lp), Regime::Complete, 0.0, Stage::Segmentation, label);
    int correct = 0;
    for (const auto& r : rs) correct += r.noise_correct_1 + r.noise_correct_2;
    const double acc = correct / (2.0 * static_cast<double>(rs.size()));
    pass = pass && failed_runs(rs) == 0 && acc >= 0.90;
    detail += fmt("%s%s %.1f%%", detail.empty() ? "" : ", ", label.c_str(), 100.0 * acc);
  }
  return {pass, detail};
}

Outcome speaker_identification(Desk& desk) {
  const auto rs = desk.run(desk.kmeans(), Regime::Complete, 10.0, Stage::Identification, "kmeans");
  int top1 = 0, top3 = 0, n = 0;
  for (const auto& r : rs) {
    top1 += r.speaker_correct_1 + r.speaker_correct_2;
    top3 += r.speaker_top3_1 + r.speaker_top3_2;
    n += 2;
  }
  const double a1 = static_cast<double>(top1) / n, a3 = static_cast<double>(top3) / n;
  return {failed_runs(rs) == 0 && a1 >= 0.80 && a3 == 1.0,
          fmt("%d segments at 10 dB, top-1 %.1f%%, top-3 %.1f%%", n, 100.0 * a1, 100.0 * a3)};
}

struct FullRuns {
  std::vector<EvaluationReport> ground_truth, oos_noise, upd_noise, oos_speaker, upd_speaker;
};

Outcome separation(const FullRuns& f) {
  std::vector<double> sdr, input, gain;
  for (const auto& r : f.ground_truth) {
    if (!r.ok()) continue;
    sdr.push_back(r.sdr_db);
    input.push_back(r.input_sdr_db);
    gain.push_back(r.sdr_db - r.input_sdr_db);
  }
  const double m_sdr = mean(sdr), m_in = mean(input);
  return {failed_runs(f.ground_truth) == 0 && m_sdr >= 0.0 + 3.0 && m_sdr >= m_in + 3.0,
          fmt("%zu ground-truth runs at 0 dB, mean SDR %.2f dB, mean input SDR %.2f dB, mean gain %.2f dB",
              sdr.size(), m_sdr, m_in, mean(gain))};
}

Outcome snr_error(const FullRuns& f) {
  std::vector<double> e;
  for (const auto& r : f.ground_truth)
    if (r.ok() && std::isfinite(r.snr_error_mean_abs_db)) e.push_back(r.snr_error_mean_abs_db);
  const double m = mean(e);
  return {e.size() == f.ground_truth.size() && m <= 4.0,
          fmt("%zu ground-truth runs at 0 dB, mean |e_SNR| %.3f dB", e.size(), m)};
}

Outcome detection_rates() {
  const std::vector<std::pair<double, double>> iv{{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}, {7.0, 8.0}};
  // Midpoints (i * 240 + 480) / 16000 s: frames 100, 230, 365, 498 fall in the four intervals.
  const auto all_hit = miss_false_rates({100, 230, 365, 498}, iv, 240, 960);
  const auto none = miss_false_rates({}, iv, 240, 960);
  // Frames 100 and 101 lie in [1, 2] s, frame 170 (2.58 s) does not.
  const auto third = miss_false_rates({100, 101, 170}, {{1.0, 2.0}}, 240, 960);
  const bool ok = all_hit.miss_rate == 0.0 && all_hit.false_alarm_rate == 0.0 && none.miss_rate == 100.0 &&
                  std::abs(third.false_alarm_rate - 100.0 / 3.0) <= 1e-12 && third.miss_rate == 0.0;
  return {ok, fmt("MR %.4f FAR %.4f | MR %.4f | FAR %.10f", all_hit.miss_rate, all_hit.false_alarm_rate, none.miss_rate,
                  third.false_alarm_rate)};
}

Outcome regime_isolation(Desk& desk, const FullRuns& f) {
  const auto& bank = desk.kmeans();
  int leaks = 0, unused = 0;
  auto check = [&](const std::vector<EvaluationReport>& rs, bool noise_removed) {
    for (const auto& r : rs) {
      const auto& reads = noise_removed ? r.noise_reads : r.speaker_reads;
      const auto a = noise_removed ? bank.noise_index(r.scenario.noise_a) : bank.speaker_index(r.scenario.speaker_a);
      const auto b = noise_removed ? bank.noise_index(r.scenario.noise_b) : bank.speaker_index(r.scenario.speaker_b);
      for (std::size_t i = 0; i < reads.size(); ++i) {
        const bool removed = static_cast<int>(i) == a || static_cast<int>(i) == b;
        if (removed && reads[i] != 0) ++leaks;
        if (!removed && reads[i] == 0) ++unused;
      }
    }
  };
  check(f.oos_noise, true);
  check(f.upd_noise, true);
  check(f.oos_speaker, false);
  check(f.upd_speaker, false);
  std::vector<double> oos, upd;
  for (const auto& r : f.oos_noise)
    if (r.ok()) oos.push_back(r.sdr_db);
  for (const auto& r : f.upd_noise)
    if (r.ok()) upd.push_back(r.sdr_db);
  const int failures = failed_runs(f.oos_noise) + failed_runs(f.upd_noise) + failed_runs(f.oos_speaker) +
                       failed_runs(f.upd_speaker);
  const double gap = mean(upd) - mean(oos);
  return {leaks == 0 && failures == 0 && gap >= 1.0,
          fmt("removed-dictionary reads %d, unread remaining dictionaries %d, SDR out-of-set noise %.2f dB, "
              "updated noise %.2f dB (+%.2f), out-of-set speaker %.2f dB, updated speaker %.2f dB, %d failed runs",
              leaks, unused, mean(oos), mean(upd), gap,
              mean([&] {
                std::vector<double> v;
                for (const auto& r : f.oos_speaker) v.push_back(r.sdr_db);
                return v;
              }()),
              mean([&] {
                std::vector<double> v;
                for (const auto& r : f.upd_speaker) v.push_back(r.sdr_db);
                return v;
              }()),
              failures)};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "sparsescene_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "run.txt") << "corpus = synthetic:9\natoms = 24\nseed = 4\nscenarios = 0, 2, 5\n"
                                     "snr = -5, 5\nregimes = complete, ground_truth, updated_noise\nparallelism = 2\n";
  std::vector<std::string> csv;
  for (const char* out : {"a", "b"}) {
    auto m = read_manifest(root / "run.txt");
    m.out = root / out;
    csv.push_back(slurp(run_manifest(m).csv_path));
  }
  const auto rows = std::count(csv[0].begin(), csv[0].end(), '\n') - 1;
  return {!csv[0].empty() && csv[0] == csv[1] && rows == 18,
          fmt("%ld rows, %zu bytes, identical %s", static_cast<long>(rows), csv[0].size(),
              csv[0] == csv[1] ? "yes" : "no")};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const auto t0 = Clock::now();
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    const auto t = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %2d %-28s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), seconds_since(t));
    std::fflush(stdout);
  };

  Desk desk;
  FullRuns full;
  report(1, "solver-oracle-equivalence", solver_oracle);
  report(2, "exact-atom-recovery", exact_atoms);
  report(3, "tdcs-structure", [&] { return tdcs_structure(desk); });
  report(4, "round-trip-audio", round_trip);
  report(5, "transition-detection", [&] { return transition(desk); });
  report(6, "noise-classification", [&] { return noise_classification(desk); });
  report(7, "speaker-identification", [&] { return speaker_identification(desk); });
  report(8, "separation-sdr", [&] {
    full.ground_truth = desk.run(desk.kmeans(), Regime::GroundTruth, 0.0, Stage::Full, "kmeans");
    return separation(full);
  });
  report(9, "segmental-snr-error", [&] { return snr_error(full); });
  report(10, "miss-and-false-alarm-rates", detection_rates);
  report(11, "regime-isolation", [&] {
    full.oos_noise = desk.run(desk.kmeans(), Regime::OutOfSetNoise, 0.0, Stage::Full, "kmeans");
    full.upd_noise = desk.run(desk.kmeans(), Regime::UpdatedNoise, 0.0, Stage::Full, "kmeans");
    full.oos_speaker = desk.run(desk.kmeans(), Regime::OutOfSetSpeaker, 0.0, Stage::Full, "kmeans");
    full.upd_speaker = desk.run(desk.kmeans(), Regime::UpdatedSpeaker, 0.0, Stage::Full, "kmeans");
    return regime_isolation(desk, full);
  });
  report(12, "determinism", determinism);

  std::printf("%d of 12 checks passed in %.1f s\n", 12 - failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
