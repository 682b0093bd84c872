#include "sparsescene/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "sparsescene/error.hpp"
#include "sparsescene/parallel.hpp"

namespace fs = std::filesystem;

namespace sparsescene {

namespace {

std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  // Avoid "-0.000000" so equal values always print the same way.
  if (std::string(buf) == "-0.000000") return "0.000000";
  return buf;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + "\"";
}

std::string trim(std::string s) {
  s.erase(0, s.find_first_not_of(" \t\r"));
  s.erase(s.find_last_not_of(" \t\r") + 1);
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::logic_error&) {
    throw UsageError("manifest: '" + key + "' expects a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::logic_error&) {
    throw UsageError("manifest: '" + key + "' expects an integer, got '" + v + "'");
  }
}

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::Segmentation: return "segmentation";
    case Stage::Identification: return "identification";
    case Stage::Full: return "full";
  }
  return "full";
}

std::string method_label(const LearnParams& p) {
  if (p.method != LearnMethod::Tdcs) return to_string(p.method);
  char buf[64];
  std::snprintf(buf, sizeof buf, "tdcs-%g-%g", p.t_within, p.t_between);
  return buf;
}

// Running mean that ignores NaN cells.
struct Mean {
  double sum = 0.0, sq = 0.0;
  int n = 0;
  void add(double v) {
    if (std::isnan(v)) return;
    sum += v;
    sq += v * v;
    ++n;
  }
  nlohmann::json mean() const { return n ? nlohmann::json(sum / n) : nlohmann::json(nullptr); }
  nlohmann::json stdev() const {
    if (n < 2) return nullptr;
    const double m = sum / n;
    return std::sqrt(std::max(0.0, (sq - n * m * m) / (n - 1)));
  }
};

}  // namespace

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "schema_version", "run_id", "scenario", "method", "regime", "snr_db", "noise_a", "noise_b", "speaker_a",
      "speaker_b", "transition_s", "utterance_a", "start_a_s", "utterance_b", "start_b_s", "est_noise_1",
      "est_noise_2", "noise_correct_1", "noise_correct_2", "est_transition_s", "transition_error_s", "degenerate",
      "est_speaker_1", "est_speaker_2", "speaker_correct_1", "speaker_correct_2", "speaker_top3_1",
      "speaker_top3_2", "low_confidence_1", "low_confidence_2", "sdr_db", "input_sdr_db", "snr_error_mean_abs_db",
      "snr_error_std_db", "mr_k2", "far_k2", "mr_k4", "far_k4", "failed_frames", "stages", "status",
      "failed_stage", "message"};
  return cols;
}

std::string csv_header() {
  std::string out;
  for (const auto& c : csv_columns()) out += (out.empty() ? "" : ",") + c;
  return out;
}

std::string to_csv_row(const EvaluationReport& r) {
  const auto& sc = r.scenario;
  const auto b = [](bool v) { return std::string(v ? "1" : "0"); };
  const auto placement = [&](std::size_t i, bool start) {
    if (i >= sc.placements.size()) return std::string("nan");
    return start ? fmt_num(sc.placements[i].start_s) : std::to_string(sc.placements[i].utterance);
  };
  const std::vector<std::string> cells{std::to_string(kReportSchemaVersion),
                                       r.run_id,
                                       std::to_string(sc.index),
                                       r.method,
                                       to_string(r.regime),
                                       fmt_num(sc.snr_db),
                                       sc.noise_a,
                                       sc.noise_b,
                                       sc.speaker_a,
                                       sc.speaker_b,
                                       fmt_num(sc.transition_s),
                                       placement(0, false),
                                       placement(0, true),
                                       placement(1, false),
                                       placement(1, true),
                                       r.est_noise_1,
                                       r.est_noise_2,
                                       b(r.noise_correct_1),
                                       b(r.noise_correct_2),
                                       fmt_num(r.est_transition_s),
                                       fmt_num(r.transition_error_s),
                                       b(r.degenerate),
                                       r.est_speaker_1,
                                       r.est_speaker_2,
                                       b(r.speaker_correct_1),
                                       b(r.speaker_correct_2),
                                       b(r.speaker_top3_1),
                                       b(r.speaker_top3_2),
                                       b(r.low_confidence_1),
                                       b(r.low_confidence_2),
                                       fmt_num(r.sdr_db),
                                       fmt_num(r.input_sdr_db),
                                       fmt_num(r.snr_error_mean_abs_db),
                                       fmt_num(r.snr_error_std_db),
                                       fmt_num(r.mr_k2),
                                       fmt_num(r.far_k2),
                                       fmt_num(r.mr_k4),
                                       fmt_num(r.far_k4),
                                       std::to_string(r.failed_frames),
                                       stage_name(r.completed),
                                       r.ok() ? "ok" : "failed",
                                       r.failed_stage,
                                       r.message};
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + quote(cells[i]);
  return out;
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cells.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back();
    } else if (c != '\r') {
      cells.back() += c;
    }
  }
  return cells;
}

nlohmann::json aggregate_rows(const std::vector<std::vector<std::string>>& rows) {
  const auto& cols = csv_columns();
  std::map<std::string, std::size_t> at;
  for (std::size_t i = 0; i < cols.size(); ++i) at[cols[i]] = i;
  const auto num = [](const std::string& s) { return s == "nan" ? std::nan("") : std::stod(s); };

  std::map<std::string, std::map<std::string, Mean>> noise_acc, speaker_top1, speaker_top3, sdr_by, snr_err, trans;
  std::map<std::string, Mean> det;
  int ok = 0, failed = 0;
  for (const auto& row : rows) {
    if (row.size() != cols.size()) throw DataError("report row has " + std::to_string(row.size()) + " cells");
    const auto cell = [&](const char* name) -> const std::string& { return row[at.at(name)]; };
    if (cell("status") != "ok") {
      ++failed;
      continue;
    }
    ++ok;
    const std::string method = cell("method"), regime = cell("regime"), snr = cell("snr_db");
    for (const char* c : {"noise_correct_1", "noise_correct_2"}) noise_acc[method][regime].add(num(cell(c)));
    trans[method][regime].add(num(cell("transition_error_s")));
    const std::string stages = cell("stages");
    if (stages == "segmentation") continue;
    for (const char* c : {"speaker_correct_1", "speaker_correct_2"}) speaker_top1[regime][snr].add(num(cell(c)));
    for (const char* c : {"speaker_top3_1", "speaker_top3_2"}) speaker_top3[regime][snr].add(num(cell(c)));
    if (stages == "identification") continue;
    sdr_by[regime][snr].add(num(cell("sdr_db")));
    snr_err[regime][snr].add(num(cell("snr_error_mean_abs_db")));
    for (const char* c : {"mr_k2", "far_k2", "mr_k4", "far_k4"}) det[c].add(num(cell(c)));
  }

  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["runs"] = ok + failed;
  j["failed_runs"] = failed;
  const auto table = [](const std::map<std::string, std::map<std::string, Mean>>& t) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k1, inner] : t)
      for (const auto& [k2, m] : inner) out[k1][k2] = m.mean();
    return out;
  };
  j["noise_accuracy"] = table(noise_acc);
  j["speaker_top1_accuracy"] = table(speaker_top1);
  j["speaker_top3_accuracy"] = table(speaker_top3);
  j["sdr_db"] = table(sdr_by);
  j["snr_error_mean_abs_db"] = table(snr_err);
  nlohmann::json te = nlohmann::json::object();
  for (const auto& [method, inner] : trans)
    for (const auto& [regime, m] : inner) te[method][regime] = {{"mean_abs_s", m.mean()}, {"std_s", m.stdev()}, {"n", m.n}};
  j["transition_error"] = te;
  nlohmann::json d = nlohmann::json::object();
  for (const auto& [k, m] : det) d[k] = m.mean();
  j["detection"] = d;
  return j;
}

void Manifest::validate() const {
  if (out.empty()) throw UsageError("manifest: output directory not set");
  if (regimes.empty()) throw UsageError("manifest: no regimes");
  if (snrs.empty()) throw UsageError("manifest: no SNR values");
  if (repeats < 1) throw UsageError("manifest: repeats must be at least 1");
  if (learn.n_atoms < 1) throw UsageError("manifest: atoms must be positive");
  if (corpus.rfind("synthetic:", 0) != 0 && !fs::is_directory(corpus))
    throw DataError("manifest: corpus directory not found: " + corpus);
  if (!bank.empty() && !fs::is_regular_file(bank)) throw DataError("manifest: bank file not found: " + bank);
}

Manifest parse_manifest(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError("manifest line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "corpus") m.corpus = value;
    else if (key == "bank") m.bank = value;
    else if (key == "method") m.learn.method = parse_method(value);
    else if (key == "atoms") m.learn.n_atoms = static_cast<int>(to_int(key, value));
    else if (key == "tw") m.learn.t_within = to_double(key, value);
    else if (key == "tb") m.learn.t_between = to_double(key, value);
    else if (key == "learn_seed") m.learn.seed = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "regimes") m.regimes = parse_regimes(value);
    else if (key == "snr") {
      m.snrs.clear();
      for (const auto& v : split_list(value)) m.snrs.push_back(to_double(key, v));
    } else if (key == "seed") m.seed = static_cast<std::uint64_t>(to_int(key, value));
    else if (key == "repeats") m.repeats = static_cast<int>(to_int(key, value));
    else if (key == "scenarios") {
      m.scenarios.clear();
      if (value != "all")
        for (const auto& v : split_list(value)) m.scenarios.push_back(static_cast<int>(to_int(key, v)));
    } else if (key == "out") m.out = value;
    else if (key == "parallelism") m.parallelism = static_cast<unsigned>(std::max(0LL, to_int(key, value)));
    else if (key == "snr_reference") {
      if (value == "speech") m.snr_reference = SnrReference::SpeechActive;
      else if (value == "segment") m.snr_reference = SnrReference::WholeSegment;
      else throw UsageError("manifest: snr_reference must be speech or segment");
    } else if (key == "stages") {
      if (value == "segmentation") m.stop_after = Stage::Segmentation;
      else if (value == "identification") m.stop_after = Stage::Identification;
      else if (value == "full") m.stop_after = Stage::Full;
      else throw UsageError("manifest: stages must be segmentation, identification or full");
    } else if (key == "test_seconds") m.test_seconds = to_double(key, value);
    else if (key == "max_utterance_s") m.scenario_params.max_utterance_s = to_double(key, value);
    else throw UsageError("manifest line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  return m;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read manifest: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  auto m = parse_manifest(ss.str());
  // Relative paths are taken from the manifest's directory.
  const auto base = path.parent_path();
  const auto rebase = [&](std::string& p) {
    if (!p.empty() && p.rfind("synthetic:", 0) != 0 && fs::path(p).is_relative()) p = (base / p).string();
  };
  rebase(m.corpus);
  rebase(m.bank);
  if (!m.out.empty() && m.out.is_relative()) m.out = base / m.out;
  return m;
}

std::vector<MixScenario> manifest_scenarios(const Manifest& manifest, const Corpus& corpus) {
  std::vector<MixScenario> all;
  for (int r = 0; r < manifest.repeats; ++r) {
    auto batch = build_scenarios(corpus.noise_labels(), corpus.speaker_labels(),
                                 manifest.seed + static_cast<std::uint64_t>(r), manifest.scenario_params);
    for (auto& sc : batch) {
      sc.index = static_cast<int>(all.size());
      all.push_back(std::move(sc));
    }
  }
  if (manifest.scenarios.empty()) return all;
  std::vector<MixScenario> keep;
  for (int i : manifest.scenarios) {
    if (i < 0 || static_cast<std::size_t>(i) >= all.size())
      throw UsageError("manifest: scenario index " + std::to_string(i) + " out of range (" +
                       std::to_string(all.size()) + " scenarios)");
    keep.push_back(all[static_cast<std::size_t>(i)]);
  }
  return keep;
}

ManifestSummary run_manifest(const Manifest& manifest, const Corpus& corpus, const DictionaryBank& bank) {
  if (manifest.out.empty()) throw UsageError("manifest: output directory not set");
  fs::create_directories(manifest.out);
  ManifestSummary summary;
  summary.csv_path = manifest.out / "runs.csv";
  summary.json_path = manifest.out / "aggregate.json";

  RunParams params;
  params.snr_reference = manifest.snr_reference;
  params.stop_after = manifest.stop_after;
  params.max_utterance_s = manifest.scenario_params.max_utterance_s;
  params.method = bank.noise.empty() ? method_label(manifest.learn) : method_label(bank.noise.front().params);

  struct Job {
    MixScenario scenario;
    Regime regime;
    std::string id;
  };
  std::vector<Job> jobs;
  for (const auto& base : manifest_scenarios(manifest, corpus))
    for (double snr : manifest.snrs)
      for (Regime regime : manifest.regimes) {
        MixScenario sc = base;
        sc.snr_db = snr;
        jobs.push_back({sc, regime, run_id(sc, regime, params.method)});
      }

  // Rows from an earlier, possibly interrupted, run of the same manifest.
  std::map<std::string, std::string> done;
  if (fs::exists(summary.csv_path)) {
    std::ifstream f(summary.csv_path);
    std::string line;
    if (std::getline(f, line) && line != csv_header())
      throw DataError("existing " + summary.csv_path.string() + " has a different column layout");
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      const auto cells = split_csv_row(line);
      // A torn final line from an interrupted write is simply recomputed.
      if (cells.size() == csv_columns().size()) done[cells[1]] = line;
    }
  }

  std::vector<std::string> lines(jobs.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (auto it = done.find(jobs[i].id); it != done.end()) {
      lines[i] = it->second;
      ++summary.reused;
    } else {
      pending.push_back(i);
    }
  }

  {
    const bool fresh = !fs::exists(summary.csv_path);
    std::ofstream sink(summary.csv_path, std::ios::app);
    if (!sink) throw DataError("cannot write " + summary.csv_path.string());
    if (fresh) sink << csv_header() << '\n' << std::flush;
    std::mutex sink_mutex;
    parallel_for(
        pending.size(),
        [&](std::size_t k) {
          const auto& job = jobs[pending[k]];
          const auto report = run_scenario(job.scenario, corpus, bank, job.regime, params);
          auto row = to_csv_row(report);
          std::lock_guard lock(sink_mutex);
          sink << row << '\n' << std::flush;
          lines[pending[k]] = std::move(row);
        },
        manifest.parallelism);
  }
  summary.computed = static_cast<int>(pending.size());

  // Rewrite in job order so the file does not depend on completion order.
  std::vector<std::vector<std::string>> rows;
  {
    const auto tmp = summary.csv_path.string() + ".tmp";
    std::ofstream f(tmp, std::ios::trunc);
    f << csv_header() << '\n';
    for (const auto& l : lines) {
      f << l << '\n';
      rows.push_back(split_csv_row(l));
    }
    f.close();
    if (!f) throw DataError("cannot write " + tmp);
    fs::rename(tmp, summary.csv_path);
  }
  summary.rows = static_cast<int>(rows.size());
  for (const auto& r : rows)
    if (r[csv_columns().size() - 3] != "ok") ++summary.failed;

  std::ofstream js(summary.json_path, std::ios::trunc);
  js << aggregate_rows(rows).dump(2) << '\n';
  if (!js) throw DataError("cannot write " + summary.json_path.string());
  if (summary.rows == 0) throw DataError("manifest produced no runs");
  return summary;
}

ManifestSummary run_manifest(const Manifest& manifest) {
  manifest.validate();
  const auto corpus = open_corpus(manifest.corpus, manifest.test_seconds);
  const auto bank = manifest.bank.empty() ? learn_bank(corpus, manifest.learn) : load_bank(manifest.bank);
  return run_manifest(manifest, corpus, bank);
}

int write_scenes(const Manifest& manifest, const Corpus& corpus, const fs::path& out) {
  fs::create_directories(out);
  nlohmann::json scenes = nlohmann::json::array();
  int written = 0;
  for (const auto& base : manifest_scenarios(manifest, corpus)) {
    for (double snr : manifest.snrs) {
      MixScenario sc = base;
      sc.snr_db = snr;
      SimulatedScene scene;
      try {
        scene = simulate(sc, corpus, manifest.snr_reference, manifest.scenario_params.max_utterance_s);
      } catch (const DataError& e) {
        spdlog::warn("scenario {} at {} dB skipped: {}", sc.index, snr, e.what());
        continue;
      }
      // One gain for all three files keeps mix == speech + noise without clipping.
      double peak = 0.0;
      for (const auto* sig : {&scene.mixture, &scene.speech, &scene.noise})
        for (double v : sig->samples) peak = std::max(peak, std::abs(v));
      const double scale = peak > 0.99 ? 0.99 / peak : 1.0;
      if (scale != 1.0)
        for (auto* sig : {&scene.mixture, &scene.speech, &scene.noise})
          for (double& v : sig->samples) v *= scale;
      char stem[64];
      std::snprintf(stem, sizeof stem, "scene%03d_snr%+g", sc.index, snr);
      write_wav(out / (std::string(stem) + "_mix.wav"), scene.mixture);
      write_wav(out / (std::string(stem) + "_speech.wav"), scene.speech);
      write_wav(out / (std::string(stem) + "_noise.wav"), scene.noise);
      nlohmann::json j;
      j["name"] = stem;
      j["scenario"] = sc.index;
      j["noise"] = {sc.noise_a, sc.noise_b};
      j["speakers"] = {sc.placements[0].speaker, sc.placements[1].speaker};
      j["transition_s"] = sc.transition_s;
      j["total_s"] = sc.total_s;
      j["snr_db"] = snr;
      j["noise_gains"] = scene.noise_gains;
      j["file_scale"] = scale;
      nlohmann::json spans = nlohmann::json::array();
      for (const auto& [a, b] : scene.utterance_spans)
        spans.push_back({static_cast<double>(a) / kCanonicalRate, static_cast<double>(b) / kCanonicalRate});
      j["utterances_s"] = spans;
      scenes.push_back(j);
      ++written;
    }
  }
  std::ofstream f(out / "scenes.json");
  f << scenes.dump(2) << '\n';
  if (!f) throw DataError("cannot write " + (out / "scenes.json").string());
  return written;
}

}  // namespace sparsescene
