#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sparsescene/harness.hpp"

namespace sparsescene {

inline constexpr int kReportSchemaVersion = 1;

/// Column names of the per-run CSV, in file order.
const std::vector<std::string>& csv_columns();
std::string csv_header();
std::string to_csv_row(const EvaluationReport& report);

/// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv_row(const std::string& line);

/// Aggregate tables over parsed CSV rows (split_csv_row output). Booleans
/// are averaged as 0/1, NaN cells are skipped.
nlohmann::json aggregate_rows(const std::vector<std::vector<std::string>>& rows);

struct Manifest {
  std::string corpus = "synthetic:1";  // directory or synthetic:SEED
  std::string bank;                    // empty: learn from the corpus
  LearnParams learn{LearnMethod::KMeans, 32, 1, 0.9, 0.9, 0};
  std::vector<Regime> regimes{Regime::Complete};
  std::vector<double> snrs{-10.0, 0.0, 10.0, 20.0};
  std::uint64_t seed = 1;     // scenario generator seed
  int repeats = 1;            // scenario lists drawn with seed, seed + 1, ...
  std::vector<int> scenarios;  // indices to keep; empty keeps all
  std::filesystem::path out;
  unsigned parallelism = 1;
  SnrReference snr_reference = SnrReference::SpeechActive;
  Stage stop_after = Stage::Full;
  double test_seconds = 20.0;
  ScenarioParams scenario_params;

  /// Throws UsageError or DataError (missing paths).
  void validate() const;
};

/// Plain key = value lines; '#' starts a comment. Unknown keys are errors.
Manifest parse_manifest(const std::string& text);
Manifest read_manifest(const std::filesystem::path& path);

/// Scenario list of a manifest, before SNR and regime expansion.
std::vector<MixScenario> manifest_scenarios(const Manifest& manifest, const Corpus& corpus);

struct ManifestSummary {
  int rows = 0;
  int computed = 0;
  int reused = 0;  // found in an earlier runs.csv
  int failed = 0;
  std::filesystem::path csv_path, json_path;
};

/// Runs scenarios x SNRs x regimes and writes out/runs.csv and
/// out/aggregate.json. Rows already present in runs.csv are kept and not
/// recomputed. Throws DataError when no row results.
ManifestSummary run_manifest(const Manifest& manifest, const Corpus& corpus, const DictionaryBank& bank);

/// Loads the corpus and bank named by the manifest (learning the bank when
/// none is given) and runs it.
ManifestSummary run_manifest(const Manifest& manifest);

/// Writes the mixture and ground-truth components of every scenario and SNR
/// as WAV files plus scenes.json. Returns the number of scenes written.
int write_scenes(const Manifest& manifest, const Corpus& corpus, const std::filesystem::path& out);

}  // namespace sparsescene
