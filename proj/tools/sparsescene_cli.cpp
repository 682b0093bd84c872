// Command-line front end: dictionary learning, scene simulation,
// classification, separation and batch evaluation.
#ifdef SPARSESCENE_CLI11_SINGLE_HEADER
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include <cctype>
#include <cstdlib>
#include <iostream>

#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sparsescene/error.hpp"
#include "sparsescene/parallel.hpp"
#include "sparsescene/report.hpp"

using namespace sparsescene;
using nlohmann::json;

namespace {

std::string env(const std::string& flag) {
  std::string name = "SPARSESCENE_";
  for (char c : flag) name += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

std::vector<std::pair<CLI::App*, CLI::Option*>> env_options;

// Adds --name with the matching SPARSESCENE_* environment fallback.
template <typename T>
CLI::Option* opt(CLI::App* app, const std::string& name, T& value, const std::string& help) {
  auto* o = app->add_option("--" + name, value, help)->envname(env(name));
  env_options.emplace_back(app, o);
  return o;
}

// CLI11 skips environment values that fail validation; treat them as errors.
void check_env_values(const CLI::App& root) {
  for (const auto& [app, o] : env_options) {
    if (app != &root && !app->parsed()) continue;
    const char* v = std::getenv(o->get_envname().c_str());
    if (v && *v && o->count() == 0)
      throw UsageError(o->get_envname() + "=" + v + " is not a valid value for " + o->get_name());
  }
}

json evidence_json(const SpeakerEvidence& ev, const DictionaryBank& bank) {
  json ranking = json::array();
  for (int i : ev.ranking) ranking.push_back(bank.speakers[static_cast<std::size_t>(i)].source_label);
  json tsw = json::object();
  for (std::size_t i = 0; i < ev.tsw.size(); ++i) tsw[bank.speakers[i].source_label] = ev.tsw[i];
  return {{"ranking", ranking},
          {"tsw", tsw},
          {"selected_frames", ev.selected_frames.size()},
          {"gated_frames", ev.gated_frames.size()},
          {"failed_frames", ev.failed_frames.size()},
          {"fac_used", ev.fac_used},
          {"fail_open", ev.fail_open},
          {"low_confidence", ev.low_confidence}};
}

json scene_json(const SceneHypothesis& h, const FeatureMatrix& fm, const DictionaryBank& bank) {
  json segs = json::array();
  for (std::size_t k = 0; k < h.segments.size(); ++k) {
    const auto& s = h.segments[k];
    segs.push_back({{"first_frame", s.begin},
                    {"end_frame", s.end},
                    {"noise", h.noise[k]},
                    {"speaker", h.speakers[k]},
                    {"speaker_evidence", evidence_json(h.evidence[k], bank)}});
  }
  json times = json::array();
  for (auto i : h.speech_frames) times.push_back(fm.frame_time(i));
  return {{"frames", fm.num_frames()},
          {"transition_frame", h.transition_frame},
          {"transition_s", h.transition_s},
          {"degenerate", h.degenerate},
          {"segments", segs},
          {"speech_frame_times_s", times}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dictionary-based noise and speaker analysis of two-party noisy recordings"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key = value file with default flag values");
  std::string log_level = "info";
  unsigned threads = 0;
  opt(&app, "log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  opt(&app, "threads", threads, "worker threads for per-frame solves (0: all cores)");

  // learn-dict
  auto* learn_cmd = app.add_subcommand("learn-dict", "learn a dictionary bank from a corpus");
  std::string corpus_spec, bank_out, method = "kmeans";
  LearnParams lp{LearnMethod::KMeans, 32, 1, 0.9, 0.9, 0};
  double test_seconds = 20.0;
  opt(learn_cmd, "corpus", corpus_spec, "corpus directory or synthetic:SEED")->required();
  opt(learn_cmd, "method", method, "learning method")
      ->check(CLI::IsMember({"random", "kmeans", "kmedoid", "tdcs"}));
  opt(learn_cmd, "tw", lp.t_within, "TDCS within-dictionary threshold");
  opt(learn_cmd, "tb", lp.t_between, "TDCS between-dictionary threshold");
  opt(learn_cmd, "atoms", lp.n_atoms, "atoms per dictionary")->check(CLI::PositiveNumber);
  opt(learn_cmd, "seed", lp.seed, "random seed");
  opt(learn_cmd, "test-seconds", test_seconds, "leading noise seconds reserved for scenes");
  opt(learn_cmd, "out", bank_out, "bank file to write")->required();

  // synth-corpus
  auto* synth_cmd = app.add_subcommand("synth-corpus", "write the generated demo corpus to disk");
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  opt(synth_cmd, "seed", synth_seed, "generator seed");
  opt(synth_cmd, "out", synth_out, "output directory")->required();

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "write the mixtures of a manifest with their components");
  std::string manifest_path, out_dir;
  opt(sim_cmd, "manifest", manifest_path, "manifest file")->required()->check(CLI::ExistingFile);
  opt(sim_cmd, "out", out_dir, "output directory")->required();

  // classify / separate
  auto* classify_cmd = app.add_subcommand("classify", "estimate noise classes, transition and speakers");
  auto* separate_cmd = app.add_subcommand("separate", "split a recording into speech and noise");
  std::string bank_path, wav_path, out_prefix;
  for (auto* cmd : {classify_cmd, separate_cmd}) {
    opt(cmd, "bank", bank_path, "dictionary bank")->required()->check(CLI::ExistingFile);
    opt(cmd, "wav", wav_path, "input recording")->required()->check(CLI::ExistingFile);
  }
  opt(separate_cmd, "out-prefix", out_prefix, "writes PREFIX_speech.wav and PREFIX_noise.wav")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "run a manifest and write per-run and aggregate reports");
  std::string regimes;
  unsigned parallelism = 0;
  opt(eval_cmd, "manifest", manifest_path, "manifest file")->required()->check(CLI::ExistingFile);
  opt(eval_cmd, "bank", bank_path, "dictionary bank (default: the manifest's, or learn one)");
  opt(eval_cmd, "regimes", regimes, "comma-separated regimes (default: the manifest's)");
  opt(eval_cmd, "out", out_dir, "output directory (default: the manifest's)");
  opt(eval_cmd, "parallelism", parallelism, "concurrent scenario runs (default: the manifest's)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::Usage);
  }

  try {
    check_env_values(app);
    spdlog::set_default_logger(spdlog::stderr_color_mt("sparsescene"));
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (threads > 0) set_thread_count(threads);

    if (*learn_cmd) {
      lp.method = parse_method(method);
      if (lp.n_atoms <= 0) throw UsageError("--atoms must be positive");
      const auto corpus = open_corpus(corpus_spec, test_seconds);
      spdlog::info("learning {} dictionaries ({} noise, {} speakers) with {}", corpus.noises.size() + corpus.speakers.size(),
                   corpus.noises.size(), corpus.speakers.size(), method);
      const auto bank = learn_bank(corpus, lp);
      save_bank(bank, bank_out);
      spdlog::info("wrote {}", bank_out);
    } else if (*synth_cmd) {
      save_corpus(synth_corpus(synth_seed), synth_out);
      spdlog::info("wrote corpus to {}", synth_out);
    } else if (*sim_cmd) {
      auto m = read_manifest(manifest_path);
      m.out = out_dir;
      const auto corpus = open_corpus(m.corpus, m.test_seconds);
      const int n = write_scenes(m, corpus, out_dir);
      spdlog::info("wrote {} scenes to {}", n, out_dir);
      if (n == 0) throw DataError("no scenes could be simulated");
    } else if (*classify_cmd || *separate_cmd) {
      const auto bank = load_bank(bank_path);
      const auto audio = read_wav(wav_path);
      const auto fm = extract_features(audio, {}, separate_cmd->parsed());
      const auto scene = analyze_scene(fm, bank);
      auto j = scene_json(scene, fm, bank);
      if (*separate_cmd) {
        const auto sep = separate_scene(audio, fm, bank, scene);
        write_wav(out_prefix + "_speech.wav", sep.speech);
        write_wav(out_prefix + "_noise.wav", sep.noise);
        j["speech_wav"] = out_prefix + "_speech.wav";
        j["noise_wav"] = out_prefix + "_noise.wav";
        j["failed_frames"] = sep.failed_frames.size();
      }
      std::cout << j.dump(2) << '\n';
    } else if (*eval_cmd) {
      auto m = read_manifest(manifest_path);
      if (!bank_path.empty()) m.bank = bank_path;
      if (!regimes.empty()) m.regimes = parse_regimes(regimes);
      if (!out_dir.empty()) m.out = out_dir;
      if (parallelism > 0) m.parallelism = parallelism;
      const auto s = run_manifest(m);
      spdlog::info("{} rows ({} computed, {} reused, {} failed) -> {}", s.rows, s.computed, s.reused, s.failed,
                   s.csv_path.string());
      std::cout << s.csv_path.string() << '\n' << s.json_path.string() << '\n';
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(ErrorKind::Data);
  }
  return 0;
}
