#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sparsescene/error.hpp"
#include "sparsescene/report.hpp"

namespace py = pybind11;
using namespace sparsescene;

namespace {

using Release = py::call_guard<py::gil_scoped_release>;

AudioSignal to_signal(std::vector<double> samples, int sample_rate) {
  AudioSignal s;
  s.samples = std::move(samples);
  s.sample_rate = sample_rate;
  return s;
}

std::vector<const Dictionary*> pointers(const std::vector<Dictionary>& dicts) {
  std::vector<const Dictionary*> out;
  for (const auto& d : dicts) out.push_back(&d);
  return out;
}

py::dict evidence_dict(const SpeakerEvidence& ev, const std::vector<Dictionary>& speakers) {
  py::dict d;
  py::list ranking;
  for (int i : ev.ranking) ranking.append(speakers[static_cast<std::size_t>(i)].source_label);
  py::dict tsw;
  for (std::size_t i = 0; i < ev.tsw.size(); ++i) tsw[py::str(speakers[i].source_label)] = ev.tsw[i];
  d["ranking"] = ranking;
  d["tsw"] = tsw;
  d["selected_frames"] = ev.selected_frames;
  d["gated_frames"] = ev.gated_frames;
  d["failed_frames"] = ev.failed_frames;
  d["fac_used"] = ev.fac_used;
  d["fail_open"] = ev.fail_open;
  d["low_confidence"] = ev.low_confidence;
  return d;
}

py::dict solution_dict(const RecoverySolution& s) {
  py::dict d;
  d["weights"] = s.weights;
  d["objective"] = s.objective;
  d["iterations"] = s.iterations;
  d["active_set_size"] = s.active_set_size;
  d["trace"] = s.trace;
  return d;
}

RecoveryProblem problem_for(const Matrix& dictionary, const Vector& target) {
  auto shared = std::make_shared<const Matrix>(dictionary);
  return make_problem(shared, target, blocks_for({{"all", dictionary.cols()}}));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse non-negative dictionary analysis of noisy two-speaker recordings";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  static py::exception<UsageError> usage(m, "UsageError", error.ptr());
  static py::exception<DataError> data(m, "DataError", error.ptr());
  static py::exception<NumericalError> numerical(m, "NumericalError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const UsageError& e) {
      py::set_error(usage, e.what());
    } catch (const DataError& e) {
      py::set_error(data, e.what());
    } catch (const NumericalError& e) {
      py::set_error(numerical, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.attr("SAMPLE_RATE") = kCanonicalRate;

  // Audio
  m.def("read_wav",
        [](const std::filesystem::path& path, int target_rate) { return read_wav(path, target_rate).samples; },
        py::arg("path"), py::arg("target_rate") = kCanonicalRate, "Mono float64 samples resampled to target_rate.");
  m.def("write_wav",
        [](const std::filesystem::path& path, std::vector<double> samples, int sample_rate) {
          write_wav(path, to_signal(std::move(samples), sample_rate));
        },
        py::arg("path"), py::arg("samples"), py::arg("sample_rate") = kCanonicalRate);

  // Features
  py::class_<FeatureMatrix>(m, "FeatureMatrix")
      .def_readonly("frames", &FeatureMatrix::frames)
      .def_readonly("frame_energies", &FeatureMatrix::frame_energies)
      .def_readonly("frame_length", &FeatureMatrix::frame_length)
      .def_readonly("hop", &FeatureMatrix::hop)
      .def_readonly("fft_size", &FeatureMatrix::fft_size)
      .def_readonly("sample_rate", &FeatureMatrix::sample_rate)
      .def_readonly("num_samples", &FeatureMatrix::num_samples)
      .def_property_readonly("num_frames", &FeatureMatrix::num_frames)
      .def_property_readonly("has_phase", [](const FeatureMatrix& fm) { return fm.phase.has_value(); })
      .def("frame_time", &FeatureMatrix::frame_time, py::arg("index"));
  m.def(
      "extract_features",
      [](std::vector<double> samples, int sample_rate, double frame_ms, double hop_ms, bool keep_phase) {
        return extract_features(to_signal(std::move(samples), sample_rate), {frame_ms, hop_ms}, keep_phase);
      },
      py::arg("samples"), py::arg("sample_rate") = kCanonicalRate, py::arg("frame_ms") = 60.0,
      py::arg("hop_ms") = 15.0, py::arg("keep_phase") = false, Release());
  m.def(
      "reconstruct", [](const FeatureMatrix& fm) { return reconstruct(fm).samples; }, py::arg("features"),
      "Inverse transform of a feature matrix that kept its phase.");

  // Dictionaries
  py::class_<Dictionary>(m, "Dictionary")
      .def(py::init([](Matrix atoms, std::string label) {
             Dictionary d;
             d.atoms = normalize_columns(atoms);
             d.source_label = std::move(label);
             return d;
           }),
           py::arg("atoms"), py::arg("label") = "")
      .def_readonly("atoms", &Dictionary::atoms)
      .def_readwrite("source_label", &Dictionary::source_label)
      .def_readonly("appended_count", &Dictionary::appended_count)
      .def_property_readonly("method", [](const Dictionary& d) { return to_string(d.method()); })
      .def_property_readonly("size", &Dictionary::size)
      .def_property_readonly("dim", &Dictionary::dim)
      .def("__repr__", [](const Dictionary& d) {
        return "<Dictionary '" + d.source_label + "' " + std::to_string(d.size()) + " atoms>";
      });
  py::class_<DictionaryBank>(m, "DictionaryBank")
      .def(py::init<>())
      .def_readwrite("noise", &DictionaryBank::noise)
      .def_readwrite("speakers", &DictionaryBank::speakers)
      .def_readwrite("atom_count", &DictionaryBank::atom_count)
      .def("validate", &DictionaryBank::validate)
      .def("noise_index", &DictionaryBank::noise_index)
      .def("speaker_index", &DictionaryBank::speaker_index);

  m.def(
      "learn_dictionary",
      [](const Matrix& features, const std::string& method, int n_atoms, std::uint64_t seed, double tw, double tb,
         const std::vector<Dictionary>& prior) {
        return learn(features, {parse_method(method), n_atoms, seed, tw, tb, 0}, pointers(prior));
      },
      py::arg("features"), py::arg("method") = "kmeans", py::arg("n_atoms") = 32, py::arg("seed") = 1,
      py::arg("tw") = 0.9, py::arg("tb") = 0.9, py::arg("prior") = std::vector<Dictionary>{}, Release());
  m.def(
      "update_dictionary",
      [](const Dictionary& old, const Matrix& features, const std::vector<Dictionary>& prior) {
        return update_dictionary(old, features, pointers(prior));
      },
      py::arg("dictionary"), py::arg("features"), py::arg("prior") = std::vector<Dictionary>{}, Release());
  m.def("save_bank", &save_bank, py::arg("bank"), py::arg("path"));
  m.def("load_bank", &load_bank, py::arg("path"));

  // Recovery
  m.def(
      "solve_asna",
      [](const Matrix& dictionary, const Vector& target, double tol, int max_iters, bool record_trace) {
        RecoverySolution s;
        {
          py::gil_scoped_release nogil;
          s = solve_asna(problem_for(dictionary, target), {tol, max_iters, record_trace});
        }
        return solution_dict(s);
      },
      py::arg("dictionary"), py::arg("target"), py::arg("tol") = 1e-7, py::arg("max_iters") = 500,
      py::arg("record_trace") = false);
  m.def(
      "solve_mu",
      [](const Matrix& dictionary, const Vector& target, int iters, bool record_trace) {
        RecoverySolution s;
        {
          py::gil_scoped_release nogil;
          s = solve_mu(problem_for(dictionary, target), iters, record_trace);
        }
        return solution_dict(s);
      },
      py::arg("dictionary"), py::arg("target"), py::arg("iters") = 500, py::arg("record_trace") = false);
  m.def("kl_divergence", &kl_divergence, py::arg("y"), py::arg("yhat"));

  // Noise segmentation and speaker identification
  m.def(
      "segment_noise",
      [](const FeatureMatrix& fm, const std::vector<Dictionary>& noise) {
        NoiseSegmentation s;
        {
          py::gil_scoped_release nogil;
          s = segment_noise(fm, pointers(noise));
        }
        py::dict d;
        d["class_1"] = noise[static_cast<std::size_t>(s.class_1)].source_label;
        d["class_2"] = noise[static_cast<std::size_t>(s.class_2)].source_label;
        d["transition_frame"] = s.transition_frame;
        d["transition_s"] = s.transition_time;
        d["degenerate"] = s.degenerate;
        d["labels"] = s.segment_labels;
        return d;
      },
      py::arg("features"), py::arg("noise_dictionaries"));
  m.def(
      "identify_speaker",
      [](const FeatureMatrix& fm, Eigen::Index first, Eigen::Index end, const Dictionary* noise,
         const std::vector<Dictionary>& speakers) {
        SpeakerEvidence ev;
        {
          py::gil_scoped_release nogil;
          ev = identify_speaker(fm, {first, end}, noise, pointers(speakers));
        }
        return evidence_dict(ev, speakers);
      },
      py::arg("features"), py::arg("first_frame"), py::arg("end_frame"), py::arg("noise_dictionary").none(true),
      py::arg("speaker_dictionaries"));
  m.def(
      "analyze",
      [](std::vector<double> samples, const DictionaryBank& bank, int sample_rate) {
        FeatureMatrix fm;
        SceneHypothesis h;
        {
          py::gil_scoped_release nogil;
          fm = extract_features(to_signal(std::move(samples), sample_rate));
          h = analyze_scene(fm, bank);
        }
        py::list segments;
        for (std::size_t k = 0; k < h.segments.size(); ++k) {
          py::dict s;
          s["first_frame"] = h.segments[k].begin;
          s["end_frame"] = h.segments[k].end;
          s["noise"] = h.noise[k];
          s["speaker"] = h.speakers[k];
          s["speaker_evidence"] = evidence_dict(h.evidence[k], bank.speakers);
          segments.append(s);
        }
        py::dict d;
        d["transition_frame"] = h.transition_frame;
        d["transition_s"] = h.transition_s;
        d["degenerate"] = h.degenerate;
        d["segments"] = segments;
        d["speech_frames"] = h.speech_frames;
        return d;
      },
      py::arg("samples"), py::arg("bank"), py::arg("sample_rate") = kCanonicalRate,
      "Noise classes, transition and per-segment speaker of one recording.");
  m.def(
      "separate",
      [](std::vector<double> samples, const DictionaryBank& bank, int sample_rate) {
        const auto mixed = to_signal(std::move(samples), sample_rate);
        const auto fm = extract_features(mixed, {}, true);
        auto sep = separate_scene(mixed, fm, bank, analyze_scene(fm, bank));
        return std::make_pair(std::move(sep.speech.samples), std::move(sep.noise.samples));
      },
      py::arg("samples"), py::arg("bank"), py::arg("sample_rate") = kCanonicalRate, Release(),
      "Returns (speech, noise) sample arrays of the input's length.");

  // Metrics
  m.def("sdr",
        py::overload_cast<const std::vector<double>&, const std::vector<double>&, const SampleMask&>(&sdr),
        py::arg("reference"), py::arg("estimate"), py::arg("mask") = SampleMask{});
  m.def(
      "miss_false_rates",
      [](const std::vector<Eigen::Index>& frames, const std::vector<std::pair<double, double>>& intervals, int hop,
         int frame_length, int sample_rate) {
        const auto r = miss_false_rates(frames, intervals, hop, frame_length, sample_rate);
        return std::make_pair(r.miss_rate, r.false_alarm_rate);
      },
      py::arg("cluster_frames"), py::arg("intervals"), py::arg("hop") = 240, py::arg("frame_length") = 960,
      py::arg("sample_rate") = kCanonicalRate, "(miss rate, false alarm rate) in percent.");

  // Corpora and batch evaluation
  py::class_<Corpus>(m, "Corpus")
      .def_property_readonly("noise_labels", &Corpus::noise_labels)
      .def_property_readonly("speaker_labels", &Corpus::speaker_labels);
  m.def(
      "open_corpus", [](const std::string& spec, double test_seconds) { return open_corpus(spec, test_seconds); },
      py::arg("spec"), py::arg("test_seconds") = 20.0, Release(), "A corpus directory or 'synthetic:SEED'.");
  m.def("save_corpus", &save_corpus, py::arg("corpus"), py::arg("path"), Release());
  m.def(
      "learn_bank",
      [](const Corpus& corpus, const std::string& method, int n_atoms, std::uint64_t seed, double tw, double tb) {
        return learn_bank(corpus, {parse_method(method), n_atoms, seed, tw, tb, 0});
      },
      py::arg("corpus"), py::arg("method") = "kmeans", py::arg("n_atoms") = 32, py::arg("seed") = 1,
      py::arg("tw") = 0.9, py::arg("tb") = 0.9, Release());
  m.def(
      "run_manifest",
      [](const std::filesystem::path& path) {
        ManifestSummary s;
        {
          py::gil_scoped_release nogil;
          s = run_manifest(read_manifest(path));
        }
        py::dict d;
        d["rows"] = s.rows;
        d["computed"] = s.computed;
        d["reused"] = s.reused;
        d["failed"] = s.failed;
        d["csv_path"] = s.csv_path;
        d["json_path"] = s.json_path;
        return d;
      },
      py::arg("manifest"), "Runs a manifest file; returns row counts and output paths.");
}
