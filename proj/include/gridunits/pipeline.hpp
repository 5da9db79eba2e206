// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Manifest-driven pipeline: simulate -> enhance -> vad -> units -> eval.
//
// Work directory layout:
//   manifest.tsv          accumulated per-utterance keys
//   mixtures/<id>.wav     noisy mixture; <id>.clean.wav is its clean reference
//   enhanced/<id>.wav
//   trimmed/<id>.wav      VAD-trimmed enhanced audio (absent for silent rows)
//   feats/<id>.feat       FEAT1 features the units were assigned from
//   units/codebook.kmc    default codebook location
//   units/units.txt, units/units.dedup.txt
//   reports/eval.tsv, reports/eval.noisy.tsv, reports/summary.txt
//   .stages/<stage>.done  resume markers

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gridunits/audio.hpp"
#include "gridunits/error.hpp"
#include "gridunits/gridnet/network.hpp"
#include "gridunits/gridnet/weights.hpp"
#include "gridunits/manifest.hpp"
#include "gridunits/masking.hpp"
#include "gridunits/metrics.hpp"
#include "gridunits/mixing.hpp"
#include "gridunits/parallel.hpp"
#include "gridunits/random.hpp"
#include "gridunits/stft.hpp"
#include "gridunits/units.hpp"
#include "gridunits/vad.hpp"
#include "gridunits/wav.hpp"

namespace gridunits {

namespace fs = std::filesystem;

struct UnitsConfig {
  std::size_t k = 100;
  std::size_t max_iters = 100;
  std::size_t n_mels = 40;
  std::string fit_on = "enhanced";  // enhanced | clean
  bool normalize = false;           // per-utterance CMVN
  std::string features = "logmel";  // logmel | imported (row key `features`)
};

struct PipelineConfig {
  fs::path work_dir = "work";
  fs::path clean_manifest;
  fs::path noise_manifest;
  fs::path weights;
  fs::path codebook;  // empty: <work_dir>/units/codebook.kmc

  std::uint64_t seed = 0;
  int jobs = 1;
  bool oracle = false;

  MixtureSpec mixing;
  StftConfig stft{512, 256};
  gridnet::GridNetConfig gridnet;
  VadConfig vad;
  UnitsConfig units;
  std::vector<Metric> metrics{Metric::si_sdr, Metric::stoi};

  fs::path manifest_path() const { return work_dir / "manifest.tsv"; }
  fs::path codebook_path() const { return codebook.empty() ? work_dir / "units" / "codebook.kmc" : codebook; }

  void validate() const {
    mixing.validate();
    stft.validate();
    gridnet.validate();
    vad.validate();
    if (jobs < 1) fail(Errc::config_error, "jobs must be >= 1");
    if (units.k == 0) fail(Errc::config_error, "units.k must be >= 1");
    if (units.fit_on != "enhanced" && units.fit_on != "clean") {
      fail(Errc::config_error, "units.fit_on must be 'enhanced' or 'clean'");
    }
    if (units.features != "logmel" && units.features != "imported") {
      fail(Errc::config_error, "units.features must be 'logmel' or 'imported'");
    }
  }

  // Canonical text form; used for resume markers and the summary header.
  std::string describe() const {
    std::ostringstream o;
    o << "seed=" << seed << " snr=[" << format_fixed(mixing.snr_low, 6) << "," << format_fixed(mixing.snr_high, 6)
      << "] peak=" << format_fixed(mixing.peak_ceiling, 6) << " stft=" << stft.fft_size << "/" << stft.hop
      << " gridnet=D" << gridnet.emb_dim << ",B" << gridnet.num_blocks << ",H" << gridnet.lstm_hidden << ",heads"
      << gridnet.attn_heads << ",I" << gridnet.unfold_kernel << ",J" << gridnet.unfold_stride
      << ",bound=" << (gridnet.mask_bound ? format_fixed(*gridnet.mask_bound, 6) : "none")
      << " oracle=" << oracle << " weights=" << weights.string() << " vad=" << vad.frame_ms << "ms,"
      << format_fixed(vad.threshold_db, 6) << "dB,h" << vad.hangover_frames << ",c" << vad.collar_ms
      << " units=k" << units.k << ",it" << units.max_iters << ",mel" << units.n_mels << "," << units.fit_on << ","
      << units.normalize << "," << units.features << " metrics=";
    for (std::size_t i = 0; i < metrics.size(); ++i) o << (i ? "," : "") << metric_name(metrics[i]);
    return o.str();
  }
};

// ------------------------------------------------------------ config file

namespace config_detail {

inline double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') fail(Errc::config_error, key + ": expected a number, got '" + v + "'");
  return d;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long n = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0') fail(Errc::config_error, key + ": expected an integer, got '" + v + "'");
  return n;
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  const auto n = parse_int(key, v);
  if (n < 0) fail(Errc::config_error, key + ": must be non-negative");
  return static_cast<std::size_t>(n);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(Errc::config_error, key + ": expected true/false, got '" + v + "'");
}

}  // namespace config_detail

// INI-style: [section] headers, `key = value`, '#' or ';' comments. Unknown
// sections and keys are rejected. Relative paths resolve against base_dir.
inline PipelineConfig parse_pipeline_config(std::istream& in, const fs::path& base_dir,
                                            const std::string& origin = "<config>") {
  using namespace config_detail;
  PipelineConfig cfg;
  auto path_of = [&](const std::string& v) -> fs::path {
    if (v.empty()) return {};
    const fs::path p(v);
    return p.is_absolute() ? p : (base_dir / p).lexically_normal();
  };
  using Setter = std::function<void(const std::string& key, const std::string& value)>;
  const std::map<std::string, std::map<std::string, Setter>> table = {
      {"paths",
       {
           {"work_dir", [&](auto&, auto& v) { cfg.work_dir = path_of(v); }},
           {"clean_manifest", [&](auto&, auto& v) { cfg.clean_manifest = path_of(v); }},
           {"noise_manifest", [&](auto&, auto& v) { cfg.noise_manifest = path_of(v); }},
           {"weights", [&](auto&, auto& v) { cfg.weights = path_of(v); }},
           {"codebook", [&](auto&, auto& v) { cfg.codebook = path_of(v); }},
       }},
      {"global",
       {
           {"seed", [&](auto& k, auto& v) { cfg.seed = parse_count(k, v); }},
           {"jobs", [&](auto& k, auto& v) { cfg.jobs = static_cast<int>(parse_int(k, v)); }},
       }},
      {"mixing",
       {
           {"snr_low", [&](auto& k, auto& v) { cfg.mixing.snr_low = parse_double(k, v); }},
           {"snr_high", [&](auto& k, auto& v) { cfg.mixing.snr_high = parse_double(k, v); }},
           {"peak_ceiling", [&](auto& k, auto& v) { cfg.mixing.peak_ceiling = parse_double(k, v); }},
       }},
      {"stft",
       {
           {"fft_size", [&](auto& k, auto& v) { cfg.stft.fft_size = parse_count(k, v); }},
           {"hop", [&](auto& k, auto& v) { cfg.stft.hop = parse_count(k, v); }},
       }},
      {"gridnet",
       {
           {"emb_dim", [&](auto& k, auto& v) { cfg.gridnet.emb_dim = parse_count(k, v); }},
           {"num_blocks", [&](auto& k, auto& v) { cfg.gridnet.num_blocks = parse_count(k, v); }},
           {"lstm_hidden", [&](auto& k, auto& v) { cfg.gridnet.lstm_hidden = parse_count(k, v); }},
           {"attn_heads", [&](auto& k, auto& v) { cfg.gridnet.attn_heads = parse_count(k, v); }},
           {"unfold_kernel", [&](auto& k, auto& v) { cfg.gridnet.unfold_kernel = parse_count(k, v); }},
           {"unfold_stride", [&](auto& k, auto& v) { cfg.gridnet.unfold_stride = parse_count(k, v); }},
           {"mask_bound",
            [&](auto& k, auto& v) {
              if (v == "none" || v.empty()) {
                cfg.gridnet.mask_bound.reset();
              } else {
                cfg.gridnet.mask_bound = parse_double(k, v);
              }
            }},
           {"oracle", [&](auto& k, auto& v) { cfg.oracle = parse_bool(k, v); }},
       }},
      {"vad",
       {
           {"frame_ms", [&](auto& k, auto& v) { cfg.vad.frame_ms = static_cast<int>(parse_int(k, v)); }},
           {"threshold_db", [&](auto& k, auto& v) { cfg.vad.threshold_db = parse_double(k, v); }},
           {"hangover_frames", [&](auto& k, auto& v) { cfg.vad.hangover_frames = static_cast<int>(parse_int(k, v)); }},
           {"collar_ms", [&](auto& k, auto& v) { cfg.vad.collar_ms = static_cast<int>(parse_int(k, v)); }},
       }},
      {"units",
       {
           {"k", [&](auto& k, auto& v) { cfg.units.k = parse_count(k, v); }},
           {"max_iters", [&](auto& k, auto& v) { cfg.units.max_iters = parse_count(k, v); }},
           {"n_mels", [&](auto& k, auto& v) { cfg.units.n_mels = parse_count(k, v); }},
           {"fit_on", [&](auto&, auto& v) { cfg.units.fit_on = v; }},
           {"normalize", [&](auto& k, auto& v) { cfg.units.normalize = parse_bool(k, v); }},
           {"features", [&](auto&, auto& v) { cfg.units.features = v; }},
       }},
      {"eval",
       {
           {"metrics", [&](auto&, auto& v) { cfg.metrics = parse_metric_list(v); }},
       }},
  };

  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto where = origin + ":" + std::to_string(lineno);
    auto text = trim(line);
    if (text.empty() || text.front() == '#' || text.front() == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']') fail(Errc::config_error, where + ": malformed section header");
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      if (!table.count(section)) fail(Errc::config_error, where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) fail(Errc::config_error, where + ": expected key = value");
    const auto key = trim(std::string_view(text).substr(0, eq));
    const auto value = trim(std::string_view(text).substr(eq + 1));
    if (section.empty()) fail(Errc::config_error, where + ": key '" + key + "' outside any section");
    const auto& keys = table.at(section);
    const auto it = keys.find(key);
    if (it == keys.end()) fail(Errc::config_error, where + ": unknown key '" + key + "' in [" + section + "]");
    try {
      it->second(section + "." + key, value);
    } catch (const Error& e) {
      fail(Errc::config_error, where + ": " + e.what());
    }
  }
  cfg.mixing.seed = cfg.seed;
  cfg.gridnet.stft = cfg.stft;
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(Errc::config_error, origin + ": " + e.what());
  }
  return cfg;
}

inline PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::file_not_found, path.string());
  return parse_pipeline_config(in, path.parent_path(), path.string());
}

// A config for a corpus laid out by synthesize_corpus(); used by `synth`.
inline std::string default_config_text(const std::string& clean_manifest, const std::string& noise_manifest) {
  return "# gridunits pipeline configuration\n"
         "[paths]\n"
         "work_dir = work\n"
         "clean_manifest = " + clean_manifest + "\n"
         "noise_manifest = " + noise_manifest + "\n"
         "weights =\n"
         "\n[global]\nseed = 0\njobs = 1\n"
         "\n[mixing]\nsnr_low = -15\nsnr_high = -15\npeak_ceiling = 0.99\n"
         "\n[stft]\nfft_size = 512\nhop = 256\n"
         "\n[gridnet]\noracle = true\n"
         "\n[vad]\nframe_ms = 30\nthreshold_db = -40\nhangover_frames = 8\ncollar_ms = 100\n"
         "\n[units]\nk = 100\nmax_iters = 100\nn_mels = 40\nfit_on = enhanced\nnormalize = false\n"
         "\n[eval]\nmetrics = si_sdr,stoi\n";
}

// ----------------------------------------------------------------- stages

struct StageReport {
  explicit StageReport(std::string name = {}) : stage(std::move(name)) {}

  std::string stage;
  std::size_t processed = 0;
  std::vector<std::string> skipped;   // "utt_id: reason"
  std::vector<std::string> warnings;

  int exit_code() const { return skipped.empty() ? 0 : 1; }
};

inline Manifest load_work_manifest(const PipelineConfig& cfg) {
  auto rows = read_manifest(cfg.manifest_path());
  if (rows.empty()) fail(Errc::empty_input, cfg.manifest_path().string() + " has no rows");
  return rows;
}

inline std::string require_key(const ManifestRow& row, const std::string& key) {
  auto v = row.get(key);
  if (!v) fail(Errc::config_error, "row lacks '" + key + "'");
  return *v;
}

// Runs fn on every row in parallel; rows that throw are reported as skipped.
template <typename Fn>
void for_each_row(Manifest& rows, int jobs, StageReport& report, Fn&& fn) {
  std::vector<std::string> errors(rows.size());
  parallel_for(rows.size(), jobs, [&](std::size_t i) {
    try {
      fn(rows[i]);
    } catch (const Error& e) {
      errors[i] = rows[i].id + ": " + e.what();
    }
  });
  for (const auto& e : errors) {
    if (e.empty()) {
      ++report.processed;
    } else {
      report.skipped.push_back(e);
    }
  }
  if (report.processed == 0) fail(Errc::empty_input, report.stage + ": no row succeeded");
}

inline StageReport run_simulate(const PipelineConfig& cfg) {
  StageReport report{"simulate"};
  if (cfg.clean_manifest.empty()) fail(Errc::config_error, "paths.clean_manifest is not set");
  if (cfg.noise_manifest.empty()) fail(Errc::config_error, "paths.noise_manifest is not set");
  const auto clean = read_manifest(cfg.clean_manifest);
  const auto noise = read_manifest(cfg.noise_manifest);
  if (clean.empty()) fail(Errc::empty_input, cfg.clean_manifest.string() + " has no rows");
  if (noise.empty()) fail(Errc::empty_input, cfg.noise_manifest.string() + " has no rows");
  auto spec = cfg.mixing;
  spec.seed = cfg.seed;
  auto result = simulate_corpus(clean, noise, spec, cfg.work_dir, cfg.jobs);
  fs::create_directories(cfg.work_dir);
  write_manifest(cfg.manifest_path(), result.rows);
  report.processed = result.rows.size();
  report.skipped = std::move(result.failures);
  return report;
}

inline bool is_silent(const AudioBuffer& buf) {
  return std::all_of(buf.samples.begin(), buf.samples.end(), [](double v) { return v == 0.0; });
}

inline StageReport run_enhance(const PipelineConfig& cfg) {
  StageReport report{"enhance"};
  auto rows = load_work_manifest(cfg);
  std::optional<gridnet::GridNetWeights> weights;
  if (!cfg.oracle) {
    if (cfg.weights.empty()) fail(Errc::config_error, "no weight file configured; set paths.weights or use --oracle");
    weights = gridnet::load_weights(cfg.weights, cfg.gridnet);
  }
  const auto out_dir = cfg.work_dir / "enhanced";
  fs::create_directories(out_dir);
  std::vector<char> silent(rows.size(), 0);
  std::vector<std::size_t> clipped(rows.size(), 0);
  // A single row may use every worker inside the network; otherwise rows run in parallel.
  const int inner = rows.size() == 1 ? cfg.jobs : 1;
  for_each_row(rows, cfg.jobs, report, [&](ManifestRow& row) {
    const auto mix = read_wav(row.audio);
    AudioBuffer enhanced;
    if (cfg.oracle) {
      enhanced = oracle_enhance(read_wav(require_key(row, "clean")), mix, cfg.stft);
    } else {
      enhanced = gridnet::enhance(mix, *weights, cfg.gridnet, inner);
    }
    const std::size_t i = static_cast<std::size_t>(&row - rows.data());
    silent[i] = is_silent(enhanced);
    const auto path = out_dir / (row.id + ".wav");
    clipped[i] = write_wav(path, enhanced);
    row.set("enhanced", path.string());
  });
  const auto n_silent = static_cast<std::size_t>(std::count(silent.begin(), silent.end(), 1));
  std::size_t n_clipped = 0;
  for (auto c : clipped) n_clipped += c;
  if (n_silent) report.warnings.push_back(std::to_string(n_silent) + " enhanced outputs are silent");
  if (n_clipped) report.warnings.push_back(std::to_string(n_clipped) + " samples clipped while writing");
  write_manifest(cfg.manifest_path(), rows);
  return report;
}

// The audio the VAD and unit stages work on: enhanced if present, else the mixture.
inline std::string enhanced_or_mixture(const ManifestRow& row) { return row.get("enhanced").value_or(row.audio); }

inline StageReport run_vad(const PipelineConfig& cfg) {
  StageReport report{"vad"};
  auto rows = load_work_manifest(cfg);
  const auto out_dir = cfg.work_dir / "trimmed";
  fs::create_directories(out_dir);
  std::vector<char> silent(rows.size(), 0);
  for_each_row(rows, cfg.jobs, report, [&](ManifestRow& row) {
    const auto audio = read_wav(enhanced_or_mixture(row));
    const auto result = trim(audio, detect_segments(audio, cfg.vad));
    row.set("vad_kept", format_fixed(result.kept_fraction, 6));
    const auto path = out_dir / (row.id + ".wav");
    if (result.all_silent) {
      silent[static_cast<std::size_t>(&row - rows.data())] = 1;
      row.set("vad_silent", "1");
      fs::remove(path);
      return;
    }
    row.set("vad_silent", "0");
    write_wav(path, result.audio);
    row.set("trimmed", path.string());
  });
  const auto n_silent = static_cast<std::size_t>(std::count(silent.begin(), silent.end(), 1));
  if (n_silent) report.warnings.push_back(std::to_string(n_silent) + " rows are entirely silent");
  write_manifest(cfg.manifest_path(), rows);
  return report;
}

inline bool row_is_silent(const ManifestRow& row) { return row.get("vad_silent") == "1"; }

inline FeatureMatrix features_for(const AudioBuffer& audio, const PipelineConfig& cfg) {
  auto feat = logmel(audio, cfg.units.n_mels, cfg.stft);
  if (cfg.units.normalize) cmvn(feat);
  return feat;
}

// Features of the audio units are assigned from: trimmed, else enhanced, else the mixture.
inline FeatureMatrix unit_features(const ManifestRow& row, const PipelineConfig& cfg) {
  if (cfg.units.features == "imported") {
    auto feat = import_features(require_key(row, "features"));
    if (cfg.units.normalize) cmvn(feat);
    return feat;
  }
  const auto path = row.get("trimmed").value_or(enhanced_or_mixture(row));
  return features_for(read_wav(path), cfg);
}

inline FeatureMatrix fit_features(const ManifestRow& row, const PipelineConfig& cfg) {
  if (cfg.units.fit_on == "clean" && cfg.units.features == "logmel") {
    return features_for(read_wav(require_key(row, "clean")), cfg);
  }
  return unit_features(row, cfg);
}

struct UnitsMode {
  bool fit = true;
  bool assign = true;
};

inline StageReport run_units(const PipelineConfig& cfg, UnitsMode mode = {}) {
  StageReport report{"units"};
  auto rows = load_work_manifest(cfg);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (row_is_silent(rows[i])) {
      report.warnings.push_back(rows[i].id + ": silent, no units");
    } else {
      active.push_back(i);
    }
  }
  if (active.empty()) fail(Errc::empty_input, "every row is silent");
  fs::create_directories(cfg.work_dir / "units");
  fs::create_directories(cfg.work_dir / "feats");

  if (mode.fit) {
    std::vector<std::optional<FeatureMatrix>> feats(active.size());
    std::vector<std::string> errors(active.size());
    parallel_for(active.size(), cfg.jobs, [&](std::size_t j) {
      try {
        feats[j] = fit_features(rows[active[j]], cfg);
      } catch (const Error& e) {
        errors[j] = rows[active[j]].id + ": " + e.what();
      }
    });
    std::size_t total = 0, dim = 0;
    for (std::size_t j = 0; j < active.size(); ++j) {
      if (!feats[j]) continue;
      if (dim == 0) dim = feats[j]->dim();
      if (feats[j]->dim() != dim) fail(Errc::shape_mismatch, rows[active[j]].id + ": feature dim differs");
      total += feats[j]->frames();
    }
    if (total == 0) fail(Errc::empty_input, "no features to fit a codebook on");
    Matrix<double> pooled(total, dim);
    std::size_t r = 0;
    for (const auto& f : feats) {
      if (!f) continue;
      std::copy(f->values.data().begin(), f->values.data().end(), pooled.data().begin() + r * dim);
      r += f->frames();
    }
    KMeansOptions opts{cfg.units.k, cfg.units.max_iters, derive_seed(cfg.seed, "kmeans"), cfg.jobs};
    const auto cb = kmeans_fit(pooled, opts);
    fs::create_directories(cfg.codebook_path().parent_path());
    save_codebook(cfg.codebook_path(), cb);
    for (const auto& e : errors) {
      if (!e.empty()) report.warnings.push_back("fit: " + e);
    }
  }

  if (mode.assign) {
    const auto cb = load_codebook(cfg.codebook_path());
    Manifest subset;
    for (auto i : active) subset.push_back(rows[i]);
    std::vector<UnitSequence> seqs(subset.size());
    for_each_row(subset, cfg.jobs, report, [&](ManifestRow& row) {
      const auto feat = unit_features(row, cfg);
      const auto feat_path = cfg.work_dir / "feats" / (row.id + ".feat");
      export_features(feat_path, feat);
      auto seq = assign_units(feat, cb, row.id);
      row.set("feats", feat_path.string());
      row.set("units", std::to_string(seq.units.size()));
      row.set("units_dedup", std::to_string(dedup(seq).units.size()));
      seqs[static_cast<std::size_t>(&row - subset.data())] = std::move(seq);
    });
    std::vector<UnitSequence> full, deduped;
    for (std::size_t j = 0; j < subset.size(); ++j) {
      rows[active[j]] = subset[j];
      if (!subset[j].has("units")) continue;
      full.push_back(seqs[j]);
      deduped.push_back(dedup(seqs[j]));
    }
    write_unit_file(cfg.work_dir / "units" / "units.txt", full);
    write_unit_file(cfg.work_dir / "units" / "units.dedup.txt", deduped);
    write_manifest(cfg.manifest_path(), rows);
  } else {
    report.processed = active.size();
  }
  return report;
}

inline StageReport run_eval(const PipelineConfig& cfg, const std::string& estimate_key = "enhanced",
                            const fs::path& report_path = {}) {
  StageReport report{"eval"};
  const auto rows = load_work_manifest(cfg);
  EvalOptions opts;
  opts.metrics = cfg.metrics;
  opts.estimate_key = estimate_key;
  opts.jobs = cfg.jobs;
  const auto result = eval_corpus(rows, opts);
  const auto path = report_path.empty() ? cfg.work_dir / "reports" / "eval.tsv" : report_path;
  fs::create_directories(path.parent_path());
  write_report(path, result);
  report.processed = result.rows.size();
  report.skipped = result.skipped;
  return report;
}

// ---------------------------------------------------------------- summary

struct UnitAgreement {
  std::size_t frames = 0;
  std::size_t enhanced_matches = 0;
  std::size_t noisy_matches = 0;

  double enhanced() const { return frames ? static_cast<double>(enhanced_matches) / frames : 0.0; }
  double noisy() const { return frames ? static_cast<double>(noisy_matches) / frames : 0.0; }
};

// Frame-level agreement of units from the untrimmed enhanced and noisy
// signals with units from the clean reference, pooled over the corpus.
inline UnitAgreement unit_agreement(const PipelineConfig& cfg) {
  const auto rows = load_work_manifest(cfg);
  const auto cb = load_codebook(cfg.codebook_path());
  std::vector<UnitAgreement> parts(rows.size());
  parallel_for(rows.size(), cfg.jobs, [&](std::size_t i) {
    const auto& row = rows[i];
    const auto enhanced_path = row.get("enhanced");
    const auto clean_path = row.get("clean");
    if (!enhanced_path || !clean_path) return;
    const auto clean = assign_units(features_for(read_wav(*clean_path), cfg), cb).units;
    const auto noisy = assign_units(features_for(read_wav(row.audio), cfg), cb).units;
    const auto enhanced = assign_units(features_for(read_wav(*enhanced_path), cfg), cb).units;
    const std::size_t n = std::min({clean.size(), noisy.size(), enhanced.size()});
    parts[i].frames = n;
    for (std::size_t t = 0; t < n; ++t) {
      parts[i].enhanced_matches += enhanced[t] == clean[t];
      parts[i].noisy_matches += noisy[t] == clean[t];
    }
  });
  UnitAgreement total;
  for (const auto& p : parts) {
    total.frames += p.frames;
    total.enhanced_matches += p.enhanced_matches;
    total.noisy_matches += p.noisy_matches;
  }
  return total;
}

struct SummaryLine {
  std::string key;
  std::string value;
};

// Values of one '#' row (e.g. "#mean") of a written report, keyed by column.
inline std::vector<SummaryLine> read_report_row(const fs::path& path, std::string_view tag) {
  std::ifstream in(path);
  if (!in) return {};
  std::string line, header;
  std::getline(in, header);
  const auto names = split(header, '\t');
  std::vector<SummaryLine> out;
  while (std::getline(in, line)) {
    const auto values = split(line, '\t');
    if (values.empty() || values[0] != tag) continue;
    for (std::size_t c = 1; c < values.size() && c < names.size(); ++c) out.push_back({names[c], values[c]});
  }
  return out;
}

inline std::string write_summary(const PipelineConfig& cfg) {
  const auto agreement = unit_agreement(cfg);
  std::ostringstream o;
  o << "config\t" << cfg.describe() << '\n';
  o << "rows\t" << load_work_manifest(cfg).size() << '\n';
  for (const auto& [label, file] : {std::pair{"enhanced", "eval.tsv"}, std::pair{"noisy", "eval.noisy.tsv"}}) {
    const auto path = cfg.work_dir / "reports" / file;
    for (const auto& [k, v] : read_report_row(path, "#mean")) o << label << "_mean_" << k << '\t' << v << '\n';
    for (const auto& [k, v] : read_report_row(path, "#infinite")) o << label << "_inf_" << k << '\t' << v << '\n';
  }
  o << "unit_frames\t" << agreement.frames << '\n';
  o << "unit_agreement_enhanced_vs_clean\t" << format_fixed(agreement.enhanced(), 6) << '\n';
  o << "unit_agreement_noisy_vs_clean\t" << format_fixed(agreement.noisy(), 6) << '\n';
  o << "unit_agreement_gain_points\t" << format_fixed(100.0 * (agreement.enhanced() - agreement.noisy()), 6)
    << '\n';
  const auto path = cfg.work_dir / "reports" / "summary.txt";
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write " + path.string());
  out << o.str();
  return o.str();
}

// ---------------------------------------------------------------- driver

struct StageFailure : Error {
  StageFailure(const std::string& stage, const Error& cause)
      : Error(cause.code(), stage + ": " + cause.message()), stage_name(stage) {}
  std::string stage_name;
};

inline fs::path stage_marker(const PipelineConfig& cfg, const std::string& stage) {
  return cfg.work_dir / ".stages" / (stage + ".done");
}

inline std::string stage_stamp(const PipelineConfig& cfg, const std::string& stage) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(stage + "\n" + cfg.describe())));
  return buf;
}

inline bool stage_done(const PipelineConfig& cfg, const std::string& stage) {
  std::ifstream in(stage_marker(cfg, stage));
  std::string stamp;
  return in && std::getline(in, stamp) && stamp == stage_stamp(cfg, stage);
}

inline void mark_stage(const PipelineConfig& cfg, const std::string& stage) {
  fs::create_directories(stage_marker(cfg, stage).parent_path());
  std::ofstream out(stage_marker(cfg, stage), std::ios::trunc);
  out << stage_stamp(cfg, stage) << '\n';
}

struct PipelineResult {
  std::vector<StageReport> stages;
  std::vector<std::string> resumed;  // stages skipped by --resume
  std::string summary;

  int exit_code() const {
    for (const auto& s : stages) {
      if (s.exit_code() != 0) return 1;
    }
    return 0;
  }
};

// Runs every stage in order. A fatal error aborts with StageFailure naming
// the stage. With resume, stages whose marker matches this config are skipped.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, bool resume = false,
                                   const std::function<void(const StageReport&)>& on_stage = {}) {
  PipelineResult result;
  const std::vector<std::pair<std::string, std::function<StageReport()>>> stages = {
      {"simulate", [&] { return run_simulate(cfg); }},
      {"enhance", [&] { return run_enhance(cfg); }},
      {"vad", [&] { return run_vad(cfg); }},
      {"units", [&] { return run_units(cfg); }},
      {"eval", [&] { return run_eval(cfg); }},
      {"eval_noisy", [&] { return run_eval(cfg, "audio", cfg.work_dir / "reports" / "eval.noisy.tsv"); }},
  };
  bool rerun_rest = !resume;
  for (const auto& [name, run] : stages) {
    if (!rerun_rest && stage_done(cfg, name)) {
      result.resumed.push_back(name);
      continue;
    }
    rerun_rest = true;  // everything after a rerun stage must rerun too
    try {
      fs::remove(stage_marker(cfg, name));
      auto report = run();
      report.stage = name;
      if (on_stage) on_stage(report);
      result.stages.push_back(std::move(report));
      mark_stage(cfg, name);
    } catch (const Error& e) {
      throw StageFailure(name, e);
    }
  }
  try {
    result.summary = write_summary(cfg);
  } catch (const Error& e) {
    throw StageFailure("summary", e);
  }
  return result;
}

}  // namespace gridunits
