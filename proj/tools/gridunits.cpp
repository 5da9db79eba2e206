// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Command-line driver. Exit codes: 0 success, 1 partial (rows skipped),
// 2 fatal.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gridunits.hpp"

namespace {

namespace fs = std::filesystem;
using namespace gridunits;

constexpr int kOk = 0;
constexpr int kFatal = 2;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool oracle = false;
  std::string weights;
  std::string metrics;
};

PipelineConfig load(const Overrides& o) {
  auto cfg = load_pipeline_config(o.config);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.mixing.seed = *o.seed;
  }
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.oracle) cfg.oracle = true;
  if (!o.weights.empty()) cfg.weights = o.weights;
  if (!o.metrics.empty()) cfg.metrics = parse_metric_list(o.metrics);
  cfg.validate();
  return cfg;
}

void print_report(const StageReport& r) {
  std::cerr << r.stage << ": " << r.processed << " rows";
  if (!r.skipped.empty()) std::cerr << ", " << r.skipped.size() << " skipped";
  std::cerr << '\n';
  for (const auto& s : r.skipped) std::cerr << r.stage << ": skipped " << s << '\n';
  for (const auto& w : r.warnings) std::cerr << r.stage << ": warning: " << w << '\n';
}

template <typename Fn>
int guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    std::cerr << "gridunits " << what << ": " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "gridunits " << what << ": " << e.what() << '\n';
  }
  return kFatal;
}

int stage(const char* name, const Overrides& o, const std::function<StageReport(const PipelineConfig&)>& run) {
  return guarded(name, [&] {
    const auto report = run(load(o));
    print_report(report);
    return report.exit_code();
  });
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "pipeline.cfg")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "override [global] seed");
  cmd->add_option("-j,--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridunits: noisy-speech enhancement and discrete-unit extraction pipeline"};
  app.require_subcommand(1);
  Overrides o;

  auto* simulate = app.add_subcommand("simulate", "mix clean and noise manifests at sampled SNRs");
  add_common(simulate, o);

  auto* enhance = app.add_subcommand("enhance", "enhance every mixture with GridNet or the oracle mask");
  add_common(enhance, o);
  enhance->add_flag("--oracle", o.oracle, "use the ideal complex ratio mask from the clean reference");
  enhance->add_option("--weights", o.weights, "GNW1 weight file (overrides [paths] weights)");

  auto* vad = app.add_subcommand("vad", "trim silence from enhanced audio");
  add_common(vad, o);

  UnitsMode mode{false, false};
  auto* units = app.add_subcommand("units", "fit a k-means codebook and/or assign units");
  add_common(units, o);
  units->add_flag("--fit", mode.fit, "fit the codebook");
  units->add_flag("--assign", mode.assign, "assign units with an existing codebook");

  std::string estimate_key = "enhanced";
  std::string report_out;
  auto* eval = app.add_subcommand("eval", "score estimates against clean references");
  add_common(eval, o);
  eval->add_option("--metrics", o.metrics, "comma-separated: si_sdr,stoi,wer");
  eval->add_option("--estimate", estimate_key, "manifest key of the estimate ('audio' for the mixture)");
  eval->add_option("-o,--output", report_out, "report path (default <work_dir>/reports/eval.tsv)");

  bool resume = false;
  auto* pipeline = app.add_subcommand("pipeline", "simulate, enhance, vad, units and eval in order");
  add_common(pipeline, o);
  pipeline->add_flag("--oracle", o.oracle, "enhance with the ideal complex ratio mask");
  pipeline->add_option("--weights", o.weights, "GNW1 weight file");
  pipeline->add_option("--metrics", o.metrics, "comma-separated: si_sdr,stoi,wer");
  pipeline->add_flag("--resume", resume, "skip stages already completed with this configuration");

  SynthOptions synth_opts;
  std::string synth_dir;
  auto* synth = app.add_subcommand("synth", "write a synthetic mini-corpus and a matching pipeline.cfg");
  synth->add_option("-o,--out", synth_dir, "output directory")->required();
  synth->add_option("--clean", synth_opts.clean_count, "clean utterances");
  synth->add_option("--noise", synth_opts.noise_count, "noise recordings");
  synth->add_option("--seconds", synth_opts.clean_seconds, "clean utterance length");
  synth->add_option("--seed", synth_opts.seed, "generator seed");

  std::string weights_out, weights_kind = "zero", weights_config;
  std::uint64_t weights_seed = 0;
  std::uint32_t weights_rate = 16000;
  auto* weights = app.add_subcommand("weights", "write a GNW1 file for a configuration");
  weights->add_option("-o,--out", weights_out, "output file")->required();
  weights->add_option("--kind", weights_kind, "zero | random | unity")
      ->check(CLI::IsMember({"zero", "random", "unity"}));
  weights->add_option("-c,--config", weights_config, "pipeline.cfg supplying [gridnet] and [stft]");
  weights->add_option("--seed", weights_seed, "seed for --kind random");
  weights->add_option("--rate", weights_rate, "sample rate recorded in the file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kFatal;
  }

  if (*simulate) return stage("simulate", o, [](const PipelineConfig& c) { return run_simulate(c); });
  if (*enhance) return stage("enhance", o, [](const PipelineConfig& c) { return run_enhance(c); });
  if (*vad) return stage("vad", o, [](const PipelineConfig& c) { return run_vad(c); });
  if (*units) {
    if (!mode.fit && !mode.assign) mode = {true, true};
    return stage("units", o, [&](const PipelineConfig& c) { return run_units(c, mode); });
  }
  if (*eval) {
    return stage("eval", o, [&](const PipelineConfig& c) { return run_eval(c, estimate_key, report_out); });
  }
  if (*pipeline) {
    return guarded("pipeline", [&] {
      const auto cfg = load(o);
      const auto result = run_pipeline(cfg, resume, print_report);
      for (const auto& s : result.resumed) std::cerr << s << ": already complete, skipped\n";
      std::cout << result.summary;
      return result.exit_code();
    });
  }
  if (*synth) {
    return guarded("synth", [&] {
      const fs::path dir(synth_dir);
      synthesize_corpus(dir, synth_opts);
      std::ofstream cfg(dir / "pipeline.cfg", std::ios::trunc);
      cfg << default_config_text("clean.tsv", "noise.tsv");
      if (!cfg) fail(Errc::io_error, "cannot write " + (dir / "pipeline.cfg").string());
      std::cerr << "synth: wrote " << synth_opts.clean_count << " clean and " << synth_opts.noise_count
                << " noise files under " << dir.string() << '\n';
      return kOk;
    });
  }
  if (*weights) {
    return guarded("weights", [&] {
      gridnet::GridNetConfig net;
      if (!weights_config.empty()) net = load_pipeline_config(weights_config).gridnet;
      net.validate();
      gridnet::GridNetWeights w;
      if (weights_kind == "random") {
        w = gridnet::random_weights(net, weights_seed, 0.3, weights_rate);
      } else if (weights_kind == "unity") {
        w = gridnet::unity_mask_weights(net, weights_rate);
      } else {
        w = gridnet::zero_weights(net, weights_rate);
      }
      gridnet::save_weights(weights_out, w);
      std::cerr << "weights: wrote " << w.tensors.size() << " tensors to " << weights_out << '\n';
      return kOk;
    });
  }
  return kFatal;
}
