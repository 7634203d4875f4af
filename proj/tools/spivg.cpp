// spivg command line: synth, train, infer, eval, export-channels.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "spivg/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spivg;
using namespace spivg::pipeline;

namespace {

void print_error(std::string_view code, std::string_view message) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
}

void write_output(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + out);
  f << text;
  if (!f) throw Error(ErrorCode::kIo, "failed writing " + out);
}

struct SummaryFlags {
  std::optional<double> budget;
  std::optional<double> kts_penalty;
  std::optional<std::size_t> kts_max_segments;

  void add(CLI::App* app) {
    app->add_option("--budget", budget, "Summary length as a fraction of frames");
    app->add_option("--kts-penalty", kts_penalty, "Per-segment KTS penalty (default d log T)");
    app->add_option("--kts-max-segments", kts_max_segments, "Upper bound on KTS segments");
  }

  summarize::SummaryConfig apply(summarize::SummaryConfig cfg) const {
    if (budget) cfg.budget = *budget;
    if (kts_penalty) cfg.kts_penalty = *kts_penalty;
    if (kts_max_segments) cfg.kts_max_segments = *kts_max_segments;
    cfg.validate();
    return cfg;
  }
};

struct QueryFlags {
  std::string name;
  bool none = false;

  void add(CLI::App* app) {
    auto* q = app->add_option("--query", name, "Use only the named query (default: all queries of the video)");
    app->add_flag("--no-query", none, "Ignore queries")->excludes(q);
  }

  QuerySelection selection() const {
    if (none) return {QueryMode::kNone, {}};
    if (!name.empty()) return {QueryMode::kNamed, name};
    return {};
  }
};

struct Args {
  std::string config, store, out, checkpoint, video, protocol = "standard", baseline, format = "json";
  std::optional<int> fold, epochs, folds;
  std::optional<std::uint64_t> seed;
  int trials = 100;
  SynthConfig synth;
  SummaryFlags summary;
  QueryFlags query;
};

PipelineConfig base_config(const Args& a) {
  PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_config(a.config);
  if (a.seed) cfg.optimizer.seed = *a.seed;
  if (a.epochs) cfg.optimizer.epochs = *a.epochs;
  if (a.fold) cfg.split.fold_index = *a.fold;
  if (a.folds) cfg.split.n_folds = *a.folds;
  cfg.validate();
  return cfg;
}

int run_synth(const Args& a) {
  SynthConfig s = a.synth;
  if (a.seed) s.seed = *a.seed;
  const FeatureStore store = make_synthetic(s);
  save_features(store, a.out);
  std::cout << json{{"store", a.out}, {"videos", store.videos.size()}, {"frames", s.n_frames}, {"dim", s.dim},
                    {"events", s.n_events}, {"queries", s.n_queries}, {"seed", s.seed}}
                   .dump()
            << "\n";
  return 0;
}

int run_train(const Args& a) {
  const PipelineConfig cfg = base_config(a);
  const FeatureStore store = load_features(a.store);
  TrainOptions opts;
  opts.n_folds = cfg.split.n_folds;
  opts.fold = cfg.split.fold_index;
  opts.on_epoch = [](int epoch, double loss) {
    std::cerr << json{{"epoch", epoch}, {"loss", loss}}.dump() << "\n";
  };
  const Checkpoint ckpt = train(cfg, store, opts);
  ckpt.save(a.out);
  std::cout << json{{"checkpoint", a.out},
                    {"dataset", ckpt.meta.dataset},
                    {"fold", ckpt.meta.fold},
                    {"n_folds", ckpt.meta.n_folds},
                    {"epochs", ckpt.meta.epochs},
                    {"seed", ckpt.meta.seed},
                    {"final_loss", ckpt.meta.loss_history.back()}}
                   .dump()
            << "\n";
  return 0;
}

int run_infer(const Args& a) {
  Checkpoint ckpt = Checkpoint::load(a.checkpoint);
  const FeatureStore store = load_features(a.store);
  const auto summary = a.summary.apply(ckpt.config.summary);
  const auto sel = a.query.selection();
  json out;
  if (a.video.empty()) {
    out = json::array();
    for (const auto& v : store.videos) out.push_back(to_json(infer(*ckpt.model, v, sel, summary)));
  } else {
    out = to_json(infer(*ckpt.model, store.videos[store.index_of(a.video)], sel, summary));
  }
  write_output(out.dump() + "\n", a.out);
  return 0;
}

int run_eval(const Args& a) {
  const FeatureStore store = load_features(a.store);
  const Protocol protocol = parse_protocol(a.protocol);
  if (a.baseline.empty() && a.checkpoint.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "eval: --checkpoint or --baseline random is required");
  }
  if (!a.baseline.empty()) {
    if (a.baseline != "random") throw Error(ErrorCode::kInvalidArgument, "eval: unknown baseline '" + a.baseline + "'");
    const PipelineConfig cfg = base_config(a);
    const int n_folds = protocol_folds(protocol, cfg.split.n_folds);
    const auto split = split_for(store, n_folds, cfg.split.fold_index, cfg.optimizer.seed);
    const auto summary = a.summary.apply(cfg.summary);
    const double f1 = random_baseline_f1(store, split.test, a.trials, cfg.optimizer.seed, summary, threads_from_env());
    write_output(json{{"baseline", "random"},
                      {"trials", a.trials},
                      {"fold", cfg.split.fold_index},
                      {"n_folds", n_folds},
                      {"f1_mean", f1}}
                         .dump() +
                     "\n",
                 a.out);
    return 0;
  }
  Checkpoint ckpt = Checkpoint::load(a.checkpoint);
  EvalOptions opts;
  opts.protocol = protocol;
  opts.n_folds = protocol_folds(protocol, ckpt.meta.n_folds);
  opts.fold = a.fold.value_or(ckpt.meta.fold);
  opts.seed = a.seed.value_or(ckpt.meta.seed);
  opts.queries = a.query.selection();
  opts.threads = threads_from_env();
  const auto report = evaluate(*ckpt.model, store, a.summary.apply(ckpt.config.summary), opts);
  if (a.format == "table") {
    write_output(to_table(report), a.out);
  } else if (a.format == "json") {
    write_output(to_json(report).dump(2) + "\n", a.out);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "eval: unknown format '" + a.format + "'");
  }
  return 0;
}

int run_export(const Args& a) {
  Checkpoint ckpt = Checkpoint::load(a.checkpoint);
  const FeatureStore store = load_features(a.store);
  if (a.out.empty() || a.out == "-") {
    export_channels(*ckpt.model, store, a.query.selection(), std::cout);
    return 0;
  }
  std::ofstream f(a.out, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + a.out);
  export_channels(*ckpt.model, store, a.query.selection(), f);
  if (!f) throw Error(ErrorCode::kIo, "failed writing " + a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking and graph-reasoning video summarizer"};
  app.require_subcommand(1);
  Args a;

  auto* synth = app.add_subcommand("synth", "Write a synthetic feature store");
  synth->add_option("--out", a.out, "Output store directory")->required();
  synth->add_option("--videos", a.synth.n_videos, "Number of videos");
  synth->add_option("--frames", a.synth.n_frames, "Frames per video");
  synth->add_option("--dim", a.synth.dim, "Feature dimension");
  synth->add_option("--events", a.synth.n_events, "Planted key events per video");
  synth->add_option("--queries", a.synth.n_queries, "Query vectors per video");
  synth->add_option("--text-dim", a.synth.text_dim, "Query vector dimension");
  synth->add_option("--seed", a.seed, "Generator seed (default 7)");

  auto* train_cmd = app.add_subcommand("train", "Train on every fold but one");
  train_cmd->add_option("--store", a.store, "Feature store directory")->required();
  train_cmd->add_option("--out", a.out, "Checkpoint path")->required();
  train_cmd->add_option("--config", a.config, "JSON configuration");
  train_cmd->add_option("--fold", a.fold, "Held-out fold");
  train_cmd->add_option("--folds", a.folds, "Number of folds");
  train_cmd->add_option("--seed", a.seed, "Training seed");
  train_cmd->add_option("--epochs", a.epochs, "Epoch count (default depends on the dataset)");

  auto* infer_cmd = app.add_subcommand("infer", "Score and summarize videos with a checkpoint");
  infer_cmd->add_option("--checkpoint", a.checkpoint, "Checkpoint path")->required();
  infer_cmd->add_option("--store", a.store, "Feature store directory")->required();
  infer_cmd->add_option("--video", a.video, "Video id (default: every video)");
  infer_cmd->add_option("--out", a.out, "Output JSON path (default stdout)");
  a.summary.add(infer_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate on the held-out fold");
  eval_cmd->add_option("--checkpoint", a.checkpoint, "Checkpoint path");
  eval_cmd->add_option("--store", a.store, "Feature store directory")->required();
  eval_cmd->add_option("--config", a.config, "JSON configuration (baseline only)");
  eval_cmd->add_option("--fold", a.fold, "Fold to evaluate (default: the checkpoint's)");
  eval_cmd->add_option("--folds", a.folds, "Number of folds (baseline only)");
  eval_cmd->add_option("--seed", a.seed, "Split seed (default: the checkpoint's)");
  eval_cmd->add_option("--protocol", a.protocol, "standard or qfvs");
  eval_cmd->add_option("--baseline", a.baseline, "Evaluate a baseline instead of a checkpoint (random)");
  eval_cmd->add_option("--trials", a.trials, "Baseline draws");
  eval_cmd->add_option("--format", a.format, "json or table");
  eval_cmd->add_option("--out", a.out, "Report path (default stdout)");
  a.summary.add(eval_cmd);

  auto* export_cmd = app.add_subcommand("export-channels", "Write per-frame channel scores as CSV");
  export_cmd->add_option("--checkpoint", a.checkpoint, "Checkpoint path")->required();
  export_cmd->add_option("--store", a.store, "Feature store directory")->required();
  export_cmd->add_option("--out", a.out, "CSV path (default stdout)");

  for (auto* cmd : {infer_cmd, eval_cmd, export_cmd}) a.query.add(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage_error", e.what());
    return 2;
  }

  try {
    if (*synth) return run_synth(a);
    if (*train_cmd) return run_train(a);
    if (*infer_cmd) return run_infer(a);
    if (*eval_cmd) return run_eval(a);
    if (*export_cmd) return run_export(a);
  } catch (const Error& e) {
    print_error(to_string(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal_error", e.what());
    return 1;
  }
  return 1;
}
