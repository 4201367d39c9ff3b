// Command-line driver: data generation, training, parameter sweeps, and
// result reporting for the location-privacy-preference recommender.
//
// Exit codes: 0 success, 1 usage or validation error, 2 data error,
// 3 training divergence.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "locpriv/config.hpp"
#include "locpriv/locpriv.hpp"
#include "locpriv/model_io.hpp"

namespace fs = std::filesystem;
using namespace locpriv;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::optional<std::string> profile;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required) {
  auto* opt = cmd->add_option("--config", flags.config_path,
                              "experiment config file (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--seed", flags.seed, "override the master seed");
  cmd->add_option("--out", flags.out, "override the output directory");
  cmd->add_option("--threads", flags.threads,
                  "worker cap for repetitions (0 = hardware)");
  cmd->add_option("--profile", flags.profile, "ci|full repetition profile")
      ->check(CLI::IsMember({"ci", "full"}));
}

ExperimentConfig load_with_overrides(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags.config_path);
  if (flags.seed.has_value()) cfg.seed = *flags.seed;
  if (flags.out.has_value()) cfg.out_dir = *flags.out;
  if (flags.threads.has_value()) cfg.threads = *flags.threads;
  if (flags.profile.has_value()) cfg.profile = *flags.profile;
  return cfg;
}

unsigned effective_threads(const ExperimentConfig& cfg) {
  if (cfg.threads != 0) return cfg.threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void write_config_snapshot(const fs::path& dir, const ExperimentConfig& cfg) {
  std::ofstream out(dir / "config.json");
  out << config_to_json(cfg).dump(1) << "\n";
}

int cmd_gen_data(const CommonFlags& flags) {
  const ExperimentConfig cfg = load_with_overrides(flags);
  if (!cfg.data.use_synthetic)
    throw std::invalid_argument(
        "gen-data requires a synthetic data source in the config");
  const Corpus corpus = load_corpus(cfg);
  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);
  write_checkins_csv((out_dir / "checkins.csv").string(), corpus.checkins);
  write_prefs_csv((out_dir / "prefs.csv").string(), corpus.prefs);
  const BuiltDataset dataset =
      build_dataset(corpus, cfg.eval_time, cfg.user_sets,
                    derive_seed(cfg.seed, 0xda7a));
  write_matrix_csv((out_dir / "matrix.csv").string(), dataset);
  write_config_snapshot(out_dir, cfg);
  std::printf("wrote %zu check-ins, %zu preference records to %s\n",
              corpus.checkins.size(), corpus.prefs.size(),
              out_dir.string().c_str());
  return 0;
}

int cmd_train(const CommonFlags& flags, const std::string& mode) {
  const ExperimentConfig cfg = load_with_overrides(flags);
  const Corpus corpus = load_corpus(cfg);
  const BuiltDataset dataset =
      build_dataset(corpus, cfg.eval_time, cfg.user_sets,
                    derive_seed(cfg.seed, 0xda7a));
  const std::uint64_t train_seed = derive_seed(cfg.seed, 0x7e41);

  ModelHyper hyper = cfg.model;
  FactorModel model;
  std::vector<RoundDiagnostics> diagnostics;
  if (mode == "plain") {
    auto [trained, diags] =
        train_centralized_with_diagnostics(dataset.matrix, hyper, train_seed);
    model = std::move(trained);
    diagnostics = std::move(diags);
  } else {
    hyper.normalization = GradNormalization::per_user;
    if (cfg.ldp_learning_rate.has_value())
      hyper.learning_rate = *cfg.ldp_learning_rate;
    const NoiseConfig noise = NoiseConfig::calibrated(
        cfg.epsilon, cfg.epsilon_split, cfg.clip_bound, hyper.d,
        cfg.noise_seed.value_or(derive_seed(cfg.seed, 0x401e)));
    TrainResult result =
        train_federated(dataset.matrix, hyper, noise, train_seed);
    model = std::move(result.model);
    diagnostics = std::move(result.diagnostics);
  }

  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);
  ModelFile file;
  file.mode = mode;
  file.seed = cfg.seed;
  file.rounds = hyper.rounds;
  file.final_train_loss = loss(dataset.matrix, model);
  file.model = std::move(model);
  write_model_json((out_dir / "model.json").string(), file);
  write_diagnostics_csv((out_dir / "diagnostics.csv").string(), diagnostics);
  write_config_snapshot(out_dir, cfg);
  std::printf("trained %s model for %zu rounds, final loss %.6g\n",
              mode.c_str(), hyper.rounds, file.final_train_loss);
  return 0;
}

int cmd_sweep(const CommonFlags& flags, const std::string& axis_name) {
  const ExperimentConfig cfg = load_with_overrides(flags);
  const Corpus corpus = load_corpus(cfg);

  SweepAxis axis;
  std::vector<double> values;
  if (axis_name == "time") {
    axis = SweepAxis::time;
    values = cfg.sweep_times;
  } else if (axis_name == "epsilon") {
    axis = SweepAxis::epsilon;
    values = cfg.sweep_epsilons;
  } else {
    axis = SweepAxis::unknown_rate;
    values = cfg.sweep_unknown_rates;
  }

  const ExperimentParams base = cfg.experiment_params(TrainMode::plain);
  const auto rows =
      sweep(corpus, axis, values, base, cfg.seed, effective_threads(cfg));

  const fs::path axis_dir = fs::path(cfg.out_dir) / axis_name;
  fs::create_directories(axis_dir);
  write_curve_csv((axis_dir / "curve.csv").string(), rows);
  for (const SweepRow& row : rows) {
    const fs::path value_dir = axis_dir / format_axis_value(row.axis_value);
    fs::create_directories(value_dir);
    ExperimentConfig snapshot = cfg;
    switch (axis) {
      case SweepAxis::time:
        snapshot.eval_time = static_cast<int>(row.axis_value);
        break;
      case SweepAxis::epsilon:
        snapshot.epsilon = row.axis_value;
        break;
      case SweepAxis::unknown_rate:
        snapshot.eval_unknown_rate = row.axis_value;
        break;
    }
    write_config_snapshot(value_dir, snapshot);
    write_repetition_csv((value_dir / "report.csv").string(), row.plain,
                         row.ldp);
  }
  std::printf("wrote %zu-point %s curve to %s\n", rows.size(),
              axis_name.c_str(), (axis_dir / "curve.csv").string().c_str());
  return 0;
}

int cmd_report(const std::string& results_dir) {
  if (!fs::exists(results_dir))
    throw file_error("no such directory: " + results_dir);
  std::vector<fs::path> curves;
  for (const auto& entry : fs::recursive_directory_iterator(results_dir))
    if (entry.is_regular_file() && entry.path().filename() == "curve.csv")
      curves.push_back(entry.path());
  std::sort(curves.begin(), curves.end());
  if (curves.empty()) {
    std::fprintf(stderr, "no results under %s\n", results_dir.c_str());
    return 2;
  }
  for (const fs::path& path : curves) {
    const CurveFile curve = read_curve_csv(path.string());
    const std::string axis = path.parent_path().filename().string();
    std::fputs(render_curve_table("sweep: " + axis, curve).c_str(), stdout);
    std::fputs("\n", stdout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Location-privacy-preference recommender experiments"};
  app.require_subcommand(1);

  CommonFlags gen_flags, train_flags, sweep_flags;
  std::string train_mode = "plain";
  std::string sweep_axis = "epsilon";
  std::string report_dir;

  CLI::App* gen = app.add_subcommand(
      "gen-data", "generate the synthetic corpus CSV files");
  add_common(gen, gen_flags, /*config_required=*/true);

  CLI::App* train =
      app.add_subcommand("train", "train one model and write it out");
  add_common(train, train_flags, /*config_required=*/true);
  train->add_option("--mode", train_mode, "plain|ldp")
      ->check(CLI::IsMember({"plain", "ldp"}));

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "run a parameter sweep and write curves");
  add_common(sweep_cmd, sweep_flags, /*config_required=*/true);
  sweep_cmd
      ->add_option("--axis", sweep_axis, "time|epsilon|unknown-rate")
      ->check(CLI::IsMember({"time", "epsilon", "unknown-rate"}));

  CLI::App* report =
      app.add_subcommand("report", "render sweep results as tables");
  report->add_option("--out", report_dir, "results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_flags);
    if (train->parsed()) return cmd_train(train_flags, train_mode);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_flags, sweep_axis);
    return cmd_report(report_dir);
  } catch (const divergence_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    // file, coverage, mapping, and empty-data problems are data errors
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
