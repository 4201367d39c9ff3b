#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "locpriv/csv.hpp"
#include "locpriv/dataset.hpp"
#include "locpriv/eval.hpp"
#include "locpriv/mf.hpp"

// Experiment configuration file (JSON). Every knob has a default; the file
// only needs the fields it wants to change. See README for the schema.

namespace locpriv {

struct DataConfig {
  // Either a synthetic corpus...
  SynthParams synthetic;
  bool use_synthetic = true;
  // ...or CSV imports in the documented schemas.
  std::string checkins_csv;
  std::string prefs_csv;
};

struct ExperimentConfig {
  std::uint64_t seed = 20110423;
  std::string out_dir = "out";
  unsigned threads = 0;  // 0 = hardware concurrency
  std::string profile = "ci";
  DataConfig data;
  ModelHyper model;
  std::optional<LearningRateSchedule> ldp_learning_rate;
  double epsilon = 0.01;
  double epsilon_split = 0.5;
  double clip_bound = 1.0;
  std::optional<std::uint64_t> noise_seed;
  int eval_time = 6;
  double eval_unknown_rate = 0.1;
  std::vector<double> sweep_times = {2, 3, 4, 6, 8, 12};
  std::vector<double> sweep_epsilons = {0.0001, 0.0003, 0.001, 0.005, 0.01};
  std::vector<double> sweep_unknown_rates = {0.1, 0.2, 0.3, 0.4, 0.5,
                                             0.6, 0.7, 0.8, 0.9};
  std::optional<std::size_t> repetitions;  // profile default when unset
  std::size_t folds = 10;
  std::size_t user_sets = 150;
  bool score_full_matrix = false;

  std::size_t effective_repetitions() const {
    if (repetitions.has_value()) return *repetitions;
    return profile == "full" ? 100 : 10;
  }

  ExperimentParams experiment_params(TrainMode mode) const {
    ExperimentParams p;
    p.time_granularity = eval_time;
    p.epsilon = epsilon;
    p.unknown_rate = eval_unknown_rate;
    p.mode = mode;
    p.model = model;
    p.ldp_learning_rate = ldp_learning_rate;
    p.epsilon_split = epsilon_split;
    p.clip_bound = clip_bound;
    p.folds = folds;
    p.repetitions = effective_repetitions();
    p.user_sets = user_sets;
    p.score_full_matrix = score_full_matrix;
    return p;
  }
};

namespace config_detail {

using nlohmann::json;

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void read_normalization(const json& j, GradNormalization& out) {
  if (!j.contains("normalization")) return;
  const std::string name = j.at("normalization").get<std::string>();
  if (name == "per-rating") {
    out = GradNormalization::per_rating;
  } else if (name == "per-user") {
    out = GradNormalization::per_user;
  } else {
    throw std::invalid_argument(
        "config: normalization must be 'per-rating' or 'per-user'");
  }
}

}  // namespace config_detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using config_detail::read_if;
  ExperimentConfig cfg;
  read_if(j, "seed", cfg.seed);
  read_if(j, "out", cfg.out_dir);
  read_if(j, "threads", cfg.threads);
  read_if(j, "profile", cfg.profile);
  if (cfg.profile != "ci" && cfg.profile != "full")
    throw std::invalid_argument("config: profile must be 'ci' or 'full'");

  if (j.contains("data")) {
    const auto& d = j.at("data");
    if (d.contains("synthetic")) {
      const auto& s = d.at("synthetic");
      cfg.data.use_synthetic = true;
      read_if(s, "m_users", cfg.data.synthetic.m_users);
      read_if(s, "granularity", cfg.data.synthetic.granularity);
      read_if(s, "density", cfg.data.synthetic.density);
      read_if(s, "pref_users", cfg.data.synthetic.pref_users);
      read_if(s, "pref_coverage", cfg.data.synthetic.pref_coverage);
      read_if(s, "archetypes", cfg.data.synthetic.archetypes);
      read_if(s, "jitter", cfg.data.synthetic.jitter);
      read_if(s, "solo_place_rate", cfg.data.synthetic.solo_place_rate);
    }
    if (d.contains("checkins_csv")) {
      cfg.data.use_synthetic = false;
      cfg.data.checkins_csv = d.at("checkins_csv").get<std::string>();
      cfg.data.prefs_csv = d.at("prefs_csv").get<std::string>();
    }
  }

  if (j.contains("model")) {
    const auto& m = j.at("model");
    read_if(m, "d", cfg.model.d);
    read_if(m, "lambda_u", cfg.model.lambda_u);
    read_if(m, "lambda_v", cfg.model.lambda_v);
    read_if(m, "gamma0", cfg.model.learning_rate.gamma0);
    read_if(m, "decay", cfg.model.learning_rate.decay);
    read_if(m, "rounds", cfg.model.rounds);
    read_if(m, "init_scale", cfg.model.init_scale);
    config_detail::read_normalization(m, cfg.model.normalization);
    if (m.contains("gamma0_ldp")) {
      LearningRateSchedule lr = cfg.model.learning_rate;
      lr.gamma0 = m.at("gamma0_ldp").get<double>();
      if (m.contains("decay_ldp")) lr.decay = m.at("decay_ldp").get<double>();
      cfg.ldp_learning_rate = lr;
    }
  }

  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    read_if(n, "epsilon", cfg.epsilon);
    read_if(n, "epsilon_split", cfg.epsilon_split);
    read_if(n, "clip_bound", cfg.clip_bound);
    if (n.contains("seed") && !n.at("seed").is_null())
      cfg.noise_seed = n.at("seed").get<std::uint64_t>();
  }

  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    read_if(e, "time", cfg.eval_time);
    read_if(e, "unknown_rate", cfg.eval_unknown_rate);
    read_if(e, "times", cfg.sweep_times);
    read_if(e, "epsilons", cfg.sweep_epsilons);
    read_if(e, "unknown_rates", cfg.sweep_unknown_rates);
    if (e.contains("repetitions"))
      cfg.repetitions = e.at("repetitions").get<std::size_t>();
    read_if(e, "folds", cfg.folds);
    read_if(e, "user_sets", cfg.user_sets);
    read_if(e, "score_full_matrix", cfg.score_full_matrix);
  }
  return cfg;
}

// Rejects out-of-range parameters before any work starts.
inline void validate_config(const ExperimentConfig& cfg) {
  slot_count(cfg.eval_time);
  for (double t : cfg.sweep_times) slot_count(static_cast<int>(t));
  if (!(cfg.epsilon > 0.0))
    throw std::invalid_argument("config: epsilon must be > 0");
  for (double e : cfg.sweep_epsilons)
    if (!(e > 0.0))
      throw std::invalid_argument("config: epsilons must be > 0");
  if (!(cfg.epsilon_split > 0.0 && cfg.epsilon_split < 1.0))
    throw std::invalid_argument("config: epsilon_split must be in (0, 1)");
  if (!(cfg.clip_bound > 0.0))
    throw std::invalid_argument("config: clip_bound must be > 0");
  if (!(cfg.eval_unknown_rate > 0.0 && cfg.eval_unknown_rate <= 1.0))
    throw std::invalid_argument("config: unknown_rate must be in (0, 1]");
  for (double r : cfg.sweep_unknown_rates)
    if (!(r > 0.0 && r <= 1.0))
      throw std::invalid_argument("config: unknown_rates must be in (0, 1]");
  if (cfg.model.d == 0)
    throw std::invalid_argument("config: model.d must be >= 1");
  if (!(cfg.model.learning_rate.gamma0 > 0.0))
    throw std::invalid_argument("config: gamma0 must be > 0");
  if (cfg.ldp_learning_rate.has_value() &&
      !(cfg.ldp_learning_rate->gamma0 > 0.0))
    throw std::invalid_argument("config: gamma0_ldp must be > 0");
  if (cfg.folds < 2)
    throw std::invalid_argument("config: folds must be >= 2");
  if (cfg.data.use_synthetic) {
    slot_count(cfg.data.synthetic.granularity);
    if (!(cfg.data.synthetic.density > 0.0 &&
          cfg.data.synthetic.density <= 1.0))
      throw std::invalid_argument("config: density must be in (0, 1]");
  } else {
    // Referenced files must exist at load.
    if (!std::filesystem::exists(cfg.data.checkins_csv))
      throw file_error("config: no such file: " + cfg.data.checkins_csv);
    if (!std::filesystem::exists(cfg.data.prefs_csv))
      throw file_error("config: no such file: " + cfg.data.prefs_csv);
  }
}

// Normalized snapshot of a configuration, written next to every output so a
// result directory is reproducible by inspection.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["out"] = cfg.out_dir;
  j["threads"] = cfg.threads;
  j["profile"] = cfg.profile;
  if (cfg.data.use_synthetic) {
    const SynthParams& s = cfg.data.synthetic;
    j["data"]["synthetic"] = {
        {"m_users", s.m_users},         {"granularity", s.granularity},
        {"density", s.density},         {"pref_users", s.pref_users},
        {"pref_coverage", s.pref_coverage}, {"archetypes", s.archetypes},
        {"jitter", s.jitter},           {"solo_place_rate", s.solo_place_rate},
    };
  } else {
    j["data"]["checkins_csv"] = cfg.data.checkins_csv;
    j["data"]["prefs_csv"] = cfg.data.prefs_csv;
  }
  j["model"] = {
      {"d", cfg.model.d},
      {"lambda_u", cfg.model.lambda_u},
      {"lambda_v", cfg.model.lambda_v},
      {"gamma0", cfg.model.learning_rate.gamma0},
      {"decay", cfg.model.learning_rate.decay},
      {"rounds", cfg.model.rounds},
      {"init_scale", cfg.model.init_scale},
      {"normalization",
       cfg.model.normalization == GradNormalization::per_rating ? "per-rating"
                                                                : "per-user"},
  };
  if (cfg.ldp_learning_rate.has_value()) {
    j["model"]["gamma0_ldp"] = cfg.ldp_learning_rate->gamma0;
    j["model"]["decay_ldp"] = cfg.ldp_learning_rate->decay;
  }
  j["noise"] = {{"epsilon", cfg.epsilon},
                {"epsilon_split", cfg.epsilon_split},
                {"clip_bound", cfg.clip_bound}};
  if (cfg.noise_seed.has_value()) j["noise"]["seed"] = *cfg.noise_seed;
  j["eval"] = {{"time", cfg.eval_time},
               {"unknown_rate", cfg.eval_unknown_rate},
               {"times", cfg.sweep_times},
               {"epsilons", cfg.sweep_epsilons},
               {"unknown_rates", cfg.sweep_unknown_rates},
               {"repetitions", cfg.effective_repetitions()},
               {"folds", cfg.folds},
               {"user_sets", cfg.user_sets},
               {"score_full_matrix", cfg.score_full_matrix}};
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw file_error("cannot open config file: " + path);
  ExperimentConfig cfg;
  try {
    nlohmann::json j;
    in >> j;
    cfg = parse_config(j);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config: " + path + ": " + e.what());
  }
  validate_config(cfg);
  return cfg;
}

// Materializes the configured corpus: synthetic generation or CSV import.
inline Corpus load_corpus(const ExperimentConfig& cfg) {
  if (cfg.data.use_synthetic) {
    SynthParams params = cfg.data.synthetic;
    params.seed = derive_seed(cfg.seed, 0xc0de);
    return synth_generate(params);
  }
  Corpus corpus;
  corpus.checkins = read_checkins_csv(cfg.data.checkins_csv);
  corpus.prefs = read_prefs_csv(cfg.data.prefs_csv);
  return corpus;
}

}  // namespace locpriv
