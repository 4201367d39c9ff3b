#pragma once

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "locpriv/dataset.hpp"
#include "locpriv/errors.hpp"
#include "locpriv/fed.hpp"
#include "locpriv/matrix.hpp"
#include "locpriv/mf.hpp"
#include "locpriv/rng.hpp"

// Reproduces the evaluation protocol: 10-fold cross validation over users,
// Unknown-Rate masking of test users' ratings, FPR / Recall / Reconstruction
// rate over the masked cells, repetition averaging, and parameter sweeps.

namespace locpriv {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
};

inline ConfusionCounts confusion(std::span<const std::uint8_t> truth,
                                 std::span<const std::uint8_t> predicted) {
  if (truth.size() != predicted.size())
    throw std::invalid_argument("confusion: size mismatch");
  ConfusionCounts c;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (truth[k]) {
      predicted[k] ? ++c.tp : ++c.fn;
    } else {
      predicted[k] ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

// Zero denominators yield nullopt; undefined values are surfaced, never
// coerced to 0.
inline std::optional<double> fpr(const ConfusionCounts& c) {
  if (c.tn + c.fp == 0) return std::nullopt;
  return static_cast<double>(c.fp) / static_cast<double>(c.tn + c.fp);
}

inline std::optional<double> recall(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

// Fraction of masked cells predicted correctly.
inline std::optional<double> reconstruction_rate(const ConfusionCounts& c) {
  if (c.total() == 0) return std::nullopt;
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

struct Fold {
  std::vector<std::size_t> train_users;
  std::vector<std::size_t> test_users;
};

// Shuffled partition into `folds` near-equal test groups.
inline std::vector<Fold> kfold_split(std::size_t n_users, std::size_t folds,
                                     Rng& rng) {
  if (folds < 2) throw std::invalid_argument("kfold_split: folds must be >= 2");
  if (n_users < folds)
    throw std::invalid_argument("kfold_split: fewer users than folds");
  std::vector<std::size_t> order(n_users);
  for (std::size_t i = 0; i < n_users; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<Fold> result(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t begin = f * n_users / folds;
    const std::size_t end = (f + 1) * n_users / folds;
    for (std::size_t k = 0; k < n_users; ++k) {
      (k >= begin && k < end ? result[f].test_users : result[f].train_users)
          .push_back(order[k]);
    }
  }
  return result;
}

struct MaskResult {
  std::vector<ItemRating> visible;
  std::vector<ItemRating> hidden;
  bool degenerate_all_hidden = false;
};

// Uniformly samples ceil(rate * |ratings|) entries into the hidden side.
// rate = 1 hides everything and is flagged as degenerate.
inline MaskResult mask_unknown(std::span<const ItemRating> ratings,
                               double unknown_rate, Rng& rng) {
  if (!(unknown_rate >= 0.0 && unknown_rate <= 1.0))
    throw std::invalid_argument("unknown rate must be in [0, 1]");
  const std::size_t n = ratings.size();
  // Half-ulp guard so an exact product like 0.5 * 10 never ceils upward.
  std::size_t n_hidden = static_cast<std::size_t>(
      std::ceil(unknown_rate * static_cast<double>(n) - 1e-9));
  if (n_hidden > n) n_hidden = n;
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  rng.shuffle(order);
  MaskResult result;
  result.degenerate_all_hidden = unknown_rate == 1.0;
  std::vector<std::uint8_t> is_hidden(n, 0);
  for (std::size_t k = 0; k < n_hidden; ++k) is_hidden[order[k]] = 1;
  for (std::size_t k = 0; k < n; ++k)
    (is_hidden[k] ? result.hidden : result.visible).push_back(ratings[k]);
  return result;
}

enum class TrainMode { plain, ldp };

struct ExperimentParams {
  int time_granularity = 6;
  double epsilon = 0.01;
  double unknown_rate = 0.1;
  TrainMode mode = TrainMode::plain;
  ModelHyper model;
  // The noised path usually needs a far smaller step than the noiseless one
  // to stay finite; unset means "same as model.learning_rate".
  std::optional<LearningRateSchedule> ldp_learning_rate;
  double epsilon_split = 0.5;
  double clip_bound = 1.0;
  std::size_t folds = 10;
  std::size_t repetitions = 10;
  std::size_t user_sets = 150;
  bool score_full_matrix = false;
};

struct EvalReport {
  int time_granularity = 6;
  double epsilon = 0.01;
  double unknown_rate = 0.1;
  TrainMode mode = TrainMode::plain;
  std::size_t repetitions = 0;

  // Per-repetition raw values; nullopt where the metric was undefined.
  std::vector<std::optional<double>> raw_fpr;
  std::vector<std::optional<double>> raw_recall;
  std::vector<std::optional<double>> raw_reconstruction;

  std::optional<double> mean_fpr;
  std::optional<double> mean_recall;
  std::optional<double> mean_reconstruction;
  std::size_t excluded_fpr = 0;
  std::size_t excluded_recall = 0;
  std::size_t excluded_reconstruction = 0;
  std::size_t diverged_repetitions = 0;

  std::size_t excluded_total() const {
    return excluded_fpr + excluded_recall + excluded_reconstruction;
  }
};

namespace eval_detail {

inline std::optional<double> mean_of_defined(
    const std::vector<std::optional<double>>& values, std::size_t& excluded) {
  double sum = 0.0;
  std::size_t n = 0;
  excluded = 0;
  for (const auto& v : values) {
    if (v.has_value()) {
      sum += *v;
      ++n;
    } else {
      ++excluded;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

struct RepOutcome {
  std::optional<double> fpr;
  std::optional<double> recall;
  std::optional<double> reconstruction;
  bool diverged = false;
};

}  // namespace eval_detail

// One full experiment cell: `repetitions` times, split users 10-fold, mask
// test users at the unknown rate, train on everything visible, and score the
// hidden cells of the binarized prediction matrix. Splits, masks, and model
// initialization derive from the master seed independently of the mode, so
// plain and LDP runs under the same seed are paired; noise streams also mix
// in epsilon so that sweep points are independent.
inline EvalReport run_experiment(const Corpus& corpus,
                                 const ExperimentParams& params,
                                 std::uint64_t master_seed,
                                 unsigned threads = 1) {
  slot_count(params.time_granularity);
  if (!(params.unknown_rate > 0.0 && params.unknown_rate <= 1.0))
    throw std::invalid_argument("unknown rate must be in (0, 1]");
  if (!(params.epsilon > 0.0))
    throw std::invalid_argument("epsilon must be > 0");
  if (params.repetitions == 0)
    throw std::invalid_argument("repetitions must be >= 1");

  const BuiltDataset dataset =
      build_dataset(corpus, params.time_granularity, params.user_sets,
                    derive_seed(master_seed, 0xda7a));
  const PreferenceMatrix& full = dataset.matrix;
  const std::size_t m = full.n_users();
  const std::size_t n = full.n_items();

  ModelHyper hyper = params.model;
  if (params.mode == TrainMode::ldp) {
    hyper.normalization = GradNormalization::per_user;  // server aggregate
                                                        // averages per user
    if (params.ldp_learning_rate.has_value())
      hyper.learning_rate = *params.ldp_learning_rate;
  }

  const std::uint64_t eps_bits = std::bit_cast<std::uint64_t>(params.epsilon);

  auto run_rep = [&](std::size_t rep) -> eval_detail::RepOutcome {
    const std::uint64_t rep_seed = derive_seed(master_seed, 0x0e9, rep);
    Rng split_rng(derive_seed(rep_seed, 0x5911));
    const auto folds = kfold_split(m, params.folds, split_rng);
    ConfusionCounts pooled;
    try {
      for (std::size_t f = 0; f < folds.size(); ++f) {
        const Fold& fold = folds[f];
        std::vector<Rating> train_entries;
        struct HiddenCell {
          std::size_t user, item;
          std::uint8_t truth;
        };
        std::vector<HiddenCell> hidden;
        for (std::size_t i : fold.train_users)
          for (const ItemRating& e : full.user_ratings(i))
            train_entries.push_back({i, e.item, e.rating});
        for (std::size_t i : fold.test_users) {
          Rng mask_rng(derive_seed(rep_seed, 0x3a5b, i));
          const MaskResult mask =
              mask_unknown(full.user_ratings(i), params.unknown_rate,
                           mask_rng);
          for (const ItemRating& e : mask.visible)
            train_entries.push_back({i, e.item, e.rating});
          for (const ItemRating& e : mask.hidden)
            hidden.push_back(
                {i, e.item, static_cast<std::uint8_t>(e.rating == 1.0)});
        }
        PreferenceMatrix train(m, n, std::move(train_entries));
        if (train.n_observed() == 0)
          throw empty_data_error("fold has no visible ratings");

        const std::uint64_t train_seed = derive_seed(rep_seed, 0x7121, f);
        FactorModel model =
            params.mode == TrainMode::plain
                ? train_centralized(train, hyper, train_seed)
                : train_federated(
                      train, hyper,
                      NoiseConfig::calibrated(
                          params.epsilon, params.epsilon_split,
                          params.clip_bound, hyper.d,
                          derive_seed(rep_seed ^ eps_bits, 0x401e, f)),
                      train_seed)
                      .model;

        const BinaryMatrix bits = binarize(predict_matrix(model));
        if (params.score_full_matrix) {
          for (const Rating& e : full.entries()) {
            const std::uint8_t truth = e.value == 1.0;
            const std::uint8_t pred = bits.at(e.user, e.item);
            if (truth)
              pred ? ++pooled.tp : ++pooled.fn;
            else
              pred ? ++pooled.fp : ++pooled.tn;
          }
        } else {
          for (const HiddenCell& cell : hidden) {
            const std::uint8_t pred = bits.at(cell.user, cell.item);
            if (cell.truth)
              pred ? ++pooled.tp : ++pooled.fn;
            else
              pred ? ++pooled.fp : ++pooled.tn;
          }
        }
      }
    } catch (const divergence_error&) {
      return {std::nullopt, std::nullopt, std::nullopt, true};
    }
    return {fpr(pooled), recall(pooled), reconstruction_rate(pooled), false};
  };

  std::vector<eval_detail::RepOutcome> outcomes(params.repetitions);
  const unsigned n_workers =
      std::max(1u, std::min<unsigned>(threads, params.repetitions));
  if (n_workers == 1) {
    for (std::size_t r = 0; r < params.repetitions; ++r)
      outcomes[r] = run_rep(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
      for (;;) {
        const std::size_t r = next.fetch_add(1);
        if (r >= params.repetitions) return;
        try {
          outcomes[r] = run_rep(r);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  EvalReport report;
  report.time_granularity = params.time_granularity;
  report.epsilon = params.epsilon;
  report.unknown_rate = params.unknown_rate;
  report.mode = params.mode;
  report.repetitions = params.repetitions;
  for (const auto& o : outcomes) {
    report.raw_fpr.push_back(o.fpr);
    report.raw_recall.push_back(o.recall);
    report.raw_reconstruction.push_back(o.reconstruction);
    if (o.diverged) ++report.diverged_repetitions;
  }
  report.mean_fpr =
      eval_detail::mean_of_defined(report.raw_fpr, report.excluded_fpr);
  report.mean_recall =
      eval_detail::mean_of_defined(report.raw_recall, report.excluded_recall);
  report.mean_reconstruction = eval_detail::mean_of_defined(
      report.raw_reconstruction, report.excluded_reconstruction);
  return report;
}

enum class SweepAxis { time, epsilon, unknown_rate };

inline const char* sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::time: return "time";
    case SweepAxis::epsilon: return "epsilon";
    case SweepAxis::unknown_rate: return "unknown-rate";
  }
  return "?";
}

struct SweepRow {
  double axis_value = 0.0;
  EvalReport plain;
  EvalReport ldp;
};

// One run_experiment per value, in both modes under the same master seed
// (paired evaluation).
inline std::vector<SweepRow> sweep(const Corpus& corpus, SweepAxis axis,
                                   std::span<const double> values,
                                   ExperimentParams base,
                                   std::uint64_t master_seed,
                                   unsigned threads = 1) {
  std::vector<SweepRow> rows;
  rows.reserve(values.size());
  for (double value : values) {
    ExperimentParams p = base;
    switch (axis) {
      case SweepAxis::time:
        p.time_granularity = static_cast<int>(value);
        break;
      case SweepAxis::epsilon:
        p.epsilon = value;
        break;
      case SweepAxis::unknown_rate:
        p.unknown_rate = value;
        break;
    }
    SweepRow row;
    row.axis_value = value;
    p.mode = TrainMode::plain;
    row.plain = run_experiment(corpus, p, master_seed, threads);
    p.mode = TrainMode::ldp;
    row.ldp = run_experiment(corpus, p, master_seed, threads);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace locpriv
