#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "locpriv/csv.hpp"
#include "locpriv/fed.hpp"
#include "locpriv/mf.hpp"

// Trained-model and diagnostics files written by the train command.

namespace locpriv {

namespace model_io_detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.at(0).size();
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rows.at(i).at(j).get<double>();
  return m;
}

}  // namespace model_io_detail

struct ModelFile {
  std::string mode;
  std::uint64_t seed = 0;
  std::size_t rounds = 0;
  double final_train_loss = 0.0;
  FactorModel model;
};

inline void write_model_json(const std::string& path, const ModelFile& file) {
  nlohmann::json j;
  j["mode"] = file.mode;
  j["seed"] = file.seed;
  j["rounds"] = file.rounds;
  j["d"] = file.model.dim();
  j["n_users"] = file.model.n_users();
  j["n_items"] = file.model.n_items();
  j["final_train_loss"] = file.final_train_loss;
  j["user_factors"] = model_io_detail::matrix_to_json(file.model.user_factors);
  j["item_factors"] = model_io_detail::matrix_to_json(file.model.item_factors);
  auto out = csv_detail::open_for_write(path);
  out << j.dump(1) << "\n";
}

inline ModelFile read_model_json(const std::string& path) {
  auto in = csv_detail::open_for_read(path);
  nlohmann::json j;
  in >> j;
  ModelFile file;
  file.mode = j.at("mode").get<std::string>();
  file.seed = j.at("seed").get<std::uint64_t>();
  file.rounds = j.at("rounds").get<std::size_t>();
  file.final_train_loss = j.at("final_train_loss").get<double>();
  file.model.user_factors =
      model_io_detail::matrix_from_json(j.at("user_factors"));
  file.model.item_factors =
      model_io_detail::matrix_from_json(j.at("item_factors"));
  return file;
}

// One row per round: (round, mean_aggregate_norm, loss_if_noiseless_mode).
// The loss column is empty when the mode cannot observe it.
inline void write_diagnostics_csv(const std::string& path,
                                  const std::vector<RoundDiagnostics>& rows) {
  auto out = csv_detail::open_for_write(path);
  out << "round,mean_aggregate_norm,loss_if_noiseless_mode\n";
  for (const RoundDiagnostics& d : rows) {
    char norm[32], lo[32];
    std::snprintf(norm, sizeof(norm), "%.9g", d.mean_aggregate_norm);
    out << d.round << ',' << norm << ',';
    if (std::isfinite(d.loss_noiseless)) {
      std::snprintf(lo, sizeof(lo), "%.9g", d.loss_noiseless);
      out << lo;
    }
    out << "\n";
  }
}

// Centralized training with the same per-round diagnostics the federated
// loop records: mean item-gradient norm and the training loss at round end.
inline std::pair<FactorModel, std::vector<RoundDiagnostics>>
train_centralized_with_diagnostics(const PreferenceMatrix& ratings,
                                   const ModelHyper& hyper,
                                   std::uint64_t seed) {
  FactorModel model = make_model(hyper, ratings.n_users(), ratings.n_items(),
                                 derive_seed(seed, /*salt=*/1));
  std::vector<RoundDiagnostics> diags;
  for (std::size_t t = 0; t < hyper.rounds; ++t) {
    model = sgd_round(ratings, model, t, hyper.normalization);
    double norm_sum = 0.0;
    for (std::size_t j = 0; j < ratings.n_items(); ++j)
      norm_sum += norm2(grad_item(ratings, model, j, hyper.normalization));
    diags.push_back({t + 1,
                     norm_sum / static_cast<double>(ratings.n_items()),
                     loss(ratings, model)});
  }
  return {std::move(model), std::move(diags)};
}

}  // namespace locpriv
