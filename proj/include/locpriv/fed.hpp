#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "locpriv/errors.hpp"
#include "locpriv/ldp.hpp"
#include "locpriv/matrix.hpp"
#include "locpriv/mf.hpp"
#include "locpriv/rng.hpp"

// Simulated three-step training protocol. Each round: the server broadcasts
// the item matrix, every client updates its own user factor locally from its
// clean ratings and uploads one noised report per item, and the server
// updates the item matrix from the debiased aggregates. User factors never
// leave their client; the server-side code consumes NoisedReports only.

namespace locpriv {

struct ClientState {
  std::size_t user_index = 0;
  std::vector<ItemRating> ratings;  // sorted by item index
  std::vector<double> factor;       // u_i
  Rng rng;

  ClientState(std::size_t user, std::vector<ItemRating> r,
              std::vector<double> u, std::uint64_t seed)
      : user_index(user), ratings(std::move(r)), factor(std::move(u)),
        rng(seed) {}
};

struct RoundDiagnostics {
  std::size_t round = 0;
  double mean_aggregate_norm = 0.0;
  // Training loss of the assembled model; only available in noiseless
  // mode, NaN otherwise (the server never sees clean client factors).
  double loss_noiseless = std::numeric_limits<double>::quiet_NaN();
};

struct ServerState {
  Matrix item_factors;  // n x d
  std::size_t round = 0;
  std::vector<RoundDiagnostics> history;
};

// What every client receives at the start of a round. Holds copies, so later
// server mutation cannot reach a client.
struct ModelSnapshot {
  Matrix item_factors;
  std::size_t n_users = 0;
  std::size_t n_ratings = 0;  // global M, for per-rating normalization
};

inline ModelSnapshot broadcast(const ServerState& server, std::size_t n_users,
                               std::size_t n_ratings) {
  return ModelSnapshot{server.item_factors, n_users, n_ratings};
}

// Local step of one client: update u_i against the broadcast item matrix
// using the clean local ratings, then build the report list from the updated
// factor. Returns the reports; the factor update happens in place.
inline std::vector<NoisedReport> client_round(ClientState& client,
                                              const ModelSnapshot& snapshot,
                                              const NoiseConfig& config,
                                              const ModelHyper& hyper,
                                              double gamma) {
  if (snapshot.item_factors.cols() != client.factor.size())
    throw std::invalid_argument("client_round: dimension mismatch");
  const double divisor =
      hyper.normalization == GradNormalization::per_rating
          ? static_cast<double>(snapshot.n_ratings)
          : static_cast<double>(snapshot.n_users);
  const auto g = user_gradient_kernel(client.ratings, client.factor,
                                      snapshot.item_factors, divisor);
  for (std::size_t l = 0; l < client.factor.size(); ++l) {
    client.factor[l] -=
        gamma * (g[l] + 2.0 * hyper.lambda_u * client.factor[l]);
    if (!std::isfinite(client.factor[l]))
      throw divergence_error("u", client.user_index);
  }
  return client_report(client.ratings, client.factor, snapshot.item_factors,
                       config, client.rng);
}

// Server step: debias the per-item aggregates and apply the regularized
// update. Reports are reduced in client index order, so the result does not
// depend on the order clients finished.
inline void server_round(ServerState& server,
                         const std::vector<std::vector<NoisedReport>>& reports,
                         const NoiseConfig& config, double gamma,
                         const ModelHyper& hyper) {
  const std::size_t n_items = server.item_factors.rows();
  const std::size_t n_clients = reports.size();
  if (n_clients == 0)
    throw std::invalid_argument("server_round: no client reports");
  for (const auto& r : reports)
    if (r.size() != n_items)
      throw std::invalid_argument(
          "server_round: report list length != item count");

  std::vector<NoisedReport> column(n_clients);
  double norm_sum = 0.0;
  for (std::size_t j = 0; j < n_items; ++j) {
    for (std::size_t i = 0; i < n_clients; ++i) column[i] = reports[i][j];
    const auto grad = debias_aggregate(column, config.flip_p);
    norm_sum += norm2(grad);
    auto vj = server.item_factors.row(j);
    for (std::size_t l = 0; l < grad.size(); ++l) {
      vj[l] -= gamma * (grad[l] + 2.0 * hyper.lambda_v * vj[l]);
      if (!std::isfinite(vj[l])) throw divergence_error("v", j);
    }
  }
  server.round += 1;
  server.history.push_back(
      {server.round, norm_sum / static_cast<double>(n_items),
       std::numeric_limits<double>::quiet_NaN()});
}

struct TrainResult {
  FactorModel model;  // server item factors + client factors collected for
                      // evaluation (simulation only)
  std::vector<RoundDiagnostics> diagnostics;
};

// Runs the protocol for hyper.rounds rounds. Deterministic given the seed:
// initialization matches train_centralized for the same seed, and every
// client owns a stream derived from (seed, user index).
inline TrainResult train_federated(const PreferenceMatrix& ratings,
                                   const ModelHyper& hyper,
                                   const NoiseConfig& noise,
                                   std::uint64_t seed) {
  const std::size_t m = ratings.n_users();
  const std::size_t n = ratings.n_items();
  FactorModel model = make_model(hyper, m, n, derive_seed(seed, /*salt=*/1));

  std::vector<ClientState> clients;
  clients.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto span = ratings.user_ratings(i);
    std::vector<double> u(model.user_factors.row(i).begin(),
                          model.user_factors.row(i).end());
    clients.emplace_back(i,
                         std::vector<ItemRating>(span.begin(), span.end()),
                         std::move(u), derive_seed(noise.seed, 0x11, i));
  }

  ServerState server;
  server.item_factors = model.item_factors;

  std::vector<std::vector<NoisedReport>> reports(m);
  for (std::size_t t = 0; t < hyper.rounds; ++t) {
    const ModelSnapshot snapshot =
        broadcast(server, m, ratings.n_observed());
    const double gamma = hyper.learning_rate.at(t);
    for (std::size_t i = 0; i < m; ++i)
      reports[i] = client_round(clients[i], snapshot, noise, hyper, gamma);
    server_round(server, reports, noise, gamma, hyper);
    if (noise.is_noiseless()) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < hyper.d; ++l)
          model.user_factors(i, l) = clients[i].factor[l];
      FactorModel probe = model;
      probe.item_factors = server.item_factors;
      server.history.back().loss_noiseless = loss(ratings, probe);
    }
  }

  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < hyper.d; ++l)
      model.user_factors(i, l) = clients[i].factor[l];
  model.item_factors = server.item_factors;
  return TrainResult{std::move(model), std::move(server.history)};
}

}  // namespace locpriv
