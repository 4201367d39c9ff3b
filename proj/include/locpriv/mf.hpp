#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "locpriv/errors.hpp"
#include "locpriv/matrix.hpp"
#include "locpriv/rng.hpp"

namespace locpriv {

// Denominator of the data-fit gradient. per_rating divides by the number of
// observed ratings M; per_user divides by the number of users, which is what
// the federated aggregate computes (the server averages one report per user).
// Both describe the same set of stationary points up to a rescaling of the
// learning rate, but trajectories differ, so the choice is explicit.
enum class GradNormalization { per_rating, per_user };

struct LearningRateSchedule {
  double gamma0 = 0.1;
  double decay = 0.0;

  double at(std::size_t t) const {
    return gamma0 / (1.0 + decay * static_cast<double>(t));
  }
};

struct FactorModel {
  Matrix user_factors;  // m x d, one row per user (u_i)
  Matrix item_factors;  // n x d, one row per item (v_j)
  double lambda_u = 0.0;
  double lambda_v = 0.0;
  LearningRateSchedule learning_rate;
  std::size_t rounds = 0;  // k

  std::size_t n_users() const { return user_factors.rows(); }
  std::size_t n_items() const { return item_factors.rows(); }
  std::size_t dim() const { return user_factors.cols(); }
};

// Factors i.i.d. uniform on [-scale, scale]. The user matrix is filled
// first, then the item matrix, so a fixed seed pins every entry.
inline FactorModel init_model(std::size_t m, std::size_t n, std::size_t d,
                              std::uint64_t seed, double scale) {
  if (m == 0 || n == 0 || d == 0)
    throw std::invalid_argument("init_model: dimensions must be >= 1");
  if (scale < 0.0)
    throw std::invalid_argument("init_model: scale must be >= 0");
  FactorModel model;
  model.user_factors = Matrix(m, d);
  model.item_factors = Matrix(n, d);
  Rng rng(seed);
  for (double& v : model.user_factors.data()) v = rng.uniform(-scale, scale);
  for (double& v : model.item_factors.data()) v = rng.uniform(-scale, scale);
  return model;
}

inline double gradient_divisor(const PreferenceMatrix& ratings,
                               GradNormalization norm) {
  return norm == GradNormalization::per_rating
             ? static_cast<double>(ratings.n_observed())
             : static_cast<double>(ratings.n_users());
}

// Mean squared error over observed cells plus the two regularization terms:
// (1/M) sum (r_ij - u_i.v_j)^2 + lambda_u sum |u_i|^2 + lambda_v sum |v_j|^2.
inline double loss(const PreferenceMatrix& ratings, const FactorModel& model) {
  if (ratings.n_observed() == 0)
    throw empty_data_error("loss requires at least one observed rating");
  double fit = 0.0;
  for (const Rating& e : ratings.entries()) {
    const double resid =
        e.value - dot(model.user_factors.row(e.user),
                      model.item_factors.row(e.item));
    fit += resid * resid;
  }
  fit /= static_cast<double>(ratings.n_observed());
  double reg_u = 0.0;
  for (std::size_t i = 0; i < model.n_users(); ++i)
    for (double v : model.user_factors.row(i)) reg_u += v * v;
  double reg_v = 0.0;
  for (std::size_t j = 0; j < model.n_items(); ++j)
    for (double v : model.item_factors.row(j)) reg_v += v * v;
  return fit + model.lambda_u * reg_u + model.lambda_v * reg_v;
}

// Data-fit gradient of one user factor given that user's ratings against an
// item matrix: -(2/divisor) sum_j v_j (r_ij - u_i.v_j). Shared between the
// centralized round and the client-local update so the two paths are
// arithmetically identical.
inline std::vector<double> user_gradient_kernel(
    std::span<const ItemRating> user_ratings, std::span<const double> u,
    const Matrix& item_factors, double divisor) {
  std::vector<double> acc(u.size(), 0.0);
  for (const ItemRating& e : user_ratings) {
    const auto v = item_factors.row(e.item);
    const double resid = e.rating - dot(u, v);
    for (std::size_t l = 0; l < acc.size(); ++l) acc[l] += v[l] * resid;
  }
  for (double& a : acc) a = a * -2.0 / divisor;
  return acc;
}

// Gradient of the data-fit term with respect to u_i. Empty sum (user has no
// observations) gives the zero vector.
inline std::vector<double> grad_user(
    const PreferenceMatrix& ratings, const FactorModel& model, std::size_t i,
    GradNormalization norm = GradNormalization::per_rating) {
  ratings.check_user(i);
  return user_gradient_kernel(ratings.user_ratings(i),
                              model.user_factors.row(i), model.item_factors,
                              gradient_divisor(ratings, norm));
}

// Gradient of the data-fit term with respect to v_j, summing over the users
// who rated item j in ascending user order.
inline std::vector<double> grad_item(
    const PreferenceMatrix& ratings, const FactorModel& model, std::size_t j,
    GradNormalization norm = GradNormalization::per_rating) {
  ratings.check_item(j);
  const auto vj = model.item_factors.row(j);
  std::vector<double> acc(model.dim(), 0.0);
  for (const UserRating& e : ratings.item_ratings(j)) {
    const auto u = model.user_factors.row(e.user);
    const double resid = e.rating - dot(u, vj);
    for (std::size_t l = 0; l < acc.size(); ++l) acc[l] += u[l] * resid;
  }
  const double divisor = gradient_divisor(ratings, norm);
  for (double& a : acc) a = a * -2.0 / divisor;
  return acc;
}

// One full-batch round: every u_i is updated from the round-start model,
// then every v_j from the u-updated model. Fixed update order makes runs
// with equal seeds bitwise reproducible.
inline FactorModel sgd_round(
    const PreferenceMatrix& ratings, const FactorModel& model, std::size_t t,
    GradNormalization norm = GradNormalization::per_rating) {
  if (t >= model.rounds)
    throw std::invalid_argument("round index " + std::to_string(t) +
                                " outside schedule of " +
                                std::to_string(model.rounds));
  const double gamma = model.learning_rate.at(t);
  const double divisor = gradient_divisor(ratings, norm);

  FactorModel next = model;
  for (std::size_t i = 0; i < model.n_users(); ++i) {
    const auto g = user_gradient_kernel(ratings.user_ratings(i),
                                        model.user_factors.row(i),
                                        model.item_factors, divisor);
    auto u_old = model.user_factors.row(i);
    auto u_new = next.user_factors.row(i);
    for (std::size_t l = 0; l < g.size(); ++l)
      u_new[l] = u_old[l] - gamma * (g[l] + 2.0 * model.lambda_u * u_old[l]);
    for (double v : u_new)
      if (!std::isfinite(v)) throw divergence_error("u", i);
  }
  for (std::size_t j = 0; j < model.n_items(); ++j) {
    // Item gradients see the already-updated user factors.
    std::vector<double> acc(model.dim(), 0.0);
    const auto vj = model.item_factors.row(j);
    for (const UserRating& e : ratings.item_ratings(j)) {
      const auto u = next.user_factors.row(e.user);
      const double resid = e.rating - dot(u, vj);
      for (std::size_t l = 0; l < acc.size(); ++l) acc[l] += u[l] * resid;
    }
    auto v_new = next.item_factors.row(j);
    for (std::size_t l = 0; l < acc.size(); ++l) {
      const double g = acc[l] * -2.0 / divisor;
      v_new[l] = vj[l] - gamma * (g + 2.0 * model.lambda_v * vj[l]);
      if (!std::isfinite(v_new[l])) throw divergence_error("v", j);
    }
  }
  return next;
}

inline double predict(const FactorModel& model, std::size_t i, std::size_t j) {
  if (i >= model.n_users())
    throw std::invalid_argument("user index " + std::to_string(i) +
                                " out of range");
  if (j >= model.n_items())
    throw std::invalid_argument("item index " + std::to_string(j) +
                                " out of range");
  return dot(model.user_factors.row(i), model.item_factors.row(j));
}

inline Matrix predict_matrix(const FactorModel& model) {
  Matrix out(model.n_users(), model.n_items());
  for (std::size_t i = 0; i < model.n_users(); ++i)
    for (std::size_t j = 0; j < model.n_items(); ++j)
      out(i, j) = dot(model.user_factors.row(i), model.item_factors.row(j));
  return out;
}

// Threshold at the mean of all prediction entries; ties (entry == mean) map
// to 1. Adding a constant to every prediction shifts the mean by the same
// amount and leaves the output unchanged.
inline BinaryMatrix binarize(const Matrix& predictions) {
  if (predictions.size() == 0)
    throw std::invalid_argument("binarize: empty prediction matrix");
  double sum = 0.0;
  for (double v : predictions.data()) {
    if (!std::isfinite(v))
      throw std::invalid_argument("binarize: non-finite prediction entry");
    sum += v;
  }
  const double threshold = sum / static_cast<double>(predictions.size());
  BinaryMatrix out{predictions.rows(), predictions.cols(), {}};
  out.values.reserve(predictions.size());
  for (double v : predictions.data())
    out.values.push_back(v >= threshold ? 1 : 0);
  return out;
}

// Convenience wrapper bundling the hyperparameters used by both training
// paths.
struct ModelHyper {
  std::size_t d = 8;
  double lambda_u = 1e-3;
  double lambda_v = 1e-3;
  LearningRateSchedule learning_rate{0.3, 0.02};
  std::size_t rounds = 150;
  double init_scale = 0.1;
  GradNormalization normalization = GradNormalization::per_rating;
};

inline FactorModel make_model(const ModelHyper& hyper, std::size_t m,
                              std::size_t n, std::uint64_t seed) {
  FactorModel model = init_model(m, n, hyper.d, seed, hyper.init_scale);
  model.lambda_u = hyper.lambda_u;
  model.lambda_v = hyper.lambda_v;
  model.learning_rate = hyper.learning_rate;
  model.rounds = hyper.rounds;
  return model;
}

inline FactorModel train_centralized(const PreferenceMatrix& ratings,
                                     const ModelHyper& hyper,
                                     std::uint64_t seed) {
  FactorModel model = make_model(hyper, ratings.n_users(), ratings.n_items(),
                                 derive_seed(seed, /*salt=*/1));
  for (std::size_t t = 0; t < hyper.rounds; ++t)
    model = sgd_round(ratings, model, t, hyper.normalization);
  return model;
}

}  // namespace locpriv
