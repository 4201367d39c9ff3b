#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "locpriv/matrix.hpp"
#include "locpriv/rng.hpp"

namespace locpriv {

// Flip mass for the three-case randomized response so that the mechanism is
// eps_y-LDP: the worst output-probability ratio is (1 - p/2)/(p/2) and
// p = 2/(exp(eps_y) + 1) makes that ratio exactly exp(eps_y).
// eps_y = 0 gives p = 1 (uniform output); eps_y -> inf gives p -> 0.
inline double calibrate_flip(double epsilon_y) {
  if (epsilon_y < 0.0 || std::isnan(epsilon_y))
    throw std::invalid_argument("calibrate_flip: epsilon must be >= 0");
  return 2.0 / (std::exp(epsilon_y) + 1.0);
}

// Privacy parameters of one client report. epsilon_total is split between
// the visit indicator (randomized response) and the gradient values
// (Laplace). The Laplace scale covers the L1 sensitivity of a clipped
// d-vector: each of d components can move by at most 2*clip_bound between
// two inputs, so b = 2 * clip_bound * d / epsilon_g.
struct NoiseConfig {
  double epsilon_total = 0.0;
  double epsilon_y = 0.0;
  double epsilon_g = 0.0;
  double flip_p = 0.0;        // p
  double laplace_scale = 0.0; // b
  double clip_bound = 1.0;    // delta
  std::uint64_t seed = 0;

  static NoiseConfig calibrated(double epsilon_total, double split_y,
                                double clip_bound, std::size_t d,
                                std::uint64_t seed) {
    if (!(epsilon_total > 0.0))
      throw std::invalid_argument("epsilon must be > 0");
    if (!(split_y > 0.0 && split_y < 1.0))
      throw std::invalid_argument("epsilon split must be in (0, 1)");
    if (!(clip_bound > 0.0))
      throw std::invalid_argument("clip bound must be > 0");
    if (d == 0) throw std::invalid_argument("dimension must be >= 1");
    if (std::isinf(epsilon_total)) return noiseless(seed);
    NoiseConfig cfg;
    cfg.epsilon_total = epsilon_total;
    cfg.epsilon_y = split_y * epsilon_total;
    cfg.epsilon_g = epsilon_total - cfg.epsilon_y;
    cfg.flip_p = calibrate_flip(cfg.epsilon_y);
    cfg.laplace_scale =
        2.0 * clip_bound * static_cast<double>(d) / cfg.epsilon_g;
    cfg.clip_bound = clip_bound;
    cfg.seed = seed;
    return cfg;
  }

  // epsilon -> inf limit: no flips, no Laplace noise, no clipping. Used for
  // the plain-equals-federated checks.
  static NoiseConfig noiseless(std::uint64_t seed = 0) {
    NoiseConfig cfg;
    cfg.epsilon_total = std::numeric_limits<double>::infinity();
    cfg.epsilon_y = std::numeric_limits<double>::infinity();
    cfg.epsilon_g = std::numeric_limits<double>::infinity();
    cfg.flip_p = 0.0;
    cfg.laplace_scale = 0.0;
    cfg.clip_bound = std::numeric_limits<double>::infinity();
    cfg.seed = seed;
    return cfg;
  }

  bool is_noiseless() const { return flip_p == 0.0 && laplace_scale == 0.0; }
};

// One per-item upload: perturbed visit indicator plus perturbed gradient
// vector. A client always sends one report per item so the upload pattern
// itself reveals nothing.
struct NoisedReport {
  std::size_t item_index = 0;
  std::uint8_t y_star = 0;
  std::vector<double> g_star;
};

// Three-case randomized response: output 0 with probability p/2, 1 with
// probability p/2, the true bit otherwise.
inline std::uint8_t randomized_response(std::uint8_t y, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("randomized_response: p must be in [0, 1]");
  const double u = rng.uniform();
  if (u < p / 2.0) return 0;
  if (u < p) return 1;
  return y;
}

inline std::vector<double> clip_gradient(std::span<const double> g,
                                         double bound) {
  if (!(bound > 0.0))
    throw std::invalid_argument("clip_gradient: bound must be > 0");
  std::vector<double> out(g.begin(), g.end());
  for (double& v : out) v = std::clamp(v, -bound, bound);
  return out;
}

inline std::vector<double> laplace_perturb(std::span<const double> g,
                                           double scale, Rng& rng) {
  if (!(scale > 0.0))
    throw std::invalid_argument("laplace_perturb: scale must be > 0");
  std::vector<double> out(g.begin(), g.end());
  for (double& v : out) v += rng.laplace(scale);
  return out;
}

// Builds the full report list of one client for one round. For every item
// j = 0..n_items-1, visited or not:
//   g_ij = -2 u_i (r_ij - u_i.v_j) if visited, else the zero vector,
// clipped to [-delta, delta] per component and Laplace-perturbed; the visit
// bit goes through randomized response. user_ratings must be sorted by item
// index.
inline std::vector<NoisedReport> client_report(
    std::span<const ItemRating> user_ratings, std::span<const double> u,
    const Matrix& item_factors, const NoiseConfig& config, Rng& rng) {
  if (item_factors.cols() != u.size())
    throw std::invalid_argument("client_report: dimension mismatch");
  const std::size_t d = u.size();
  std::vector<NoisedReport> reports;
  reports.reserve(item_factors.rows());
  std::size_t next_rated = 0;
  for (std::size_t j = 0; j < item_factors.rows(); ++j) {
    NoisedReport rep;
    rep.item_index = j;
    std::uint8_t y = 0;
    std::vector<double> g(d, 0.0);
    if (next_rated < user_ratings.size() &&
        user_ratings[next_rated].item == j) {
      y = 1;
      const auto v = item_factors.row(j);
      const double resid = user_ratings[next_rated].rating - dot(u, v);
      for (std::size_t l = 0; l < d; ++l) g[l] = -2.0 * u[l] * resid;
      ++next_rated;
    }
    if (std::isfinite(config.clip_bound))
      g = clip_gradient(g, config.clip_bound);
    if (config.laplace_scale > 0.0)
      g = laplace_perturb(g, config.laplace_scale, rng);
    rep.g_star = std::move(g);
    rep.y_star = randomized_response(y, config.flip_p, rng);
    reports.push_back(std::move(rep));
  }
  return reports;
}

// Server-side unbiased estimate of the average visited gradient of one item:
//   (1/n) sum_i ((y*_i - p/2) / (1 - p)) g*_i.
// E[(y* - p/2)/(1 - p)] = y for y in {0,1}, so the expectation over the
// noise equals (1/n) sum y_i g_i.
inline std::vector<double> debias_aggregate(
    std::span<const NoisedReport> reports, double p) {
  if (reports.empty())
    throw std::invalid_argument("debias_aggregate: no reports");
  if (!(p >= 0.0 && p < 1.0))
    throw std::invalid_argument(
        "debias_aggregate: p must be in [0, 1); the estimator is undefined "
        "at p = 1");
  const std::size_t item = reports.front().item_index;
  const std::size_t d = reports.front().g_star.size();
  std::vector<double> acc(d, 0.0);
  for (const NoisedReport& rep : reports) {
    if (rep.item_index != item)
      throw std::invalid_argument(
          "debias_aggregate: reports refer to different items");
    if (rep.g_star.size() != d)
      throw std::invalid_argument("debias_aggregate: dimension mismatch");
    const double coeff =
        (static_cast<double>(rep.y_star) - p / 2.0) / (1.0 - p);
    for (std::size_t l = 0; l < d; ++l) acc[l] += coeff * rep.g_star[l];
  }
  for (double& v : acc) v /= static_cast<double>(reports.size());
  return acc;
}

}  // namespace locpriv
