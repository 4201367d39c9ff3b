#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "locpriv/ldp.hpp"
#include "../support/oracles.hpp"

using namespace locpriv;

TEST_CASE("calibrate_flip: limits and the ln(3) hand value") {
  CHECK(calibrate_flip(std::numeric_limits<double>::infinity()) == 0.0);
  CHECK(calibrate_flip(0.0) == 1.0);
  const double p = calibrate_flip(std::log(3.0));
  CHECK(p == doctest::Approx(0.5).epsilon(1e-12));
  // Output ratio at that p: (1 - p/2) / (p/2) = 3.
  CHECK((1.0 - p / 2.0) / (p / 2.0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_THROWS_AS(calibrate_flip(-0.1), std::invalid_argument);
  for (double eps : {0.001, 0.1, 1.0, 5.0}) {
    const double q = calibrate_flip(eps);
    CHECK(q > 0.0);
    CHECK(q < 1.0);
  }
}

TEST_CASE("randomized_response: degenerate p and basic distribution") {
  Rng rng(101);
  for (int k = 0; k < 200; ++k) {
    CHECK(randomized_response(0, 0.0, rng) == 0);
    CHECK(randomized_response(1, 0.0, rng) == 1);
  }
  CHECK_THROWS_AS(randomized_response(1, -0.01, rng), std::invalid_argument);
  CHECK_THROWS_AS(randomized_response(1, 1.01, rng), std::invalid_argument);

  // p = 1: the output is uniform regardless of the input.
  const int trials = 100000;
  int ones = 0;
  for (int k = 0; k < trials; ++k) ones += randomized_response(1, 1.0, rng);
  CHECK(std::abs(ones / double(trials) - 0.5) < 0.01);
}

TEST_CASE("randomized_response satisfies the epsilon ratio bound") {
  // Empirical Pr[out = s | y] ratios stay within exp(eps) up to three
  // Wilson-interval widths.
  const double eps = 1.0;
  const double p = calibrate_flip(eps);
  const int trials = 200000;
  Rng rng(202);
  int out1_given1 = 0, out1_given0 = 0;
  for (int k = 0; k < trials; ++k) out1_given1 += randomized_response(1, p, rng);
  for (int k = 0; k < trials; ++k) out1_given0 += randomized_response(0, p, rng);
  const double p1 = out1_given1 / double(trials);
  const double p0 = out1_given0 / double(trials);
  const double w1 = oracles::wilson_half_width(p1, trials, 1.0);
  const double w0 = oracles::wilson_half_width(p0, trials, 1.0);
  const double ratio = p1 / p0;
  const double slack = ratio * 3.0 * (w1 / p1 + w0 / p0);
  CHECK(ratio <= std::exp(eps) + slack);
  // And the ratio should actually be near exp(eps), not just below it.
  CHECK(ratio == doctest::Approx(std::exp(eps)).epsilon(0.05));
}

TEST_CASE("clip_gradient clamps, preserves in-range values, is idempotent") {
  const std::vector<double> inside = {0.3, -0.9, 0.0};
  CHECK(clip_gradient(inside, 1.0) == inside);

  const std::vector<double> wild = {10.0, -10.0};
  const auto clipped = clip_gradient(wild, 1.0);
  CHECK(clipped == std::vector<double>{1.0, -1.0});

  Rng rng(303);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> g(4);
    for (double& v : g) v = rng.uniform(-5.0, 5.0);
    const auto once = clip_gradient(g, 0.7);
    CHECK(clip_gradient(once, 0.7) == once);
    for (double v : once) CHECK(std::abs(v) <= 0.7);
  }
  CHECK_THROWS_AS(clip_gradient(inside, 0.0), std::invalid_argument);
}

TEST_CASE("laplace_perturb: moments and symmetry") {
  Rng guard_rng(1);
  CHECK_THROWS_AS(laplace_perturb(std::vector<double>{1.0}, 0.0, guard_rng),
                  std::invalid_argument);

  // b -> 0+: output converges to the input.
  Rng tiny_rng(404);
  const std::vector<double> g = {0.25, -1.5};
  const auto nearly = laplace_perturb(g, 1e-300, tiny_rng);
  CHECK(std::abs(nearly[0] - g[0]) < 1e-290);
  CHECK(std::abs(nearly[1] - g[1]) < 1e-290);

  const double b = 0.8;
  const int n = 100000;
  Rng rng(505);
  std::vector<double> noise(n);
  const std::vector<double> zero = {0.0};
  for (int k = 0; k < n; ++k) noise[k] = laplace_perturb(zero, b, rng)[0];
  double mean = 0.0;
  for (double v : noise) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : noise) var += (v - mean) * (v - mean);
  var /= n - 1;
  CHECK(std::abs(mean) < 3.0 * b / std::sqrt(double(n)));
  CHECK(var == doctest::Approx(2.0 * b * b).epsilon(0.05));

  // Symmetry: the mirrored stream (same seed, negated draws) has the same
  // empirical distribution; two-sample Kolmogorov-Smirnov distance is tiny.
  std::vector<double> mirrored(noise);
  for (double& v : mirrored) v = -v;
  std::sort(noise.begin(), noise.end());
  std::sort(mirrored.begin(), mirrored.end());
  double ks = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < noise.size() && ib < mirrored.size()) {
    if (noise[ia] <= mirrored[ib]) ++ia; else ++ib;
    ks = std::max(ks, std::abs(double(ia) - double(ib)) / double(n));
  }
  // 3 * sqrt(2/n) is far beyond the usual 95% KS threshold.
  CHECK(ks < 3.0 * std::sqrt(2.0 / double(n)));
}

TEST_CASE("NoiseConfig calibration pins the documented invariants") {
  const NoiseConfig cfg = NoiseConfig::calibrated(0.5, 0.5, 1.0, 4, 42);
  CHECK(cfg.epsilon_y + cfg.epsilon_g ==
        doctest::Approx(cfg.epsilon_total).epsilon(1e-12));
  CHECK(cfg.flip_p ==
        doctest::Approx(2.0 / (std::exp(cfg.epsilon_y) + 1.0)).epsilon(1e-12));
  CHECK(cfg.laplace_scale ==
        doctest::Approx(2.0 * cfg.clip_bound * 4 / cfg.epsilon_g)
            .epsilon(1e-12));
  CHECK(cfg.flip_p > 0.0);
  CHECK(cfg.flip_p < 1.0);

  CHECK_THROWS_AS(NoiseConfig::calibrated(0.0, 0.5, 1.0, 4, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(NoiseConfig::calibrated(1.0, 0.0, 1.0, 4, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(NoiseConfig::calibrated(1.0, 0.5, 0.0, 4, 1),
                  std::invalid_argument);

  // Infinite budget degenerates to the noiseless mechanism.
  const NoiseConfig inf_cfg = NoiseConfig::calibrated(
      std::numeric_limits<double>::infinity(), 0.5, 1.0, 4, 7);
  CHECK(inf_cfg.is_noiseless());
  CHECK(NoiseConfig::noiseless().is_noiseless());
}

TEST_CASE("client_report: anti-leak contract and the noiseless limit") {
  const std::size_t n_items = 6;
  Matrix items(n_items, 2);
  Rng init(606);
  for (double& v : items.data()) v = init.uniform(-0.5, 0.5);
  const std::vector<double> u = {0.4, -0.2};
  const std::vector<ItemRating> visited = {{1, 1.0}, {4, 0.0}};

  const NoiseConfig noiseless = NoiseConfig::noiseless();
  Rng rng_a(707);
  const auto reports = client_report(visited, u, items, noiseless, rng_a);
  REQUIRE(reports.size() == n_items);  // one report per item, visited or not
  for (std::size_t j = 0; j < n_items; ++j)
    CHECK(reports[j].item_index == j);

  for (std::size_t j = 0; j < n_items; ++j) {
    const bool is_visited = j == 1 || j == 4;
    CHECK(reports[j].y_star == (is_visited ? 1 : 0));
    if (!is_visited) {
      for (double v : reports[j].g_star) CHECK(v == 0.0);
    }
  }
  // Visited gradient equals -2 u (r - u.v) exactly in the noiseless limit.
  const double resid1 = 1.0 - dot(std::span<const double>(u), items.row(1));
  CHECK(reports[1].g_star[0] == doctest::Approx(-2.0 * u[0] * resid1));
  CHECK(reports[1].g_star[1] == doctest::Approx(-2.0 * u[1] * resid1));

  // A client with no visits still emits n_items reports.
  Rng rng_b(708);
  const auto empty_reports =
      client_report({}, u, items, NoiseConfig::calibrated(1.0, 0.5, 1.0, 2, 9),
                    rng_b);
  CHECK(empty_reports.size() == n_items);

  // Identical data and seeds produce identical reports.
  const NoiseConfig noisy = NoiseConfig::calibrated(0.5, 0.5, 1.0, 2, 13);
  Rng rng_c(909), rng_d(909);
  const auto r1 = client_report(visited, u, items, noisy, rng_c);
  const auto r2 = client_report(visited, u, items, noisy, rng_d);
  REQUIRE(r1.size() == r2.size());
  for (std::size_t j = 0; j < r1.size(); ++j) {
    CHECK(r1[j].y_star == r2[j].y_star);
    CHECK(r1[j].g_star == r2[j].g_star);
  }

  const std::vector<double> wrong_dim = {1.0};
  Rng rng_e(910);
  CHECK_THROWS_AS(client_report(visited, wrong_dim, items, noisy, rng_e),
                  std::invalid_argument);
}

TEST_CASE("debias_aggregate: identity cases and guards") {
  // p = 0 and no Laplace noise: the aggregate is the plain average of y * g.
  std::vector<NoisedReport> reports;
  reports.push_back({3, 1, {1.0, -2.0}});
  reports.push_back({3, 0, {5.0, 5.0}});   // y = 0 contributes nothing
  reports.push_back({3, 1, {0.5, 0.5}});
  const auto agg = debias_aggregate(reports, 0.0);
  CHECK(agg[0] == doctest::Approx((1.0 + 0.5) / 3.0).epsilon(1e-15));
  CHECK(agg[1] == doctest::Approx((-2.0 + 0.5) / 3.0).epsilon(1e-15));

  // Single honest report.
  std::vector<NoisedReport> one;
  one.push_back({0, 1, {0.7}});
  CHECK(debias_aggregate(one, 0.0)[0] == doctest::Approx(0.7));

  CHECK_THROWS_AS(debias_aggregate(one, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(debias_aggregate({}, 0.0), std::invalid_argument);
  std::vector<NoisedReport> mixed;
  mixed.push_back({0, 1, {1.0}});
  mixed.push_back({1, 1, {1.0}});
  CHECK_THROWS_AS(debias_aggregate(mixed, 0.0), std::invalid_argument);
}

TEST_CASE("debias_aggregate is unbiased under randomized response + Laplace") {
  // Fixed clean data; Monte Carlo over the noise. The mean of the estimator
  // must sit within three standard errors of (1/n) sum y_i g_i.
  const std::size_t n = 30, d = 2;
  const double p = 0.4, b = 0.6;
  Rng data_rng(811);
  std::vector<std::uint8_t> y(n);
  std::vector<std::vector<double>> g(n, std::vector<double>(d));
  std::vector<double> truth(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = data_rng.bernoulli(0.6);
    for (std::size_t l = 0; l < d; ++l) g[i][l] = data_rng.uniform(-1.0, 1.0);
    for (std::size_t l = 0; l < d; ++l)
      truth[l] += y[i] ? g[i][l] : 0.0;
  }
  for (double& v : truth) v /= double(n);

  const int resamples = 3000;
  Rng noise_rng(812);
  std::vector<double> sum(d, 0.0), sumsq(d, 0.0);
  for (int rep = 0; rep < resamples; ++rep) {
    std::vector<NoisedReport> reports(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Unvisited items upload a perturbed zero vector, like the mechanism.
      const std::vector<double> upload =
          y[i] ? g[i] : std::vector<double>(d, 0.0);
      reports[i].item_index = 0;
      reports[i].y_star = randomized_response(y[i], p, noise_rng);
      reports[i].g_star = laplace_perturb(upload, b, noise_rng);
    }
    const auto est = debias_aggregate(reports, p);
    for (std::size_t l = 0; l < d; ++l) {
      sum[l] += est[l];
      sumsq[l] += est[l] * est[l];
    }
  }
  for (std::size_t l = 0; l < d; ++l) {
    const double mean = sum[l] / resamples;
    const double var = sumsq[l] / resamples - mean * mean;
    const double se = std::sqrt(var / resamples);
    CHECK(std::abs(mean - truth[l]) < 3.0 * se);
  }
}
