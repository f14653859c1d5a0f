#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "abstain/confidence.hpp"
#include "abstain/rng.hpp"
#include "oracles.hpp"

using namespace abstain;

TEST_CASE("reference-free confidence functions") {
  CHECK(conf_max({0.2, 0.9, 0.7}) == 0.9);
  CHECK(conf_max({-2.0, -1.0}) == -1.0);
  CHECK(conf_max({5.0, 5.0, 5.0}) == 5.0);

  CHECK(conf_std({1.0, 2.0, 3.0}) ==
        doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
  CHECK(conf_std({4.2, 4.2, 4.2, 4.2}) == 0.0);
  CHECK(conf_std({0.0, 2.0}) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(conf_gap12({0.2, 0.9, 0.7}) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(conf_gap12({1.0, 1.0, 1.0}) == 0.0);
  CHECK(conf_gap12({3.0, 1.0}) == 2.0);
}

TEST_CASE("conf_std matches an independent two-pass oracle") {
  rng::SplitMix64 gen(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto k = static_cast<std::size_t>(gen.next_int(2, 12));
    ScoreVector z(k);
    for (double& v : z) v = gen.next_normal(0.0, 3.0);
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= static_cast<double>(k);
    double ss = 0.0;
    for (double v : z) ss += (v - mean) * (v - mean);
    CHECK(conf_std(z) ==
          doctest::Approx(std::sqrt(ss / static_cast<double>(k)))
              .epsilon(1e-10));
  }
}

TEST_CASE("derive_reference pairs sorted scores with metric values") {
  const auto ds = make_dataset({RerankInstance{"a", {0.9, 0.1}, {1, 0}},
                                RerankInstance{"b", {0.1, 0.9}, {1, 0}}});
  const auto ap_pairs = derive_reference(ds, MetricKind::AP);
  REQUIRE(ap_pairs.size() == 2);
  CHECK(ap_pairs[0].sorted_scores == ScoreVector{0.1, 0.9});
  CHECK(ap_pairs[0].metric_value == 1.0);

  const auto rr_pairs = derive_reference(ds, MetricKind::RR);
  CHECK(rr_pairs[1].sorted_scores == ScoreVector{0.1, 0.9});
  CHECK(rr_pairs[1].metric_value == 0.5);

  CHECK_THROWS_AS(derive_reference(RerankDataset{}, MetricKind::AP), Error);
}

TEST_CASE("fit_linear worked 1-D example") {
  const std::vector<ReferencePair> pairs{{{1.0}, 1.0}, {{3.0}, 3.0}};
  const auto model = fit_linear(pairs, 0.1);
  CHECK(model.coefficients[0] == doctest::Approx(2.0 / 2.1).epsilon(1e-12));
  CHECK(model.intercept ==
        doctest::Approx(2.0 - 2.0 * (2.0 / 2.1)).epsilon(1e-12));
}

TEST_CASE("fit_linear with constant targets zeroes the coefficients") {
  std::vector<ReferencePair> pairs;
  rng::SplitMix64 gen(9);
  for (int i = 0; i < 12; ++i) {
    ScoreVector s(4);
    for (double& v : s) v = gen.next_normal();
    std::sort(s.begin(), s.end());
    pairs.push_back({s, 0.7});
  }
  const auto model = fit_linear(pairs, 0.1);
  CHECK(model.intercept == doctest::Approx(0.7).epsilon(1e-12));
  for (double c : model.coefficients) CHECK(c == doctest::Approx(0.0));
}

TEST_CASE("fit_linear at lambda=0 equals OLS, degenerate design throws") {
  // Non-collinear data: lambda=0 must match the unpenalized solution.
  std::vector<ReferencePair> pairs{
      {{0.0, 1.0}, 0.5}, {{1.0, 2.0}, 0.8}, {{-1.0, 3.0}, 0.2},
      {{0.5, 0.5}, 0.6}};
  const auto ols = fit_linear(pairs, 0.0);
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  for (const auto& p : pairs) {
    X.push_back(p.sorted_scores);
    y.push_back(p.metric_value);
  }
  const auto [b0, beta] = oracle::ridge(X, y, 0.0);
  CHECK(ols.intercept == doctest::Approx(b0).epsilon(1e-9));
  for (std::size_t j = 0; j < beta.size(); ++j) {
    CHECK(ols.coefficients[j] == doctest::Approx(beta[j]).epsilon(1e-9));
  }

  // Perfectly collinear features with lambda=0: singular normal matrix.
  std::vector<ReferencePair> collinear{
      {{1.0, 2.0}, 0.1}, {{2.0, 4.0}, 0.4}, {{3.0, 6.0}, 0.9}};
  CHECK_THROWS_AS(fit_linear(collinear, 0.0), Error);
  CHECK_NOTHROW(fit_linear(collinear, 0.1));
  CHECK_THROWS_AS(fit_linear({{{1.0}, 1.0}}, 0.1), Error);
}

TEST_CASE("fit_linear matches the independent normal-equations oracle") {
  rng::SplitMix64 gen(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto k = static_cast<std::size_t>(gen.next_int(1, 10));
    const auto n = static_cast<std::size_t>(gen.next_int(
        static_cast<std::int64_t>(k) + 2, 200));
    std::vector<ReferencePair> pairs;
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (std::size_t i = 0; i < n; ++i) {
      ScoreVector s(k);
      for (double& v : s) v = gen.next_normal();
      std::sort(s.begin(), s.end());
      const double target = gen.next_double();
      pairs.push_back({s, target});
      X.push_back(s);
      y.push_back(target);
    }
    const auto model = fit_linear(pairs, 0.1);
    const auto [b0, beta] = oracle::ridge(X, y, 0.1);
    CHECK(model.intercept == doctest::Approx(b0).epsilon(1e-8));
    for (std::size_t j = 0; j < k; ++j) {
      CHECK(model.coefficients[j] == doctest::Approx(beta[j]).epsilon(1e-8));
    }
  }
}

TEST_CASE("conf_linear sorts before applying the coefficients") {
  LinearRidgeModel model;
  model.intercept = 1.0;
  model.coefficients = {2.0, 3.0};
  CHECK(conf_linear(model, {5.0, 4.0}) == 24.0);
  CHECK(conf_linear(model, {4.0, 5.0}) == 24.0);

  LinearRidgeModel zero;
  zero.intercept = 0.0;
  zero.coefficients = {0.0, 0.0};
  CHECK(conf_linear(zero, {1.0, -7.0}) == 0.0);

  CHECK_THROWS_AS(conf_linear(model, {1.0, 2.0, 3.0}), Error);
}

TEST_CASE("qualify_classes nearest-rank quantiles") {
  std::vector<ReferencePair> pairs;
  for (int i = 1; i <= 10; ++i) {
    pairs.push_back({{0.0, 1.0}, static_cast<double>(i) / 10.0});
  }
  const auto qual = qualify_classes(pairs, 0.25);
  CHECK(qual.lower_threshold == doctest::Approx(0.3));
  CHECK(qual.upper_threshold == doctest::Approx(0.8));
  const std::vector<int> expected{-1, -1, 0, 0, 0, 0, 0, 0, 1, 1};
  CHECK(qual.classes == expected);

  std::vector<ReferencePair> constant(8, ReferencePair{{0.0, 1.0}, 0.5});
  CHECK_THROWS_AS(qualify_classes(constant, 0.25), Error);

  // q near 0.5 stays valid while the neutral class is non-empty.
  std::vector<ReferencePair> spread;
  for (int i = 0; i < 10; ++i) {
    spread.push_back({{0.0, 1.0}, static_cast<double>(i)});
  }
  CHECK_NOTHROW(qualify_classes(spread, 0.49));
  CHECK_THROWS_AS(qualify_classes(spread, 0.5), Error);
  CHECK_THROWS_AS(qualify_classes(spread, 0.0), Error);
}

namespace {

std::vector<ReferencePair> qualification_fixture() {
  // Metric values chosen so q=0.25 yields classes {-1: 2, 0: 4, +1: 2}.
  return {
      {{-2.0, -1.0}, 0.05}, {{-1.5, -0.5}, 0.1},  {{-0.5, 0.5}, 0.4},
      {{-0.4, 0.6}, 0.45},  {{-0.3, 0.7}, 0.5},   {{-0.2, 0.8}, 0.55},
      {{1.0, 2.0}, 0.9},    {{1.5, 2.5}, 0.95},
  };
}

}  // namespace

TEST_CASE("logistic3: zero weights give uniform probabilities") {
  Logistic3Model model;
  for (auto& row : model.weights) row.assign(3, 0.0);
  const auto probs = logistic3_probabilities(model, {0.1, 0.2, 0.3});
  for (double p : probs) CHECK(p == doctest::Approx(1.0 / 3.0));
  CHECK(conf_logistic(model, {0.3, 0.1, 0.2}) == doctest::Approx(0.0));
}

TEST_CASE("logistic3 probabilities sum to one on random inputs") {
  const auto model = fit_logistic3(qualification_fixture(), 0.25, 0.1);
  rng::SplitMix64 gen(17);
  for (int trial = 0; trial < 300; ++trial) {
    ScoreVector z{gen.next_normal(0.0, 2.0), gen.next_normal(0.0, 2.0)};
    const auto probs = logistic3_probabilities(model, sort_scores(z));
    CHECK(probs[0] + probs[1] + probs[2] == doctest::Approx(1.0).epsilon(1e-12));
    for (double p : probs) CHECK(p >= 0.0);
    const double u = conf_logistic(model, z);
    CHECK(u >= -1.0);
    CHECK(u <= 1.0);
  }
}

TEST_CASE("logistic3 on separated 1-D classes is monotone") {
  std::vector<ReferencePair> pairs;
  for (int i = 0; i < 4; ++i) {
    pairs.push_back({{-10.0 + 0.1 * i}, 0.05 + 0.001 * i});
    pairs.push_back({{0.0 + 0.1 * i}, 0.5 + 0.001 * i});
    pairs.push_back({{10.0 + 0.1 * i}, 0.95 + 0.001 * i});
  }
  const auto model = fit_logistic3(pairs, 0.25, 0.1);
  double prev = -2.0;
  for (double s = -15.0; s <= 15.0; s += 0.25) {
    const auto probs = logistic3_probabilities(model, {s});
    const double u = probs[2] - probs[0];
    CHECK(u >= prev - 1e-12);
    prev = u;
  }
}

TEST_CASE("logistic3 reports non-convergence instead of failing") {
  const auto model = fit_logistic3(qualification_fixture(), 0.25, 0.1,
                                   /*max_iterations=*/2);
  CHECK_FALSE(model.converged);
  CHECK(model.iterations == 2);
  // The capped model is still usable.
  const auto probs = logistic3_probabilities(model, {0.0, 1.0});
  CHECK(probs[0] + probs[1] + probs[2] == doctest::Approx(1.0));

  const auto full = fit_logistic3(qualification_fixture(), 0.25, 0.1);
  CHECK(full.converged);
}

TEST_CASE("logistic3 fit fails when a class is empty") {
  std::vector<ReferencePair> two_values;
  for (int i = 0; i < 6; ++i) {
    two_values.push_back({{0.0, 1.0}, i < 3 ? 0.2 : 0.8});
  }
  CHECK_THROWS_AS(fit_logistic3(two_values, 0.25, 0.1), Error);
}

TEST_CASE("logistic3 respects mirror symmetry of the training set") {
  // Training set invariant under s -> reverse(-s) with classes swapped;
  // gradient descent from zero preserves the symmetry, so the confidence of
  // the zero vector stays 0.
  std::vector<ReferencePair> pairs{
      {{-2.0, -1.0}, 0.05}, {{1.0, 2.0}, 0.95}, {{-1.0, -0.5}, 0.1},
      {{0.5, 1.0}, 0.9},    {{-3.0, 3.0}, 0.5}, {{-3.0, 3.0}, 0.5},
  };
  // Residual asymmetry is bounded by the optimizer's 1e-6 gradient tolerance.
  const auto model = fit_logistic3(pairs, 0.25, 0.1);
  CHECK(conf_logistic(model, {0.0, 0.0}) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("mahalanobis fit and confidence") {
  // 1-D classes with means +-1 and unit variance: midpoint scores 0.
  std::vector<ReferencePair> pairs{
      {{0.0}, 0.8},  {{2.0}, 0.9},   // good: mean 1, var 1
      {{-2.0}, 0.1}, {{0.0}, 0.2},   // bad: mean -1, var 1
      {{5.0}, 0.5},  {{-5.0}, 0.5},  // neutral
  };
  const auto model = fit_mahalanobis(pairs, 0.4, 1e-6);
  CHECK(model.mean_good[0] == doctest::Approx(1.0));
  CHECK(model.mean_bad[0] == doctest::Approx(-1.0));
  CHECK(conf_mahalanobis(model, {0.0}) == doctest::Approx(0.0).epsilon(1e-9));
  // At its own class mean, the good-class distance vanishes.
  CHECK(conf_mahalanobis(model, {1.0}) > 0.0);

  // Identical class statistics: zero confidence everywhere.
  MahalanobisModel same;
  same.mean_good = same.mean_bad = {0.5, 1.5};
  same.invcov_good = same.invcov_bad = {2.0, 0.1, 0.1, 1.0};
  rng::SplitMix64 gen(23);
  for (int trial = 0; trial < 50; ++trial) {
    ScoreVector z{gen.next_normal(), gen.next_normal()};
    CHECK(conf_mahalanobis(same, z) == doctest::Approx(0.0));
  }
}

TEST_CASE("mahalanobis sign flips when class roles swap") {
  rng::SplitMix64 gen(31);
  std::vector<ReferencePair> pairs;
  for (int i = 0; i < 40; ++i) {
    ScoreVector s{gen.next_normal(), gen.next_normal(), gen.next_normal()};
    std::sort(s.begin(), s.end());
    pairs.push_back({s, gen.next_double()});
  }
  const auto model = fit_mahalanobis(pairs, 0.25, 1e-6);
  MahalanobisModel swapped = model;
  std::swap(swapped.mean_good, swapped.mean_bad);
  std::swap(swapped.invcov_good, swapped.invcov_bad);
  for (int trial = 0; trial < 100; ++trial) {
    ScoreVector z{gen.next_normal(), gen.next_normal(), gen.next_normal()};
    CHECK(conf_mahalanobis(swapped, z) ==
          doctest::Approx(-conf_mahalanobis(model, z)).epsilon(1e-12));
  }
}

TEST_CASE("mahalanobis needs two members per class") {
  std::vector<ReferencePair> pairs{
      {{0.0}, 0.9}, {{-1.0}, 0.1}, {{0.5}, 0.5}, {{0.6}, 0.5},
      {{0.4}, 0.5}, {{0.3}, 0.5},
  };
  CHECK_THROWS_AS(fit_mahalanobis(pairs, 0.25, 1e-6), Error);
}

TEST_CASE("every confidence variant is permutation invariant") {
  rng::SplitMix64 gen(57);
  std::vector<ReferencePair> pairs;
  for (int i = 0; i < 60; ++i) {
    ScoreVector s(5);
    for (double& v : s) v = gen.next_normal();
    std::sort(s.begin(), s.end());
    pairs.push_back({s, gen.next_double()});
  }
  const std::vector<ConfidenceModel> models{
      MaxScoreModel{},
      StdDevModel{},
      Gap12Model{},
      fit_linear(pairs, 0.1),
      fit_logistic3(pairs, 0.25, 0.1),
      fit_mahalanobis(pairs, 0.25, 1e-6),
  };
  for (int trial = 0; trial < 100; ++trial) {
    ScoreVector z(5);
    for (double& v : z) v = gen.next_normal();
    ScoreVector shuffled = z;
    const auto perm = rng::shuffled_indices(5, gen);
    for (std::size_t j = 0; j < 5; ++j) shuffled[j] = z[perm[j]];
    for (const auto& model : models) {
      CHECK(confidence(model, z) ==
            doctest::Approx(confidence(model, shuffled)).epsilon(1e-12));
    }
  }
}

TEST_CASE("constant score shift: std/gap unchanged, linear ranking stable") {
  rng::SplitMix64 gen(71);
  std::vector<ReferencePair> pairs;
  std::vector<ReferencePair> shifted_pairs;
  const double shift = 4.25;
  for (int i = 0; i < 80; ++i) {
    ScoreVector s(4);
    for (double& v : s) v = gen.next_normal();
    std::sort(s.begin(), s.end());
    const double m = gen.next_double();
    pairs.push_back({s, m});
    ScoreVector shifted = s;
    for (double& v : shifted) v += shift;
    shifted_pairs.push_back({shifted, m});
  }
  std::vector<ScoreVector> tests;
  for (int i = 0; i < 50; ++i) {
    ScoreVector z(4);
    for (double& v : z) v = gen.next_normal();
    tests.push_back(z);
  }
  for (const auto& z : tests) {
    ScoreVector shifted = z;
    for (double& v : shifted) v += shift;
    CHECK(conf_std(z) == doctest::Approx(conf_std(shifted)).epsilon(1e-9));
    CHECK(conf_gap12(z) == doctest::Approx(conf_gap12(shifted)).epsilon(1e-9));
  }

  const auto model = fit_linear(pairs, 0.1);
  const auto shifted_model = fit_linear(shifted_pairs, 0.1);
  std::vector<double> conf_a, conf_b;
  for (const auto& z : tests) {
    ScoreVector shifted = z;
    for (double& v : shifted) v += shift;
    conf_a.push_back(conf_linear(model, z));
    conf_b.push_back(conf_linear(shifted_model, shifted));
  }
  std::vector<std::size_t> order_a(tests.size()), order_b(tests.size());
  std::iota(order_a.begin(), order_a.end(), 0);
  order_b = order_a;
  std::stable_sort(order_a.begin(), order_a.end(),
                   [&](std::size_t a, std::size_t b) { return conf_a[a] < conf_a[b]; });
  std::stable_sort(order_b.begin(), order_b.end(),
                   [&](std::size_t a, std::size_t b) { return conf_b[a] < conf_b[b]; });
  CHECK(order_a == order_b);
}

TEST_CASE("score_all preserves order and validates dimensions") {
  const auto ds = make_dataset({RerankInstance{"a", {0.2, 0.9, 0.7}, {1, 0, 0}},
                                RerankInstance{"b", {1.0, 2.0, 0.0}, {0, 1, 0}},
                                RerankInstance{"c", {-1.0, 0.0, 1.0}, {1, 1, 0}}});
  const auto scores = score_all(MaxScoreModel{}, ds);
  CHECK(scores == std::vector<double>{0.9, 2.0, 1.0});

  LinearRidgeModel wrong_k;
  wrong_k.coefficients = {1.0, 2.0};
  CHECK_THROWS_AS(score_all(ConfidenceModel{wrong_k}, ds), Error);
  CHECK_THROWS_AS(score_all(MaxScoreModel{}, RerankDataset{}), Error);
}

TEST_CASE("fit_model dispatches on the method name") {
  const auto ds = make_dataset({RerankInstance{"a", {0.9, 0.1}, {1, 0}},
                                RerankInstance{"b", {0.4, 0.6}, {0, 1}},
                                RerankInstance{"c", {0.7, 0.3}, {1, 0}},
                                RerankInstance{"d", {0.2, 0.8}, {1, 0}}});
  CHECK(method_name(fit_model({.method = "max"}, ds, MetricKind::AP)) ==
        std::string("max"));
  CHECK(method_name(fit_model({.method = "lin"}, ds, MetricKind::AP)) ==
        std::string("lin"));
  CHECK_THROWS_AS(fit_model({.method = "nope"}, ds, MetricKind::AP), Error);
}
