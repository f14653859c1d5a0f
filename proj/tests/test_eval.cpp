#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "abstain/dataio.hpp"
#include "abstain/eval.hpp"
#include "abstain/rng.hpp"
#include "oracles.hpp"

using namespace abstain;

TEST_CASE("decide uses a strict threshold") {
  const Ranking r{{1, 0}};
  CHECK(decide(0.5, 0.3, r).has_value());
  CHECK_FALSE(decide(0.3, 0.3, r).has_value());
  CHECK(decide(-100.0, -std::numeric_limits<double>::infinity(), r)
            .value()
            .order == r.order);
}

TEST_CASE("curve worked example and tie handling") {
  const auto c = curve_from_values({0.0, 1.0}, {0.1, 0.9});
  REQUIRE(c.points.size() == 2);
  CHECK(c.points[0].abstention_rate == 0.0);
  CHECK(c.points[0].performance == 0.5);
  CHECK(c.points[1].abstention_rate == 0.5);
  CHECK(c.points[1].performance == 1.0);

  // Constant confidence: abstention follows dataset order.
  const auto tied = curve_from_values({0.2, 0.4, 0.9}, {1.0, 1.0, 1.0});
  CHECK(tied.points[0].performance == doctest::Approx(0.5));
  CHECK(tied.points[1].performance == doctest::Approx(0.65));
  CHECK(tied.points[2].performance == doctest::Approx(0.9));

  CHECK_THROWS_AS(curve_from_values({0.5}, {0.1}), Error);
}

TEST_CASE("curve agrees with a brute-force threshold sweep") {
  rng::SplitMix64 gen(15);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(gen.next_int(2, 40));
    std::vector<double> metrics(n), conf(n);
    for (std::size_t i = 0; i < n; ++i) {
      metrics[i] = gen.next_double();
      conf[i] = gen.next_normal();  // continuous, ties effectively impossible
    }
    const auto c = curve_from_values(metrics, conf);
    const auto sweep = oracle::threshold_sweep(metrics, conf);
    REQUIRE(c.points.size() == sweep.size());
    for (std::size_t j = 0; j < sweep.size(); ++j) {
      CHECK(c.points[j].abstention_rate ==
            doctest::Approx(sweep[j].first).epsilon(1e-12));
      CHECK(c.points[j].performance ==
            doctest::Approx(sweep[j].second).epsilon(1e-12));
    }
  }
}

TEST_CASE("oracle curve keeps the best instances") {
  const auto flat = oracle_curve_from_values({0.7, 0.7, 0.7});
  for (const auto& p : flat.points) CHECK(p.performance == doctest::Approx(0.7));

  const auto c = oracle_curve_from_values({0.2, 0.4, 0.6, 0.8});
  CHECK(c.points[2].abstention_rate == 0.5);
  CHECK(c.points[2].performance == doctest::Approx(0.7));

  const auto two = oracle_curve_from_values({0.0, 1.0});
  CHECK(two.points[0].performance == 0.5);
  CHECK(two.points[1].performance == 1.0);
}

TEST_CASE("oracle curve is non-decreasing on random datasets") {
  rng::SplitMix64 gen(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::size_t>(gen.next_int(2, 50));
    std::vector<double> metrics(n);
    for (double& m : metrics) m = gen.next_double();
    const auto c = oracle_curve_from_values(metrics);
    for (std::size_t j = 1; j < c.points.size(); ++j) {
      CHECK(c.points[j].performance >= c.points[j - 1].performance - 1e-15);
    }
  }
}

TEST_CASE("auc integrates trapezoidally") {
  AbstentionCurve c;
  c.points = {{0.0, 0.5}, {0.5, 1.0}};
  CHECK(auc(c) == 0.375);

  AbstentionCurve flat;
  flat.points = {{0.0, 0.7}, {0.25, 0.7}, {0.5, 0.7}, {0.75, 0.7}};
  CHECK(auc(flat) == doctest::Approx(0.7 * 0.75).epsilon(1e-12));

  AbstentionCurve rect;
  rect.points = {{0.0, 0.4}, {0.8, 0.4}};
  CHECK(auc(rect) == doctest::Approx(0.32).epsilon(1e-12));

  AbstentionCurve one;
  one.points = {{0.0, 0.4}};
  CHECK_THROWS_AS(auc(one), Error);

  // Fine-grained numeric cross-check of the two-point example.
  double riemann = 0.0;
  const int steps = 1000000;
  for (int i = 0; i < steps; ++i) {
    const double x = 0.5 * (static_cast<double>(i) + 0.5) / steps;
    riemann += (0.5 + x) * (0.5 / steps);  // line through the two points
  }
  CHECK(riemann == doctest::Approx(0.375).epsilon(1e-9));
}

TEST_CASE("random baseline is the flat mean over the curve span") {
  CHECK(random_auc_from_values({0.0, 1.0}) == 0.25);
  CHECK(random_auc_from_values({1.0, 1.0, 1.0, 1.0}) ==
        doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("random confidence matches the analytic baseline in expectation") {
  rng::SplitMix64 gen(2);
  const std::size_t n = 200;
  std::vector<double> metrics(n);
  for (double& m : metrics) m = gen.next_double();
  const double analytic = random_auc_from_values(metrics);
  long double mean_auc = 0.0L;
  const int shuffles = 1000;
  for (int t = 0; t < shuffles; ++t) {
    std::vector<double> conf(n);
    for (double& c : conf) c = gen.next_double();
    mean_auc += auc(curve_from_values(metrics, conf));
  }
  mean_auc /= shuffles;
  CHECK(static_cast<double>(mean_auc) == doctest::Approx(analytic).epsilon(0.01));
}

TEST_CASE("nauc normalization and degenerate oracle") {
  CHECK(nauc(0.375, 0.25, 0.375) == 1.0);
  CHECK(nauc(0.25, 0.25, 0.375) == 0.0);
  CHECK(nauc(0.2, 0.25, 0.375) < 0.0);
  CHECK_THROWS_AS(nauc(0.3, 0.3, 0.3), Error);
}

TEST_CASE("evaluate fixed points") {
  rng::SplitMix64 gen(8);
  const std::size_t n = 60;
  std::vector<double> metrics(n);
  for (double& m : metrics) m = gen.next_double();

  // Confidence equal to the true metric reaches the oracle.
  const auto self = evaluate_values(metrics, metrics, MetricKind::AP, "self");
  REQUIRE(self.nauc.has_value());
  CHECK(*self.nauc == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(self.auc_oracle >= self.auc_random - 1e-12);

  // Negated metric is the worst possible ordering.
  std::vector<double> negated = metrics;
  for (double& c : negated) c = -c;
  const auto worst = evaluate_values(metrics, negated, MetricKind::AP, "worst");
  REQUIRE(worst.nauc.has_value());
  CHECK(*worst.nauc < 0.0);
  for (const auto& confs : {metrics}) {
    const auto report = evaluate_values(metrics, confs, MetricKind::AP, "x");
    CHECK(*report.nauc <= *self.nauc + 1e-12);
    CHECK(*worst.nauc <= *report.nauc);
  }

  // The curve starts at the no-abstention mean.
  const auto c = curve_from_values(metrics, negated);
  CHECK(c.points[0].performance ==
        doctest::Approx(mean_of(metrics)).epsilon(1e-12));

  // Constant metrics: nauc reported as undefined.
  const std::vector<double> constant(n, 0.5);
  const auto degenerate =
      evaluate_values(constant, metrics, MetricKind::AP, "deg");
  CHECK_FALSE(degenerate.nauc.has_value());
}

TEST_CASE("nauc is invariant under strictly increasing confidence transforms") {
  rng::SplitMix64 gen(12);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(gen.next_int(3, 50));
    std::vector<double> metrics(n), conf(n), warped(n);
    for (std::size_t i = 0; i < n; ++i) {
      metrics[i] = gen.next_double();
      conf[i] = gen.next_normal();
      warped[i] = std::atan(conf[i]) * 2.0 + 0.001 * conf[i];
    }
    const auto a = evaluate_values(metrics, conf, MetricKind::AP, "a");
    const auto b = evaluate_values(metrics, warped, MetricKind::AP, "b");
    REQUIRE(a.nauc.has_value());
    CHECK(*a.nauc == *b.nauc);
  }
}

TEST_CASE("end-to-end evaluate on a dataset") {
  const auto ds = make_dataset({RerankInstance{"a", {1.0, 0.0}, {0, 1}},
                                RerankInstance{"b", {1.0, 0.0}, {1, 0}}});
  // RR metrics are 0.5 and 1.0; max-confidence is constant, so the curve
  // follows dataset order: (0, 0.75), (0.5, 1.0).
  const auto report = evaluate(ds, MaxScoreModel{}, MetricKind::RR);
  CHECK(report.n_test == 2);
  CHECK(report.auc == doctest::Approx(0.4375));
  CHECK(report.auc_oracle == doctest::Approx(0.4375));
  CHECK(report.auc_random == doctest::Approx(0.375));
  REQUIRE(report.nauc.has_value());
  CHECK(*report.nauc == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(report.method == "max");
}
