#pragma once

#include <optional>
#include <string>
#include <vector>

#include "abstain/confidence.hpp"
#include "abstain/core.hpp"

namespace abstain {

// Predict carries the ranking; abstention is the empty optional.
using AbstentionDecision = std::optional<Ranking>;

// Predict iff confidence is strictly above the threshold.
AbstentionDecision decide(double confidence, double tau,
                          const Ranking& ranking);

struct CurvePoint {
  double abstention_rate = 0.0;  // j/n for integer j < n
  double performance = 0.0;
};

struct AbstentionCurve {
  std::vector<CurvePoint> points;  // rates strictly increasing from 0
};

struct EvalReport {
  double auc = 0.0;
  double auc_random = 0.0;
  double auc_oracle = 0.0;
  std::optional<double> nauc;  // empty when the oracle is degenerate
  std::size_t n_test = 0;
  MetricKind metric = MetricKind::AP;
  std::string method;
};

// Curve over every achievable abstention rate j/n, j = 0..n-1: instances are
// sorted ascending by confidence (ties by input order) and the j lowest are
// abstained. Rate 1 is excluded since performance is undefined on an empty
// prediction set.
AbstentionCurve curve_from_values(const std::vector<double>& metrics,
                                  const std::vector<double>& confidences);

// Same construction sorted by the true metric value: abstains on the worst
// instances first.
AbstentionCurve oracle_curve_from_values(const std::vector<double>& metrics);

AbstentionCurve curve(const RerankDataset& test, const ConfidenceModel& model,
                      MetricKind kind);
AbstentionCurve oracle_curve(const RerankDataset& test, MetricKind kind);

// Trapezoidal integral of performance over the curve's abstention span.
double auc(const AbstentionCurve& curve);

// Flat-curve AUC of the random baseline: mean metric times the span
// (n-1)/n. Analytic, matching the expectation of ineffective abstention.
double random_auc_from_values(const std::vector<double>& metrics);
double random_auc(const RerankDataset& test, MetricKind kind);

// (auc - random) / (oracle - random); throws DegenerateOracle when the
// denominator vanishes (all instances carry the same metric).
double nauc(double auc_value, double auc_random, double auc_oracle);

EvalReport evaluate_values(const std::vector<double>& metrics,
                           const std::vector<double>& confidences,
                           MetricKind kind, const std::string& method);
EvalReport evaluate(const RerankDataset& test, const ConfidenceModel& model,
                    MetricKind kind);

}  // namespace abstain
