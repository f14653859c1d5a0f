#include "abstain/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace abstain {

namespace {

constexpr double kDegenerateTol = 1e-12;

// Suffix-mean curve over the given keep order: point j keeps order[j..n).
AbstentionCurve suffix_curve(const std::vector<double>& metrics,
                             const std::vector<std::size_t>& order) {
  const std::size_t n = metrics.size();
  std::vector<long double> suffix(n + 1, 0.0L);
  for (std::size_t j = n; j > 0; --j) {
    suffix[j - 1] = suffix[j] + metrics[order[j - 1]];
  }
  AbstentionCurve curve;
  curve.points.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    curve.points[j].abstention_rate =
        static_cast<double>(j) / static_cast<double>(n);
    curve.points[j].performance =
        static_cast<double>(suffix[j] / static_cast<long double>(n - j));
  }
  return curve;
}

std::vector<std::size_t> ascending_order(const std::vector<double>& keys) {
  // NaN keys would break the sort's strict weak ordering.
  for (double k : keys) {
    if (std::isnan(k)) {
      raise(ErrorCode::invalid_config, "curve: NaN sort key");
    }
  }
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return keys[a] < keys[b];
  });
  return order;
}

}  // namespace

AbstentionDecision decide(double confidence, double tau,
                          const Ranking& ranking) {
  if (confidence > tau) return ranking;
  return std::nullopt;
}

AbstentionCurve curve_from_values(const std::vector<double>& metrics,
                                  const std::vector<double>& confidences) {
  if (metrics.size() != confidences.size()) {
    raise(ErrorCode::dimension_mismatch,
          "curve_from_values: metric/confidence length mismatch");
  }
  if (metrics.size() < 2) {
    raise(ErrorCode::too_few_points,
          "curve_from_values: needs at least 2 instances");
  }
  return suffix_curve(metrics, ascending_order(confidences));
}

AbstentionCurve oracle_curve_from_values(const std::vector<double>& metrics) {
  if (metrics.size() < 2) {
    raise(ErrorCode::too_few_points,
          "oracle_curve_from_values: needs at least 2 instances");
  }
  return suffix_curve(metrics, ascending_order(metrics));
}

AbstentionCurve curve(const RerankDataset& test, const ConfidenceModel& model,
                      MetricKind kind) {
  return curve_from_values(instance_metrics(test, kind),
                           score_all(model, test));
}

AbstentionCurve oracle_curve(const RerankDataset& test, MetricKind kind) {
  return oracle_curve_from_values(instance_metrics(test, kind));
}

double auc(const AbstentionCurve& curve) {
  if (curve.points.size() < 2) {
    raise(ErrorCode::too_few_points, "auc: needs at least 2 curve points");
  }
  long double area = 0.0L;
  for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
    const auto& a = curve.points[i];
    const auto& b = curve.points[i + 1];
    area += (static_cast<long double>(b.abstention_rate) - a.abstention_rate) *
            (static_cast<long double>(a.performance) + b.performance) / 2.0L;
  }
  return static_cast<double>(area);
}

double random_auc_from_values(const std::vector<double>& metrics) {
  const std::size_t n = metrics.size();
  if (n < 2) {
    raise(ErrorCode::too_few_points,
          "random_auc: needs at least 2 instances");
  }
  const double span = static_cast<double>(n - 1) / static_cast<double>(n);
  return mean_of(metrics) * span;
}

double random_auc(const RerankDataset& test, MetricKind kind) {
  return random_auc_from_values(instance_metrics(test, kind));
}

double nauc(double auc_value, double auc_random, double auc_oracle) {
  const double denom = auc_oracle - auc_random;
  if (denom <= kDegenerateTol) {
    raise(ErrorCode::degenerate_oracle,
          "nauc: oracle and random AUC coincide (constant metric)");
  }
  return (auc_value - auc_random) / denom;
}

EvalReport evaluate_values(const std::vector<double>& metrics,
                           const std::vector<double>& confidences,
                           MetricKind kind, const std::string& method) {
  EvalReport report;
  report.metric = kind;
  report.method = method;
  report.n_test = metrics.size();
  report.auc = auc(curve_from_values(metrics, confidences));
  report.auc_oracle = auc(oracle_curve_from_values(metrics));
  report.auc_random = random_auc_from_values(metrics);
  if (report.auc_oracle - report.auc_random > kDegenerateTol) {
    report.nauc = nauc(report.auc, report.auc_random, report.auc_oracle);
  }
  return report;
}

EvalReport evaluate(const RerankDataset& test, const ConfidenceModel& model,
                    MetricKind kind) {
  return evaluate_values(instance_metrics(test, kind), score_all(model, test),
                         kind, method_name(model));
}

}  // namespace abstain
