#include "abstain/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace abstain {

const char* to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::AP:
      return "ap";
    case MetricKind::NDCG:
      return "ndcg";
    case MetricKind::RR:
      return "rr";
  }
  return "?";
}

MetricKind metric_from_string(const std::string& name) {
  if (name == "ap") return MetricKind::AP;
  if (name == "ndcg") return MetricKind::NDCG;
  if (name == "rr") return MetricKind::RR;
  raise(ErrorCode::invalid_config, "unknown metric '" + name + "'");
}

void validate_instance(const RerankInstance& inst) {
  if (inst.scores.size() != inst.labels.size()) {
    raise(ErrorCode::dimension_mismatch,
          "instance '" + inst.id + "': scores and labels differ in length");
  }
  if (inst.scores.size() < 2) {
    raise(ErrorCode::invalid_config,
          "instance '" + inst.id + "': needs at least 2 documents");
  }
  for (double v : inst.scores) {
    if (!std::isfinite(v)) {
      raise(ErrorCode::parse_error,
            "instance '" + inst.id + "': non-finite score");
    }
  }
  bool any_positive = false;
  for (int y : inst.labels) {
    if (y != 0 && y != 1) {
      raise(ErrorCode::parse_error,
            "instance '" + inst.id + "': labels must be 0 or 1");
    }
    any_positive |= (y == 1);
  }
  if (!any_positive) {
    raise(ErrorCode::no_positive,
          "instance '" + inst.id + "': no positive document");
  }
}

RerankDataset make_dataset(std::vector<RerankInstance> instances) {
  if (instances.empty()) {
    raise(ErrorCode::empty_dataset, "dataset has no instances");
  }
  const std::size_t k = instances.front().scores.size();
  for (const auto& inst : instances) {
    validate_instance(inst);
    if (inst.scores.size() != k) {
      raise(ErrorCode::ragged_k, "instance '" + inst.id + "' has k=" +
                                     std::to_string(inst.scores.size()) +
                                     ", expected " + std::to_string(k));
    }
  }
  return RerankDataset{std::move(instances), k};
}

ScoreVector sort_scores(const ScoreVector& z) {
  ScoreVector sorted = z;
  std::sort(sorted.begin(), sorted.end());
  return sorted;
}

Ranking rank_descending(const ScoreVector& z) {
  std::vector<int> order(z.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&z](int a, int b) { return z[a] > z[b]; });
  return Ranking{std::move(order)};
}

namespace {

int count_positives(const LabelVector& y, const char* op) {
  int positives = 0;
  for (int v : y) positives += (v == 1);
  if (positives == 0) {
    raise(ErrorCode::no_positive,
          std::string(op) + ": label vector has no positive entry");
  }
  return positives;
}

}  // namespace

double average_precision(const ScoreVector& z, const LabelVector& y) {
  const int positives = count_positives(y, "average_precision");
  const Ranking ranking = rank_descending(z);
  long double sum = 0.0L;
  int seen = 0;
  for (std::size_t j = 0; j < ranking.order.size(); ++j) {
    if (y[ranking.order[j]] == 1) {
      ++seen;
      sum += static_cast<long double>(seen) / static_cast<long double>(j + 1);
    }
  }
  return static_cast<double>(sum / positives);
}

double ndcg(const ScoreVector& z, const LabelVector& y) {
  const int positives = count_positives(y, "ndcg");
  const Ranking ranking = rank_descending(z);
  long double dcg = 0.0L;
  for (std::size_t j = 0; j < ranking.order.size(); ++j) {
    if (y[ranking.order[j]] == 1) {
      dcg += 1.0L / std::log2(static_cast<long double>(j + 2));
    }
  }
  long double idcg = 0.0L;
  for (int j = 0; j < positives; ++j) {
    idcg += 1.0L / std::log2(static_cast<long double>(j + 2));
  }
  return static_cast<double>(dcg / idcg);
}

double reciprocal_rank(const ScoreVector& z, const LabelVector& y) {
  count_positives(y, "reciprocal_rank");
  const Ranking ranking = rank_descending(z);
  for (std::size_t j = 0; j < ranking.order.size(); ++j) {
    if (y[ranking.order[j]] == 1) {
      return 1.0 / static_cast<double>(j + 1);
    }
  }
  return 0.0;  // unreachable, count_positives guarantees a hit
}

double instance_metric(MetricKind kind, const ScoreVector& z,
                       const LabelVector& y) {
  switch (kind) {
    case MetricKind::AP:
      return average_precision(z, y);
    case MetricKind::NDCG:
      return ndcg(z, y);
    case MetricKind::RR:
      return reciprocal_rank(z, y);
  }
  raise(ErrorCode::invalid_config, "unknown metric kind");
}

std::vector<double> instance_metrics(const RerankDataset& ds, MetricKind kind,
                                     parallel::Exec exec) {
  if (ds.instances.empty()) {
    raise(ErrorCode::empty_dataset, "instance_metrics: empty dataset");
  }
  // Validate serially so the parallel loop cannot throw and error reports
  // stay deterministic.
  for (const auto& inst : ds.instances) {
    count_positives(inst.labels, "instance_metrics");
  }
  std::vector<double> out(ds.instances.size());
  parallel::par_for(
      ds.instances.size(),
      [&](std::size_t i) {
        out[i] = instance_metric(kind, ds.instances[i].scores,
                                 ds.instances[i].labels);
      },
      exec);
  return out;
}

double mean_metric(const RerankDataset& ds, MetricKind kind,
                   parallel::Exec exec) {
  return mean_of(instance_metrics(ds, kind, exec));
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) {
    raise(ErrorCode::empty_dataset, "mean_of: empty value list");
  }
  long double sum = 0.0L;
  for (double v : values) sum += v;
  return static_cast<double>(sum / static_cast<long double>(values.size()));
}

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::no_positive:
      return "no_positive";
    case ErrorCode::ragged_k:
      return "ragged_k";
    case ErrorCode::parse_error:
      return "parse_error";
    case ErrorCode::empty_file:
      return "empty_file";
    case ErrorCode::empty_dataset:
      return "empty_dataset";
    case ErrorCode::degenerate_design:
      return "degenerate_design";
    case ErrorCode::dimension_mismatch:
      return "dimension_mismatch";
    case ErrorCode::empty_class:
      return "empty_class";
    case ErrorCode::too_few_samples:
      return "too_few_samples";
    case ErrorCode::singular_covariance:
      return "singular_covariance";
    case ErrorCode::too_few_points:
      return "too_few_points";
    case ErrorCode::degenerate_oracle:
      return "degenerate_oracle";
    case ErrorCode::invalid_alpha:
      return "invalid_alpha";
    case ErrorCode::unreachable_target:
      return "unreachable_target";
    case ErrorCode::too_small_to_split:
      return "too_small_to_split";
    case ErrorCode::reference_too_small:
      return "reference_too_small";
    case ErrorCode::zero_variance:
      return "zero_variance";
    case ErrorCode::schema_error:
      return "schema_error";
    case ErrorCode::invalid_config:
      return "invalid_config";
    case ErrorCode::file_exists:
      return "file_exists";
    case ErrorCode::io_error:
      return "io_error";
  }
  return "unknown";
}

}  // namespace abstain
