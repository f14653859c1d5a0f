#pragma once

#include <string>
#include <vector>

#include "abstain/errors.hpp"
#include "abstain/parallel.hpp"

namespace abstain {

// Relevance scores are unscaled scalars; labels are binary relevance flags.
using ScoreVector = std::vector<double>;
using LabelVector = std::vector<int>;

enum class MetricKind { AP, NDCG, RR };

const char* to_string(MetricKind kind);
MetricKind metric_from_string(const std::string& name);

// Permutation of {0..k-1} listing document indices from most to least
// relevant.
struct Ranking {
  std::vector<int> order;
};

struct RerankInstance {
  std::string id;
  ScoreVector scores;
  LabelVector labels;
};

struct RerankDataset {
  std::vector<RerankInstance> instances;
  std::size_t k = 0;

  std::size_t size() const { return instances.size(); }
};

// Validates instance invariants: equal lengths, k >= 2, finite scores,
// binary labels with at least one positive.
void validate_instance(const RerankInstance& inst);

// Builds a dataset and checks the uniform-k invariant across instances.
RerankDataset make_dataset(std::vector<RerankInstance> instances);

// Ascending sort of a score vector; multiset of values preserved.
ScoreVector sort_scores(const ScoreVector& z);

// Indices sorted by non-increasing score, ties broken by ascending original
// index (stable).
Ranking rank_descending(const ScoreVector& z);

double average_precision(const ScoreVector& z, const LabelVector& y);
double ndcg(const ScoreVector& z, const LabelVector& y);
double reciprocal_rank(const ScoreVector& z, const LabelVector& y);

double instance_metric(MetricKind kind, const ScoreVector& z,
                       const LabelVector& y);

// Per-instance metric values in dataset order. Parallel kernel; the serial
// path is the reference implementation.
std::vector<double> instance_metrics(
    const RerankDataset& ds, MetricKind kind,
    parallel::Exec exec = parallel::Exec::parallel);

// Arithmetic mean of the instance metric (mAP / mNDCG / mRR).
double mean_metric(const RerankDataset& ds, MetricKind kind,
                   parallel::Exec exec = parallel::Exec::parallel);

// Deterministic mean over a value vector (long-double accumulation).
double mean_of(const std::vector<double>& values);

}  // namespace abstain
