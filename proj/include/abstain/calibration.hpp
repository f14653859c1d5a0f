#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "abstain/confidence.hpp"
#include "abstain/core.hpp"
#include "abstain/eval.hpp"

namespace abstain {

struct CalibrationResult {
  double tau = 0.0;
  double expected_rate = 0.0;
  // Mean metric over the predicted reference instances; absent when metric
  // values were not supplied or every instance abstains.
  std::optional<double> expected_performance;
};

// Threshold for a target abstention rate: tau is the ceil(alpha*N)-th
// smallest reference confidence (-inf at alpha = 0); under the strict rule
// c > tau the achieved reference rate is the smallest achievable rate
// >= alpha. metric_values, when non-empty, must align with ref_confidences.
CalibrationResult threshold_for_rate(
    const std::vector<double>& ref_confidences, double alpha,
    const std::vector<double>& metric_values = {});

// Threshold for a target performance level: walks the reference curve from
// rate 0 upward and returns the first point meeting the target.
CalibrationResult threshold_for_performance(
    const std::vector<double>& ref_confidences,
    const std::vector<double>& metric_values, double target_performance);
CalibrationResult threshold_for_performance(const RerankDataset& ref,
                                            const ConfidenceModel& model,
                                            MetricKind kind,
                                            double target_performance);

struct MaeReport {
  double target_rate = 0.0;
  double mae_rate = 0.0;
  double mae_performance = 0.0;
  std::size_t seeds = 0;
  std::size_t seeds_with_performance = 0;
};

// One calibrate-then-measure pass: thresholds from the reference side,
// achieved rate/performance on the test side.
struct CalibrationTrial {
  double tau = 0.0;
  double expected_rate = 0.0;
  std::optional<double> expected_performance;
  double achieved_rate = 0.0;
  std::optional<double> achieved_performance;
};
CalibrationTrial calibration_trial(const RerankDataset& ref,
                                   const RerankDataset& test,
                                   const ConfidenceModel& model,
                                   MetricKind kind, double target_rate);

// Per seed: resplit, fit, calibrate per target, measure on the test side;
// reports the MAE across seeds between target and achieved values. The
// per-seed split uses rng_seed + seed_index.
std::vector<MaeReport> calibration_mae(const RerankDataset& ds,
                                       const ModelSpec& spec, MetricKind kind,
                                       const std::vector<double>& target_rates,
                                       std::size_t seeds,
                                       std::uint64_t rng_seed,
                                       double split_ratio = 0.8);

// Fit on one dataset, evaluate on another. Data-driven methods require
// matching k; reference-free methods ignore the reference set entirely.
EvalReport domain_transfer(const RerankDataset& ref_ds,
                           const RerankDataset& test_ds, const ModelSpec& spec,
                           MetricKind kind);

struct RefSizeRow {
  std::size_t size = 0;
  double nauc_method = 0.0;
  double nauc_baseline = 0.0;
};
struct RefSizeResult {
  std::vector<RefSizeRow> rows;
  std::optional<std::size_t> break_even;  // smallest size with method >= baseline
  std::size_t seeds = 0;
};

// Reference-set-size sweep: per seed, split once; per size, subsample the
// reference, fit, evaluate nAUC on the held-out test split. The baseline is
// evaluated on the same test splits.
RefSizeResult refsize_sweep(const RerankDataset& ds, const ModelSpec& spec,
                            const ModelSpec& baseline_spec, MetricKind kind,
                            const std::vector<std::size_t>& sizes,
                            std::size_t seeds, std::uint64_t rng_seed,
                            double split_ratio = 0.8);

struct QualSweepRow {
  double q = 0.0;
  std::optional<double> nauc_log;  // null when every seed failed to fit
  std::optional<double> nauc_mah;
  std::size_t failed_log = 0;
  std::size_t failed_mah = 0;
};

// Qualification-threshold sweep for the logistic and Mahalanobis variants.
std::vector<QualSweepRow> qualification_sweep(
    const RerankDataset& ds, MetricKind kind,
    const std::vector<double>& q_values, std::size_t seeds,
    std::uint64_t rng_seed, double split_ratio = 0.8, double l2_lambda = 0.1,
    double cov_epsilon = 1e-6);

// Sample Pearson correlation coefficient.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

double mean_abs_error(const std::vector<double>& targets,
                      const std::vector<double>& achieved);

}  // namespace abstain
