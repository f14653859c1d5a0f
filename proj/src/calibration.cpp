#include "abstain/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include "abstain/dataio.hpp"
#include "abstain/parallel.hpp"
#include "abstain/rng.hpp"

namespace abstain {

namespace {

// Runs fn(seed_index) for every seed; rethrows the lowest-seed failure so
// error reporting does not depend on thread scheduling.
template <typename Fn>
void for_each_seed(std::size_t seeds, Fn&& fn) {
  std::vector<std::exception_ptr> errors(seeds);
  parallel::par_for(seeds, [&](std::size_t s) {
    try {
      fn(s);
    } catch (...) {
      errors[s] = std::current_exception();
    }
  });
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double abstained_fraction(const std::vector<double>& confidences, double tau) {
  std::size_t abstained = 0;
  for (double c : confidences) abstained += (c <= tau);
  return static_cast<double>(abstained) /
         static_cast<double>(confidences.size());
}

std::optional<double> predicted_mean(const std::vector<double>& confidences,
                                     const std::vector<double>& metrics,
                                     double tau) {
  long double sum = 0.0L;
  std::size_t n = 0;
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    if (confidences[i] > tau) {
      sum += metrics[i];
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return static_cast<double>(sum / static_cast<long double>(n));
}

}  // namespace

CalibrationResult threshold_for_rate(const std::vector<double>& ref_confidences,
                                     double alpha,
                                     const std::vector<double>& metric_values) {
  if (ref_confidences.empty()) {
    raise(ErrorCode::empty_dataset,
          "threshold_for_rate: no reference confidences");
  }
  if (!(alpha >= 0.0) || alpha >= 1.0) {
    raise(ErrorCode::invalid_alpha,
          "threshold_for_rate: alpha must lie in [0, 1)");
  }
  if (!metric_values.empty() &&
      metric_values.size() != ref_confidences.size()) {
    raise(ErrorCode::dimension_mismatch,
          "threshold_for_rate: metric/confidence length mismatch");
  }

  CalibrationResult result;
  const std::size_t n = ref_confidences.size();
  if (alpha == 0.0) {
    result.tau = -std::numeric_limits<double>::infinity();
  } else {
    std::vector<double> sorted = ref_confidences;
    std::sort(sorted.begin(), sorted.end());
    const auto rank = static_cast<std::size_t>(
        std::ceil(alpha * static_cast<double>(n)));
    result.tau = sorted[std::min(rank, n) - 1];
  }
  result.expected_rate = abstained_fraction(ref_confidences, result.tau);
  if (!metric_values.empty()) {
    result.expected_performance =
        predicted_mean(ref_confidences, metric_values, result.tau);
  }
  return result;
}

CalibrationResult threshold_for_performance(
    const std::vector<double>& ref_confidences,
    const std::vector<double>& metric_values, double target_performance) {
  if (ref_confidences.size() != metric_values.size()) {
    raise(ErrorCode::dimension_mismatch,
          "threshold_for_performance: metric/confidence length mismatch");
  }
  if (ref_confidences.size() < 2) {
    raise(ErrorCode::too_few_points,
          "threshold_for_performance: needs at least 2 instances");
  }
  if (!std::isfinite(target_performance)) {
    raise(ErrorCode::invalid_config,
          "threshold_for_performance: non-finite target");
  }
  const AbstentionCurve ref_curve =
      curve_from_values(metric_values, ref_confidences);
  std::vector<double> sorted = ref_confidences;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t j = 0; j < ref_curve.points.size(); ++j) {
    if (ref_curve.points[j].performance >= target_performance) {
      CalibrationResult result;
      result.tau = (j == 0) ? -std::numeric_limits<double>::infinity()
                            : sorted[j - 1];
      result.expected_rate = ref_curve.points[j].abstention_rate;
      result.expected_performance = ref_curve.points[j].performance;
      return result;
    }
  }
  raise(ErrorCode::unreachable_target,
        "threshold_for_performance: no abstention rate reaches the target");
}

CalibrationResult threshold_for_performance(const RerankDataset& ref,
                                            const ConfidenceModel& model,
                                            MetricKind kind,
                                            double target_performance) {
  return threshold_for_performance(score_all(model, ref),
                                   instance_metrics(ref, kind),
                                   target_performance);
}

CalibrationTrial calibration_trial(const RerankDataset& ref,
                                   const RerankDataset& test,
                                   const ConfidenceModel& model,
                                   MetricKind kind, double target_rate) {
  const std::vector<double> ref_conf = score_all(model, ref);
  const std::vector<double> ref_metrics = instance_metrics(ref, kind);
  const CalibrationResult calib =
      threshold_for_rate(ref_conf, target_rate, ref_metrics);

  const std::vector<double> test_conf = score_all(model, test);
  const std::vector<double> test_metrics = instance_metrics(test, kind);

  CalibrationTrial trial;
  trial.tau = calib.tau;
  trial.expected_rate = calib.expected_rate;
  trial.expected_performance = calib.expected_performance;
  trial.achieved_rate = abstained_fraction(test_conf, calib.tau);
  trial.achieved_performance =
      predicted_mean(test_conf, test_metrics, calib.tau);
  return trial;
}

std::vector<MaeReport> calibration_mae(const RerankDataset& ds,
                                       const ModelSpec& spec, MetricKind kind,
                                       const std::vector<double>& target_rates,
                                       std::size_t seeds,
                                       std::uint64_t rng_seed,
                                       double split_ratio) {
  if (seeds < 1) {
    raise(ErrorCode::invalid_config, "calibration_mae: seeds must be >= 1");
  }
  if (target_rates.empty()) {
    raise(ErrorCode::invalid_config, "calibration_mae: no targets");
  }
  const std::size_t n_targets = target_rates.size();
  std::vector<std::vector<CalibrationTrial>> trials(
      seeds, std::vector<CalibrationTrial>(n_targets));

  for_each_seed(seeds, [&](std::size_t s) {
    const auto [ref, test] =
        split_reference_test(ds, split_ratio, rng_seed + s);
    const ConfidenceModel model = fit_model(spec, ref, kind);
    for (std::size_t t = 0; t < n_targets; ++t) {
      trials[s][t] = calibration_trial(ref, test, model, kind, target_rates[t]);
    }
  });

  std::vector<MaeReport> reports(n_targets);
  for (std::size_t t = 0; t < n_targets; ++t) {
    MaeReport& report = reports[t];
    report.target_rate = target_rates[t];
    report.seeds = seeds;
    long double rate_sum = 0.0L;
    long double perf_sum = 0.0L;
    for (std::size_t s = 0; s < seeds; ++s) {
      const CalibrationTrial& trial = trials[s][t];
      rate_sum += std::fabs(trial.achieved_rate - target_rates[t]);
      if (trial.expected_performance && trial.achieved_performance) {
        perf_sum += std::fabs(*trial.achieved_performance -
                              *trial.expected_performance);
        ++report.seeds_with_performance;
      }
    }
    report.mae_rate =
        static_cast<double>(rate_sum / static_cast<long double>(seeds));
    report.mae_performance =
        report.seeds_with_performance == 0
            ? 0.0
            : static_cast<double>(perf_sum / static_cast<long double>(
                                                 report.seeds_with_performance));
  }
  return reports;
}

EvalReport domain_transfer(const RerankDataset& ref_ds,
                           const RerankDataset& test_ds, const ModelSpec& spec,
                           MetricKind kind) {
  const bool data_driven = spec.method == "lin" || spec.method == "log" ||
                           spec.method == "mah";
  if (data_driven && ref_ds.k != test_ds.k) {
    raise(ErrorCode::dimension_mismatch,
          "domain_transfer: reference k=" + std::to_string(ref_ds.k) +
              " does not match test k=" + std::to_string(test_ds.k));
  }
  const ConfidenceModel model = fit_model(spec, ref_ds, kind);
  return evaluate(test_ds, model, kind);
}

namespace {

RerankDataset subsample(const RerankDataset& ds, std::size_t size,
                        rng::SplitMix64& gen) {
  auto perm = rng::shuffled_indices(ds.size(), gen);
  perm.resize(size);
  std::sort(perm.begin(), perm.end());
  std::vector<RerankInstance> subset;
  subset.reserve(size);
  for (std::size_t i : perm) subset.push_back(ds.instances[i]);
  return RerankDataset{std::move(subset), ds.k};
}

}  // namespace

RefSizeResult refsize_sweep(const RerankDataset& ds, const ModelSpec& spec,
                            const ModelSpec& baseline_spec, MetricKind kind,
                            const std::vector<std::size_t>& sizes,
                            std::size_t seeds, std::uint64_t rng_seed,
                            double split_ratio) {
  if (seeds < 1 || sizes.empty()) {
    raise(ErrorCode::invalid_config,
          "refsize_sweep: needs sizes and seeds >= 1");
  }
  const auto ref_size = static_cast<std::size_t>(
      std::llround(split_ratio * static_cast<double>(ds.size())));
  for (std::size_t size : sizes) {
    if (size < 2) {
      raise(ErrorCode::reference_too_small,
            "refsize_sweep: size " + std::to_string(size) +
                " is below the minimum fit requirement");
    }
    if (size > ref_size) {
      raise(ErrorCode::reference_too_small,
            "refsize_sweep: size " + std::to_string(size) +
                " exceeds the reference split (" + std::to_string(ref_size) +
                ")");
    }
  }

  const std::size_t n_sizes = sizes.size();
  std::vector<std::vector<double>> method_nauc(seeds,
                                               std::vector<double>(n_sizes));
  std::vector<double> baseline_nauc(seeds);

  for_each_seed(seeds, [&](std::size_t s) {
    const auto [ref, test] =
        split_reference_test(ds, split_ratio, rng_seed + s);
    const ConfidenceModel baseline = fit_model(baseline_spec, ref, kind);
    const EvalReport base_report = evaluate(test, baseline, kind);
    if (!base_report.nauc) {
      raise(ErrorCode::degenerate_oracle,
            "refsize_sweep: constant metric on the test split");
    }
    baseline_nauc[s] = *base_report.nauc;
    for (std::size_t j = 0; j < n_sizes; ++j) {
      auto gen = rng::stream(rng_seed + s, sizes[j]);
      const RerankDataset sub = subsample(ref, sizes[j], gen);
      const ConfidenceModel model = fit_model(spec, sub, kind);
      const EvalReport report = evaluate(test, model, kind);
      method_nauc[s][j] = report.nauc.value_or(0.0);
    }
  });

  RefSizeResult result;
  result.seeds = seeds;
  const double baseline_mean = mean_of(baseline_nauc);
  for (std::size_t j = 0; j < n_sizes; ++j) {
    std::vector<double> column(seeds);
    for (std::size_t s = 0; s < seeds; ++s) column[s] = method_nauc[s][j];
    RefSizeRow row;
    row.size = sizes[j];
    row.nauc_method = mean_of(column);
    row.nauc_baseline = baseline_mean;
    result.rows.push_back(row);
  }
  // Smallest size on the grid whose mean reaches the baseline, regardless of
  // the order the sizes were given in.
  std::vector<const RefSizeRow*> by_size;
  for (const auto& row : result.rows) by_size.push_back(&row);
  std::sort(by_size.begin(), by_size.end(),
            [](const RefSizeRow* a, const RefSizeRow* b) {
              return a->size < b->size;
            });
  for (const RefSizeRow* row : by_size) {
    if (row->nauc_method >= row->nauc_baseline) {
      result.break_even = row->size;
      break;
    }
  }
  return result;
}

std::vector<QualSweepRow> qualification_sweep(
    const RerankDataset& ds, MetricKind kind,
    const std::vector<double>& q_values, std::size_t seeds,
    std::uint64_t rng_seed, double split_ratio, double l2_lambda,
    double cov_epsilon) {
  if (seeds < 1 || q_values.empty()) {
    raise(ErrorCode::invalid_config,
          "qualification_sweep: needs q values and seeds >= 1");
  }
  for (double q : q_values) {
    if (!(q > 0.0 && q < 0.5)) {
      raise(ErrorCode::invalid_config,
            "qualification_sweep: q must lie in (0, 0.5)");
    }
  }

  struct Cell {
    long double sum = 0.0L;
    std::size_t ok = 0;
    std::size_t failed = 0;
  };
  const std::size_t n_q = q_values.size();
  std::vector<std::vector<Cell>> log_cells(seeds, std::vector<Cell>(n_q));
  std::vector<std::vector<Cell>> mah_cells(seeds, std::vector<Cell>(n_q));

  for_each_seed(seeds, [&](std::size_t s) {
    const auto [ref, test] =
        split_reference_test(ds, split_ratio, rng_seed + s);
    const auto pairs = derive_reference(ref, kind);
    for (std::size_t j = 0; j < n_q; ++j) {
      auto record = [&](std::vector<std::vector<Cell>>& cells, auto&& fit) {
        Cell& cell = cells[s][j];
        try {
          const ConfidenceModel model = fit();
          const EvalReport report = evaluate(test, model, kind);
          if (report.nauc) {
            cell.sum += *report.nauc;
            ++cell.ok;
          } else {
            ++cell.failed;
          }
        } catch (const Error& e) {
          if (e.code() == ErrorCode::empty_class ||
              e.code() == ErrorCode::too_few_samples) {
            ++cell.failed;
          } else {
            throw;
          }
        }
      };
      record(log_cells, [&] {
        return ConfidenceModel(fit_logistic3(pairs, q_values[j], l2_lambda));
      });
      record(mah_cells, [&] {
        return ConfidenceModel(fit_mahalanobis(pairs, q_values[j], cov_epsilon));
      });
    }
  });

  std::vector<QualSweepRow> rows(n_q);
  for (std::size_t j = 0; j < n_q; ++j) {
    QualSweepRow& row = rows[j];
    row.q = q_values[j];
    auto reduce = [&](const std::vector<std::vector<Cell>>& cells,
                      std::optional<double>& out, std::size_t& failed) {
      long double sum = 0.0L;
      std::size_t ok = 0;
      for (std::size_t s = 0; s < seeds; ++s) {
        sum += cells[s][j].sum;
        ok += cells[s][j].ok;
        failed += cells[s][j].failed;
      }
      if (ok > 0) out = static_cast<double>(sum / static_cast<long double>(ok));
    };
    reduce(log_cells, row.nauc_log, row.failed_log);
    reduce(mah_cells, row.nauc_mah, row.failed_mah);
  }
  return rows;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) {
    raise(ErrorCode::dimension_mismatch, "pearson: length mismatch");
  }
  if (xs.size() < 2) {
    raise(ErrorCode::too_few_points, "pearson: needs at least 2 samples");
  }
  const double mx = mean_of(xs);
  const double my = mean_of(ys);
  long double sxy = 0.0L, sxx = 0.0L, syy = 0.0L;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const long double dx = xs[i] - mx;
    const long double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0L || syy == 0.0L) {
    raise(ErrorCode::zero_variance, "pearson: zero variance input");
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

double mean_abs_error(const std::vector<double>& targets,
                      const std::vector<double>& achieved) {
  if (targets.size() != achieved.size() || targets.empty()) {
    raise(ErrorCode::dimension_mismatch,
          "mean_abs_error: length mismatch or empty input");
  }
  long double sum = 0.0L;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    sum += std::fabs(targets[i] - achieved[i]);
  }
  return static_cast<double>(sum / static_cast<long double>(targets.size()));
}

}  // namespace abstain
