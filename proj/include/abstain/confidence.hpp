#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "abstain/core.hpp"
#include "abstain/parallel.hpp"

namespace abstain {

// One element of the reference set: ascending-sorted scores paired with the
// ranking metric achieved on that instance.
struct ReferencePair {
  ScoreVector sorted_scores;
  double metric_value = 0.0;
};

struct MaxScoreModel {};
struct StdDevModel {};
struct Gap12Model {};

struct LinearRidgeModel {
  double intercept = 0.0;
  std::vector<double> coefficients;  // indexed by ascending sorted position
  double ridge_lambda = 0.1;

  std::size_t k() const { return coefficients.size(); }
};

// Multinomial softmax over classes (-1, 0, +1), in that fixed order.
struct Logistic3Model {
  std::array<std::vector<double>, 3> weights;  // one row of k weights per class
  std::array<double, 3> biases{0.0, 0.0, 0.0};
  double qualification_q = 0.25;
  double l2_lambda = 0.1;
  bool converged = true;
  int iterations = 0;

  std::size_t k() const { return weights[0].size(); }
};

struct MahalanobisModel {
  std::vector<double> mean_good;
  std::vector<double> mean_bad;
  std::vector<double> invcov_good;  // k*k, row-major
  std::vector<double> invcov_bad;
  double qualification_q = 0.25;
  double cov_epsilon = 1e-6;

  std::size_t k() const { return mean_good.size(); }
};

using ConfidenceModel =
    std::variant<MaxScoreModel, StdDevModel, Gap12Model, LinearRidgeModel,
                 Logistic3Model, MahalanobisModel>;

// Variant tag as used by the CLI and the model JSON schema:
// max | std | gap12 | lin | log | mah.
const char* method_name(const ConfidenceModel& model);
bool is_reference_free(const ConfidenceModel& model);

// Expected input dimension of a fitted model; nullopt for reference-free
// variants, which accept any k.
std::optional<std::size_t> model_k(const ConfidenceModel& model);

// Reference-free confidence functions.
double conf_max(const ScoreVector& z);
double conf_std(const ScoreVector& z);  // population (divide-by-k) std
double conf_gap12(const ScoreVector& z);

// Builds the reference set: one (sorted scores, metric value) pair per
// instance, dataset order preserved.
std::vector<ReferencePair> derive_reference(
    const RerankDataset& ds, MetricKind kind,
    parallel::Exec exec = parallel::Exec::parallel);

// Ridge regression of metric values on sorted scores; intercept unpenalized,
// features mean-centered before the closed-form solve.
LinearRidgeModel fit_linear(const std::vector<ReferencePair>& pairs,
                            double ridge_lambda = 0.1);
double conf_linear(const LinearRidgeModel& model, const ScoreVector& z);

// Nearest-rank quantile class assignment: +1 above the (1-q) quantile,
// -1 below the q quantile, 0 otherwise (strict inequalities).
struct Qualification {
  std::vector<int> classes;  // entries in {-1, 0, +1}, pair order
  double lower_threshold = 0.0;
  double upper_threshold = 0.0;
};
Qualification qualify_classes(const std::vector<ReferencePair>& pairs,
                              double q = 0.25);

Logistic3Model fit_logistic3(const std::vector<ReferencePair>& pairs,
                             double q = 0.25, double l2_lambda = 0.1,
                             int max_iterations = 10000,
                             double grad_tolerance = 1e-6);
// Softmax class probabilities on a sorted input, order (-1, 0, +1).
std::array<double, 3> logistic3_probabilities(const Logistic3Model& model,
                                              const ScoreVector& sorted);
double conf_logistic(const Logistic3Model& model, const ScoreVector& z);

MahalanobisModel fit_mahalanobis(const std::vector<ReferencePair>& pairs,
                                 double q = 0.25, double cov_epsilon = 1e-6);
double conf_mahalanobis(const MahalanobisModel& model, const ScoreVector& z);

double confidence(const ConfidenceModel& model, const ScoreVector& z);

// Confidence per instance, order preserving. Parallel kernel with a serial
// reference path.
std::vector<double> score_all(const ConfidenceModel& model,
                              const RerankDataset& ds,
                              parallel::Exec exec = parallel::Exec::parallel);

// Fit configuration shared by the CLI and the study protocols.
struct ModelSpec {
  std::string method = "lin";  // max | std | gap12 | lin | log | mah
  double ridge_lambda = 0.1;
  double qualification_q = 0.25;
  double l2_lambda = 0.1;
  double cov_epsilon = 1e-6;
};

// Fits per spec; reference-free methods ignore the reference set.
ConfidenceModel fit_model(const ModelSpec& spec, const RerankDataset& ref,
                          MetricKind kind);

}  // namespace abstain
