#include "abstain/confidence.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace abstain {

namespace {

Eigen::VectorXd to_eigen(const ScoreVector& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

void check_k(std::size_t got, std::size_t want, const char* op) {
  if (got != want) {
    raise(ErrorCode::dimension_mismatch,
          std::string(op) + ": input has k=" + std::to_string(got) +
              ", model expects k=" + std::to_string(want));
  }
}

}  // namespace

const char* method_name(const ConfidenceModel& model) {
  struct Visitor {
    const char* operator()(const MaxScoreModel&) const { return "max"; }
    const char* operator()(const StdDevModel&) const { return "std"; }
    const char* operator()(const Gap12Model&) const { return "gap12"; }
    const char* operator()(const LinearRidgeModel&) const { return "lin"; }
    const char* operator()(const Logistic3Model&) const { return "log"; }
    const char* operator()(const MahalanobisModel&) const { return "mah"; }
  };
  return std::visit(Visitor{}, model);
}

bool is_reference_free(const ConfidenceModel& model) {
  return std::holds_alternative<MaxScoreModel>(model) ||
         std::holds_alternative<StdDevModel>(model) ||
         std::holds_alternative<Gap12Model>(model);
}

std::optional<std::size_t> model_k(const ConfidenceModel& model) {
  if (const auto* lin = std::get_if<LinearRidgeModel>(&model)) return lin->k();
  if (const auto* log3 = std::get_if<Logistic3Model>(&model)) return log3->k();
  if (const auto* mah = std::get_if<MahalanobisModel>(&model)) return mah->k();
  return std::nullopt;
}

double conf_max(const ScoreVector& z) {
  return *std::max_element(z.begin(), z.end());
}

double conf_std(const ScoreVector& z) {
  const std::size_t k = z.size();
  long double mean = 0.0L;
  for (double v : z) mean += v;
  mean /= static_cast<long double>(k);
  long double ss = 0.0L;
  for (double v : z) {
    const long double d = v - mean;
    ss += d * d;
  }
  return static_cast<double>(std::sqrt(ss / static_cast<long double>(k)));
}

double conf_gap12(const ScoreVector& z) {
  if (z.size() < 2) {
    raise(ErrorCode::invalid_config, "conf_gap12: needs k >= 2");
  }
  double top1 = -std::numeric_limits<double>::infinity();
  double top2 = -std::numeric_limits<double>::infinity();
  for (double v : z) {
    if (v > top1) {
      top2 = top1;
      top1 = v;
    } else if (v > top2) {
      top2 = v;
    }
  }
  return top1 - top2;
}

std::vector<ReferencePair> derive_reference(const RerankDataset& ds,
                                            MetricKind kind,
                                            parallel::Exec exec) {
  const std::vector<double> metrics = instance_metrics(ds, kind, exec);
  std::vector<ReferencePair> pairs(ds.size());
  parallel::par_for(
      ds.size(),
      [&](std::size_t i) {
        pairs[i] = ReferencePair{sort_scores(ds.instances[i].scores),
                                 metrics[i]};
      },
      exec);
  return pairs;
}

LinearRidgeModel fit_linear(const std::vector<ReferencePair>& pairs,
                            double ridge_lambda) {
  const std::size_t n = pairs.size();
  if (n < 2) {
    raise(ErrorCode::too_few_samples, "fit_linear: needs at least 2 pairs");
  }
  const std::size_t k = pairs.front().sorted_scores.size();
  for (const auto& p : pairs) {
    check_k(p.sorted_scores.size(), k, "fit_linear");
  }
  if (ridge_lambda < 0.0) {
    raise(ErrorCode::invalid_config, "fit_linear: negative ridge_lambda");
  }

  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    X.row(static_cast<Eigen::Index>(i)) = to_eigen(pairs[i].sorted_scores);
    y(static_cast<Eigen::Index>(i)) = pairs[i].metric_value;
  }

  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  X.rowwise() -= x_mean;
  y.array() -= y_mean;

  Eigen::MatrixXd normal = X.transpose() * X;
  normal.diagonal().array() += ridge_lambda;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
  if (!lu.isInvertible()) {
    raise(ErrorCode::degenerate_design,
          "fit_linear: centered normal matrix is singular");
  }
  const Eigen::VectorXd beta = lu.solve(X.transpose() * y);

  LinearRidgeModel model;
  model.ridge_lambda = ridge_lambda;
  model.coefficients.assign(beta.data(), beta.data() + beta.size());
  model.intercept = y_mean - x_mean.dot(beta);
  return model;
}

double conf_linear(const LinearRidgeModel& model, const ScoreVector& z) {
  check_k(z.size(), model.k(), "conf_linear");
  const ScoreVector sorted = sort_scores(z);
  long double acc = model.intercept;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    acc += static_cast<long double>(model.coefficients[j]) * sorted[j];
  }
  return static_cast<double>(acc);
}

Qualification qualify_classes(const std::vector<ReferencePair>& pairs,
                              double q) {
  if (!(q > 0.0 && q < 0.5)) {
    raise(ErrorCode::invalid_config,
          "qualify_classes: q must lie in (0, 0.5)");
  }
  const std::size_t n = pairs.size();
  const auto min_pairs =
      static_cast<std::size_t>(std::ceil(1.0 / q));
  if (n < min_pairs) {
    raise(ErrorCode::too_few_samples,
          "qualify_classes: needs at least ceil(1/q) pairs");
  }

  std::vector<double> metrics(n);
  for (std::size_t i = 0; i < n; ++i) metrics[i] = pairs[i].metric_value;
  std::vector<double> sorted = metrics;
  std::sort(sorted.begin(), sorted.end());

  // Nearest-rank quantile: the ceil(p*n)-th smallest value (1-based).
  const auto nearest_rank = [&](double p) {
    auto rank = static_cast<std::size_t>(
        std::ceil(p * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
  };

  Qualification result;
  result.lower_threshold = nearest_rank(q);
  result.upper_threshold = nearest_rank(1.0 - q);
  result.classes.resize(n);
  std::size_t counts[3] = {0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    int cls = 0;
    if (metrics[i] > result.upper_threshold) cls = 1;
    if (metrics[i] < result.lower_threshold) cls = -1;
    result.classes[i] = cls;
    ++counts[cls + 1];
  }
  if (counts[0] == 0 || counts[1] == 0 || counts[2] == 0) {
    raise(ErrorCode::empty_class,
          "qualify_classes: degenerate metric distribution leaves a class "
          "empty");
  }
  return result;
}

namespace {

struct Logistic3Problem {
  Eigen::MatrixXd X;         // n x k sorted scores
  std::vector<int> classes;  // class index 0..2 per row
  double l2_lambda;

  // Negative log-likelihood plus (lambda/2)*||W||^2, biases unpenalized.
  double loss(const Eigen::MatrixXd& W, const Eigen::Vector3d& b) const {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd logits = X * W.transpose();
    logits.rowwise() += b.transpose();
    long double nll = 0.0L;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = logits.row(i).maxCoeff();
      const double lse =
          m + std::log((logits.row(i).array() - m).exp().sum());
      nll += lse - logits(i, classes[static_cast<std::size_t>(i)]);
    }
    return static_cast<double>(nll) +
           0.5 * l2_lambda * W.squaredNorm();
  }

  void gradient(const Eigen::MatrixXd& W, const Eigen::Vector3d& b,
                Eigen::MatrixXd& gW, Eigen::Vector3d& gb) const {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd logits = X * W.transpose();
    logits.rowwise() += b.transpose();
    Eigen::MatrixXd probs(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = logits.row(i).maxCoeff();
      Eigen::RowVector3d e = (logits.row(i).array() - m).exp();
      probs.row(i) = e / e.sum();
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      probs(i, classes[static_cast<std::size_t>(i)]) -= 1.0;
    }
    gW = probs.transpose() * X + l2_lambda * W;
    gb = probs.colwise().sum().transpose();
  }
};

}  // namespace

Logistic3Model fit_logistic3(const std::vector<ReferencePair>& pairs,
                             double q, double l2_lambda, int max_iterations,
                             double grad_tolerance) {
  const Qualification qual = qualify_classes(pairs, q);
  const std::size_t n = pairs.size();
  const std::size_t k = pairs.front().sorted_scores.size();

  Logistic3Problem problem;
  problem.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  problem.classes.resize(n);
  problem.l2_lambda = l2_lambda;
  for (std::size_t i = 0; i < n; ++i) {
    check_k(pairs[i].sorted_scores.size(), k, "fit_logistic3");
    problem.X.row(static_cast<Eigen::Index>(i)) =
        to_eigen(pairs[i].sorted_scores);
    problem.classes[i] = qual.classes[i] + 1;
  }

  // Full-batch gradient descent with Armijo backtracking; deterministic,
  // zero-initialized.
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(3, static_cast<Eigen::Index>(k));
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  Eigen::MatrixXd gW;
  Eigen::Vector3d gb;
  double loss = problem.loss(W, b);
  double step = 1.0;
  int iter = 0;
  bool converged = false;
  constexpr double kArmijo = 1e-4;

  for (; iter < max_iterations; ++iter) {
    problem.gradient(W, b, gW, gb);
    const double grad_sq = gW.squaredNorm() + gb.squaredNorm();
    if (std::sqrt(grad_sq) <= grad_tolerance) {
      converged = true;
      break;
    }
    step = std::min(step * 2.0, 1e4);
    bool advanced = false;
    while (step > 1e-16) {
      const Eigen::MatrixXd W_next = W - step * gW;
      const Eigen::Vector3d b_next = b - step * gb;
      const double loss_next = problem.loss(W_next, b_next);
      if (loss_next <= loss - kArmijo * step * grad_sq) {
        W = W_next;
        b = b_next;
        loss = loss_next;
        advanced = true;
        break;
      }
      step *= 0.5;
    }
    if (!advanced) break;  // no descent step at machine precision
  }

  Logistic3Model model;
  model.qualification_q = q;
  model.l2_lambda = l2_lambda;
  model.converged = converged;
  model.iterations = iter;
  for (int c = 0; c < 3; ++c) {
    model.weights[c].assign(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      model.weights[c][j] = W(c, static_cast<Eigen::Index>(j));
    }
    model.biases[c] = b(c);
  }
  return model;
}

std::array<double, 3> logistic3_probabilities(const Logistic3Model& model,
                                              const ScoreVector& sorted) {
  check_k(sorted.size(), model.k(), "logistic3_probabilities");
  std::array<double, 3> logits;
  for (int c = 0; c < 3; ++c) {
    long double acc = model.biases[c];
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      acc += static_cast<long double>(model.weights[c][j]) * sorted[j];
    }
    logits[c] = static_cast<double>(acc);
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  std::array<double, 3> probs;
  double z = 0.0;
  for (int c = 0; c < 3; ++c) {
    probs[c] = std::exp(logits[c] - m);
    z += probs[c];
  }
  for (int c = 0; c < 3; ++c) probs[c] /= z;
  return probs;
}

double conf_logistic(const Logistic3Model& model, const ScoreVector& z) {
  const auto probs = logistic3_probabilities(model, sort_scores(z));
  return probs[2] - probs[0];
}

namespace {

// Class mean and biased (1/N) covariance, inverted after epsilon*I
// regularization.
void class_statistics(const std::vector<const ScoreVector*>& members,
                      std::size_t k, double cov_epsilon,
                      std::vector<double>& mean_out,
                      std::vector<double>& invcov_out) {
  const std::size_t n = members.size();
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < n; ++i) {
    Z.row(static_cast<Eigen::Index>(i)) = to_eigen(*members[i]);
  }
  const Eigen::RowVectorXd mu = Z.colwise().mean();
  Z.rowwise() -= mu;
  Eigen::MatrixXd cov =
      (Z.transpose() * Z) / static_cast<double>(n);
  cov.diagonal().array() += cov_epsilon;

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    raise(ErrorCode::singular_covariance,
          "fit_mahalanobis: covariance not positive definite after "
          "epsilon regularization");
  }
  const Eigen::MatrixXd inv =
      llt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k),
                                          static_cast<Eigen::Index>(k)));

  mean_out.assign(mu.data(), mu.data() + k);
  invcov_out.resize(k * k);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      // Store the symmetrized inverse so serialized models are exactly
      // symmetric.
      invcov_out[r * k + c] =
          0.5 * (inv(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) +
                 inv(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)));
    }
  }
}

double mahalanobis_sq(const ScoreVector& v, const std::vector<double>& mean,
                      const std::vector<double>& invcov) {
  const std::size_t k = mean.size();
  std::vector<double> d(k);
  for (std::size_t j = 0; j < k; ++j) d[j] = v[j] - mean[j];
  long double acc = 0.0L;
  for (std::size_t r = 0; r < k; ++r) {
    long double row = 0.0L;
    for (std::size_t c = 0; c < k; ++c) {
      row += static_cast<long double>(invcov[r * k + c]) * d[c];
    }
    acc += row * d[r];
  }
  return static_cast<double>(acc);
}

}  // namespace

MahalanobisModel fit_mahalanobis(const std::vector<ReferencePair>& pairs,
                                 double q, double cov_epsilon) {
  if (cov_epsilon < 0.0) {
    raise(ErrorCode::invalid_config, "fit_mahalanobis: negative cov_epsilon");
  }
  const Qualification qual = qualify_classes(pairs, q);
  const std::size_t k = pairs.front().sorted_scores.size();

  std::vector<const ScoreVector*> good;
  std::vector<const ScoreVector*> bad;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    check_k(pairs[i].sorted_scores.size(), k, "fit_mahalanobis");
    if (qual.classes[i] == 1) good.push_back(&pairs[i].sorted_scores);
    if (qual.classes[i] == -1) bad.push_back(&pairs[i].sorted_scores);
  }
  if (good.size() < 2 || bad.size() < 2) {
    raise(ErrorCode::too_few_samples,
          "fit_mahalanobis: each qualified class needs at least 2 members");
  }

  MahalanobisModel model;
  model.qualification_q = q;
  model.cov_epsilon = cov_epsilon;
  class_statistics(good, k, cov_epsilon, model.mean_good, model.invcov_good);
  class_statistics(bad, k, cov_epsilon, model.mean_bad, model.invcov_bad);
  return model;
}

double conf_mahalanobis(const MahalanobisModel& model, const ScoreVector& z) {
  check_k(z.size(), model.k(), "conf_mahalanobis");
  const ScoreVector sorted = sort_scores(z);
  return mahalanobis_sq(sorted, model.mean_bad, model.invcov_bad) -
         mahalanobis_sq(sorted, model.mean_good, model.invcov_good);
}

double confidence(const ConfidenceModel& model, const ScoreVector& z) {
  struct Visitor {
    const ScoreVector& z;
    double operator()(const MaxScoreModel&) const { return conf_max(z); }
    double operator()(const StdDevModel&) const { return conf_std(z); }
    double operator()(const Gap12Model&) const { return conf_gap12(z); }
    double operator()(const LinearRidgeModel& m) const {
      return conf_linear(m, z);
    }
    double operator()(const Logistic3Model& m) const {
      return conf_logistic(m, z);
    }
    double operator()(const MahalanobisModel& m) const {
      return conf_mahalanobis(m, z);
    }
  };
  return std::visit(Visitor{z}, model);
}

std::vector<double> score_all(const ConfidenceModel& model,
                              const RerankDataset& ds, parallel::Exec exec) {
  if (ds.instances.empty()) {
    raise(ErrorCode::empty_dataset, "score_all: empty dataset");
  }
  if (const auto want = model_k(model); want && *want != ds.k) {
    raise(ErrorCode::dimension_mismatch,
          "score_all: dataset k=" + std::to_string(ds.k) +
              " does not match model k=" + std::to_string(*want));
  }
  std::vector<double> out(ds.size());
  parallel::par_for(
      ds.size(),
      [&](std::size_t i) { out[i] = confidence(model, ds.instances[i].scores); },
      exec);
  return out;
}

ConfidenceModel fit_model(const ModelSpec& spec, const RerankDataset& ref,
                          MetricKind kind) {
  if (spec.method == "max") return MaxScoreModel{};
  if (spec.method == "std") return StdDevModel{};
  if (spec.method == "gap12") return Gap12Model{};
  const auto pairs = derive_reference(ref, kind);
  if (spec.method == "lin") return fit_linear(pairs, spec.ridge_lambda);
  if (spec.method == "log") {
    return fit_logistic3(pairs, spec.qualification_q, spec.l2_lambda);
  }
  if (spec.method == "mah") {
    return fit_mahalanobis(pairs, spec.qualification_q, spec.cov_epsilon);
  }
  raise(ErrorCode::invalid_config, "unknown method '" + spec.method + "'");
}

}  // namespace abstain
