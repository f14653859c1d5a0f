// abstain: black-box reranking abstention toolkit.
//
// Subcommands cover the full pipeline: synthetic data generation and raw
// preprocessing, confidence-model fitting and scoring, performance-abstention
// evaluation (nAUC vs. oracle and random baselines), threshold calibration,
// transfer/reference-size/qualification studies, and latency benchmarking.
//
// Exit codes: 0 success, 1 domain error, 2 flag misuse. Errors are emitted as
// JSON on stderr for pipeline composition.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "abstain/calibration.hpp"
#include "abstain/confidence.hpp"
#include "abstain/core.hpp"
#include "abstain/dataio.hpp"
#include "abstain/eval.hpp"
#include "abstain/parallel.hpp"
#include "abstain/rng.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Flag misuse detected after CLI11 parsing (conditional requirements);
// mapped to exit code 2 like any other usage error.
struct UsageError {
  std::string message;
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_output(const std::string& content, const std::string& out_path,
                  bool force) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  if (!force && fs::exists(out_path)) {
    abstain::raise(abstain::ErrorCode::file_exists,
                   "'" + out_path + "' exists; pass --force to overwrite");
  }
  abstain::write_text_file(out_path, content);
}

json meta_block(const std::string& command,
                std::optional<std::uint64_t> seed = std::nullopt) {
  json meta{{"command", command}, {"rng", abstain::rng::kAlgorithm}};
  if (seed) meta["seed"] = *seed;
  return meta;
}

json report_json(const abstain::EvalReport& report) {
  json doc{{"method", report.method},
           {"metric", abstain::to_string(report.metric)},
           {"n_test", report.n_test},
           {"auc", report.auc},
           {"auc_oracle", report.auc_oracle},
           {"auc_random", report.auc_random}};
  if (report.nauc) {
    doc["nauc"] = *report.nauc;
  } else {
    doc["nauc"] = nullptr;
    doc["degenerate_oracle"] = true;
  }
  return doc;
}

struct CommonOpts {
  std::string data;
  std::string ref;
  std::string test;
  std::string method = "lin";
  std::string metric = "ap";
  double ratio = 0.8;
  std::uint64_t seed = 0;
  bool seed_set = false;
  abstain::ModelSpec spec_hyper;  // method filled in before use
};

void add_method_flags(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--method", opts.method,
                  "Confidence method: max|std|gap12|lin|log|mah")
      ->check(CLI::IsMember({"max", "std", "gap12", "lin", "log", "mah"}));
  cmd->add_option("--metric", opts.metric, "Instance metric: ap|ndcg|rr")
      ->check(CLI::IsMember({"ap", "ndcg", "rr"}));
  cmd->add_option("--ridge-lambda", opts.spec_hyper.ridge_lambda,
                  "Ridge penalty for --method lin");
  cmd->add_option("--l2-lambda", opts.spec_hyper.l2_lambda,
                  "L2 penalty for --method log");
  cmd->add_option("--q", opts.spec_hyper.qualification_q,
                  "Qualification quantile for log/mah");
  cmd->add_option("--epsilon", opts.spec_hyper.cov_epsilon,
                  "Covariance regularizer for --method mah");
}

abstain::ModelSpec make_spec(const CommonOpts& opts) {
  abstain::ModelSpec spec = opts.spec_hyper;
  spec.method = opts.method;
  return spec;
}

bool is_data_driven(const std::string& method) {
  return method == "lin" || method == "log" || method == "mah";
}

// Resolves the reference/test pair from either --data (+seed split) or
// pre-split --ref/--test files.
struct SplitData {
  abstain::RerankDataset ref;
  abstain::RerankDataset test;
  bool used_split = false;
};

SplitData resolve_datasets(const CommonOpts& opts) {
  SplitData out;
  if (!opts.data.empty()) {
    const auto ds = abstain::load_jsonl(opts.data);
    auto [ref, test] = abstain::split_reference_test(ds, opts.ratio, opts.seed);
    out.ref = std::move(ref);
    out.test = std::move(test);
    out.used_split = true;
    return out;
  }
  if (opts.test.empty()) {
    throw UsageError{"either --data or --test is required"};
  }
  out.test = abstain::load_jsonl(opts.test);
  if (!opts.ref.empty()) {
    out.ref = abstain::load_jsonl(opts.ref);
  } else if (is_data_driven(opts.method)) {
    throw UsageError{"--ref is required for data-driven methods"};
  } else {
    out.ref = out.test;  // reference-free fits ignore the reference set
  }
  return out;
}

std::string curve_csv(const abstain::AbstentionCurve& method_curve,
                      const abstain::AbstentionCurve& oracle,
                      double random_performance) {
  std::string csv = "rate,method_perf,oracle_perf,random_perf\n";
  for (std::size_t j = 0; j < method_curve.points.size(); ++j) {
    csv += format_double(method_curve.points[j].abstention_rate);
    csv += ',';
    csv += format_double(method_curve.points[j].performance);
    csv += ',';
    csv += format_double(oracle.points[j].performance);
    csv += ',';
    csv += format_double(random_performance);
    csv += '\n';
  }
  return csv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box abstention for document reranking"};
  app.require_subcommand(1);

  // synth
  abstain::SynthConfig synth_cfg;
  std::string synth_out;
  bool synth_force = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--n", synth_cfg.n_instances, "Instance count")->required();
  synth->add_option("--k", synth_cfg.k, "Documents per instance");
  synth->add_option("--separability", synth_cfg.separability,
                    "Scale of the positive-score shift");
  synth->add_option("--noise-sigma", synth_cfg.noise_sigma, "Score noise");
  synth->add_option("--pos-min", synth_cfg.positives_min, "Min positives");
  synth->add_option("--pos-max", synth_cfg.positives_max, "Max positives");
  synth->add_option("--seed", synth_cfg.rng_seed, "RNG seed")->required();
  synth->add_option("--out", synth_out, "Output JSONL path")->required();
  synth->add_flag("--force", synth_force, "Overwrite existing output");

  // prep
  std::string prep_raw, prep_out, prep_report;
  abstain::PreprocessConfig prep_cfg;
  bool prep_force = false;
  auto* prep = app.add_subcommand("prep", "Preprocess a raw dataset");
  prep->add_option("--raw", prep_raw, "Raw JSONL input")->required();
  prep->add_option("--out", prep_out, "Preprocessed JSONL output")->required();
  prep->add_option("--report", prep_report, "Discard report JSON path");
  prep->add_option("--k", prep_cfg.target_k, "Target documents per instance");
  prep->add_option("--max-positives", prep_cfg.max_positives,
                   "Positive cap per instance");
  prep->add_option("--seed", prep_cfg.rng_seed, "RNG seed")->required();
  prep->add_flag("--force", prep_force, "Overwrite existing outputs");

  // fit
  CommonOpts fit_opts;
  std::string fit_out;
  bool fit_force = false;
  auto* fit = app.add_subcommand("fit", "Fit a confidence model");
  fit->add_option("--data", fit_opts.data, "Reference JSONL (used in full)")
      ->required();
  add_method_flags(fit, fit_opts);
  fit->add_option("--out", fit_out, "Model JSON output")->required();
  fit->add_flag("--force", fit_force, "Overwrite existing output");

  // score
  std::string score_model, score_data, score_out;
  bool score_force = false;
  auto* score = app.add_subcommand("score", "Confidence per instance (CSV)");
  score->add_option("--model", score_model, "Model JSON")->required();
  score->add_option("--data", score_data, "Dataset JSONL")->required();
  score->add_option("--out", score_out, "Output CSV (default stdout)");
  score->add_flag("--force", score_force, "Overwrite existing output");

  // eval
  CommonOpts eval_opts;
  std::string eval_out;
  bool eval_force = false;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate abstention (nAUC)");
  eval_cmd->add_option("--data", eval_opts.data,
                       "Dataset JSONL (split by --ratio/--seed)");
  eval_cmd->add_option("--ref", eval_opts.ref, "Pre-split reference JSONL");
  eval_cmd->add_option("--test", eval_opts.test, "Pre-split test JSONL");
  eval_cmd->add_option("--ratio", eval_opts.ratio, "Reference fraction");
  eval_cmd->add_option("--seed", eval_opts.seed, "Split seed");
  add_method_flags(eval_cmd, eval_opts);
  eval_cmd->add_option("--out", eval_out, "Report JSON (default stdout)");
  eval_cmd->add_flag("--force", eval_force, "Overwrite existing output");

  // curve
  CommonOpts curve_opts;
  std::string curve_out;
  bool curve_force = false;
  auto* curve_cmd =
      app.add_subcommand("curve", "Export the performance-abstention curve");
  curve_cmd->add_option("--data", curve_opts.data,
                        "Dataset JSONL (split by --ratio/--seed)");
  curve_cmd->add_option("--ref", curve_opts.ref, "Pre-split reference JSONL");
  curve_cmd->add_option("--test", curve_opts.test, "Pre-split test JSONL");
  curve_cmd->add_option("--ratio", curve_opts.ratio, "Reference fraction");
  curve_cmd->add_option("--seed", curve_opts.seed, "Split seed");
  add_method_flags(curve_cmd, curve_opts);
  curve_cmd->add_option("--out", curve_out, "Output CSV (default stdout)");
  curve_cmd->add_flag("--force", curve_force, "Overwrite existing output");

  // calibrate
  CommonOpts cal_opts;
  std::string cal_out;
  bool cal_force = false, cal_mae = false;
  std::vector<double> cal_target_rates, cal_target_perfs;
  std::size_t cal_seeds = 1000;
  auto* calibrate =
      app.add_subcommand("calibrate", "Threshold calibration / MAE study");
  calibrate->add_option("--data", cal_opts.data,
                        "Dataset JSONL (split by --ratio/--seed)");
  calibrate->add_option("--ref", cal_opts.ref, "Pre-split reference JSONL");
  calibrate->add_option("--test", cal_opts.test, "Pre-split test JSONL");
  calibrate->add_option("--ratio", cal_opts.ratio, "Reference fraction");
  calibrate->add_option("--seed", cal_opts.seed, "Base RNG seed");
  add_method_flags(calibrate, cal_opts);
  calibrate
      ->add_option("--target-rate", cal_target_rates,
                   "Target abstention rates in [0,1)")
      ->delimiter(',');
  calibrate
      ->add_option("--target-perf", cal_target_perfs,
                   "Target performance levels")
      ->delimiter(',');
  calibrate->add_flag("--mae", cal_mae,
                      "Run the multi-seed MAE protocol (rate targets only)");
  calibrate->add_option("--seeds", cal_seeds, "Seed count for --mae");
  calibrate->add_option("--out", cal_out, "Report JSON (default stdout)");
  calibrate->add_flag("--force", cal_force, "Overwrite existing output");

  // transfer
  CommonOpts transfer_opts;
  std::string transfer_out;
  bool transfer_force = false;
  auto* transfer =
      app.add_subcommand("transfer", "Fit on one dataset, evaluate on another");
  transfer->add_option("--ref", transfer_opts.ref, "Reference JSONL")
      ->required();
  transfer->add_option("--test", transfer_opts.test, "Test JSONL")->required();
  add_method_flags(transfer, transfer_opts);
  transfer->add_option("--out", transfer_out, "Report JSON (default stdout)");
  transfer->add_flag("--force", transfer_force, "Overwrite existing output");

  // refsize
  CommonOpts refsize_opts;
  std::string refsize_out, refsize_csv, refsize_baseline = "std";
  std::vector<std::size_t> refsize_sizes;
  std::size_t refsize_seeds = 5;
  bool refsize_force = false;
  auto* refsize =
      app.add_subcommand("refsize", "Reference-set-size sweep with break-even");
  refsize->add_option("--data", refsize_opts.data, "Dataset JSONL")->required();
  refsize->add_option("--ratio", refsize_opts.ratio, "Reference fraction");
  refsize->add_option("--seed", refsize_opts.seed, "Base RNG seed")->required();
  add_method_flags(refsize, refsize_opts);
  refsize->add_option("--baseline", refsize_baseline,
                      "Baseline method compared against")
      ->check(CLI::IsMember({"max", "std", "gap12", "lin", "log", "mah"}));
  refsize->add_option("--sizes", refsize_sizes, "Reference sizes to test")
      ->required()
      ->delimiter(',');
  refsize->add_option("--seeds", refsize_seeds, "Seed count");
  refsize->add_option("--out", refsize_out, "Summary JSON (default stdout)");
  refsize->add_option("--csv", refsize_csv, "Optional CSV table path");
  refsize->add_flag("--force", refsize_force, "Overwrite existing outputs");

  // sweep-q
  CommonOpts sweepq_opts;
  std::string sweepq_out, sweepq_csv;
  std::vector<double> sweepq_values;
  std::size_t sweepq_seeds = 5;
  bool sweepq_force = false;
  auto* sweepq =
      app.add_subcommand("sweep-q", "Qualification-threshold sweep (log/mah)");
  sweepq->add_option("--data", sweepq_opts.data, "Dataset JSONL")->required();
  sweepq->add_option("--ratio", sweepq_opts.ratio, "Reference fraction");
  sweepq->add_option("--seed", sweepq_opts.seed, "Base RNG seed")->required();
  sweepq->add_option("--metric", sweepq_opts.metric, "Instance metric")
      ->check(CLI::IsMember({"ap", "ndcg", "rr"}));
  sweepq->add_option("--q-values", sweepq_values, "Qualification thresholds")
      ->required()
      ->delimiter(',');
  sweepq->add_option("--seeds", sweepq_seeds, "Seed count");
  sweepq->add_option("--l2-lambda", sweepq_opts.spec_hyper.l2_lambda,
                     "L2 penalty for the logistic variant");
  sweepq->add_option("--epsilon", sweepq_opts.spec_hyper.cov_epsilon,
                     "Covariance regularizer for the Mahalanobis variant");
  sweepq->add_option("--out", sweepq_out, "Summary JSON (default stdout)");
  sweepq->add_option("--csv", sweepq_csv, "Optional CSV table path");
  sweepq->add_flag("--force", sweepq_force, "Overwrite existing outputs");

  // bench
  std::string bench_model, bench_data, bench_out;
  long long bench_reps = 100;
  bool bench_force = false;
  auto* bench = app.add_subcommand("bench", "Time confidence evaluation");
  bench->add_option("--model", bench_model, "Model JSON")->required();
  bench->add_option("--data", bench_data, "Dataset JSONL")->required();
  bench->add_option("--reps", bench_reps, "Repetitions (>= 1)")
      ->check(CLI::PositiveNumber);
  bench->add_option("--out", bench_out, "Report JSON (default stdout)");
  bench->add_flag("--force", bench_force, "Overwrite existing output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump()
              << "\n";
    return 2;
  }

  try {
    if (synth->parsed()) {
      const auto ds = abstain::synth_generate(synth_cfg);
      if (!synth_force && fs::exists(synth_out)) {
        abstain::raise(abstain::ErrorCode::file_exists,
                       "'" + synth_out + "' exists; pass --force to overwrite");
      }
      abstain::write_jsonl(ds, synth_out);
      json summary{{"n", ds.size()},
                   {"k", ds.k},
                   {"out", synth_out},
                   {"meta", meta_block("synth", synth_cfg.rng_seed)}};
      std::cout << summary.dump(2) << "\n";
    } else if (prep->parsed()) {
      const auto raws = abstain::load_raw_jsonl(prep_raw);
      const auto result = abstain::preprocess_raw(raws, prep_cfg);
      if (!prep_report.empty()) {
        if (!prep_force && fs::exists(prep_report)) {
          abstain::raise(abstain::ErrorCode::file_exists,
                         "'" + prep_report +
                             "' exists; pass --force to overwrite");
        }
        abstain::write_text_file(prep_report,
                                 abstain::discard_report_json(result.discarded));
      }
      if (result.kept.empty()) {
        abstain::raise(abstain::ErrorCode::empty_dataset,
                       "preprocessing discarded every instance");
      }
      const auto ds = abstain::make_dataset(result.kept);
      if (!prep_force && fs::exists(prep_out)) {
        abstain::raise(abstain::ErrorCode::file_exists,
                       "'" + prep_out + "' exists; pass --force to overwrite");
      }
      abstain::write_jsonl(ds, prep_out);
      json summary{{"kept", result.kept.size()},
                   {"discarded", result.discarded.size()},
                   {"k", ds.k},
                   {"out", prep_out},
                   {"meta", meta_block("prep", prep_cfg.rng_seed)}};
      if (!prep_report.empty()) summary["report"] = prep_report;
      std::cout << summary.dump(2) << "\n";
    } else if (fit->parsed()) {
      const auto ref = abstain::load_jsonl(fit_opts.data);
      const auto kind = abstain::metric_from_string(fit_opts.metric);
      const auto model = abstain::fit_model(make_spec(fit_opts), ref, kind);
      if (!fit_force && fs::exists(fit_out)) {
        abstain::raise(abstain::ErrorCode::file_exists,
                       "'" + fit_out + "' exists; pass --force to overwrite");
      }
      abstain::save_model(model, fit_out);
      json summary{{"method", abstain::method_name(model)},
                   {"out", fit_out},
                   {"meta", meta_block("fit")}};
      std::cout << summary.dump(2) << "\n";
    } else if (score->parsed()) {
      const auto model = abstain::load_model(score_model);
      const auto ds = abstain::load_jsonl(score_data);
      const auto confidences = abstain::score_all(model, ds);
      std::string csv = "id,confidence\n";
      for (std::size_t i = 0; i < ds.size(); ++i) {
        csv += ds.instances[i].id;
        csv += ',';
        csv += format_double(confidences[i]);
        csv += '\n';
      }
      write_output(csv, score_out, score_force);
    } else if (eval_cmd->parsed()) {
      if (!eval_opts.data.empty() && !eval_cmd->count("--seed")) {
        throw UsageError{"--seed is required when splitting with --data"};
      }
      const auto kind = abstain::metric_from_string(eval_opts.metric);
      const auto data = resolve_datasets(eval_opts);
      const auto model =
          abstain::fit_model(make_spec(eval_opts), data.ref, kind);
      const auto report = abstain::evaluate(data.test, model, kind);
      json doc = report_json(report);
      doc["meta"] = data.used_split
                        ? meta_block("eval", eval_opts.seed)
                        : meta_block("eval");
      if (data.used_split) {
        doc["meta"]["split_ratio"] = eval_opts.ratio;
        doc["meta"]["n_reference"] = data.ref.size();
      }
      write_output(doc.dump(2) + "\n", eval_out, eval_force);
    } else if (curve_cmd->parsed()) {
      if (!curve_opts.data.empty() && !curve_cmd->count("--seed")) {
        throw UsageError{"--seed is required when splitting with --data"};
      }
      const auto kind = abstain::metric_from_string(curve_opts.metric);
      const auto data = resolve_datasets(curve_opts);
      const auto model =
          abstain::fit_model(make_spec(curve_opts), data.ref, kind);
      const auto method_curve = abstain::curve(data.test, model, kind);
      const auto oracle = abstain::oracle_curve(data.test, kind);
      const double random_perf = abstain::mean_metric(data.test, kind);
      write_output(curve_csv(method_curve, oracle, random_perf), curve_out,
                   curve_force);
    } else if (calibrate->parsed()) {
      const auto kind = abstain::metric_from_string(cal_opts.metric);
      const auto spec = make_spec(cal_opts);
      if (cal_mae) {
        if (cal_opts.data.empty() || !calibrate->count("--seed")) {
          throw UsageError{"--mae requires --data and --seed"};
        }
        if (cal_target_rates.empty()) {
          throw UsageError{"--mae requires --target-rate"};
        }
        const auto ds = abstain::load_jsonl(cal_opts.data);
        const auto reports =
            abstain::calibration_mae(ds, spec, kind, cal_target_rates,
                                     cal_seeds, cal_opts.seed, cal_opts.ratio);
        json rows = json::array();
        for (const auto& r : reports) {
          rows.push_back(json{{"target_rate", r.target_rate},
                              {"mae_rate", r.mae_rate},
                              {"mae_performance", r.mae_performance},
                              {"seeds", r.seeds},
                              {"seeds_with_performance",
                               r.seeds_with_performance}});
        }
        json doc{{"mae", rows},
                 {"method", spec.method},
                 {"metric", cal_opts.metric},
                 {"meta", meta_block("calibrate", cal_opts.seed)}};
        doc["meta"]["seeds"] = cal_seeds;
        doc["meta"]["split_ratio"] = cal_opts.ratio;
        write_output(doc.dump(2) + "\n", cal_out, cal_force);
      } else {
        if (cal_target_rates.empty() && cal_target_perfs.empty()) {
          throw UsageError{"no calibration targets given"};
        }
        if (!cal_opts.data.empty() && !calibrate->count("--seed")) {
          throw UsageError{"--seed is required when splitting with --data"};
        }
        const auto data = resolve_datasets(cal_opts);
        const auto model = abstain::fit_model(spec, data.ref, kind);
        json rows = json::array();
        for (double alpha : cal_target_rates) {
          const auto trial =
              abstain::calibration_trial(data.ref, data.test, model, kind,
                                         alpha);
          json row{{"target_rate", alpha},
                   {"tau", trial.tau},
                   {"expected_rate", trial.expected_rate},
                   {"achieved_rate", trial.achieved_rate}};
          row["expected_performance"] =
              trial.expected_performance ? json(*trial.expected_performance)
                                         : json(nullptr);
          row["achieved_performance"] =
              trial.achieved_performance ? json(*trial.achieved_performance)
                                         : json(nullptr);
          rows.push_back(row);
        }
        for (double target : cal_target_perfs) {
          const auto result =
              abstain::threshold_for_performance(data.ref, model, kind,
                                                 target);
          json row{{"target_performance", target},
                   {"tau", result.tau},
                   {"expected_rate", result.expected_rate}};
          row["expected_performance"] =
              result.expected_performance ? json(*result.expected_performance)
                                          : json(nullptr);
          rows.push_back(row);
        }
        json doc{{"calibration", rows},
                 {"method", spec.method},
                 {"metric", cal_opts.metric}};
        doc["meta"] = data.used_split ? meta_block("calibrate", cal_opts.seed)
                                      : meta_block("calibrate");
        write_output(doc.dump(2) + "\n", cal_out, cal_force);
      }
    } else if (transfer->parsed()) {
      const auto kind = abstain::metric_from_string(transfer_opts.metric);
      const auto ref = abstain::load_jsonl(transfer_opts.ref);
      const auto test = abstain::load_jsonl(transfer_opts.test);
      const auto report =
          abstain::domain_transfer(ref, test, make_spec(transfer_opts), kind);
      json doc = report_json(report);
      doc["meta"] = meta_block("transfer");
      write_output(doc.dump(2) + "\n", transfer_out, transfer_force);
    } else if (refsize->parsed()) {
      const auto kind = abstain::metric_from_string(refsize_opts.metric);
      const auto ds = abstain::load_jsonl(refsize_opts.data);
      abstain::ModelSpec baseline = refsize_opts.spec_hyper;
      baseline.method = refsize_baseline;
      const auto result = abstain::refsize_sweep(
          ds, make_spec(refsize_opts), baseline, kind, refsize_sizes,
          refsize_seeds, refsize_opts.seed, refsize_opts.ratio);
      json rows = json::array();
      std::string csv = "size,nauc_method,nauc_baseline\n";
      for (const auto& row : result.rows) {
        rows.push_back(json{{"size", row.size},
                            {"nauc_method", row.nauc_method},
                            {"nauc_baseline", row.nauc_baseline}});
        csv += std::to_string(row.size) + ',' +
               format_double(row.nauc_method) + ',' +
               format_double(row.nauc_baseline) + '\n';
      }
      json doc{{"rows", rows},
               {"method", refsize_opts.method},
               {"baseline", refsize_baseline},
               {"metric", refsize_opts.metric},
               {"seeds", result.seeds},
               {"meta", meta_block("refsize", refsize_opts.seed)}};
      doc["break_even"] =
          result.break_even ? json(*result.break_even) : json(nullptr);
      if (!refsize_csv.empty()) {
        if (!refsize_force && fs::exists(refsize_csv)) {
          abstain::raise(abstain::ErrorCode::file_exists,
                         "'" + refsize_csv +
                             "' exists; pass --force to overwrite");
        }
        abstain::write_text_file(refsize_csv, csv);
      }
      write_output(doc.dump(2) + "\n", refsize_out, refsize_force);
    } else if (sweepq->parsed()) {
      const auto kind = abstain::metric_from_string(sweepq_opts.metric);
      const auto ds = abstain::load_jsonl(sweepq_opts.data);
      const auto rows = abstain::qualification_sweep(
          ds, kind, sweepq_values, sweepq_seeds, sweepq_opts.seed,
          sweepq_opts.ratio, sweepq_opts.spec_hyper.l2_lambda,
          sweepq_opts.spec_hyper.cov_epsilon);
      json out_rows = json::array();
      std::string csv = "q,nauc_log,nauc_mah\n";
      for (const auto& row : rows) {
        json r{{"q", row.q},
               {"failed_log", row.failed_log},
               {"failed_mah", row.failed_mah}};
        r["nauc_log"] = row.nauc_log ? json(*row.nauc_log) : json(nullptr);
        r["nauc_mah"] = row.nauc_mah ? json(*row.nauc_mah) : json(nullptr);
        out_rows.push_back(r);
        csv += format_double(row.q) + ',' +
               (row.nauc_log ? format_double(*row.nauc_log) : "") + ',' +
               (row.nauc_mah ? format_double(*row.nauc_mah) : "") + '\n';
      }
      json doc{{"rows", out_rows},
               {"metric", sweepq_opts.metric},
               {"seeds", sweepq_seeds},
               {"meta", meta_block("sweep-q", sweepq_opts.seed)}};
      if (!sweepq_csv.empty()) {
        if (!sweepq_force && fs::exists(sweepq_csv)) {
          abstain::raise(abstain::ErrorCode::file_exists,
                         "'" + sweepq_csv +
                             "' exists; pass --force to overwrite");
        }
        abstain::write_text_file(sweepq_csv, csv);
      }
      write_output(doc.dump(2) + "\n", sweepq_out, sweepq_force);
    } else if (bench->parsed()) {
      const auto model = abstain::load_model(bench_model);
      const auto ds = abstain::load_jsonl(bench_data);
      // Warm-up pass, then per-rep wall time of scoring the whole dataset.
      (void)abstain::score_all(model, ds, abstain::parallel::Exec::serial);
      std::vector<double> per_instance_ns;
      per_instance_ns.reserve(static_cast<std::size_t>(bench_reps));
      for (long long rep = 0; rep < bench_reps; ++rep) {
        const auto start = std::chrono::steady_clock::now();
        volatile double sink = 0.0;
        const auto confs =
            abstain::score_all(model, ds, abstain::parallel::Exec::serial);
        sink = confs.back();
        (void)sink;
        const auto stop = std::chrono::steady_clock::now();
        const double ns =
            static_cast<double>(std::chrono::duration_cast<
                                    std::chrono::nanoseconds>(stop - start)
                                    .count());
        per_instance_ns.push_back(ns / static_cast<double>(ds.size()));
      }
      std::vector<double> sorted = per_instance_ns;
      std::sort(sorted.begin(), sorted.end());
      const double median =
          sorted.size() % 2 == 1
              ? sorted[sorted.size() / 2]
              : 0.5 * (sorted[sorted.size() / 2 - 1] +
                       sorted[sorted.size() / 2]);
      json doc{{"method", abstain::method_name(model)},
               {"n_instances", ds.size()},
               {"k", ds.k},
               {"reps", bench_reps},
               {"timing",
                json{{"mean_ns_per_instance", abstain::mean_of(per_instance_ns)},
                     {"median_ns_per_instance", median},
                     {"min_ns_per_instance", sorted.front()},
                     {"max_ns_per_instance", sorted.back()}}},
               {"note",
                "confidence evaluation only; relevance scoring happens "
                "upstream and is not timed"},
               {"meta", meta_block("bench")}};
      write_output(doc.dump(2) + "\n", bench_out, bench_force);
    }
  } catch (const UsageError& e) {
    std::cerr << json{{"error", "usage"}, {"message", e.message}}.dump()
              << "\n";
    return 2;
  } catch (const abstain::Error& e) {
    std::cerr << json{{"error", abstain::to_string(e.code())},
                      {"message", e.what()}}
                     .dump()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump()
              << "\n";
    return 1;
  }
  return 0;
}
