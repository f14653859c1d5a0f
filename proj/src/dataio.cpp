#include "abstain/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "abstain/rng.hpp"

namespace abstain {

using nlohmann::json;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    raise(ErrorCode::io_error, "cannot open '" + path + "' for reading");
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

struct LineError {
  ErrorCode code;
  std::string message;
};

// Parses one dataset line; returns an error instead of throwing so parsing
// can run in parallel with deterministic first-error reporting.
std::optional<LineError> parse_instance_line(const std::string& line,
                                             bool lenient,
                                             RawInstance& out) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::exception& e) {
    return LineError{ErrorCode::parse_error, e.what()};
  }
  if (!obj.is_object() || !obj.contains("id") || !obj.contains("scores") ||
      !obj.contains("labels")) {
    return LineError{ErrorCode::parse_error,
                     "expected object with id, scores, labels"};
  }
  if (!obj["id"].is_string() || !obj["scores"].is_array() ||
      !obj["labels"].is_array()) {
    return LineError{ErrorCode::parse_error,
                     "id must be a string, scores and labels arrays"};
  }
  out.id = obj["id"].get<std::string>();
  out.scores.clear();
  out.labels.clear();
  for (const auto& v : obj["scores"]) {
    if (!v.is_number()) {
      return LineError{ErrorCode::parse_error, "non-numeric score"};
    }
    const double s = v.get<double>();
    if (!std::isfinite(s)) {
      return LineError{ErrorCode::parse_error, "non-finite score"};
    }
    out.scores.push_back(s);
  }
  for (const auto& v : obj["labels"]) {
    if (!v.is_number_integer()) {
      return LineError{ErrorCode::parse_error, "labels must be 0/1 integers"};
    }
    const auto y = v.get<long long>();
    if (y != 0 && y != 1) {
      return LineError{ErrorCode::parse_error, "labels must be 0 or 1"};
    }
    out.labels.push_back(static_cast<int>(y));
  }
  if (out.scores.size() != out.labels.size()) {
    return LineError{ErrorCode::parse_error,
                     "scores and labels differ in length"};
  }
  if (out.scores.empty()) {
    return LineError{ErrorCode::parse_error, "empty instance"};
  }
  if (!lenient) {
    if (out.scores.size() < 2) {
      return LineError{ErrorCode::parse_error, "needs at least 2 documents"};
    }
    if (std::find(out.labels.begin(), out.labels.end(), 1) ==
        out.labels.end()) {
      return LineError{ErrorCode::no_positive,
                       "instance '" + out.id + "' has no positive document"};
    }
  }
  return std::nullopt;
}

std::vector<RawInstance> load_lines(const std::string& path, bool lenient) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) {
    raise(ErrorCode::empty_file, "'" + path + "' is empty");
  }
  std::vector<RawInstance> raws(lines.size());
  std::vector<std::optional<LineError>> errors(lines.size());
  parallel::par_for(lines.size(), [&](std::size_t i) {
    errors[i] = parse_instance_line(lines[i], lenient, raws[i]);
  });
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (errors[i]) {
      raise(errors[i]->code, path + ":" + std::to_string(i + 1) + ": " +
                                 errors[i]->message);
    }
  }
  return raws;
}

json instance_to_json(const RerankInstance& inst) {
  return json{{"id", inst.id}, {"scores", inst.scores}, {"labels", inst.labels}};
}

}  // namespace

RerankDataset load_jsonl(const std::string& path) {
  std::vector<RawInstance> raws = load_lines(path, /*lenient=*/false);
  std::vector<RerankInstance> instances;
  instances.reserve(raws.size());
  const std::size_t k = raws.front().scores.size();
  for (std::size_t i = 0; i < raws.size(); ++i) {
    if (raws[i].scores.size() != k) {
      raise(ErrorCode::ragged_k,
            path + ":" + std::to_string(i + 1) + ": instance '" + raws[i].id +
                "' has k=" + std::to_string(raws[i].scores.size()) +
                ", expected " + std::to_string(k));
    }
    instances.push_back(RerankInstance{std::move(raws[i].id),
                                       std::move(raws[i].scores),
                                       std::move(raws[i].labels)});
  }
  return make_dataset(std::move(instances));
}

void write_jsonl(const RerankDataset& ds, const std::string& path) {
  std::string out;
  for (const auto& inst : ds.instances) {
    out += instance_to_json(inst).dump();
    out += '\n';
  }
  write_text_file(path, out);
}

std::vector<RawInstance> load_raw_jsonl(const std::string& path) {
  return load_lines(path, /*lenient=*/true);
}

PreprocessResult preprocess_raw(const std::vector<RawInstance>& raws,
                                const PreprocessConfig& cfg) {
  if (cfg.max_positives < 1 || cfg.max_positives > cfg.target_k) {
    raise(ErrorCode::invalid_config,
          "preprocess: need 1 <= max_positives <= target_k");
  }
  struct Slot {
    std::optional<RerankInstance> kept;
    std::optional<DiscardRecord> discarded;
  };
  std::vector<Slot> slots(raws.size());
  parallel::par_for(raws.size(), [&](std::size_t i) {
    const RawInstance& raw = raws[i];
    auto discard = [&](const std::string& reason) {
      slots[i].discarded = DiscardRecord{raw.id, reason};
    };
    if (raw.scores.size() < cfg.target_k) {
      discard("fewer than " + std::to_string(cfg.target_k) + " documents");
      return;
    }
    std::vector<std::size_t> pos_idx;
    std::vector<std::size_t> neg_idx;
    for (std::size_t j = 0; j < raw.labels.size(); ++j) {
      (raw.labels[j] == 1 ? pos_idx : neg_idx).push_back(j);
    }
    if (pos_idx.empty()) {
      discard("no positive documents");
      return;
    }
    const std::size_t n_pos = std::min(pos_idx.size(), cfg.max_positives);
    const std::size_t n_neg = cfg.target_k - n_pos;
    if (neg_idx.size() < n_neg) {
      discard("insufficient negative documents");
      return;
    }
    auto gen = rng::stream(cfg.rng_seed, i);
    const auto pos_perm = rng::shuffled_indices(pos_idx.size(), gen);
    const auto neg_perm = rng::shuffled_indices(neg_idx.size(), gen);
    std::vector<std::size_t> selected;
    selected.reserve(cfg.target_k);
    for (std::size_t j = 0; j < n_pos; ++j) selected.push_back(pos_idx[pos_perm[j]]);
    for (std::size_t j = 0; j < n_neg; ++j) selected.push_back(neg_idx[neg_perm[j]]);
    std::sort(selected.begin(), selected.end());  // keep original doc order

    RerankInstance inst;
    inst.id = raw.id;
    for (std::size_t j : selected) {
      inst.scores.push_back(raw.scores[j]);
      inst.labels.push_back(raw.labels[j]);
    }
    slots[i].kept = std::move(inst);
  });

  PreprocessResult result;
  for (auto& slot : slots) {
    if (slot.kept) result.kept.push_back(std::move(*slot.kept));
    if (slot.discarded) result.discarded.push_back(std::move(*slot.discarded));
  }
  return result;
}

std::pair<RerankDataset, RerankDataset> split_reference_test(
    const RerankDataset& ds, double ratio, std::uint64_t rng_seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    raise(ErrorCode::invalid_config, "split: ratio must lie in (0, 1)");
  }
  const std::size_t n = ds.size();
  const auto n_ref = static_cast<std::size_t>(
      std::llround(ratio * static_cast<double>(n)));
  if (n < 2 || n_ref == 0 || n_ref == n) {
    raise(ErrorCode::too_small_to_split,
          "split: dataset of size " + std::to_string(n) +
              " cannot be split at ratio " + std::to_string(ratio));
  }
  rng::SplitMix64 gen(rng_seed);
  const auto perm = rng::shuffled_indices(n, gen);
  std::vector<std::size_t> ref_idx(perm.begin(), perm.begin() + n_ref);
  std::vector<std::size_t> test_idx(perm.begin() + n_ref, perm.end());
  std::sort(ref_idx.begin(), ref_idx.end());
  std::sort(test_idx.begin(), test_idx.end());

  auto take = [&](const std::vector<std::size_t>& idx) {
    std::vector<RerankInstance> subset;
    subset.reserve(idx.size());
    for (std::size_t i : idx) subset.push_back(ds.instances[i]);
    return RerankDataset{std::move(subset), ds.k};
  };
  return {take(ref_idx), take(test_idx)};
}

RerankDataset synth_generate(const SynthConfig& cfg, parallel::Exec exec) {
  if (cfg.n_instances == 0 || cfg.k < 2 || cfg.separability < 0.0 ||
      !(cfg.noise_sigma > 0.0) || cfg.positives_min < 1 ||
      cfg.positives_min > cfg.positives_max || cfg.positives_max > cfg.k - 1) {
    raise(ErrorCode::invalid_config, "synth_generate: invalid configuration");
  }
  std::vector<RerankInstance> instances(cfg.n_instances);
  parallel::par_for(
      cfg.n_instances,
      [&](std::size_t i) {
        auto gen = rng::stream(cfg.rng_seed, i);
        const auto p = static_cast<std::size_t>(
            gen.next_int(static_cast<std::int64_t>(cfg.positives_min),
                         static_cast<std::int64_t>(cfg.positives_max)));
        const double difficulty = gen.next_double();
        const auto perm = rng::shuffled_indices(cfg.k, gen);
        RerankInstance inst;
        inst.id = "synth-" + std::to_string(i);
        inst.labels.assign(cfg.k, 0);
        for (std::size_t j = 0; j < p; ++j) inst.labels[perm[j]] = 1;
        inst.scores.resize(cfg.k);
        for (std::size_t j = 0; j < cfg.k; ++j) {
          const double mean =
              inst.labels[j] == 1 ? difficulty * cfg.separability : 0.0;
          inst.scores[j] = gen.next_normal(mean, cfg.noise_sigma);
        }
        instances[i] = std::move(inst);
      },
      exec);
  return make_dataset(std::move(instances));
}

namespace {

json require_field(const json& obj, const char* key) {
  if (!obj.contains(key)) {
    raise(ErrorCode::schema_error,
          std::string("model JSON: missing field '") + key + "'");
  }
  return obj.at(key);
}

std::vector<double> as_vector(const json& arr, const char* key) {
  if (!arr.is_array()) {
    raise(ErrorCode::schema_error,
          std::string("model JSON: '") + key + "' must be an array");
  }
  std::vector<double> out;
  for (const auto& v : arr) {
    if (!v.is_number()) {
      raise(ErrorCode::schema_error,
            std::string("model JSON: '") + key + "' must hold numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::string model_to_json(const ConfidenceModel& model) {
  json doc;
  doc["format_version"] = 1;
  doc["variant"] = method_name(model);
  const auto k = model_k(model);
  doc["k"] = k ? *k : 0;  // 0: reference-free, accepts any k
  json params = json::object();
  json hyper = json::object();

  if (const auto* lin = std::get_if<LinearRidgeModel>(&model)) {
    params["intercept"] = lin->intercept;
    params["coefficients"] = lin->coefficients;
    hyper["ridge_lambda"] = lin->ridge_lambda;
  } else if (const auto* log3 = std::get_if<Logistic3Model>(&model)) {
    json rows = json::array();
    for (int c = 0; c < 3; ++c) {
      std::vector<double> row;
      row.push_back(log3->biases[c]);
      row.insert(row.end(), log3->weights[c].begin(), log3->weights[c].end());
      rows.push_back(row);
    }
    params["weights"] = rows;  // per class (-1, 0, +1): [bias, w_1..w_k]
    hyper["qualification_q"] = log3->qualification_q;
    hyper["l2_lambda"] = log3->l2_lambda;
    hyper["converged"] = log3->converged;
    hyper["iterations"] = log3->iterations;
  } else if (const auto* mah = std::get_if<MahalanobisModel>(&model)) {
    const std::size_t dim = mah->k();
    auto matrix_rows = [dim](const std::vector<double>& flat) {
      json rows = json::array();
      for (std::size_t r = 0; r < dim; ++r) {
        rows.push_back(std::vector<double>(flat.begin() + r * dim,
                                           flat.begin() + (r + 1) * dim));
      }
      return rows;
    };
    params["mean_good"] = mah->mean_good;
    params["mean_bad"] = mah->mean_bad;
    params["invcov_good"] = matrix_rows(mah->invcov_good);
    params["invcov_bad"] = matrix_rows(mah->invcov_bad);
    hyper["qualification_q"] = mah->qualification_q;
    hyper["cov_epsilon"] = mah->cov_epsilon;
  }
  doc["params"] = params;
  doc["hyper"] = hyper;
  return doc.dump(2) + "\n";
}

ConfidenceModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorCode::parse_error, std::string("model JSON: ") + e.what());
  }
  const auto variant = require_field(doc, "variant");
  if (!variant.is_string()) {
    raise(ErrorCode::schema_error, "model JSON: 'variant' must be a string");
  }
  const auto version = require_field(doc, "format_version");
  if (!version.is_number_integer() || version.get<int>() != 1) {
    raise(ErrorCode::schema_error, "model JSON: unsupported format_version");
  }
  const auto k_field = require_field(doc, "k");
  if (!k_field.is_number_integer() || k_field.get<long long>() < 0) {
    raise(ErrorCode::schema_error, "model JSON: 'k' must be a non-negative "
                                   "integer");
  }
  const auto k = static_cast<std::size_t>(k_field.get<long long>());
  const json params = require_field(doc, "params");
  const json hyper = require_field(doc, "hyper");
  const std::string name = variant.get<std::string>();

  if (name == "max") return MaxScoreModel{};
  if (name == "std") return StdDevModel{};
  if (name == "gap12") return Gap12Model{};

  if (name == "lin") {
    LinearRidgeModel m;
    const auto intercept = require_field(params, "intercept");
    if (!intercept.is_number()) {
      raise(ErrorCode::schema_error, "model JSON: 'intercept' must be a "
                                     "number");
    }
    m.intercept = intercept.get<double>();
    m.coefficients =
        as_vector(require_field(params, "coefficients"), "coefficients");
    const auto lambda = require_field(hyper, "ridge_lambda");
    if (!lambda.is_number()) {
      raise(ErrorCode::schema_error, "model JSON: 'ridge_lambda' must be a "
                                     "number");
    }
    m.ridge_lambda = lambda.get<double>();
    if (m.coefficients.size() != k) {
      raise(ErrorCode::schema_error,
            "model JSON: coefficient count does not match k");
    }
    return m;
  }
  if (name == "log") {
    Logistic3Model m;
    const json rows = require_field(params, "weights");
    if (!rows.is_array() || rows.size() != 3) {
      raise(ErrorCode::schema_error,
            "model JSON: 'weights' must hold 3 class rows");
    }
    for (int c = 0; c < 3; ++c) {
      const auto row = as_vector(rows[c], "weights");
      if (row.size() != k + 1) {
        raise(ErrorCode::schema_error,
            "model JSON: each weight row must hold k+1 values");
      }
      m.biases[c] = row[0];
      m.weights[c].assign(row.begin() + 1, row.end());
    }
    m.qualification_q = require_field(hyper, "qualification_q").get<double>();
    m.l2_lambda = require_field(hyper, "l2_lambda").get<double>();
    m.converged = require_field(hyper, "converged").get<bool>();
    m.iterations = require_field(hyper, "iterations").get<int>();
    return m;
  }
  if (name == "mah") {
    MahalanobisModel m;
    m.mean_good = as_vector(require_field(params, "mean_good"), "mean_good");
    m.mean_bad = as_vector(require_field(params, "mean_bad"), "mean_bad");
    if (m.mean_good.size() != k || m.mean_bad.size() != k) {
      raise(ErrorCode::schema_error,
            "model JSON: class mean length does not match k");
    }
    auto read_matrix = [&](const char* key) {
      const json rows = require_field(params, key);
      if (!rows.is_array() || rows.size() != k) {
        raise(ErrorCode::schema_error,
              std::string("model JSON: '") + key + "' must hold k rows");
      }
      std::vector<double> flat;
      flat.reserve(k * k);
      for (const auto& row : rows) {
        const auto values = as_vector(row, key);
        if (values.size() != k) {
          raise(ErrorCode::schema_error,
                std::string("model JSON: '") + key + "' rows must hold k "
                                                     "values");
        }
        flat.insert(flat.end(), values.begin(), values.end());
      }
      return flat;
    };
    m.invcov_good = read_matrix("invcov_good");
    m.invcov_bad = read_matrix("invcov_bad");
    m.qualification_q = require_field(hyper, "qualification_q").get<double>();
    m.cov_epsilon = require_field(hyper, "cov_epsilon").get<double>();
    return m;
  }
  raise(ErrorCode::schema_error, "model JSON: unknown variant '" + name + "'");
}

void save_model(const ConfidenceModel& model, const std::string& path) {
  write_text_file(path, model_to_json(model));
}

ConfidenceModel load_model(const std::string& path) {
  return model_from_json(read_text_file(path));
}

std::string discard_report_json(const std::vector<DiscardRecord>& report) {
  json arr = json::array();
  for (const auto& record : report) {
    arr.push_back(json{{"id", record.id}, {"reason", record.reason}});
  }
  return arr.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      raise(ErrorCode::io_error, "cannot open '" + tmp.string() + "' for "
                                                                  "writing");
    }
    out << content;
    if (!out) {
      raise(ErrorCode::io_error, "short write to '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    raise(ErrorCode::io_error,
          "cannot rename '" + tmp.string() + "' to '" + path + "'");
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(ErrorCode::io_error, "cannot open '" + path + "' for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace abstain
