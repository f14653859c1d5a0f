#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "abstain/confidence.hpp"
#include "abstain/core.hpp"
#include "abstain/parallel.hpp"

namespace abstain {

// Pre-preprocessing instance: arbitrary document count, any label pattern.
struct RawInstance {
  std::string id;
  std::vector<double> scores;
  std::vector<int> labels;
};

struct PreprocessConfig {
  std::size_t target_k = 10;
  std::size_t max_positives = 5;
  std::uint64_t rng_seed = 0;
};

struct DiscardRecord {
  std::string id;
  std::string reason;
};

struct PreprocessResult {
  std::vector<RerankInstance> kept;
  std::vector<DiscardRecord> discarded;
};

struct SynthConfig {
  std::size_t n_instances = 0;
  std::size_t k = 10;
  double separability = 1.0;
  double noise_sigma = 1.0;
  std::size_t positives_min = 1;
  std::size_t positives_max = 5;
  std::uint64_t rng_seed = 0;
};

// One JSON object per line: {"id": str, "scores": [...], "labels": [0/1...]}.
// Parse and validation errors carry the 1-based line number.
RerankDataset load_jsonl(const std::string& path);
void write_jsonl(const RerankDataset& ds, const std::string& path);

// Lenient loader for raw (pre-preprocessing) data: no uniform-k or positive
// requirement, lengths and value domains still checked.
std::vector<RawInstance> load_raw_jsonl(const std::string& path);

// Keeps at most max_positives positives, fills to target_k with sampled
// negatives; discards instances that cannot satisfy the shape. Deterministic
// per (seed, instance index).
PreprocessResult preprocess_raw(const std::vector<RawInstance>& raws,
                                const PreprocessConfig& cfg);

// Uniform random partition; reference receives round(ratio*N) instances.
// Both splits keep original dataset order.
std::pair<RerankDataset, RerankDataset> split_reference_test(
    const RerankDataset& ds, double ratio, std::uint64_t rng_seed);

// Synthetic generator: per instance, positive count ~ U[min,max], difficulty
// d ~ U(0,1); positive scores ~ N(d*separability, sigma), negative scores
// ~ N(0, sigma). Difficulty links the score distribution to the achievable
// metric so data-driven confidence has signal to learn.
RerankDataset synth_generate(const SynthConfig& cfg,
                             parallel::Exec exec = parallel::Exec::parallel);

// Model JSON: {"variant", "k", "params", "hyper", "format_version": 1}.
// Round-trips preserve every confidence output exactly.
std::string model_to_json(const ConfidenceModel& model);
ConfidenceModel model_from_json(const std::string& text);
void save_model(const ConfidenceModel& model, const std::string& path);
ConfidenceModel load_model(const std::string& path);

std::string discard_report_json(const std::vector<DiscardRecord>& report);

// Atomic text write: temp file in the target directory, then rename.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace abstain
