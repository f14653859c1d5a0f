// Compares the serial reference kernels against their OpenMP counterparts:
// per-instance metric evaluation, confidence scoring, and the multi-seed
// calibration study. Usage: abstain_bench [n_instances].
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "abstain/calibration.hpp"
#include "abstain/confidence.hpp"
#include "abstain/core.hpp"
#include "abstain/dataio.hpp"
#include "abstain/parallel.hpp"

using namespace abstain;
using parallel::Exec;
using Clock = std::chrono::steady_clock;

namespace {

template <typename Fn>
double time_seconds(Fn&& fn) {
  const auto start = Clock::now();
  fn();
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(const char* name, double serial, double par) {
  std::printf("%-28s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx\n",
              name, serial * 1e3, par * 1e3, serial / par);
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t n = 200000;
  if (argc > 1) n = static_cast<std::size_t>(std::strtoull(argv[1], nullptr, 10));

  SynthConfig cfg;
  cfg.n_instances = n;
  cfg.k = 10;
  cfg.separability = 1.75;
  cfg.noise_sigma = 1.0;
  cfg.positives_min = 1;
  cfg.positives_max = 5;
  cfg.rng_seed = 7;

  std::printf("dataset: n=%zu k=%zu\n", n, cfg.k);

  RerankDataset ds;
  const double gen_serial = time_seconds([&] {
    ds = synth_generate(cfg, Exec::serial);
  });
  RerankDataset ds_par;
  const double gen_par = time_seconds([&] {
    ds_par = synth_generate(cfg, Exec::parallel);
  });
  report("synth_generate", gen_serial, gen_par);

  std::vector<double> metrics_serial, metrics_par;
  const double m_serial = time_seconds([&] {
    metrics_serial = instance_metrics(ds, MetricKind::AP, Exec::serial);
  });
  const double m_par = time_seconds([&] {
    metrics_par = instance_metrics(ds, MetricKind::AP, Exec::parallel);
  });
  report("instance_metrics(AP)", m_serial, m_par);

  const auto pairs = derive_reference(ds, MetricKind::AP);
  const ConfidenceModel lin = fit_linear(pairs, 0.1);
  std::vector<double> conf_serial, conf_par;
  const double s_serial = time_seconds([&] {
    conf_serial = score_all(lin, ds, Exec::serial);
  });
  const double s_par = time_seconds([&] {
    conf_par = score_all(lin, ds, Exec::parallel);
  });
  report("score_all(lin)", s_serial, s_par);

  const bool identical = metrics_serial == metrics_par &&
                         conf_serial == conf_par &&
                         ds.instances.size() == ds_par.instances.size();
  std::printf("serial/parallel outputs identical: %s\n",
              identical ? "yes" : "NO");

  // Multi-seed study: parallelism comes from the per-seed loop inside.
  SynthConfig small = cfg;
  small.n_instances = std::min<std::size_t>(n, 2000);
  const auto study_ds = synth_generate(small);
  parallel::set_max_threads(1);
  const double mae_serial = time_seconds([&] {
    calibration_mae(study_ds, {.method = "lin"}, MetricKind::AP, {0.1, 0.5, 0.9},
                    64, 0);
  });
  parallel::set_max_threads(0);
  const double mae_par = time_seconds([&] {
    calibration_mae(study_ds, {.method = "lin"}, MetricKind::AP, {0.1, 0.5, 0.9},
                    64, 0);
  });
  report("calibration_mae(64 seeds)", mae_serial, mae_par);

  return identical ? 0 : 1;
}
