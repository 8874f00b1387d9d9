#pragma once

#include <string>
#include <vector>

#include "amde/checkpoint.hpp"
#include "amde/config.hpp"
#include "amde/data.hpp"
#include "amde/eval.hpp"

namespace amde {

// Adam (0.9 / 0.999, eps 1e-8) or SGD with momentum 0.9 over the model's
// parameter list; state is per-parameter and in parameter order.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, std::vector<Tensor> params);
  void step();
  void zero_grad();

 private:
  OptimizerKind kind_;
  double lr_;
  int t_ = 0;
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::string log;                  // stable text, one line per epoch
  std::vector<double> epoch_losses;  // mean joint loss per epoch
};

// Runs the configured regimen on a dataset generated in-run from the config
// seed. Deterministic: identical config yields identical checkpoint and log.
TrainResult train(const TrainConfig& config);
TrainResult train(const TrainConfig& config, const IdentityDataset& dataset);

// Frozen-model retrieval evaluation. For each occlusion level the query set
// is occluded with a stream derived from (config seed, level index, query
// index), embedded along with the clean gallery, and scored. Honors
// AMDE_THREADS for parallel embedding.
std::vector<MetricsRow> evaluate(const EncoderModel& model, const TrainConfig& config,
                                 const IdentityDataset& dataset, std::span<const double> occlusion_levels,
                                 double loss_final, long clamp_events);
std::vector<MetricsRow> evaluate_checkpoint(const Checkpoint& ckpt, const IdentityDataset& dataset,
                                            std::span<const double> occlusion_levels);

struct AblateOptions {
  int seeds = 3;
  std::vector<double> occlusion_levels = {0.0, 0.3, 0.6};
};

// Trains the nine-variant grid over the requested seeds, evaluates each cell
// at every occlusion level, and appends mean/stddev aggregate rows per
// (variant, level). Failed cells become rows with nan metrics.
std::vector<MetricsRow> ablate(const TrainConfig& base, const AblateOptions& options);

}  // namespace amde
