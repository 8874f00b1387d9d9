#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amde/data.hpp"
#include "amde/encoder.hpp"
#include "amde/losses.hpp"

namespace amde {

enum class OptimizerKind { Adam, SgdMomentum };

const char* optimizer_name(OptimizerKind k);
OptimizerKind optimizer_from_name(const std::string& name);

struct DataConfig {
  int num_ids = 32;
  int imgs_per_id = 20;
  double noise_sigma = 0.1;
};

struct TrainConfig {
  EncoderConfig encoder;
  AnnConfig ann;
  LossVariant variant = LossVariant::SoftmaxAnn;
  PKSpec pk;
  DataConfig data;
  int steps_per_epoch = 50;
  int epochs = 30;
  double learning_rate = 3e-4;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::uint64_t seed = 1;
  // Random-erase augmentation is on by default; set the key to null in the
  // config file to train on clean images only.
  std::optional<OcclusionSpec> occlusion_train = OcclusionSpec{0.3, FillMode::UniformRandom, 1.0, 0};
  std::vector<double> occlusion_eval_s = {0.0, 0.3, 0.6};

  // Fills derived fields (num_classes from the dataset) and checks
  // consistency; throws Config errors.
  void finalize();
  void validate() const;

  // Ablation-grid row name (RN_S, RNLSTM_A, ...) or "<branch>+<loss>" for
  // combinations outside the grid.
  std::string variant_row_name() const;
};

// The nine ablation rows in grid order.
std::vector<std::string> ablation_variant_names();

// Applies a row name to a base config (local branch + loss variant).
TrainConfig apply_variant(const TrainConfig& base, const std::string& row_name);

// Strict JSON codec: unknown keys are rejected at every level, values survive
// a round trip losslessly. Missing keys keep their defaults.
std::string config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const std::string& text);
TrainConfig load_config(const std::string& path);
void save_config(const TrainConfig& config, const std::string& path);

}  // namespace amde
