#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "amde/config.hpp"
#include "amde/encoder.hpp"
#include "amde/tensor.hpp"

namespace amde {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Serialized training state: config snapshot, named parameter tensors, RNG
// state, and bookkeeping carried into metrics rows.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  TrainConfig config;
  int epoch = 0;
  std::uint64_t rng_state = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  long clamp_events = 0;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

// Layout (little-endian): "AMDE" | u32 version | u32 json length | json
// bytes | u32 tensor count | per tensor { u16 name length, name, u8 ndim,
// u32 dims..., f64 payload... } | u32 CRC32 of all preceding bytes.
void checkpoint_save(const Checkpoint& ckpt, const std::string& path);
Checkpoint checkpoint_load(const std::string& path);

Checkpoint checkpoint_from_model(const EncoderModel& model, const TrainConfig& config);
EncoderModel model_from_checkpoint(const Checkpoint& ckpt);

std::uint32_t crc32_ieee(const unsigned char* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace amde
