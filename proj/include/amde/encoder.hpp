#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "amde/tensor.hpp"

namespace amde {

enum class LocalBranch { None, Conv, Fc, Rnn, Lstm };

const char* local_branch_name(LocalBranch b);
LocalBranch local_branch_from_name(const std::string& name);

struct EncoderConfig {
  int input_channels = 1;
  int input_height = 64;
  int input_width = 32;
  int feature_channels = 64;  // C (512 in the full-scale setting)
  int map_height = 8;         // H
  int map_width = 4;          // W
  int reduced_channels = 32;  // c (128 in the full-scale setting)
  int lstm_hidden = 0;        // e; 0 means "equal to reduced_channels"
  int embed_dim = 64;
  int num_classes = 0;        // N, required
  LocalBranch local_branch = LocalBranch::Lstm;
  bool lstm_bias = true;           // forget-gate bias starts at 1 when enabled
  bool normalize_embeddings = false;

  int hidden_units() const { return lstm_hidden > 0 ? lstm_hidden : reduced_channels; }
  int fused_dim() const;
  void validate() const;  // throws Config on inconsistency
};

bool operator==(const EncoderConfig& a, const EncoderConfig& b);

// All learnable parameters. Only the tensors used by the configured local
// branch are allocated; parameter count is a pure function of the config.
struct EncoderModel {
  EncoderConfig config;

  // Backbone: three 3x3 stride-2 conv blocks with ReLU.
  Tensor conv1_w, conv1_b;
  Tensor conv2_w, conv2_b;
  Tensor conv3_w, conv3_b;

  Tensor reduction_w;  // [c x C], linear 1x1 channel reduction

  Tensor lstm_w, lstm_b;      // [4e x (c+e)], [4e]
  Tensor rnn_w, rnn_b;        // [e x (c+e)], [e]
  Tensor conv1d_w, conv1d_b;  // [e x c x 3], [e]
  Tensor fc_w, fc_b;          // [e x H*c], [e]

  Tensor fusion_w, fusion_b;          // [embed x fused], [embed]
  Tensor classifier_w, classifier_b;  // [N x embed], [N]

  static EncoderModel init(const EncoderConfig& config, std::uint64_t seed);

  std::vector<std::pair<std::string, Tensor>> parameters() const;
  std::size_t parameter_count() const;
  void set_requires_grad(bool v);
  void zero_grad();
};

struct EncoderOutput {
  Tensor embedding;       // [embed_dim]
  Tensor logits;          // [num_classes]
  Tensor self_feature;    // [e]; undefined when local_branch == None
  Tensor global_feature;  // [C]
};

// Mid-level feature map [C x H x W] from one image [ch x h x w].
Tensor backbone_forward(const EncoderModel& model, const Tensor& image);

// Per-channel spatial mean: [C x H x W] -> [C].
Tensor global_pool(const Tensor& fmap);

// Head-to-foot sequence S_t, t = 1..H: width-wise mean of row t followed by
// the linear channel reduction C -> c.
std::vector<Tensor> row_pool_reduce(const EncoderModel& model, const Tensor& fmap);

// One recurrence step: gate preactivations W_L [s_t; h_prev] + bias split as
// (i, f, o, g) blocks of e, then d_t = f.d_prev + i.g and h_t = o.tanh(d_t).
std::pair<Tensor, Tensor> lstm_step(const Tensor& s_t, const Tensor& h_prev, const Tensor& d_prev,
                                    const Tensor& w, const Tensor& bias);

// Runs lstm_step over the sequence from zero state and returns the final
// hidden state.
Tensor lstm_encode(const EncoderModel& model, const std::vector<Tensor>& sequence);

EncoderOutput forward(const EncoderModel& model, const Tensor& image);

}  // namespace amde
