#pragma once

#include <span>
#include <string>
#include <vector>

#include "amde/tensor.hpp"

namespace amde {

enum class Rounding { Ceil, Floor };

// Neighborhood-loss knobs. The margin and batch construction are not fixed by
// the reference formulation, so they are configuration with reported values.
struct AnnConfig {
  double margin = 0.3;
  int k0 = 1;                        // minimum neighborhood size
  Rounding rounding = Rounding::Ceil;
  double lambda = 1.0;               // joint-loss tradeoff
  int fixed_k = 0;                   // > 0 pins K_a instead of entropy-driven adaptation

  void validate() const;
};

enum class LossVariant { Softmax, SoftmaxAnn, SoftmaxTriplet, SoftmaxContrastive };

const char* loss_variant_name(LossVariant v);
LossVariant loss_variant_from_name(const std::string& name);

struct BatchEmbeddings {
  Tensor embeddings;        // [B x embed_dim]
  Tensor logits;            // [B x N]
  std::vector<int> labels;  // B entries in [0, N)
};

// Diagnostics from one ANN evaluation.
struct AnnStats {
  int clamp_events = 0;               // anchors whose K_a exceeded availability
  std::vector<double> entropies;      // H_a per anchor
  std::vector<int> ks;                // K_a actually used per anchor
  std::vector<std::vector<int>> selected_pos;  // per anchor, chosen positive indices
  std::vector<std::vector<int>> selected_neg;  // per anchor, chosen negative indices
};

std::vector<double> softmax(std::span<const double> logits);

// Natural-log entropy with 0 log 0 = 0. p must be nonnegative and sum to one
// within 1e-6.
double class_entropy(std::span<const double> p);

// K_a = max(round(H_a), K0) with round per cfg.rounding; availability
// clamping happens later, inside the loss.
int adaptive_k(double entropy, const AnnConfig& cfg);

// Sum over anchors of [margin + D_ap - D_an]_+ where D_ap / D_an average the
// K_a farthest positive / nearest negative squared distances. K_a comes from
// the anchor's classification entropy (or cfg.fixed_k) and is clamped to the
// available positives and negatives. Gradients flow through the selected
// distances only, never through the integer selection.
Tensor ann_loss(const BatchEmbeddings& batch, const AnnConfig& cfg, AnnStats* stats = nullptr);

// Farthest-positive / nearest-negative hinge per anchor, summed.
Tensor batch_hard_triplet(const BatchEmbeddings& batch, double margin);

// Sum over unordered pairs: squared distance for same-label pairs,
// [margin - euclidean distance]_+^2 otherwise.
Tensor contrastive_loss(const BatchEmbeddings& batch, double margin);

struct JointBreakdown {
  Tensor total;
  double xent_value = 0.0;
  double metric_value = 0.0;
  AnnStats ann;  // populated for the ANN variant
};

// L = L_softmax + lambda * L_metric with the metric term picked by variant;
// lambda = 0 (or the softmax variant) evaluates the classifier loss alone.
JointBreakdown joint_loss(const BatchEmbeddings& batch, const AnnConfig& cfg, LossVariant variant);

}  // namespace amde
