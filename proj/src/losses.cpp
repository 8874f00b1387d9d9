#include "amde/losses.hpp"

#include <algorithm>
#include <cmath>

#include "amde/error.hpp"
#include "amde/ops.hpp"

namespace amde {

void AnnConfig::validate() const {
  if (!(margin > 0.0)) throw Error(ErrorKind::Config, "ann: margin must be positive");
  if (k0 < 1) throw Error(ErrorKind::Config, "ann: k0 must be at least 1");
  if (lambda < 0.0) throw Error(ErrorKind::Config, "ann: lambda must be nonnegative");
  if (fixed_k < 0) throw Error(ErrorKind::Config, "ann: fixed_k must be nonnegative");
}

const char* loss_variant_name(LossVariant v) {
  switch (v) {
    case LossVariant::Softmax: return "softmax";
    case LossVariant::SoftmaxAnn: return "softmax+ann";
    case LossVariant::SoftmaxTriplet: return "softmax+triplet";
    case LossVariant::SoftmaxContrastive: return "softmax+contrastive";
  }
  return "softmax";
}

LossVariant loss_variant_from_name(const std::string& name) {
  if (name == "softmax") return LossVariant::Softmax;
  if (name == "softmax+ann") return LossVariant::SoftmaxAnn;
  if (name == "softmax+triplet") return LossVariant::SoftmaxTriplet;
  if (name == "softmax+contrastive") return LossVariant::SoftmaxContrastive;
  throw Error(ErrorKind::Config, "unknown loss variant '" + name + "'");
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

double class_entropy(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (v < 0.0) throw Error(ErrorKind::Contract, "class_entropy: negative probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw Error(ErrorKind::Contract,
                "class_entropy: probabilities sum to " + std::to_string(sum) + ", expected 1");
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

int adaptive_k(double entropy, const AnnConfig& cfg) {
  if (entropy < 0.0) throw Error(ErrorKind::Contract, "adaptive_k: entropy must be nonnegative");
  const double rounded = cfg.rounding == Rounding::Ceil ? std::ceil(entropy) : std::floor(entropy);
  return std::max(static_cast<int>(rounded), cfg.k0);
}

namespace {

void validate_batch(const BatchEmbeddings& batch, bool need_logits) {
  if (!batch.embeddings.defined() || batch.embeddings.rank() != 2)
    throw Error(ErrorKind::Dimension, "metric loss: embeddings must be [B x d]");
  const int b = batch.embeddings.dim(0);
  if (b < 2) throw Error(ErrorKind::Contract, "metric loss: batch must hold at least 2 samples");
  if (static_cast<int>(batch.labels.size()) != b)
    throw Error(ErrorKind::Contract, "metric loss: label count does not match batch size");
  if (need_logits) {
    if (!batch.logits.defined() || batch.logits.rank() != 2 || batch.logits.dim(0) != b)
      throw Error(ErrorKind::Dimension, "metric loss: logits must be [B x N]");
  }
}

struct AnchorSelection {
  std::vector<int> pos;
  std::vector<int> neg;
  bool active = false;  // hinge engaged
  int k = 0;
};

// Shared mining core for the neighborhood and triplet losses. ks holds the
// requested per-anchor neighborhood before availability clamping.
Tensor hinge_mined_loss(const Tensor& dist, std::span<const int> labels, std::span<const int> ks,
                        double margin, AnnStats* stats) {
  const int b = dist.dim(0);
  std::vector<AnchorSelection> selections(static_cast<std::size_t>(b));
  double total = 0.0;

  for (int a = 0; a < b; ++a) {
    std::vector<std::pair<double, int>> pos, neg;
    for (int j = 0; j < b; ++j) {
      if (j == a) continue;
      const double d = dist.at(static_cast<std::size_t>(a) * b + j);
      if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(a)])
        pos.emplace_back(d, j);
      else
        neg.emplace_back(d, j);
    }
    if (pos.empty())
      throw Error(ErrorKind::Sampling, "anchor " + std::to_string(a) + " has no positive sample in batch");
    if (neg.empty())
      throw Error(ErrorKind::Sampling, "anchor " + std::to_string(a) + " has no negative sample in batch");

    // Farthest positives first, ties by lower batch index.
    std::sort(pos.begin(), pos.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second < y.second;
    });
    // Nearest negatives first, ties by lower batch index.
    std::sort(neg.begin(), neg.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first < y.first;
      return x.second < y.second;
    });

    const int requested = ks[static_cast<std::size_t>(a)];
    const int k = std::min({requested, static_cast<int>(pos.size()), static_cast<int>(neg.size())});
    if (stats && k < requested) ++stats->clamp_events;

    auto& sel = selections[static_cast<std::size_t>(a)];
    sel.k = k;
    double dap = 0.0, dan = 0.0;
    for (int i = 0; i < k; ++i) {
      dap += pos[static_cast<std::size_t>(i)].first;
      dan += neg[static_cast<std::size_t>(i)].first;
      sel.pos.push_back(pos[static_cast<std::size_t>(i)].second);
      sel.neg.push_back(neg[static_cast<std::size_t>(i)].second);
    }
    dap /= k;
    dan /= k;

    const double hinge = margin + dap - dan;
    if (hinge > 0.0) {
      sel.active = true;
      total += hinge;
    }
    if (stats) {
      stats->ks.push_back(k);
      stats->selected_pos.push_back(sel.pos);
      stats->selected_neg.push_back(sel.neg);
    }
  }

  Tensor loss = Tensor::from_data({}, {total}, dist.requires_grad());
  auto di = dist.share(), li = loss.share();
  if (Tape* tape = active_tape(); tape && loss.requires_grad()) {
    tape->record({di}, li, [di, li, selections = std::move(selections), b]() {
      const double g = li->grad[0];
      std::vector<double> gd(di->value.size(), 0.0);
      for (int a = 0; a < b; ++a) {
        const auto& sel = selections[static_cast<std::size_t>(a)];
        if (!sel.active) continue;
        const double w = g / sel.k;
        for (int p : sel.pos) gd[static_cast<std::size_t>(a) * b + p] += w;
        for (int n : sel.neg) gd[static_cast<std::size_t>(a) * b + n] -= w;
      }
      di->accumulate_grad(gd);
    });
  }
  return loss;
}

}  // namespace

Tensor ann_loss(const BatchEmbeddings& batch, const AnnConfig& cfg, AnnStats* stats) {
  cfg.validate();
  validate_batch(batch, cfg.fixed_k == 0);
  const int b = batch.embeddings.dim(0);

  // K_a is an integer derived from detached logit values; no gradient flows
  // through this computation.
  std::vector<int> ks(static_cast<std::size_t>(b));
  if (cfg.fixed_k > 0) {
    std::fill(ks.begin(), ks.end(), cfg.fixed_k);
    if (stats) stats->entropies.assign(static_cast<std::size_t>(b), 0.0);
  } else {
    const int n = batch.logits.dim(1);
    for (int a = 0; a < b; ++a) {
      const auto probs = softmax(std::span<const double>(
          batch.logits.data().data() + static_cast<std::size_t>(a) * n, static_cast<std::size_t>(n)));
      const double h = class_entropy(probs);
      ks[static_cast<std::size_t>(a)] = adaptive_k(h, cfg);
      if (stats) stats->entropies.push_back(h);
    }
  }

  Tensor dist = pairwise_sqdist(batch.embeddings);
  return hinge_mined_loss(dist, batch.labels, ks, cfg.margin, stats);
}

Tensor batch_hard_triplet(const BatchEmbeddings& batch, double margin) {
  validate_batch(batch, false);
  const int b = batch.embeddings.dim(0);
  std::vector<int> ones(static_cast<std::size_t>(b), 1);
  Tensor dist = pairwise_sqdist(batch.embeddings);
  return hinge_mined_loss(dist, batch.labels, ones, margin, nullptr);
}

Tensor contrastive_loss(const BatchEmbeddings& batch, double margin) {
  validate_batch(batch, false);
  const int b = batch.embeddings.dim(0);
  Tensor dist = pairwise_sqdist(batch.embeddings);

  double total = 0.0;
  struct Pair {
    int i, j;
    bool same;
    bool active;
  };
  std::vector<Pair> pairs;
  for (int i = 0; i < b; ++i) {
    for (int j = i + 1; j < b; ++j) {
      const double d = dist.at(static_cast<std::size_t>(i) * b + j);
      const bool same = batch.labels[static_cast<std::size_t>(i)] == batch.labels[static_cast<std::size_t>(j)];
      bool active = false;
      if (same) {
        total += d;
        active = true;
      } else {
        const double gap = margin - std::sqrt(d);
        if (gap > 0.0) {
          total += gap * gap;
          active = true;
        }
      }
      pairs.push_back({i, j, same, active});
    }
  }

  Tensor loss = Tensor::from_data({}, {total}, dist.requires_grad());
  auto di = dist.share(), li = loss.share();
  if (Tape* tape = active_tape(); tape && loss.requires_grad()) {
    tape->record({di}, li, [di, li, pairs = std::move(pairs), margin, b]() {
      const double g = li->grad[0];
      std::vector<double> gd(di->value.size(), 0.0);
      for (const auto& p : pairs) {
        if (!p.active) continue;
        const std::size_t off = static_cast<std::size_t>(p.i) * b + p.j;
        if (p.same) {
          gd[off] += g;
        } else {
          // d/dD (margin - sqrt(D))^2 = -(margin - sqrt(D)) / sqrt(D);
          // the floor keeps the backward finite at coincident embeddings.
          const double s = std::sqrt(std::max(di->value[off], 1e-24));
          gd[off] += g * (-(margin - s) / s);
        }
      }
      di->accumulate_grad(gd);
    });
  }
  return loss;
}

JointBreakdown joint_loss(const BatchEmbeddings& batch, const AnnConfig& cfg, LossVariant variant) {
  cfg.validate();
  JointBreakdown out;

  Tensor xent = softmax_xent(batch.logits, batch.labels);
  out.xent_value = xent.item();

  if (variant == LossVariant::Softmax || cfg.lambda == 0.0) {
    out.total = xent;
    return out;
  }

  Tensor metric;
  switch (variant) {
    case LossVariant::SoftmaxAnn:
      metric = ann_loss(batch, cfg, &out.ann);
      break;
    case LossVariant::SoftmaxTriplet:
      metric = batch_hard_triplet(batch, cfg.margin);
      break;
    case LossVariant::SoftmaxContrastive:
      metric = contrastive_loss(batch, cfg.margin);
      break;
    case LossVariant::Softmax:
      break;
  }
  out.metric_value = metric.item();
  out.total = add(xent, scale(metric, cfg.lambda));
  return out;
}

}  // namespace amde
