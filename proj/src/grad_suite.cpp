#include "amde/grad_suite.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

#include "amde/encoder.hpp"
#include "amde/error.hpp"
#include "amde/grad_check.hpp"
#include "amde/losses.hpp"
#include "amde/ops.hpp"
#include "amde/rng.hpp"

namespace amde {

namespace {

constexpr double kEps = 1e-5;

Tensor rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> d(shape_numel(shape));
  for (double& v : d) v = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(d));
}

// Random values bounded away from zero, for kinked ops.
Tensor rand_tensor_off_kink(Shape shape, Rng& rng) {
  std::vector<double> d(shape_numel(shape));
  for (double& v : d) {
    v = rng.uniform(0.05, 1.0);
    if (rng.uniform() < 0.5) v = -v;
  }
  return Tensor::from_data(std::move(shape), std::move(d));
}

// Scalarizes a tensor-valued op with a fixed random probe so grad_check sees
// a scalar function.
TensorFn scalarized(std::function<Tensor(const Tensor&)> op, const Tensor& probe) {
  return [op = std::move(op), probe](const Tensor& x) { return reduce_sum(hadamard(op(x), probe)); };
}

struct SuiteBuilder {
  int cases;
  std::vector<GradSuiteEntry> entries;

  void run(const std::string& name, const std::function<double(Rng&)>& one_case) {
    GradSuiteEntry e;
    e.op = name;
    e.cases = cases;
    for (int i = 0; i < cases; ++i) {
      Rng rng(derive_seed(0xabcdefULL, std::hash<std::string>{}(name), static_cast<std::uint64_t>(i)));
      e.max_rel_err = std::max(e.max_rel_err, one_case(rng));
    }
    entries.push_back(std::move(e));
  }
};

BatchEmbeddings random_batch(int b, int d, int n, Rng& rng) {
  BatchEmbeddings batch;
  batch.embeddings = rand_tensor({b, d}, rng, -2.0, 2.0);
  batch.logits = rand_tensor({b, n}, rng, -2.0, 2.0);
  for (int i = 0; i < b; ++i) batch.labels.push_back(i / 2);
  return batch;
}

// Rejects batches where finite differences would step across a breakpoint of
// the mined losses: near-ties in the selection order, hinge arguments near
// zero, entropies near a rounding boundary (where K_a jumps), or distances
// near the contrastive sqrt/hinge kinks.
bool well_conditioned(const BatchEmbeddings& batch, const AnnConfig& cfg, double band = 1e-3) {
  const int b = batch.embeddings.dim(0);
  Tensor dist = pairwise_sqdist(batch.embeddings);

  std::vector<int> ks(static_cast<std::size_t>(b), std::max(cfg.fixed_k, 1));
  if (cfg.fixed_k == 0) {
    const int n = batch.logits.dim(1);
    for (int a = 0; a < b; ++a) {
      const auto p = softmax(std::span<const double>(
          batch.logits.data().data() + static_cast<std::size_t>(a) * n, static_cast<std::size_t>(n)));
      const double h = class_entropy(p);
      if (std::round(h) >= 1.0 && std::abs(h - std::round(h)) < 3e-3) return false;
      ks[static_cast<std::size_t>(a)] = adaptive_k(h, cfg);
    }
  }

  for (int a = 0; a < b; ++a) {
    std::vector<double> pos, neg;
    for (int j = 0; j < b; ++j) {
      if (j == a) continue;
      const double d = dist.at(static_cast<std::size_t>(a) * b + j);
      if (batch.labels[static_cast<std::size_t>(j)] == batch.labels[static_cast<std::size_t>(a)])
        pos.push_back(d);
      else
        neg.push_back(d);
    }
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    for (std::size_t i = 0; i + 1 < pos.size(); ++i)
      if (pos[i + 1] - pos[i] < band) return false;
    for (std::size_t i = 0; i + 1 < neg.size(); ++i)
      if (neg[i + 1] - neg[i] < band) return false;

    // Hinge arguments for the adaptive K and the triplet degenerate (K = 1).
    for (int requested : {ks[static_cast<std::size_t>(a)], 1}) {
      const int k = std::min({requested, static_cast<int>(pos.size()), static_cast<int>(neg.size())});
      double dap = 0.0, dan = 0.0;
      for (int i = 0; i < k; ++i) {
        dap += pos[pos.size() - 1 - static_cast<std::size_t>(i)];
        dan += neg[static_cast<std::size_t>(i)];
      }
      dap /= k;
      dan /= k;
      if (std::abs(cfg.margin + dap - dan) < band) return false;
    }

    // Contrastive kinks: sqrt at zero and the hinge at sqrt(d) = margin.
    for (double d : neg) {
      if (d < band) return false;
      if (std::abs(std::sqrt(d) - cfg.margin) < band) return false;
    }
  }
  return true;
}

// Smallest |preactivation| feeding a ReLU anywhere in the forward pass;
// mirrors the op sequence of encoder::forward. Perturbing a parameter by eps
// moves these preactivations, so the check keeps them off the kink by a
// margin much wider than eps times the network's sensitivity.
double min_relu_margin(const EncoderModel& model, const std::vector<Tensor>& images) {
  double margin = std::numeric_limits<double>::infinity();
  auto scan = [&margin](const Tensor& z) {
    for (double v : z.data()) margin = std::min(margin, std::abs(v));
  };
  for (const Tensor& img : images) {
    Tensor z1 = conv2d(img, model.conv1_w, model.conv1_b, 2, 1);
    scan(z1);
    Tensor z2 = conv2d(relu(z1), model.conv2_w, model.conv2_b, 2, 1);
    scan(z2);
    Tensor z3 = conv2d(relu(z2), model.conv3_w, model.conv3_b, 2, 1);
    scan(z3);
    Tensor fmap = relu(z3);
    if (model.config.local_branch == LocalBranch::Conv || model.config.local_branch == LocalBranch::Fc) {
      std::vector<Tensor> seq = row_pool_reduce(model, fmap);
      if (model.config.local_branch == LocalBranch::Conv) {
        scan(seq_conv3(stack_rows(seq), model.conv1d_w, model.conv1d_b));
      } else {
        Tensor flat = seq[0];
        for (std::size_t i = 1; i < seq.size(); ++i) flat = concat(flat, seq[i]);
        scan(add(matmul(model.fc_w, flat), model.fc_b));
      }
    }
  }
  return margin;
}

BatchEmbeddings conditioned_batch(int b, int d, int n, const AnnConfig& cfg, Rng& rng) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    BatchEmbeddings batch = random_batch(b, d, n, rng);
    if (well_conditioned(batch, cfg)) return batch;
  }
  throw Error(ErrorKind::Contract, "gradient suite: could not draw a conditioned batch");
}

EncoderModel with_param(const EncoderModel& model, const std::string& name, const Tensor& value) {
  EncoderModel m = model;
  if (name == "backbone.conv1.weight") m.conv1_w = value;
  else if (name == "backbone.conv1.bias") m.conv1_b = value;
  else if (name == "backbone.conv2.weight") m.conv2_w = value;
  else if (name == "backbone.conv2.bias") m.conv2_b = value;
  else if (name == "backbone.conv3.weight") m.conv3_w = value;
  else if (name == "backbone.conv3.bias") m.conv3_b = value;
  else if (name == "reduction.weight") m.reduction_w = value;
  else if (name == "lstm.weight") m.lstm_w = value;
  else if (name == "lstm.bias") m.lstm_b = value;
  else if (name == "rnn.weight") m.rnn_w = value;
  else if (name == "rnn.bias") m.rnn_b = value;
  else if (name == "conv1d.weight") m.conv1d_w = value;
  else if (name == "conv1d.bias") m.conv1d_b = value;
  else if (name == "fc.weight") m.fc_w = value;
  else if (name == "fc.bias") m.fc_b = value;
  else if (name == "fusion.weight") m.fusion_w = value;
  else if (name == "fusion.bias") m.fusion_b = value;
  else if (name == "classifier.weight") m.classifier_w = value;
  else if (name == "classifier.bias") m.classifier_b = value;
  else throw Error(ErrorKind::Contract, "gradient suite: unknown parameter " + name);
  return m;
}

// Joint loss through a small full network, differentiated with respect to
// every parameter tensor in turn.
double full_network_case(Rng& rng, LocalBranch branch) {
  EncoderConfig cfg;
  cfg.input_channels = 1;
  cfg.input_height = 16;
  cfg.input_width = 8;
  cfg.feature_channels = 8;
  cfg.map_height = 2;
  cfg.map_width = 1;
  cfg.reduced_channels = 4;
  cfg.embed_dim = 8;
  cfg.num_classes = 4;
  cfg.local_branch = branch;

  AnnConfig ann;

  for (int attempt = 0;; ++attempt) {
    if (attempt >= 64)
      throw Error(ErrorKind::Contract, "gradient suite: no conditioned network draw");
    EncoderModel model = EncoderModel::init(cfg, rng.next_u64());
    // Fan-in init collapses untrained embeddings of a net this small to
    // nearly coincident points, and zero biases pin dead conv windows exactly
    // onto the relu kink. Widen every layer and jitter all parameters so the
    // check runs at a generic point.
    for (auto& [name, param] : model.parameters()) {
      Tensor p = param;
      for (double& v : p.mutable_data()) v = 3.0 * v + rng.uniform(-0.3, 0.3);
    }
    std::vector<Tensor> images;
    std::vector<int> labels;
    for (int i = 0; i < 8; ++i) {
      images.push_back(rand_tensor({1, 16, 8}, rng, 0.0, 1.0));
      labels.push_back(i / 2);
    }

    auto batch_of = [&](const EncoderModel& m) {
      BatchEmbeddings be;
      std::vector<Tensor> emb, lg;
      for (const Tensor& img : images) {
        EncoderOutput out = forward(m, img);
        emb.push_back(out.embedding);
        lg.push_back(out.logits);
      }
      be.embeddings = stack_rows(emb);
      be.logits = stack_rows(lg);
      be.labels = labels;
      return be;
    };

    if (min_relu_margin(model, images) < 8e-3) continue;
    if (!well_conditioned(batch_of(model), ann, 5e-3)) continue;

    double worst = 0.0;
    for (const auto& [name, param] : model.parameters()) {
      auto f = [&, name = name](const Tensor& t) {
        EncoderModel probe = with_param(model, name, t);
        return joint_loss(batch_of(probe), ann, LossVariant::SoftmaxAnn).total;
      };
      worst = std::max(worst, grad_check(f, param, kEps));
    }
    return worst;
  }
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(int cases_per_op) {
  SuiteBuilder suite{cases_per_op, {}};

  suite.run("matmul", [](Rng& rng) {
    const int m = 1 + rng.below_int(4), k = 1 + rng.below_int(4), n = 1 + rng.below_int(4);
    Tensor a = rand_tensor({m, k}, rng);
    Tensor b = rand_tensor({k, n}, rng);
    Tensor probe = rand_tensor({m, n}, rng);
    if (rng.uniform() < 0.5)
      return grad_check(scalarized([b](const Tensor& t) { return matmul(t, b); }, probe), a, kEps);
    return grad_check(scalarized([a](const Tensor& t) { return matmul(a, t); }, probe), b, kEps);
  });

  suite.run("add", [](Rng& rng) {
    Shape shape{1 + rng.below_int(3), 1 + rng.below_int(5)};
    Tensor a = rand_tensor(shape, rng), b = rand_tensor(shape, rng), probe = rand_tensor(shape, rng);
    return grad_check(scalarized([b](const Tensor& t) { return add(t, b); }, probe), a, kEps);
  });

  suite.run("sub", [](Rng& rng) {
    Shape shape{1 + rng.below_int(3), 1 + rng.below_int(5)};
    Tensor a = rand_tensor(shape, rng), b = rand_tensor(shape, rng), probe = rand_tensor(shape, rng);
    return grad_check(scalarized([a](const Tensor& t) { return sub(a, t); }, probe), b, kEps);
  });

  suite.run("hadamard", [](Rng& rng) {
    Shape shape{1 + rng.below_int(4), 1 + rng.below_int(4)};
    Tensor a = rand_tensor(shape, rng), b = rand_tensor(shape, rng), probe = rand_tensor(shape, rng);
    if (rng.uniform() < 0.5)
      return grad_check(scalarized([b](const Tensor& t) { return hadamard(t, b); }, probe), a, kEps);
    return grad_check(scalarized([a](const Tensor& t) { return hadamard(a, t); }, probe), b, kEps);
  });

  suite.run("scale", [](Rng& rng) {
    Shape shape{2 + rng.below_int(5)};
    Tensor x = rand_tensor(shape, rng), probe = rand_tensor(shape, rng);
    const double c = rng.uniform(-3.0, 3.0);
    return grad_check(scalarized([c](const Tensor& t) { return scale(t, c); }, probe), x, kEps);
  });

  suite.run("sigmoid", [](Rng& rng) {
    Shape shape{1 + rng.below_int(4), 1 + rng.below_int(4)};
    Tensor x = rand_tensor(shape, rng, -4.0, 4.0), probe = rand_tensor(shape, rng);
    return grad_check(scalarized([](const Tensor& t) { return sigmoid(t); }, probe), x, kEps);
  });

  suite.run("tanh", [](Rng& rng) {
    Shape shape{1 + rng.below_int(4), 1 + rng.below_int(4)};
    Tensor x = rand_tensor(shape, rng, -4.0, 4.0), probe = rand_tensor(shape, rng);
    return grad_check(scalarized([](const Tensor& t) { return tanh_op(t); }, probe), x, kEps);
  });

  suite.run("relu", [](Rng& rng) {
    Shape shape{1 + rng.below_int(4), 1 + rng.below_int(4)};
    Tensor x = rand_tensor_off_kink(shape, rng), probe = rand_tensor(shape, rng);
    return grad_check(scalarized([](const Tensor& t) { return relu(t); }, probe), x, kEps);
  });

  suite.run("reduce_sum", [](Rng& rng) {
    Shape shape{1 + rng.below_int(3), 1 + rng.below_int(3), 1 + rng.below_int(3)};
    Tensor x = rand_tensor(shape, rng);
    std::vector<int> axes;
    for (int a = 0; a < 3; ++a)
      if (rng.uniform() < 0.5) axes.push_back(a);
    Tensor shaped = reduce_sum(x, axes);
    Tensor probe = rand_tensor(shaped.shape(), rng);
    return grad_check(scalarized([axes](const Tensor& t) { return reduce_sum(t, axes); }, probe), x, kEps);
  });

  suite.run("reduce_mean", [](Rng& rng) {
    Shape shape{1 + rng.below_int(3), 1 + rng.below_int(3), 1 + rng.below_int(3)};
    Tensor x = rand_tensor(shape, rng);
    std::vector<int> axes;
    for (int a = 0; a < 3; ++a)
      if (rng.uniform() < 0.5) axes.push_back(a);
    Tensor shaped = reduce_mean(x, axes);
    Tensor probe = rand_tensor(shaped.shape(), rng);
    return grad_check(scalarized([axes](const Tensor& t) { return reduce_mean(t, axes); }, probe), x, kEps);
  });

  suite.run("concat", [](Rng& rng) {
    const int na = 1 + rng.below_int(5), nb = 1 + rng.below_int(5);
    Tensor a = rand_tensor({na}, rng), b = rand_tensor({nb}, rng), probe = rand_tensor({na + nb}, rng);
    if (rng.uniform() < 0.5)
      return grad_check(scalarized([b](const Tensor& t) { return concat(t, b); }, probe), a, kEps);
    return grad_check(scalarized([a](const Tensor& t) { return concat(a, t); }, probe), b, kEps);
  });

  suite.run("slice", [](Rng& rng) {
    const int n = 4 + rng.below_int(6);
    const int start = rng.below_int(n - 1);
    const int len = 1 + rng.below_int(n - start);
    Tensor x = rand_tensor({n}, rng), probe = rand_tensor({len}, rng);
    return grad_check(scalarized([start, len](const Tensor& t) { return slice(t, start, len); }, probe),
                      x, kEps);
  });

  suite.run("stack_rows", [](Rng& rng) {
    const int b = 2 + rng.below_int(3), d = 1 + rng.below_int(4);
    std::vector<Tensor> rows;
    for (int i = 0; i < b; ++i) rows.push_back(rand_tensor({d}, rng));
    const int variable = rng.below_int(b);
    Tensor probe = rand_tensor({b, d}, rng);
    auto op = [rows, variable](const Tensor& t) {
      std::vector<Tensor> rs = rows;
      rs[static_cast<std::size_t>(variable)] = t;
      return stack_rows(rs);
    };
    return grad_check(scalarized(op, probe), rows[static_cast<std::size_t>(variable)], kEps);
  });

  suite.run("row", [](Rng& rng) {
    const int m = 2 + rng.below_int(3), n = 1 + rng.below_int(4);
    const int r = rng.below_int(m);
    Tensor x = rand_tensor({m, n}, rng), probe = rand_tensor({n}, rng);
    return grad_check(scalarized([r](const Tensor& t) { return row(t, r); }, probe), x, kEps);
  });

  suite.run("transpose", [](Rng& rng) {
    const int m = 1 + rng.below_int(4), n = 1 + rng.below_int(4);
    Tensor x = rand_tensor({m, n}, rng), probe = rand_tensor({n, m}, rng);
    return grad_check(scalarized([](const Tensor& t) { return transpose(t); }, probe), x, kEps);
  });

  suite.run("conv2d", [](Rng& rng) {
    const int ci = 1 + rng.below_int(2), co = 1 + rng.below_int(3);
    const int h = 4 + rng.below_int(3), w = 4 + rng.below_int(3);
    const int stride = 1 + rng.below_int(2), pad = rng.below_int(2);
    Tensor x = rand_tensor({ci, h, w}, rng);
    Tensor kern = rand_tensor({co, ci, 3, 3}, rng);
    Tensor bias = rand_tensor({co}, rng);
    Tensor shaped = conv2d(x, kern, bias, stride, pad);
    Tensor probe = rand_tensor(shaped.shape(), rng);
    const int which = rng.below_int(3);
    if (which == 0)
      return grad_check(
          scalarized([kern, bias, stride, pad](const Tensor& t) { return conv2d(t, kern, bias, stride, pad); },
                     probe),
          x, kEps);
    if (which == 1)
      return grad_check(
          scalarized([x, bias, stride, pad](const Tensor& t) { return conv2d(x, t, bias, stride, pad); },
                     probe),
          kern, kEps);
    return grad_check(
        scalarized([x, kern, stride, pad](const Tensor& t) { return conv2d(x, kern, t, stride, pad); },
                   probe),
        bias, kEps);
  });

  suite.run("seq_conv3", [](Rng& rng) {
    const int t = 2 + rng.below_int(5), c = 1 + rng.below_int(3), e = 1 + rng.below_int(3);
    Tensor s = rand_tensor({t, c}, rng);
    Tensor w = rand_tensor({e, c, 3}, rng);
    Tensor b = rand_tensor({e}, rng);
    Tensor probe = rand_tensor({t, e}, rng);
    const int which = rng.below_int(3);
    if (which == 0)
      return grad_check(scalarized([w, b](const Tensor& x) { return seq_conv3(x, w, b); }, probe), s, kEps);
    if (which == 1)
      return grad_check(scalarized([s, b](const Tensor& x) { return seq_conv3(s, x, b); }, probe), w, kEps);
    return grad_check(scalarized([s, w](const Tensor& x) { return seq_conv3(s, w, x); }, probe), b, kEps);
  });

  suite.run("l2_normalize", [](Rng& rng) {
    const int n = 2 + rng.below_int(5);
    Tensor x = rand_tensor_off_kink({n}, rng);
    Tensor probe = rand_tensor({n}, rng);
    return grad_check(scalarized([](const Tensor& t) { return l2_normalize(t); }, probe), x, kEps);
  });

  suite.run("softmax_xent", [](Rng& rng) {
    const int b = 1 + rng.below_int(4), n = 2 + rng.below_int(4);
    Tensor logits = rand_tensor({b, n}, rng, -3.0, 3.0);
    std::vector<int> labels;
    for (int i = 0; i < b; ++i) labels.push_back(rng.below_int(n));
    return grad_check([labels](const Tensor& t) { return softmax_xent(t, labels); }, logits, kEps);
  });

  suite.run("pairwise_sqdist", [](Rng& rng) {
    const int b = 2 + rng.below_int(4), d = 1 + rng.below_int(4);
    Tensor e = rand_tensor({b, d}, rng);
    Tensor probe = rand_tensor({b, b}, rng);
    return grad_check(scalarized([](const Tensor& t) { return pairwise_sqdist(t); }, probe), e, kEps);
  });

  suite.run("lstm_step", [](Rng& rng) {
    const int c = 1 + rng.below_int(3), e = 1 + rng.below_int(3);
    Tensor s = rand_tensor({c}, rng);
    Tensor h0 = rand_tensor({e}, rng, -0.9, 0.9);
    Tensor d0 = rand_tensor({e}, rng);
    Tensor w = rand_tensor({4 * e, c + e}, rng);
    Tensor b = rand_tensor({4 * e}, rng);
    Tensor probe = rand_tensor({e}, rng);
    auto pick_h = [](std::pair<Tensor, Tensor> hd) { return hd.first; };
    const int which = rng.below_int(5);
    if (which == 0)
      return grad_check(
          scalarized([=](const Tensor& t) { return pick_h(lstm_step(t, h0, d0, w, b)); }, probe), s, kEps);
    if (which == 1)
      return grad_check(
          scalarized([=](const Tensor& t) { return pick_h(lstm_step(s, t, d0, w, b)); }, probe), h0, kEps);
    if (which == 2)
      return grad_check(
          scalarized([=](const Tensor& t) { return pick_h(lstm_step(s, h0, t, w, b)); }, probe), d0, kEps);
    if (which == 3)
      return grad_check(
          scalarized([=](const Tensor& t) { return pick_h(lstm_step(s, h0, d0, t, b)); }, probe), w, kEps);
    return grad_check(
        scalarized([=](const Tensor& t) { return pick_h(lstm_step(s, h0, d0, w, t)); }, probe), b, kEps);
  });

  suite.run("ann_loss", [](Rng& rng) {
    AnnConfig cfg;
    BatchEmbeddings batch = conditioned_batch(8, 4, 4, cfg, rng);
    auto f = [batch, cfg](const Tensor& e) {
      BatchEmbeddings probe{e, batch.logits, batch.labels};
      return ann_loss(probe, cfg);
    };
    return grad_check(f, batch.embeddings, kEps);
  });

  suite.run("batch_hard_triplet", [](Rng& rng) {
    BatchEmbeddings batch = conditioned_batch(8, 4, 4, AnnConfig{}, rng);
    auto f = [batch](const Tensor& e) {
      BatchEmbeddings probe{e, batch.logits, batch.labels};
      return batch_hard_triplet(probe, 0.3);
    };
    return grad_check(f, batch.embeddings, kEps);
  });

  suite.run("contrastive_loss", [](Rng& rng) {
    BatchEmbeddings batch = conditioned_batch(6, 4, 4, AnnConfig{}, rng);
    auto f = [batch](const Tensor& e) {
      BatchEmbeddings probe{e, batch.logits, batch.labels};
      return contrastive_loss(probe, 0.3);
    };
    return grad_check(f, batch.embeddings, kEps);
  });

  suite.run("joint_loss", [](Rng& rng) {
    AnnConfig cfg;
    BatchEmbeddings batch = conditioned_batch(8, 4, 4, cfg, rng);
    auto f = [batch, cfg](const Tensor& e) {
      BatchEmbeddings probe{e, batch.logits, batch.labels};
      return joint_loss(probe, cfg, LossVariant::SoftmaxAnn).total;
    };
    return grad_check(f, batch.embeddings, kEps);
  });

  // Full network, all parameters; fewer cases since each case sweeps every
  // parameter coordinate.
  {
    GradSuiteEntry e;
    e.op = "full_joint_loss";
    e.cases = std::max(1, cases_per_op / 5);
    for (int i = 0; i < e.cases; ++i) {
      Rng rng(derive_seed(0xF011ULL, 77, static_cast<std::uint64_t>(i)));
      const LocalBranch branch =
          std::array{LocalBranch::Lstm, LocalBranch::Rnn, LocalBranch::Conv, LocalBranch::Fc,
                     LocalBranch::None}[static_cast<std::size_t>(i) % 5];
      e.max_rel_err = std::max(e.max_rel_err, full_network_case(rng, branch));
    }
    suite.entries.push_back(std::move(e));
  }

  return suite.entries;
}

bool gradient_suite_passed(const std::vector<GradSuiteEntry>& entries) {
  for (const auto& e : entries) {
    if (!e.pass()) return false;
  }
  return true;
}

}  // namespace amde
