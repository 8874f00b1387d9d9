#include "amde/encoder.hpp"

#include <cmath>

#include "amde/error.hpp"
#include "amde/ops.hpp"
#include "amde/rng.hpp"

namespace amde {

const char* local_branch_name(LocalBranch b) {
  switch (b) {
    case LocalBranch::None: return "none";
    case LocalBranch::Conv: return "conv";
    case LocalBranch::Fc: return "fc";
    case LocalBranch::Rnn: return "rnn";
    case LocalBranch::Lstm: return "lstm";
  }
  return "none";
}

LocalBranch local_branch_from_name(const std::string& name) {
  if (name == "none") return LocalBranch::None;
  if (name == "conv") return LocalBranch::Conv;
  if (name == "fc") return LocalBranch::Fc;
  if (name == "rnn") return LocalBranch::Rnn;
  if (name == "lstm") return LocalBranch::Lstm;
  throw Error(ErrorKind::Config, "unknown local branch '" + name + "'");
}

int EncoderConfig::fused_dim() const {
  return local_branch == LocalBranch::None ? feature_channels : feature_channels + hidden_units();
}

void EncoderConfig::validate() const {
  if (input_channels < 1 || input_height < 1 || input_width < 1)
    throw Error(ErrorKind::Config, "encoder: input shape extents must be positive");
  if (feature_channels < 1 || reduced_channels < 1 || embed_dim < 1)
    throw Error(ErrorKind::Config, "encoder: channel counts must be positive");
  if (num_classes < 2) throw Error(ErrorKind::Config, "encoder: num_classes must be at least 2");
  if (map_height < 1 || map_width < 1) throw Error(ErrorKind::Config, "encoder: map size must be positive");
  // Three stride-2 blocks divide each spatial extent by 8.
  if (input_height != map_height * 8 || input_width != map_width * 8)
    throw Error(ErrorKind::Config,
                "encoder: backbone reduces 8x spatially; input " + std::to_string(input_height) + "x" +
                    std::to_string(input_width) + " cannot map to " + std::to_string(map_height) + "x" +
                    std::to_string(map_width));
  if (lstm_hidden < 0) throw Error(ErrorKind::Config, "encoder: lstm_hidden must be nonnegative");
}

bool operator==(const EncoderConfig& a, const EncoderConfig& b) {
  return a.input_channels == b.input_channels && a.input_height == b.input_height &&
         a.input_width == b.input_width && a.feature_channels == b.feature_channels &&
         a.map_height == b.map_height && a.map_width == b.map_width &&
         a.reduced_channels == b.reduced_channels && a.lstm_hidden == b.lstm_hidden &&
         a.embed_dim == b.embed_dim && a.num_classes == b.num_classes &&
         a.local_branch == b.local_branch && a.lstm_bias == b.lstm_bias &&
         a.normalize_embeddings == b.normalize_embeddings;
}

namespace {

int backbone_mid1(const EncoderConfig& cfg) { return std::max(1, cfg.feature_channels / 8); }
int backbone_mid2(const EncoderConfig& cfg) { return std::max(1, cfg.feature_channels / 4); }

Tensor init_weight(Shape shape, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> d(shape_numel(shape));
  for (double& v : d) v = rng.uniform(-bound, bound);
  return Tensor::from_data(std::move(shape), std::move(d), true);
}

Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b) { return add(matmul(w, x), b); }

}  // namespace

EncoderModel EncoderModel::init(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  EncoderModel m;
  m.config = config;
  Rng rng(derive_seed(seed, 0x6d6f64656cULL));

  const int c1 = backbone_mid1(config);
  const int c2 = backbone_mid2(config);
  const int cc = config.feature_channels;
  const int rc = config.reduced_channels;
  const int e = config.hidden_units();
  const int h = config.map_height;

  m.conv1_w = init_weight({c1, config.input_channels, 3, 3}, config.input_channels * 9, rng);
  m.conv1_b = Tensor::zeros({c1}, true);
  m.conv2_w = init_weight({c2, c1, 3, 3}, c1 * 9, rng);
  m.conv2_b = Tensor::zeros({c2}, true);
  m.conv3_w = init_weight({cc, c2, 3, 3}, c2 * 9, rng);
  m.conv3_b = Tensor::zeros({cc}, true);

  m.reduction_w = init_weight({rc, cc}, cc, rng);

  switch (config.local_branch) {
    case LocalBranch::None:
      break;
    case LocalBranch::Lstm: {
      m.lstm_w = init_weight({4 * e, rc + e}, rc + e, rng);
      std::vector<double> bias(static_cast<std::size_t>(4 * e), 0.0);
      if (config.lstm_bias) {
        for (int i = 0; i < e; ++i) bias[static_cast<std::size_t>(e + i)] = 1.0;  // forget block
      }
      m.lstm_b = Tensor::from_data({4 * e}, std::move(bias), true);
      break;
    }
    case LocalBranch::Rnn:
      m.rnn_w = init_weight({e, rc + e}, rc + e, rng);
      m.rnn_b = Tensor::zeros({e}, true);
      break;
    case LocalBranch::Conv:
      m.conv1d_w = init_weight({e, rc, 3}, rc * 3, rng);
      m.conv1d_b = Tensor::zeros({e}, true);
      break;
    case LocalBranch::Fc:
      m.fc_w = init_weight({e, h * rc}, h * rc, rng);
      m.fc_b = Tensor::zeros({e}, true);
      break;
  }

  m.fusion_w = init_weight({config.embed_dim, config.fused_dim()}, config.fused_dim(), rng);
  m.fusion_b = Tensor::zeros({config.embed_dim}, true);
  m.classifier_w = init_weight({config.num_classes, config.embed_dim}, config.embed_dim, rng);
  m.classifier_b = Tensor::zeros({config.num_classes}, true);
  return m;
}

std::vector<std::pair<std::string, Tensor>> EncoderModel::parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto push = [&out](const char* name, const Tensor& t) {
    if (t.defined()) out.emplace_back(name, t);
  };
  push("backbone.conv1.weight", conv1_w);
  push("backbone.conv1.bias", conv1_b);
  push("backbone.conv2.weight", conv2_w);
  push("backbone.conv2.bias", conv2_b);
  push("backbone.conv3.weight", conv3_w);
  push("backbone.conv3.bias", conv3_b);
  push("reduction.weight", reduction_w);
  push("lstm.weight", lstm_w);
  push("lstm.bias", lstm_b);
  push("rnn.weight", rnn_w);
  push("rnn.bias", rnn_b);
  push("conv1d.weight", conv1d_w);
  push("conv1d.bias", conv1d_b);
  push("fc.weight", fc_w);
  push("fc.bias", fc_b);
  push("fusion.weight", fusion_w);
  push("fusion.bias", fusion_b);
  push("classifier.weight", classifier_w);
  push("classifier.bias", classifier_b);
  return out;
}

std::size_t EncoderModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : parameters()) n += t.size();
  return n;
}

void EncoderModel::set_requires_grad(bool v) {
  for (auto& [name, t] : parameters()) {
    Tensor copy = t;
    copy.set_requires_grad(v);
  }
}

void EncoderModel::zero_grad() {
  for (auto& [name, t] : parameters()) {
    Tensor copy = t;
    copy.zero_grad();
  }
}

Tensor backbone_forward(const EncoderModel& model, const Tensor& image) {
  const auto& cfg = model.config;
  if (image.rank() != 3 || image.dim(0) != cfg.input_channels || image.dim(1) != cfg.input_height ||
      image.dim(2) != cfg.input_width) {
    throw Error(ErrorKind::Dimension, "backbone: image shape " + shape_str(image.shape()) +
                                          " does not match configured input");
  }
  Tensor x = relu(conv2d(image, model.conv1_w, model.conv1_b, 2, 1));
  x = relu(conv2d(x, model.conv2_w, model.conv2_b, 2, 1));
  x = relu(conv2d(x, model.conv3_w, model.conv3_b, 2, 1));
  return x;
}

Tensor global_pool(const Tensor& fmap) {
  if (fmap.rank() != 3) throw Error(ErrorKind::Dimension, "global_pool: expected [C x H x W]");
  return reduce_mean(fmap, {1, 2});
}

std::vector<Tensor> row_pool_reduce(const EncoderModel& model, const Tensor& fmap) {
  if (fmap.rank() != 3) throw Error(ErrorKind::Dimension, "row_pool_reduce: expected [C x H x W]");
  const int h = fmap.dim(1);
  Tensor row_means = transpose(reduce_mean(fmap, {2}));  // [H x C]
  std::vector<Tensor> seq;
  seq.reserve(static_cast<std::size_t>(h));
  for (int t = 0; t < h; ++t) seq.push_back(matmul(model.reduction_w, row(row_means, t)));
  return seq;
}

std::pair<Tensor, Tensor> lstm_step(const Tensor& s_t, const Tensor& h_prev, const Tensor& d_prev,
                                    const Tensor& w, const Tensor& bias) {
  if (s_t.rank() != 1 || h_prev.rank() != 1 || d_prev.rank() != 1)
    throw Error(ErrorKind::Dimension, "lstm_step: inputs must be vectors");
  const int e = h_prev.dim(0);
  if (d_prev.dim(0) != e) throw Error(ErrorKind::Dimension, "lstm_step: cell/hidden size mismatch");
  if (w.rank() != 2 || w.dim(0) != 4 * e || w.dim(1) != s_t.dim(0) + e)
    throw Error(ErrorKind::Dimension, "lstm_step: weight must be [" + std::to_string(4 * e) + " x " +
                                          std::to_string(s_t.dim(0) + e) + "], got " + shape_str(w.shape()));

  Tensor z = add(matmul(w, concat(s_t, h_prev)), bias);
  Tensor gate_i = sigmoid(slice(z, 0, e));
  Tensor gate_f = sigmoid(slice(z, e, e));
  Tensor gate_o = sigmoid(slice(z, 2 * e, e));
  Tensor cand = tanh_op(slice(z, 3 * e, e));
  Tensor d_t = add(hadamard(gate_f, d_prev), hadamard(gate_i, cand));
  Tensor h_t = hadamard(gate_o, tanh_op(d_t));
  return {h_t, d_t};
}

Tensor lstm_encode(const EncoderModel& model, const std::vector<Tensor>& sequence) {
  if (sequence.empty()) throw Error(ErrorKind::Contract, "lstm_encode: empty sequence");
  const int e = model.config.hidden_units();
  Tensor h = Tensor::zeros({e});
  Tensor d = Tensor::zeros({e});
  for (const Tensor& s : sequence) {
    auto [h_next, d_next] = lstm_step(s, h, d, model.lstm_w, model.lstm_b);
    h = h_next;
    d = d_next;
  }
  return h;
}

namespace {

Tensor flatten_sequence(const std::vector<Tensor>& seq) {
  Tensor out = seq[0];
  for (std::size_t i = 1; i < seq.size(); ++i) out = concat(out, seq[i]);
  return out;
}

Tensor local_feature(const EncoderModel& model, const Tensor& fmap) {
  const auto& cfg = model.config;
  std::vector<Tensor> seq = row_pool_reduce(model, fmap);
  switch (cfg.local_branch) {
    case LocalBranch::Lstm:
      return lstm_encode(model, seq);
    case LocalBranch::Rnn: {
      Tensor h = Tensor::zeros({cfg.hidden_units()});
      for (const Tensor& s : seq) h = tanh_op(add(matmul(model.rnn_w, concat(s, h)), model.rnn_b));
      return h;
    }
    case LocalBranch::Conv: {
      Tensor stacked = stack_rows(seq);  // [H x c]
      Tensor activated = relu(seq_conv3(stacked, model.conv1d_w, model.conv1d_b));
      return reduce_mean(activated, {0});
    }
    case LocalBranch::Fc:
      return relu(affine(model.fc_w, flatten_sequence(seq), model.fc_b));
    case LocalBranch::None:
      break;
  }
  throw Error(ErrorKind::Contract, "local_feature: no local branch configured");
}

}  // namespace

EncoderOutput forward(const EncoderModel& model, const Tensor& image) {
  const auto& cfg = model.config;
  Tensor fmap = backbone_forward(model, image);

  EncoderOutput out;
  out.global_feature = global_pool(fmap);

  Tensor fused;
  if (cfg.local_branch == LocalBranch::None) {
    fused = out.global_feature;
  } else {
    out.self_feature = local_feature(model, fmap);
    fused = concat(out.global_feature, out.self_feature);
  }

  out.embedding = affine(model.fusion_w, fused, model.fusion_b);
  if (cfg.normalize_embeddings) out.embedding = l2_normalize(out.embedding);
  out.logits = affine(model.classifier_w, out.embedding, model.classifier_b);
  return out;
}

}  // namespace amde
