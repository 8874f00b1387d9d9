#include "amde/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "amde/error.hpp"

using ordered_json = nlohmann::ordered_json;

namespace amde {

const char* optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::Adam ? "adam" : "sgd-momentum";
}

OptimizerKind optimizer_from_name(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sgd-momentum") return OptimizerKind::SgdMomentum;
  throw Error(ErrorKind::Config, "unknown optimizer '" + name + "'");
}

void TrainConfig::finalize() {
  if (encoder.num_classes == 0) encoder.num_classes = data.num_ids;
  validate();
}

void TrainConfig::validate() const {
  encoder.validate();
  ann.validate();
  pk.validate();
  if (encoder.num_classes != data.num_ids)
    throw Error(ErrorKind::Config, "config: encoder.num_classes (" + std::to_string(encoder.num_classes) +
                                       ") must equal data.num_ids (" + std::to_string(data.num_ids) + ")");
  if (data.num_ids < 2 || data.imgs_per_id < 2)
    throw Error(ErrorKind::Config, "config: dataset needs at least 2 ids and 2 images per id");
  if (data.noise_sigma < 0.0) throw Error(ErrorKind::Config, "config: noise_sigma must be nonnegative");
  if (steps_per_epoch < 1 || epochs < 1)
    throw Error(ErrorKind::Config, "config: epochs and steps_per_epoch must be positive");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::Config, "config: learning_rate must be positive");
  if (occlusion_train) occlusion_train->validate();
  for (double s : occlusion_eval_s) {
    if (!(s >= 0.0 && s <= 1.0))
      throw Error(ErrorKind::Config, "config: occlusion_eval_s entries must lie in [0, 1]");
  }
}

std::string TrainConfig::variant_row_name() const {
  const LocalBranch b = encoder.local_branch;
  if (b == LocalBranch::None && variant == LossVariant::Softmax) return "RN_S";
  if (b == LocalBranch::None && variant == LossVariant::SoftmaxAnn) return "RN_A";
  if (b == LocalBranch::Conv && variant == LossVariant::SoftmaxAnn) return "RNCONV_A";
  if (b == LocalBranch::Fc && variant == LossVariant::SoftmaxAnn) return "RNFC_A";
  if (b == LocalBranch::Rnn && variant == LossVariant::SoftmaxAnn) return "RNRNN_A";
  if (b == LocalBranch::Lstm && variant == LossVariant::Softmax) return "RNLSTM_S";
  if (b == LocalBranch::Lstm && variant == LossVariant::SoftmaxContrastive) return "RNLSTM_C";
  if (b == LocalBranch::Lstm && variant == LossVariant::SoftmaxTriplet) return "RNLSTM_T";
  if (b == LocalBranch::Lstm && variant == LossVariant::SoftmaxAnn) return "RNLSTM_A";
  return std::string(local_branch_name(b)) + "+" + loss_variant_name(variant);
}

std::vector<std::string> ablation_variant_names() {
  return {"RN_S", "RN_A", "RNCONV_A", "RNFC_A", "RNRNN_A", "RNLSTM_S", "RNLSTM_C", "RNLSTM_T",
          "RNLSTM_A"};
}

TrainConfig apply_variant(const TrainConfig& base, const std::string& row_name) {
  TrainConfig out = base;
  if (row_name == "RN_S") {
    out.encoder.local_branch = LocalBranch::None;
    out.variant = LossVariant::Softmax;
  } else if (row_name == "RN_A") {
    out.encoder.local_branch = LocalBranch::None;
    out.variant = LossVariant::SoftmaxAnn;
  } else if (row_name == "RNCONV_A") {
    out.encoder.local_branch = LocalBranch::Conv;
    out.variant = LossVariant::SoftmaxAnn;
  } else if (row_name == "RNFC_A") {
    out.encoder.local_branch = LocalBranch::Fc;
    out.variant = LossVariant::SoftmaxAnn;
  } else if (row_name == "RNRNN_A") {
    out.encoder.local_branch = LocalBranch::Rnn;
    out.variant = LossVariant::SoftmaxAnn;
  } else if (row_name == "RNLSTM_S") {
    out.encoder.local_branch = LocalBranch::Lstm;
    out.variant = LossVariant::Softmax;
  } else if (row_name == "RNLSTM_C") {
    out.encoder.local_branch = LocalBranch::Lstm;
    out.variant = LossVariant::SoftmaxContrastive;
  } else if (row_name == "RNLSTM_T") {
    out.encoder.local_branch = LocalBranch::Lstm;
    out.variant = LossVariant::SoftmaxTriplet;
  } else if (row_name == "RNLSTM_A") {
    out.encoder.local_branch = LocalBranch::Lstm;
    out.variant = LossVariant::SoftmaxAnn;
  } else {
    throw Error(ErrorKind::Config, "unknown ablation variant '" + row_name + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON codec

namespace {

void reject_unknown_keys(const ordered_json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key))
      throw Error(ErrorKind::Config, "config: unknown key '" + key + "' in " + where);
  }
}

ordered_json encoder_to_json(const EncoderConfig& e) {
  ordered_json j;
  j["input_shape"] = {e.input_channels, e.input_height, e.input_width};
  j["feature_channels"] = e.feature_channels;
  j["map_height"] = e.map_height;
  j["map_width"] = e.map_width;
  j["reduced_channels"] = e.reduced_channels;
  j["lstm_hidden"] = e.lstm_hidden;
  j["embed_dim"] = e.embed_dim;
  j["num_classes"] = e.num_classes;
  j["local_branch"] = local_branch_name(e.local_branch);
  j["lstm_bias"] = e.lstm_bias;
  j["normalize_embeddings"] = e.normalize_embeddings;
  return j;
}

EncoderConfig encoder_from_json(const ordered_json& j) {
  reject_unknown_keys(j,
                      {"input_shape", "feature_channels", "map_height", "map_width",
                       "reduced_channels", "lstm_hidden", "embed_dim", "num_classes", "local_branch",
                       "lstm_bias", "normalize_embeddings"},
                      "encoder");
  EncoderConfig e;
  if (j.contains("input_shape")) {
    const auto shape = j.at("input_shape").get<std::vector<int>>();
    if (shape.size() != 3) throw Error(ErrorKind::Config, "config: input_shape must have 3 entries");
    e.input_channels = shape[0];
    e.input_height = shape[1];
    e.input_width = shape[2];
  }
  e.feature_channels = j.value("feature_channels", e.feature_channels);
  e.map_height = j.value("map_height", e.map_height);
  e.map_width = j.value("map_width", e.map_width);
  e.reduced_channels = j.value("reduced_channels", e.reduced_channels);
  e.lstm_hidden = j.value("lstm_hidden", e.lstm_hidden);
  e.embed_dim = j.value("embed_dim", e.embed_dim);
  e.num_classes = j.value("num_classes", e.num_classes);
  if (j.contains("local_branch")) e.local_branch = local_branch_from_name(j.at("local_branch"));
  e.lstm_bias = j.value("lstm_bias", e.lstm_bias);
  e.normalize_embeddings = j.value("normalize_embeddings", e.normalize_embeddings);
  return e;
}

ordered_json ann_to_json(const AnnConfig& a) {
  ordered_json j;
  j["margin"] = a.margin;
  j["k0"] = a.k0;
  j["rounding"] = a.rounding == Rounding::Ceil ? "ceil" : "floor";
  j["lambda"] = a.lambda;
  j["fixed_k"] = a.fixed_k;
  return j;
}

AnnConfig ann_from_json(const ordered_json& j) {
  reject_unknown_keys(j, {"margin", "k0", "rounding", "lambda", "fixed_k"}, "ann");
  AnnConfig a;
  a.margin = j.value("margin", a.margin);
  a.k0 = j.value("k0", a.k0);
  if (j.contains("rounding")) {
    const std::string r = j.at("rounding");
    if (r == "ceil")
      a.rounding = Rounding::Ceil;
    else if (r == "floor")
      a.rounding = Rounding::Floor;
    else
      throw Error(ErrorKind::Config, "config: rounding must be 'ceil' or 'floor'");
  }
  a.lambda = j.value("lambda", a.lambda);
  a.fixed_k = j.value("fixed_k", a.fixed_k);
  return a;
}

ordered_json occlusion_to_json(const OcclusionSpec& o) {
  ordered_json j;
  j["s"] = o.s;
  j["fill"] = o.fill == FillMode::UniformRandom ? "uniform-random" : "constant";
  j["fill_value"] = o.fill_value;
  j["seed"] = o.seed;
  return j;
}

OcclusionSpec occlusion_from_json(const ordered_json& j) {
  reject_unknown_keys(j, {"s", "fill", "fill_value", "seed"}, "occlusion_train");
  OcclusionSpec o;
  o.s = j.value("s", o.s);
  if (j.contains("fill")) {
    const std::string f = j.at("fill");
    if (f == "uniform-random")
      o.fill = FillMode::UniformRandom;
    else if (f == "constant")
      o.fill = FillMode::Constant;
    else
      throw Error(ErrorKind::Config, "config: fill must be 'uniform-random' or 'constant'");
  }
  o.fill_value = j.value("fill_value", o.fill_value);
  o.seed = j.value("seed", o.seed);
  return o;
}

}  // namespace

std::string config_to_json(const TrainConfig& c) {
  ordered_json j;
  j["encoder"] = encoder_to_json(c.encoder);
  j["ann"] = ann_to_json(c.ann);
  j["variant"] = loss_variant_name(c.variant);
  j["pk"] = ordered_json{{"p", c.pk.p}, {"k", c.pk.k}};
  j["data"] = ordered_json{{"num_ids", c.data.num_ids},
                           {"imgs_per_id", c.data.imgs_per_id},
                           {"noise_sigma", c.data.noise_sigma}};
  j["steps_per_epoch"] = c.steps_per_epoch;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["optimizer"] = optimizer_name(c.optimizer);
  j["seed"] = c.seed;
  if (c.occlusion_train)
    j["occlusion_train"] = occlusion_to_json(*c.occlusion_train);
  else
    j["occlusion_train"] = nullptr;
  j["occlusion_eval_s"] = c.occlusion_eval_s;
  return j.dump(2) + "\n";
}

TrainConfig config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::Format, std::string("config: malformed json: ") + e.what());
  }
  reject_unknown_keys(j,
                      {"encoder", "ann", "variant", "pk", "data", "steps_per_epoch", "epochs",
                       "learning_rate", "optimizer", "seed", "occlusion_train", "occlusion_eval_s"},
                      "top level");

  TrainConfig c;
  if (j.contains("encoder")) c.encoder = encoder_from_json(j.at("encoder"));
  if (j.contains("ann")) c.ann = ann_from_json(j.at("ann"));
  if (j.contains("variant")) c.variant = loss_variant_from_name(j.at("variant"));
  if (j.contains("pk")) {
    reject_unknown_keys(j.at("pk"), {"p", "k"}, "pk");
    c.pk.p = j.at("pk").value("p", c.pk.p);
    c.pk.k = j.at("pk").value("k", c.pk.k);
  }
  if (j.contains("data")) {
    reject_unknown_keys(j.at("data"), {"num_ids", "imgs_per_id", "noise_sigma"}, "data");
    c.data.num_ids = j.at("data").value("num_ids", c.data.num_ids);
    c.data.imgs_per_id = j.at("data").value("imgs_per_id", c.data.imgs_per_id);
    c.data.noise_sigma = j.at("data").value("noise_sigma", c.data.noise_sigma);
  }
  c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  if (j.contains("optimizer")) c.optimizer = optimizer_from_name(j.at("optimizer"));
  c.seed = j.value("seed", c.seed);
  if (j.contains("occlusion_train")) {
    if (j.at("occlusion_train").is_null())
      c.occlusion_train.reset();
    else
      c.occlusion_train = occlusion_from_json(j.at("occlusion_train"));
  }
  if (j.contains("occlusion_eval_s"))
    c.occlusion_eval_s = j.at("occlusion_eval_s").get<std::vector<double>>();

  c.finalize();
  return c;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot open config '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return config_from_json(text);
}

void save_config(const TrainConfig& config, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot write config '" + path + "'");
  f << config_to_json(config);
}

}  // namespace amde
