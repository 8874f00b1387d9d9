#include "amde/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <thread>

#include "amde/error.hpp"
#include "amde/ops.hpp"

namespace amde {

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, std::vector<Tensor> params)
    : kind_(kind), lr_(learning_rate), params_(std::move(params)) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(params_[i].size(), 0.0);
    if (kind_ == OptimizerKind::Adam) v_[i].assign(params_[i].size(), 0.0);
  }
}

void Optimizer::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

void Optimizer::step() {
  ++t_;
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, momentum = 0.9;
  const double bias1 = 1.0 - std::pow(beta1, t_);
  const double bias2 = 1.0 - std::pow(beta2, t_);

  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    auto values = p.mutable_data();
    const auto grads = p.grad();
    auto& m = m_[i];
    if (kind_ == OptimizerKind::Adam) {
      auto& v = v_[i];
      for (std::size_t j = 0; j < values.size(); ++j) {
        m[j] = beta1 * m[j] + (1.0 - beta1) * grads[j];
        v[j] = beta2 * v[j] + (1.0 - beta2) * grads[j] * grads[j];
        values[j] -= lr_ * (m[j] / bias1) / (std::sqrt(v[j] / bias2) + eps);
      }
    } else {
      for (std::size_t j = 0; j < values.size(); ++j) {
        m[j] = momentum * m[j] + grads[j];
        values[j] -= lr_ * m[j];
      }
    }
  }
}

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// Fixed-width histogram text: "1:200 2:1400" for K, half-open 0.5 bins for H.
std::string k_histogram(const std::vector<int>& ks) {
  if (ks.empty()) return "-";
  std::map<int, int> bins;
  for (int k : ks) bins[k]++;
  std::string out;
  for (const auto& [k, n] : bins) {
    if (!out.empty()) out += ' ';
    out += std::to_string(k) + ":" + std::to_string(n);
  }
  return out;
}

std::string h_histogram(const std::vector<double>& hs) {
  if (hs.empty()) return "-";
  std::map<int, int> bins;
  for (double h : hs) bins[static_cast<int>(h / 0.5)]++;
  std::string out;
  for (const auto& [bin, n] : bins) {
    if (!out.empty()) out += ' ';
    out += fmt("%.1f", bin * 0.5) + ":" + std::to_string(n);
  }
  return out;
}

int eval_threads() {
  const char* env = std::getenv("AMDE_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

// Embeds a set of images with a frozen model, optionally fanning out across
// threads. Output order matches input order regardless of thread count.
std::vector<Tensor> embed_images(const EncoderModel& model, const std::vector<Tensor>& images) {
  std::vector<Tensor> out(images.size());
  const int threads = std::min<int>(eval_threads(), static_cast<int>(images.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < images.size(); ++i) out[i] = forward(model, images[i]).embedding;
    return out;
  }
  std::vector<std::thread> pool;
  std::size_t chunk = (images.size() + threads - 1) / static_cast<std::size_t>(threads);
  for (int t = 0; t < threads; ++t) {
    const std::size_t lo = static_cast<std::size_t>(t) * chunk;
    const std::size_t hi = std::min(images.size(), lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&model, &images, &out, lo, hi]() {
      for (std::size_t i = lo; i < hi; ++i) out[i] = forward(model, images[i]).embedding;
    });
  }
  for (auto& th : pool) th.join();
  return out;
}

Tensor stack_embeddings(const std::vector<Tensor>& rows) { return stack_rows(rows); }

}  // namespace

TrainResult train(const TrainConfig& config) {
  TrainConfig cfg = config;
  cfg.finalize();
  const Shape image_shape{cfg.encoder.input_channels, cfg.encoder.input_height, cfg.encoder.input_width};
  IdentityDataset dataset =
      generate_synthetic(cfg.data.num_ids, cfg.data.imgs_per_id, cfg.data.noise_sigma, cfg.seed, image_shape);
  return train(cfg, dataset);
}

TrainResult train(const TrainConfig& config, const IdentityDataset& dataset) {
  TrainConfig cfg = config;
  cfg.finalize();
  if (dataset.image_shape !=
      Shape{cfg.encoder.input_channels, cfg.encoder.input_height, cfg.encoder.input_width})
    throw Error(ErrorKind::Config, "train: dataset image shape " + shape_str(dataset.image_shape) +
                                       " does not match the encoder input");

  EncoderModel model = EncoderModel::init(cfg.encoder, cfg.seed);
  std::vector<Tensor> params;
  for (const auto& [name, t] : model.parameters()) params.push_back(t);
  Optimizer opt(cfg.optimizer, cfg.learning_rate, params);

  const int batch = cfg.pk.batch_size();
  std::string log;
  log += "amde train log\n";
  log += "variant " + cfg.variant_row_name() + " seed " + std::to_string(cfg.seed) + "\n";
  log += "epochs " + std::to_string(cfg.epochs) + " steps_per_epoch " + std::to_string(cfg.steps_per_epoch) +
         " batch " + std::to_string(batch) + " lr " + fmt("%.6f", cfg.learning_rate) + " optimizer " +
         optimizer_name(cfg.optimizer) + "\n";

  TrainResult result;
  long total_clamps = 0;
  double last_epoch_loss = std::numeric_limits<double>::quiet_NaN();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0, epoch_xent = 0.0, epoch_metric = 0.0;
    long epoch_clamps = 0;
    std::vector<double> epoch_entropies;
    std::vector<int> epoch_ks;

    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      Rng step_rng(derive_seed(cfg.seed, 0x626174ULL, static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(step)));
      const std::vector<int> indices = pk_sample(dataset, cfg.pk, step_rng);

      std::vector<Tensor> images;
      images.reserve(indices.size());
      for (std::size_t i = 0; i < indices.size(); ++i) {
        Tensor img = dataset.samples[static_cast<std::size_t>(indices[i])].image;
        if (cfg.occlusion_train && cfg.occlusion_train->s > 0.0) {
          Rng erase_rng(derive_seed(cfg.seed ^ cfg.occlusion_train->seed, 0x657261ULL,
                                    static_cast<std::uint64_t>(epoch) * 100000 + static_cast<std::uint64_t>(step),
                                    static_cast<std::uint64_t>(i)));
          img = random_erase(img, *cfg.occlusion_train, erase_rng);
        }
        images.push_back(std::move(img));
      }

      Tape tape;
      TapeScope scope(tape);

      std::vector<Tensor> emb_rows, logit_rows;
      emb_rows.reserve(images.size());
      logit_rows.reserve(images.size());
      BatchEmbeddings be;
      for (std::size_t i = 0; i < images.size(); ++i) {
        EncoderOutput out = forward(model, images[i]);
        emb_rows.push_back(out.embedding);
        logit_rows.push_back(out.logits);
        be.labels.push_back(dataset.samples[static_cast<std::size_t>(indices[i])].label);
      }
      be.embeddings = stack_embeddings(emb_rows);
      be.logits = stack_rows(logit_rows);

      JointBreakdown breakdown = joint_loss(be, cfg.ann, cfg.variant);
      const double loss_value = breakdown.total.item();
      if (!std::isfinite(loss_value))
        throw Error(ErrorKind::Contract, "train: non-finite loss at epoch " + std::to_string(epoch) +
                                             " step " + std::to_string(step));

      opt.zero_grad();
      tape.backward(breakdown.total);
      opt.step();

      for (const auto& p : params) {
        if (!p.all_finite())
          throw Error(ErrorKind::Contract, "train: non-finite parameter after step, epoch " +
                                               std::to_string(epoch) + " step " + std::to_string(step));
      }

      epoch_loss += loss_value;
      epoch_xent += breakdown.xent_value;
      epoch_metric += breakdown.metric_value;
      epoch_clamps += breakdown.ann.clamp_events;
      epoch_entropies.insert(epoch_entropies.end(), breakdown.ann.entropies.begin(),
                             breakdown.ann.entropies.end());
      epoch_ks.insert(epoch_ks.end(), breakdown.ann.ks.begin(), breakdown.ann.ks.end());
    }

    const double steps = static_cast<double>(cfg.steps_per_epoch);
    last_epoch_loss = epoch_loss / steps;
    total_clamps += epoch_clamps;
    result.epoch_losses.push_back(last_epoch_loss);
    log += "epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.epochs) + " loss " +
           fmt("%.6f", last_epoch_loss) + " xent " + fmt("%.6f", epoch_xent / steps) + " metric " +
           fmt("%.6f", epoch_metric / steps) + " clamps " + std::to_string(epoch_clamps) + " H " +
           h_histogram(epoch_entropies) + " K " + k_histogram(epoch_ks) + "\n";
  }

  log += "final loss " + fmt("%.6f", last_epoch_loss) + " clamp_events " + std::to_string(total_clamps) +
         "\n";

  result.checkpoint = checkpoint_from_model(model, cfg);
  result.checkpoint.epoch = cfg.epochs;
  result.checkpoint.rng_state = derive_seed(cfg.seed, 0x726e67ULL, static_cast<std::uint64_t>(cfg.epochs));
  result.checkpoint.final_loss = last_epoch_loss;
  result.checkpoint.clamp_events = total_clamps;
  result.log = std::move(log);
  return result;
}

std::vector<MetricsRow> evaluate(const EncoderModel& model, const TrainConfig& config,
                                 const IdentityDataset& dataset, std::span<const double> occlusion_levels,
                                 double loss_final, long clamp_events) {
  if (dataset.image_shape !=
      Shape{config.encoder.input_channels, config.encoder.input_height, config.encoder.input_width})
    throw Error(ErrorKind::Config, "evaluate: dataset image shape " + shape_str(dataset.image_shape) +
                                       " does not match the checkpoint's encoder input");
  dataset.validate();

  const auto query_idx = dataset.indices_of(Split::Query);
  const auto gallery_idx = dataset.indices_of(Split::Gallery);
  if (query_idx.empty() || gallery_idx.empty())
    throw Error(ErrorKind::Protocol, "evaluate: dataset has no query/gallery split");

  std::vector<Tensor> gallery_images;
  std::vector<int> gallery_labels;
  for (int idx : gallery_idx) {
    gallery_images.push_back(dataset.samples[static_cast<std::size_t>(idx)].image);
    gallery_labels.push_back(dataset.samples[static_cast<std::size_t>(idx)].label);
  }
  const Tensor gallery_embs = stack_embeddings(embed_images(model, gallery_images));

  std::vector<MetricsRow> rows;
  for (std::size_t level = 0; level < occlusion_levels.size(); ++level) {
    const double s = occlusion_levels[level];
    OcclusionSpec spec;
    spec.s = s;

    std::vector<Tensor> query_images;
    std::vector<int> query_labels;
    for (std::size_t q = 0; q < query_idx.size(); ++q) {
      const auto& sample = dataset.samples[static_cast<std::size_t>(query_idx[q])];
      Tensor img = sample.image;
      if (s > 0.0) {
        Rng rng(derive_seed(config.seed, 0x6576616cULL, level, q));
        img = random_erase(img, spec, rng);
      }
      query_images.push_back(std::move(img));
      query_labels.push_back(sample.label);
    }
    const std::vector<Tensor> query_embs = embed_images(model, query_images);

    std::vector<RankingResult> results;
    results.reserve(query_embs.size());
    for (std::size_t q = 0; q < query_embs.size(); ++q)
      results.push_back(rank_and_flag(query_embs[q], gallery_embs, query_labels[q], gallery_labels));

    MetricsRow row;
    row.variant = config.variant_row_name();
    row.seed = std::to_string(config.seed);
    row.s = s;
    row.rank1 = cmc_at_k(results, 1);
    row.rank5 = cmc_at_k(results, 5);
    row.map = mean_average_precision(results);
    row.loss_final = loss_final;
    row.clamp_events = clamp_events;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<MetricsRow> evaluate_checkpoint(const Checkpoint& ckpt, const IdentityDataset& dataset,
                                            std::span<const double> occlusion_levels) {
  EncoderModel model = model_from_checkpoint(ckpt);
  return evaluate(model, ckpt.config, dataset, occlusion_levels, ckpt.final_loss, ckpt.clamp_events);
}

std::vector<MetricsRow> ablate(const TrainConfig& base, const AblateOptions& options) {
  if (options.seeds < 1) throw Error(ErrorKind::Config, "ablate: need at least one seed");
  std::vector<MetricsRow> rows;

  // cell accumulator keyed by (variant, s)
  std::map<std::pair<std::string, double>, std::vector<MetricsRow>> cells;

  for (const std::string& name : ablation_variant_names()) {
    for (int i = 0; i < options.seeds; ++i) {
      TrainConfig cfg = apply_variant(base, name);
      cfg.seed = base.seed + static_cast<std::uint64_t>(i);
      try {
        TrainResult result = train(cfg);
        const Shape shape{cfg.encoder.input_channels, cfg.encoder.input_height, cfg.encoder.input_width};
        IdentityDataset dataset = generate_synthetic(cfg.data.num_ids, cfg.data.imgs_per_id,
                                                     cfg.data.noise_sigma, cfg.seed, shape);
        auto cell_rows = evaluate_checkpoint(result.checkpoint, dataset, options.occlusion_levels);
        for (auto& row : cell_rows) {
          cells[{row.variant, row.s}].push_back(row);
          rows.push_back(std::move(row));
        }
      } catch (const Error& e) {
        // Record the failed cell and keep going.
        for (double s : options.occlusion_levels) {
          MetricsRow row;
          row.variant = name;
          row.seed = std::to_string(cfg.seed);
          row.s = s;
          row.rank1 = row.rank5 = row.map = row.loss_final = std::numeric_limits<double>::quiet_NaN();
          rows.push_back(std::move(row));
        }
      }
    }
  }

  // Aggregates in grid order.
  for (const std::string& name : ablation_variant_names()) {
    for (double s : options.occlusion_levels) {
      const auto it = cells.find({name, s});
      if (it == cells.end()) continue;
      const auto& cell = it->second;
      auto agg = [&cell](auto pick) {
        double mean = 0.0;
        for (const auto& r : cell) mean += pick(r);
        mean /= static_cast<double>(cell.size());
        double var = 0.0;
        for (const auto& r : cell) var += (pick(r) - mean) * (pick(r) - mean);
        var /= static_cast<double>(cell.size());
        return std::pair<double, double>{mean, std::sqrt(var)};
      };
      const auto [r1m, r1s] = agg([](const MetricsRow& r) { return r.rank1; });
      const auto [r5m, r5s] = agg([](const MetricsRow& r) { return r.rank5; });
      const auto [mpm, mps] = agg([](const MetricsRow& r) { return r.map; });
      const auto [lfm, lfs] = agg([](const MetricsRow& r) { return r.loss_final; });

      MetricsRow mean_row;
      mean_row.variant = name;
      mean_row.seed = "mean";
      mean_row.s = s;
      mean_row.rank1 = r1m;
      mean_row.rank5 = r5m;
      mean_row.map = mpm;
      mean_row.loss_final = lfm;
      mean_row.clamp_events = 0;
      MetricsRow std_row = mean_row;
      std_row.seed = "stddev";
      std_row.rank1 = r1s;
      std_row.rank5 = r5s;
      std_row.map = mps;
      std_row.loss_final = lfs;
      rows.push_back(std::move(mean_row));
      rows.push_back(std::move(std_row));
    }
  }
  return rows;
}

}  // namespace amde
