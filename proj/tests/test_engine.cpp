#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "amde/checkpoint.hpp"
#include "amde/config.hpp"
#include "amde/engine.hpp"
#include "amde/error.hpp"
#include "amde/rng.hpp"

using namespace amde;
namespace fs = std::filesystem;

namespace {

// Small regimen that trains in well under a second.
TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.encoder.input_channels = 1;
  cfg.encoder.input_height = 16;
  cfg.encoder.input_width = 8;
  cfg.encoder.feature_channels = 8;
  cfg.encoder.map_height = 2;
  cfg.encoder.map_width = 1;
  cfg.encoder.reduced_channels = 4;
  cfg.encoder.embed_dim = 8;
  cfg.encoder.num_classes = 4;
  cfg.data.num_ids = 4;
  cfg.data.imgs_per_id = 6;
  cfg.data.noise_sigma = 0.05;
  cfg.pk.p = 2;
  cfg.pk.k = 2;
  cfg.steps_per_epoch = 4;
  cfg.epochs = 2;
  cfg.seed = 11;
  cfg.occlusion_train.reset();  // most engine tests exercise the clean path
  cfg.finalize();
  return cfg;
}

}  // namespace

TEST_CASE("config json round trip is lossless and strict") {
  TrainConfig cfg = tiny_train_config();
  cfg.learning_rate = 0.000123456789;
  cfg.ann.margin = 0.37;
  cfg.occlusion_train = OcclusionSpec{0.25, FillMode::Constant, 0.5, 9};
  cfg.occlusion_eval_s = {0.0, 0.125, 0.6};

  const std::string text = config_to_json(cfg);
  TrainConfig back = config_from_json(text);
  CHECK(config_to_json(back) == text);  // byte-stable fixed point
  CHECK(back.learning_rate == cfg.learning_rate);
  CHECK(back.ann.margin == cfg.ann.margin);
  CHECK(back.occlusion_train.has_value());
  CHECK(back.occlusion_train->s == 0.25);
  CHECK(back.occlusion_eval_s == cfg.occlusion_eval_s);
  CHECK(back.encoder == cfg.encoder);

  CHECK_THROWS_AS(config_from_json("{\"bogus\": 1}"), Error);
  CHECK_THROWS_AS(config_from_json("{\"encoder\": {\"bogus\": 1}}"), Error);
  CHECK_THROWS_AS(config_from_json("not json"), Error);

  // Augmentation defaults on; an explicit null disables it.
  TrainConfig defaults;
  CHECK(defaults.occlusion_train.has_value());
  TrainConfig disabled = config_from_json("{\"occlusion_train\": null}");
  CHECK(!disabled.occlusion_train.has_value());
}

TEST_CASE("variant row names cover the nine-cell grid") {
  TrainConfig base = tiny_train_config();
  const auto names = ablation_variant_names();
  CHECK(names.size() == 9);
  for (const auto& name : names) {
    TrainConfig cfg = apply_variant(base, name);
    CHECK(cfg.variant_row_name() == name);
  }
  // RN_S and RNLSTM_S differ only in the local branch.
  TrainConfig a = apply_variant(base, "RN_S");
  TrainConfig b = apply_variant(base, "RNLSTM_S");
  CHECK(a.variant == b.variant);
  CHECK(a.encoder.local_branch != b.encoder.local_branch);
  CHECK_THROWS_AS(apply_variant(base, "RN_X"), Error);
}

TEST_CASE("crc32 matches the reference vector") {
  const char* s = "123456789";
  CHECK(crc32_ieee(reinterpret_cast<const unsigned char*>(s), 9) == 0xCBF43926u);
}

TEST_CASE("checkpoint round trip: bytes and tensors") {
  const auto dir = fs::temp_directory_path() / "amde_test_ckpt";
  fs::create_directories(dir);
  TrainConfig cfg = tiny_train_config();
  EncoderModel model = EncoderModel::init(cfg.encoder, 5);
  Checkpoint ckpt = checkpoint_from_model(model, cfg);
  ckpt.epoch = 3;
  ckpt.rng_state = 0x1234567890abcdefULL;
  ckpt.final_loss = 1.25;
  ckpt.clamp_events = 17;

  const auto p1 = (dir / "a.amde").string();
  const auto p2 = (dir / "b.amde").string();
  checkpoint_save(ckpt, p1);
  Checkpoint loaded = checkpoint_load(p1);
  checkpoint_save(loaded, p2);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);  // save -> load -> save is byte-identical

  CHECK(loaded.epoch == 3);
  CHECK(loaded.rng_state == ckpt.rng_state);
  CHECK(loaded.final_loss == 1.25);
  CHECK(loaded.clamp_events == 17);
  REQUIRE(loaded.tensors.size() == ckpt.tensors.size());
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
    CHECK(loaded.tensors[i].first == ckpt.tensors[i].first);
    CHECK(std::memcmp(loaded.tensors[i].second.data().data(), ckpt.tensors[i].second.data().data(),
                      ckpt.tensors[i].second.size() * sizeof(double)) == 0);
  }

  EncoderModel restored = model_from_checkpoint(loaded);
  auto orig = model.parameters();
  auto back = restored.parameters();
  for (std::size_t i = 0; i < orig.size(); ++i)
    CHECK(std::memcmp(orig[i].second.data().data(), back[i].second.data().data(),
                      orig[i].second.size() * sizeof(double)) == 0);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint corruption and version errors are distinct") {
  const auto dir = fs::temp_directory_path() / "amde_test_ckpt2";
  fs::create_directories(dir);
  TrainConfig cfg = tiny_train_config();
  Checkpoint ckpt = checkpoint_from_model(EncoderModel::init(cfg.encoder, 5), cfg);
  const auto path = (dir / "c.amde").string();
  checkpoint_save(ckpt, path);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  auto write_bytes = [&](const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << data;
  };

  // Flip one payload byte: checksum error.
  {
    std::string corrupt = bytes;
    corrupt[corrupt.size() / 2] ^= 0x01;
    write_bytes(corrupt);
    try {
      checkpoint_load(path);
      FAIL("expected checksum error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Checksum);
    }
  }

  // Bump the version field (and fix the CRC so only the version differs).
  {
    std::string versioned = bytes;
    versioned[4] = 2;
    const std::uint32_t crc =
        crc32_ieee(reinterpret_cast<const unsigned char*>(versioned.data()), versioned.size() - 4);
    std::memcpy(versioned.data() + versioned.size() - 4, &crc, 4);
    write_bytes(versioned);
    try {
      checkpoint_load(path);
      FAIL("expected version error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Version);
    }
  }

  // Truncate: the CRC (recomputed over the shorter prefix) flags it first,
  // unless the cut lands exactly so that parsing runs out of bytes; both are
  // reported as corruption, with distinct kinds.
  {
    std::string truncated = bytes.substr(0, bytes.size() / 3);
    write_bytes(truncated);
    try {
      checkpoint_load(path);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK((e.kind() == ErrorKind::Checksum || e.kind() == ErrorKind::Truncated));
    }
  }

  // Bad magic.
  {
    std::string magic = bytes;
    magic[0] = 'X';
    const std::uint32_t crc =
        crc32_ieee(reinterpret_cast<const unsigned char*>(magic.data()), magic.size() - 4);
    std::memcpy(magic.data() + magic.size() - 4, &crc, 4);
    write_bytes(magic);
    try {
      checkpoint_load(path);
      FAIL("expected format error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Format);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("training is deterministic and writes a parseable log") {
  TrainConfig cfg = tiny_train_config();
  TrainResult a = train(cfg);
  TrainResult b = train(cfg);
  CHECK(a.log == b.log);
  REQUIRE(a.checkpoint.tensors.size() == b.checkpoint.tensors.size());
  for (std::size_t i = 0; i < a.checkpoint.tensors.size(); ++i)
    CHECK(std::memcmp(a.checkpoint.tensors[i].second.data().data(),
                      b.checkpoint.tensors[i].second.data().data(),
                      a.checkpoint.tensors[i].second.size() * sizeof(double)) == 0);

  CHECK(a.log.find("epoch 1/2") != std::string::npos);
  CHECK(a.log.find("final loss") != std::string::npos);
  CHECK(a.epoch_losses.size() == 2);

  TrainConfig other = cfg;
  other.seed = 999;
  TrainResult c = train(other);
  CHECK(a.log != c.log);
}

TEST_CASE("lambda zero reduces training to the softmax-only trace") {
  TrainConfig ann_cfg = tiny_train_config();
  ann_cfg.variant = LossVariant::SoftmaxAnn;
  ann_cfg.ann.lambda = 0.0;
  TrainConfig soft_cfg = tiny_train_config();
  soft_cfg.variant = LossVariant::Softmax;

  TrainResult a = train(ann_cfg);
  TrainResult b = train(soft_cfg);
  REQUIRE(a.epoch_losses.size() == b.epoch_losses.size());
  for (std::size_t i = 0; i < a.epoch_losses.size(); ++i)
    CHECK(a.epoch_losses[i] == b.epoch_losses[i]);
  for (std::size_t i = 0; i < a.checkpoint.tensors.size(); ++i)
    CHECK(std::memcmp(a.checkpoint.tensors[i].second.data().data(),
                      b.checkpoint.tensors[i].second.data().data(),
                      a.checkpoint.tensors[i].second.size() * sizeof(double)) == 0);
}

TEST_CASE("training rejects mismatched datasets") {
  TrainConfig cfg = tiny_train_config();
  IdentityDataset wrong = generate_synthetic(4, 6, 0.05, 1, {1, 32, 16});
  CHECK_THROWS_AS(train(cfg, wrong), Error);
}

TEST_CASE("an overfit run drives the joint loss well below its start") {
  // Exactly 8 train images with P*K = 8: every step sees the same batch (in
  // shuffled order, which the loss ignores), so 200 steps must memorize it.
  TrainConfig cfg = tiny_train_config();
  cfg.data.num_ids = 4;
  cfg.data.imgs_per_id = 4;  // 2 train images per id
  cfg.pk.p = 4;
  cfg.pk.k = 2;
  cfg.steps_per_epoch = 10;
  cfg.epochs = 20;  // 200 steps on the same batch
  cfg.learning_rate = 3e-3;
  cfg.finalize();
  TrainResult result = train(cfg);
  CHECK(result.epoch_losses.back() < 0.1 * result.epoch_losses.front());
}

TEST_CASE("training aborts with diagnostics when the loss diverges") {
  TrainConfig cfg = tiny_train_config();
  cfg.optimizer = OptimizerKind::SgdMomentum;
  cfg.learning_rate = 1e25;  // deliberately explosive
  cfg.epochs = 3;
  cfg.steps_per_epoch = 10;
  try {
    train(cfg);
    FAIL("expected a non-finite abort");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Contract);
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("softmax-only loss decreases monotonically on a memorizable set") {
  TrainConfig cfg = tiny_train_config();
  cfg.variant = LossVariant::Softmax;
  cfg.data.num_ids = 4;
  cfg.data.imgs_per_id = 4;
  cfg.pk.p = 4;
  cfg.pk.k = 2;
  cfg.steps_per_epoch = 10;
  cfg.epochs = 15;
  cfg.learning_rate = 1e-3;
  cfg.finalize();
  TrainResult result = train(cfg);
  // After the first two epochs (20 steps), per-epoch means may rise by at
  // most the measured tolerance.
  for (std::size_t i = 3; i < result.epoch_losses.size(); ++i)
    CHECK(result.epoch_losses[i] <= result.epoch_losses[i - 1] + 1e-6);
}

TEST_CASE("evaluation rows: counting contract and the clean-query identity") {
  TrainConfig cfg = tiny_train_config();
  cfg.data.imgs_per_id = 8;
  cfg.finalize();
  IdentityDataset ds = generate_synthetic(cfg.data.num_ids, cfg.data.imgs_per_id, cfg.data.noise_sigma,
                                          cfg.seed, {1, 16, 8});
  TrainResult result = train(cfg, ds);

  const std::vector<double> levels{0.0, 0.3, 0.6};
  auto rows = evaluate_checkpoint(result.checkpoint, ds, levels);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(rows[i].s == levels[i]);

  // s = 0 equals evaluation without any occlusion step.
  auto clean = evaluate_checkpoint(result.checkpoint, ds, std::vector<double>{0.0});
  CHECK(clean[0].rank1 == rows[0].rank1);
  CHECK(clean[0].map == rows[0].map);

  // Reloaded checkpoint reproduces metrics exactly.
  const auto dir = fs::temp_directory_path() / "amde_test_eval";
  fs::create_directories(dir);
  const auto path = (dir / "ck.amde").string();
  checkpoint_save(result.checkpoint, path);
  auto rows2 = evaluate_checkpoint(checkpoint_load(path), ds, levels);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows2[i].rank1 == rows[i].rank1);
    CHECK(rows2[i].rank5 == rows[i].rank5);
    CHECK(rows2[i].map == rows[i].map);
  }
  fs::remove_all(dir);
}

TEST_CASE("untrained models sit at chance on an unlearnable 32-id dataset") {
  // High noise drowns the identity signal, so ranking relevance reduces to
  // chance; this calibrates the protocol against query/gallery leakage.
  TrainConfig cfg = tiny_train_config();
  cfg.data.num_ids = 32;
  cfg.data.imgs_per_id = 8;
  cfg.data.noise_sigma = 25.0;
  cfg.encoder.num_classes = 32;
  cfg.finalize();

  double mean_rank1 = 0.0;
  const int seeds = 5;
  for (int i = 0; i < seeds; ++i) {
    TrainConfig c = cfg;
    c.seed = 100 + static_cast<std::uint64_t>(i);
    IdentityDataset ds = generate_synthetic(c.data.num_ids, c.data.imgs_per_id, c.data.noise_sigma,
                                            c.seed, {1, 16, 8});
    EncoderModel model = EncoderModel::init(c.encoder, c.seed);
    auto rows = evaluate(model, c, ds, std::vector<double>{0.0}, 0.0, 0);
    mean_rank1 += rows[0].rank1;
  }
  mean_rank1 /= seeds;
  const double chance = 1.0 / 32.0;
  CHECK(mean_rank1 > chance - 0.04);
  CHECK(mean_rank1 < chance + 0.04);
}

TEST_CASE("evaluation rejects datasets that do not match the checkpoint") {
  TrainConfig cfg = tiny_train_config();
  EncoderModel model = EncoderModel::init(cfg.encoder, 1);
  IdentityDataset wrong = generate_synthetic(4, 6, 0.05, 1, {1, 32, 16});
  try {
    evaluate(model, cfg, wrong, std::vector<double>{0.0}, 0.0, 0);
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
}

TEST_CASE("evaluation honors AMDE_THREADS without changing results") {
  TrainConfig cfg = tiny_train_config();
  IdentityDataset ds = generate_synthetic(cfg.data.num_ids, cfg.data.imgs_per_id, cfg.data.noise_sigma,
                                          cfg.seed, {1, 16, 8});
  EncoderModel model = EncoderModel::init(cfg.encoder, 3);
  auto single = evaluate(model, cfg, ds, std::vector<double>{0.0, 0.4}, 0.0, 0);
  setenv("AMDE_THREADS", "4", 1);
  auto parallel = evaluate(model, cfg, ds, std::vector<double>{0.0, 0.4}, 0.0, 0);
  unsetenv("AMDE_THREADS");
  REQUIRE(single.size() == parallel.size());
  for (std::size_t i = 0; i < single.size(); ++i) {
    CHECK(single[i].rank1 == parallel[i].rank1);
    CHECK(single[i].rank5 == parallel[i].rank5);
    CHECK(single[i].map == parallel[i].map);
  }
}

TEST_CASE("ablation grid: row counts, config contract, reproducibility") {
  TrainConfig base = tiny_train_config();
  base.epochs = 1;
  base.steps_per_epoch = 2;
  AblateOptions options;
  options.seeds = 2;
  options.occlusion_levels = {0.0, 0.3};

  auto rows = ablate(base, options);
  // 9 variants x 2 seeds x 2 levels per-seed rows + 9 x 2 x 2 aggregate rows.
  const std::size_t per_seed = 9 * 2 * 2;
  const std::size_t aggregates = 9 * 2 * 2;
  REQUIRE(rows.size() == per_seed + aggregates);

  int per_variant = 0;
  for (const auto& r : rows) {
    if (r.variant == "RNLSTM_A" && r.seed != "mean" && r.seed != "stddev") ++per_variant;
  }
  CHECK(per_variant == 4);  // 2 seeds x 2 levels

  auto rows2 = ablate(base, options);
  CHECK(metrics_csv_string(rows) == metrics_csv_string(rows2));
}

TEST_CASE("ablation records failed cells and keeps going") {
  TrainConfig base = tiny_train_config();
  base.pk.p = 6;  // more identities per batch than the dataset has
  AblateOptions options;
  options.seeds = 1;
  options.occlusion_levels = {0.0};
  auto rows = ablate(base, options);
  REQUIRE(rows.size() == 9);  // one failed row per variant, no aggregates
  for (const auto& r : rows) CHECK(std::isnan(r.rank1));
}
