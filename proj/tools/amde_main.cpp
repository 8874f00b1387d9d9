#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "amde/checkpoint.hpp"
#include "amde/config.hpp"
#include "amde/data.hpp"
#include "amde/engine.hpp"
#include "amde/error.hpp"
#include "amde/eval.hpp"
#include "amde/grad_suite.hpp"

namespace fs = std::filesystem;
using namespace amde;

namespace {

std::vector<double> parse_levels(const std::string& csv) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t next = csv.find(',', pos);
    if (next == std::string::npos) next = csv.size();
    out.push_back(std::stod(csv.substr(pos, next - pos)));
    pos = next + 1;
  }
  if (out.empty()) throw Error(ErrorKind::Config, "occlusion list is empty");
  return out;
}

int run_gen_data(int ids, int per_id, std::uint64_t seed, double noise_sigma,
                 const std::string& shape_csv, const std::string& out) {
  Shape shape;
  for (double v : parse_levels(shape_csv)) shape.push_back(static_cast<int>(v));
  IdentityDataset ds = generate_synthetic(ids, per_id, noise_sigma, seed, shape);
  export_dataset(ds, out);
  std::printf("wrote %zu images (%d ids x %d) to %s\n", ds.samples.size(), ids, per_id, out.c_str());
  return 0;
}

int run_train(const std::string& config_path, const std::string& out_dir) {
  TrainConfig config = load_config(config_path);
  fs::create_directories(out_dir);

  TrainResult result = train(config);
  checkpoint_save(result.checkpoint, (fs::path(out_dir) / "checkpoint.amde").string());
  {
    std::ofstream log(fs::path(out_dir) / "train_log.txt", std::ios::trunc);
    log << result.log;
  }
  save_config(config, (fs::path(out_dir) / "config.json").string());
  std::printf("trained %s seed %llu: final loss %.6f, clamp events %ld\n",
              config.variant_row_name().c_str(), static_cast<unsigned long long>(config.seed),
              result.checkpoint.final_loss, result.checkpoint.clamp_events);
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& occlusion,
             const std::string& out_csv) {
  Checkpoint ckpt = checkpoint_load(ckpt_path);
  IdentityDataset dataset = import_dataset(data_dir);
  const auto levels = parse_levels(occlusion);
  auto rows = evaluate_checkpoint(ckpt, dataset, levels);
  write_metrics_csv(out_csv, rows);
  for (const auto& r : rows)
    std::printf("%s seed %s s=%.2f rank1 %.4f rank5 %.4f mAP %.4f\n", r.variant.c_str(), r.seed.c_str(),
                r.s, r.rank1, r.rank5, r.map);
  return 0;
}

int run_ablate(const std::string& config_path, int seeds, const std::string& occlusion,
               const std::string& out_csv) {
  TrainConfig base = load_config(config_path);
  AblateOptions options;
  options.seeds = seeds;
  options.occlusion_levels = parse_levels(occlusion);
  auto rows = ablate(base, options);
  write_metrics_csv(out_csv, rows);
  std::printf("ablation grid written to %s (%zu rows)\n", out_csv.c_str(), rows.size());
  return 0;
}

int run_gradcheck(bool full) {
  const int cases = full ? 20 : 5;
  auto entries = run_gradient_suite(cases);
  bool ok = true;
  for (const auto& e : entries) {
    std::printf("%-20s cases %3d  max rel err %.3e  tol %.0e  %s\n", e.op.c_str(), e.cases,
                e.max_rel_err, e.tolerance, e.pass() ? "ok" : "FAIL");
    ok = ok && e.pass();
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive metric deep embedding engine"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate and export a synthetic identity dataset");
  int ids = 32, per_id = 20;
  std::uint64_t gen_seed = 1;
  double noise_sigma = 0.1;
  std::string gen_out, gen_shape = "1,64,32";
  gen->add_option("--ids", ids, "number of identities")->required();
  gen->add_option("--per-id", per_id, "images per identity")->required();
  gen->add_option("--seed", gen_seed, "generation seed")->required();
  gen->add_option("--noise-sigma", noise_sigma, "pixel noise level");
  gen->add_option("--shape", gen_shape, "image shape as channels,height,width");
  gen->add_option("--out", gen_out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train a model from a config file");
  std::string train_config, train_out;
  tr->add_option("--config", train_config, "config json")->required();
  tr->add_option("--out", train_out, "output directory")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint against a dataset directory");
  std::string eval_ckpt, eval_data, eval_occ = "0", eval_out;
  ev->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  ev->add_option("--data", eval_data, "dataset directory")->required();
  ev->add_option("--occlusion", eval_occ, "comma-separated occlusion levels");
  ev->add_option("--out", eval_out, "metrics csv path")->required();

  auto* ab = app.add_subcommand("ablate", "run the nine-variant grid over several seeds");
  std::string ablate_config, ablate_occ = "0,0.3,0.6", ablate_out;
  int seeds = 3;
  ab->add_option("--config", ablate_config, "base config json")->required();
  ab->add_option("--seeds", seeds, "seeds per variant");
  ab->add_option("--occlusion", ablate_occ, "comma-separated occlusion levels");
  ab->add_option("--out", ablate_out, "consolidated csv path")->required();

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  bool full = false;
  gc->add_flag("--full", full, "run the acceptance-grade case count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return run_gen_data(ids, per_id, gen_seed, noise_sigma, gen_shape, gen_out);
    if (tr->parsed()) return run_train(train_config, train_out);
    if (ev->parsed()) return run_eval(eval_ckpt, eval_data, eval_occ, eval_out);
    if (ab->parsed()) return run_ablate(ablate_config, seeds, ablate_occ, ablate_out);
    if (gc->parsed()) return run_gradcheck(full);
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", error_kind_name(e.kind()), e.what());
    return 2 + static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
