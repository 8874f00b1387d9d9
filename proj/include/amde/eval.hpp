#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "amde/tensor.hpp"

namespace amde {

// One query's view of the gallery: every gallery index ordered by ascending
// squared embedding distance (ties broken by lower index) with same-identity
// flags along that order.
struct RankingResult {
  std::vector<int> order;
  std::vector<bool> relevance;
};

// Indices of all gallery rows sorted by squared Euclidean distance to the
// query, ascending, ties by lower index.
std::vector<int> rank_gallery(const Tensor& query_emb, const Tensor& gallery_embs);

RankingResult rank_and_flag(const Tensor& query_emb, const Tensor& gallery_embs, int query_label,
                            std::span<const int> gallery_labels);

// Fraction of queries with at least one relevant item in the top-k.
double cmc_at_k(std::span<const RankingResult> results, int k);

// Mean over queries of (mean over relevant items of precision at their rank).
double mean_average_precision(std::span<const RankingResult> results);

struct MetricsRow {
  std::string variant;
  std::string seed;  // numeric for per-run rows; "mean"/"stddev" for aggregates
  double s = 0.0;
  double rank1 = 0.0;
  double rank5 = 0.0;
  double map = 0.0;
  double loss_final = 0.0;
  long clamp_events = 0;
};

// Stable fixed-precision rendering; identical rows produce identical bytes.
std::string metrics_csv_string(std::span<const MetricsRow> rows);
void write_metrics_csv(const std::string& path, std::span<const MetricsRow> rows);

}  // namespace amde
