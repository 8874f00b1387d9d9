#include "amde/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "amde/error.hpp"

namespace amde {

std::vector<int> rank_gallery(const Tensor& query_emb, const Tensor& gallery_embs) {
  if (query_emb.rank() != 1 || gallery_embs.rank() != 2 || gallery_embs.dim(1) != query_emb.dim(0))
    throw Error(ErrorKind::Dimension, "rank_gallery: query " + shape_str(query_emb.shape()) +
                                          " incompatible with gallery " + shape_str(gallery_embs.shape()));
  const int g = gallery_embs.dim(0);
  const int d = query_emb.dim(0);
  std::vector<std::pair<double, int>> scored(static_cast<std::size_t>(g));
  const double* q = query_emb.data().data();
  for (int i = 0; i < g; ++i) {
    const double* row = gallery_embs.data().data() + static_cast<std::size_t>(i) * d;
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      const double diff = q[j] - row[j];
      s += diff * diff;
    }
    scored[static_cast<std::size_t>(i)] = {s, i};
  }
  std::sort(scored.begin(), scored.end());  // pair ordering = (distance, index)
  std::vector<int> order(scored.size());
  for (std::size_t i = 0; i < scored.size(); ++i) order[i] = scored[i].second;
  return order;
}

RankingResult rank_and_flag(const Tensor& query_emb, const Tensor& gallery_embs, int query_label,
                            std::span<const int> gallery_labels) {
  RankingResult r;
  r.order = rank_gallery(query_emb, gallery_embs);
  r.relevance.reserve(r.order.size());
  for (int idx : r.order) r.relevance.push_back(gallery_labels[static_cast<std::size_t>(idx)] == query_label);
  return r;
}

namespace {

void validate_results(std::span<const RankingResult> results) {
  if (results.empty()) throw Error(ErrorKind::Contract, "evaluation: no queries");
  for (std::size_t q = 0; q < results.size(); ++q) {
    if (std::none_of(results[q].relevance.begin(), results[q].relevance.end(), [](bool b) { return b; }))
      throw Error(ErrorKind::Protocol,
                  "evaluation: query " + std::to_string(q) + " has no relevant gallery item");
  }
}

}  // namespace

double cmc_at_k(std::span<const RankingResult> results, int k) {
  if (k < 1) throw Error(ErrorKind::Contract, "cmc_at_k: k must be at least 1");
  validate_results(results);
  int hits = 0;
  for (const auto& r : results) {
    const int upto = std::min<int>(k, static_cast<int>(r.relevance.size()));
    for (int i = 0; i < upto; ++i) {
      if (r.relevance[static_cast<std::size_t>(i)]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double mean_average_precision(std::span<const RankingResult> results) {
  validate_results(results);
  double total = 0.0;
  for (const auto& r : results) {
    int relevant_seen = 0;
    double ap = 0.0;
    for (std::size_t i = 0; i < r.relevance.size(); ++i) {
      if (r.relevance[i]) {
        ++relevant_seen;
        ap += static_cast<double>(relevant_seen) / static_cast<double>(i + 1);
      }
    }
    total += ap / relevant_seen;
  }
  return total / static_cast<double>(results.size());
}

namespace {

std::string fmt(double v, const char* spec) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

std::string metrics_csv_string(std::span<const MetricsRow> rows) {
  std::string out = "variant,seed,s,rank1,rank5,map,loss_final,clamp_events\n";
  for (const auto& r : rows) {
    out += r.variant;
    out += ',';
    out += r.seed;
    out += ',';
    out += fmt(r.s, "%.4f");
    out += ',';
    out += fmt(r.rank1, "%.6f");
    out += ',';
    out += fmt(r.rank5, "%.6f");
    out += ',';
    out += fmt(r.map, "%.6f");
    out += ',';
    out += fmt(r.loss_final, "%.6f");
    out += ',';
    out += std::to_string(r.clamp_events);
    out += '\n';
  }
  return out;
}

void write_metrics_csv(const std::string& path, std::span<const MetricsRow> rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot write metrics csv '" + path + "'");
  f << metrics_csv_string(rows);
}

}  // namespace amde
