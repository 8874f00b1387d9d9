#pragma once

// Independent reference implementations used only by tests. Everything here
// is written as plain scalar loops against the mathematical definitions, on
// purpose: these must not share code with the library paths they check.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace oracle {

// Plain triple-loop matrix product, row-major.
inline std::vector<double> matmul(std::span<const double> a, std::span<const double> b, int m, int k,
                                  int n) {
  std::vector<double> c(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int t = 0; t < k; ++t)
        s += a[static_cast<std::size_t>(i) * k + t] * b[static_cast<std::size_t>(t) * n + j];
      c[static_cast<std::size_t>(i) * n + j] = s;
    }
  return c;
}

// Arithmetic mean of one row of a row-major matrix.
inline double row_mean(std::span<const double> x, int cols, int r) {
  double s = 0.0;
  for (int j = 0; j < cols; ++j) s += x[static_cast<std::size_t>(r) * cols + j];
  return s / cols;
}

// One LSTM step transcribed as scalar loops: gate preactivations from
// wl [4e x (c+e)] applied to the stacked input [s; h_prev] plus bias, split
// into (i, f, o, g) blocks, then d = f.d_prev + i.g and h = o.tanh(d).
struct LstmState {
  std::vector<double> h;
  std::vector<double> d;
};

inline LstmState lstm_step(std::span<const double> s, std::span<const double> h_prev,
                           std::span<const double> d_prev, std::span<const double> wl,
                           std::span<const double> bias, int c, int e) {
  const int cols = c + e;
  std::vector<double> stacked(static_cast<std::size_t>(cols));
  for (int j = 0; j < c; ++j) stacked[static_cast<std::size_t>(j)] = s[static_cast<std::size_t>(j)];
  for (int j = 0; j < e; ++j) stacked[static_cast<std::size_t>(c + j)] = h_prev[static_cast<std::size_t>(j)];

  std::vector<double> z(static_cast<std::size_t>(4 * e), 0.0);
  for (int r = 0; r < 4 * e; ++r) {
    double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(r)];
    for (int j = 0; j < cols; ++j) acc += wl[static_cast<std::size_t>(r) * cols + j] * stacked[static_cast<std::size_t>(j)];
    z[static_cast<std::size_t>(r)] = acc;
  }

  LstmState out;
  out.h.resize(static_cast<std::size_t>(e));
  out.d.resize(static_cast<std::size_t>(e));
  for (int j = 0; j < e; ++j) {
    const double zi = z[static_cast<std::size_t>(j)];
    const double zf = z[static_cast<std::size_t>(e + j)];
    const double zo = z[static_cast<std::size_t>(2 * e + j)];
    const double zg = z[static_cast<std::size_t>(3 * e + j)];
    const double gi = 1.0 / (1.0 + std::exp(-zi));
    const double gf = 1.0 / (1.0 + std::exp(-zf));
    const double go = 1.0 / (1.0 + std::exp(-zo));
    const double gg = std::tanh(zg);
    const double d = gf * d_prev[static_cast<std::size_t>(j)] + gi * gg;
    out.d[static_cast<std::size_t>(j)] = d;
    out.h[static_cast<std::size_t>(j)] = go * std::tanh(d);
  }
  return out;
}

// Runs the recurrence over a sequence stored as seq[t][*] and returns h_T.
inline std::vector<double> lstm_encode(const std::vector<std::vector<double>>& seq,
                                       std::span<const double> wl, std::span<const double> bias, int c,
                                       int e) {
  LstmState st;
  st.h.assign(static_cast<std::size_t>(e), 0.0);
  st.d.assign(static_cast<std::size_t>(e), 0.0);
  for (const auto& s : seq) st = lstm_step(s, st.h, st.d, wl, bias, c, e);
  return st.h;
}

// Squared Euclidean distance between two rows of a row-major matrix.
inline double sqdist(std::span<const double> e, int d, int a, int b) {
  double s = 0.0;
  for (int j = 0; j < d; ++j) {
    const double diff = e[static_cast<std::size_t>(a) * d + j] - e[static_cast<std::size_t>(b) * d + j];
    s += diff * diff;
  }
  return s;
}

// ANN loss by full enumeration: per anchor, sort positive distances
// descending and negative distances ascending (ties by lower index), average
// the first k of each, hinge at the margin, and sum over anchors.
inline double ann_loss(std::span<const double> emb, int d, std::span<const int> labels,
                       std::span<const int> ks, double margin) {
  const int b = static_cast<int>(labels.size());
  double total = 0.0;
  for (int a = 0; a < b; ++a) {
    std::vector<std::pair<double, int>> pos, neg;
    for (int j = 0; j < b; ++j) {
      if (j == a) continue;
      const double dist = sqdist(emb, d, a, j);
      if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(a)])
        pos.emplace_back(dist, j);
      else
        neg.emplace_back(dist, j);
    }
    std::sort(pos.begin(), pos.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second < y.second;
    });
    std::sort(neg.begin(), neg.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first < y.first;
      return x.second < y.second;
    });
    const int k = std::min({ks[static_cast<std::size_t>(a)], static_cast<int>(pos.size()),
                            static_cast<int>(neg.size())});
    double dap = 0.0, dan = 0.0;
    for (int i = 0; i < k; ++i) {
      dap += pos[static_cast<std::size_t>(i)].first;
      dan += neg[static_cast<std::size_t>(i)].first;
    }
    dap /= k;
    dan /= k;
    const double h = margin + dap - dan;
    if (h > 0.0) total += h;
  }
  return total;
}

// Batch-hard triplet: farthest positive, closest negative, hinged.
inline double batch_hard_triplet(std::span<const double> emb, int d, std::span<const int> labels,
                                 double margin) {
  std::vector<int> ones(labels.size(), 1);
  return ann_loss(emb, d, labels, ones, margin);
}

// Contrastive loss over unordered pairs a < b.
inline double contrastive(std::span<const double> emb, int d, std::span<const int> labels,
                          double margin) {
  const int b = static_cast<int>(labels.size());
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    for (int j = i + 1; j < b; ++j) {
      const double dist = sqdist(emb, d, i, j);
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
        total += dist;
      } else {
        const double gap = margin - std::sqrt(dist);
        if (gap > 0.0) total += gap * gap;
      }
    }
  }
  return total;
}

// Direct-formula cross entropy: mean over rows of -log softmax[label].
inline double softmax_xent(std::span<const double> logits, int n, std::span<const int> labels) {
  const int b = static_cast<int>(labels.size());
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    double mx = logits[static_cast<std::size_t>(i) * n];
    for (int j = 1; j < n; ++j) mx = std::max(mx, logits[static_cast<std::size_t>(i) * n + j]);
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += std::exp(logits[static_cast<std::size_t>(i) * n + j] - mx);
    total += -(logits[static_cast<std::size_t>(i) * n + labels[static_cast<std::size_t>(i)]] - mx -
               std::log(z));
  }
  return total / b;
}

// Exhaustive ranking: every gallery index ordered by (distance, index).
inline std::vector<int> rank(std::span<const double> query, std::span<const double> gallery, int d,
                             int g) {
  std::vector<std::pair<double, int>> order;
  for (int i = 0; i < g; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      const double diff = query[static_cast<std::size_t>(j)] - gallery[static_cast<std::size_t>(i) * d + j];
      s += diff * diff;
    }
    order.emplace_back(s, i);
  }
  std::sort(order.begin(), order.end());
  std::vector<int> idx(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) idx[i] = order[i].second;
  return idx;
}

// CMC@k by direct counting over per-query relevance flags in ranked order.
inline double cmc_at_k(const std::vector<std::vector<bool>>& ranked_relevance, int k) {
  int hits = 0;
  for (const auto& flags : ranked_relevance) {
    const int upto = std::min<int>(k, static_cast<int>(flags.size()));
    for (int i = 0; i < upto; ++i) {
      if (flags[static_cast<std::size_t>(i)]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(ranked_relevance.size());
}

// mAP with AP = mean over relevant items of precision at their rank.
inline double mean_average_precision(const std::vector<std::vector<bool>>& ranked_relevance) {
  double map = 0.0;
  for (const auto& flags : ranked_relevance) {
    int seen = 0;
    double ap = 0.0;
    int total_relevant = 0;
    for (std::size_t i = 0; i < flags.size(); ++i) {
      if (flags[i]) {
        ++seen;
        ap += static_cast<double>(seen) / static_cast<double>(i + 1);
        ++total_relevant;
      }
    }
    map += ap / total_relevant;
  }
  return map / static_cast<double>(ranked_relevance.size());
}

}  // namespace oracle
