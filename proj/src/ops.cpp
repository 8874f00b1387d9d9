#include "amde/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "amde/error.hpp"

namespace amde {

namespace {

using detail::TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;

bool any_requires_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

// Records the entry when a tape is active and the output carries gradient.
void record(std::vector<ImplPtr> inputs, const Tensor& out, std::function<void()> backward) {
  Tape* tape = active_tape();
  if (tape && out.requires_grad()) tape->record(std::move(inputs), out.share(), std::move(backward));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorKind::Dimension, std::string(op) + ": operand shapes differ, " +
                                          shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || (b.rank() != 2 && b.rank() != 1)) {
    throw Error(ErrorKind::Dimension,
                "matmul: expected [m x k] by [k x n] or [k], got " + shape_str(a.shape()) + " and " +
                    shape_str(b.shape()));
  }
  const int m = a.dim(0);
  const int k = a.dim(1);
  const bool vec = b.rank() == 1;
  const int kb = b.dim(0);
  const int n = vec ? 1 : b.dim(1);
  if (k != kb) {
    throw Error(ErrorKind::Dimension, "matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                                          " vs " + shape_str(b.shape()));
  }

  std::vector<double> out(static_cast<std::size_t>(m) * static_cast<std::size_t>(n), 0.0);
  const auto* ad = a.data().data();
  const auto* bd = b.data().data();
  for (int i = 0; i < m; ++i) {
    const double* arow = ad + static_cast<std::size_t>(i) * k;
    double* orow = out.data() + static_cast<std::size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = bd + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }

  Shape out_shape = vec ? Shape{m} : Shape{m, n};
  Tensor c = Tensor::from_data(std::move(out_shape), std::move(out), any_requires_grad({&a, &b}));

  auto ai = a.share(), bi = b.share(), ci = c.share();
  record({ai, bi}, c, [ai, bi, ci, m, k, n]() {
    const auto& g = ci->grad;
    if (ai->requires_grad) {
      std::vector<double> da(ai->value.size(), 0.0);
      for (int i = 0; i < m; ++i) {
        for (int kk = 0; kk < k; ++kk) {
          double s = 0.0;
          const double* gr = g.data() + static_cast<std::size_t>(i) * n;
          const double* br = bi->value.data() + static_cast<std::size_t>(kk) * n;
          for (int j = 0; j < n; ++j) s += gr[j] * br[j];
          da[static_cast<std::size_t>(i) * k + kk] = s;
        }
      }
      ai->accumulate_grad(da);
    }
    if (bi->requires_grad) {
      std::vector<double> db(bi->value.size(), 0.0);
      for (int i = 0; i < m; ++i) {
        const double* ar = ai->value.data() + static_cast<std::size_t>(i) * k;
        const double* gr = g.data() + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
          const double av = ar[kk];
          double* dbr = db.data() + static_cast<std::size_t>(kk) * n;
          for (int j = 0; j < n; ++j) dbr[j] += av * gr[j];
        }
      }
      bi->accumulate_grad(db);
    }
  });
  return c;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  Tensor c = Tensor::from_data(a.shape(), std::move(out), any_requires_grad({&a, &b}));
  auto ai = a.share(), bi = b.share(), ci = c.share();
  record({ai, bi}, c, [ai, bi, ci]() {
    if (ai->requires_grad) ai->accumulate_grad(ci->grad);
    if (bi->requires_grad) bi->accumulate_grad(ci->grad);
  });
  return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  Tensor c = Tensor::from_data(a.shape(), std::move(out), any_requires_grad({&a, &b}));
  auto ai = a.share(), bi = b.share(), ci = c.share();
  record({ai, bi}, c, [ai, bi, ci]() {
    if (ai->requires_grad) ai->accumulate_grad(ci->grad);
    if (bi->requires_grad) {
      std::vector<double> gb(ci->grad.size());
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] = -ci->grad[i];
      bi->accumulate_grad(gb);
    }
  });
  return c;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  Tensor c = Tensor::from_data(a.shape(), std::move(out), any_requires_grad({&a, &b}));
  auto ai = a.share(), bi = b.share(), ci = c.share();
  record({ai, bi}, c, [ai, bi, ci]() {
    if (ai->requires_grad) {
      std::vector<double> ga(ci->grad.size());
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = ci->grad[i] * bi->value[i];
      ai->accumulate_grad(ga);
    }
    if (bi->requires_grad) {
      std::vector<double> gb(ci->grad.size());
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] = ci->grad[i] * ai->value[i];
      bi->accumulate_grad(gb);
    }
  });
  return c;
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * c;
  Tensor y = Tensor::from_data(a.shape(), std::move(out), a.requires_grad());
  auto ai = a.share(), yi = y.share();
  record({ai}, y, [ai, yi, c]() {
    std::vector<double> ga(yi->grad.size());
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = yi->grad[i] * c;
    ai->accumulate_grad(ga);
  });
  return y;
}

namespace detail {

Tensor unary_custom(const Tensor& x, const std::function<double(double)>& f,
                    const std::function<double(double, double)>& dfdx) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x.at(i));
  Tensor y = Tensor::from_data(x.shape(), std::move(out), x.requires_grad());
  auto xi = x.share(), yi = y.share();
  auto dr = dfdx;
  record({xi}, y, [xi, yi, dr]() {
    std::vector<double> gx(yi->grad.size());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = yi->grad[i] * dr(xi->value[i], yi->value[i]);
    xi->accumulate_grad(gx);
  });
  return y;
}

}  // namespace detail

Tensor sigmoid(const Tensor& x) {
  return detail::unary_custom(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_op(const Tensor& x) {
  return detail::unary_custom(x, [](double v) { return std::tanh(v); },
                              [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return detail::unary_custom(x, [](double v) { return v > 0.0 ? v : 0.0; },
                              [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

namespace {

// Validates and normalizes reduction axes; empty input selects all axes.
std::vector<int> normalize_axes(const Tensor& x, std::vector<int> axes) {
  if (axes.empty()) {
    axes.resize(static_cast<std::size_t>(x.rank()));
    for (int i = 0; i < x.rank(); ++i) axes[static_cast<std::size_t>(i)] = i;
    return axes;
  }
  std::sort(axes.begin(), axes.end());
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i] < 0 || axes[i] >= x.rank())
      throw Error(ErrorKind::Axis,
                  "reduce: axis " + std::to_string(axes[i]) + " invalid for " + shape_str(x.shape()));
    if (i > 0 && axes[i] == axes[i - 1])
      throw Error(ErrorKind::Axis, "reduce: duplicate axis " + std::to_string(axes[i]));
  }
  return axes;
}

Tensor reduce_impl(const Tensor& x, std::vector<int> axes, bool mean) {
  axes = normalize_axes(x, std::move(axes));
  const auto& shape = x.shape();
  std::vector<bool> reduced(shape.size(), false);
  std::size_t reduced_count = 1;
  for (int a : axes) {
    reduced[static_cast<std::size_t>(a)] = true;
    reduced_count *= static_cast<std::size_t>(shape[static_cast<std::size_t>(a)]);
  }
  Shape out_shape;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (!reduced[i]) out_shape.push_back(shape[i]);
  }

  // Row-major strides of input and map from input flat index to output flat index.
  const std::size_t n = x.size();
  std::vector<std::size_t> out_strides(shape.size(), 0);
  {
    std::size_t acc = 1;
    for (std::size_t i = shape.size(); i-- > 0;) {
      if (!reduced[i]) {
        out_strides[i] = acc;
        acc *= static_cast<std::size_t>(shape[i]);
      }
    }
  }
  std::vector<std::size_t> in_strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;)
    in_strides[i - 1] = in_strides[i] * static_cast<std::size_t>(shape[i]);

  // Captured by value: the backward closure outlives this frame.
  auto out_index = [shape, in_strides, out_strides](std::size_t flat) {
    std::size_t oi = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) {
      const std::size_t coord = (flat / in_strides[d]) % static_cast<std::size_t>(shape[d]);
      oi += coord * out_strides[d];
    }
    return oi;
  };

  std::vector<double> out(shape_numel(out_shape), 0.0);
  for (std::size_t i = 0; i < n; ++i) out[out_index(i)] += x.at(i);
  const double denom = mean ? static_cast<double>(reduced_count) : 1.0;
  if (mean) {
    for (double& v : out) v /= denom;
  }

  Tensor y = Tensor::from_data(std::move(out_shape), std::move(out), x.requires_grad());
  auto xi = x.share(), yi = y.share();
  record({xi}, y, [xi, yi, out_index, n, denom]() {
    std::vector<double> gx(n);
    for (std::size_t i = 0; i < n; ++i) gx[i] = yi->grad[out_index(i)] / denom;
    xi->accumulate_grad(gx);
  });
  return y;
}

}  // namespace

Tensor reduce_sum(const Tensor& x, std::vector<int> axes) { return reduce_impl(x, std::move(axes), false); }
Tensor reduce_mean(const Tensor& x, std::vector<int> axes) { return reduce_impl(x, std::move(axes), true); }

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1)
    throw Error(ErrorKind::Dimension, "concat: expected 1-D operands, got " + shape_str(a.shape()) +
                                          " and " + shape_str(b.shape()));
  const int na = a.dim(0), nb = b.dim(0);
  std::vector<double> out(static_cast<std::size_t>(na + nb));
  std::copy(a.data().begin(), a.data().end(), out.begin());
  std::copy(b.data().begin(), b.data().end(), out.begin() + na);
  Tensor c = Tensor::from_data({na + nb}, std::move(out), any_requires_grad({&a, &b}));
  auto ai = a.share(), bi = b.share(), ci = c.share();
  record({ai, bi}, c, [ai, bi, ci, na, nb]() {
    if (ai->requires_grad)
      ai->accumulate_grad(std::span<const double>(ci->grad.data(), static_cast<std::size_t>(na)));
    if (bi->requires_grad)
      bi->accumulate_grad(std::span<const double>(ci->grad.data() + na, static_cast<std::size_t>(nb)));
  });
  return c;
}

Tensor slice(const Tensor& x, int start, int len) {
  if (x.rank() != 1) throw Error(ErrorKind::Dimension, "slice: expected 1-D input");
  if (start < 0 || len <= 0 || start + len > x.dim(0))
    throw Error(ErrorKind::Contract, "slice: window [" + std::to_string(start) + ", " +
                                         std::to_string(start + len) + ") outside " + shape_str(x.shape()));
  std::vector<double> out(x.data().begin() + start, x.data().begin() + start + len);
  Tensor y = Tensor::from_data({len}, std::move(out), x.requires_grad());
  auto xi = x.share(), yi = y.share();
  record({xi}, y, [xi, yi, start, len]() {
    std::vector<double> gx(xi->value.size(), 0.0);
    for (int i = 0; i < len; ++i) gx[static_cast<std::size_t>(start + i)] = yi->grad[static_cast<std::size_t>(i)];
    xi->accumulate_grad(gx);
  });
  return y;
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw Error(ErrorKind::Contract, "stack_rows: empty row list");
  const int d = rows[0].dim(0);
  bool req = false;
  for (const Tensor& r : rows) {
    if (r.rank() != 1 || r.dim(0) != d)
      throw Error(ErrorKind::Dimension, "stack_rows: rows must share shape [" + std::to_string(d) + "]");
    req = req || r.requires_grad();
  }
  const int b = static_cast<int>(rows.size());
  std::vector<double> out(static_cast<std::size_t>(b) * d);
  for (int i = 0; i < b; ++i)
    std::copy(rows[static_cast<std::size_t>(i)].data().begin(), rows[static_cast<std::size_t>(i)].data().end(),
              out.begin() + static_cast<std::size_t>(i) * d);
  Tensor y = Tensor::from_data({b, d}, std::move(out), req);
  std::vector<ImplPtr> ins;
  ins.reserve(rows.size());
  for (const Tensor& r : rows) ins.push_back(r.share());
  auto yi = y.share();
  auto ins_copy = ins;
  record(std::move(ins), y, [ins_copy, yi, d]() {
    for (std::size_t i = 0; i < ins_copy.size(); ++i) {
      if (!ins_copy[i]->requires_grad) continue;
      ins_copy[i]->accumulate_grad(std::span<const double>(yi->grad.data() + i * static_cast<std::size_t>(d),
                                                           static_cast<std::size_t>(d)));
    }
  });
  return y;
}

Tensor row(const Tensor& x, int r) {
  if (x.rank() != 2) throw Error(ErrorKind::Dimension, "row: expected 2-D input");
  if (r < 0 || r >= x.dim(0)) throw Error(ErrorKind::Contract, "row: index " + std::to_string(r) + " out of range");
  const int n = x.dim(1);
  std::vector<double> out(x.data().begin() + static_cast<std::size_t>(r) * n,
                          x.data().begin() + static_cast<std::size_t>(r + 1) * n);
  Tensor y = Tensor::from_data({n}, std::move(out), x.requires_grad());
  auto xi = x.share(), yi = y.share();
  record({xi}, y, [xi, yi, r, n]() {
    std::vector<double> gx(xi->value.size(), 0.0);
    for (int j = 0; j < n; ++j) gx[static_cast<std::size_t>(r) * n + j] = yi->grad[static_cast<std::size_t>(j)];
    xi->accumulate_grad(gx);
  });
  return y;
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw Error(ErrorKind::Dimension, "transpose: expected 2-D input");
  const int m = x.dim(0), n = x.dim(1);
  std::vector<double> out(x.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(j) * m + i] = x.at(static_cast<std::size_t>(i) * n + j);
  Tensor y = Tensor::from_data({n, m}, std::move(out), x.requires_grad());
  auto xi = x.share(), yi = y.share();
  record({xi}, y, [xi, yi, m, n]() {
    std::vector<double> gx(xi->value.size());
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        gx[static_cast<std::size_t>(i) * n + j] = yi->grad[static_cast<std::size_t>(j) * m + i];
    xi->accumulate_grad(gx);
  });
  return y;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
  if (x.rank() != 3 || w.rank() != 4)
    throw Error(ErrorKind::Dimension, "conv2d: expected x [C x H x W] and w [O x C x KH x KW], got " +
                                          shape_str(x.shape()) + " and " + shape_str(w.shape()));
  const int ci = x.dim(0), h = x.dim(1), wth = x.dim(2);
  const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != ci)
    throw Error(ErrorKind::Dimension, "conv2d: channel mismatch, " + shape_str(x.shape()) + " vs " +
                                          shape_str(w.shape()));
  if (bias.rank() != 1 || bias.dim(0) != co)
    throw Error(ErrorKind::Dimension, "conv2d: bias must be [" + std::to_string(co) + "]");
  if (stride <= 0 || pad < 0) throw Error(ErrorKind::Contract, "conv2d: stride must be positive, pad nonnegative");
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (wth + 2 * pad - kw) / stride + 1;
  if (ho <= 0 || wo <= 0) throw Error(ErrorKind::Dimension, "conv2d: kernel larger than padded input");

  std::vector<double> out(static_cast<std::size_t>(co) * ho * wo);
  const double* xd = x.data().data();
  const double* wd = w.data().data();
  const double* bd = bias.data().data();
  for (int oc = 0; oc < co; ++oc) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        double acc = bd[oc];
        const int iy0 = oy * stride - pad;
        const int ix0 = ox * stride - pad;
        for (int ic = 0; ic < ci; ++ic) {
          const double* xc = xd + (static_cast<std::size_t>(ic) * h) * wth;
          const double* wc = wd + ((static_cast<std::size_t>(oc) * ci + ic) * kh) * kw;
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= h) continue;
            const double* xrow = xc + static_cast<std::size_t>(iy) * wth;
            const double* wrow = wc + static_cast<std::size_t>(ky) * kw;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ix0 + kx;
              if (ix < 0 || ix >= wth) continue;
              acc += xrow[ix] * wrow[kx];
            }
          }
        }
        out[(static_cast<std::size_t>(oc) * ho + oy) * wo + ox] = acc;
      }
    }
  }

  Tensor y = Tensor::from_data({co, ho, wo}, std::move(out), any_requires_grad({&x, &w, &bias}));
  auto xi = x.share(), wi = w.share(), bi = bias.share(), yi = y.share();
  record({xi, wi, bi}, y, [xi, wi, bi, yi, ci, h, wth, co, kh, kw, stride, pad, ho, wo]() {
    const auto& g = yi->grad;
    std::vector<double> dx, dw, db;
    const bool need_dx = xi->requires_grad;
    const bool need_dw = wi->requires_grad;
    const bool need_db = bi->requires_grad;
    if (need_dx) dx.assign(xi->value.size(), 0.0);
    if (need_dw) dw.assign(wi->value.size(), 0.0);
    if (need_db) db.assign(bi->value.size(), 0.0);

    for (int oc = 0; oc < co; ++oc) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          const double go = g[(static_cast<std::size_t>(oc) * ho + oy) * wo + ox];
          if (go == 0.0) continue;
          if (need_db) db[static_cast<std::size_t>(oc)] += go;
          const int iy0 = oy * stride - pad;
          const int ix0 = ox * stride - pad;
          for (int ic = 0; ic < ci; ++ic) {
            const std::size_t xbase = (static_cast<std::size_t>(ic) * h) * wth;
            const std::size_t wbase = ((static_cast<std::size_t>(oc) * ci + ic) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
              const int iy = iy0 + ky;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < kw; ++kx) {
                const int ix = ix0 + kx;
                if (ix < 0 || ix >= wth) continue;
                const std::size_t xoff = xbase + static_cast<std::size_t>(iy) * wth + ix;
                const std::size_t woff = wbase + static_cast<std::size_t>(ky) * kw + kx;
                if (need_dx) dx[xoff] += wi->value[woff] * go;
                if (need_dw) dw[woff] += xi->value[xoff] * go;
              }
            }
          }
        }
      }
    }
    if (need_dx) xi->accumulate_grad(dx);
    if (need_dw) wi->accumulate_grad(dw);
    if (need_db) bi->accumulate_grad(db);
  });
  return y;
}

Tensor seq_conv3(const Tensor& s, const Tensor& w, const Tensor& bias) {
  if (s.rank() != 2 || w.rank() != 3 || w.dim(2) != 3)
    throw Error(ErrorKind::Dimension, "seq_conv3: expected s [T x c] and w [e x c x 3], got " +
                                          shape_str(s.shape()) + " and " + shape_str(w.shape()));
  const int t = s.dim(0), c = s.dim(1), e = w.dim(0);
  if (w.dim(1) != c) throw Error(ErrorKind::Dimension, "seq_conv3: channel mismatch");
  if (bias.rank() != 1 || bias.dim(0) != e)
    throw Error(ErrorKind::Dimension, "seq_conv3: bias must be [" + std::to_string(e) + "]");

  std::vector<double> out(static_cast<std::size_t>(t) * e);
  for (int ti = 0; ti < t; ++ti) {
    for (int o = 0; o < e; ++o) {
      double acc = bias.at(static_cast<std::size_t>(o));
      for (int dt = -1; dt <= 1; ++dt) {
        const int src = ti + dt;
        if (src < 0 || src >= t) continue;
        for (int j = 0; j < c; ++j) {
          acc += w.at((static_cast<std::size_t>(o) * c + j) * 3 + (dt + 1)) *
                 s.at(static_cast<std::size_t>(src) * c + j);
        }
      }
      out[static_cast<std::size_t>(ti) * e + o] = acc;
    }
  }
  Tensor y = Tensor::from_data({t, e}, std::move(out), any_requires_grad({&s, &w, &bias}));
  auto si = s.share(), wi = w.share(), bi = bias.share(), yi = y.share();
  record({si, wi, bi}, y, [si, wi, bi, yi, t, c, e]() {
    const auto& g = yi->grad;
    std::vector<double> ds(si->requires_grad ? si->value.size() : 0, 0.0);
    std::vector<double> dw(wi->requires_grad ? wi->value.size() : 0, 0.0);
    std::vector<double> db(bi->requires_grad ? bi->value.size() : 0, 0.0);
    for (int ti = 0; ti < t; ++ti) {
      for (int o = 0; o < e; ++o) {
        const double go = g[static_cast<std::size_t>(ti) * e + o];
        if (go == 0.0) continue;
        if (!db.empty()) db[static_cast<std::size_t>(o)] += go;
        for (int dt = -1; dt <= 1; ++dt) {
          const int src = ti + dt;
          if (src < 0 || src >= t) continue;
          for (int j = 0; j < c; ++j) {
            const std::size_t woff = (static_cast<std::size_t>(o) * c + j) * 3 + (dt + 1);
            const std::size_t soff = static_cast<std::size_t>(src) * c + j;
            if (!ds.empty()) ds[soff] += wi->value[woff] * go;
            if (!dw.empty()) dw[woff] += si->value[soff] * go;
          }
        }
      }
    }
    if (!ds.empty()) si->accumulate_grad(ds);
    if (!dw.empty()) wi->accumulate_grad(dw);
    if (!db.empty()) bi->accumulate_grad(db);
  });
  return y;
}

Tensor l2_normalize(const Tensor& x, double eps) {
  if (x.rank() != 1) throw Error(ErrorKind::Dimension, "l2_normalize: expected 1-D input");
  const int n = x.dim(0);
  double sq = 0.0;
  for (double v : x.data()) sq += v * v;
  const double norm = std::max(std::sqrt(sq), eps);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = x.at(static_cast<std::size_t>(i)) / norm;
  Tensor y = Tensor::from_data({n}, std::move(out), x.requires_grad());
  auto xi = x.share(), yi = y.share();
  record({xi}, y, [xi, yi, n, norm]() {
    // dx = (g - y * <g, y>) / norm
    double dot = 0.0;
    for (int i = 0; i < n; ++i) dot += yi->grad[static_cast<std::size_t>(i)] * yi->value[static_cast<std::size_t>(i)];
    std::vector<double> gx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      gx[static_cast<std::size_t>(i)] =
          (yi->grad[static_cast<std::size_t>(i)] - yi->value[static_cast<std::size_t>(i)] * dot) / norm;
    xi->accumulate_grad(gx);
  });
  return y;
}

Tensor softmax_xent(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw Error(ErrorKind::Dimension, "softmax_xent: expected logits [B x N]");
  const int b = logits.dim(0), n = logits.dim(1);
  if (static_cast<int>(labels.size()) != b)
    throw Error(ErrorKind::Contract, "softmax_xent: label count " + std::to_string(labels.size()) +
                                         " does not match batch " + std::to_string(b));
  for (int i = 0; i < b; ++i) {
    if (labels[static_cast<std::size_t>(i)] < 0 || labels[static_cast<std::size_t>(i)] >= n)
      throw Error(ErrorKind::Contract,
                  "softmax_xent: label " + std::to_string(labels[static_cast<std::size_t>(i)]) +
                      " outside [0, " + std::to_string(n) + ")");
  }

  // Cache softmax for the backward rule.
  std::vector<double> probs(static_cast<std::size_t>(b) * n);
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    const double* lrow = logits.data().data() + static_cast<std::size_t>(i) * n;
    double mx = lrow[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, lrow[j]);
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += std::exp(lrow[j] - mx);
    const double logz = std::log(z);
    for (int j = 0; j < n; ++j)
      probs[static_cast<std::size_t>(i) * n + j] = std::exp(lrow[j] - mx - logz);
    total += -(lrow[labels[static_cast<std::size_t>(i)]] - mx - logz);
  }
  total /= static_cast<double>(b);

  Tensor y = Tensor::from_data({}, {total}, logits.requires_grad());
  auto li = logits.share(), yi = y.share();
  std::vector<int> labels_copy(labels.begin(), labels.end());
  record({li}, y, [li, yi, probs = std::move(probs), labels_copy = std::move(labels_copy), b, n]() {
    const double g = yi->grad[0] / static_cast<double>(b);
    std::vector<double> gl(static_cast<std::size_t>(b) * n);
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < n; ++j) {
        const std::size_t off = static_cast<std::size_t>(i) * n + j;
        gl[off] = g * (probs[off] - (labels_copy[static_cast<std::size_t>(i)] == j ? 1.0 : 0.0));
      }
    }
    li->accumulate_grad(gl);
  });
  return y;
}

Tensor pairwise_sqdist(const Tensor& embeddings) {
  if (embeddings.rank() != 2) throw Error(ErrorKind::Dimension, "pairwise_sqdist: expected [B x d]");
  const int b = embeddings.dim(0), d = embeddings.dim(1);
  std::vector<double> out(static_cast<std::size_t>(b) * b, 0.0);
  const double* e = embeddings.data().data();
  for (int i = 0; i < b; ++i) {
    for (int j = i + 1; j < b; ++j) {
      double s = 0.0;
      const double* ei = e + static_cast<std::size_t>(i) * d;
      const double* ej = e + static_cast<std::size_t>(j) * d;
      for (int k = 0; k < d; ++k) {
        const double diff = ei[k] - ej[k];
        s += diff * diff;
      }
      out[static_cast<std::size_t>(i) * b + j] = s;
      out[static_cast<std::size_t>(j) * b + i] = s;
    }
  }
  Tensor y = Tensor::from_data({b, b}, std::move(out), embeddings.requires_grad());
  auto ei = embeddings.share(), yi = y.share();
  record({ei}, y, [ei, yi, b, d]() {
    // d D[i][j] / d e_i = 2 (e_i - e_j); both (i,j) and (j,i) feed each row.
    std::vector<double> ge(ei->value.size(), 0.0);
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < b; ++j) {
        if (i == j) continue;
        const double g = yi->grad[static_cast<std::size_t>(i) * b + j];
        if (g == 0.0) continue;
        const double* vi = ei->value.data() + static_cast<std::size_t>(i) * d;
        const double* vj = ei->value.data() + static_cast<std::size_t>(j) * d;
        double* gi = ge.data() + static_cast<std::size_t>(i) * d;
        double* gj = ge.data() + static_cast<std::size_t>(j) * d;
        for (int k = 0; k < d; ++k) {
          const double t = 2.0 * g * (vi[k] - vj[k]);
          gi[k] += t;
          gj[k] -= t;
        }
      }
    }
    ei->accumulate_grad(ge);
  });
  return y;
}

void check_finite(const Tensor& t, const char* context) {
  if (!t.all_finite())
    throw Error(ErrorKind::Contract, std::string("non-finite value detected in ") + context);
}

}  // namespace amde
