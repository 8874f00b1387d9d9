#pragma once

#include <functional>
#include <span>
#include <vector>

#include "amde/tensor.hpp"

namespace amde {

// Dense linear algebra. a may be [m x k] with b [k x n] -> [m x n], or
// b [k] -> [m]. Gradients: dA = dC * B^T, dB = A^T * dC.
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise; binary ops require identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor sigmoid(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor relu(const Tensor& x);

// Reductions over a sorted set of distinct axes; empty set means all axes.
// mean divides by the product of reduced extents; gradients broadcast back.
Tensor reduce_sum(const Tensor& x, std::vector<int> axes = {});
Tensor reduce_mean(const Tensor& x, std::vector<int> axes = {});

// Structural ops (1-D/2-D views used by the encoder).
Tensor concat(const Tensor& a, const Tensor& b);                // 1-D ++ 1-D
Tensor slice(const Tensor& x, int start, int len);              // 1-D window
Tensor stack_rows(std::span<const Tensor> rows);                // B x [d] -> [B x d]
Tensor row(const Tensor& x, int r);                             // 2-D row -> 1-D
Tensor transpose(const Tensor& x);                              // 2-D

// Single-image convolution: x [Cin x H x W], w [Cout x Cin x KH x KW],
// bias [Cout], zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);

// 1-D convolution along the first axis of s [T x c] with kernel width 3 and
// zero padding: w [e x c x 3], bias [e] -> [T x e].
Tensor seq_conv3(const Tensor& s, const Tensor& w, const Tensor& bias);

// x / max(||x||, eps) for 1-D x.
Tensor l2_normalize(const Tensor& x, double eps = 1e-12);

// Mean over the batch of -log softmax(logits[b])[label[b]], max-stabilized.
Tensor softmax_xent(const Tensor& logits, std::span<const int> labels);

// D[a][b] = sum_j (e_a[j] - e_b[j])^2 for embeddings [B x d].
Tensor pairwise_sqdist(const Tensor& embeddings);

void check_finite(const Tensor& t, const char* context);

namespace detail {
// Elementwise op with caller-supplied forward and derivative; the derivative
// receives (x, y). Exists so tests can register deliberately wrong rules.
Tensor unary_custom(const Tensor& x, const std::function<double(double)>& f,
                    const std::function<double(double, double)>& dfdx);
}  // namespace detail

}  // namespace amde
