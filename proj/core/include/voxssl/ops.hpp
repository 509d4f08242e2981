#pragma once

#include <cstddef>
#include <vector>

#include "voxssl/autodiff.hpp"

namespace voxssl {

// Differentiable op library over Var. All ops build graph nodes; backward
// rules live next to each forward in ops.cpp. Shapes are validated and
// outputs of numerically risky ops are checked for finiteness (NumericError).

// ---- arithmetic ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);          // elementwise
Var scale(const Var& a, double c);            // scalar multiply
Var add_rowvec(const Var& x, const Var& b);   // x: N x D, b: D broadcast over rows

// ---- linear algebra / shape ----
Var matmul(const Var& a, const Var& b);       // (m x k) . (k x n)
Var transpose(const Var& a);                  // 2-D
Var reshape(const Var& a, std::vector<std::size_t> shape);
Var concat(const std::vector<Var>& parts, std::size_t axis);  // rank-2, axis 0 or 1; rank-1, axis 0
Var gather_rows(const Var& x, const std::vector<std::size_t>& idx);
/// Inverse-ish of gather_rows: places `visible` rows at `visible_idx` (ascending)
/// in an n_rows output and fills every other row with `fill` (a length-D vector).
Var scatter_rows(const Var& visible, const Var& fill,
                 const std::vector<std::size_t>& visible_idx, std::size_t n_rows);
Var gather_cols(const Var& x, std::size_t start, std::size_t len);

// ---- activations / reductions ----
Var gelu(const Var& x);                       // exact erf form
Var sum_all(const Var& x);
Var mean_all(const Var& x);
Var mean_axis0(const Var& x);                 // N x D -> D

// ---- neural net ops ----
/// Softmax along `axis` of a rank-1/2 tensor, with per-line max subtraction.
/// Non-finite input is an error.
Var softmax(const Var& x, std::size_t axis);
/// Layer normalization over the last axis with learnable gain/bias (length =
/// last extent). Population variance, eps inside the square root.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
/// Row-wise (rank-2) or whole-vector (rank-1) l2 normalization. A zero-norm
/// line with eps == 0 is an error; otherwise the norm is clamped to eps.
Var l2_normalize(const Var& x, double eps = 0.0);
/// Mean over rows of the negative cosine similarity between corresponding
/// rows of `student` and `teacher`. The teacher is treated as a constant:
/// no gradient flows into it. Rank-1 inputs are treated as a single row.
/// A zero-norm row is an error.
Var cosine_row_loss(const Var& student, const Var& teacher);
/// Mean softmax cross-entropy of `logits` (n x C) against integer labels.
Var softmax_cross_entropy(const Var& logits, const std::vector<std::size_t>& labels);

}  // namespace voxssl
