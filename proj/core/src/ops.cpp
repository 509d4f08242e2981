#include "voxssl/ops.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "voxssl/errors.hpp"

namespace voxssl {
namespace {

void ensure_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw NumericError(std::string(what) + ": non-finite values");
}

Var make_node(Tensor value, std::vector<Var> inputs,
              std::function<void(const Tensor&)> bw) {
  auto node = std::make_shared<DiffNode>();
  node->value = std::move(value);
  for (const auto& in : inputs) {
    node->parents.push_back(in.node());
    node->requires_grad = node->requires_grad || in.requires_grad();
  }
  if (node->requires_grad) node->backward_fn = std::move(bw);
  return Var(std::move(node));
}

void check_same_shape(const Var& a, const Var& b, const char* what) {
  if (!a.value().same_shape(b.value())) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                a.value().shape_str() + " vs " + b.value().shape_str());
  }
}

// C (+)= op(A, transA) . op(B, transB); shared kernel for forward and backward.
Tensor mm(const Tensor& A, bool transA, const Tensor& B, bool transB) {
  const std::size_t m = transA ? A.cols() : A.rows();
  const std::size_t k = transA ? A.rows() : A.cols();
  const std::size_t kb = transB ? B.cols() : B.rows();
  const std::size_t n = transB ? B.rows() : B.cols();
  if (k != kb) {
    throw std::invalid_argument("matmul: inner dimensions " + A.shape_str() + " vs " + B.shape_str());
  }
  Tensor C({m, n});
  const double* a = A.data();
  const double* b = B.data();
  double* c = C.data();
  const std::size_t lda = A.cols();
  const std::size_t ldb = B.cols();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = transA ? a[p * lda + i] : a[i * lda + p];
      if (av == 0.0) continue;
      const double* brow = transB ? nullptr : b + p * ldb;
      double* crow = c + i * n;
      if (transB) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * ldb + p];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
  return C;
}

// Lines of a rank-1/2 tensor along `axis`: count, stride between elements of a
// line, and stride between lines. Used by softmax.
struct LineView {
  std::size_t n_lines, line_len, elem_stride, line_stride;
};

LineView line_view(const Tensor& t, std::size_t axis, const char* what) {
  if (t.ndim() == 1) {
    if (axis != 0) throw std::invalid_argument(std::string(what) + ": axis out of range for rank-1");
    return {1, t.size(), 1, 0};
  }
  if (t.ndim() != 2) throw std::invalid_argument(std::string(what) + ": rank-1 or rank-2 only");
  if (axis == 1) return {t.rows(), t.cols(), 1, t.cols()};
  if (axis == 0) return {t.cols(), t.rows(), t.cols(), 1};
  throw std::invalid_argument(std::string(what) + ": axis out of range");
}

}  // namespace

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a.value();
  const double* pb = b.value().data();
  double* po = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] += pb[i];
  auto an = a.node();
  auto bn = b.node();
  return make_node(std::move(out), {a, b}, [an, bn](const Tensor& g) {
    if (an->requires_grad) an->accumulate(g);
    if (bn->requires_grad) bn->accumulate(g);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a.value();
  const double* pb = b.value().data();
  double* po = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] -= pb[i];
  auto an = a.node();
  auto bn = b.node();
  return make_node(std::move(out), {a, b}, [an, bn](const Tensor& g) {
    if (an->requires_grad) an->accumulate(g);
    if (bn->requires_grad) {
      Tensor ng = g;
      for (auto& x : ng.vec()) x = -x;
      bn->accumulate(ng);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a.value();
  const double* pb = b.value().data();
  double* po = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] *= pb[i];
  auto an = a.node();
  auto bn = b.node();
  Tensor av = a.value();
  Tensor bv = b.value();
  return make_node(std::move(out), {a, b}, [an, bn, av, bv](const Tensor& g) {
    if (an->requires_grad) {
      Tensor ga = g;
      double* p = ga.data();
      const double* q = bv.data();
      for (std::size_t i = 0; i < ga.size(); ++i) p[i] *= q[i];
      an->accumulate(ga);
    }
    if (bn->requires_grad) {
      Tensor gb = g;
      double* p = gb.data();
      const double* q = av.data();
      for (std::size_t i = 0; i < gb.size(); ++i) p[i] *= q[i];
      bn->accumulate(gb);
    }
  });
}

Var scale(const Var& a, double c) {
  Tensor out = a.value();
  for (auto& x : out.vec()) x *= c;
  auto an = a.node();
  return make_node(std::move(out), {a}, [an, c](const Tensor& g) {
    Tensor ga = g;
    for (auto& x : ga.vec()) x *= c;
    an->accumulate(ga);
  });
}

Var add_rowvec(const Var& x, const Var& b) {
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  if (xv.ndim() != 2 || bv.ndim() != 1 || bv.size() != xv.cols()) {
    throw std::invalid_argument("add_rowvec: shapes " + xv.shape_str() + " vs " + bv.shape_str());
  }
  Tensor out = xv;
  const std::size_t R = xv.rows(), C = xv.cols();
  for (std::size_t r = 0; r < R; ++r) {
    double* row = out.data() + r * C;
    for (std::size_t c = 0; c < C; ++c) row[c] += bv.at(c);
  }
  auto xn = x.node();
  auto bn = b.node();
  return make_node(std::move(out), {x, b}, [xn, bn, R, C](const Tensor& g) {
    if (xn->requires_grad) xn->accumulate(g);
    if (bn->requires_grad) {
      Tensor gb({C});
      for (std::size_t r = 0; r < R; ++r) {
        const double* row = g.data() + r * C;
        for (std::size_t c = 0; c < C; ++c) gb.at(c) += row[c];
      }
      bn->accumulate(gb);
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.value().ndim() != 2 || b.value().ndim() != 2) {
    throw std::invalid_argument("matmul: rank-2 operands required");
  }
  Tensor out = mm(a.value(), false, b.value(), false);
  ensure_finite(out, "matmul");
  auto an = a.node();
  auto bn = b.node();
  Tensor av = a.value();
  Tensor bv = b.value();
  return make_node(std::move(out), {a, b}, [an, bn, av, bv](const Tensor& g) {
    if (an->requires_grad) an->accumulate(mm(g, false, bv, true));
    if (bn->requires_grad) bn->accumulate(mm(av, true, g, false));
  });
}

Var transpose(const Var& a) {
  const Tensor& av = a.value();
  if (av.ndim() != 2) throw std::invalid_argument("transpose: rank-2 required");
  const std::size_t R = av.rows(), C = av.cols();
  Tensor out({C, R});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) out.at2(c, r) = av.at2(r, c);
  auto an = a.node();
  return make_node(std::move(out), {a}, [an, R, C](const Tensor& g) {
    Tensor ga({R, C});
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) ga.at2(r, c) = g.at2(c, r);
    an->accumulate(ga);
  });
}

Var reshape(const Var& a, std::vector<std::size_t> shape) {
  Tensor out(shape, a.value().vec());
  auto an = a.node();
  auto old_shape = a.value().shape();
  return make_node(std::move(out), {a}, [an, old_shape](const Tensor& g) {
    an->accumulate(Tensor(old_shape, g.vec()));
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const std::size_t nd = parts[0].value().ndim();
  if (nd == 1) {
    if (axis != 0) throw std::invalid_argument("concat: axis out of range for rank-1");
    std::size_t total = 0;
    for (const auto& p : parts) total += p.value().size();
    Tensor out({total});
    std::size_t off = 0;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
      offsets.push_back(off);
      const auto& v = p.value().vec();
      std::copy(v.begin(), v.end(), out.vec().begin() + static_cast<std::ptrdiff_t>(off));
      off += v.size();
    }
    std::vector<std::shared_ptr<DiffNode>> nodes;
    std::vector<std::size_t> sizes;
    for (const auto& p : parts) {
      nodes.push_back(p.node());
      sizes.push_back(p.value().size());
    }
    return make_node(std::move(out), parts, [nodes, offsets, sizes](const Tensor& g) {
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!nodes[i]->requires_grad) continue;
        Tensor gi({sizes[i]});
        std::copy(g.vec().begin() + static_cast<std::ptrdiff_t>(offsets[i]),
                  g.vec().begin() + static_cast<std::ptrdiff_t>(offsets[i] + sizes[i]),
                  gi.vec().begin());
        nodes[i]->accumulate(gi);
      }
    });
  }
  if (nd != 2 || axis > 1) throw std::invalid_argument("concat: rank-2 with axis 0/1 required");
  if (axis == 0) {
    const std::size_t C = parts[0].value().cols();
    std::size_t R = 0;
    for (const auto& p : parts) {
      if (p.value().ndim() != 2 || p.value().cols() != C)
        throw std::invalid_argument("concat: column mismatch");
      R += p.value().rows();
    }
    Tensor out({R, C});
    std::size_t row = 0;
    std::vector<std::size_t> row_offsets;
    for (const auto& p : parts) {
      row_offsets.push_back(row);
      const auto& v = p.value().vec();
      std::copy(v.begin(), v.end(), out.vec().begin() + static_cast<std::ptrdiff_t>(row * C));
      row += p.value().rows();
    }
    std::vector<std::shared_ptr<DiffNode>> nodes;
    std::vector<std::size_t> nrows;
    for (const auto& p : parts) {
      nodes.push_back(p.node());
      nrows.push_back(p.value().rows());
    }
    return make_node(std::move(out), parts, [nodes, row_offsets, nrows, C](const Tensor& g) {
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!nodes[i]->requires_grad) continue;
        Tensor gi({nrows[i], C});
        std::copy(g.vec().begin() + static_cast<std::ptrdiff_t>(row_offsets[i] * C),
                  g.vec().begin() + static_cast<std::ptrdiff_t>((row_offsets[i] + nrows[i]) * C),
                  gi.vec().begin());
        nodes[i]->accumulate(gi);
      }
    });
  }
  // axis == 1: side-by-side columns.
  const std::size_t R = parts[0].value().rows();
  std::size_t C = 0;
  for (const auto& p : parts) {
    if (p.value().ndim() != 2 || p.value().rows() != R)
      throw std::invalid_argument("concat: row mismatch");
    C += p.value().cols();
  }
  Tensor out({R, C});
  std::size_t col = 0;
  std::vector<std::size_t> col_offsets;
  for (const auto& p : parts) {
    col_offsets.push_back(col);
    const std::size_t pc = p.value().cols();
    for (std::size_t r = 0; r < R; ++r) {
      const double* src = p.value().data() + r * pc;
      double* dst = out.data() + r * C + col;
      std::copy(src, src + pc, dst);
    }
    col += pc;
  }
  std::vector<std::shared_ptr<DiffNode>> nodes;
  std::vector<std::size_t> ncols;
  for (const auto& p : parts) {
    nodes.push_back(p.node());
    ncols.push_back(p.value().cols());
  }
  return make_node(std::move(out), parts, [nodes, col_offsets, ncols, R, C](const Tensor& g) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!nodes[i]->requires_grad) continue;
      Tensor gi({R, ncols[i]});
      for (std::size_t r = 0; r < R; ++r) {
        const double* src = g.data() + r * C + col_offsets[i];
        std::copy(src, src + ncols[i], gi.data() + r * ncols[i]);
      }
      nodes[i]->accumulate(gi);
    }
  });
}

Var gather_rows(const Var& x, const std::vector<std::size_t>& idx) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 2) throw std::invalid_argument("gather_rows: rank-2 required");
  const std::size_t C = xv.cols();
  for (std::size_t i : idx) {
    if (i >= xv.rows()) throw std::out_of_range("gather_rows: index " + std::to_string(i));
  }
  Tensor out({idx.size(), C});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const double* src = xv.data() + idx[r] * C;
    std::copy(src, src + C, out.data() + r * C);
  }
  auto xn = x.node();
  const std::size_t R = xv.rows();
  return make_node(std::move(out), {x}, [xn, idx, R, C](const Tensor& g) {
    Tensor gx({R, C});
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const double* src = g.data() + r * C;
      double* dst = gx.data() + idx[r] * C;
      for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
    }
    xn->accumulate(gx);
  });
}

Var scatter_rows(const Var& visible, const Var& fill,
                 const std::vector<std::size_t>& visible_idx, std::size_t n_rows) {
  const Tensor& vv = visible.value();
  const Tensor& fv = fill.value();
  if (vv.ndim() != 2 || fv.ndim() != 1 || fv.size() != vv.cols()) {
    throw std::invalid_argument("scatter_rows: shapes " + vv.shape_str() + " vs " + fv.shape_str());
  }
  if (visible_idx.size() != vv.rows()) {
    throw std::invalid_argument("scatter_rows: index count != visible rows");
  }
  const std::size_t C = vv.cols();
  Tensor out({n_rows, C});
  std::vector<bool> is_visible(n_rows, false);
  for (std::size_t r = 0; r < visible_idx.size(); ++r) {
    const std::size_t i = visible_idx[r];
    if (i >= n_rows) throw std::out_of_range("scatter_rows: index " + std::to_string(i));
    if (is_visible[i]) throw std::invalid_argument("scatter_rows: duplicate index");
    is_visible[i] = true;
    const double* src = vv.data() + r * C;
    std::copy(src, src + C, out.data() + i * C);
  }
  for (std::size_t i = 0; i < n_rows; ++i) {
    if (!is_visible[i]) std::copy(fv.data(), fv.data() + C, out.data() + i * C);
  }
  auto vn = visible.node();
  auto fn = fill.node();
  return make_node(std::move(out), {visible, fill},
                   [vn, fn, visible_idx, is_visible, n_rows, C](const Tensor& g) {
    if (vn->requires_grad) {
      Tensor gv({visible_idx.size(), C});
      for (std::size_t r = 0; r < visible_idx.size(); ++r) {
        const double* src = g.data() + visible_idx[r] * C;
        std::copy(src, src + C, gv.data() + r * C);
      }
      vn->accumulate(gv);
    }
    if (fn->requires_grad) {
      Tensor gf({C});
      for (std::size_t i = 0; i < n_rows; ++i) {
        if (is_visible[i]) continue;
        const double* src = g.data() + i * C;
        for (std::size_t c = 0; c < C; ++c) gf.at(c) += src[c];
      }
      fn->accumulate(gf);
    }
  });
}

Var gather_cols(const Var& x, std::size_t start, std::size_t len) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 2) throw std::invalid_argument("gather_cols: rank-2 required");
  const std::size_t R = xv.rows(), C = xv.cols();
  if (start + len > C) throw std::out_of_range("gather_cols: span out of range");
  Tensor out({R, len});
  for (std::size_t r = 0; r < R; ++r) {
    const double* src = xv.data() + r * C + start;
    std::copy(src, src + len, out.data() + r * len);
  }
  auto xn = x.node();
  return make_node(std::move(out), {x}, [xn, start, len, R, C](const Tensor& g) {
    Tensor gx({R, C});
    for (std::size_t r = 0; r < R; ++r) {
      const double* src = g.data() + r * len;
      std::copy(src, src + len, gx.data() + r * C + start);
    }
    xn->accumulate(gx);
  });
}

Var gelu(const Var& x) {
  static const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  static const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  Tensor out = x.value();
  for (auto& v : out.vec()) v = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
  ensure_finite(out, "gelu");
  auto xn = x.node();
  Tensor xv = x.value();
  return make_node(std::move(out), {x}, [xn, xv](const Tensor& g) {
    Tensor gx = g;
    const double* px = xv.data();
    double* pg = gx.data();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const double v = px[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
      const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
      pg[i] *= cdf + v * pdf;
    }
    xn->accumulate(gx);
  });
}

Var sum_all(const Var& x) {
  double s = 0.0;
  for (double v : x.value().vec()) s += v;
  auto xn = x.node();
  auto shape = x.value().shape();
  return make_node(Tensor::scalar(s), {x}, [xn, shape](const Tensor& g) {
    xn->accumulate(Tensor::full(shape, g.item()));
  });
}

Var mean_all(const Var& x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw std::invalid_argument("mean_all: empty tensor");
  double s = 0.0;
  for (double v : x.value().vec()) s += v;
  auto xn = x.node();
  auto shape = x.value().shape();
  return make_node(Tensor::scalar(s / static_cast<double>(n)), {x}, [xn, shape, n](const Tensor& g) {
    xn->accumulate(Tensor::full(shape, g.item() / static_cast<double>(n)));
  });
}

Var mean_axis0(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.ndim() != 2) throw std::invalid_argument("mean_axis0: rank-2 required");
  const std::size_t R = xv.rows(), C = xv.cols();
  if (R == 0) throw std::invalid_argument("mean_axis0: empty input");
  Tensor out({C});
  for (std::size_t r = 0; r < R; ++r) {
    const double* row = xv.data() + r * C;
    for (std::size_t c = 0; c < C; ++c) out.at(c) += row[c];
  }
  for (auto& v : out.vec()) v /= static_cast<double>(R);
  auto xn = x.node();
  return make_node(std::move(out), {x}, [xn, R, C](const Tensor& g) {
    Tensor gx({R, C});
    for (std::size_t r = 0; r < R; ++r) {
      double* row = gx.data() + r * C;
      for (std::size_t c = 0; c < C; ++c) row[c] = g.at(c) / static_cast<double>(R);
    }
    xn->accumulate(gx);
  });
}

Var softmax(const Var& x, std::size_t axis) {
  const Tensor& xv = x.value();
  if (!xv.all_finite()) throw NumericError("softmax: non-finite input");
  const LineView lv = line_view(xv, axis, "softmax");
  Tensor out = xv;
  for (std::size_t l = 0; l < lv.n_lines; ++l) {
    double* base = out.data() + l * lv.line_stride;
    double mx = base[0];
    for (std::size_t i = 1; i < lv.line_len; ++i) mx = std::max(mx, base[i * lv.elem_stride]);
    double denom = 0.0;
    for (std::size_t i = 0; i < lv.line_len; ++i) {
      double& v = base[i * lv.elem_stride];
      v = std::exp(v - mx);
      denom += v;
    }
    for (std::size_t i = 0; i < lv.line_len; ++i) base[i * lv.elem_stride] /= denom;
  }
  ensure_finite(out, "softmax");
  auto xn = x.node();
  Tensor yv = out;
  return make_node(std::move(out), {x}, [xn, yv, lv](const Tensor& g) {
    Tensor gx = g;
    for (std::size_t l = 0; l < lv.n_lines; ++l) {
      const double* y = yv.data() + l * lv.line_stride;
      double* gl = gx.data() + l * lv.line_stride;
      double dot = 0.0;
      for (std::size_t i = 0; i < lv.line_len; ++i) {
        dot += gl[i * lv.elem_stride] * y[i * lv.elem_stride];
      }
      for (std::size_t i = 0; i < lv.line_len; ++i) {
        double& v = gl[i * lv.elem_stride];
        v = (v - dot) * y[i * lv.elem_stride];
      }
    }
    xn->accumulate(gx);
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Tensor& xv = x.value();
  const std::size_t C = xv.shape().back();
  if (gain.value().ndim() != 1 || gain.value().size() != C ||
      bias.value().ndim() != 1 || bias.value().size() != C) {
    throw std::invalid_argument("layer_norm: gain/bias must be vectors of length " + std::to_string(C));
  }
  const std::size_t R = xv.size() / C;
  Tensor out = xv;
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < R; ++r) {
    double* row = out.data() + r * C;
    double mu = 0.0;
    for (std::size_t c = 0; c < C; ++c) mu += row[c];
    mu /= static_cast<double>(C);
    double var = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double d = row[c] - mu;
      var += d * d;
    }
    var /= static_cast<double>(C);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < C; ++c) {
      row[c] = gv.at(c) * ((row[c] - mu) * inv) + bv.at(c);
    }
  }
  ensure_finite(out, "layer_norm");
  auto xn = x.node();
  auto gn = gain.node();
  auto bn = bias.node();
  Tensor xcopy = xv;
  Tensor gcopy = gv;
  return make_node(std::move(out), {x, gain, bias}, [xn, gn, bn, xcopy, gcopy, R, C, eps](const Tensor& g) {
    Tensor gx({R, C});
    Tensor ggain({C});
    Tensor gbias({C});
    const double cn = static_cast<double>(C);
    for (std::size_t r = 0; r < R; ++r) {
      const double* xrow = xcopy.data() + r * C;
      const double* grow = g.data() + r * C;
      double mu = 0.0;
      for (std::size_t c = 0; c < C; ++c) mu += xrow[c];
      mu /= cn;
      double var = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        const double d = xrow[c] - mu;
        var += d * d;
      }
      var /= cn;
      const double inv = 1.0 / std::sqrt(var + eps);
      // dxhat = g * gain; dx via the two mean terms of the LN jacobian.
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        const double xhat = (xrow[c] - mu) * inv;
        const double dxhat = grow[c] * gcopy.at(c);
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
        ggain.at(c) += grow[c] * xhat;
        gbias.at(c) += grow[c];
      }
      double* gxrow = gx.data() + r * C;
      for (std::size_t c = 0; c < C; ++c) {
        const double xhat = (xrow[c] - mu) * inv;
        const double dxhat = grow[c] * gcopy.at(c);
        gxrow[c] = inv * (dxhat - sum_dxhat / cn - xhat * sum_dxhat_xhat / cn);
      }
    }
    if (xn->requires_grad) {
      if (xcopy.ndim() == 1) {
        xn->accumulate(Tensor({C}, gx.vec()));
      } else {
        xn->accumulate(gx);
      }
    }
    if (gn->requires_grad) gn->accumulate(ggain);
    if (bn->requires_grad) bn->accumulate(gbias);
  });
}

Var l2_normalize(const Var& x, double eps) {
  const Tensor& xv = x.value();
  const std::size_t C = xv.shape().back();
  const std::size_t R = xv.size() / C;
  Tensor out = xv;
  std::vector<double> denoms(R);
  for (std::size_t r = 0; r < R; ++r) {
    double* row = out.data() + r * C;
    double sq = 0.0;
    for (std::size_t c = 0; c < C; ++c) sq += row[c] * row[c];
    const double norm = std::sqrt(sq);
    if (norm == 0.0 && eps == 0.0) throw NumericError("l2_normalize: zero-norm line without eps guard");
    const double denom = std::max(norm, eps);
    denoms[r] = denom;
    for (std::size_t c = 0; c < C; ++c) row[c] /= denom;
  }
  ensure_finite(out, "l2_normalize");
  auto xn = x.node();
  Tensor yv = out;
  return make_node(std::move(out), {x}, [xn, yv, denoms, R, C](const Tensor& g) {
    Tensor gx = g;
    for (std::size_t r = 0; r < R; ++r) {
      const double* y = yv.data() + r * C;
      double* gl = gx.data() + r * C;
      double dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) dot += gl[c] * y[c];
      for (std::size_t c = 0; c < C; ++c) gl[c] = (gl[c] - dot * y[c]) / denoms[r];
    }
    xn->accumulate(gx);
  });
}

Var cosine_row_loss(const Var& student, const Var& teacher) {
  const Tensor& av = student.value();
  const Tensor bv = teacher.value();  // constant: teacher gradient is stopped here
  if (!av.same_shape(bv)) {
    throw std::invalid_argument("cosine_row_loss: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
  }
  const std::size_t C = av.shape().back();
  const std::size_t R = av.size() / C;
  if (R == 0 || C == 0) throw std::invalid_argument("cosine_row_loss: empty input");
  double loss = 0.0;
  std::vector<double> nas(R), nbs(R), coss(R);
  for (std::size_t r = 0; r < R; ++r) {
    const double* a = av.data() + r * C;
    const double* b = bv.data() + r * C;
    double na = 0.0, nb = 0.0, dot = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      na += a[c] * a[c];
      nb += b[c] * b[c];
      dot += a[c] * b[c];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    if (na == 0.0 || nb == 0.0) throw NumericError("cosine_row_loss: zero-norm row");
    nas[r] = na;
    nbs[r] = nb;
    coss[r] = dot / (na * nb);
    loss -= coss[r];
  }
  loss /= static_cast<double>(R);
  if (!std::isfinite(loss)) throw NumericError("cosine_row_loss: non-finite");
  auto an = student.node();
  Tensor acopy = av;
  return make_node(Tensor::scalar(loss), {student},
                   [an, acopy, bv, nas, nbs, coss, R, C](const Tensor& g) {
    const double go = g.item() / static_cast<double>(R);
    Tensor ga(acopy.shape());
    for (std::size_t r = 0; r < R; ++r) {
      const double* a = acopy.data() + r * C;
      const double* b = bv.data() + r * C;
      double* out = ga.data() + r * C;
      const double inv_ab = 1.0 / (nas[r] * nbs[r]);
      const double inv_aa = 1.0 / (nas[r] * nas[r]);
      for (std::size_t c = 0; c < C; ++c) {
        out[c] = -go * (b[c] * inv_ab - coss[r] * a[c] * inv_aa);
      }
    }
    an->accumulate(ga);
  });
}

Var softmax_cross_entropy(const Var& logits, const std::vector<std::size_t>& labels) {
  const Tensor& zv = logits.value();
  if (zv.ndim() != 2) throw std::invalid_argument("softmax_cross_entropy: rank-2 logits required");
  const std::size_t R = zv.rows(), C = zv.cols();
  if (labels.size() != R) throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
  for (std::size_t y : labels) {
    if (y >= C) throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(y));
  }
  Tensor probs({R, C});
  double loss = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    const double* z = zv.data() + r * C;
    double* p = probs.data() + r * C;
    double mx = z[0];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, z[c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      p[c] = std::exp(z[c] - mx);
      denom += p[c];
    }
    for (std::size_t c = 0; c < C; ++c) p[c] /= denom;
    loss += std::log(denom) + mx - z[labels[r]];
  }
  loss /= static_cast<double>(R);
  if (!std::isfinite(loss)) throw NumericError("softmax_cross_entropy: non-finite");
  auto zn = logits.node();
  return make_node(Tensor::scalar(loss), {logits}, [zn, probs, labels, R, C](const Tensor& g) {
    const double go = g.item() / static_cast<double>(R);
    Tensor gz = probs;
    for (std::size_t r = 0; r < R; ++r) gz.at2(r, labels[r]) -= 1.0;
    for (auto& v : gz.vec()) v *= go;
    zn->accumulate(gz);
  });
}

}  // namespace voxssl
