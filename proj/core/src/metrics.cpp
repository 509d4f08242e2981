#include "voxssl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace voxssl {

namespace {

// finite stand-in for "no seed on this line"; far larger than any reachable
// squared distance yet small enough that adding offsets stays exact
constexpr double kFar = 1e15;

std::size_t require_extent_match(const std::vector<std::uint8_t>& v,
                                 const std::array<std::size_t, 3>& extents, const char* who) {
  const std::size_t n = extents[0] * extents[1] * extents[2];
  if (v.size() != n) {
    throw std::invalid_argument(std::string(who) + ": mask size " + std::to_string(v.size()) +
                                " does not match extents product " + std::to_string(n));
  }
  return n;
}

/// One-dimensional squared distance transform: d[q] = min_j (f[j] + (q-j)^2),
/// via the lower envelope of the parabolas rooted at each j. Exact for the
/// integer-valued inputs used here. `f` and `d` walk the line with `stride`.
void dt_line(const double* f, double* d, std::size_t n, std::size_t stride,
             std::vector<int>& v, std::vector<double>& z, std::vector<double>& line) {
  for (std::size_t i = 0; i < n; ++i) line[i] = f[i * stride];
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < static_cast<int>(n); ++q) {
    double s = ((line[q] + double(q) * q) - (line[v[k]] + double(v[k]) * v[k])) /
               (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((line[q] + double(q) * q) - (line[v[k]] + double(v[k]) * v[k])) /
          (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < static_cast<int>(n); ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = double(q) - v[k];
    d[q * stride] = dq * dq + line[v[k]];
  }
}

}  // namespace

std::vector<std::uint8_t> label_mask(const std::vector<std::uint8_t>& labels, std::uint8_t label) {
  std::vector<std::uint8_t> mask(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) mask[i] = labels[i] == label ? 1 : 0;
  return mask;
}

double dice_overlap(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dice_overlap: mask sizes differ");
  }
  std::size_t inter = 0, total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool fa = a[i] != 0, fb = b[i] != 0;
    inter += fa && fb;
    total += fa;
    total += fb;
  }
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

std::vector<std::uint8_t> surface_mask(const std::vector<std::uint8_t>& mask,
                                       const std::array<std::size_t, 3>& extents) {
  require_extent_match(mask, extents, "surface_mask");
  const std::size_t ex = extents[0], ey = extents[1], ez = extents[2];
  std::vector<std::uint8_t> surf(mask.size(), 0);
  const auto at = [&](std::size_t x, std::size_t y, std::size_t z) {
    return mask[(x * ey + y) * ez + z] != 0;
  };
  for (std::size_t x = 0; x < ex; ++x) {
    for (std::size_t y = 0; y < ey; ++y) {
      for (std::size_t z = 0; z < ez; ++z) {
        if (!at(x, y, z)) continue;
        const bool border = x == 0 || x + 1 == ex || y == 0 || y + 1 == ey || z == 0 || z + 1 == ez;
        const bool exposed = border || !at(x - 1, y, z) || !at(x + 1, y, z) || !at(x, y - 1, z) ||
                             !at(x, y + 1, z) || !at(x, y, z - 1) || !at(x, y, z + 1);
        if (exposed) surf[(x * ey + y) * ez + z] = 1;
      }
    }
  }
  return surf;
}

std::vector<double> squared_edt(const std::vector<std::uint8_t>& seeds,
                                const std::array<std::size_t, 3>& extents) {
  const std::size_t n = require_extent_match(seeds, extents, "squared_edt");
  const std::size_t ex = extents[0], ey = extents[1], ez = extents[2];
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = seeds[i] != 0 ? 0.0 : kFar;

  const std::size_t longest = std::max({ex, ey, ez});
  std::vector<int> v(longest);
  std::vector<double> z(longest + 1), line(longest);

  // z lines (stride 1), then y (stride ez), then x (stride ey*ez)
  for (std::size_t x = 0; x < ex; ++x) {
    for (std::size_t y = 0; y < ey; ++y) {
      double* p = d.data() + (x * ey + y) * ez;
      dt_line(p, p, ez, 1, v, z, line);
    }
  }
  for (std::size_t x = 0; x < ex; ++x) {
    for (std::size_t zz = 0; zz < ez; ++zz) {
      double* p = d.data() + x * ey * ez + zz;
      dt_line(p, p, ey, ez, v, z, line);
    }
  }
  for (std::size_t y = 0; y < ey; ++y) {
    for (std::size_t zz = 0; zz < ez; ++zz) {
      double* p = d.data() + y * ez + zz;
      dt_line(p, p, ex, ey * ez, v, z, line);
    }
  }

  for (double& x : d) {
    if (x >= kFar / 2) x = std::numeric_limits<double>::infinity();
  }
  return d;
}

double surface_dice(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b,
                    const std::array<std::size_t, 3>& extents, double tolerance) {
  require_extent_match(a, extents, "surface_dice");
  require_extent_match(b, extents, "surface_dice");
  if (!(tolerance >= 0.0)) {
    throw std::invalid_argument("surface_dice: tolerance must be non-negative");
  }
  const std::vector<std::uint8_t> sa = surface_mask(a, extents);
  const std::vector<std::uint8_t> sb = surface_mask(b, extents);
  const std::size_t na = static_cast<std::size_t>(std::count(sa.begin(), sa.end(), 1));
  const std::size_t nb = static_cast<std::size_t>(std::count(sb.begin(), sb.end(), 1));
  if (na == 0 && nb == 0) return 1.0;  // both masks empty
  if (na == 0 || nb == 0) return 0.0;

  const std::vector<double> da = squared_edt(sa, extents);
  const std::vector<double> db = squared_edt(sb, extents);
  const double tol2 = tolerance * tolerance;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    if (sa[i] != 0 && db[i] <= tol2) ++hits;
    if (sb[i] != 0 && da[i] <= tol2) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(na + nb);
}

double auc_score(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("auc_score: scores and labels differ in length");
  }
  if (scores.empty()) throw std::invalid_argument("auc_score: empty input");
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("auc_score: scores must be finite");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });

  // 1-based average ranks over tied groups
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }

  std::size_t n_pos = 0, n_neg = 0;
  double rank_sum_pos = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (labels[k] != 0) {
      ++n_pos;
      rank_sum_pos += rank[k];
    } else {
      ++n_neg;
    }
  }
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("auc_score: both classes must occur");
  }
  const double np = static_cast<double>(n_pos);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

}  // namespace voxssl
