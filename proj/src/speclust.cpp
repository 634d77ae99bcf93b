#include "snspec/speclust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace snspec {

Embedding embed(const DenseMatrix& S_tilde, std::size_t K) {
  const std::size_t n = S_tilde.rows();
  if (K > n) throw std::invalid_argument("embed: K exceeds the matrix size");
  SymEigResult eig = sym_eig(S_tilde);
  Embedding out;
  out.U_hat = DenseMatrix(n, K);
  for (std::size_t k = 0; k < K; ++k) {
    // sign convention: largest-magnitude entry positive
    std::size_t arg = 0;
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::abs(eig.vectors(i, k));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    const double s = eig.vectors(arg, k) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.U_hat(i, k) = s * eig.vectors(i, k);
  }
  return out;
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

struct LloydRun {
  std::vector<std::size_t> labels;
  DenseMatrix centers;
  double inertia = 0.0;
  std::vector<double> trace;
};

LloydRun lloyd_once(const DenseMatrix& U, std::size_t K, RngStream& rng) {
  const std::size_t n = U.rows();
  const std::size_t d = U.cols();

  // k-means++ seeding
  DenseMatrix centers(K, d);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  for (std::size_t j = 0; j < d; ++j) centers(0, j) = U(first, j);
  for (std::size_t c = 1; c < K; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      min_d2[i] = std::min(min_d2[i], sq_dist(U.row(i), centers.row(c - 1), d));
      total += min_d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = rng.uniform01() * total;
      for (std::size_t i = 0; i < n; ++i) {
        target -= min_d2[i];
        if (target <= 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    for (std::size_t j = 0; j < d; ++j) centers(c, j) = U(pick, j);
  }

  std::vector<std::size_t> labels(n, 0);
  std::vector<std::size_t> counts(K, 0);
  double prev_inertia = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  for (int iter = 0; iter < 300; ++iter) {
    // assignment
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < K; ++c) {
        const double d2 = sq_dist(U.row(i), centers.row(c), d);
        if (d2 < best) {
          best = d2;
          arg = c;
        }
      }
      labels[i] = arg;
      inertia += best;
    }
    // repair empty clusters by stealing the farthest point
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[labels[i]];
    for (std::size_t c = 0; c < K; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = 0;
      double far_d2 = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[labels[i]] <= 1) continue;
        const double d2 = sq_dist(U.row(i), centers.row(labels[i]), d);
        if (d2 > far_d2) {
          far_d2 = d2;
          far = i;
        }
      }
      --counts[labels[far]];
      labels[far] = c;
      counts[c] = 1;
      for (std::size_t j = 0; j < d; ++j) centers(c, j) = U(far, j);
    }
    // recompute inertia after repairs
    inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) inertia += sq_dist(U.row(i), centers.row(labels[i]), d);
    trace.push_back(inertia);

    // update step
    DenseMatrix next(K, d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double* ct = next.row(labels[i]);
      const double* ui = U.row(i);
      for (std::size_t j = 0; j < d; ++j) ct[j] += ui[j];
    }
    for (std::size_t c = 0; c < K; ++c)
      for (std::size_t j = 0; j < d; ++j) next(c, j) /= static_cast<double>(counts[c]);
    centers = next;

    if (prev_inertia - inertia <= 1e-8 * (1.0 + inertia)) {
      prev_inertia = inertia;
      break;
    }
    prev_inertia = inertia;
  }

  LloydRun out;
  out.labels = std::move(labels);
  out.centers = std::move(centers);
  // final inertia against the updated centers
  out.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    out.inertia += sq_dist(U.row(i), out.centers.row(out.labels[i]), d);
  out.trace = std::move(trace);
  return out;
}

}  // namespace

Clustering kmeans_rows(const DenseMatrix& U, std::size_t K, RngStream& rng,
                       std::size_t restarts) {
  const std::size_t n = U.rows();
  if (K == 0) throw std::invalid_argument("kmeans_rows: K must be >= 1");
  if (K > n) throw std::invalid_argument("kmeans_rows: K exceeds the number of rows");
  if (restarts == 0) restarts = 1;

  LloydRun best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    LloydRun run = lloyd_once(U, K, rng);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  Clustering out;
  out.labels = std::move(best.labels);
  out.centers = std::move(best.centers);
  out.inertia = best.inertia;
  out.inertia_trace = std::move(best.trace);
  return out;
}

namespace {

// Hungarian algorithm (potentials form) minimizing total cost on a square
// matrix; returns the column assigned to each row.
std::vector<std::size_t> hungarian_min(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = std::numeric_limits<double>::infinity();
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

double misclustering_rate(const std::vector<std::size_t>& labels,
                          const std::vector<std::size_t>& truth) {
  if (labels.size() != truth.size())
    throw std::invalid_argument("misclustering_rate: length mismatch");
  if (labels.empty()) throw std::invalid_argument("misclustering_rate: empty labelings");
  std::size_t K = 0;
  for (std::size_t v : labels) K = std::max(K, v + 1);
  for (std::size_t v : truth) K = std::max(K, v + 1);
  std::vector<std::vector<double>> agree(K, std::vector<double>(K, 0.0));
  for (std::size_t i = 0; i < labels.size(); ++i) agree[labels[i]][truth[i]] += 1.0;

  double best = 0.0;
  if (K <= 8) {
    std::vector<std::size_t> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      double s = 0.0;
      for (std::size_t a = 0; a < K; ++a) s += agree[a][perm[a]];
      best = std::max(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    // Hungarian assignment on the negated agreement counts
    double cap = 0.0;
    for (const auto& row : agree)
      for (double v : row) cap = std::max(cap, v);
    std::vector<std::vector<double>> cost(K, std::vector<double>(K, 0.0));
    for (std::size_t a = 0; a < K; ++a)
      for (std::size_t b = 0; b < K; ++b) cost[a][b] = cap - agree[a][b];
    const auto assign = hungarian_min(cost);
    for (std::size_t a = 0; a < K; ++a) best += agree[a][assign[a]];
  }
  return 1.0 - best / static_cast<double>(labels.size());
}

namespace {

// columns of X as points: row-major point array n x p
DenseMatrix points_from_columns(const DenseMatrix& X) {
  DenseMatrix P(X.cols(), X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t j = 0; j < X.cols(); ++j) P(j, i) = X(i, j);
  return P;
}

}  // namespace

std::size_t silhouette_k(const DenseMatrix& X, const std::vector<std::size_t>& k_range,
                         RngStream& rng) {
  if (k_range.empty()) throw std::invalid_argument("silhouette_k: empty k range");
  const DenseMatrix P = points_from_columns(X);
  const std::size_t n = P.rows();
  for (std::size_t k : k_range)
    if (k < 2 || k + 1 > n)
      throw std::invalid_argument("silhouette_k: k must lie in [2, n-1]");

  // pairwise distances once
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::sqrt(sq_dist(P.row(i), P.row(j), P.cols()));
      dist[i * n + j] = dist[j * n + i] = d;
    }

  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t best_k = k_range.front();
  for (std::size_t k : k_range) {
    RngStream sub = rng.split();
    const Clustering cl = kmeans_rows(P, k, sub);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t v : cl.labels) ++counts[v];

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> sum_to(k, 0.0);
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) sum_to[cl.labels[j]] += dist[i * n + j];
      const std::size_t own = cl.labels[i];
      if (counts[own] <= 1) continue;  // singleton: silhouette term 0
      const double a = sum_to[own] / static_cast<double>(counts[own] - 1);
      double b = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        if (c == own || counts[c] == 0) continue;
        b = std::min(b, sum_to[c] / static_cast<double>(counts[c]));
      }
      const double denom = std::max(a, b);
      total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    const double score = total / static_cast<double>(n);
    if (score > best_score) {
      best_score = score;
      best_k = k;
    }
  }
  return best_k;
}

std::size_t gap_statistic_k(const DenseMatrix& X, const std::vector<std::size_t>& k_range,
                            std::size_t B, RngStream& rng) {
  if (k_range.empty()) throw std::invalid_argument("gap_statistic_k: empty k range");
  if (B < 10) throw std::invalid_argument("gap_statistic_k: need B >= 10 references");
  const DenseMatrix P = points_from_columns(X);
  const std::size_t n = P.rows();
  const std::size_t d = P.cols();

  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      lo[j] = std::min(lo[j], P(i, j));
      hi[j] = std::max(hi[j], P(i, j));
    }

  const std::size_t m = k_range.size();
  std::vector<double> log_w(m, 0.0);
  for (std::size_t t = 0; t < m; ++t) {
    RngStream sub = rng.split();
    log_w[t] = std::log(std::max(kmeans_rows(P, k_range[t], sub).inertia, 1e-300));
  }

  std::vector<std::vector<double>> log_w_ref(m, std::vector<double>(B, 0.0));
  for (std::size_t b = 0; b < B; ++b) {
    DenseMatrix ref(n, d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j)
        ref(i, j) = lo[j] + (hi[j] - lo[j]) * rng.uniform01();
    for (std::size_t t = 0; t < m; ++t) {
      RngStream sub = rng.split();
      log_w_ref[t][b] = std::log(std::max(kmeans_rows(ref, k_range[t], sub).inertia, 1e-300));
    }
  }

  std::vector<double> gap(m, 0.0), s(m, 0.0);
  for (std::size_t t = 0; t < m; ++t) {
    double mean = 0.0;
    for (double v : log_w_ref[t]) mean += v;
    mean /= static_cast<double>(B);
    double var = 0.0;
    for (double v : log_w_ref[t]) var += (v - mean) * (v - mean);
    var /= static_cast<double>(B);
    gap[t] = mean - log_w[t];
    s[t] = std::sqrt(var) * std::sqrt(1.0 + 1.0 / static_cast<double>(B));
  }

  for (std::size_t t = 0; t + 1 < m; ++t)
    if (gap[t] >= gap[t + 1] - s[t + 1]) return k_range[t];
  return k_range.back();
}

}  // namespace snspec
