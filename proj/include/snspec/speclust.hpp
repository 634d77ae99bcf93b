#pragma once

#include <cstddef>
#include <vector>

#include "snspec/matkernel.hpp"
#include "snspec/rng.hpp"

namespace snspec {

/// Top-K eigenvector embedding; columns orthonormal, sign-normalized so
/// the largest-magnitude entry of each column is positive.
struct Embedding {
  DenseMatrix U_hat;  // n x K
};

Embedding embed(const DenseMatrix& S_tilde, std::size_t K);

struct Clustering {
  std::vector<std::size_t> labels;  // 0-based cluster ids, every cluster nonempty
  DenseMatrix centers;              // K x dim
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // per Lloyd iteration of the winning restart
};

/// K-means on the rows of U: k-means++ seeding, Lloyd iterations capped at
/// 300 with 1e-8 inertia tolerance, best of `restarts` runs. An emptied
/// cluster is reseeded at the farthest point.
Clustering kmeans_rows(const DenseMatrix& U, std::size_t K, RngStream& rng,
                       std::size_t restarts = 10);

/// Minimum label-mismatch fraction over cluster relabelings; exhaustive
/// permutations up to 8 labels, Hungarian assignment beyond.
double misclustering_rate(const std::vector<std::size_t>& labels,
                          const std::vector<std::size_t>& truth);

/// Average silhouette width over k-means clusterings of the columns of X;
/// returns the k with the largest width (degenerate silhouette terms count
/// as 0). Ties pick the smaller k.
std::size_t silhouette_k(const DenseMatrix& X, const std::vector<std::size_t>& k_range,
                         RngStream& rng);

/// Tibshirani gap statistic on the columns of X with B uniform reference
/// draws over the per-feature bounding box; smallest k with
/// Gap(k) >= Gap(k+1) - s_{k+1}.
std::size_t gap_statistic_k(const DenseMatrix& X, const std::vector<std::size_t>& k_range,
                            std::size_t B, RngStream& rng);

}  // namespace snspec
