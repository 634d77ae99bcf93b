#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "snspec/matkernel.hpp"
#include "snspec/rmtlimits.hpp"
#include "snspec/rng.hpp"

namespace snspec {

/// Mixture of K mean vectors; cluster s receives floor(fractions[s]*n)
/// columns, remainder appended to the last cluster.
struct MixtureSpec {
  std::size_t p = 0;
  std::size_t n = 0;
  std::size_t K = 0;
  std::vector<std::vector<double>> means;  // K vectors of length p, unscaled
  std::vector<double> fractions;           // K positive reals summing to 1

  std::vector<std::size_t> cluster_sizes() const;
  void validate() const;
};

enum class CovarianceKind { Identity, Toeplitz, ToeplitzPlusSpike, Custom };

struct CovarianceSpec {
  CovarianceKind kind = CovarianceKind::Identity;
  double rho = 0.0;
  double excess = 0.0;
  std::size_t position = 1;  // 1-based diagonal index receiving the excess
  DenseMatrix custom;

  static CovarianceSpec identity();
  static CovarianceSpec toeplitz(double rho);
  static CovarianceSpec toeplitz_plus_spike(double rho, double excess, std::size_t position);
  static CovarianceSpec custom_matrix(DenseMatrix m);
};

enum class NoiseLaw { Gaussian, StudentT8, Rademacher, ChiSquare3 };

std::string noise_law_name(NoiseLaw law);
NoiseLaw noise_law_from_name(const std::string& name);

struct LabeledSample {
  DenseMatrix X;                    // p x n
  std::vector<std::size_t> labels;  // 0-based cluster ids, block order
  DenseMatrix A;                    // realized signal, column i = means[label_i]/sqrt(n)
};

/// A = N H^T with N = [mu_1..mu_K]/sqrt(n) and H the 0/1 membership
/// matrix; labels in contiguous blocks by cluster.
std::pair<DenseMatrix, std::vector<std::size_t>> build_signal(const MixtureSpec& spec);

DenseMatrix build_covariance(const CovarianceSpec& spec, std::size_t p);

/// i.i.d. entries, each law standardized to mean 0 / variance 1 and then
/// scaled by 1/sqrt(n).
DenseMatrix sample_noise(NoiseLaw law, std::size_t p, std::size_t n, RngStream& rng);

/// X = A + psd_sqrt(Sigma) * W; the centered variant subtracts the mean
/// column from every column.
DenseMatrix assemble(const DenseMatrix& A, const DenseMatrix& Sigma, const DenseMatrix& W,
                     bool centered);
/// Same with a precomputed PSD square root (the per-replication hot path).
DenseMatrix assemble_with_sqrt(const DenseMatrix& A, const DenseMatrix& sigma_sqrt,
                               const DenseMatrix& W, bool centered);

/// Subtract the mean column in place.
void center_columns(DenseMatrix& X);

/// R = A A^T + Sigma (or A Phi A^T + Sigma when centered), eigendecomposed
/// and grouped into a SpectralMeasure.
EquivalentModel population_model(const DenseMatrix& A, const DenseMatrix& Sigma, bool centered,
                                 double group_tol = 1e-6);

struct CasePreset {
  MixtureSpec mixture;
  CovarianceSpec covariance;
  std::size_t K = 0;
};

/// Simulation cases 1..8: exact mean vectors, fractions, covariance and
/// cluster count, including the scale parameters a = sqrt(p/10) (cases
/// 2/4) and a = sqrt(n/10) (case 8).
CasePreset case_preset(int id, std::size_t p, std::size_t n);

}  // namespace snspec
