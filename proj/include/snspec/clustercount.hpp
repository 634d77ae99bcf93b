#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "snspec/rmtlimits.hpp"

namespace snspec {

/// Sample eigenvalues, descending. For p > n the trailing p - n entries
/// must vanish (the Gram matrix is rank deficient).
struct EigenvalueSeq {
  std::vector<double> values;
  std::size_t p = 0;
  std::size_t n = 0;

  EigenvalueSeq() = default;
  EigenvalueSeq(std::vector<double> values_in, std::size_t p_in, std::size_t n_in);
};

enum class ThetaMode { DirectP, DirectN };

struct ThetaStats {
  std::vector<double> theta;  // theta_i = exp(lambda_i - lambda_{i+1}), i = 1..limit-1
  double theta_tilde = 0.0;   // mean of theta_i^2 over i = k+1..limit-1
  double log_theta_tilde = 0.0;
  bool overflow = false;  // some exponent exceeded 350 (divergent-spike regime)
};

/// Eigenvalue-difference statistics; mode picks the index limit (p or n).
ThetaStats theta_stats(const EigenvalueSeq& lam, std::size_t k, ThetaMode mode);

enum class CriterionKind { EDA, EDB, PseudoEDA, PseudoEDB };

std::string criterion_name(CriterionKind kind);

struct CriterionResult {
  CriterionKind kind = CriterionKind::EDA;
  std::vector<double> values;  // criterion_k / n for k = 1..w
  std::size_t k_hat = 1;       // argmin, smallest k on ties
  std::size_t w = 0;
  bool overflow_flagged = false;
};

/// EDA_k = -n(l_1 - l_{k+1}) + n(p-k-1) log theta~_{p,k} + 2pk, minimized
/// over k = 1..w after dividing by n. EDB swaps the coefficients to
/// log(p) and log(n); the pseudo variants (required when p > n) replace
/// the middle term with n(n-k-1) log theta~_{n,k}.
CriterionResult eda(const EigenvalueSeq& lam, std::size_t w);
CriterionResult edb(const EigenvalueSeq& lam, std::size_t w);
CriterionResult pseudo_eda(const EigenvalueSeq& lam, std::size_t w);
CriterionResult pseudo_edb(const EigenvalueSeq& lam, std::size_t w);

/// Search cap floor(6 * n^0.1).
std::size_t default_w(std::size_t n);

/// Number of leading atoms covering exactly K multiplicity-counted
/// eigenvalues; throws if K cuts through a multiplicity.
std::size_t spike_atoms_for(const SpectralMeasure& H, std::size_t K);

/// Limits of the theta statistics: zeta_k = exp(phi(g_k) - phi(g_{k+1}))
/// for k < K over the multiplicity-expanded population spikes, and
/// zeta_K = exp(phi(g_K) - upper bulk edge). All spikes must be distant.
std::vector<double> zeta_limits(const EquivalentModel& model, std::size_t K);

struct GapConditionReport {
  std::vector<double> zeta;   // zeta_2..zeta_K
  std::vector<double> a_seq;  // a_2..a_K
  std::vector<double> b_seq;  // b_2..b_K
  bool eda_ok = true;         // min a_s > 0 (vacuously true for K = 1)
  bool edb_ok = true;
};

/// a_s = zeta_s^2 + log zeta_s - 2c - 1 + a_{s+1} (a_{K+1} = 0) and
/// b_s = zeta_s^2 + log(p) log zeta_s - c log(n) - 1 + b_{s+1}.
GapConditionReport gap_report(const EquivalentModel& model, std::size_t K, std::size_t p,
                              std::size_t n);

}  // namespace snspec
