#include "snspec/clustercount.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace snspec {

EigenvalueSeq::EigenvalueSeq(std::vector<double> values_in, std::size_t p_in, std::size_t n_in)
    : values(std::move(values_in)), p(p_in), n(n_in) {
  if (values.size() != p)
    throw std::invalid_argument("EigenvalueSeq: expected p = " + std::to_string(p) +
                                " values, got " + std::to_string(values.size()));
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[i - 1] + 1e-12 * (1.0 + std::abs(values[i - 1])))
      throw std::invalid_argument("EigenvalueSeq: values not non-increasing at index " +
                                  std::to_string(i));
  if (p > n) {
    const double tol = 1e-10 * (1.0 + std::abs(values.empty() ? 0.0 : values[0]));
    for (std::size_t i = n; i < p; ++i)
      if (std::abs(values[i]) > tol)
        throw std::invalid_argument("EigenvalueSeq: trailing eigenvalue " +
                                    std::to_string(values[i]) + " at index " +
                                    std::to_string(i) + " should vanish for p > n");
  }
}

namespace {

constexpr double kOverflowExponent = 350.0;

// log of the mean of exp(2 * delta_i) over i = k+1..limit-1 (1-based),
// computed in log space
double log_theta_tilde(const std::vector<double>& lam, std::size_t k, std::size_t limit,
                       bool* overflow) {
  const std::size_t count = limit - 1 - k;
  double max_e = -std::numeric_limits<double>::infinity();
  std::vector<double> expo(count);
  for (std::size_t i = k + 1; i <= limit - 1; ++i) {
    const double d = 2.0 * (lam[i - 1] - lam[i]);
    expo[i - k - 1] = d;
    max_e = std::max(max_e, d);
    if (overflow && d > kOverflowExponent) *overflow = true;
  }
  double s = 0.0;
  for (double d : expo) s += std::exp(d - max_e);
  return max_e + std::log(s) - std::log(static_cast<double>(count));
}

std::size_t mode_limit(const EigenvalueSeq& lam, ThetaMode mode) {
  return mode == ThetaMode::DirectP ? lam.p : lam.n;
}

}  // namespace

ThetaStats theta_stats(const EigenvalueSeq& lam, std::size_t k, ThetaMode mode) {
  const std::size_t limit = mode_limit(lam, mode);
  if (limit > lam.values.size())
    throw std::invalid_argument("theta_stats: sequence shorter than the index limit");
  if (k + 1 >= limit) throw std::invalid_argument("theta_stats: need k+1 < limit");
  ThetaStats out;
  out.theta.resize(limit - 1);
  for (std::size_t i = 1; i <= limit - 1; ++i) {
    const double d = lam.values[i - 1] - lam.values[i];
    if (d > kOverflowExponent) out.overflow = true;
    out.theta[i - 1] = std::exp(d);
  }
  out.log_theta_tilde = log_theta_tilde(lam.values, k, limit, &out.overflow);
  out.theta_tilde = std::exp(out.log_theta_tilde);
  return out;
}

std::string criterion_name(CriterionKind kind) {
  switch (kind) {
    case CriterionKind::EDA: return "EDA";
    case CriterionKind::EDB: return "EDB";
    case CriterionKind::PseudoEDA: return "pEDA";
    case CriterionKind::PseudoEDB: return "pEDB";
  }
  return "EDA";
}

namespace {

CriterionResult criterion(const EigenvalueSeq& lam, std::size_t w, CriterionKind kind) {
  const bool pseudo = kind == CriterionKind::PseudoEDA || kind == CriterionKind::PseudoEDB;
  const bool bic = kind == CriterionKind::EDB || kind == CriterionKind::PseudoEDB;
  const std::size_t limit = pseudo ? lam.n : lam.p;
  if (limit > lam.values.size())
    throw std::invalid_argument("criterion: sequence shorter than the index limit");
  if (w < 1 || w + 1 >= limit)
    throw std::invalid_argument("criterion: w = " + std::to_string(w) +
                                " out of range for limit " + std::to_string(limit));
  const double p = static_cast<double>(lam.p);
  const double n = static_cast<double>(lam.n);
  const double gap_coeff = bic ? std::log(p) : 1.0;
  const double penalty_coeff = bic ? std::log(n) : 2.0;

  CriterionResult out;
  out.kind = kind;
  out.w = w;
  out.values.resize(w);
  for (std::size_t k = 1; k <= w; ++k) {
    bool overflow = false;
    const double log_tt = log_theta_tilde(lam.values, k, limit, &overflow);
    out.overflow_flagged = out.overflow_flagged || overflow;
    const double lead = lam.values[0] - lam.values[k];  // lambda_1 - lambda_{k+1}
    const double mid = static_cast<double>(limit - k - 1) * log_tt;
    const double pen = penalty_coeff * p * static_cast<double>(k) / n;
    out.values[k - 1] = -gap_coeff * lead + mid + pen;
  }
  out.k_hat = 1;
  for (std::size_t k = 2; k <= w; ++k)
    if (out.values[k - 1] < out.values[out.k_hat - 1]) out.k_hat = k;
  return out;
}

}  // namespace

CriterionResult eda(const EigenvalueSeq& lam, std::size_t w) {
  return criterion(lam, w, CriterionKind::EDA);
}
CriterionResult edb(const EigenvalueSeq& lam, std::size_t w) {
  return criterion(lam, w, CriterionKind::EDB);
}
CriterionResult pseudo_eda(const EigenvalueSeq& lam, std::size_t w) {
  return criterion(lam, w, CriterionKind::PseudoEDA);
}
CriterionResult pseudo_edb(const EigenvalueSeq& lam, std::size_t w) {
  return criterion(lam, w, CriterionKind::PseudoEDB);
}

std::size_t default_w(std::size_t n) {
  if (n == 0) throw std::invalid_argument("default_w: n must be >= 1");
  return static_cast<std::size_t>(
      std::floor(6.0 * std::pow(static_cast<double>(n), 0.1)));
}

std::size_t spike_atoms_for(const SpectralMeasure& H, std::size_t K) {
  std::size_t L = 0, covered = 0;
  while (covered < K) {
    if (L >= H.atoms.size())
      throw std::invalid_argument("spike_atoms_for: K exceeds the spectrum size");
    covered += H.atoms[L].multiplicity;
    ++L;
  }
  if (covered != K)
    throw std::invalid_argument(
        "spike_atoms_for: K cuts through a population eigenvalue multiplicity");
  return L;
}

std::vector<double> zeta_limits(const EquivalentModel& model, std::size_t K) {
  if (K == 0) throw std::invalid_argument("zeta_limits: K must be >= 1");
  const SpectralMeasure& H = model.measure;
  const std::size_t L = spike_atoms_for(H, K);
  if (L >= H.atoms.size())
    throw std::invalid_argument("zeta_limits: no bulk left below the spikes");

  const AspectRatio c = model.aspect();
  const SpectralMeasure bulk = bulk_measure(H, L);
  std::vector<double> phi_atom(L);
  for (std::size_t a = 0; a < L; ++a) {
    const auto cls = classify_spike(H.atoms[a].value, bulk, c);
    if (cls.kind != SpikeKind::Distant)
      throw std::domain_error("zeta_limits: spike atom " + std::to_string(a + 1) +
                              " is close (phi' = " + std::to_string(cls.phi_derivative) + ")");
    phi_atom[a] = cls.phi_value;
  }
  const auto support = support_endpoints(bulk, c);
  const double edge = support.back().upper;

  std::vector<double> phi_expanded;
  phi_expanded.reserve(K);
  for (std::size_t a = 0; a < L; ++a)
    phi_expanded.insert(phi_expanded.end(), H.atoms[a].multiplicity, phi_atom[a]);

  std::vector<double> zeta(K);
  for (std::size_t k = 0; k + 1 < K; ++k) zeta[k] = std::exp(phi_expanded[k] - phi_expanded[k + 1]);
  zeta[K - 1] = std::exp(phi_expanded[K - 1] - edge);
  return zeta;
}

GapConditionReport gap_report(const EquivalentModel& model, std::size_t K, std::size_t p,
                              std::size_t n) {
  GapConditionReport out;
  if (K <= 1) return out;  // empty sequences, vacuously satisfied
  const auto zeta = zeta_limits(model, K);
  const double c = static_cast<double>(p) / static_cast<double>(n);
  const double logp = std::log(static_cast<double>(p));
  const double logn = std::log(static_cast<double>(n));

  out.zeta.assign(zeta.begin() + 1, zeta.end());  // zeta_2..zeta_K
  out.a_seq.assign(K - 1, 0.0);
  out.b_seq.assign(K - 1, 0.0);
  double a_next = 0.0, b_next = 0.0;  // a_{K+1} = b_{K+1} = 0
  for (std::size_t s = K; s >= 2; --s) {
    const double zs = zeta[s - 1];
    const double a_s = zs * zs + std::log(zs) - 2.0 * c - 1.0 + a_next;
    const double b_s = zs * zs + logp * std::log(zs) - c * logn - 1.0 + b_next;
    out.a_seq[s - 2] = a_s;
    out.b_seq[s - 2] = b_s;
    a_next = a_s;
    b_next = b_s;
  }
  for (double a : out.a_seq) out.eda_ok = out.eda_ok && a > 0.0;
  for (double b : out.b_seq) out.edb_ok = out.edb_ok && b > 0.0;
  return out;
}

}  // namespace snspec
