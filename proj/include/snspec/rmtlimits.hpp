#pragma once

#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "snspec/matkernel.hpp"

namespace snspec {

/// Discrete eigenvalue measure: atoms (value, multiplicity) with strictly
/// decreasing values and multiplicities summing to `dimension`. Integrals
/// against it use weights multiplicity/dimension.
struct SpectralMeasure {
  struct Atom {
    double value;
    std::size_t multiplicity;
  };
  std::vector<Atom> atoms;
  std::size_t dimension = 0;

  SpectralMeasure() = default;
  SpectralMeasure(std::vector<Atom> atoms_in, std::size_t dimension_in);

  std::size_t distinct_count() const { return atoms.size(); }
  /// Multiplicity-counted eigenvalues, descending.
  std::vector<double> expanded() const;
  /// sum_i w_i * f(gamma_i) with w_i = m_i / dimension.
  template <typename F>
  double integrate(F f) const {
    double s = 0.0;
    for (const auto& a : atoms)
      s += (static_cast<double>(a.multiplicity) / static_cast<double>(dimension)) * f(a.value);
    return s;
  }
  template <typename F>
  std::complex<double> integrate_c(F f) const {
    std::complex<double> s = 0.0;
    for (const auto& a : atoms)
      s += (static_cast<double>(a.multiplicity) / static_cast<double>(dimension)) * f(a.value);
    return s;
  }
};

/// Group a numeric spectrum (any order) into distinct atoms. Values that
/// differ by at most rel_tol*(1+|value|) coalesce; each atom takes the
/// group mean.
SpectralMeasure measure_from_eigenvalues(const std::vector<double>& values,
                                         double rel_tol = 1e-6);

/// Remove the leading `spike_atoms` atoms and renormalize the remainder
/// (dimension shrinks accordingly), giving the bulk law that the sample
/// eigenvalue limits of the spikes are computed against.
SpectralMeasure bulk_measure(const SpectralMeasure& H, std::size_t spike_atoms);

struct AspectRatio {
  std::size_t p = 0;
  std::size_t n = 0;
  double c_n = 0.0;

  static AspectRatio from_dims(std::size_t p, std::size_t n);
  static AspectRatio from_ratio(double c);  // limit evaluations, c >= 0
};

enum class SpikeKind { Distant, Close };

struct SpikeClassification {
  double gamma = 0.0;
  double phi_value = 0.0;
  double phi_derivative = 0.0;
  SpikeKind kind = SpikeKind::Close;
};

/// Population-side description: R = A A^T + Sigma (or A Phi A^T + Sigma
/// when centered), its eigendecomposition, and the grouped measure.
struct EquivalentModel {
  DenseMatrix A;
  DenseMatrix Sigma;
  DenseMatrix R;
  SpectralMeasure measure;
  bool centered = false;

  // cached spectral data of R
  SymEigResult eig;
  // eig column range [atom_start[k], atom_start[k]+m_k) spans atom k
  std::vector<std::size_t> atom_start;

  AspectRatio aspect() const { return AspectRatio::from_dims(R.rows(), A.cols()); }
};

struct StieltjesSolution {
  std::complex<double> z;
  std::complex<double> r_tilde;
  double residual = 0.0;
};

/// Solve z = -1/r + c * int t dH(t) / (1 + t r) for r in the closed upper
/// half plane. For real z strictly outside the support (caller-asserted)
/// the returned r_tilde is real. Damped fixed-point iteration with Newton
/// polish; residual <= 1e-12*(1+|z|) on every accepted return.
StieltjesSolution solve_rtilde(std::complex<double> z, const SpectralMeasure& H,
                               const AspectRatio& c);

/// phi(gamma) = gamma * (1 + c * int t dH(t)/(gamma - t)), the map from a
/// population spike to its sample eigenvalue limit.
double phi(double gamma, const SpectralMeasure& H, const AspectRatio& c);
/// phi'(gamma) = 1 - c * int t^2 dH(t)/(gamma - t)^2.
double phi_prime(double gamma, const SpectralMeasure& H, const AspectRatio& c);

/// Distant iff phi'(gamma) > 0. A distant spike's sample limit is
/// phi(gamma); a close spike sticks to the adjacent bulk edge.
SpikeClassification classify_spike(double gamma, const SpectralMeasure& H,
                                   const AspectRatio& c);

/// Real solutions of (1/n) sum_i m_i gamma_i / (gamma_i - omega) = 1,
/// descending. The k-th largest lies in (gamma_{k+1}, gamma_k), the last
/// in (-inf, gamma_nt). Residual <= 1e-10 each.
std::vector<double> omega_roots(const SpectralMeasure& H, std::size_t n);

/// Eigenvector projection coefficients c_k(j), j = 1..nt (0-based k into
/// the distinct atoms). The trace identity sum_j m_j c_k(j) = m_k holds
/// algebraically.
std::vector<double> projection_coeffs(std::size_t k, const SpectralMeasure& H, std::size_t n);

/// Attenuation factor 1 - (1/n) sum_{i != k} m_i gamma_i^2/(gamma_k-gamma_i)^2.
double eta(std::size_t k, const SpectralMeasure& H, std::size_t n);

/// Limit of u^T (sum_{l in K_k} u_l u_l^T) u for the right singular
/// vectors: eta_k * u^T A^T Xi_k Xi_k^T A u / gamma_k.
double right_overlap_limit(const std::vector<double>& u, std::size_t k,
                           const EquivalentModel& model);

/// v^T P_k v with P_k = sum_j c_k(j) Xi_j Xi_j^T.
double left_projection_limit(const std::vector<double>& v, std::size_t k,
                             const EquivalentModel& model);

struct SupportInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Support of the companion law F^{c,H}: intervals bounded by the values
/// of phi at its real critical points, merged when a gap is narrower than
/// merge_fraction * (spectral diameter).
std::vector<SupportInterval> support_endpoints(const SpectralMeasure& H, const AspectRatio& c,
                                               double merge_fraction = 1e-3);

/// Classical location mu_j (1-based j): n * F^{c,H}((mu_j, inf)) = j,
/// by integrating the density Im r_tilde(x+i eps)/pi over the support.
double classical_location(const SpectralMeasure& H, const AspectRatio& c, std::size_t j);

/// u^T Dtilde(z) u, Dtilde = r I - r^2 A^T (I + r R)^{-1} A, with the
/// centered substitutions (Phi terms and the -1/(zn) 1 1^T correction)
/// when model.centered.
std::complex<double> det_equiv_tildeD_quadform(const std::vector<double>& u,
                                               std::complex<double> z,
                                               const EquivalentModel& model);
/// v^T D(z) v, D = (-z I - z r R)^{-1}.
std::complex<double> det_equiv_D_quadform(const std::vector<double>& v, std::complex<double> z,
                                          const EquivalentModel& model);

/// Coupled fixed point delta = tr(Sigma T)/n, delta_tilde = tr(Ttilde)/n
/// with T = (-z(I + delta_tilde Sigma) + A A^T/(1+delta))^{-1} and
/// Ttilde = (-z(1+delta) I + A^T (I + delta_tilde Sigma)^{-1} A)^{-1}.
struct CoupledDeltas {
  std::complex<double> delta;
  std::complex<double> delta_tilde;
  double residual_delta = 0.0;
  double residual_delta_tilde = 0.0;
  // dense resolvent equivalents, retained for quadratic forms
  std::vector<std::complex<double>> T;        // p x p, row-major
  std::vector<std::complex<double>> T_tilde;  // n x n, row-major
  std::size_t p = 0;
  std::size_t n = 0;

  std::complex<double> quadform_T(const std::vector<double>& v) const;
  std::complex<double> quadform_T_tilde(const std::vector<double>& u) const;
};

CoupledDeltas solve_coupled_deltas(std::complex<double> z, const DenseMatrix& A,
                                   const DenseMatrix& Sigma, std::size_t n);

/// Closed-form top two population eigenvalues of d^2 g g^T + diag(l+1,1,..,1)
/// with g1 = first coordinate of the unit vector g; the remaining p-2
/// eigenvalues equal 1.
std::pair<double, double> spiked_sigma_two_eigs(double d, double ell, double g1);

}  // namespace snspec
