#include "doctest.h"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "snspec/matkernel.hpp"
#include "snspec/modelgen.hpp"
#include "snspec/rmtlimits.hpp"
#include "snspec/rng.hpp"

using namespace snspec;
using cd = std::complex<double>;

namespace {

SpectralMeasure unit_bulk(std::size_t p) { return SpectralMeasure({{1.0, p}}, p); }

SpectralMeasure spike_bulk(double spike, std::size_t p) {
  return SpectralMeasure({{spike, 1}, {1.0, p - 1}}, p);
}

// independent scalar bisection for (1/n) sum m_i g_i/(g_i - w) = 1
double secular_oracle(const SpectralMeasure& H, std::size_t n, double lo, double hi) {
  auto f = [&](double w) {
    double s = 0.0;
    for (const auto& a : H.atoms)
      s += double(a.multiplicity) * a.value / (a.value - w);
    return s / double(n) - 1.0;
  };
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Cholesky solve for the Monte Carlo resolvent oracle
std::vector<double> spd_solve(DenseMatrix A, std::vector<double> b) {
  const std::size_t n = A.rows();
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < k; ++j) A(k, k) -= A(k, j) * A(k, j);
    A(k, k) = std::sqrt(A(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) A(i, k) -= A(i, j) * A(k, j);
      A(i, k) /= A(k, k);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) b[i] -= A(i, j) * b[j];
    b[i] /= A(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = i + 1; j < n; ++j) b[i] -= A(j, i) * b[j];
    b[i] /= A(i, i);
  }
  return b;
}

}  // namespace

TEST_CASE("solve_rtilde one-atom quadratic oracle") {
  // z r^2 + (z - c + 1) r + 1 = 0 for H = delta_1
  const auto sol = solve_rtilde(cd(-1.0, 0.0), unit_bulk(100), AspectRatio::from_ratio(1.0));
  const double golden = (-1.0 + std::sqrt(5.0)) / 2.0;
  CHECK(sol.r_tilde.real() == doctest::Approx(golden).epsilon(1e-12));
  CHECK(sol.r_tilde.imag() == 0.0);

  // plug the solver output back into the quadratic
  for (double c : {0.25, 0.5, 2.0}) {
    for (cd z : {cd(-1.0, 0.0), cd(-2.5, 0.0), cd(1.0, 1.0), cd(4.0, 0.01)}) {
      const auto s = solve_rtilde(z, unit_bulk(50), AspectRatio::from_ratio(c));
      const cd r = s.r_tilde;
      const cd q = z * r * r + (z - c + 1.0) * r + 1.0;
      CHECK(std::abs(q) <= 1e-10 * (1.0 + std::abs(z)));
      CHECK(s.residual <= 1e-12 * (1.0 + std::abs(z)));
      if (z.imag() > 0.0) CHECK(r.imag() >= 0.0);
    }
  }
}

TEST_CASE("solve_rtilde no-noise limit") {
  // with c = 0 the defining equation degenerates to z = -1/r, the
  // transform of a point mass at zero (the n x n side is all zeros)
  const auto sol = solve_rtilde(cd(-1.0, 0.0), unit_bulk(10), AspectRatio::from_ratio(1e-14));
  CHECK(sol.r_tilde.real() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("solve_rtilde residual grid and upper half plane mapping") {
  const SpectralMeasure H({{5.0, 2}, {2.0, 10}, {1.0, 88}}, 100);
  const AspectRatio c = AspectRatio::from_dims(100, 150);
  for (double re : {-3.0, -1.0, 0.5, 2.0, 6.0, 12.0}) {
    for (double im : {1e-6, 0.01, 0.5, 2.0}) {
      const auto s = solve_rtilde(cd(re, im), H, c);
      CHECK(s.residual <= 1e-12 * (1.0 + std::abs(cd(re, im))));
      CHECK(s.r_tilde.imag() >= 0.0);
    }
  }
}

TEST_CASE("solve_rtilde flags real z inside the support") {
  // MP bulk with c = 0.5 covers [0.086, 2.914]
  CHECK_THROWS_AS(solve_rtilde(cd(1.0, 0.0), unit_bulk(50), AspectRatio::from_ratio(0.5)),
                  std::domain_error);
}

TEST_CASE("phi exact values") {
  // appendix worked example: unit bulk, c = 3/5
  CHECK(phi(3.0, unit_bulk(60), AspectRatio::from_ratio(0.6)) ==
        doctest::Approx(3.9).epsilon(1e-13));
  // spiked-covariance example, c = 1/2: phi(g) = g (1 + c/(g-1))
  const AspectRatio half = AspectRatio::from_ratio(0.5);
  CHECK(phi(7.0, unit_bulk(100), half) ==
        doctest::Approx(7.0 * (1.0 + 0.5 / 6.0)).epsilon(1e-13));
  CHECK(phi(5.0, unit_bulk(100), half) == doctest::Approx(5.625).epsilon(1e-13));
  CHECK(phi(3.0, unit_bulk(100), half) == doctest::Approx(3.75).epsilon(1e-13));
}

TEST_CASE("phi no-noise limit and pole error") {
  const SpectralMeasure H({{4.0, 1}, {1.0, 9}}, 10);
  CHECK(phi(2.5, H, AspectRatio::from_ratio(0.0)) == doctest::Approx(2.5));
  CHECK(phi_prime(2.5, H, AspectRatio::from_ratio(0.0)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(phi(4.0, H, AspectRatio::from_ratio(0.5)), std::domain_error);
  CHECK_THROWS_AS(phi(-1.0, H, AspectRatio::from_ratio(0.5)), std::invalid_argument);
}

TEST_CASE("phi_prime against a finite-difference oracle") {
  const SpectralMeasure H({{5.0, 3}, {2.0, 7}, {1.0, 90}}, 100);
  const AspectRatio c = AspectRatio::from_ratio(0.7);
  for (double g : {3.0, 4.0, 8.0, 10.0}) {
    const double h = 1e-6;
    const double fd = (phi(g + h, H, c) - phi(g - h, H, c)) / (2.0 * h);
    CHECK(phi_prime(g, H, c) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("phi monotone where phi' is positive") {
  const SpectralMeasure H = unit_bulk(80);
  const AspectRatio c = AspectRatio::from_ratio(0.5);
  double prev = phi(1.0 + std::sqrt(0.5) + 0.01, H, c);
  for (double g = 1.0 + std::sqrt(0.5) + 0.02; g < 10.0; g += 0.05) {
    CHECK(phi_prime(g, H, c) > 0.0);
    const double cur = phi(g, H, c);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("classify_spike distant and close regimes") {
  const AspectRatio half = AspectRatio::from_ratio(0.5);
  // d = 2, Sigma = I: gamma = d^2 + 1 = 5 with d > c^{1/4}
  CHECK(classify_spike(5.0, unit_bulk(100), half).kind == SpikeKind::Distant);
  // gamma = 1 + 0.5 sqrt(c) below the BBP threshold
  CHECK(classify_spike(1.0 + 0.5 * std::sqrt(0.5), unit_bulk(100), half).kind ==
        SpikeKind::Close);
  CHECK(classify_spike(1.7, unit_bulk(100), AspectRatio::from_ratio(0.0)).kind ==
        SpikeKind::Distant);
}

TEST_CASE("omega_roots one-atom closed form") {
  const auto roots = omega_roots(unit_bulk(50), 100);  // c_n = 0.5
  REQUIRE(roots.size() == 1);
  CHECK(roots[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("omega_roots against the scalar oracle") {
  const SpectralMeasure H = spike_bulk(5.0, 100);
  const auto roots = omega_roots(H, 200);
  REQUIRE(roots.size() == 2);
  const double oracle = secular_oracle(H, 200, 1.0 + 1e-9, 5.0 - 1e-9);
  CHECK(roots[0] == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(roots[0] == doctest::Approx(4.9778).epsilon(1e-3));
  CHECK(roots[0] > 1.0);
  CHECK(roots[0] < 5.0);
}

TEST_CASE("omega_roots interlacing and residuals on random measures") {
  RngStream rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<SpectralMeasure::Atom> atoms;
    double v = 10.0 + rng.uniform01();
    std::size_t dim = 0;
    const std::size_t nt = 2 + std::size_t(rng.below(4));
    for (std::size_t i = 0; i < nt; ++i) {
      const std::size_t m = 1 + std::size_t(rng.below(20));
      atoms.push_back({v, m});
      dim += m;
      v -= 0.5 + 2.0 * rng.uniform01();
    }
    const SpectralMeasure H(atoms, dim);
    const std::size_t n = dim + std::size_t(rng.below(2 * dim));
    const auto roots = omega_roots(H, n);
    REQUIRE(roots.size() == nt);
    for (std::size_t k = 0; k < nt; ++k) {
      if (k + 1 < nt) {
        CHECK(roots[k] > H.atoms[k + 1].value);
        CHECK(roots[k] < H.atoms[k].value);
      } else {
        CHECK(roots[k] < H.atoms[k].value);
      }
      double s = 0.0;
      for (const auto& a : H.atoms)
        s += double(a.multiplicity) * a.value / (a.value - roots[k]);
      CHECK(std::abs(s / double(n) - 1.0) <= 1e-10);
    }
  }
}

TEST_CASE("projection_coeffs trace identity and oracle value") {
  const SpectralMeasure H = spike_bulk(5.0, 100);
  const auto coeffs = projection_coeffs(0, H, 200);
  REQUIRE(coeffs.size() == 2);
  // evaluate the defining formula with the independently bisected root
  const double w1 = secular_oracle(H, 200, 1.0 + 1e-9, 5.0 - 1e-9);
  const double expected = 1.0 - 99.0 * (5.0 / (1.0 - 5.0) - w1 / (1.0 - w1));
  CHECK(coeffs[0] == doctest::Approx(expected).epsilon(1e-9));
  // asymptote (1 - c/d^4)/(1 + c/d^2) with d^2 = 4, c = 0.5
  CHECK(std::abs(coeffs[0] - 0.8611) < 0.01);

  RngStream rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<SpectralMeasure::Atom> atoms;
    double v = 8.0;
    std::size_t dim = 0;
    for (int i = 0; i < 4; ++i) {
      const std::size_t m = 1 + std::size_t(rng.below(30));
      atoms.push_back({v, m});
      dim += m;
      v -= 0.7 + rng.uniform01();
    }
    const SpectralMeasure H2(atoms, dim);
    const std::size_t n = 2 * dim;
    for (std::size_t k = 0; k < 2; ++k) {
      const auto c = projection_coeffs(k, H2, n);
      double tr = 0.0;
      for (std::size_t j = 0; j < c.size(); ++j) tr += double(H2.atoms[j].multiplicity) * c[j];
      CHECK(tr == doctest::Approx(double(H2.atoms[k].multiplicity)).epsilon(1e-10));
    }
  }
}

TEST_CASE("projection_coeffs single atom") {
  const auto coeffs = projection_coeffs(0, unit_bulk(30), 60);
  REQUIRE(coeffs.size() == 1);
  CHECK(coeffs[0] == doctest::Approx(1.0));
}

TEST_CASE("eta values") {
  CHECK(eta(0, spike_bulk(5.0, 100), 200) == doctest::Approx(0.9690625).epsilon(1e-14));
  CHECK(eta(0, unit_bulk(40), 80) == doctest::Approx(1.0));
  // atom-order invariance: same spectrum assembled from a permuted list
  const auto H = measure_from_eigenvalues({5, 1, 1, 3, 1, 3, 1, 1});
  const auto H2 = measure_from_eigenvalues({1, 3, 1, 1, 5, 1, 3, 1});
  CHECK(eta(1, H, 16) == doctest::Approx(eta(1, H2, 16)).epsilon(1e-15));
}

TEST_CASE("support_endpoints recovers Marchenko-Pastur edges") {
  const auto iv = support_endpoints(unit_bulk(100), AspectRatio::from_ratio(0.5));
  REQUIRE(iv.size() == 1);
  const double a = (1.0 - std::sqrt(0.5)) * (1.0 - std::sqrt(0.5));
  const double b = (1.0 + std::sqrt(0.5)) * (1.0 + std::sqrt(0.5));
  CHECK(iv[0].lower == doctest::Approx(a).epsilon(1e-10));
  CHECK(iv[0].upper == doctest::Approx(b).epsilon(1e-10));

  // c > 1: edges (sqrt(2) -+ 1)^2
  const auto iv2 = support_endpoints(unit_bulk(100), AspectRatio::from_ratio(2.0));
  REQUIRE(iv2.size() == 1);
  CHECK(iv2[0].lower ==
        doctest::Approx((std::sqrt(2.0) - 1.0) * (std::sqrt(2.0) - 1.0)).epsilon(1e-10));
  CHECK(iv2[0].upper ==
        doctest::Approx((std::sqrt(2.0) + 1.0) * (std::sqrt(2.0) + 1.0)).epsilon(1e-10));
}

TEST_CASE("support_endpoints collapses to atoms when c = 0") {
  const SpectralMeasure H({{4.0, 2}, {1.0, 8}}, 10);
  const auto iv = support_endpoints(H, AspectRatio::from_ratio(0.0));
  REQUIRE(iv.size() == 2);
  CHECK(iv[0].lower == doctest::Approx(1.0));
  CHECK(iv[1].upper == doctest::Approx(4.0));
}

TEST_CASE("support_endpoints isolates a light spike in a shrinking interval") {
  // an O(1/p)-weight spike atom generates an interval around its phi image
  // whose width decays as p grows
  double prev_width = -1.0;
  for (std::size_t p : {std::size_t(200), std::size_t(800), std::size_t(3200)}) {
    const SpectralMeasure H = spike_bulk(5.0, p);
    const AspectRatio c = AspectRatio::from_dims(p, 2 * p);
    const auto iv = support_endpoints(H, c);
    REQUIRE(iv.size() == 2);
    const double width = iv[1].upper - iv[1].lower;
    const double pf = double(p);
    const double phi5 = 5.0 * (1.0 + 0.5 * ((pf - 1.0) / pf) / 4.0);
    CHECK(iv[1].lower < phi5);
    CHECK(iv[1].upper > phi5);
    if (prev_width >= 0.0) CHECK(width < prev_width);
    prev_width = width;
  }
  CHECK(prev_width < 0.3);
}

TEST_CASE("classical_location against the Marchenko-Pastur CDF oracle") {
  const SpectralMeasure H = unit_bulk(60);
  const AspectRatio c = AspectRatio::from_dims(60, 100);
  const double a = (1.0 - std::sqrt(0.6)) * (1.0 - std::sqrt(0.6));
  const double b = (1.0 + std::sqrt(0.6)) * (1.0 + std::sqrt(0.6));
  // companion density sqrt((b-x)(x-a))/(2 pi x); oracle CDF by fine Simpson
  auto mass_above = [&](double mu) {
    const int N = 200000;
    const double h = (b - mu) / N;
    double s = 0.0;
    for (int i = 0; i <= N; ++i) {
      const double x = mu + i * h;
      const double val = std::sqrt(std::max(0.0, (b - x) * (x - a))) / (2.0 * M_PI * x);
      s += val * ((i == 0 || i == N) ? 0.5 : 1.0);
    }
    return s * h;
  };
  auto oracle_mu = [&](std::size_t j) {
    double lo = a, hi = b;
    const double target = double(j) / 100.0;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (mass_above(mid) < target)
        hi = mid;
      else
        lo = mid;
    }
    return 0.5 * (lo + hi);
  };
  for (std::size_t j : {std::size_t(1), std::size_t(3), std::size_t(30)}) {
    CHECK(classical_location(H, c, j) == doctest::Approx(oracle_mu(j)).epsilon(2e-3));
  }
  // the first nonspiked index approaches the upper edge as n grows
  CHECK(classical_location(unit_bulk(6000), AspectRatio::from_dims(6000, 10000), 1) ==
        doctest::Approx(b).epsilon(0.01));
  // j = p reaches the lower edge
  CHECK(classical_location(H, c, 60) == doctest::Approx(a).epsilon(1e-6));
  // monotone decreasing in j
  double prev = classical_location(H, c, 1);
  for (std::size_t j : {std::size_t(5), std::size_t(20), std::size_t(45), std::size_t(60)}) {
    const double cur = classical_location(H, c, j);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("det_equiv reduces to r_tilde when A = 0") {
  const std::size_t p = 20, n = 40;
  const DenseMatrix A(p, n, 0.0);
  const EquivalentModel model = population_model(A, DenseMatrix::identity(p), false);
  RngStream rng(23);
  std::vector<double> u(n);
  for (auto& v : u) v = rng.normal();
  const double nu = norm2(u);
  for (auto& v : u) v /= nu;
  for (cd z : {cd(-2.0, 0.0), cd(1.0, 1.0)}) {
    const cd r = solve_rtilde(z, model.measure, model.aspect()).r_tilde;
    const cd q = det_equiv_tildeD_quadform(u, z, model);
    CHECK(std::abs(q - r) <= 1e-10 * (1.0 + std::abs(r)));
  }
  // entrywise via basis quadratic forms
  for (std::size_t i : {std::size_t(0), std::size_t(7)}) {
    std::vector<double> e(n, 0.0);
    e[i] = 1.0;
    const cd r = solve_rtilde(cd(-2.0, 0.0), model.measure, model.aspect()).r_tilde;
    CHECK(std::abs(det_equiv_tildeD_quadform(e, cd(-2.0, 0.0), model) - r) <= 1e-10);
  }
}

TEST_CASE("det_equiv D quadform diagonalizes on population eigenvectors") {
  const std::size_t p = 12, n = 24;
  RngStream rng(29);
  DenseMatrix A(p, n);
  for (std::size_t i = 0; i < 2; ++i)  // rank-2 signal
    for (std::size_t j = 0; j < n; ++j) A(i, j) = rng.normal() / std::sqrt(double(n));
  DenseMatrix Sigma(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      Sigma(i, j) = std::pow(0.3, std::abs(double(i) - double(j)));
  const EquivalentModel model = population_model(A, Sigma, false);
  const cd z(-2.0, 0.0);
  const cd r = solve_rtilde(z, model.measure, model.aspect()).r_tilde;
  for (std::size_t k : {std::size_t(0), std::size_t(5), std::size_t(11)}) {
    const auto v = model.eig.vector(k);
    const cd expected = 1.0 / (-z - z * r * model.eig.values[k]);
    const cd got = det_equiv_D_quadform(v, z, model);
    CHECK(std::abs(got - expected) <= 1e-9 * (1.0 + std::abs(expected)));
  }
}

TEST_CASE("det_equiv centered closed forms with A = 0") {
  const std::size_t p = 15, n = 30;
  const DenseMatrix A(p, n, 0.0);
  const EquivalentModel model = population_model(A, DenseMatrix::identity(p), true);
  const cd z(-2.0, 0.0);
  const cd r = solve_rtilde(z, model.measure, model.aspect()).r_tilde;
  // u orthogonal to the ones vector: quadform is r
  std::vector<double> u(n, 0.0);
  u[0] = M_SQRT1_2;
  u[1] = -M_SQRT1_2;
  CHECK(std::abs(det_equiv_tildeD_quadform(u, z, model) - r) <= 1e-10);
  // u = 1/sqrt(n): quadform is -1/z
  std::vector<double> ones(n, 1.0 / std::sqrt(double(n)));
  CHECK(std::abs(det_equiv_tildeD_quadform(ones, z, model) - (-1.0 / z)) <= 1e-10);
}

TEST_CASE("det_equiv matches a Monte Carlo resolvent on a small model") {
  const std::size_t p = 40, n = 40;
  RngStream setup(31);
  DenseMatrix A(p, n, 0.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < n; ++j) A(i, j) = setup.normal() / std::sqrt(double(n));
  DenseMatrix Sigma(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      Sigma(i, j) = std::pow(0.3, std::abs(double(i) - double(j)));
  const EquivalentModel model = population_model(A, Sigma, false);
  const DenseMatrix Q = psd_sqrt(Sigma);

  std::vector<double> u(n);
  for (auto& v : u) v = setup.normal();
  const double nu = norm2(u);
  for (auto& v : u) v /= nu;

  const double z = -2.0;
  const cd theory = det_equiv_tildeD_quadform(u, cd(z, 0.0), model);

  const int draws = 2000;
  double mean = 0.0, m2 = 0.0;
  RngStream rng(101);
  for (int d = 0; d < draws; ++d) {
    const DenseMatrix W = sample_noise(NoiseLaw::Gaussian, p, n, rng);
    const DenseMatrix X = assemble_with_sqrt(A, Q, W, false);
    DenseMatrix St = gram(X, GramSide::Right);
    for (std::size_t i = 0; i < n; ++i) St(i, i) -= z;
    const auto y = spd_solve(St, u);
    const double q = dot(u, y);
    const double delta = q - mean;
    mean += delta / (d + 1);
    m2 += delta * (q - mean);
  }
  const double se = std::sqrt(m2 / (draws - 1) / draws);
  CHECK(std::abs(mean - theory.real()) <= 3.0 * se + 1e-4);
}

TEST_CASE("coupled deltas agree with r_tilde when A = 0") {
  const std::size_t p = 30, n = 60;
  const DenseMatrix A(p, n, 0.0);
  const DenseMatrix Sigma = DenseMatrix::identity(p);
  const SpectralMeasure H = unit_bulk(p);
  const AspectRatio c = AspectRatio::from_dims(p, n);
  for (cd z : {cd(-2.0, 0.0), cd(-1.0, 0.5)}) {
    const auto cdlt = solve_coupled_deltas(z, A, Sigma, n);
    const cd r = solve_rtilde(z, H, c).r_tilde;
    CHECK(std::abs(cdlt.delta_tilde - r) <= 1e-9 * (1.0 + std::abs(r)));
    CHECK(cdlt.residual_delta <= 1e-10);
    CHECK(cdlt.residual_delta_tilde <= 1e-10);
  }
}

TEST_CASE("coupled deltas approach r_tilde as n grows (finite-rank A)") {
  double prev_gap = -1.0;
  for (std::size_t n : {std::size_t(50), std::size_t(100), std::size_t(200)}) {
    const std::size_t p = n / 2;
    RngStream rng(7 + n);
    DenseMatrix A(p, n, 0.0);
    for (std::size_t j = 0; j < n; ++j) A(0, j) = rng.normal() / std::sqrt(double(n));
    DenseMatrix Sigma(p, p);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j)
        Sigma(i, j) = std::pow(0.2, std::abs(double(i) - double(j)));
    const EquivalentModel model = population_model(A, Sigma, false);
    const cd z(-2.0, 0.0);
    const auto cdlt = solve_coupled_deltas(z, A, Sigma, n);
    const cd r = solve_rtilde(z, model.measure, model.aspect()).r_tilde;
    const double gap = std::abs(cdlt.delta_tilde - r);
    if (prev_gap >= 0.0) CHECK(gap < prev_gap);
    prev_gap = gap;
  }
}

TEST_CASE("spiked sigma closed-form eigenvalues") {
  auto [g1, g2] = spiked_sigma_two_eigs(2.0, 2.0, 1.0);
  CHECK(g1 == 7.0);
  CHECK(g2 == 1.0);
  auto [h1, h2] = spiked_sigma_two_eigs(2.0, 2.0, 0.0);
  CHECK(h1 == 5.0);
  CHECK(h2 == 3.0);
  auto [q1, q2] = spiked_sigma_two_eigs(0.0, 3.0, 0.7);
  CHECK(q1 == doctest::Approx(4.0));
  CHECK(q2 == doctest::Approx(1.0));
}

TEST_CASE("right_overlap_limit structure") {
  // rank-1 signal d xi zeta^T with Sigma = I: gamma_1 = d^2 + 1
  const std::size_t p = 100, n = 200;
  const double d = 2.0;
  RngStream rng(37);
  std::vector<double> zeta(n);
  for (auto& v : zeta) v = rng.normal();
  const double nz = norm2(zeta);
  for (auto& v : zeta) v /= nz;
  DenseMatrix A(p, n);
  for (std::size_t j = 0; j < n; ++j) A(0, j) = d * zeta[j];  // xi = e1
  const EquivalentModel model = population_model(A, DenseMatrix::identity(p), false);
  REQUIRE(model.measure.atoms.size() == 2);
  CHECK(model.measure.atoms[0].value == doctest::Approx(5.0).epsilon(1e-10));

  const double got = right_overlap_limit(zeta, 0, model);
  const double eta1 = eta(0, model.measure, n);
  CHECK(got == doctest::Approx(eta1 * (d * d) / (d * d + 1.0)).epsilon(1e-10));
  // closed form (d^4 - c)/(d^2 (1 + d^2))
  CHECK(std::abs(got - (16.0 - 0.5) / 20.0) < 1e-3);

  // orthogonal probe gives zero
  std::vector<double> perp(n, 0.0);
  perp[0] = zeta[1];
  perp[1] = -zeta[0];
  const double np = norm2(perp);
  perp[0] /= np;
  perp[1] /= np;
  CHECK(std::abs(dot(perp, zeta)) < 1e-12);
  CHECK(std::abs(right_overlap_limit(perp, 0, model)) < 1e-12);

  // maximizer value equals eta (1 - Xi' Sigma Xi / gamma)
  const double maximizer_value = eta1 * (1.0 - 1.0 / 5.0);
  CHECK(right_overlap_limit(zeta, 0, model) ==
        doctest::Approx(maximizer_value).epsilon(1e-10));

  std::vector<double> not_unit(n, 0.1);
  CHECK_THROWS_AS(right_overlap_limit(not_unit, 0, model), std::invalid_argument);
}

TEST_CASE("left_projection_limit projector algebra") {
  const std::size_t p = 30, n = 60;
  RngStream rng(41);
  DenseMatrix A(p, n, 0.0);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < n; ++j)
      A(i, j) = (2.0 + double(i)) * rng.normal() / std::sqrt(double(n));
  const EquivalentModel model = population_model(A, DenseMatrix::identity(p), false);
  const auto coeffs = projection_coeffs(0, model.measure, n);

  // v = Xi_k for a simple spike gives c_k(k)
  const auto xi = model.eig.vector(0);
  CHECK(left_projection_limit(xi, 0, model) == doctest::Approx(coeffs[0]).epsilon(1e-10));

  // v inside the bulk eigenspace gives the bulk coefficient
  const auto bulk_vec = model.eig.vector(p - 1);
  const std::size_t bulk_atom = model.measure.atoms.size() - 1;
  CHECK(left_projection_limit(bulk_vec, 0, model) ==
        doctest::Approx(coeffs[bulk_atom]).epsilon(1e-10));

  // trace over the standard basis equals m_k
  double tr = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    std::vector<double> e(p, 0.0);
    e[i] = 1.0;
    tr += left_projection_limit(e, 0, model);
  }
  CHECK(tr == doctest::Approx(double(model.measure.atoms[0].multiplicity)).epsilon(1e-9));
}

TEST_CASE("measure grouping and bulk extraction") {
  const auto H = measure_from_eigenvalues({5.0, 5.0 + 1e-9, 1.0, 1.0, 1.0 - 1e-9});
  REQUIRE(H.atoms.size() == 2);
  CHECK(H.atoms[0].multiplicity == 2);
  CHECK(H.atoms[1].multiplicity == 3);
  const auto bulk = bulk_measure(H, 1);
  CHECK(bulk.atoms.size() == 1);
  CHECK(bulk.dimension == 3);
  CHECK_THROWS_AS(bulk_measure(H, 2), std::invalid_argument);
  CHECK_THROWS_AS(SpectralMeasure({{1.0, 2}, {2.0, 1}}, 3), std::invalid_argument);
  CHECK_THROWS_AS(SpectralMeasure({{2.0, 2}, {1.0, 2}}, 3), std::invalid_argument);
}
