#include "snspec/rmtlimits.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace snspec {

using cd = std::complex<double>;

SpectralMeasure::SpectralMeasure(std::vector<Atom> atoms_in, std::size_t dimension_in)
    : atoms(std::move(atoms_in)), dimension(dimension_in) {
  if (atoms.empty()) throw std::invalid_argument("SpectralMeasure: no atoms");
  std::size_t total = 0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i].multiplicity == 0)
      throw std::invalid_argument("SpectralMeasure: zero multiplicity atom");
    if (atoms[i].value < 0.0)
      throw std::invalid_argument("SpectralMeasure: negative atom value");
    if (i > 0 && !(atoms[i].value < atoms[i - 1].value))
      throw std::invalid_argument("SpectralMeasure: atom values not strictly decreasing");
    total += atoms[i].multiplicity;
  }
  if (total != dimension)
    throw std::invalid_argument("SpectralMeasure: multiplicities sum to " +
                                std::to_string(total) + ", dimension is " +
                                std::to_string(dimension));
}

std::vector<double> SpectralMeasure::expanded() const {
  std::vector<double> out;
  out.reserve(dimension);
  for (const auto& a : atoms) out.insert(out.end(), a.multiplicity, a.value);
  return out;
}

SpectralMeasure measure_from_eigenvalues(const std::vector<double>& values, double rel_tol) {
  if (values.empty()) throw std::invalid_argument("measure_from_eigenvalues: empty spectrum");
  std::vector<double> v = values;
  std::sort(v.begin(), v.end(), std::greater<double>());
  std::vector<SpectralMeasure::Atom> atoms;
  double sum = v[0];
  std::size_t count = 1;
  auto flush = [&]() {
    double mean = sum / static_cast<double>(count);
    if (mean < 0.0) {
      if (mean > -1e-10 * std::max(1.0, std::abs(v[0])))
        mean = 0.0;
      else
        throw std::invalid_argument("measure_from_eigenvalues: negative eigenvalue group");
    }
    atoms.push_back({mean, count});
  };
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double prev = sum / static_cast<double>(count);
    if (prev - v[i] <= rel_tol * (1.0 + std::abs(prev))) {
      sum += v[i];
      ++count;
    } else {
      flush();
      sum = v[i];
      count = 1;
    }
  }
  flush();
  return SpectralMeasure(std::move(atoms), v.size());
}

SpectralMeasure bulk_measure(const SpectralMeasure& H, std::size_t spike_atoms) {
  if (spike_atoms >= H.atoms.size())
    throw std::invalid_argument("bulk_measure: no atoms left after removing spikes");
  std::vector<SpectralMeasure::Atom> rest(H.atoms.begin() + spike_atoms, H.atoms.end());
  std::size_t dim = 0;
  for (const auto& a : rest) dim += a.multiplicity;
  return SpectralMeasure(std::move(rest), dim);
}

AspectRatio AspectRatio::from_dims(std::size_t p, std::size_t n) {
  if (p == 0 || n == 0) throw std::invalid_argument("AspectRatio: zero dimension");
  return AspectRatio{p, n, static_cast<double>(p) / static_cast<double>(n)};
}

AspectRatio AspectRatio::from_ratio(double c) {
  if (c < 0.0 || !std::isfinite(c)) throw std::invalid_argument("AspectRatio: bad ratio");
  return AspectRatio{0, 0, c};
}

namespace {

// S(r) = int t dH(t) / (1 + t r)
cd stieltjes_kernel(const SpectralMeasure& H, cd r) {
  return H.integrate_c([&](double t) { return t / (1.0 + t * r); });
}

double stieltjes_kernel_real(const SpectralMeasure& H, double r) {
  return H.integrate([&](double t) { return t / (1.0 + t * r); });
}

double fp_residual(cd z, const SpectralMeasure& H, double c, cd r) {
  return std::abs(z + 1.0 / r - c * stieltjes_kernel(H, r));
}

// damped fixed point for r <- -1/(z - c S(r)) in the upper half plane
cd rtilde_iterate(cd z, const SpectralMeasure& H, double c, cd init) {
  cd r = init;
  double res = fp_residual(z, H, c, r);
  const double tol = 1e-13 * (1.0 + std::abs(z));
  for (int it = 0; it < 10000 && res > tol; ++it) {
    cd next = -1.0 / (z - c * stieltjes_kernel(H, r));
    double next_res = fp_residual(z, H, c, next);
    if (next_res > res) next = 0.5 * (r + next);  // damp only on residual increase
    r = next;
    res = fp_residual(z, H, c, r);
  }
  return r;
}

}  // namespace

StieltjesSolution solve_rtilde(std::complex<double> z, const SpectralMeasure& H,
                               const AspectRatio& c) {
  const bool conjugated = z.imag() < 0.0;
  if (conjugated) z = std::conj(z);

  StieltjesSolution out;
  out.z = conjugated ? std::conj(z) : z;

  const double accept = 1e-12 * (1.0 + std::abs(z));
  if (z.imag() > 0.0) {
    cd r = rtilde_iterate(z, H, c.c_n, -1.0 / z);
    const double res = fp_residual(z, H, c.c_n, r);
    if (res > accept)
      throw std::runtime_error("solve_rtilde: no convergence, residual " + std::to_string(res));
    if (r.imag() < 0.0 && r.imag() > -1e-13) r = cd(r.real(), 0.0);
    out.r_tilde = conjugated ? std::conj(r) : r;
    out.residual = res;
    return out;
  }

  // real z, caller asserts it lies strictly outside the support: solve at
  // z + i*eps, then polish the real equation by Newton
  const double x = z.real();
  const double eps = 1e-9 * (1.0 + std::abs(x));
  cd r_eps = rtilde_iterate(cd(x, eps), H, c.c_n, -1.0 / cd(x, eps));
  if (std::abs(r_eps.imag()) > 1e-4 * (1.0 + std::abs(r_eps)))
    throw std::domain_error("solve_rtilde: real z appears to lie inside the support");

  double r = r_eps.real();
  bool ok = false;
  for (int it = 0; it < 100; ++it) {
    const double g = x + 1.0 / r - c.c_n * stieltjes_kernel_real(H, r);
    if (std::abs(g) <= accept) {
      ok = true;
      break;
    }
    const double gp =
        -1.0 / (r * r) +
        c.c_n * H.integrate([&](double t) { return t * t / ((1.0 + t * r) * (1.0 + t * r)); });
    const double step = g / gp;
    if (!std::isfinite(step)) break;
    r -= step;
  }
  const double res = std::abs(x + 1.0 / r - c.c_n * stieltjes_kernel_real(H, r));
  if (!ok && res > accept)
    throw std::runtime_error("solve_rtilde: real-axis polish failed, residual " +
                             std::to_string(res));
  out.r_tilde = cd(r, 0.0);
  out.residual = res;
  return out;
}

namespace {

constexpr double kPoleTol = 1e-12;

void check_no_pole(double gamma, const SpectralMeasure& H) {
  for (const auto& a : H.atoms)
    if (std::abs(gamma - a.value) <= kPoleTol * (1.0 + std::abs(a.value)))
      throw std::domain_error("phi: gamma coincides with spectrum atom " +
                              std::to_string(a.value));
}

double phi_raw(double gamma, const SpectralMeasure& H, double c) {
  return gamma * (1.0 + c * H.integrate([&](double t) { return t / (gamma - t); }));
}

double phi_prime_raw(double gamma, const SpectralMeasure& H, double c) {
  return 1.0 - c * H.integrate([&](double t) { return t * t / ((gamma - t) * (gamma - t)); });
}

}  // namespace

double phi(double gamma, const SpectralMeasure& H, const AspectRatio& c) {
  if (!(gamma > 0.0)) throw std::invalid_argument("phi: gamma must be positive");
  check_no_pole(gamma, H);
  return phi_raw(gamma, H, c.c_n);
}

double phi_prime(double gamma, const SpectralMeasure& H, const AspectRatio& c) {
  if (!(gamma > 0.0)) throw std::invalid_argument("phi_prime: gamma must be positive");
  check_no_pole(gamma, H);
  return phi_prime_raw(gamma, H, c.c_n);
}

SpikeClassification classify_spike(double gamma, const SpectralMeasure& H,
                                   const AspectRatio& c) {
  SpikeClassification out;
  out.gamma = gamma;
  out.phi_value = phi(gamma, H, c);
  out.phi_derivative = phi_prime(gamma, H, c);
  out.kind = out.phi_derivative > 0.0 ? SpikeKind::Distant : SpikeKind::Close;
  return out;
}

namespace {

// secular function (1/n) sum m_i gamma_i / (gamma_i - w); strictly
// increasing between consecutive positive atoms
double secular(const SpectralMeasure& H, std::size_t n, double w) {
  double s = 0.0;
  for (const auto& a : H.atoms) {
    if (a.value == 0.0) continue;
    s += static_cast<double>(a.multiplicity) * a.value / (a.value - w);
  }
  return s / static_cast<double>(n);
}

double secular_prime(const SpectralMeasure& H, std::size_t n, double w) {
  double s = 0.0;
  for (const auto& a : H.atoms) {
    if (a.value == 0.0) continue;
    const double d = a.value - w;
    s += static_cast<double>(a.multiplicity) * a.value / (d * d);
  }
  return s / static_cast<double>(n);
}

double bisect_secular(const SpectralMeasure& H, std::size_t n, double lo, double hi) {
  // invariant: secular(lo) < 1 < secular(hi)
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (secular(H, n, mid) < 1.0)
      lo = mid;
    else
      hi = mid;
  }
  double w = 0.5 * (lo + hi);
  // one Newton polish
  const double g = secular(H, n, w) - 1.0;
  const double gp = secular_prime(H, n, w);
  if (gp > 0.0 && std::isfinite(g / gp)) {
    const double w2 = w - g / gp;
    if (w2 > lo && w2 < hi) w = w2;
  }
  return w;
}

}  // namespace

std::vector<double> omega_roots(const SpectralMeasure& H, std::size_t n) {
  std::vector<const SpectralMeasure::Atom*> pos;
  for (const auto& a : H.atoms)
    if (a.value > 0.0) pos.push_back(&a);
  if (pos.empty()) throw std::invalid_argument("omega_roots: measure has no positive atoms");

  std::vector<double> roots;
  roots.reserve(pos.size());
  for (std::size_t k = 0; k + 1 < pos.size(); ++k) {
    const double hi_atom = pos[k]->value;
    const double lo_atom = pos[k + 1]->value;
    double delta = 1e-12 * hi_atom;
    double lo = lo_atom + delta;
    double hi = hi_atom - delta;
    int tries = 0;
    while ((secular(H, n, lo) >= 1.0 || secular(H, n, hi) <= 1.0) && tries < 8) {
      delta *= 0.1;
      lo = lo_atom + delta;
      hi = hi_atom - delta;
      ++tries;
    }
    if (secular(H, n, lo) >= 1.0 || secular(H, n, hi) <= 1.0)
      throw std::runtime_error("omega_roots: failed to isolate root in (" +
                               std::to_string(lo_atom) + "," + std::to_string(hi_atom) + ")");
    roots.push_back(bisect_secular(H, n, lo, hi));
  }
  // last root: below the smallest positive atom
  {
    const double top = pos.back()->value;
    double hi = top - 1e-12 * top;
    double step = std::max(1.0, top);
    double lo = top - step;
    int tries = 0;
    while (secular(H, n, lo) >= 1.0 && tries < 200) {
      step *= 2.0;
      lo = top - step;
      ++tries;
    }
    if (secular(H, n, lo) >= 1.0 || secular(H, n, hi) <= 1.0)
      throw std::runtime_error("omega_roots: failed to isolate the lowest root");
    roots.push_back(bisect_secular(H, n, lo, hi));
  }
  for (double w : roots) {
    const double res = std::abs(secular(H, n, w) - 1.0);
    if (res > 1e-10)
      throw std::runtime_error("omega_roots: residual " + std::to_string(res) +
                               " exceeds 1e-10");
  }
  return roots;
}

namespace {

void check_spike_index(std::size_t k, const SpectralMeasure& H) {
  if (k >= H.atoms.size()) throw std::invalid_argument("spike index out of range");
  for (std::size_t i = 0; i + 1 < H.atoms.size(); ++i) {
    const double gap = H.atoms[i].value - H.atoms[i + 1].value;
    if (gap <= 1e-12 * (1.0 + std::abs(H.atoms[i].value)))
      throw std::domain_error("degenerate spectrum: atoms " + std::to_string(i) + " and " +
                              std::to_string(i + 1) + " coincide");
  }
}

}  // namespace

std::vector<double> projection_coeffs(std::size_t k, const SpectralMeasure& H, std::size_t n) {
  check_spike_index(k, H);
  const auto roots = omega_roots(H, n);
  if (k >= roots.size()) throw std::invalid_argument("projection_coeffs: no omega root for k");
  const double gk = H.atoms[k].value;
  const double wk = roots[k];
  const std::size_t nt = H.atoms.size();
  std::vector<double> c(nt, 0.0);
  double corr = 0.0;
  for (std::size_t j = 0; j < nt; ++j) {
    if (j == k) continue;
    const double gj = H.atoms[j].value;
    const double term = gk / (gj - gk) - wk / (gj - wk);
    c[j] = term;
    corr += static_cast<double>(H.atoms[j].multiplicity) * term;
  }
  c[k] = 1.0 - corr / static_cast<double>(H.atoms[k].multiplicity);
  return c;
}

double eta(std::size_t k, const SpectralMeasure& H, std::size_t n) {
  check_spike_index(k, H);
  const double gk = H.atoms[k].value;
  double s = 0.0;
  for (std::size_t i = 0; i < H.atoms.size(); ++i) {
    if (i == k) continue;
    const double gi = H.atoms[i].value;
    const double d = gk - gi;
    s += static_cast<double>(H.atoms[i].multiplicity) * gi * gi / (d * d);
  }
  return 1.0 - s / static_cast<double>(n);
}

namespace {

void check_unit(const std::vector<double>& v, const char* who) {
  const double nrm = norm2(v);
  if (std::abs(nrm - 1.0) > 1e-10)
    throw std::invalid_argument(std::string(who) + ": vector norm " + std::to_string(nrm) +
                                " is not 1");
}

}  // namespace

double right_overlap_limit(const std::vector<double>& u, std::size_t k,
                           const EquivalentModel& model) {
  check_unit(u, "right_overlap_limit");
  const SpectralMeasure& H = model.measure;
  check_spike_index(k, H);
  if (u.size() != model.A.cols())
    throw std::invalid_argument("right_overlap_limit: u has wrong length");
  const std::size_t n = model.A.cols();
  const double eta_k = eta(k, H, n);
  const double gamma_k = H.atoms[k].value;
  const std::vector<double> Au = matvec(model.A, u);
  double overlap = 0.0;
  const std::size_t start = model.atom_start[k];
  for (std::size_t m = 0; m < H.atoms[k].multiplicity; ++m) {
    double s = 0.0;
    for (std::size_t i = 0; i < Au.size(); ++i) s += model.eig.vectors(i, start + m) * Au[i];
    overlap += s * s;
  }
  return eta_k * overlap / gamma_k;
}

double left_projection_limit(const std::vector<double>& v, std::size_t k,
                             const EquivalentModel& model) {
  check_unit(v, "left_projection_limit");
  const SpectralMeasure& H = model.measure;
  if (v.size() != model.R.rows())
    throw std::invalid_argument("left_projection_limit: v has wrong length");
  const auto coeffs = projection_coeffs(k, H, model.A.cols());
  double total = 0.0;
  for (std::size_t j = 0; j < H.atoms.size(); ++j) {
    const std::size_t start = model.atom_start[j];
    double proj = 0.0;
    for (std::size_t m = 0; m < H.atoms[j].multiplicity; ++m) {
      double s = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) s += model.eig.vectors(i, start + m) * v[i];
      proj += s * s;
    }
    total += coeffs[j] * proj;
  }
  return total;
}

namespace {

// phi' is strictly concave on every interval free of atoms, so each finite
// gap holds 0 or 2 critical points and each unbounded side exactly one.
double bisect_phi_prime(const SpectralMeasure& H, double c, double lo, double hi,
                        bool rising) {
  // rising: phi' goes from negative at lo to positive at hi
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double v = phi_prime_raw(mid, H, c);
    if ((v < 0.0) == rising)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// location of the maximum of phi' on (lo, hi) by golden-section search
double argmax_phi_prime(const SpectralMeasure& H, double c, double lo, double hi) {
  const double gr = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - gr * (b - a);
  double x2 = a + gr * (b - a);
  double f1 = phi_prime_raw(x1, H, c);
  double f2 = phi_prime_raw(x2, H, c);
  for (int it = 0; it < 200 && (b - a) > 1e-13 * (1.0 + std::abs(a)); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = phi_prime_raw(x2, H, c);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = phi_prime_raw(x1, H, c);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

std::vector<SupportInterval> support_endpoints(const SpectralMeasure& H, const AspectRatio& c,
                                               double merge_fraction) {
  std::vector<double> atoms;  // positive atoms, descending
  for (const auto& a : H.atoms)
    if (a.value > 0.0) atoms.push_back(a.value);
  if (atoms.empty()) return {SupportInterval{0.0, 0.0}};

  if (c.c_n == 0.0) {
    // no-noise limit: the law collapses onto the atoms themselves
    std::vector<SupportInterval> out;
    for (auto it = atoms.rbegin(); it != atoms.rend(); ++it)
      out.push_back(SupportInterval{*it, *it});
    return out;
  }

  std::vector<double> crit;
  const double top = atoms.front();
  const double bottom = atoms.back();

  // below the smallest atom: exactly one critical point (phi' decreasing)
  {
    double hi = bottom * (1.0 - 1e-12) - 1e-300;
    double step = std::max(1.0, bottom);
    double lo = bottom - step;
    while (phi_prime_raw(lo, H, c.c_n) <= 0.0 && step < 1e12) {
      step *= 2.0;
      lo = bottom - step;
    }
    // phi' > 0 at lo, -> -inf at hi
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      if (phi_prime_raw(mid, H, c.c_n) > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    crit.push_back(0.5 * (lo + hi));
  }

  // interior gaps (descending order of atoms)
  for (std::size_t i = 0; i + 1 < atoms.size(); ++i) {
    const double hi_atom = atoms[i];
    const double lo_atom = atoms[i + 1];
    const double pad = 1e-11 * (hi_atom - lo_atom);
    const double lo = lo_atom + pad;
    const double hi = hi_atom - pad;
    const double peak = argmax_phi_prime(H, c.c_n, lo, hi);
    if (phi_prime_raw(peak, H, c.c_n) > 0.0) {
      crit.push_back(bisect_phi_prime(H, c.c_n, lo, peak, true));
      // descending branch: phi' positive at peak, negative at hi
      double a = peak, b = hi;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        if (mid == a || mid == b) break;
        if (phi_prime_raw(mid, H, c.c_n) > 0.0)
          a = mid;
        else
          b = mid;
      }
      crit.push_back(0.5 * (a + b));
    }
  }

  // above the largest atom: exactly one critical point (phi' increasing)
  {
    double lo = top * (1.0 + 1e-12);
    double step = std::max(1.0, top);
    double hi = top + step;
    while (phi_prime_raw(hi, H, c.c_n) <= 0.0 && step < 1e12) {
      step *= 2.0;
      hi = top + step;
    }
    crit.push_back(bisect_phi_prime(H, c.c_n, lo, hi, true));
  }

  std::vector<double> edges;
  edges.reserve(crit.size());
  for (double g : crit) edges.push_back(phi_raw(g, H, c.c_n));
  std::sort(edges.begin(), edges.end());
  if (edges.size() % 2 != 0)
    throw std::runtime_error("support_endpoints: odd number of critical points");

  std::vector<SupportInterval> intervals;
  for (std::size_t i = 0; i < edges.size(); i += 2)
    intervals.push_back(SupportInterval{edges[i], edges[i + 1]});

  const double diameter = intervals.back().upper - intervals.front().lower;
  std::vector<SupportInterval> merged;
  for (const auto& iv : intervals) {
    if (!merged.empty() && iv.lower - merged.back().upper < merge_fraction * diameter)
      merged.back().upper = iv.upper;
    else
      merged.push_back(iv);
  }
  return merged;
}

namespace {

// Density of the companion law at grid nodes over one support interval,
// integrated with Simpson on a cosine-graded grid (the sin factor of the
// substitution absorbs the square-root edge behaviour).
struct IntervalDensity {
  double a = 0.0, b = 0.0;
  std::vector<double> theta;  // grid in [0, pi]
  std::vector<double> x;      // mapped abscissae
  std::vector<double> f;      // density * dx/dtheta
  std::vector<double> cum;    // cumulative mass from a to x[i] (Simpson prefix)
  double mass = 0.0;
};

IntervalDensity tabulate_density(const SpectralMeasure& H, const AspectRatio& c,
                                 const SupportInterval& iv, std::size_t panels = 512) {
  IntervalDensity out;
  out.a = iv.lower;
  out.b = iv.upper;
  const std::size_t m = 2 * panels;  // Simpson needs an even number of steps
  const double mid = 0.5 * (iv.lower + iv.upper);
  const double half = 0.5 * (iv.upper - iv.lower);
  out.theta.resize(m + 1);
  out.x.resize(m + 1);
  out.f.resize(m + 1);
  out.cum.assign(m + 1, 0.0);
  const double pi = 3.14159265358979323846;
  cd warm(0.0, 1.0);
  bool have_warm = false;
  for (std::size_t i = 0; i <= m; ++i) {
    const double th = pi * static_cast<double>(i) / static_cast<double>(m);
    out.theta[i] = th;
    const double x = mid - half * std::cos(th);
    out.x[i] = x;
    double density = 0.0;
    if (i > 0 && i < m && half > 0.0) {
      const double eps = 1e-9 * (1.0 + std::abs(x));
      const cd z(x, eps);
      cd init = have_warm ? warm : -1.0 / z;
      cd r = rtilde_iterate(z, H, c.c_n, init);
      if (fp_residual(z, H, c.c_n, r) > 1e-10 * (1.0 + std::abs(z)))
        r = rtilde_iterate(z, H, c.c_n, -1.0 / z);
      warm = r;
      have_warm = true;
      density = std::max(0.0, r.imag() / pi);
    }
    out.f[i] = density * half * std::sin(th);
  }
  const double dth = pi / static_cast<double>(m);
  for (std::size_t i = 0; i + 2 <= m; i += 2) {
    const double panel = dth / 3.0 * (out.f[i] + 4.0 * out.f[i + 1] + out.f[i + 2]);
    out.cum[i + 1] = out.cum[i] + 0.5 * panel;  // midpoint split, monotone enough
    out.cum[i + 2] = out.cum[i] + panel;
  }
  out.mass = out.cum[m];
  return out;
}

}  // namespace

double classical_location(const SpectralMeasure& H, const AspectRatio& c, std::size_t j) {
  if (j == 0) throw std::invalid_argument("classical_location: index is 1-based");
  if (c.n == 0)
    throw std::invalid_argument("classical_location: needs dimensions, not just a ratio");
  const auto intervals = support_endpoints(H, c);
  std::vector<IntervalDensity> dens;
  dens.reserve(intervals.size());
  double total = 0.0;
  for (const auto& iv : intervals) {
    dens.push_back(tabulate_density(H, c, iv));
    total += dens.back().mass;
  }
  const double expected = std::min(1.0, c.c_n);
  if (std::abs(total - expected) > 0.05 * expected)
    throw std::runtime_error("classical_location: captured mass " + std::to_string(total) +
                             ", expected " + std::to_string(expected));
  const double rescale = expected / total;

  const double target = static_cast<double>(j) / static_cast<double>(c.n);
  // count down from the top interval
  double above = 0.0;
  for (std::size_t ii = dens.size(); ii-- > 0;) {
    const auto& d = dens[ii];
    const double mass = d.mass * rescale;
    if (above + mass < target - 1e-12 * std::max(1.0, target)) {
      above += mass;
      continue;
    }
    // need mass (target - above) measured downward from d.b
    const double want_below = d.mass - (target - above) / rescale;  // cum from a
    if (want_below <= 0.0) return d.a;
    // invert the monotone cumulative table
    const auto it = std::lower_bound(d.cum.begin(), d.cum.end(), want_below);
    std::size_t hi_idx = static_cast<std::size_t>(it - d.cum.begin());
    if (hi_idx == 0) return d.a;
    if (hi_idx >= d.cum.size()) return d.b;
    const std::size_t lo_idx = hi_idx - 1;
    const double c0 = d.cum[lo_idx], c1 = d.cum[hi_idx];
    const double t = (c1 > c0) ? (want_below - c0) / (c1 - c0) : 0.5;
    return d.x[lo_idx] + t * (d.x[hi_idx] - d.x[lo_idx]);
  }
  throw std::runtime_error("classical_location: index " + std::to_string(j) +
                           " exceeds captured mass " + std::to_string(above * c.n));
}

namespace {

cd rtilde_for_model(const EquivalentModel& model, cd z) {
  return solve_rtilde(z, model.measure, model.aspect()).r_tilde;
}

}  // namespace

std::complex<double> det_equiv_tildeD_quadform(const std::vector<double>& u,
                                               std::complex<double> z,
                                               const EquivalentModel& model) {
  check_unit(u, "det_equiv_tildeD_quadform");
  const std::size_t n = model.A.cols();
  const std::size_t p = model.R.rows();
  if (u.size() != n) throw std::invalid_argument("det_equiv_tildeD_quadform: length != n");
  const cd r = rtilde_for_model(model, z);

  std::vector<double> ueff = u;
  double ones_dot = 0.0;
  cd extra = 0.0;
  double unorm2 = 1.0;
  if (model.centered) {
    for (double v : u) ones_dot += v;
    for (auto& v : ueff) v -= ones_dot / static_cast<double>(n);
    unorm2 = dot(ueff, ueff);
    extra = -ones_dot * ones_dot / (z * static_cast<double>(n));
  }
  const std::vector<double> w = matvec(model.A, ueff);
  cd quad = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    double wi = 0.0;
    for (std::size_t a = 0; a < p; ++a) wi += model.eig.vectors(a, i) * w[a];
    const cd denom = 1.0 + r * model.eig.values[i];
    if (std::abs(denom) < 1e-14)
      throw std::runtime_error("det_equiv_tildeD_quadform: I + r R is singular");
    quad += wi * wi / denom;
  }
  return r * unorm2 - r * r * quad + extra;
}

std::complex<double> det_equiv_D_quadform(const std::vector<double>& v, std::complex<double> z,
                                          const EquivalentModel& model) {
  check_unit(v, "det_equiv_D_quadform");
  const std::size_t p = model.R.rows();
  if (v.size() != p) throw std::invalid_argument("det_equiv_D_quadform: length != p");
  const cd r = rtilde_for_model(model, z);
  cd out = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    double vi = 0.0;
    for (std::size_t a = 0; a < p; ++a) vi += model.eig.vectors(a, i) * v[a];
    const cd denom = -z * (1.0 + r * model.eig.values[i]);
    if (std::abs(denom) < 1e-14)
      throw std::runtime_error("det_equiv_D_quadform: -z(I + r R) is singular");
    out += vi * vi / denom;
  }
  return out;
}

namespace {

// dense complex LU with partial pivoting, row-major
struct ComplexLU {
  std::vector<cd> lu;
  std::vector<std::size_t> piv;
  std::size_t n = 0;

  explicit ComplexLU(std::vector<cd> m, std::size_t dim) : lu(std::move(m)), piv(dim), n(dim) {
    for (std::size_t i = 0; i < n; ++i) piv[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t best = k;
      double best_mag = std::abs(lu[k * n + k]);
      for (std::size_t i = k + 1; i < n; ++i) {
        const double mag = std::abs(lu[i * n + k]);
        if (mag > best_mag) {
          best = i;
          best_mag = mag;
        }
      }
      if (best_mag == 0.0) throw std::runtime_error("complex LU: singular matrix");
      if (best != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu[k * n + j], lu[best * n + j]);
        std::swap(piv[k], piv[best]);
      }
      const cd pivot = lu[k * n + k];
      for (std::size_t i = k + 1; i < n; ++i) {
        const cd factor = lu[i * n + k] / pivot;
        lu[i * n + k] = factor;
        if (factor == cd(0.0)) continue;
        for (std::size_t j = k + 1; j < n; ++j) lu[i * n + j] -= factor * lu[k * n + j];
      }
    }
  }

  void solve_in_place(std::vector<cd>& b) const {
    std::vector<cd> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[piv[i]];
    for (std::size_t i = 1; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) x[i] -= lu[i * n + j] * x[j];
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu[i * n + j] * x[j];
      x[i] /= lu[i * n + i];
    }
    b = std::move(x);
  }

  std::vector<cd> inverse() const {
    std::vector<cd> inv(n * n, cd(0.0));
    std::vector<cd> col(n);
    for (std::size_t j = 0; j < n; ++j) {
      std::fill(col.begin(), col.end(), cd(0.0));
      col[j] = 1.0;
      solve_in_place(col);
      for (std::size_t i = 0; i < n; ++i) inv[i * n + j] = col[i];
    }
    return inv;
  }
};

}  // namespace

std::complex<double> CoupledDeltas::quadform_T(const std::vector<double>& v) const {
  if (v.size() != p) throw std::invalid_argument("quadform_T: length != p");
  cd s = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    cd row = 0.0;
    for (std::size_t j = 0; j < p; ++j) row += T[i * p + j] * v[j];
    s += v[i] * row;
  }
  return s;
}

std::complex<double> CoupledDeltas::quadform_T_tilde(const std::vector<double>& u) const {
  if (u.size() != n) throw std::invalid_argument("quadform_T_tilde: length != n");
  cd s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cd row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += T_tilde[i * n + j] * u[j];
    s += u[i] * row;
  }
  return s;
}

CoupledDeltas solve_coupled_deltas(std::complex<double> z, const DenseMatrix& A,
                                   const DenseMatrix& Sigma, std::size_t n) {
  const std::size_t p = Sigma.rows();
  if (Sigma.cols() != p) throw std::invalid_argument("solve_coupled_deltas: Sigma not square");
  if (A.rows() != p || A.cols() != n)
    throw std::invalid_argument("solve_coupled_deltas: A must be p x n");
  if (!(z.imag() > 0.0) && !(z.imag() == 0.0 && z.real() < 0.0))
    throw std::invalid_argument("solve_coupled_deltas: need Im z > 0 or real z < 0");

  const DenseMatrix AAt = gram(A, GramSide::Left);

  auto eval = [&](cd delta, cd delta_tilde, std::vector<cd>* T_out, std::vector<cd>* Tt_out,
                  cd& delta_next, cd& delta_tilde_next) {
    // T = (-z (I + delta_tilde Sigma) + A A^T / (1 + delta))^{-1}
    std::vector<cd> MT(p * p);
    const cd sig = 1.0 / (1.0 + delta);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) {
        cd v = -z * delta_tilde * Sigma(i, j) + sig * AAt(i, j);
        if (i == j) v += -z;
        MT[i * p + j] = v;
      }
    ComplexLU luT(std::move(MT), p);
    const std::vector<cd> Tinv = luT.inverse();
    cd trST = 0.0;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) trST += Sigma(i, j) * Tinv[j * p + i];
    delta_next = trST / static_cast<double>(n);

    // Ttilde = (-z (1 + delta) I + A^T (I + delta_tilde Sigma)^{-1} A)^{-1}
    std::vector<cd> B(p * p);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j)
        B[i * p + j] = (i == j ? cd(1.0) : cd(0.0)) + delta_tilde * Sigma(i, j);
    ComplexLU luB(std::move(B), p);
    std::vector<std::vector<cd>> BinvA(n, std::vector<cd>(p));
    {
      std::vector<cd> col(p);
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < p; ++i) col[i] = A(i, j);
        luB.solve_in_place(col);
        BinvA[j] = col;
      }
    }
    std::vector<cd> MTt(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        cd v = 0.0;
        for (std::size_t a = 0; a < p; ++a) v += A(a, i) * BinvA[j][a];
        if (i == j) v += -z * (1.0 + delta);
        MTt[i * n + j] = v;
      }
    ComplexLU luTt(std::move(MTt), n);
    const std::vector<cd> Ttinv = luTt.inverse();
    cd trTt = 0.0;
    for (std::size_t i = 0; i < n; ++i) trTt += Ttinv[i * n + i];
    delta_tilde_next = trTt / static_cast<double>(n);

    if (T_out) *T_out = Tinv;
    if (Tt_out) *Tt_out = Ttinv;
  };

  cd delta = 0.0, delta_tilde = 0.0;
  double res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 2000; ++it) {
    cd dn, dtn;
    eval(delta, delta_tilde, nullptr, nullptr, dn, dtn);
    const double next_res = std::abs(dn - delta) + std::abs(dtn - delta_tilde);
    if (next_res > res) {
      delta = 0.5 * (delta + dn);
      delta_tilde = 0.5 * (delta_tilde + dtn);
    } else {
      delta = dn;
      delta_tilde = dtn;
    }
    res = next_res;
    if (res < 1e-13 * (1.0 + std::abs(delta) + std::abs(delta_tilde))) break;
  }

  CoupledDeltas out;
  out.p = p;
  out.n = n;
  cd dn, dtn;
  eval(delta, delta_tilde, &out.T, &out.T_tilde, dn, dtn);
  out.delta = delta;
  out.delta_tilde = delta_tilde;
  out.residual_delta = std::abs(dn - delta);
  out.residual_delta_tilde = std::abs(dtn - delta_tilde);
  if (out.residual_delta > 1e-10 || out.residual_delta_tilde > 1e-10)
    throw std::runtime_error("solve_coupled_deltas: fixed point residuals " +
                             std::to_string(out.residual_delta) + ", " +
                             std::to_string(out.residual_delta_tilde));
  return out;
}

std::pair<double, double> spiked_sigma_two_eigs(double d, double ell, double g1) {
  if (d < 0.0 || ell < 0.0)
    throw std::invalid_argument("spiked_sigma_two_eigs: d and ell must be nonnegative");
  const double d2 = d * d;
  const double disc = std::sqrt((d2 - ell) * (d2 - ell) + 4.0 * d2 * g1 * g1 * ell);
  const double g1v = 0.5 * (ell + 2.0 + d2 + disc);
  const double g2v = 0.5 * (ell + 2.0 + d2 - disc);
  return {g1v, g2v};
}

}  // namespace snspec
