#include "maser/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "maser/errors.hpp"

namespace maser {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

std::vector<double> ones(std::size_t n) { return std::vector<double>(n, 1.0); }

// Number of eigenvalues strictly below x of the symmetric tridiagonal matrix
// with diagonal a and squared off-diagonals b2.
std::size_t sturm_count(std::span<const double> a, std::span<const double> b2, double x,
                        double pivmin) {
  std::size_t count = 0;
  double d = a[0] - x;
  if (std::abs(d) < pivmin) d = -pivmin;
  if (d < 0.0) ++count;
  for (std::size_t i = 1; i < a.size(); ++i) {
    d = (a[i] - x) - b2[i - 1] / d;
    if (std::abs(d) < pivmin) d = -pivmin;
    if (d < 0.0) ++count;
  }
  return count;
}

// Solves (sigma I - T) x = b where T = L + diag(row_sum), L with zero row
// sums. Pivots are assembled from off-diagonal magnitudes plus the "excess"
// sigma - row_sum, which avoids cancellation against the large diagonal.
// Returns false if a pivot is not positive (sigma not above the Perron root).
bool shifted_solve(const RowSumForm& f, double sigma, std::span<const double> b,
                   std::vector<double>& x, std::vector<double>& piv, std::vector<double>& y) {
  const std::size_t n = f.dim();
  piv.resize(n);
  y.resize(n);
  x.resize(n);
  double excess = sigma - f.row_sum[0];
  piv[0] = (n > 1 ? f.sup[0] : 0.0) + excess;
  if (!(piv[0] > 0.0)) return false;
  y[0] = b[0];
  for (std::size_t k = 1; k < n; ++k) {
    excess = (sigma - f.row_sum[k]) + f.sub[k - 1] * excess / piv[k - 1];
    piv[k] = (k + 1 < n ? f.sup[k] : 0.0) + excess;
    if (!(piv[k] > 0.0)) return false;
    y[k] = b[k] + f.sub[k - 1] * y[k - 1] / piv[k - 1];
  }
  x[n - 1] = y[n - 1] / piv[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) x[k] = (y[k] + f.sup[k] * x[k + 1]) / piv[k];
  return true;
}

// Inverse iteration for the positive right Perron vector; normalized to max 1.
std::vector<double> perron_vector(const RowSumForm& f, double lambda_hat, double gap,
                                  double scale, const EigOptions& opts) {
  const std::size_t n = f.dim();
  const double floor = 1e3 * kEps * std::max(scale, 1e-300);
  double delta = std::max(1e-3 * gap, floor);
  std::vector<double> x, piv, y, v = ones(n);

  // Find a shift that keeps sigma I - T a nonsingular M-matrix.
  int attempts = 0;
  while (!shifted_solve(f, lambda_hat + delta, v, x, piv, y)) {
    delta *= 4.0;
    if (++attempts > 200) {
      throw Error(ErrorCode::convergence_failure, "no admissible shift for inverse iteration");
    }
  }
  const double sigma = lambda_hat + delta;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const double norm = max_abs(x);
    double change = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double next = x[k] / norm;
      change = std::max(change, std::abs(next - v[k]));
      v[k] = next;
    }
    if (change <= 1e-14) {
      // One more sweep at the converged direction.
      shifted_solve(f, sigma, v, x, piv, y);
      const double nm = max_abs(x);
      for (std::size_t k = 0; k < n; ++k) v[k] = x[k] / nm;
      return v;
    }
    shifted_solve(f, sigma, v, x, piv, y);
  }
  std::ostringstream msg;
  msg << "inverse iteration did not converge (gap estimate " << gap << ", shift " << delta << ")";
  throw Error(ErrorCode::convergence_failure, msg.str());
}

void require_metzler(const RowSumForm& f) {
  for (std::size_t i = 0; i < f.sub.size(); ++i) {
    if (f.sub[i] < 0.0 || f.sup[i] < 0.0) {
      throw Error(ErrorCode::invalid_argument, "dominant_eig requires a Metzler operator");
    }
  }
}

}  // namespace

std::vector<double> top_eigenvalues(const TridiagonalOperator& t, std::size_t count) {
  const std::size_t n = t.dim();
  if (n == 0) return {};
  count = std::min(count, n);
  std::vector<double> b2(t.sub.size());
  double bmax = 0.0;
  for (std::size_t i = 0; i < b2.size(); ++i) {
    b2[i] = t.sub[i] * t.sup[i];
    if (b2[i] < 0.0) {
      throw Error(ErrorCode::invalid_argument, "eigenvalues need sub*sup >= 0 (real spectrum)");
    }
    bmax = std::max(bmax, b2[i]);
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t k = 0; k < n; ++k) {
    double r = 0.0;
    if (k > 0) r += std::sqrt(b2[k - 1]);
    if (k + 1 < n) r += std::sqrt(b2[k]);
    lo = std::min(lo, t.diag[k] - r);
    hi = std::max(hi, t.diag[k] + r);
  }
  const double span = std::max(hi - lo, std::max(std::abs(hi), std::abs(lo)));
  lo -= 2.0 * kEps * span + 1e-300;
  hi += 2.0 * kEps * span + 1e-300;
  const double pivmin = std::numeric_limits<double>::min() / kEps * std::max(1.0, bmax);

  std::vector<double> out;
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    double a = lo, b = hi;
    for (int it = 0; it < 300; ++it) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      if (b - a <= 2.0 * kEps * std::max(std::abs(a), std::abs(b))) break;
      if (sturm_count(t.diag, b2, mid, pivmin) >= n - j) {
        b = mid;
      } else {
        a = mid;
      }
    }
    out.push_back(0.5 * (a + b));
  }
  return out;
}

PerronTriple dominant_eig(const TridiagonalOperator& t, const EigOptions& opts) {
  return dominant_eig(row_sum_form(t), opts);
}

PerronTriple dominant_eig(const RowSumForm& f, const EigOptions& opts) {
  const std::size_t n = f.dim();
  if (n == 0) throw Error(ErrorCode::invalid_argument, "empty operator");
  require_metzler(f);
  PerronTriple out;
  if (n == 1) {
    out.eigenvalue = f.row_sum[0];
    out.right_vec = {1.0};
    out.left_vec = {1.0};
    out.gap = std::numeric_limits<double>::infinity();
    return out;
  }

  const TridiagonalOperator op = f.to_operator();
  const std::vector<double> top = top_eigenvalues(op, 2);
  const double scale = std::max(op.max_abs_entry(), 1e-300);
  out.gap = top[0] - top[1];
  std::vector<double> v = perron_vector(f, top[0], out.gap, scale, opts);

  bool irreducible = true;
  for (std::size_t i = 0; i < f.sub.size(); ++i) {
    if (!(f.sub[i] > 0.0 && f.sup[i] > 0.0)) irreducible = false;
  }

  auto residual_of = [&](const std::vector<double>& vec, double lambda) {
    const std::vector<double> tv = op.apply(vec);
    double r = 0.0;
    for (std::size_t k = 0; k < n; ++k) r = std::max(r, std::abs(tv[k] - lambda * vec[k]));
    return r / max_abs(vec);
  };
  const double tol = std::max(1e-11, 64.0 * kEps * scale);

  std::vector<double> left(n);
  bool have_left = false;
  if (irreducible) {
    // diag(mu) T is symmetric, so mu * v is the left vector and mu is the
    // left null vector of the zero-row-sum part. The quotient below is then
    // exact for conservative rows.
    std::vector<double> log_mu(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      log_mu[k + 1] = log_mu[k] + std::log(f.sup[k]) - std::log(f.sub[k]);
    }
    std::vector<double> log_left(n);
    for (std::size_t k = 0; k < n; ++k) {
      log_left[k] = v[k] > 0.0 ? log_mu[k] + std::log(v[k]) : -std::numeric_limits<double>::infinity();
    }
    const double top_log = *std::max_element(log_left.begin(), log_left.end());
    long double num = 0.0L, den = 0.0L;
    for (std::size_t k = 0; k < n; ++k) {
      left[k] = std::exp(log_left[k] - top_log);
      num += static_cast<long double>(left[k]) * f.row_sum[k];
      den += left[k];
    }
    out.eigenvalue = static_cast<double>(num / den);
    // When v decays faster than mu grows, mu * v is dominated by rounding
    // noise in v's tail; fall through to a separate left iteration.
    have_left = residual_of(v, out.eigenvalue) <= tol;
  }
  if (!have_left) {
    const RowSumForm ft = row_sum_form(op.transposed());
    left = perron_vector(ft, top[0], out.gap, scale, opts);
    const std::vector<double> tv = op.apply(v);
    long double num = 0.0L, den = 0.0L;
    for (std::size_t k = 0; k < n; ++k) {
      num += static_cast<long double>(left[k]) * tv[k];
      den += static_cast<long double>(left[k]) * v[k];
    }
    out.eigenvalue = static_cast<double>(num / den);
  }

  const double lsum = std::accumulate(left.begin(), left.end(), 0.0);
  for (double& l : left) l /= lsum;
  const double lv = dot(left, v);
  for (double& x : v) x /= lv;

  const double resid = residual_of(v, out.eigenvalue);
  if (!(resid <= tol)) {
    std::ostringstream msg;
    msg << "Perron residual " << resid << " exceeds " << tol;
    throw Error(ErrorCode::convergence_failure, msg.str());
  }
  out.right_vec = std::move(v);
  out.left_vec = std::move(left);
  return out;
}

std::vector<double> drazin_solve(const TridiagonalOperator& q, std::span<const double> x,
                                 const StationaryDistribution& pi) {
  const std::size_t n = q.dim();
  if (x.size() != n || pi.probs.size() != n) {
    throw Error(ErrorCode::invalid_argument, "drazin_solve: dimension mismatch");
  }
  const std::vector<double> rs = q.row_sums();
  const double scale = std::max(q.max_abs_entry(), 1e-300);
  for (double r : rs) {
    if (std::abs(r) > 1e-12 * scale) {
      throw Error(ErrorCode::invalid_argument, "drazin_solve: operator rows do not sum to zero");
    }
  }
  if (q.picture != Picture::function) {
    throw Error(ErrorCode::invalid_argument, "drazin_solve expects the function picture");
  }

  double total = 0.0, mass = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    total += pi.probs[k] * x[k];
    mass += pi.probs[k] * std::abs(x[k]);
  }
  std::vector<double> y(n, 0.0);
  if (mass == 0.0) return y;
  if (std::abs(total) > 1e-10 * mass) {
    std::ostringstream msg;
    msg << "right-hand side is not centred: pi.x = " << total << " (mass " << mass << ")";
    throw Error(ErrorCode::singular_system, msg.str());
  }

  // Birth-death chains are reversible, so the flux F_k = pi_k up_k (y_{k+1} - y_k)
  // obeys F_k - F_{k-1} = pi_k x_k. Each F_k is taken from whichever partial sum
  // (from the bottom or from the top) carries less absolute mass.
  std::vector<double> prefix(n), prefix_abs(n);
  double acc = 0.0, acc_abs = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    acc += pi.probs[k] * x[k];
    acc_abs += pi.probs[k] * std::abs(x[k]);
    prefix[k] = acc;
    prefix_abs[k] = acc_abs;
  }
  std::vector<double> suffix(n, 0.0), suffix_abs(n, 0.0);
  acc = 0.0;
  acc_abs = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    suffix[k] = acc;  // sum over j > k
    suffix_abs[k] = acc_abs;
    acc += pi.probs[k] * x[k];
    acc_abs += pi.probs[k] * std::abs(x[k]);
  }
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double flux = prefix_abs[k] <= suffix_abs[k] ? prefix[k] : -suffix[k];
    const double conductance = pi.probs[k] * q.sup[k];
    double step = 0.0;
    if (conductance > 0.0) {
      step = flux / conductance;
    } else if (flux != 0.0) {
      throw Error(ErrorCode::singular_system, "drazin_solve: chain is not irreducible");
    }
    y[k + 1] = y[k] + step;
  }
  const double shift = dot(pi.probs, y);
  for (double& v : y) v -= shift;
  return y;
}

namespace {

// Uniformization with substeps. With log_scale non-null the vector is
// renormalised after every substep and the accumulated log factor returned
// through it, so results far outside the double range remain usable.
std::vector<double> expm_core(const TridiagonalOperator& t, double tau, std::span<const double> x,
                              const ExpmOptions& opts, double* log_scale) {
  const std::size_t n = t.dim();
  if (x.size() != n) throw Error(ErrorCode::invalid_argument, "expm_apply: dimension mismatch");
  if (!(tau >= 0.0)) throw Error(ErrorCode::invalid_argument, "expm_apply: tau must be >= 0");
  std::vector<double> cur(x.begin(), x.end());
  if (log_scale) *log_scale = 0.0;
  if (tau == 0.0 || n == 0) return cur;

  // Shift by the largest row sum so that I + (T - c) / rate is substochastic
  // and the Poisson tail bounds the truncation error.
  double c = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    double row = t.diag[k];
    if (k > 0) row += t.sub[k - 1];
    if (k + 1 < n) row += t.sup[k];
    c = std::max(c, row);
  }
  double rate = 0.0;
  for (double d : t.diag) rate = std::max(rate, c - d);
  if (rate == 0.0) {
    if (log_scale) {
      *log_scale = tau * c;
    } else {
      for (double& v : cur) v *= std::exp(tau * c);
    }
    return cur;
  }

  const double total = rate * tau;
  const double substeps = std::ceil(total / opts.max_step_mass);
  if (!(substeps <= opts.max_substeps)) {
    std::ostringstream msg;
    msg << "expm_apply needs " << substeps << " substeps (rate " << rate << ", tau " << tau << ")";
    throw Error(ErrorCode::step_underflow, msg.str());
  }
  const double lam = total / substeps;
  const double step_shift = c * tau / substeps;
  const double step_factor = std::exp(step_shift);

  // Poisson(lam) weights up to the requested tail mass.
  std::vector<double> w{std::exp(-lam)};
  double cum = w[0];
  for (std::size_t j = 1; 1.0 - cum > opts.poisson_tail || static_cast<double>(j) < lam; ++j) {
    w.push_back(w.back() * lam / static_cast<double>(j));
    cum += w.back();
    if (j > 100000 + 20 * static_cast<std::size_t>(lam)) break;
  }

  // P = I + T / rate.
  std::vector<double> pd(n), ps(t.sub.size()), pu(t.sup.size());
  for (std::size_t k = 0; k < n; ++k) pd[k] = 1.0 + (t.diag[k] - c) / rate;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    ps[k] = t.sub[k] / rate;
    pu[k] = t.sup[k] / rate;
  }

  std::vector<double> v(n), next(n), out(n);
  const auto steps = static_cast<long long>(substeps);
  for (long long step = 0; step < steps; ++step) {
    v = cur;
    for (std::size_t k = 0; k < n; ++k) out[k] = w[0] * v[k];
    for (std::size_t j = 1; j < w.size(); ++j) {
      const double wj = w[j];
      if (n == 1) {
        next[0] = pd[0] * v[0];
      } else {
        next[0] = pd[0] * v[0] + pu[0] * v[1];
        for (std::size_t k = 1; k + 1 < n; ++k) {
          next[k] = ps[k - 1] * v[k - 1] + pd[k] * v[k] + pu[k] * v[k + 1];
        }
        next[n - 1] = ps[n - 2] * v[n - 2] + pd[n - 1] * v[n - 1];
      }
      for (std::size_t k = 0; k < n; ++k) out[k] += wj * next[k];
      v.swap(next);
    }
    cur.swap(out);
    if (step_shift != 0.0) {
      if (log_scale) {
        *log_scale += step_shift;
      } else {
        for (double& v : cur) v *= step_factor;
      }
    }
    if (log_scale) {
      const double m = max_abs(cur);
      if (m > 0.0 && std::isfinite(m)) {
        for (double& c : cur) c /= m;
        *log_scale += std::log(m);
      }
    }
  }
  return cur;
}

}  // namespace

std::vector<double> expm_apply(const TridiagonalOperator& t, double tau, std::span<const double> x,
                               const ExpmOptions& opts) {
  return expm_core(t, tau, x, opts, nullptr);
}

double log_expm_contract(const TridiagonalOperator& t, double tau, std::span<const double> x,
                         std::span<const double> w, const ExpmOptions& opts) {
  if (w.size() != t.dim()) throw Error(ErrorCode::invalid_argument, "contraction vector has the wrong dimension");
  double log_scale = 0.0;
  const std::vector<double> y = expm_core(t, tau, x, opts, &log_scale);
  return std::log(dot(w, y)) + log_scale;
}

double scgf(const MaserParams& p, std::size_t n_max, const TiltVector& tilt) {
  if (tilt.is_zero()) return 0.0;
  return dominant_eig(tilted_row_sum_form(p, n_max, tilt)).eigenvalue;
}

namespace {

struct Richardson {
  double first = 0.0;
  double second = 0.0;
  double spread = 0.0;
};

// Central differences of r(s * direction) at h, h/2, h/4 with two levels of
// Richardson extrapolation.
Richardson extrapolate_scgf(const MaserParams& p, std::size_t n_max, const TiltVector& dir,
                            double h) {
  double d1[3], d2[3];
  for (int i = 0; i < 3; ++i) {
    const double hi = h / static_cast<double>(1 << i);
    const double rp = scgf(p, n_max, dir.scaled(hi));
    const double rm = scgf(p, n_max, dir.scaled(-hi));
    d1[i] = (rp - rm) / (2.0 * hi);
    d2[i] = (rp + rm) / (hi * hi);
  }
  auto extrap = [](const double* d, double& best, double& prev) {
    const double a0 = (4.0 * d[1] - d[0]) / 3.0;
    const double a1 = (4.0 * d[2] - d[1]) / 3.0;
    best = (16.0 * a1 - a0) / 15.0;
    prev = a1;
  };
  Richardson r;
  double p1 = 0.0, p2 = 0.0;
  extrap(d1, r.first, p1);
  extrap(d2, r.second, p2);
  const double s1 = std::abs(r.first - p1) / std::max(std::abs(r.first), 1e-300);
  const double s2 = std::abs(r.second - p2) / std::max(std::abs(r.second), 1e-300);
  r.spread = std::max(r.first == 0.0 ? 0.0 : s1, r.second == 0.0 ? 0.0 : s2);
  return r;
}

bool routes_agree(double a, double b, double abs_floor) {
  return std::abs(a - b) <= kRouteTolerance * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

struct DrazinPieces {
  StationaryDistribution pi;
  TridiagonalOperator q;
  TridiagonalOperator c;
  std::vector<double> c1;
  double m = 0.0;
  std::vector<double> g;  // Q g = C1 - m
};

DrazinPieces drazin_pieces(const MaserParams& p, const TiltVector& dir, std::size_t n_max) {
  DrazinPieces d;
  d.pi = stationary_distribution_fixed(p, n_max);
  d.q = markov_generator(p, n_max);
  d.c = tilt_derivative(p, n_max, dir, 1);
  d.c1 = d.c.apply(ones(n_max + 1));
  d.m = dot(d.pi.probs, d.c1);
  std::vector<double> centred(d.c1);
  for (double& v : centred) v -= d.m;
  // A second pass removes the rounding residue, which matters when the rate
  // is nearly state independent.
  const double residue = dot(d.pi.probs, centred);
  for (double& v : centred) v -= residue;
  d.g = drazin_solve(d.q, centred, d.pi);
  return d;
}

}  // namespace

CumulantRates cumulant_derivatives(const MaserParams& p, const TiltVector& direction,
                                   std::size_t n_max) {
  if (direction.is_zero()) {
    throw Error(ErrorCode::invalid_argument, "cumulant direction must be non-zero");
  }
  const DrazinPieces d = drazin_pieces(p, direction, n_max);
  const TridiagonalOperator c2 = tilt_derivative(p, n_max, direction, 2);
  CumulantRates out;
  out.m_drazin = d.m;
  out.v_drazin = dot(d.pi.probs, c2.apply(ones(n_max + 1))) - 2.0 * dot(d.pi.probs, d.c.apply(d.g));

  // Step size: r(s) is analytic on a disc whose radius shrinks with the
  // spectral gap relative to the spread of per-state count rates.
  const std::vector<double> top = top_eigenvalues(d.q, 2);
  const double gap = std::max(top[0] - top[1], 0.0);
  const auto [lo, hi] = std::minmax_element(d.c1.begin(), d.c1.end());
  const double rate_spread = *hi - *lo;
  double h = 1e-4;
  if (rate_spread > 0.0) h = std::min(h, 0.05 * gap / rate_spread);
  h = std::max(h, 1e-14);

  Richardson best = extrapolate_scgf(p, n_max, direction, h);
  double best_h = h;
  for (int retry = 0; retry < 6 && best.spread > 1e-7; ++retry) {
    h *= 0.25;
    const Richardson r = extrapolate_scgf(p, n_max, direction, h);
    if (r.spread < best.spread) {
      best = r;
      best_h = h;
    }
  }
  out.m_eig = best.first;
  out.v_eig = best.second;
  out.step = best_h;
  out.extrapolation_spread = best.spread;
  out.m = out.m_drazin;
  out.v = out.v_drazin;

  const double rate_scale = std::max(1.0, *hi);
  if (!routes_agree(out.m_eig, out.m_drazin, 1e-10 * rate_scale) ||
      !routes_agree(out.v_eig, out.v_drazin, 1e-10 * rate_scale)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "eigenvalue route (m=" << out.m_eig << ", V=" << out.v_eig
        << ") vs perturbation route (m=" << out.m_drazin << ", V=" << out.v_drazin
        << ") at phi=" << p.phi();
    throw Error(ErrorCode::route_disagreement, msg.str());
  }
  return out;
}

double sensitivity(const MaserParams& p, const TiltVector& direction, std::size_t n_max) {
  const DrazinPieces d = drazin_pieces(p, direction, n_max);
  const TridiagonalOperator c_phi = tilt_phi_derivative(p, n_max, direction);
  const TridiagonalOperator q_phi = generator_phi_derivative(p, n_max, 1);
  return dot(d.pi.probs, c_phi.apply(ones(n_max + 1))) - dot(d.pi.probs, q_phi.apply(d.g));
}

double sensitivity_by_differencing(const MaserParams& p, const TiltVector& direction,
                                   std::size_t n_max) {
  // Rates depend on phi only through sin^2 and cos^2, so m(phi) is even and
  // negative arguments can be folded back.
  auto mean_rate = [&](double phi) {
    const MaserParams q = p.with_phi(std::abs(phi));
    const StationaryDistribution pi = stationary_distribution_fixed(q, n_max);
    const std::vector<double> c1 = tilt_derivative(q, n_max, direction, 1).apply(ones(n_max + 1));
    return dot(pi.probs, c1);
  };
  const double h = 1e-3 / std::sqrt(p.n_ex());
  double d[3];
  for (int i = 0; i < 3; ++i) {
    const double hi = h / static_cast<double>(1 << i);
    d[i] = (mean_rate(p.phi() + hi) - mean_rate(p.phi() - hi)) / (2.0 * hi);
  }
  const double a0 = (4.0 * d[1] - d[0]) / 3.0;
  const double a1 = (4.0 * d[2] - d[1]) / 3.0;
  return (16.0 * a1 - a0) / 15.0;
}

double davies_limit(const MaserParams& p0, double s, double u, const TiltVector& direction,
                    std::size_t n_max) {
  const DrazinPieces d = drazin_pieces(p0, direction, n_max);
  const std::vector<double> one = ones(n_max + 1);
  const TridiagonalOperator c2 = tilt_derivative(p0, n_max, direction, 2);
  const TridiagonalOperator c_phi = tilt_phi_derivative(p0, n_max, direction);
  const TridiagonalOperator q_phi = generator_phi_derivative(p0, n_max, 1);
  const TridiagonalOperator q_phiphi = generator_phi_derivative(p0, n_max, 2);
  const auto& pi = d.pi.probs;

  // Expansion of the centred generator G(s/sqrt t, u/sqrt t) in powers of 1/sqrt t:
  //   L1 = s (C - m) + u Q',   L2 = (s^2 C2 + 2 s u C' + u^2 Q'') / 2.
  std::vector<double> l1_one(n_max + 1);
  const std::vector<double> q_phi_one = q_phi.apply(one);
  for (std::size_t k = 0; k <= n_max; ++k) l1_one[k] = s * (d.c1[k] - d.m) + u * q_phi_one[k];
  for (int pass = 0; pass < 2; ++pass) {
    const double drift = dot(pi, l1_one);
    for (double& v : l1_one) v -= drift;
  }
  const std::vector<double> g = drazin_solve(d.q, l1_one, d.pi);

  const double pi_l2_one = 0.5 * (s * s * dot(pi, c2.apply(one)) +
                                  2.0 * s * u * dot(pi, c_phi.apply(one)) +
                                  u * u * dot(pi, q_phiphi.apply(one)));
  const double pi_l1_g =
      s * (dot(pi, d.c.apply(g)) - d.m * dot(pi, g)) + u * dot(pi, q_phi.apply(g));
  return pi_l2_one - pi_l1_g;
}

double finite_time_log_mgf(const MaserParams& p0, double s, double u, double t,
                           const TiltVector& direction, std::size_t n_max,
                           std::optional<std::vector<double>> initial, const ExpmOptions& opts) {
  if (!(t > 0.0)) throw Error(ErrorCode::invalid_argument, "time horizon must be positive");
  const double root_t = std::sqrt(t);
  const StationaryDistribution pi0 = stationary_distribution_fixed(p0, n_max);
  const std::vector<double> one = ones(n_max + 1);
  const double m0 = dot(pi0.probs, tilt_derivative(p0, n_max, direction, 1).apply(one));

  const MaserParams pu = p0.with_phi(std::abs(p0.phi() + u / root_t));
  TridiagonalOperator gen = tilted_generator(pu, n_max, direction.scaled(s / root_t));
  for (double& dd : gen.diag) dd -= (s / root_t) * m0;

  const std::vector<double>& init = initial ? *initial : pi0.probs;
  if (init.size() != one.size()) {
    throw Error(ErrorCode::invalid_argument, "initial law has the wrong dimension");
  }
  return log_expm_contract(gen, t, one, init, opts);
}

}  // namespace maser
