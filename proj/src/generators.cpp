#include "maser/generators.hpp"

#include <algorithm>
#include <cmath>

#include "maser/errors.hpp"

namespace maser {

TridiagonalOperator::TridiagonalOperator(std::size_t dim, Picture pic)
    : sub(dim > 0 ? dim - 1 : 0, 0.0), diag(dim, 0.0), sup(dim > 0 ? dim - 1 : 0, 0.0),
      picture(pic) {}

void TridiagonalOperator::apply(std::span<const double> x, std::span<double> y) const {
  const std::size_t n = dim();
  if (x.size() != n || y.size() != n) {
    throw Error(ErrorCode::invalid_argument, "dimension mismatch in TridiagonalOperator::apply");
  }
  if (n == 0) return;
  if (n == 1) {
    y[0] = diag[0] * x[0];
    return;
  }
  y[0] = diag[0] * x[0] + sup[0] * x[1];
  for (std::size_t k = 1; k + 1 < n; ++k) {
    y[k] = sub[k - 1] * x[k - 1] + diag[k] * x[k] + sup[k] * x[k + 1];
  }
  y[n - 1] = sub[n - 2] * x[n - 2] + diag[n - 1] * x[n - 1];
}

std::vector<double> TridiagonalOperator::apply(std::span<const double> x) const {
  std::vector<double> y(dim());
  apply(x, y);
  return y;
}

std::vector<double> TridiagonalOperator::apply_transpose(std::span<const double> x) const {
  return transposed().apply(x);
}

TridiagonalOperator TridiagonalOperator::transposed() const {
  TridiagonalOperator t;
  t.sub = sup;
  t.sup = sub;
  t.diag = diag;
  t.picture = picture == Picture::function ? Picture::measure : Picture::function;
  return t;
}

std::vector<double> TridiagonalOperator::row_sums() const {
  std::vector<double> r(diag);
  for (std::size_t i = 0; i < sub.size(); ++i) {
    r[i] += sup[i];
    r[i + 1] += sub[i];
  }
  return r;
}

double TridiagonalOperator::max_abs_entry() const {
  double m = 0.0;
  for (double v : sub) m = std::max(m, std::abs(v));
  for (double v : diag) m = std::max(m, std::abs(v));
  for (double v : sup) m = std::max(m, std::abs(v));
  return m;
}

bool TridiagonalOperator::is_metzler() const {
  return std::all_of(sub.begin(), sub.end(), [](double v) { return v >= 0.0; }) &&
         std::all_of(sup.begin(), sup.end(), [](double v) { return v >= 0.0; });
}

TiltVector TiltVector::along(Channel c, double s) {
  TiltVector t;
  switch (c) {
    case Channel::ground: t.ground = s; break;
    case Channel::excited: t.excited = s; break;
    case Channel::emit: t.emit = s; break;
    case Channel::absorb: t.absorb = s; break;
  }
  return t;
}

TiltVector TiltVector::scaled(double s) const {
  return TiltVector{ground * s, excited * s, emit * s, absorb * s};
}

TiltVector TiltVector::operator+(const TiltVector& o) const {
  return TiltVector{ground + o.ground, excited + o.excited, emit + o.emit, absorb + o.absorb};
}

double TiltVector::operator[](Channel c) const noexcept {
  switch (c) {
    case Channel::ground: return ground;
    case Channel::excited: return excited;
    case Channel::emit: return emit;
    case Channel::absorb: return absorb;
  }
  return 0.0;
}

bool TiltVector::is_zero() const noexcept {
  return ground == 0.0 && excited == 0.0 && emit == 0.0 && absorb == 0.0;
}

namespace {

void require_levels(std::size_t n_max) {
  if (n_max < 1) throw Error(ErrorCode::invalid_argument, "n_max must be >= 1");
}

// Rates with the reflecting boundary applied: no up-jumps out of n_max.
ChannelRates truncated_rates(std::size_t k, std::size_t n_max, const MaserParams& p) {
  ChannelRates r = channel_rates(static_cast<std::int64_t>(k), p);
  if (k == n_max) {
    r.ground = 0.0;
    r.absorb = 0.0;
  }
  return r;
}

ChannelRates truncated_derivatives(std::size_t k, std::size_t n_max, const MaserParams& p,
                                   int order) {
  const auto kk = static_cast<std::int64_t>(k);
  ChannelRates d = order == 1 ? rate_phi_derivatives(kk, p) : rate_phi_second_derivatives(kk, p);
  if (k == n_max) d.ground = 0.0;
  return d;
}

void require_order(int order) {
  if (order != 1 && order != 2) {
    throw Error(ErrorCode::invalid_argument, "derivative order must be 1 or 2");
  }
}

}  // namespace

TridiagonalOperator tilted_generator(const MaserParams& p, std::size_t n_max,
                                     const TiltVector& tilt) {
  require_levels(n_max);
  const double eg = std::exp(tilt.ground);
  const double ea = std::exp(tilt.absorb);
  const double ee = std::exp(tilt.emit);
  const double xx = std::expm1(tilt.excited);
  TridiagonalOperator op(n_max + 1, Picture::function);
  for (std::size_t k = 0; k <= n_max; ++k) {
    const ChannelRates r = truncated_rates(k, n_max, p);
    if (k < n_max) op.sup[k] = eg * r.ground + ea * r.absorb;
    if (k > 0) op.sub[k - 1] = ee * r.emit;
    op.diag[k] = -(r.up() + r.down()) + xx * r.excited;
  }
  return op;
}

TridiagonalOperator markov_generator(const MaserParams& p, std::size_t n_max) {
  return tilted_generator(p, n_max, TiltVector{});
}

TridiagonalOperator two_point_generator(const MaserParams& p0, double u, double v, double t,
                                        std::size_t n_max) {
  require_levels(n_max);
  if (!(t > 0.0)) throw Error(ErrorCode::invalid_argument, "time horizon must be positive");
  const double phi_u = p0.phi() + u / std::sqrt(t);
  const double phi_v = p0.phi() + v / std::sqrt(t);
  const double n_ex = p0.n_ex();
  const double nu = p0.nu();

  TridiagonalOperator op(n_max + 1, Picture::function);
  for (std::size_t k = 0; k <= n_max; ++k) {
    const double kk = static_cast<double>(k);
    const double root = std::sqrt(kk + 1.0);
    const double su = std::sin(phi_u * root), cu = std::cos(phi_u * root);
    const double sv = std::sin(phi_v * root), cv = std::cos(phi_v * root);
    const bool top = k == n_max;
    // Total loss rate sum_i L_i^* L_i in state k at each angle.
    auto loss = [&](double s, double c) {
      const double up = top ? 0.0 : n_ex * (s * s) + nu * (kk + 1.0);
      return up + n_ex * (c * c) + (nu + 1.0) * kk;
    };
    if (!top) op.sup[k] = n_ex * su * sv + nu * (kk + 1.0);
    if (k > 0) op.sub[k - 1] = (nu + 1.0) * kk;
    op.diag[k] = n_ex * cu * cv - 0.5 * (loss(su, cu) + loss(sv, cv));
  }
  return op;
}

TridiagonalOperator RowSumForm::to_operator() const {
  TridiagonalOperator op(dim(), Picture::function);
  op.sub = sub;
  op.sup = sup;
  for (std::size_t k = 0; k < dim(); ++k) {
    double d = row_sum[k];
    if (k > 0) d -= sub[k - 1];
    if (k + 1 < dim()) d -= sup[k];
    op.diag[k] = d;
  }
  return op;
}

RowSumForm row_sum_form(const TridiagonalOperator& t) {
  return RowSumForm{t.sub, t.sup, t.row_sums()};
}

RowSumForm tilted_row_sum_form(const MaserParams& p, std::size_t n_max, const TiltVector& tilt) {
  require_levels(n_max);
  const double eg = std::exp(tilt.ground), ea = std::exp(tilt.absorb), ee = std::exp(tilt.emit);
  const double mg = std::expm1(tilt.ground), ma = std::expm1(tilt.absorb);
  const double me = std::expm1(tilt.emit), mx = std::expm1(tilt.excited);
  RowSumForm f;
  f.sub.assign(n_max, 0.0);
  f.sup.assign(n_max, 0.0);
  f.row_sum.assign(n_max + 1, 0.0);
  for (std::size_t k = 0; k <= n_max; ++k) {
    const ChannelRates r = truncated_rates(k, n_max, p);
    if (k < n_max) f.sup[k] = eg * r.ground + ea * r.absorb;
    if (k > 0) f.sub[k - 1] = ee * r.emit;
    f.row_sum[k] = mg * r.ground + ma * r.absorb + me * r.emit + mx * r.excited;
  }
  return f;
}

TridiagonalOperator tilt_derivative(const MaserParams& p, std::size_t n_max,
                                    const TiltVector& direction, int order) {
  require_levels(n_max);
  require_order(order);
  auto pw = [order](double d) { return order == 1 ? d : d * d; };
  const double wg = pw(direction.ground), wa = pw(direction.absorb);
  const double we = pw(direction.emit), wx = pw(direction.excited);
  TridiagonalOperator op(n_max + 1, Picture::function);
  for (std::size_t k = 0; k <= n_max; ++k) {
    const ChannelRates r = truncated_rates(k, n_max, p);
    if (k < n_max) op.sup[k] = wg * r.ground + wa * r.absorb;
    if (k > 0) op.sub[k - 1] = we * r.emit;
    op.diag[k] = wx * r.excited;
  }
  return op;
}

TridiagonalOperator generator_phi_derivative(const MaserParams& p, std::size_t n_max,
                                             int order) {
  require_levels(n_max);
  require_order(order);
  TridiagonalOperator op(n_max + 1, Picture::function);
  for (std::size_t k = 0; k <= n_max; ++k) {
    const ChannelRates d = truncated_derivatives(k, n_max, p, order);
    if (k < n_max) op.sup[k] = d.ground;
    op.diag[k] = -d.ground;
  }
  return op;
}

TridiagonalOperator tilt_phi_derivative(const MaserParams& p, std::size_t n_max,
                                        const TiltVector& direction) {
  require_levels(n_max);
  TridiagonalOperator op(n_max + 1, Picture::function);
  for (std::size_t k = 0; k <= n_max; ++k) {
    const ChannelRates d = truncated_derivatives(k, n_max, p, 1);
    if (k < n_max) op.sup[k] = direction.ground * d.ground;
    op.diag[k] = direction.excited * d.excited;
  }
  return op;
}

}  // namespace maser
