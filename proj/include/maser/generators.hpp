#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "maser/model.hpp"

namespace maser {

/// Whether an operator acts on observables (functions of the photon number)
/// or on distributions. The two are exact transposes of each other.
enum class Picture { function, measure };

/// Tridiagonal matrix on the truncated photon-number space 0..n_max.
///
/// sub[i] is entry (i+1, i) and sup[i] is entry (i, i+1), so in the function
/// picture row k reads  (A x)(k) = sub[k-1] x(k-1) + diag[k] x(k) + sup[k] x(k+1).
struct TridiagonalOperator {
  std::vector<double> sub;
  std::vector<double> diag;
  std::vector<double> sup;
  Picture picture = Picture::function;

  TridiagonalOperator() = default;
  explicit TridiagonalOperator(std::size_t dim, Picture pic = Picture::function);

  std::size_t dim() const noexcept { return diag.size(); }

  void apply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> apply(std::span<const double> x) const;
  /// Row vector times matrix, i.e. A^T x.
  std::vector<double> apply_transpose(std::span<const double> x) const;

  TridiagonalOperator transposed() const;
  std::vector<double> row_sums() const;
  double max_abs_entry() const;
  /// Off-diagonal entries all non-negative.
  bool is_metzler() const;
};

/// One real counting field per channel; all zero gives back the Markov generator.
struct TiltVector {
  double ground = 0.0;
  double excited = 0.0;
  double emit = 0.0;
  double absorb = 0.0;

  static TiltVector along(Channel c, double s = 1.0);
  TiltVector scaled(double s) const;
  TiltVector operator+(const TiltVector& o) const;
  double operator[](Channel c) const noexcept;
  bool is_zero() const noexcept;
};

/// Birth-death generator of the cavity, function picture, reflecting at n_max.
TridiagonalOperator markov_generator(const MaserParams& p, std::size_t n_max);

/// Generator with each channel's gain term weighted by exp(s_channel). The
/// excited channel acts as a diagonal self-loop (exp(s)-1)*excited(k).
TridiagonalOperator tilted_generator(const MaserParams& p, std::size_t n_max,
                                     const TiltVector& tilt);

/// Sandwich generator L_{u,v} at phi_u = phi0 + u/sqrt(t), phi_v = phi0 + v/sqrt(t),
/// restricted to the diagonal algebra.
TridiagonalOperator two_point_generator(const MaserParams& p0, double u, double v, double t,
                                        std::size_t n_max);

/// Tilted generator split as T = L + diag(row_sum) where L has the same
/// off-diagonals as T and zero row sums. Row sums are computed with expm1 so
/// they keep full relative accuracy for tiny tilts.
struct RowSumForm {
  std::vector<double> sub;
  std::vector<double> sup;
  std::vector<double> row_sum;

  std::size_t dim() const noexcept { return row_sum.size(); }
  TridiagonalOperator to_operator() const;
};

RowSumForm row_sum_form(const TridiagonalOperator& t);
RowSumForm tilted_row_sum_form(const MaserParams& p, std::size_t n_max, const TiltVector& tilt);

// Exact derivative matrices used by the perturbation expansions. All are in
// the function picture, with the same boundary convention as the generators.

/// d^order/ds^order of tilted_generator(p, n_max, s*direction) at s = 0 (order 1 or 2).
TridiagonalOperator tilt_derivative(const MaserParams& p, std::size_t n_max,
                                    const TiltVector& direction, int order);
/// d^order/dphi^order of markov_generator (order 1 or 2).
TridiagonalOperator generator_phi_derivative(const MaserParams& p, std::size_t n_max, int order);
/// d/dphi of tilt_derivative(order 1).
TridiagonalOperator tilt_phi_derivative(const MaserParams& p, std::size_t n_max,
                                        const TiltVector& direction);

}  // namespace maser
