#ifndef HOLOREG_GRIDMATH_HPP
#define HOLOREG_GRIDMATH_HPP

#include <optional>
#include <string>

#include "holoreg/array.hpp"

namespace holoreg {

// Fractional frequency of DFT index i on an n-point grid, in [-0.5, 0.5).
inline double fft_freq(std::size_t i, std::size_t n) {
  const auto half = static_cast<std::ptrdiff_t>(n) / 2 + static_cast<std::ptrdiff_t>(n) % 2;
  const auto si = static_cast<std::ptrdiff_t>(i);
  return (si < half ? si : si - static_cast<std::ptrdiff_t>(n)) / static_cast<double>(n);
}

// Per-pixel spatial-frequency coordinates in cycles per feature length,
// DC at index (0,0), negative frequencies in the upper index half.
struct FrequencyGrid {
  std::size_t rows = 0, cols = 0;

  FrequencyGrid(std::size_t r, std::size_t c) : rows(r), cols(c) {}

  double xi_row(std::size_t i) const { return fft_freq(i, rows); }
  double xi_col(std::size_t j) const { return fft_freq(j, cols); }
  double xi_sq(std::size_t i, std::size_t j) const {
    const double xr = xi_row(i), xc = xi_col(j);
    return xr * xr + xc * xc;
  }
};

struct ImagingGeometry {
  double fresnel_number = 0;            // per-pixel Fresnel number, > 0
  double pixel_size = 1.0;              // nm
  std::optional<double> defocus;        // nm
  std::optional<double> wavenumber;     // 1/nm
  bool padding = false;                 // 2x replicate padding in the propagator

  // Throws ConfigError if N_F <= 0 or inconsistent with (a, d, k).
  void validate() const;
};

struct GramianSpec {
  enum class Kind { identity, sobolev, weighted };

  Kind kind = Kind::identity;
  double s = 0;          // Sobolev exponent, >= 0
  RealImage weights;     // pointwise weights, > 0

  static GramianSpec identity() { return {}; }
  static GramianSpec sobolev(double s);
  static GramianSpec weighted(RealImage w);

  void validate() const;
};

enum class Direction { forward, inverse };

// Unitary 2D discrete Fourier transform (Parseval-normalized).
ComplexImage fft2(const ComplexImage& field);
ComplexImage ifft2(const ComplexImage& spectrum);

// Unitary 3D transforms (used by volume-space analysis).
ComplexVolume fft3(const ComplexVolume& field);
ComplexVolume ifft3(const ComplexVolume& spectrum);

// Near-field propagation as a Fourier multiplier exp(+/- i pi xi^2 / N_F).
// With geom.padding the field is replicate-padded to 2x per axis before the
// transform and cropped afterwards, suppressing wrap-around fringes.
ComplexImage fresnel_propagate(const ComplexImage& psi, const ImagingGeometry& geom,
                               Direction dir = Direction::forward);

// Replicate-pad to double size per axis, original in the top-left corner.
ComplexImage replicate_pad2(const ComplexImage& img);
// Transpose of replicate_pad2 (accumulates replicated borders back).
ComplexImage replicate_pad2_transpose(const ComplexImage& big, std::size_t rows, std::size_t cols);

// Apply the Gramian of the chosen norm: identity, the Sobolev multiplier
// (1 + xi^2)^s, or pointwise weights.
RealImage gram_apply(const RealImage& f, const GramianSpec& spec);
ComplexImage gram_apply(const ComplexImage& f, const GramianSpec& spec);

// Inverse Gramian (Sobolev exponent negated, weights reciprocated).
RealImage gram_apply_inverse(const RealImage& f, const GramianSpec& spec);
ComplexImage gram_apply_inverse(const ComplexImage& f, const GramianSpec& spec);

// f^H G g; conjugate-linear in the first argument.
cplx weighted_inner(const ComplexImage& f, const ComplexImage& g, const GramianSpec& spec);
double weighted_inner(const RealImage& f, const RealImage& g, const GramianSpec& spec);

// Flat-vector Gramian application for a field of known 2D shape.
std::vector<cplx> gram_apply_flat(const std::vector<cplx>& f, std::size_t rows, std::size_t cols,
                                  const GramianSpec& spec, bool inverse);

}  // namespace holoreg

#endif
