#ifndef HOLOREG_PHANTOM_HPP
#define HOLOREG_PHANTOM_HPP

#include <array>
#include <cstdint>
#include <random>
#include <variant>

#include "holoreg/operators.hpp"

namespace holoreg {

struct DiscElement {
  double center_row = 0, center_col = 0, radius = 0;
  double phi = 0, mu = 0;
};

struct RectElement {
  double row0 = 0, col0 = 0, row1 = 0, col1 = 0;  // half-open box
  double phi = 0, mu = 0;
};

// Bitmap stamped at (center_row, center_col), scaled by `scale` pixels per
// bitmap cell; set cells contribute (phi, mu).
struct GlyphElement {
  Image<std::uint8_t> bitmap;
  double center_row = 0, center_col = 0, scale = 1;
  double phi = 0, mu = 0;
};

using PhantomElement = std::variant<DiscElement, RectElement, GlyphElement>;

struct PhantomSpec2D {
  std::size_t rows = 0, cols = 0;
  std::vector<PhantomElement> elements;  // composited by addition
};

// Piecewise-constant object with area-fraction anti-aliasing on boundaries.
Object2D render_phantom2d(const PhantomSpec2D& spec);

// Coverage mask (area fraction in [0,1]) of a single element.
RealImage element_coverage(const PhantomElement& element, std::size_t rows, std::size_t cols);

// Built-in multi-hole test glyph (stands in for the nano-structured pattern).
Image<std::uint8_t> builtin_glyph();

struct SpherePacking {
  std::vector<std::array<double, 3>> centers;  // voxel units
  double radius = 0;
  double delta_value = 0;
};

// Hexagonal close-packing of touching spheres inside the given box.
SpherePacking hcp_packing(std::size_t n0, std::size_t n1, std::size_t n2, double radius,
                          double delta_value);

// Random non-overlapping packing (rejection sampling), deterministic in seed.
SpherePacking random_packing(std::size_t count, std::size_t n0, std::size_t n1, std::size_t n2,
                             double radius, double delta_value, double min_gap,
                             std::uint64_t seed, double margin = 2.0);

// Real delta volume (beta = 0) with boundary anti-aliasing.
Volume3D render_packing(const SpherePacking& packing, std::size_t n0, std::size_t n1,
                        std::size_t n2);

enum class NoiseKind { gaussian, poisson };

struct NoiseModel {
  NoiseKind kind = NoiseKind::gaussian;
  double sigma = 0;       // gaussian standard deviation
  double peak_flux = 0;   // poisson expected counts at I = 1
  std::uint64_t seed = 0;
};

struct NoisyData {
  std::vector<RealImage> frames;
  double noise_norm = 0;  // realized ||epsilon||_2
};

NoisyData add_noise(const std::vector<RealImage>& frames, const NoiseModel& model);
NoisyData add_noise(const RealImage& frame, const NoiseModel& model);

}  // namespace holoreg

#endif
