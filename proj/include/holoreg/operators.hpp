#ifndef HOLOREG_OPERATORS_HPP
#define HOLOREG_OPERATORS_HPP

#include <optional>
#include <vector>

#include "holoreg/gridmath.hpp"

namespace holoreg {

// Complex object f = phi - i mu/2.
struct Object2D {
  ComplexImage f;
  double pixel_size = 1.0;  // nm

  Object2D() = default;
  Object2D(std::size_t rows, std::size_t cols) : f(rows, cols) {}
  explicit Object2D(ComplexImage field, double px = 1.0)
      : f(std::move(field)), pixel_size(px) {}

  RealImage phase() const;       // phi = Re(f)
  RealImage absorption() const;  // mu = -2 Im(f)
};

// Complex refractive field v = delta - i beta on a voxel grid.
// Axis 0 is the rotation axis; axis 2 is the optical axis at theta = 0.
struct Volume3D {
  ComplexVolume v;
  double voxel_size = 1.0;  // nm

  Volume3D() = default;
  Volume3D(std::size_t n0, std::size_t n1, std::size_t n2) : v(n0, n1, n2) {}
  explicit Volume3D(ComplexVolume vol, double vx = 1.0)
      : v(std::move(vol)), voxel_size(vx) {}
};

struct HoloData {
  std::vector<RealImage> frames;
  std::vector<double> angles;  // radians, strictly increasing
  ImagingGeometry geom;
  std::optional<double> noise_norm;

  void validate() const;
};

enum class SignConstraint { none, nonnegative, nonpositive };

struct ConstraintSpec {
  std::vector<char> support_mask;            // empty = no support constraint
  std::optional<double> homogeneous_ratio;   // c: f = (1 - i c/2) phi, phi real
  bool real_valued = false;
  SignConstraint sign_re = SignConstraint::none;
  SignConstraint sign_im = SignConstraint::none;

  bool has_subspace() const {
    return !support_mask.empty() || homogeneous_ratio || real_valued;
  }
};

// --- 2D phase contrast -----------------------------------------------------

// Precomputed linearization point: u = exp(-i f), w = D(u). Lets repeated
// derivative/transpose evaluations at the same f skip half the transforms.
struct PcLinearization {
  ComplexImage u, w;
};
PcLinearization pc_linearize(const Object2D& obj, const ImagingGeometry& geom);
RealImage pc_derivative(const PcLinearization& lin, const ComplexImage& h,
                        const ImagingGeometry& geom);
ComplexImage pc_derivative_transpose(const PcLinearization& lin, const RealImage& g,
                                     const ImagingGeometry& geom);

// I = |D(exp(-i f))|^2
RealImage pc_forward(const Object2D& obj, const ImagingGeometry& geom);

// F'[f] h = 2 Im( conj(D(exp(-i f))) D(exp(-i f) h) )
RealImage pc_derivative(const Object2D& obj, const ComplexImage& h, const ImagingGeometry& geom);

// Euclidean transpose of the derivative (no Gramians).
ComplexImage pc_derivative_transpose(const Object2D& obj, const RealImage& g,
                                     const ImagingGeometry& geom);

// Gramian-weighted adjoint G_X^-1 F'[f]^T G_Y.
ComplexImage pc_adjoint(const Object2D& obj, const RealImage& g, const ImagingGeometry& geom,
                        const GramianSpec& gram_X, const GramianSpec& gram_Y);

// Weak-object prediction of I - 1: F^-1( 2 sin(pi xi^2/N_F) F(phi) - cos(pi xi^2/N_F) F(mu) )
RealImage ctf_apply(const RealImage& phi, const RealImage& mu, const ImagingGeometry& geom);

// Tikhonov-regularized direct CTF inversion for a homogeneous object mu = c phi.
RealImage ctf_invert_homogeneous(const RealImage& intensity, double ratio,
                                 const ImagingGeometry& geom, double alpha_ctf);

// --- Radon transform -------------------------------------------------------

// Slice-by-slice parallel-beam projection perpendicular to the rotation axis.
// Output per angle: (dim0 x dim1) path integrals scaled by voxel size.
std::vector<ComplexImage> radon(const Volume3D& vol, const std::vector<double>& angles);

// Exact discrete transpose of radon (identity Gramians), divided by nothing:
// pairing <radon(v), p> = <v, backproject(p)> holds to machine precision.
Volume3D backproject(const std::vector<ComplexImage>& projections,
                     const std::vector<double>& angles, std::size_t n0, std::size_t n1,
                     std::size_t n2, double voxel_size = 1.0);

// --- Phase contrast tomography --------------------------------------------

// I_theta = |D(exp(-i k R(v)(theta)))|^2, with k the projection scale.
HoloData tomo_forward(const Volume3D& vol, const std::vector<double>& angles,
                      const ImagingGeometry& geom, double projection_scale = 1.0);

std::vector<RealImage> tomo_derivative(const Volume3D& vol, const Volume3D& h,
                                       const std::vector<double>& angles,
                                       const ImagingGeometry& geom,
                                       double projection_scale = 1.0);

// Euclidean transpose of tomo_derivative.
Volume3D tomo_adjoint(const Volume3D& vol, const std::vector<RealImage>& g_frames,
                      const std::vector<double>& angles, const ImagingGeometry& geom,
                      double projection_scale = 1.0);

}  // namespace holoreg

#endif
