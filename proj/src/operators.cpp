#include "holoreg/operators.hpp"

#include <cmath>

#include "holoreg/threads.hpp"

namespace holoreg {

RealImage Object2D::phase() const {
  RealImage out(f.rows(), f.cols());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i].real();
  return out;
}

RealImage Object2D::absorption() const {
  RealImage out(f.rows(), f.cols());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = -2.0 * f[i].imag();
  return out;
}

void HoloData::validate() const {
  if (frames.empty()) throw DataError("HoloData: no frames");
  if (angles.size() != frames.size())
    throw DataError("HoloData: angle count does not match frame count");
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (!frames[k].same_shape(frames[0]))
      throw DataError("HoloData: frames differ in shape");
    if (k > 0 && !(angles[k] > angles[k - 1]))
      throw DataError("HoloData: angles must be strictly increasing");
  }
  geom.validate();
}

namespace {

// Propagator as a plain linear map and its conjugate transpose. With padding
// the map is crop o multiplier o replicate-pad, whose transpose is
// pad^T o conjugate-multiplier o zero-embed.
ComplexImage propagate_linear(const ComplexImage& psi, const ImagingGeometry& geom) {
  return fresnel_propagate(psi, geom, Direction::forward);
}

ComplexImage propagate_linear_ct(const ComplexImage& g, const ImagingGeometry& geom) {
  geom.validate();
  if (!geom.padding) return fresnel_propagate(g, geom, Direction::inverse);
  ComplexImage big(2 * g.rows(), 2 * g.cols());
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) big(i, j) = g(i, j);
  ImagingGeometry unpadded = geom;
  unpadded.padding = false;
  big = fresnel_propagate(big, unpadded, Direction::inverse);
  return replicate_pad2_transpose(big, g.rows(), g.cols());
}

ComplexImage transmission(const Object2D& obj) {
  ComplexImage u(obj.f.rows(), obj.f.cols());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::exp(cplx(0, -1) * obj.f[i]);
  return u;
}

}  // namespace

PcLinearization pc_linearize(const Object2D& obj, const ImagingGeometry& geom) {
  PcLinearization lin;
  lin.u = transmission(obj);
  lin.w = propagate_linear(lin.u, geom);
  return lin;
}

RealImage pc_forward(const Object2D& obj, const ImagingGeometry& geom) {
  ComplexImage w = propagate_linear(transmission(obj), geom);
  RealImage intensity(w.rows(), w.cols());
  for (std::size_t i = 0; i < w.size(); ++i) intensity[i] = std::norm(w[i]);
  return intensity;
}

RealImage pc_derivative(const PcLinearization& lin, const ComplexImage& h,
                        const ImagingGeometry& geom) {
  if (!lin.u.same_shape(h)) throw DataError("pc_derivative: shape mismatch");
  ComplexImage uh = lin.u;
  for (std::size_t i = 0; i < uh.size(); ++i) uh[i] *= h[i];
  ComplexImage duh = propagate_linear(uh, geom);
  RealImage out(h.rows(), h.cols());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 2.0 * std::imag(std::conj(lin.w[i]) * duh[i]);
  return out;
}

RealImage pc_derivative(const Object2D& obj, const ComplexImage& h,
                        const ImagingGeometry& geom) {
  return pc_derivative(pc_linearize(obj, geom), h, geom);
}

ComplexImage pc_derivative_transpose(const PcLinearization& lin, const RealImage& g,
                                     const ImagingGeometry& geom) {
  if (g.rows() != lin.u.rows() || g.cols() != lin.u.cols())
    throw DataError("pc_derivative_transpose: shape mismatch");
  ComplexImage gw(g.rows(), g.cols());
  for (std::size_t i = 0; i < gw.size(); ++i) gw[i] = cplx(0, 1) * g[i] * lin.w[i];
  ComplexImage back = propagate_linear_ct(gw, geom);
  ComplexImage out(g.rows(), g.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 2.0 * std::conj(lin.u[i]) * back[i];
  return out;
}

ComplexImage pc_derivative_transpose(const Object2D& obj, const RealImage& g,
                                     const ImagingGeometry& geom) {
  return pc_derivative_transpose(pc_linearize(obj, geom), g, geom);
}

ComplexImage pc_adjoint(const Object2D& obj, const RealImage& g, const ImagingGeometry& geom,
                        const GramianSpec& gram_X, const GramianSpec& gram_Y) {
  RealImage gy = gram_apply(g, gram_Y);
  ComplexImage t = pc_derivative_transpose(obj, gy, geom);
  return gram_apply_inverse(t, gram_X);
}

RealImage ctf_apply(const RealImage& phi, const RealImage& mu, const ImagingGeometry& geom) {
  geom.validate();
  if (!phi.same_shape(mu)) throw DataError("ctf_apply: shape mismatch");
  ComplexImage cphi(phi.rows(), phi.cols()), cmu(mu.rows(), mu.cols());
  for (std::size_t i = 0; i < phi.size(); ++i) {
    cphi[i] = phi[i];
    cmu[i] = mu[i];
  }
  ComplexImage sp = fft2(cphi);
  ComplexImage sm = fft2(cmu);
  FrequencyGrid grid(phi.rows(), phi.cols());
  for (std::size_t i = 0; i < phi.rows(); ++i)
    for (std::size_t j = 0; j < phi.cols(); ++j) {
      const double theta = M_PI * grid.xi_sq(i, j) / geom.fresnel_number;
      sp(i, j) = 2.0 * std::sin(theta) * sp(i, j) - std::cos(theta) * sm(i, j);
    }
  ComplexImage out = ifft2(sp);
  RealImage res(phi.rows(), phi.cols());
  for (std::size_t i = 0; i < res.size(); ++i) res[i] = out[i].real();
  return res;
}

RealImage ctf_invert_homogeneous(const RealImage& intensity, double ratio,
                                 const ImagingGeometry& geom, double alpha_ctf) {
  geom.validate();
  if (!(alpha_ctf > 0)) throw ConfigError("ctf_invert_homogeneous: alpha_ctf must be > 0");
  if (ratio < 0) throw ConfigError("ctf_invert_homogeneous: ratio must be >= 0");
  ComplexImage contrast(intensity.rows(), intensity.cols());
  for (std::size_t i = 0; i < intensity.size(); ++i) contrast[i] = intensity[i] - 1.0;
  ComplexImage spec = fft2(contrast);
  FrequencyGrid grid(intensity.rows(), intensity.cols());
  for (std::size_t i = 0; i < intensity.rows(); ++i)
    for (std::size_t j = 0; j < intensity.cols(); ++j) {
      const double theta = M_PI * grid.xi_sq(i, j) / geom.fresnel_number;
      const double m = 2.0 * std::sin(theta) - ratio * std::cos(theta);
      spec(i, j) *= m / (m * m + alpha_ctf);
    }
  ComplexImage out = ifft2(spec);
  RealImage phi(intensity.rows(), intensity.cols());
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = out[i].real();
  return phi;
}

// --- Radon -------------------------------------------------------------------

std::vector<ComplexImage> radon(const Volume3D& vol, const std::vector<double>& angles) {
  if (angles.empty()) throw DataError("radon: empty angle list");
  if (vol.v.empty()) throw DataError("radon: empty volume");
  const std::size_t n0 = vol.v.dim0(), n1 = vol.v.dim1(), n2 = vol.v.dim2();
  const double c1 = 0.5 * (static_cast<double>(n1) - 1.0);
  const double c2 = 0.5 * (static_cast<double>(n2) - 1.0);
  std::vector<ComplexImage> projections(angles.size());
  for (std::size_t a = 0; a < angles.size(); ++a) {
    const double ct = std::cos(angles[a]), st = std::sin(angles[a]);
    ComplexImage& proj = projections[a];
    proj = ComplexImage(n0, n1);
    parallel_for(n0, [&](std::size_t x) {
      for (std::size_t y = 0; y < n1; ++y) {
        const double sy = (static_cast<double>(y) - c1) * ct + c1;
        for (std::size_t z = 0; z < n2; ++z) {
          const double s = sy + (static_cast<double>(z) - c2) * st;
          const double fl = std::floor(s);
          const auto i0 = static_cast<std::ptrdiff_t>(fl);
          const double wgt = s - fl;
          const cplx val = vol.v(x, y, z) * vol.voxel_size;
          if (i0 >= 0 && i0 < static_cast<std::ptrdiff_t>(n1))
            proj(x, static_cast<std::size_t>(i0)) += (1.0 - wgt) * val;
          if (i0 + 1 >= 0 && i0 + 1 < static_cast<std::ptrdiff_t>(n1))
            proj(x, static_cast<std::size_t>(i0 + 1)) += wgt * val;
        }
      }
    });
  }
  return projections;
}

Volume3D backproject(const std::vector<ComplexImage>& projections,
                     const std::vector<double>& angles, std::size_t n0, std::size_t n1,
                     std::size_t n2, double voxel_size) {
  if (projections.size() != angles.size())
    throw DataError("backproject: projection/angle count mismatch");
  for (const auto& p : projections)
    if (p.rows() != n0 || p.cols() != n1)
      throw DataError("backproject: projection shape inconsistent with volume shape");
  Volume3D vol(n0, n1, n2);
  vol.voxel_size = voxel_size;
  const double c1 = 0.5 * (static_cast<double>(n1) - 1.0);
  const double c2 = 0.5 * (static_cast<double>(n2) - 1.0);
  for (std::size_t a = 0; a < angles.size(); ++a) {
    const double ct = std::cos(angles[a]), st = std::sin(angles[a]);
    const ComplexImage& proj = projections[a];
    parallel_for(n0, [&](std::size_t x) {
      for (std::size_t y = 0; y < n1; ++y) {
        const double sy = (static_cast<double>(y) - c1) * ct + c1;
        for (std::size_t z = 0; z < n2; ++z) {
          const double s = sy + (static_cast<double>(z) - c2) * st;
          const double fl = std::floor(s);
          const auto i0 = static_cast<std::ptrdiff_t>(fl);
          const double wgt = s - fl;
          cplx acc = 0;
          if (i0 >= 0 && i0 < static_cast<std::ptrdiff_t>(n1))
            acc += (1.0 - wgt) * proj(x, static_cast<std::size_t>(i0));
          if (i0 + 1 >= 0 && i0 + 1 < static_cast<std::ptrdiff_t>(n1))
            acc += wgt * proj(x, static_cast<std::size_t>(i0 + 1));
          vol.v(x, y, z) += acc * voxel_size;
        }
      }
    });
  }
  return vol;
}

// --- Tomography ----------------------------------------------------------------

HoloData tomo_forward(const Volume3D& vol, const std::vector<double>& angles,
                      const ImagingGeometry& geom, double projection_scale) {
  std::vector<ComplexImage> projs = radon(vol, angles);
  HoloData data;
  data.angles = angles;
  data.geom = geom;
  data.frames.resize(angles.size());
  for (std::size_t a = 0; a < angles.size(); ++a) {
    ComplexImage f = projs[a];
    for (std::size_t i = 0; i < f.size(); ++i) f[i] *= projection_scale;
    data.frames[a] = pc_forward(Object2D(std::move(f)), geom);
  }
  return data;
}

std::vector<RealImage> tomo_derivative(const Volume3D& vol, const Volume3D& h,
                                       const std::vector<double>& angles,
                                       const ImagingGeometry& geom, double projection_scale) {
  if (!vol.v.same_shape(h.v)) throw DataError("tomo_derivative: shape mismatch");
  std::vector<ComplexImage> projs = radon(vol, angles);
  std::vector<ComplexImage> hprojs = radon(Volume3D(h.v, vol.voxel_size), angles);
  std::vector<RealImage> frames(angles.size());
  for (std::size_t a = 0; a < angles.size(); ++a) {
    ComplexImage f = projs[a], hp = hprojs[a];
    for (std::size_t i = 0; i < f.size(); ++i) {
      f[i] *= projection_scale;
      hp[i] *= projection_scale;
    }
    frames[a] = pc_derivative(Object2D(std::move(f)), hp, geom);
  }
  return frames;
}

Volume3D tomo_adjoint(const Volume3D& vol, const std::vector<RealImage>& g_frames,
                      const std::vector<double>& angles, const ImagingGeometry& geom,
                      double projection_scale) {
  if (g_frames.size() != angles.size())
    throw DataError("tomo_adjoint: frame/angle count mismatch");
  std::vector<ComplexImage> projs = radon(vol, angles);
  std::vector<ComplexImage> backframes(angles.size());
  for (std::size_t a = 0; a < angles.size(); ++a) {
    ComplexImage f = projs[a];
    for (std::size_t i = 0; i < f.size(); ++i) f[i] *= projection_scale;
    ComplexImage t = pc_derivative_transpose(Object2D(std::move(f)), g_frames[a], geom);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] *= projection_scale;
    backframes[a] = std::move(t);
  }
  return backproject(backframes, angles, vol.v.dim0(), vol.v.dim1(), vol.v.dim2(),
                     vol.voxel_size);
}

}  // namespace holoreg
