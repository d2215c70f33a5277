#include "holoreg/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace holoreg {

namespace {

ComplexVolume to_complex(const RealVolume& v) {
  ComplexVolume out(v.dim0(), v.dim1(), v.dim2());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

double freq_radius(std::size_t i, std::size_t j, std::size_t k, std::size_t n0, std::size_t n1,
                   std::size_t n2) {
  const double f0 = fft_freq(i, n0), f1 = fft_freq(j, n1), f2 = fft_freq(k, n2);
  return std::sqrt(f0 * f0 + f1 * f1 + f2 * f2);
}

}  // namespace

FscCurve fsc(const RealVolume& a, const RealVolume& b, std::size_t n_shells) {
  if (!a.same_shape(b)) throw DataError("fsc: shape mismatch");
  if (n_shells < 4) throw ConfigError("fsc: need at least 4 shells");
  ComplexVolume fa = fft3(to_complex(a));
  ComplexVolume fb = fft3(to_complex(b));

  const double shell_width = 0.5 / static_cast<double>(n_shells);
  std::vector<double> cross(n_shells, 0), ea(n_shells, 0), eb(n_shells, 0);
  std::vector<std::size_t> counts(n_shells, 0);
  const std::size_t n0 = a.dim0(), n1 = a.dim1(), n2 = a.dim2();
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j)
      for (std::size_t k = 0; k < n2; ++k) {
        const double r = freq_radius(i, j, k, n0, n1, n2);
        const auto shell = static_cast<std::size_t>(r / shell_width);
        if (shell >= n_shells) continue;
        const cplx va = fa(i, j, k), vb = fb(i, j, k);
        cross[shell] += (va * std::conj(vb)).real();
        ea[shell] += std::norm(va);
        eb[shell] += std::norm(vb);
        ++counts[shell];
      }

  FscCurve curve;
  for (std::size_t s = 0; s < n_shells; ++s) {
    curve.shell_centers.push_back((static_cast<double>(s) + 0.5) * shell_width);
    curve.shell_counts.push_back(std::max<std::size_t>(counts[s], 1));
    const double denom = std::sqrt(ea[s] * eb[s]);
    const bool zero = denom <= 0;
    curve.zero_energy.push_back(zero ? 1 : 0);
    curve.correlation.push_back(zero ? 0.0 : std::clamp(cross[s] / denom, -1.0, 1.0));
    curve.threshold.push_back(half_bit_threshold(static_cast<double>(curve.shell_counts[s])));
  }
  return curve;
}

double half_bit_threshold(double shell_count) {
  const double inv = 1.0 / std::sqrt(std::max(shell_count, 1.0));
  return (0.2071 + 1.9102 * inv) / (1.2071 + 0.9102 * inv);
}

ResolutionEstimate resolution_from_fsc(const FscCurve& curve, double voxel_size) {
  ResolutionEstimate est;
  for (std::size_t s = 0; s + 1 < curve.correlation.size(); ++s) {
    const double d0 = curve.correlation[s] - curve.threshold[s];
    const double d1 = curve.correlation[s + 1] - curve.threshold[s + 1];
    if (d0 >= 0 && d1 < 0) {
      const double t = d0 / (d0 - d1);
      est.crossing_freq =
          curve.shell_centers[s] + t * (curve.shell_centers[s + 1] - curve.shell_centers[s]);
      est.resolution = 0.5 / est.crossing_freq * voxel_size;
      return est;
    }
  }
  est.nyquist_limited = true;
  est.crossing_freq = 0.5;
  est.resolution = voxel_size;  // half of the Nyquist period
  return est;
}

double sphere_form_factor(double u) {
  if (std::abs(u) < 1e-4) return 1.0 - u * u / 10.0;
  return 3.0 * (std::sin(u) - u * std::cos(u)) / (u * u * u);
}

RealVolume formfactor_deconvolve(const RealVolume& vol, double sphere_diameter,
                                 double smooth_fwhm, double reg) {
  if (!(sphere_diameter > 0)) throw ConfigError("formfactor_deconvolve: diameter must be > 0");
  if (!(reg > 0)) throw ConfigError("formfactor_deconvolve: reg must be > 0");
  const double radius = 0.5 * sphere_diameter;
  const double sigma = smooth_fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  ComplexVolume spec = fft3(to_complex(vol));
  const std::size_t n0 = vol.dim0(), n1 = vol.dim1(), n2 = vol.dim2();
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j)
      for (std::size_t k = 0; k < n2; ++k) {
        const double r = freq_radius(i, j, k, n0, n1, n2);
        const double gauss = std::exp(-2.0 * M_PI * M_PI * sigma * sigma * r * r);
        const double ff = sphere_form_factor(2.0 * M_PI * r * radius);
        spec(i, j, k) *= gauss * ff / (ff * ff + reg);
      }
  ComplexVolume back = ifft3(spec);
  RealVolume out(n0, n1, n2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = back[i].real();
  return out;
}

PeakSet locate_peaks(const RealVolume& vol, double min_separation, double threshold_frac) {
  if (min_separation < 1) throw ConfigError("locate_peaks: min_separation must be >= 1 voxel");
  PeakSet peaks;
  if (vol.empty()) return peaks;
  const double vmax = *std::max_element(vol.storage().begin(), vol.storage().end());
  const double vmin = *std::min_element(vol.storage().begin(), vol.storage().end());
  if (!(vmax > vmin)) return peaks;  // flat volume
  const double threshold = threshold_frac * vmax;

  struct Candidate {
    std::size_t i, j, k;
    double value;
  };
  std::vector<Candidate> candidates;
  const std::size_t n0 = vol.dim0(), n1 = vol.dim1(), n2 = vol.dim2();
  for (std::size_t i = 1; i + 1 < n0; ++i)
    for (std::size_t j = 1; j + 1 < n1; ++j)
      for (std::size_t k = 1; k + 1 < n2; ++k) {
        const double v = vol(i, j, k);
        if (v < threshold) continue;
        bool is_max = true;
        for (int a = -1; a <= 1 && is_max; ++a)
          for (int b = -1; b <= 1 && is_max; ++b)
            for (int c = -1; c <= 1; ++c) {
              if (a == 0 && b == 0 && c == 0) continue;
              if (vol(i + a, j + b, k + c) > v) {
                is_max = false;
                break;
              }
            }
        if (is_max) candidates.push_back({i, j, k, v});
      }

  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.value > b.value; });

  const double min_sep_sq = min_separation * min_separation;
  for (const auto& c : candidates) {
    bool keep = true;
    for (const auto& p : peaks.positions) {
      const double d0 = static_cast<double>(c.i) - p[0];
      const double d1 = static_cast<double>(c.j) - p[1];
      const double d2 = static_cast<double>(c.k) - p[2];
      if (d0 * d0 + d1 * d1 + d2 * d2 < min_sep_sq) {
        keep = false;
        break;
      }
    }
    if (!keep) continue;
    // 3-point quadratic interpolation per axis.
    auto refine = [&](double fm, double f0, double fp) {
      const double denom = fm - 2.0 * f0 + fp;
      if (denom >= 0) return 0.0;
      return std::clamp(0.5 * (fm - fp) / denom, -0.5, 0.5);
    };
    const double di = refine(vol(c.i - 1, c.j, c.k), c.value, vol(c.i + 1, c.j, c.k));
    const double dj = refine(vol(c.i, c.j - 1, c.k), c.value, vol(c.i, c.j + 1, c.k));
    const double dk = refine(vol(c.i, c.j, c.k - 1), c.value, vol(c.i, c.j, c.k + 1));
    peaks.positions.push_back({static_cast<double>(c.i) + di, static_cast<double>(c.j) + dj,
                               static_cast<double>(c.k) + dk});
    peaks.amplitudes.push_back(c.value);
  }
  return peaks;
}

}  // namespace holoreg
