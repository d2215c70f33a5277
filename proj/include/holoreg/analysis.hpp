#ifndef HOLOREG_ANALYSIS_HPP
#define HOLOREG_ANALYSIS_HPP

#include <array>

#include "holoreg/gridmath.hpp"

namespace holoreg {

struct FscCurve {
  std::vector<double> shell_centers;  // cycles per voxel
  std::vector<double> correlation;    // in [-1, 1]
  std::vector<std::size_t> shell_counts;
  std::vector<double> threshold;      // 1/2-bit value per shell
  std::vector<char> zero_energy;      // flagged shells reported as 0
};

struct ResolutionEstimate {
  double resolution = 0;          // half-period, voxel units x voxel size
  double crossing_freq = 0;       // cycles per voxel
  bool nyquist_limited = false;   // no crossing found
};

struct PeakSet {
  std::vector<std::array<double, 3>> positions;  // sub-voxel coordinates
  std::vector<double> amplitudes;
  std::size_t count() const { return positions.size(); }
};

// Shell-wise normalized cross-correlation Re(sum Fa conj(Fb)) / sqrt(...).
FscCurve fsc(const RealVolume& a, const RealVolume& b, std::size_t n_shells);

// T(n) = (0.2071 + 1.9102/sqrt(n)) / (1.2071 + 0.9102/sqrt(n))
double half_bit_threshold(double shell_count);

// First downward crossing of the threshold, linearly interpolated.
ResolutionEstimate resolution_from_fsc(const FscCurve& curve, double voxel_size = 1.0);

// Fourier amplitude of a homogeneous unit sphere, u = q R: 3 (sin u - u cos u) / u^3.
double sphere_form_factor(double u);

// Gaussian smoothing followed by Tikhonov-regularized division by the sphere
// form factor; peaks of the result sit at sphere centers.
RealVolume formfactor_deconvolve(const RealVolume& vol, double sphere_diameter,
                                 double smooth_fwhm, double reg);

// Local maxima above threshold_frac * global max, quadratic sub-voxel
// refinement, greedy non-maximum suppression by min_separation.
PeakSet locate_peaks(const RealVolume& vol, double min_separation, double threshold_frac);

}  // namespace holoreg

#endif
