#ifndef HOLOREG_KACZMARZ_HPP
#define HOLOREG_KACZMARZ_HPP

#include <cstdint>

#include "holoreg/solver.hpp"

namespace holoreg {

enum class WedgeOrder { sequential, random };

struct WedgeSchedule {
  int wedge_size = 6;
  int passes = 2;
  WedgeOrder order = WedgeOrder::sequential;
  std::uint64_t seed = 0;
  // Frame-index groups in processing order; each frame index appears
  // exactly `passes` times, wedges group adjacent angles.
  std::vector<std::vector<int>> groups;
};

WedgeSchedule build_schedule(int n_frames, int wedge_size, int passes, WedgeOrder order,
                             std::uint64_t seed = 0);

struct KaczmarzConfig {
  double alpha0 = 0;          // <= 0: estimated from the first wedge, then frozen
  double beta = 0.001;        // weight toward f0 versus f_k
  double gamma = -1;          // < 0: defaults to alpha0
  double cg_tol = 1e-3;
  int cg_max = 50;
  GramianSpec gram_X;         // identity keeps the per-step cost linear
  FidelitySpec fidelity;
  ConstraintSpec constraints;

  void validate() const;
};

// One regularized Newton-Kaczmarz step on the subproblem operator op_j.
std::vector<cplx> kaczmarz_step(const ImagingOperator& op_j, const std::vector<cplx>& f_k,
                                const std::vector<cplx>& f_0,
                                const std::vector<double>& I_obs_j, double alpha, double gamma,
                                const KaczmarzConfig& config, int* cg_count = nullptr);

// Sweeps kaczmarz_step over the schedule's wedges of the tomographic data.
// make_wedge_op builds the subproblem operator for one frame-index group.
ReconResult kaczmarz_reconstruct(std::size_t n0, std::size_t n1, std::size_t n2,
                                 const HoloData& data, const WedgeSchedule& schedule,
                                 const KaczmarzConfig& config, double projection_scale = 1.0,
                                 std::vector<cplx> f0 = {});

}  // namespace holoreg

#endif
