#include "holoreg/kaczmarz.hpp"

#include <algorithm>
#include <cmath>

#include "holoreg/rng.hpp"

namespace holoreg {

namespace {

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.next_u64() % i]);
}

}  // namespace

WedgeSchedule build_schedule(int n_frames, int wedge_size, int passes, WedgeOrder order,
                             std::uint64_t seed) {
  if (wedge_size < 1 || n_frames < wedge_size)
    throw ConfigError("build_schedule: need n_frames >= wedge_size >= 1");
  if (passes < 1) throw ConfigError("build_schedule: passes must be >= 1");

  WedgeSchedule schedule;
  schedule.wedge_size = wedge_size;
  schedule.passes = passes;
  schedule.order = order;
  schedule.seed = seed;

  std::vector<std::vector<int>> wedges;
  for (int start = 0; start < n_frames; start += wedge_size) {
    std::vector<int> group;
    for (int i = start; i < std::min(start + wedge_size, n_frames); ++i) group.push_back(i);
    wedges.push_back(std::move(group));
  }

  Rng rng(seed ^ 0xda3e39cb94b95bdbULL);
  for (int pass = 0; pass < passes; ++pass) {
    std::vector<int> perm(wedges.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    if (order == WedgeOrder::random) shuffle_indices(perm, rng);
    for (int w : perm) schedule.groups.push_back(wedges[static_cast<std::size_t>(w)]);
  }
  return schedule;
}

void KaczmarzConfig::validate() const {
  if (beta < 0 || beta > 1) throw ConfigError("KaczmarzConfig: beta must lie in [0, 1]");
  if (!(cg_tol > 0) || cg_max < 1) throw ConfigError("KaczmarzConfig: invalid CG controls");
  gram_X.validate();
  if (fidelity.kind == FidelityKind::poisson_quadratic && !(fidelity.I0 > 0))
    throw ConfigError("KaczmarzConfig: Poisson fidelity requires I0 > 0");
}

std::vector<cplx> kaczmarz_step(const ImagingOperator& op_j, const std::vector<cplx>& f_k,
                                const std::vector<cplx>& f_0,
                                const std::vector<double>& I_obs_j, double alpha, double gamma,
                                const KaczmarzConfig& config, int* cg_count) {
  config.validate();
  SolverConfig step_config;
  step_config.cg_tol = config.cg_tol;
  step_config.cg_max = config.cg_max;
  step_config.gram_X = config.gram_X;
  step_config.fidelity = config.fidelity;
  step_config.constraints = config.constraints;
  return newton_step_cg(op_j, f_k, f_0, I_obs_j, alpha, step_config, cg_count, gamma,
                        config.beta);
}

ReconResult kaczmarz_reconstruct(std::size_t n0, std::size_t n1, std::size_t n2,
                                 const HoloData& data, const WedgeSchedule& schedule,
                                 const KaczmarzConfig& config, double projection_scale,
                                 std::vector<cplx> f0) {
  config.validate();
  data.validate();

  // The schedule must cover every frame exactly `passes` times.
  std::vector<int> visits(data.frames.size(), 0);
  for (const auto& group : schedule.groups)
    for (int idx : group) {
      if (idx < 0 || idx >= static_cast<int>(data.frames.size()))
        throw ConfigError("kaczmarz_reconstruct: schedule frame index out of range");
      ++visits[static_cast<std::size_t>(idx)];
    }
  for (int v : visits)
    if (v != schedule.passes)
      throw ConfigError("kaczmarz_reconstruct: schedule does not cover all frames");

  const std::size_t n = n0 * n1 * n2;
  if (f0.empty()) f0.assign(n, cplx{});
  if (f0.size() != n) throw DataError("kaczmarz_reconstruct: initial guess size mismatch");
  if (config.constraints.has_subspace())
    f0 = apply_subspace_constraint(std::move(f0), config.constraints);

  auto wedge_op = [&](const std::vector<int>& group) {
    return TomoOperator(n0, n1, n2, data.angles, data.geom, projection_scale, group);
  };

  double alpha = config.alpha0;
  if (!(alpha > 0)) {
    SolverConfig est_config;
    est_config.gram_X = config.gram_X;
    est_config.fidelity = config.fidelity;
    TomoOperator first = wedge_op(schedule.groups.front());
    alpha = estimate_alpha0(first, f0, first.select_frames(data.frames), est_config);
  }
  const double gamma = config.gamma < 0 ? alpha : config.gamma;

  ReconResult result;
  std::vector<cplx> f = f0;
  bool first_step = true;
  for (const auto& group : schedule.groups) {
    TomoOperator op_j = wedge_op(group);
    const std::vector<double> I_j = op_j.select_frames(data.frames);
    if (first_step) {
      result.residual_history.push_back(
          fidelity_residual(op_j.forward(f), I_j, config.fidelity).first);
      first_step = false;
    }
    int cg = 0;
    f = kaczmarz_step(op_j, f, f0, I_j, alpha, gamma, config, &cg);
    result.residual_history.push_back(
        fidelity_residual(op_j.forward(f), I_j, config.fidelity).first);
    result.alpha_history.push_back(alpha);
    result.gamma_history.push_back(gamma);
    result.cg_counts.push_back(cg);
    ++result.newton_count;
  }
  result.final = std::move(f);
  result.stop_reason = StopReason::max_iter;
  return result;
}

}  // namespace holoreg
