#include "holoreg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace holoreg {

std::vector<cplx> ImagingOperator::domain_gram(const std::vector<cplx>& v,
                                               const GramianSpec& spec, bool inverse) const {
  switch (spec.kind) {
    case GramianSpec::Kind::identity:
      return v;
    case GramianSpec::Kind::weighted: {
      if (spec.weights.size() != v.size())
        throw DataError("domain_gram: weight size mismatch");
      std::vector<cplx> out = v;
      for (std::size_t i = 0; i < v.size(); ++i)
        out[i] *= inverse ? 1.0 / spec.weights[i] : spec.weights[i];
      return out;
    }
    case GramianSpec::Kind::sobolev:
      throw ConfigError("domain_gram: Sobolev Gramian needs a grid-structured domain");
  }
  throw ConfigError("domain_gram: unknown Gramian kind");
}

// --- PhaseContrastOperator ----------------------------------------------------

PhaseContrastOperator::PhaseContrastOperator(std::size_t rows, std::size_t cols,
                                             ImagingGeometry geom)
    : rows_(rows), cols_(cols), geom_(geom) {
  geom_.validate();
}

namespace {

ComplexImage to_image(const std::vector<cplx>& v, std::size_t rows, std::size_t cols) {
  ComplexImage img(rows, cols);
  img.storage() = v;
  return img;
}

RealImage to_real_image(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  RealImage img(rows, cols);
  img.storage() = v;
  return img;
}

}  // namespace

std::vector<double> PhaseContrastOperator::forward(const std::vector<cplx>& f) const {
  return pc_forward(Object2D(to_image(f, rows_, cols_)), geom_).storage();
}

const PcLinearization& PhaseContrastOperator::linearization(const std::vector<cplx>& f) const {
  if (f != lin_point_) {
    lin_ = pc_linearize(Object2D(to_image(f, rows_, cols_)), geom_);
    lin_point_ = f;
  }
  return lin_;
}

std::vector<double> PhaseContrastOperator::derivative(const std::vector<cplx>& f,
                                                      const std::vector<cplx>& h) const {
  return pc_derivative(linearization(f), to_image(h, rows_, cols_), geom_).storage();
}

std::vector<cplx> PhaseContrastOperator::derivative_transpose(
    const std::vector<cplx>& f, const std::vector<double>& g) const {
  return pc_derivative_transpose(linearization(f), to_real_image(g, rows_, cols_), geom_)
      .storage();
}

std::vector<cplx> PhaseContrastOperator::domain_gram(const std::vector<cplx>& v,
                                                     const GramianSpec& spec,
                                                     bool inverse) const {
  return gram_apply_flat(v, rows_, cols_, spec, inverse);
}

// --- TomoOperator ---------------------------------------------------------------

TomoOperator::TomoOperator(std::size_t n0, std::size_t n1, std::size_t n2,
                           std::vector<double> angles, ImagingGeometry geom,
                           double projection_scale, std::vector<int> frame_subset)
    : n0_(n0), n1_(n1), n2_(n2), angles_(std::move(angles)), geom_(geom),
      scale_(projection_scale), active_(std::move(frame_subset)) {
  geom_.validate();
  if (active_.empty()) {
    active_.resize(angles_.size());
    std::iota(active_.begin(), active_.end(), 0);
  }
  for (int idx : active_)
    if (idx < 0 || idx >= static_cast<int>(angles_.size()))
      throw DataError("TomoOperator: frame index out of range");
}

std::vector<double> TomoOperator::active_angles() const {
  std::vector<double> out;
  out.reserve(active_.size());
  for (int idx : active_) out.push_back(angles_[static_cast<std::size_t>(idx)]);
  return out;
}

std::vector<double> TomoOperator::forward(const std::vector<cplx>& f) const {
  Volume3D vol(ComplexVolume(n0_, n1_, n2_));
  vol.v.storage() = f;
  HoloData data = tomo_forward(vol, active_angles(), geom_, scale_);
  std::vector<double> out;
  out.reserve(range_size());
  for (const auto& frame : data.frames)
    out.insert(out.end(), frame.storage().begin(), frame.storage().end());
  return out;
}

const std::vector<PcLinearization>& TomoOperator::linearizations(
    const std::vector<cplx>& f) const {
  if (f != lin_point_) {
    Volume3D vol(ComplexVolume(n0_, n1_, n2_));
    vol.v.storage() = f;
    std::vector<ComplexImage> projs = radon(vol, active_angles());
    lin_frames_.clear();
    lin_frames_.reserve(projs.size());
    for (auto& p : projs) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] *= scale_;
      lin_frames_.push_back(pc_linearize(Object2D(std::move(p)), geom_));
    }
    lin_point_ = f;
  }
  return lin_frames_;
}

std::vector<double> TomoOperator::derivative(const std::vector<cplx>& f,
                                             const std::vector<cplx>& h) const {
  const std::vector<PcLinearization>& lins = linearizations(f);
  Volume3D hv(ComplexVolume(n0_, n1_, n2_));
  hv.v.storage() = h;
  std::vector<ComplexImage> hprojs = radon(hv, active_angles());
  std::vector<double> out;
  out.reserve(range_size());
  for (std::size_t a = 0; a < lins.size(); ++a) {
    for (std::size_t i = 0; i < hprojs[a].size(); ++i) hprojs[a][i] *= scale_;
    RealImage frame = pc_derivative(lins[a], hprojs[a], geom_);
    out.insert(out.end(), frame.storage().begin(), frame.storage().end());
  }
  return out;
}

std::vector<cplx> TomoOperator::derivative_transpose(const std::vector<cplx>& f,
                                                     const std::vector<double>& g) const {
  if (g.size() != range_size()) throw DataError("TomoOperator: range size mismatch");
  const std::vector<PcLinearization>& lins = linearizations(f);
  const std::size_t frame_px = n0_ * n1_;
  std::vector<ComplexImage> backframes(active_.size());
  for (std::size_t a = 0; a < active_.size(); ++a) {
    RealImage img(n0_, n1_);
    std::copy(g.begin() + static_cast<std::ptrdiff_t>(a * frame_px),
              g.begin() + static_cast<std::ptrdiff_t>((a + 1) * frame_px),
              img.storage().begin());
    ComplexImage t = pc_derivative_transpose(lins[a], img, geom_);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] *= scale_;
    backframes[a] = std::move(t);
  }
  return backproject(backframes, active_angles(), n0_, n1_, n2_, 1.0).v.storage();
}

std::vector<double> TomoOperator::select_frames(const std::vector<RealImage>& frames) const {
  std::vector<double> out;
  out.reserve(range_size());
  for (int idx : active_) {
    const auto& f = frames[static_cast<std::size_t>(idx)];
    out.insert(out.end(), f.storage().begin(), f.storage().end());
  }
  return out;
}

// --- Fidelity -------------------------------------------------------------------

void SolverConfig::validate() const {
  if (!(alpha_reduction > 0 && alpha_reduction < 1))
    throw ConfigError("SolverConfig: alpha_reduction must lie in (0, 1)");
  if (tau < 1) throw ConfigError("SolverConfig: tau must be >= 1");
  if (max_newton < 1) throw ConfigError("SolverConfig: max_newton must be >= 1");
  if (!(cg_tol > 0) || cg_max < 1) throw ConfigError("SolverConfig: invalid CG controls");
  if (gamma < 0) throw ConfigError("SolverConfig: gamma must be >= 0");
  if (fidelity.kind == FidelityKind::poisson_quadratic && !(fidelity.I0 > 0))
    throw ConfigError("SolverConfig: Poisson fidelity requires I0 > 0");
  gram_X.validate();
}

std::vector<double> fidelity_weights(const std::vector<double>& I_obs,
                                     const FidelitySpec& fidelity) {
  std::vector<double> w(I_obs.size(), 1.0);
  if (fidelity.kind == FidelityKind::poisson_quadratic) {
    if (!(fidelity.I0 > 0)) throw ConfigError("fidelity_weights: I0 must be positive");
    for (std::size_t i = 0; i < I_obs.size(); ++i) {
      if (I_obs[i] < 0)
        throw DataError("fidelity_weights: Poisson fidelity requires nonnegative data");
      w[i] = 1.0 / std::max(fidelity.I0, I_obs[i]);
    }
  }
  return w;
}

std::pair<double, std::vector<double>> fidelity_residual(const std::vector<double>& I_model,
                                                         const std::vector<double>& I_obs,
                                                         const FidelitySpec& fidelity) {
  if (I_model.size() != I_obs.size()) throw DataError("fidelity_residual: shape mismatch");
  std::vector<double> w = fidelity_weights(I_obs, fidelity);
  std::vector<double> weighted(I_obs.size());
  double sq = 0;
  for (std::size_t i = 0; i < I_obs.size(); ++i) {
    const double d = I_model[i] - I_obs[i];
    sq += w[i] * d * d;
    weighted[i] = w[i] * d;
  }
  return {std::sqrt(sq), std::move(weighted)};
}

// --- Constraints ------------------------------------------------------------------

std::vector<cplx> apply_subspace_constraint(std::vector<cplx> h, const ConstraintSpec& c) {
  if (!c.support_mask.empty()) {
    if (c.support_mask.size() != h.size())
      throw DataError("apply_subspace_constraint: mask shape mismatch");
    for (std::size_t i = 0; i < h.size(); ++i)
      if (!c.support_mask[i]) h[i] = 0;
  }
  if (c.homogeneous_ratio) {
    const double ratio = *c.homogeneous_ratio;
    if (!(ratio >= 0))
      throw ConfigError("apply_subspace_constraint: homogeneous ratio must be >= 0");
    const cplx dir(1.0, -0.5 * ratio);
    const double nsq = std::norm(dir);
    for (cplx& x : h) x = (std::conj(dir) * x).real() / nsq * dir;
  } else if (c.real_valued) {
    for (cplx& x : h) x = x.real();
  }
  return h;
}

std::vector<cplx> apply_sign_projection(std::vector<cplx> h, const ConstraintSpec& c) {
  auto clip = [](SignConstraint sign, double x) {
    if (sign == SignConstraint::nonnegative) return std::max(0.0, x);
    if (sign == SignConstraint::nonpositive) return std::min(0.0, x);
    return x;
  };
  if (c.sign_re != SignConstraint::none || c.sign_im != SignConstraint::none)
    for (cplx& x : h) x = cplx(clip(c.sign_re, x.real()), clip(c.sign_im, x.imag()));
  return h;
}

PenaltyTerm positivity_penalty(const std::vector<cplx>& f_k, const ConstraintSpec& c,
                               double gamma_re, double gamma_im) {
  if (gamma_re < 0) throw ConfigError("positivity_penalty: gamma must be >= 0");
  if (gamma_im < 0) gamma_im = gamma_re;
  PenaltyTerm term;
  const std::size_t n = f_k.size();
  term.mask_re.assign(n, 0.0);
  term.mask_im.assign(n, 0.0);
  term.rhs.assign(n, cplx{});
  auto accumulate = [&](SignConstraint sign, double gamma, auto get, std::vector<double>& mask,
                        bool imag_part) {
    if (sign == SignConstraint::none || gamma == 0) return;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = get(f_k[i]);
      const double viol = sign == SignConstraint::nonnegative ? std::min(0.0, x)
                                                              : std::max(0.0, x);
      if (viol != 0.0) {
        mask[i] = gamma;
        const double r = -gamma * viol;
        term.rhs[i] += imag_part ? cplx(0, r) : cplx(r, 0);
        term.diagnostic += gamma * viol * viol;
      }
    }
  };
  accumulate(c.sign_re, gamma_re, [](const cplx& z) { return z.real(); }, term.mask_re, false);
  accumulate(c.sign_im, gamma_im, [](const cplx& z) { return z.imag(); }, term.mask_im, true);
  return term;
}

// --- Newton step via CG --------------------------------------------------------------

namespace {

void axpy(std::vector<cplx>& y, double a, const std::vector<cplx>& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace

std::vector<cplx> newton_step_cg(const ImagingOperator& op, const std::vector<cplx>& f_k,
                                 const std::vector<cplx>& f_0, const std::vector<double>& I_obs,
                                 double alpha_k, const SolverConfig& config, int* cg_count,
                                 double gamma, double beta) {
  if (!(alpha_k > 0)) throw ConfigError("newton_step_cg: alpha must be > 0");
  const ConstraintSpec& cons = config.constraints;
  const bool constrained = cons.has_subspace();
  auto project = [&](std::vector<cplx> v) {
    return constrained ? apply_subspace_constraint(std::move(v), cons) : std::move(v);
  };

  const std::vector<double> w = fidelity_weights(I_obs, config.fidelity);
  std::vector<double> Fk = op.forward(f_k);
  std::vector<double> r(I_obs.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = w[i] * (I_obs[i] - Fk[i]);

  // gamma_im follows any endgame escalation of gamma proportionally.
  double gamma_im = config.gamma_im;
  if (gamma_im > 0 && config.gamma > 0) gamma_im *= gamma / config.gamma;
  PenaltyTerm pen = positivity_penalty(f_k, cons, gamma, gamma_im);

  // rhs = P[ A^T W (I_obs - F(f_k)) + alpha beta G_X (f0 - f_k) + penalty ]
  std::vector<cplx> rhs = op.derivative_transpose(f_k, r);
  std::vector<cplx> pull(f_k.size());
  for (std::size_t i = 0; i < pull.size(); ++i) pull[i] = f_0[i] - f_k[i];
  pull = op.domain_gram(pull, config.gram_X, false);
  axpy(rhs, alpha_k * beta, pull);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += pen.rhs[i];
  rhs = project(std::move(rhs));

  auto normal_op = [&](const std::vector<cplx>& d) {
    std::vector<cplx> pd = project(d);
    std::vector<double> ad = op.derivative(f_k, pd);
    for (std::size_t i = 0; i < ad.size(); ++i) ad[i] *= w[i];
    std::vector<cplx> out = op.derivative_transpose(f_k, ad);
    std::vector<cplx> gx = op.domain_gram(pd, config.gram_X, false);
    axpy(out, alpha_k, gx);
    if (gamma > 0 || gamma_im > 0)
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += cplx(pen.mask_re[i] * pd[i].real(), pen.mask_im[i] * pd[i].imag());
    return project(std::move(out));
  };

  // CG on the Euclidean-symmetric normal equations.
  std::vector<cplx> delta(f_k.size(), cplx{});
  std::vector<cplx> resid = rhs;
  std::vector<cplx> p = resid;
  double rs = dot_re(resid, resid);
  const double rs0 = rs;
  int iters = 0;
  const double tol_sq = config.cg_tol * config.cg_tol * rs0;
  while (rs > tol_sq && rs > 0 && iters < config.cg_max) {
    std::vector<cplx> np = normal_op(p);
    const double curvature = dot_re(p, np);
    if (curvature <= 0)
      throw NumericalError("newton_step_cg: non-positive CG curvature (adjoint mismatch?)");
    const double step = rs / curvature;
    axpy(delta, step, p);
    axpy(resid, -step, np);
    const double rs_new = dot_re(resid, resid);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = resid[i] + (rs_new / rs) * p[i];
    rs = rs_new;
    ++iters;
  }
  if (cg_count) *cg_count = iters;

  std::vector<cplx> f_next = f_k;
  for (std::size_t i = 0; i < f_next.size(); ++i) f_next[i] += delta[i];
  return f_next;
}

// --- alpha_0 estimate ------------------------------------------------------------------

double estimate_alpha0(const ImagingOperator& op, const std::vector<cplx>& f0,
                       const std::vector<double>& I_obs, const SolverConfig& config) {
  const std::vector<double> w = fidelity_weights(I_obs, config.fidelity);
  std::vector<double> wI(I_obs.size());
  for (std::size_t i = 0; i < wI.size(); ++i) wI[i] = w[i] * I_obs[i];
  std::vector<cplx> t = op.derivative_transpose(f0, wI);
  t = op.domain_gram(t, config.gram_X, true);
  std::vector<cplx> gt = op.domain_gram(t, config.gram_X, false);
  const double x_sq = dot_re(t, gt);
  if (!(x_sq > 0))
    throw DataError("estimate_alpha0: degenerate data (zero adjoint image); set alpha0 explicitly");
  std::vector<double> y = op.derivative(f0, t);
  double y_sq = 0;
  for (std::size_t i = 0; i < y.size(); ++i) y_sq += w[i] * y[i] * y[i];
  const double alpha = y_sq / x_sq;
  if (!std::isfinite(alpha) || !(alpha > 0))
    throw NumericalError("estimate_alpha0: non-finite estimate");
  return alpha;
}

// --- IRGNM outer loop --------------------------------------------------------------------

ReconResult irgnm(const ImagingOperator& op, const std::vector<double>& I_obs,
                  const SolverConfig& config, std::vector<cplx> f0,
                  std::optional<double> noise_norm) {
  config.validate();
  if (f0.empty()) f0.assign(op.domain_size(), cplx{});
  if (f0.size() != op.domain_size()) throw DataError("irgnm: initial guess size mismatch");
  if (I_obs.size() != op.range_size()) throw DataError("irgnm: data size mismatch");
  if (config.constraints.has_subspace())
    f0 = apply_subspace_constraint(std::move(f0), config.constraints);

  ReconResult result;
  std::vector<cplx> f = f0;

  auto residual_norm = [&](const std::vector<cplx>& x) {
    return fidelity_residual(op.forward(x), I_obs, config.fidelity).first;
  };

  double s = residual_norm(f);
  result.residual_history.push_back(s);
  const double data_scale = fidelity_residual(std::vector<double>(I_obs.size(), 0.0), I_obs,
                                              config.fidelity)
                                .first;

  if (s <= 1e-12 * std::max(1.0, data_scale)) {
    result.final = std::move(f);
    result.stop_reason = StopReason::consistent_start;
    return result;
  }

  double alpha = config.alpha0 > 0 ? config.alpha0 : estimate_alpha0(op, f0, I_obs, config);

  int increases = 0;
  double max_decrease = 0;
  bool stopped = false;
  StopReason reason = StopReason::max_iter;
  std::vector<cplx> f_best = f;
  double s_best = s, alpha_best = alpha;

  for (int k = 0; k < config.max_newton && !stopped; ++k) {
    int cg = 0;
    f = newton_step_cg(op, f, f0, I_obs, alpha, config, &cg, config.gamma);
    const double s_new = residual_norm(f);
    result.residual_history.push_back(s_new);
    result.alpha_history.push_back(alpha);
    result.gamma_history.push_back(config.gamma);
    result.cg_counts.push_back(cg);
    ++result.newton_count;

    if (s_new < s_best) {
      s_best = s_new;
      f_best = f;
      alpha_best = alpha;
    }

    if (s_new > s) {
      if (++increases >= 3) {
        stopped = true;
        reason = StopReason::diverged;
      }
    } else {
      increases = 0;
    }

    const double decrease = s - s_new;
    max_decrease = std::max(max_decrease, decrease);
    s = s_new;

    if (config.stop_rule == StopRule::discrepancy && noise_norm &&
        s <= config.tau * *noise_norm) {
      stopped = true;
      reason = StopReason::discrepancy;
    } else if (config.stop_rule == StopRule::plateau && k >= 1 && max_decrease > 0 &&
               decrease >= 0 && decrease < config.plateau_fraction * max_decrease) {
      stopped = true;
      reason = StopReason::plateau;
    }
    if (!stopped) alpha *= config.alpha_reduction;
  }

  // Return the best visited iterate, not whatever the last alpha produced.
  f = std::move(f_best);
  alpha = alpha_best;
  s = s_best;

  // Endgame: approximate the strict sign constraint by escalating gamma at
  // frozen alpha in two extra steps.
  const bool has_sign = config.constraints.sign_re != SignConstraint::none ||
                        config.constraints.sign_im != SignConstraint::none;
  if (config.gamma > 0 && config.escalate_gamma && has_sign) {
    double gamma = config.gamma;
    for (int e = 0; e < 2; ++e) {
      gamma *= 10.0;
      int cg = 0;
      f = newton_step_cg(op, f, f0, I_obs, alpha, config, &cg, gamma);
      s = residual_norm(f);
      result.residual_history.push_back(s);
      result.alpha_history.push_back(alpha);
      result.gamma_history.push_back(gamma);
      result.cg_counts.push_back(cg);
      ++result.newton_count;
    }
  }

  // Final feasibility projection onto the requested sign constraints.
  if (config.clip_re || config.clip_im) {
    ConstraintSpec cc = config.constraints;
    if (!config.clip_re) cc.sign_re = SignConstraint::none;
    if (!config.clip_im) cc.sign_im = SignConstraint::none;
    f = apply_sign_projection(std::move(f), cc);
  }

  result.final = std::move(f);
  result.stop_reason = reason;
  return result;
}

}  // namespace holoreg
