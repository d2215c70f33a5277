#ifndef HOLOREG_SOLVER_HPP
#define HOLOREG_SOLVER_HPP

#include <memory>
#include <utility>
#include <vector>

#include "holoreg/operators.hpp"

namespace holoreg {

// Nonlinear imaging operator F: C^n -> R^m over flat vectors. The solver
// only needs forward maps: F, F'[f] and the Euclidean transpose of F'[f].
class ImagingOperator {
 public:
  virtual ~ImagingOperator() = default;

  virtual std::size_t domain_size() const = 0;
  virtual std::size_t range_size() const = 0;

  virtual std::vector<double> forward(const std::vector<cplx>& f) const = 0;
  virtual std::vector<double> derivative(const std::vector<cplx>& f,
                                         const std::vector<cplx>& h) const = 0;
  virtual std::vector<cplx> derivative_transpose(const std::vector<cplx>& f,
                                                 const std::vector<double>& g) const = 0;

  // Object-space Gramian; identity unless the domain has grid structure.
  virtual std::vector<cplx> domain_gram(const std::vector<cplx>& v, const GramianSpec& spec,
                                        bool inverse) const;
};

// 2D phase contrast F(f) = |D(exp(-i f))|^2 on a rows x cols grid.
class PhaseContrastOperator : public ImagingOperator {
 public:
  PhaseContrastOperator(std::size_t rows, std::size_t cols, ImagingGeometry geom);

  std::size_t domain_size() const override { return rows_ * cols_; }
  std::size_t range_size() const override { return rows_ * cols_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const ImagingGeometry& geometry() const { return geom_; }

  std::vector<double> forward(const std::vector<cplx>& f) const override;
  std::vector<double> derivative(const std::vector<cplx>& f,
                                 const std::vector<cplx>& h) const override;
  std::vector<cplx> derivative_transpose(const std::vector<cplx>& f,
                                         const std::vector<double>& g) const override;
  std::vector<cplx> domain_gram(const std::vector<cplx>& v, const GramianSpec& spec,
                                bool inverse) const override;

 private:
  const PcLinearization& linearization(const std::vector<cplx>& f) const;
  std::size_t rows_, cols_;
  ImagingGeometry geom_;
  // Cached linearization point; CG calls derivative/transpose at a fixed f.
  mutable std::vector<cplx> lin_point_;
  mutable PcLinearization lin_;
};

// All-at-once phase contrast tomography restricted to a set of frames.
// Domain: complex volume (flattened); range: concatenated selected frames.
class TomoOperator : public ImagingOperator {
 public:
  TomoOperator(std::size_t n0, std::size_t n1, std::size_t n2, std::vector<double> angles,
               ImagingGeometry geom, double projection_scale = 1.0,
               std::vector<int> frame_subset = {});

  std::size_t domain_size() const override { return n0_ * n1_ * n2_; }
  std::size_t range_size() const override { return active_.size() * n0_ * n1_; }
  const std::vector<int>& active_frames() const { return active_; }
  const ImagingGeometry& geometry() const { return geom_; }

  std::vector<double> forward(const std::vector<cplx>& f) const override;
  std::vector<double> derivative(const std::vector<cplx>& f,
                                 const std::vector<cplx>& h) const override;
  std::vector<cplx> derivative_transpose(const std::vector<cplx>& f,
                                         const std::vector<double>& g) const override;

  // Frames of `data` restricted to this operator's subset, flattened.
  std::vector<double> select_frames(const std::vector<RealImage>& frames) const;

 private:
  std::vector<double> active_angles() const;
  const std::vector<PcLinearization>& linearizations(const std::vector<cplx>& f) const;
  std::size_t n0_, n1_, n2_;
  std::vector<double> angles_;
  ImagingGeometry geom_;
  double scale_;
  std::vector<int> active_;
  mutable std::vector<cplx> lin_point_;
  mutable std::vector<PcLinearization> lin_frames_;
};

enum class FidelityKind { l2, poisson_quadratic };

struct FidelitySpec {
  FidelityKind kind = FidelityKind::l2;
  double I0 = 0.1;  // regularizing floor of the quadratic Poisson weight
};

enum class StopRule { discrepancy, plateau, max_iter };

enum class StopReason { discrepancy, plateau, max_iter, diverged, consistent_start };

struct SolverConfig {
  double alpha0 = 0;             // <= 0 selects automatic balancing
  double alpha_reduction = 2.0 / 3.0;
  double tau = 1.5;              // discrepancy factor
  int max_newton = 20;
  double cg_tol = 1e-3;
  int cg_max = 50;
  GramianSpec gram_X;
  FidelitySpec fidelity;
  ConstraintSpec constraints;
  double gamma = 0;              // sign-penalty weight
  double gamma_im = -1;          // Im-part penalty weight; < 0 reuses gamma
  bool escalate_gamma = true;    // x10 per step in the two endgame steps
  bool clip_re = false;          // project Re onto its sign constraint at the end
  bool clip_im = false;          // likewise for Im
  StopRule stop_rule = StopRule::plateau;
  double plateau_fraction = 0.01;

  void validate() const;
};

struct ReconResult {
  std::vector<cplx> final;
  std::vector<double> residual_history;
  std::vector<double> alpha_history;
  std::vector<double> gamma_history;
  std::vector<int> cg_counts;
  int newton_count = 0;
  StopReason stop_reason = StopReason::max_iter;
};

// Returns (norm, weighted residual W (I_model - I_obs)) for the chosen
// data-fidelity norm. Also used for noise-level estimates.
std::pair<double, std::vector<double>> fidelity_residual(const std::vector<double>& I_model,
                                                         const std::vector<double>& I_obs,
                                                         const FidelitySpec& fidelity);

// Pointwise fidelity weights (inside the squared norm).
std::vector<double> fidelity_weights(const std::vector<double>& I_obs,
                                     const FidelitySpec& fidelity);

// alpha_0 = ||A A* I_obs||_Y^2 / ||A* I_obs||_X^2 at f0 (weighted norms).
double estimate_alpha0(const ImagingOperator& op, const std::vector<cplx>& f0,
                       const std::vector<double>& I_obs, const SolverConfig& config);

// Orthogonal projection onto the constraint subspace (support, real part,
// homogeneous line (1 - i c/2) R).
std::vector<cplx> apply_subspace_constraint(std::vector<cplx> h, const ConstraintSpec& c);

// Pointwise projection onto the sign constraints (clips Re/Im violations).
std::vector<cplx> apply_sign_projection(std::vector<cplx> h, const ConstraintSpec& c);

// Sign-penalty contribution to the normal equations, linearized about f_k:
// adds gamma * mask to the quadratic form and gamma * rhs to the right-hand
// side; diagnostic is the penalty value at Delta = 0.
struct PenaltyTerm {
  std::vector<double> mask_re, mask_im;  // gamma where the sign is violated, else 0
  std::vector<cplx> rhs;
  double diagnostic = 0;
};
PenaltyTerm positivity_penalty(const std::vector<cplx>& f_k, const ConstraintSpec& c,
                               double gamma_re, double gamma_im = -1);

// One Tikhonov-regularized Gauss-Newton step, solved by CG on the normal
// equations. beta weights the f0-pull against the f_k-pull (1 = plain IRGNM).
std::vector<cplx> newton_step_cg(const ImagingOperator& op, const std::vector<cplx>& f_k,
                                 const std::vector<cplx>& f_0, const std::vector<double>& I_obs,
                                 double alpha_k, const SolverConfig& config, int* cg_count,
                                 double gamma, double beta = 1.0);

ReconResult irgnm(const ImagingOperator& op, const std::vector<double>& I_obs,
                  const SolverConfig& config, std::vector<cplx> f0 = {},
                  std::optional<double> noise_norm = {});

}  // namespace holoreg

#endif
