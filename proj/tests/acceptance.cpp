#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "holoreg/analysis.hpp"
#include "holoreg/kaczmarz.hpp"
#include "holoreg/phantom.hpp"
#include "holoreg/rng.hpp"
#include "holoreg/solver.hpp"

#ifdef HOLOREG_HAVE_EIGEN
#include <Eigen/Dense>
#endif

using namespace holoreg;

namespace {

void report(const char* name, bool pass) {
  std::printf("[%s] %s\n", pass ? "PASS" : "FAIL", name);
  std::fflush(stdout);
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<cplx> random_complex(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::vector<cplx> v(n);
  for (cplx& x : v) x = scale * cplx(rng.normal(), rng.normal());
  return v;
}

std::vector<double> random_real(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

ImagingGeometry make_geom(double nf, bool padding) {
  ImagingGeometry g;
  g.fresnel_number = nf;
  g.padding = padding;
  return g;
}

double adjoint_gap(const ImagingOperator& op, const std::vector<cplx>& f, std::uint64_t seed) {
  const std::vector<cplx> h = random_complex(op.domain_size(), seed);
  const std::vector<double> y = random_real(op.range_size(), seed + 1000);
  const std::vector<double> Ah = op.derivative(f, h);
  const std::vector<cplx> Aty = op.derivative_transpose(f, y);
  const double lhs = dot_re(Ah, y);
  const double rhs = dot_re(h, Aty);
  return std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-30});
}

double taylor_ratio(const ImagingOperator& op, const std::vector<cplx>& f,
                    const std::vector<cplx>& h) {
  const std::vector<double> F0 = op.forward(f);
  const std::vector<double> Ah = op.derivative(f, h);
  auto remainder = [&](double t) {
    std::vector<cplx> ft(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) ft[i] = f[i] + t * h[i];
    const std::vector<double> Ft = op.forward(ft);
    std::vector<double> r(Ft.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = Ft[i] - F0[i] - t * Ah[i];
    return norm2(r);
  };
  return remainder(1e-2) / remainder(1e-3);
}

// --- shared fig-4 style 2D reconstruction (criteria 6 and 9) ----------------

struct Fig4Run {
  ComplexImage recon;
  RealImage glyph_cov;
  std::vector<char> disc_mask;
};

Fig4Run run_fig4() {
  const std::size_t n = 256;
  const double c = (static_cast<double>(n) - 1.0) / 2.0;

  DiscElement disc;
  disc.center_row = disc.center_col = c;
  disc.radius = 60.0;
  disc.phi = 0.2;
  GlyphElement glyph;
  glyph.bitmap = builtin_glyph();
  glyph.center_row = glyph.center_col = c;
  glyph.scale = 4.0;
  glyph.mu = 0.04;

  PhantomSpec2D spec;
  spec.rows = spec.cols = n;
  spec.elements = {disc, glyph};
  Object2D obj = render_phantom2d(spec);

  const ImagingGeometry geom = make_geom(0.004, true);
  const RealImage I = pc_forward(obj, geom);
  NoiseModel noise;
  noise.kind = NoiseKind::gaussian;
  noise.sigma = 0.02;
  noise.seed = 11;
  const RealImage I_obs = add_noise(I, noise).frames[0];

  SolverConfig cfg;
  cfg.max_newton = 35;
  cfg.alpha_reduction = 0.5;
  cfg.gram_X = GramianSpec::sobolev(1.0);
  cfg.gamma = 6.5;
  cfg.gamma_im = 0.0;
  cfg.clip_re = true;
  cfg.clip_im = true;
  cfg.cg_max = 50;
  cfg.stop_rule = StopRule::max_iter;
  cfg.constraints.sign_re = SignConstraint::nonnegative;
  cfg.constraints.sign_im = SignConstraint::nonpositive;
  cfg.constraints.support_mask.resize(n * n);
  std::vector<char> disc_mask(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = std::hypot(static_cast<double>(i) - c, static_cast<double>(j) - c);
      cfg.constraints.support_mask[i * n + j] = d <= 82.0 ? 1 : 0;
      disc_mask[i * n + j] = d <= 60.0 ? 1 : 0;
    }

  PhaseContrastOperator op(n, n, geom);
  ReconResult res = irgnm(op, I_obs.storage(), cfg);

  Fig4Run run;
  run.recon = ComplexImage(n, n);
  run.recon.storage() = std::move(res.final);
  run.glyph_cov = element_coverage(glyph, n, n);
  run.disc_mask = std::move(disc_mask);
  return run;
}

double median(std::vector<double> v) {
  REQUIRE(!v.empty());
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// --- shared tomography pipeline (criteria 7 and 9) ---------------------------

HoloData tomo_dataset(std::size_t n, const SpherePacking& packing) {
  Volume3D vol = render_packing(packing, n, n, n);
  std::vector<double> angles(60);
  for (std::size_t a = 0; a < 60; ++a) angles[a] = M_PI * static_cast<double>(a) / 60.0;
  HoloData data = tomo_forward(vol, angles, make_geom(0.01, true));
  for (std::size_t j = 0; j < data.frames.size(); ++j) {
    NoiseModel noise;
    noise.kind = NoiseKind::poisson;
    noise.peak_flux = 770;
    noise.seed = 100 + j;
    data.frames[j] = add_noise(data.frames[j], noise).frames[0];
  }
  return data;
}

ReconResult run_tomo(const HoloData& data, std::size_t n, double alpha0, double gamma) {
  KaczmarzConfig cfg;
  cfg.alpha0 = alpha0;
  cfg.beta = 0.001;
  cfg.gamma = gamma;
  cfg.fidelity.kind = FidelityKind::poisson_quadratic;
  cfg.constraints.real_valued = true;
  cfg.constraints.sign_re = SignConstraint::nonnegative;
  cfg.constraints.support_mask.resize(n * n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        cfg.constraints.support_mask[(i * n + j) * n + k] =
            (i >= 4 && i < 60 && j >= 4 && j < 60 && k >= 4 && k < 60) ? 1 : 0;
  WedgeSchedule sched = build_schedule(static_cast<int>(data.frames.size()), 6, 2,
                                       WedgeOrder::sequential);
  return kaczmarz_reconstruct(n, n, n, data, sched, cfg);
}

double first_wedge_alpha(const HoloData& data, std::size_t n) {
  TomoOperator first(n, n, n, data.angles, data.geom, 1.0, {0, 1, 2, 3, 4, 5});
  SolverConfig est;
  est.fidelity.kind = FidelityKind::poisson_quadratic;
  return estimate_alpha0(first, std::vector<cplx>(n * n * n, cplx{}),
                         first.select_frames(data.frames), est);
}

HoloData parity_subset(const HoloData& data, std::size_t parity) {
  HoloData out;
  out.geom = data.geom;
  for (std::size_t j = parity; j < data.frames.size(); j += 2) {
    out.frames.push_back(data.frames[j]);
    out.angles.push_back(data.angles[j]);
  }
  return out;
}

RealVolume real_part(const std::vector<cplx>& v, std::size_t n) {
  RealVolume out(n, n, n);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i].real();
  return out;
}

}  // namespace

TEST_CASE("criterion 1 adjoint pairing") {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;

  PhaseContrastOperator pc(64, 64, make_geom(0.05, true));
  const std::vector<cplx> f2 = random_complex(pc.domain_size(), 1, 0.3);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const double gap = adjoint_gap(pc, f2, 10 + s);
    CHECK(gap <= 1e-10);
    pass = pass && gap <= 1e-10;
  }

  std::vector<double> angles(6);
  for (std::size_t a = 0; a < 6; ++a) angles[a] = M_PI * static_cast<double>(a) / 6.0;
  TomoOperator tomo(32, 32, 32, angles, make_geom(0.05, true));
  const std::vector<cplx> f3 = random_complex(tomo.domain_size(), 2, 0.05);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const double gap = adjoint_gap(tomo, f3, 40 + s);
    CHECK(gap <= 1e-10);
    pass = pass && gap <= 1e-10;
  }

  const double elapsed = seconds_since(t0);
  CHECK(elapsed <= 10.0);
  report("criterion 1 adjoint pairing", pass && elapsed <= 10.0);
}

TEST_CASE("criterion 2 derivative taylor") {
  PhaseContrastOperator pc(32, 32, make_geom(0.05, false));
  const double r2 = taylor_ratio(pc, random_complex(pc.domain_size(), 7, 0.2),
                                 random_complex(pc.domain_size(), 8));
  CHECK(r2 >= 75.0);
  CHECK(r2 <= 125.0);

  std::vector<double> angles = {0.0, 0.7, 1.5, 2.3};
  TomoOperator tomo(16, 16, 16, angles, make_geom(0.05, true));
  const double r3 = taylor_ratio(tomo, random_complex(tomo.domain_size(), 9, 0.05),
                                 random_complex(tomo.domain_size(), 10, 0.5));
  CHECK(r3 >= 75.0);
  CHECK(r3 <= 125.0);

  const bool pass = r2 >= 75 && r2 <= 125 && r3 >= 75 && r3 <= 125;
  report("criterion 2 derivative taylor", pass);
}

TEST_CASE("criterion 3 ctf consistency") {
  const std::size_t n = 128;
  const ImagingGeometry geom = make_geom(0.01, false);
  Rng rng(33);
  RealImage phi(n, n), mu(n, n);
  for (std::size_t i = 0; i < phi.size(); ++i) {
    phi[i] = rng.normal();
    mu[i] = rng.normal();
  }
  Object2D zero(n, n);
  ComplexImage h(n, n);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = cplx(phi[i], -0.5 * mu[i]);

  const RealImage deriv = pc_derivative(zero, h, geom);
  const RealImage ctf = ctf_apply(phi, mu, geom);
  double err = 0, scale = 0;
  for (std::size_t i = 0; i < deriv.size(); ++i) {
    err += std::pow(deriv[i] - ctf[i], 2);
    scale += ctf[i] * ctf[i];
  }
  const double rel = std::sqrt(err / scale);
  CHECK(rel <= 1e-10);
  report("criterion 3 ctf consistency", rel <= 1e-10);
}

TEST_CASE("criterion 4 propagator") {
  bool pass = true;

  // unitarity and inversion on a random field
  {
    const std::size_t n = 128;
    const ImagingGeometry geom = make_geom(0.01, false);
    Rng rng(44);
    ComplexImage psi(n, n);
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = cplx(rng.normal(), rng.normal());
    const ComplexImage fwd = fresnel_propagate(psi, geom, Direction::forward);
    const ComplexImage back = fresnel_propagate(fwd, geom, Direction::inverse);
    const double norm_in = norm2(psi.storage());
    const double norm_out = norm2(fwd.storage());
    const double unit_err = std::abs(norm_out - norm_in) / norm_in;
    double inv_err = 0;
    for (std::size_t i = 0; i < psi.size(); ++i) inv_err += std::norm(back[i] - psi[i]);
    inv_err = std::sqrt(inv_err) / norm_in;
    CHECK(unit_err <= 1e-12);
    CHECK(inv_err <= 1e-12);
    pass = pass && unit_err <= 1e-12 && inv_err <= 1e-12;
  }

  // analytic propagation of a gaussian beam
  {
    const std::size_t n = 256;
    const double sigma = 3.0, nf = 0.01, c = 128.0;
    const ImagingGeometry geom = make_geom(nf, false);
    ComplexImage psi(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double x = static_cast<double>(i) - c, y = static_cast<double>(j) - c;
        psi(i, j) = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      }
    const ComplexImage num = fresnel_propagate(psi, geom, Direction::forward);

    const cplx A = cplx(2.0 * M_PI * M_PI * sigma * sigma, -M_PI / nf);
    const cplx amp = sigma * std::sqrt(2.0 * M_PI) * std::sqrt(M_PI / A);
    auto axis = [&](double x) { return amp * std::exp(-M_PI * M_PI * x * x / A); };
    double err = 0, scale = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const cplx ana =
            axis(static_cast<double>(i) - c) * axis(static_cast<double>(j) - c);
        err += std::norm(num(i, j) - ana);
        scale += std::norm(ana);
      }
    const double rms = std::sqrt(err / scale);
    CHECK(rms <= 1e-6);
    pass = pass && rms <= 1e-6;
  }

  report("criterion 4 propagator", pass);
}

#ifdef HOLOREG_HAVE_EIGEN

namespace {

// Dense real-linear map R^{2n} -> R^m over the complex domain seen as (Re, Im).
class DenseOperator : public ImagingOperator {
 public:
  DenseOperator(std::size_t m, std::size_t n, std::uint64_t seed) : m_(m), n_(n), a_(m * 2 * n) {
    Rng rng(seed);
    for (double& x : a_) x = rng.normal();
  }
  std::size_t domain_size() const override { return n_; }
  std::size_t range_size() const override { return m_; }
  double entry(std::size_t i, std::size_t j) const { return a_[i * 2 * n_ + j]; }
  std::vector<double> forward(const std::vector<cplx>& f) const override {
    return derivative({}, f);
  }
  std::vector<double> derivative(const std::vector<cplx>&,
                                 const std::vector<cplx>& h) const override {
    std::vector<double> out(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = 0; j < n_; ++j)
        out[i] += entry(i, j) * h[j].real() + entry(i, n_ + j) * h[j].imag();
    return out;
  }
  std::vector<cplx> derivative_transpose(const std::vector<cplx>&,
                                         const std::vector<double>& g) const override {
    std::vector<cplx> out(n_, cplx{});
    for (std::size_t i = 0; i < m_; ++i)
      for (std::size_t j = 0; j < n_; ++j)
        out[j] += cplx(entry(i, j) * g[i], entry(i, n_ + j) * g[i]);
    return out;
  }

 private:
  std::size_t m_, n_;
  std::vector<double> a_;
};

Eigen::MatrixXd dense_matrix(const DenseOperator& op) {
  const auto m = static_cast<Eigen::Index>(op.range_size());
  const auto n2 = static_cast<Eigen::Index>(2 * op.domain_size());
  Eigen::MatrixXd A(m, n2);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n2; ++j)
      A(i, j) = op.entry(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  return A;
}

}  // namespace

TEST_CASE("criterion 5 tikhonov oracle") {
  bool pass = true;

  // 16x16 dense Tikhonov step against the closed form
  {
    const std::size_t m = 16, n = 8;
    DenseOperator op(m, n, 55);
    Eigen::MatrixXd A = dense_matrix(op);
    std::vector<double> y = random_real(m, 56);
    const double alpha = 0.42;

    SolverConfig cfg;
    cfg.cg_tol = 1e-14;
    cfg.cg_max = 1000;
    int cg = 0;
    const std::vector<cplx> f1 = newton_step_cg(op, std::vector<cplx>(n, cplx{}),
                                                std::vector<cplx>(n, cplx{}), y, alpha, cfg,
                                                &cg, 0.0);

    Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(y.data(), 16);
    Eigen::MatrixXd lhs = A.transpose() * A + alpha * Eigen::MatrixXd::Identity(16, 16);
    Eigen::VectorXd x = lhs.ldlt().solve(A.transpose() * b);
    double err = 0, scale = 0;
    for (std::size_t j = 0; j < n; ++j) {
      err += std::pow(f1[j].real() - x(static_cast<Eigen::Index>(j)), 2) +
             std::pow(f1[j].imag() - x(static_cast<Eigen::Index>(n + j)), 2);
      scale += std::pow(x(static_cast<Eigen::Index>(j)), 2) +
               std::pow(x(static_cast<Eigen::Index>(n + j)), 2);
    }
    const double rel = std::sqrt(err / scale);
    CHECK(rel <= 1e-8);
    pass = pass && rel <= 1e-8;
  }

  // regularized inverse norm bound || (A^T A + alpha)^-1 || <= 1 / alpha
  {
    Rng rng(57);
    for (int inst = 0; inst < 50; ++inst) {
      DenseOperator op(16, 8, 600 + static_cast<std::uint64_t>(inst));
      Eigen::MatrixXd A = dense_matrix(op);
      const double alpha = std::exp(rng.uniform(std::log(1e-3), std::log(10.0)));
      Eigen::MatrixXd lhs = A.transpose() * A + alpha * Eigen::MatrixXd::Identity(16, 16);
      Eigen::VectorXd v(16);
      for (Eigen::Index i = 0; i < 16; ++i) v(i) = rng.normal();
      Eigen::VectorXd x = lhs.ldlt().solve(v);
      const bool ok = x.norm() <= v.norm() / alpha * (1.0 + 1e-10);
      CHECK(ok);
      pass = pass && ok;
    }
  }

  report("criterion 5 tikhonov oracle", pass);
}

#else

TEST_CASE("criterion 5 tikhonov oracle") {
  CHECK_MESSAGE(false, "Eigen is required for the dense Tikhonov oracle");
  report("criterion 5 tikhonov oracle", false);
}

#endif  // HOLOREG_HAVE_EIGEN

TEST_CASE("criterion 6 fig4 reconstruction") {
  const auto t0 = std::chrono::steady_clock::now();
  Fig4Run run = run_fig4();

  std::vector<double> phi_disc, mu_glyph, mu_free;
  const std::size_t n = 256;
  for (std::size_t i = 0; i < n * n; ++i) {
    if (!run.disc_mask[i]) continue;
    phi_disc.push_back(run.recon[i].real());
    const double mu = -2.0 * run.recon[i].imag();
    if (run.glyph_cov[i] > 0.5)
      mu_glyph.push_back(mu);
    else if (run.glyph_cov[i] == 0.0)
      mu_free.push_back(std::abs(mu));
  }
  const double phi_med = median(phi_disc);
  const double mu_glyph_med = median(mu_glyph);
  const double mu_free_med = median(mu_free);
  const double elapsed = seconds_since(t0);
  std::printf("  fig4: median phi %.4f, median mu(glyph) %.4f, median |mu|(free) %.4f, %.0fs\n",
              phi_med, mu_glyph_med, mu_free_med, elapsed);

  CHECK(phi_med >= 0.17);
  CHECK(phi_med <= 0.23);
  CHECK(mu_glyph_med >= 0.02);
  CHECK(mu_free_med <= 0.01);
  CHECK(elapsed <= 300.0);
  const bool pass = phi_med >= 0.17 && phi_med <= 0.23 && mu_glyph_med >= 0.02 &&
                    mu_free_med <= 0.01 && elapsed <= 300.0;
  report("criterion 6 fig4 reconstruction", pass);
}

TEST_CASE("criterion 7 tomography end-to-end") {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = 64;
  SpherePacking packing = random_packing(20, n, n, n, 4.0, 0.025, 1.0, 11, 4.0);
  HoloData data = tomo_dataset(n, packing);
  const double A0 = first_wedge_alpha(data, n);

  ReconResult full = run_tomo(data, n, 0.1 * A0, A0);
  ReconResult h0 = run_tomo(parity_subset(data, 0), n, 0.1 * A0, A0);
  ReconResult h1 = run_tomo(parity_subset(data, 1), n, 0.1 * A0, A0);

  // resolution from the half-data FSC
  FscCurve curve = fsc(real_part(h0.final, n), real_part(h1.final, n), 32);
  ResolutionEstimate est = resolution_from_fsc(curve);
  CHECK(est.resolution <= 4.0);

  // sphere localization on the deconvolved full reconstruction
  RealVolume dec = formfactor_deconvolve(real_part(full.final, n), 8.0, 1.0, 0.05);
  PeakSet peaks = locate_peaks(dec, 8.0, 0.2);
  double worst = 0;
  std::vector<char> matched(peaks.count(), 0);
  for (const auto& c : packing.centers) {
    double best = 1e30;
    std::size_t best_p = 0;
    for (std::size_t p = 0; p < peaks.count(); ++p) {
      const double d0 = peaks.positions[p][0] - c[0];
      const double d1 = peaks.positions[p][1] - c[1];
      const double d2 = peaks.positions[p][2] - c[2];
      const double d = std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
      if (d < best) {
        best = d;
        best_p = p;
      }
    }
    worst = std::max(worst, best);
    if (best <= 1.0 && best_p < matched.size()) matched[best_p] = 1;
  }
  CHECK(worst <= 1.0);

  double weakest_true = 1e30;
  for (std::size_t p = 0; p < peaks.count(); ++p)
    if (matched[p]) weakest_true = std::min(weakest_true, peaks.amplitudes[p]);
  double strongest_spurious = 0;
  for (std::size_t p = 0; p < peaks.count(); ++p)
    if (!matched[p]) strongest_spurious = std::max(strongest_spurious, peaks.amplitudes[p]);
  CHECK(strongest_spurious <= 0.5 * weakest_true);

  const double elapsed = seconds_since(t0);
  CHECK(elapsed <= 600.0);
  std::printf("  tomo: resolution %.2f vox, worst center error %.2f vox, "
              "%zu peaks (%zu matched), %.0fs\n",
              est.resolution, worst, peaks.count(),
              static_cast<std::size_t>(std::count(matched.begin(), matched.end(), 1)), elapsed);

  const bool pass = est.resolution <= 4.0 && worst <= 1.0 &&
                    strongest_spurious <= 0.5 * weakest_true && elapsed <= 600.0;
  report("criterion 7 tomography end-to-end", pass);
}

TEST_CASE("criterion 8 positivity endgame") {
  const std::size_t n = 64;
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  DiscElement disc;
  disc.center_row = disc.center_col = c;
  disc.radius = 20.0;
  disc.phi = 0.15;
  PhantomSpec2D spec;
  spec.rows = spec.cols = n;
  spec.elements = {disc};
  Object2D obj = render_phantom2d(spec);

  const ImagingGeometry geom = make_geom(0.01, true);
  NoiseModel noise;
  noise.kind = NoiseKind::gaussian;
  noise.sigma = 0.01;
  noise.seed = 7;
  const RealImage I_obs = add_noise(pc_forward(obj, geom), noise).frames[0];

  SolverConfig cfg;
  cfg.max_newton = 12;
  cfg.stop_rule = StopRule::max_iter;
  cfg.gamma = 20.0;
  cfg.constraints.sign_re = SignConstraint::nonnegative;
  PhaseContrastOperator op(n, n, geom);
  ReconResult res = irgnm(op, I_obs.storage(), cfg);

  // the endgame appends two steps with 10x and 100x gamma at frozen alpha
  REQUIRE(res.gamma_history.size() >= 3);
  const std::size_t last = res.gamma_history.size() - 1;
  CHECK(res.gamma_history[last] == doctest::Approx(2000.0));
  CHECK(res.gamma_history[last - 1] == doctest::Approx(200.0));
  CHECK(res.alpha_history[last] == doctest::Approx(res.alpha_history[last - 2]));

  double min_re = 1e30, max_re = -1e30;
  for (const cplx& x : res.final) {
    min_re = std::min(min_re, x.real());
    max_re = std::max(max_re, x.real());
  }
  std::printf("  endgame: min Re %.3e, max Re %.3e\n", min_re, max_re);
  const bool pass = min_re >= -1e-3 * max_re && res.gamma_history[last] == 2000.0;
  CHECK(min_re >= -1e-3 * max_re);
  report("criterion 8 positivity endgame", pass);
}

TEST_CASE("criterion 9 determinism") {
  // fig-4 reconstruction, twice from scratch
  Fig4Run a = run_fig4();
  Fig4Run b = run_fig4();
  bool same2d = a.recon.size() == b.recon.size();
  for (std::size_t i = 0; same2d && i < a.recon.size(); ++i)
    same2d = a.recon[i] == b.recon[i];
  CHECK(same2d);

  // tomography reconstruction, twice from scratch
  const std::size_t n = 64;
  SpherePacking packing = random_packing(20, n, n, n, 4.0, 0.025, 1.0, 11, 4.0);
  HoloData data1 = tomo_dataset(n, packing);
  const double A1 = first_wedge_alpha(data1, n);
  ReconResult t1 = run_tomo(data1, n, 0.1 * A1, A1);

  SpherePacking packing2 = random_packing(20, n, n, n, 4.0, 0.025, 1.0, 11, 4.0);
  HoloData data2 = tomo_dataset(n, packing2);
  const double A2 = first_wedge_alpha(data2, n);
  ReconResult t2 = run_tomo(data2, n, 0.1 * A2, A2);

  bool same3d = A1 == A2 && t1.final.size() == t2.final.size();
  for (std::size_t i = 0; same3d && i < t1.final.size(); ++i) same3d = t1.final[i] == t2.final[i];
  CHECK(same3d);

  report("criterion 9 determinism", same2d && same3d);
}

TEST_CASE("criterion 10 fsc sanity") {
  bool pass = true;
  const std::size_t n = 64;

  // self-correlation is exactly one
  Rng rng(1010);
  RealVolume v(n, n, n);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.normal();
  FscCurve self = fsc(v, v, 32);
  for (std::size_t s = 0; s < 32; ++s) {
    const bool ok = self.zero_energy[s] || self.correlation[s] == doctest::Approx(1.0);
    CHECK(ok);
    pass = pass && ok;
  }

  // independent noise stays within the 3/sqrt(n) band on >= 95% of shells
  RealVolume w(n, n, n);
  Rng rng2(2020);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng2.normal();
  FscCurve indep = fsc(v, w, 32);
  std::size_t inside = 0, total = 0;
  for (std::size_t s = 0; s < 32; ++s) {
    if (indep.zero_energy[s]) continue;
    ++total;
    if (std::abs(indep.correlation[s]) <=
        3.0 / std::sqrt(static_cast<double>(indep.shell_counts[s])))
      ++inside;
  }
  const bool band_ok = static_cast<double>(inside) >= 0.95 * static_cast<double>(total);
  CHECK(band_ok);
  pass = pass && band_ok;

  // form-factor dip of a radius-10 sphere at q R = 4.4934
  const double R = 10.0;
  SpherePacking one;
  one.radius = R;
  one.delta_value = 1.0;
  one.centers = {{31.5, 31.5, 31.5}};
  Volume3D sphere = render_packing(one, n, n, n);
  RealVolume s1(n, n, n), s2(n, n, n);
  Rng rng3(3030), rng4(4040);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    s1[i] = sphere.v[i].real() + 0.3 * rng3.normal();
    s2[i] = sphere.v[i].real() + 0.3 * rng4.normal();
  }
  FscCurve curve = fsc(s1, s2, 32);
  double dip_center = -1, dip_value = 1e30;
  for (std::size_t s = 0; s < 32; ++s) {
    const double q = curve.shell_centers[s];
    if (q <= 0.03 || q >= 0.10 || curve.zero_energy[s]) continue;
    if (curve.correlation[s] < dip_value) {
      dip_value = curve.correlation[s];
      dip_center = q;
    }
  }
  const double expected = 4.493409457909064 / (2.0 * M_PI * R);
  const double shell_width = 0.5 / 32.0;
  const bool dip_ok = dip_center >= 0 && std::abs(dip_center - expected) <= shell_width;
  std::printf("  fsc: dip at %.4f cyc/vox, expected %.4f (shell width %.4f)\n", dip_center,
              expected, shell_width);
  CHECK(dip_ok);
  pass = pass && dip_ok;

  report("criterion 10 fsc sanity", pass);
}
