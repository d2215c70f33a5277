#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "holoreg/analysis.hpp"
#include "holoreg/kaczmarz.hpp"
#include "holoreg/phantom.hpp"

namespace py = pybind11;
using namespace holoreg;

namespace {

ImagingGeometry make_geom(double fresnel_number, double pixel_size, bool padding) {
  ImagingGeometry g;
  g.fresnel_number = fresnel_number;
  g.pixel_size = pixel_size;
  g.padding = padding;
  g.validate();
  return g;
}

ComplexImage to_cimage(const py::array_t<cplx>& a) {
  if (a.ndim() != 2) throw DataError("expected a 2D complex array");
  ComplexImage img(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    for (py::ssize_t j = 0; j < a.shape(1); ++j)
      img(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = r(i, j);
  return img;
}

RealImage to_rimage(const py::array_t<double>& a) {
  if (a.ndim() != 2) throw DataError("expected a 2D real array");
  RealImage img(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    for (py::ssize_t j = 0; j < a.shape(1); ++j)
      img(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = r(i, j);
  return img;
}

ComplexVolume to_cvolume(const py::array_t<cplx>& a) {
  if (a.ndim() != 3) throw DataError("expected a 3D complex array");
  ComplexVolume vol(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                    static_cast<std::size_t>(a.shape(2)));
  auto r = a.unchecked<3>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    for (py::ssize_t j = 0; j < a.shape(1); ++j)
      for (py::ssize_t k = 0; k < a.shape(2); ++k)
        vol(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
            static_cast<std::size_t>(k)) = r(i, j, k);
  return vol;
}

RealVolume to_rvolume(const py::array_t<double>& a) {
  if (a.ndim() != 3) throw DataError("expected a 3D real array");
  RealVolume vol(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                 static_cast<std::size_t>(a.shape(2)));
  auto r = a.unchecked<3>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    for (py::ssize_t j = 0; j < a.shape(1); ++j)
      for (py::ssize_t k = 0; k < a.shape(2); ++k)
        vol(static_cast<std::size_t>(i), static_cast<std::size_t>(j),
            static_cast<std::size_t>(k)) = r(i, j, k);
  return vol;
}

template <typename T>
py::array_t<T> from_image(const Image<T>& img) {
  py::array_t<T> out({img.rows(), img.cols()});
  auto w = out.template mutable_unchecked<2>();
  for (std::size_t i = 0; i < img.rows(); ++i)
    for (std::size_t j = 0; j < img.cols(); ++j)
      w(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(j)) = img(i, j);
  return out;
}

template <typename T>
py::array_t<T> from_volume(const Volume<T>& vol) {
  py::array_t<T> out({vol.dim0(), vol.dim1(), vol.dim2()});
  auto w = out.template mutable_unchecked<3>();
  for (std::size_t i = 0; i < vol.dim0(); ++i)
    for (std::size_t j = 0; j < vol.dim1(); ++j)
      for (std::size_t k = 0; k < vol.dim2(); ++k)
        w(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(j),
          static_cast<py::ssize_t>(k)) = vol(i, j, k);
  return out;
}

SignConstraint sign_from_string(const std::string& s) {
  if (s == "none") return SignConstraint::none;
  if (s == "nonnegative") return SignConstraint::nonnegative;
  if (s == "nonpositive") return SignConstraint::nonpositive;
  throw ConfigError("sign constraint must be none, nonnegative or nonpositive");
}

ConstraintSpec make_constraints(const std::optional<py::array_t<bool>>& support,
                                std::optional<double> homogeneous_ratio, bool real_valued,
                                const std::string& sign_re, const std::string& sign_im) {
  ConstraintSpec c;
  if (support) {
    py::array_t<bool, py::array::c_style | py::array::forcecast> flat(*support);
    const bool* data = flat.data();
    c.support_mask.resize(static_cast<std::size_t>(flat.size()));
    for (py::ssize_t i = 0; i < flat.size(); ++i)
      c.support_mask[static_cast<std::size_t>(i)] = data[i] ? 1 : 0;
  }
  c.homogeneous_ratio = homogeneous_ratio;
  c.real_valued = real_valued;
  c.sign_re = sign_from_string(sign_re);
  c.sign_im = sign_from_string(sign_im);
  return c;
}

py::dict result_to_dict(const ReconResult& res) {
  py::dict d;
  d["residual_history"] = res.residual_history;
  d["alpha_history"] = res.alpha_history;
  d["gamma_history"] = res.gamma_history;
  d["cg_counts"] = res.cg_counts;
  d["newton_count"] = res.newton_count;
  const char* reason = "max_iter";
  switch (res.stop_reason) {
    case StopReason::discrepancy: reason = "discrepancy"; break;
    case StopReason::plateau: reason = "plateau"; break;
    case StopReason::max_iter: reason = "max_iter"; break;
    case StopReason::diverged: reason = "diverged"; break;
    case StopReason::consistent_start: reason = "consistent_start"; break;
  }
  d["stop_reason"] = reason;
  return d;
}

}  // namespace

PYBIND11_MODULE(_holoreg, m) {
  m.doc() = "Near-field phase-contrast imaging: propagation, IRGNM phase retrieval, "
            "Newton-Kaczmarz tomography, FSC analysis";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  m.def(
      "fresnel_propagate",
      [](py::array_t<cplx> psi, double fresnel_number, bool padding, bool forward) {
        return from_image(fresnel_propagate(to_cimage(psi),
                                            make_geom(fresnel_number, 1.0, padding),
                                            forward ? Direction::forward : Direction::inverse));
      },
      py::arg("psi"), py::arg("fresnel_number"), py::arg("padding") = false,
      py::arg("forward") = true);

  m.def(
      "pc_forward",
      [](py::array_t<cplx> f, double fresnel_number, bool padding) {
        return from_image(
            pc_forward(Object2D(to_cimage(f)), make_geom(fresnel_number, 1.0, padding)));
      },
      py::arg("f"), py::arg("fresnel_number"), py::arg("padding") = false);

  m.def(
      "pc_derivative",
      [](py::array_t<cplx> f, py::array_t<cplx> h, double fresnel_number, bool padding) {
        return from_image(pc_derivative(Object2D(to_cimage(f)), to_cimage(h),
                                        make_geom(fresnel_number, 1.0, padding)));
      },
      py::arg("f"), py::arg("h"), py::arg("fresnel_number"), py::arg("padding") = false);

  m.def(
      "ctf_apply",
      [](py::array_t<double> phi, py::array_t<double> mu, double fresnel_number) {
        return from_image(
            ctf_apply(to_rimage(phi), to_rimage(mu), make_geom(fresnel_number, 1.0, false)));
      },
      py::arg("phi"), py::arg("mu"), py::arg("fresnel_number"));

  m.def(
      "ctf_invert_homogeneous",
      [](py::array_t<double> intensity, double ratio, double fresnel_number, double alpha) {
        return from_image(ctf_invert_homogeneous(to_rimage(intensity), ratio,
                                                 make_geom(fresnel_number, 1.0, false), alpha));
      },
      py::arg("intensity"), py::arg("ratio"), py::arg("fresnel_number"),
      py::arg("alpha") = 0.01);

  m.def(
      "radon",
      [](py::array_t<cplx> vol, std::vector<double> angles, double voxel_size) {
        std::vector<ComplexImage> proj = radon(Volume3D(to_cvolume(vol), voxel_size), angles);
        py::list out;
        for (const auto& p : proj) out.append(from_image(p));
        return out;
      },
      py::arg("volume"), py::arg("angles"), py::arg("voxel_size") = 1.0);

  m.def(
      "tomo_forward",
      [](py::array_t<cplx> vol, std::vector<double> angles, double fresnel_number, bool padding,
         double projection_scale) {
        HoloData data = tomo_forward(Volume3D(to_cvolume(vol)), angles,
                                     make_geom(fresnel_number, 1.0, padding), projection_scale);
        py::list out;
        for (const auto& f : data.frames) out.append(from_image(f));
        return out;
      },
      py::arg("volume"), py::arg("angles"), py::arg("fresnel_number"), py::arg("padding") = false,
      py::arg("projection_scale") = 1.0);

  m.def(
      "reconstruct2d",
      [](py::array_t<double> hologram, double fresnel_number, bool padding, double alpha0,
         double alpha_reduction, double tau, int max_newton, double cg_tol, int cg_max,
         double sobolev_s, const std::string& fidelity, double gamma, double gamma_im,
         std::optional<py::array_t<bool>> support, std::optional<double> homogeneous_ratio,
         bool real_valued, const std::string& sign_re, const std::string& sign_im,
         bool clip_re, bool clip_im, const std::string& stop_rule,
         std::optional<double> noise_norm) {
        RealImage holo = to_rimage(hologram);
        SolverConfig cfg;
        cfg.alpha0 = alpha0;
        cfg.alpha_reduction = alpha_reduction;
        cfg.tau = tau;
        cfg.max_newton = max_newton;
        cfg.cg_tol = cg_tol;
        cfg.cg_max = cg_max;
        if (sobolev_s > 0) cfg.gram_X = GramianSpec::sobolev(sobolev_s);
        if (fidelity == "poisson")
          cfg.fidelity.kind = FidelityKind::poisson_quadratic;
        else if (fidelity != "l2")
          throw ConfigError("fidelity must be 'l2' or 'poisson'");
        cfg.gamma = gamma;
        cfg.gamma_im = gamma_im;
        cfg.clip_re = clip_re;
        cfg.clip_im = clip_im;
        cfg.constraints =
            make_constraints(support, homogeneous_ratio, real_valued, sign_re, sign_im);
        if (stop_rule == "discrepancy")
          cfg.stop_rule = StopRule::discrepancy;
        else if (stop_rule == "plateau")
          cfg.stop_rule = StopRule::plateau;
        else if (stop_rule == "max_iter")
          cfg.stop_rule = StopRule::max_iter;
        else
          throw ConfigError("stop_rule must be discrepancy, plateau or max_iter");

        PhaseContrastOperator op(holo.rows(), holo.cols(),
                                 make_geom(fresnel_number, 1.0, padding));
        ReconResult res = irgnm(op, holo.storage(), cfg, {}, noise_norm);
        ComplexImage f(holo.rows(), holo.cols());
        f.storage() = std::move(res.final);
        return py::make_tuple(from_image(f), result_to_dict(res));
      },
      py::arg("hologram"), py::arg("fresnel_number"), py::arg("padding") = true,
      py::arg("alpha0") = 0.0, py::arg("alpha_reduction") = 2.0 / 3.0, py::arg("tau") = 1.5,
      py::arg("max_newton") = 20, py::arg("cg_tol") = 1e-3, py::arg("cg_max") = 50,
      py::arg("sobolev_s") = 0.0, py::arg("fidelity") = "l2", py::arg("gamma") = 0.0,
      py::arg("gamma_im") = -1.0, py::arg("support") = std::nullopt, py::arg("homogeneous_ratio") = std::nullopt,
      py::arg("real_valued") = false, py::arg("sign_re") = "none", py::arg("sign_im") = "none",
      py::arg("clip_re") = false, py::arg("clip_im") = false, py::arg("stop_rule") = "plateau",
      py::arg("noise_norm") = std::nullopt);

  m.def(
      "reconstruct_tomo",
      [](py::list frames, std::vector<double> angles, double fresnel_number, bool padding,
         std::array<std::size_t, 3> shape, double projection_scale, int wedge_size, int passes,
         double alpha0, double beta, double gamma, double cg_tol, int cg_max,
         const std::string& fidelity, double fidelity_floor,
         std::optional<py::array_t<bool>> support, bool real_valued, const std::string& sign_re,
         const std::string& sign_im, std::uint64_t schedule_seed) {
        HoloData data;
        for (auto f : frames) data.frames.push_back(to_rimage(f.cast<py::array_t<double>>()));
        data.angles = std::move(angles);
        data.geom = make_geom(fresnel_number, 1.0, padding);
        KaczmarzConfig cfg;
        cfg.alpha0 = alpha0;
        cfg.beta = beta;
        cfg.gamma = gamma;
        cfg.cg_tol = cg_tol;
        cfg.cg_max = cg_max;
        if (fidelity == "poisson") {
          cfg.fidelity.kind = FidelityKind::poisson_quadratic;
          cfg.fidelity.I0 = fidelity_floor;
        } else if (fidelity != "l2") {
          throw ConfigError("fidelity must be 'l2' or 'poisson'");
        }
        cfg.constraints =
            make_constraints(support, std::nullopt, real_valued, sign_re, sign_im);
        WedgeSchedule sched = build_schedule(static_cast<int>(data.frames.size()), wedge_size,
                                             passes, WedgeOrder::sequential, schedule_seed);
        ReconResult res = kaczmarz_reconstruct(shape[0], shape[1], shape[2], data, sched, cfg,
                                               projection_scale);
        ComplexVolume vol(shape[0], shape[1], shape[2]);
        vol.storage() = std::move(res.final);
        return py::make_tuple(from_volume(vol), result_to_dict(res));
      },
      py::arg("frames"), py::arg("angles"), py::arg("fresnel_number"), py::arg("padding"),
      py::arg("shape"), py::arg("projection_scale") = 1.0, py::arg("wedge_size") = 6,
      py::arg("passes") = 2, py::arg("alpha0") = 0.0, py::arg("beta") = 0.001,
      py::arg("gamma") = -1.0, py::arg("cg_tol") = 1e-3, py::arg("cg_max") = 50,
      py::arg("fidelity") = "poisson", py::arg("fidelity_floor") = 0.1,
      py::arg("support") = std::nullopt, py::arg("real_valued") = true,
      py::arg("sign_re") = "nonnegative", py::arg("sign_im") = "none",
      py::arg("schedule_seed") = 0);

  m.def(
      "add_gaussian_noise",
      [](py::array_t<double> frame, double sigma, std::uint64_t seed) {
        NoiseModel model;
        model.kind = NoiseKind::gaussian;
        model.sigma = sigma;
        model.seed = seed;
        NoisyData noisy = add_noise(to_rimage(frame), model);
        return py::make_tuple(from_image(noisy.frames[0]), noisy.noise_norm);
      },
      py::arg("frame"), py::arg("sigma"), py::arg("seed") = 0);

  m.def(
      "add_poisson_noise",
      [](py::array_t<double> frame, double peak_flux, std::uint64_t seed) {
        NoiseModel model;
        model.kind = NoiseKind::poisson;
        model.peak_flux = peak_flux;
        model.seed = seed;
        NoisyData noisy = add_noise(to_rimage(frame), model);
        return py::make_tuple(from_image(noisy.frames[0]), noisy.noise_norm);
      },
      py::arg("frame"), py::arg("peak_flux"), py::arg("seed") = 0);

  m.def(
      "fsc",
      [](py::array_t<double> a, py::array_t<double> b, std::size_t n_shells) {
        FscCurve curve = fsc(to_rvolume(a), to_rvolume(b), n_shells);
        py::dict d;
        d["shell_centers"] = curve.shell_centers;
        d["correlation"] = curve.correlation;
        d["threshold"] = curve.threshold;
        d["shell_counts"] = curve.shell_counts;
        return d;
      },
      py::arg("a"), py::arg("b"), py::arg("n_shells") = 32);

  m.def(
      "formfactor_deconvolve",
      [](py::array_t<double> vol, double sphere_diameter, double smooth_fwhm, double reg) {
        return from_volume(
            formfactor_deconvolve(to_rvolume(vol), sphere_diameter, smooth_fwhm, reg));
      },
      py::arg("volume"), py::arg("sphere_diameter"), py::arg("smooth_fwhm") = 2.0,
      py::arg("reg") = 0.01);

  m.def(
      "locate_peaks",
      [](py::array_t<double> vol, double min_separation, double threshold_frac) {
        PeakSet peaks = locate_peaks(to_rvolume(vol), min_separation, threshold_frac);
        py::array_t<double> pos({peaks.count(), std::size_t{3}});
        auto w = pos.mutable_unchecked<2>();
        for (std::size_t i = 0; i < peaks.count(); ++i)
          for (std::size_t k = 0; k < 3; ++k)
            w(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(k)) = peaks.positions[i][k];
        return py::make_tuple(pos, peaks.amplitudes);
      },
      py::arg("volume"), py::arg("min_separation"), py::arg("threshold_frac") = 0.2);

  m.def(
      "random_packing",
      [](std::size_t count, std::array<std::size_t, 3> shape, double radius, double delta_value,
         double min_gap, std::uint64_t seed, double margin) {
        SpherePacking p = random_packing(count, shape[0], shape[1], shape[2], radius, delta_value,
                                         min_gap, seed, margin);
        py::array_t<double> centers({p.centers.size(), std::size_t{3}});
        auto w = centers.mutable_unchecked<2>();
        for (std::size_t i = 0; i < p.centers.size(); ++i)
          for (std::size_t k = 0; k < 3; ++k)
            w(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(k)) = p.centers[i][k];
        return centers;
      },
      py::arg("count"), py::arg("shape"), py::arg("radius"), py::arg("delta_value") = 1.0,
      py::arg("min_gap") = 1.0, py::arg("seed") = 0, py::arg("margin") = 2.0);

  m.def(
      "render_packing",
      [](py::array_t<double> centers, double radius, double delta_value,
         std::array<std::size_t, 3> shape) {
        SpherePacking p;
        p.radius = radius;
        p.delta_value = delta_value;
        auto r = centers.unchecked<2>();
        for (py::ssize_t i = 0; i < r.shape(0); ++i)
          p.centers.push_back({r(i, 0), r(i, 1), r(i, 2)});
        return from_volume(render_packing(p, shape[0], shape[1], shape[2]).v);
      },
      py::arg("centers"), py::arg("radius"), py::arg("delta_value"), py::arg("shape"));

  m.def("builtin_glyph", [] {
    const Image<std::uint8_t> g = builtin_glyph();
    return from_image(g);
  });

  m.def("half_bit_threshold", &half_bit_threshold, py::arg("shell_count"));
  m.def("sphere_form_factor", &sphere_form_factor, py::arg("u"));
}
