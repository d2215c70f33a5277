#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>

#include <CLI11.hpp>

#include "holoreg/analysis.hpp"
#include "holoreg/config.hpp"
#include "holoreg/threads.hpp"

namespace fs = std::filesystem;
using namespace holoreg;

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct CliArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
};

RunConfig load(const CliArgs& args) {
  RunConfig cfg = parse_run_config(args.config_path);
  if (args.seed) {
    cfg.seed = *args.seed;
    cfg.has_seed = true;
  }
  return cfg;
}

fs::path out_path(const CliArgs& args, const std::string& name) {
  fs::create_directories(args.out_dir);
  return fs::path(args.out_dir) / name;
}

std::uint64_t effective_seed(const RunConfig& cfg) { return cfg.has_seed ? cfg.seed : 0; }

ImagingGeometry require_geometry(const RunConfig& cfg, const Container& c) {
  if (cfg.geometry) return *cfg.geometry;
  if (!c.fresnel_number)
    throw DataError("no geometry: config has no 'geometry' section and the input container "
                    "carries no fresnel_number");
  ImagingGeometry g;
  g.fresnel_number = *c.fresnel_number;
  g.pixel_size = c.pixel_size_nm.value_or(1.0);
  g.padding = true;
  g.validate();
  return g;
}

void write_history(const fs::path& path, const ReconResult& res) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot open history log: " + path.string());
  out << "# step alpha gamma cg_iters residual\n";
  out << "0 - - - " << res.residual_history[0] << "\n";
  for (std::size_t k = 0; k < res.alpha_history.size(); ++k)
    out << (k + 1) << " " << res.alpha_history[k] << " " << res.gamma_history[k] << " "
        << res.cg_counts[k] << " " << res.residual_history[k + 1] << "\n";
  out << "# stop: " << [&] {
    switch (res.stop_reason) {
      case StopReason::discrepancy: return "discrepancy";
      case StopReason::plateau: return "plateau";
      case StopReason::max_iter: return "max_iter";
      case StopReason::diverged: return "diverged";
      case StopReason::consistent_start: return "consistent_start";
    }
    return "unknown";
  }() << "\n";
}

NoiseModel noise_with_seed(const RunConfig& cfg) {
  NoiseModel m = *cfg.noise;
  if (!cfg.noise_has_seed) m.seed = effective_seed(cfg);
  return m;
}

// --- simulate ---------------------------------------------------------------

int cmd_simulate(const CliArgs& args) {
  RunConfig cfg = load(args);
  if (!cfg.geometry) throw ConfigError("simulate needs a 'geometry' section");
  const std::string base = cfg.output.value_or("sim");

  if (cfg.phantom2d) {
    Object2D truth = render_phantom2d(*cfg.phantom2d);
    truth.pixel_size = cfg.geometry->pixel_size;
    RealImage holo = pc_forward(truth, *cfg.geometry);

    Container truth_c = Container::from_complex_image(truth.f);
    truth_c.pixel_size_nm = cfg.geometry->pixel_size;
    truth_c.fresnel_number = cfg.geometry->fresnel_number;
    write_container(out_path(args, base + "_phantom.json"), truth_c);

    double noise_norm = 0;
    if (cfg.noise) {
      NoisyData noisy = add_noise(holo, noise_with_seed(cfg));
      holo = std::move(noisy.frames[0]);
      noise_norm = noisy.noise_norm;
    }
    Container holo_c = Container::from_real_image(holo);
    holo_c.pixel_size_nm = cfg.geometry->pixel_size;
    holo_c.fresnel_number = cfg.geometry->fresnel_number;
    if (cfg.noise) holo_c.noise_norm = noise_norm;
    write_container(out_path(args, base + "_hologram.json"), holo_c);
    std::cout << "noise_norm " << noise_norm << "\n";
    return 0;
  }

  if (cfg.packing && cfg.tomo) {
    PackingConfig pconf = *cfg.packing;
    if (!pconf.has_seed) pconf.seed = effective_seed(cfg);
    SpherePacking packing = pconf.build();
    const auto [n0, n1, n2] = cfg.tomo->shape;
    Volume3D truth = render_packing(packing, n0, n1, n2);
    truth.voxel_size = cfg.geometry->pixel_size;

    Container truth_c = Container::from_complex_volume(truth.v);
    truth_c.pixel_size_nm = cfg.geometry->pixel_size;
    write_container(out_path(args, base + "_volume.json"), truth_c);

    {
      std::ofstream csv(out_path(args, base + "_centers.csv"));
      csv << "axis0,axis1,axis2\n";
      for (const auto& c : packing.centers) csv << c[0] << "," << c[1] << "," << c[2] << "\n";
    }

    std::vector<double> angles_rad;
    for (double deg : cfg.tomo->angles_deg) angles_rad.push_back(deg * kDegToRad);
    HoloData data = tomo_forward(truth, angles_rad, *cfg.geometry, cfg.tomo->projection_scale);

    double noise_norm = 0;
    if (cfg.noise) {
      NoisyData noisy = add_noise(data.frames, noise_with_seed(cfg));
      data.frames = std::move(noisy.frames);
      noise_norm = noisy.noise_norm;
    }
    Container stack = Container::from_frame_stack(data.frames);
    stack.pixel_size_nm = cfg.geometry->pixel_size;
    stack.fresnel_number = cfg.geometry->fresnel_number;
    stack.angles_deg = cfg.tomo->angles_deg;
    if (cfg.noise) stack.noise_norm = noise_norm;
    write_container(out_path(args, base + "_holograms.json"), stack);
    std::cout << "noise_norm " << noise_norm << "\n";
    return 0;
  }

  throw ConfigError("simulate needs either a 'phantom2d' or a 'packing' + 'tomo' section");
}

// --- reconstruct2d ----------------------------------------------------------

int cmd_reconstruct2d(const CliArgs& args) {
  RunConfig cfg = load(args);
  if (!cfg.input) throw ConfigError("reconstruct2d needs an 'input' hologram container");
  Container holo_c = read_container(*cfg.input);
  if (holo_c.shape.size() != 2) throw DataError("reconstruct2d expects a 2D hologram");
  RealImage holo = holo_c.as_real_image();
  ImagingGeometry geom = require_geometry(cfg, holo_c);
  const std::string base = cfg.output.value_or("recon2d");

  if (cfg.ctf.enabled) {
    if (!(cfg.ctf.ratio > 0)) throw ConfigError("'ctf.ratio' must be > 0 in ctf mode");
    RealImage phi = ctf_invert_homogeneous(holo, cfg.ctf.ratio, geom, cfg.ctf.alpha);
    Container phi_c = Container::from_real_image(phi);
    phi_c.pixel_size_nm = geom.pixel_size;
    phi_c.fresnel_number = geom.fresnel_number;
    write_container(out_path(args, base + "_phi.json"), phi_c);
    return 0;
  }

  SolverConfig solver = cfg.solver;
  solver.constraints = cfg.constraints.materialize({holo.rows(), holo.cols()});
  PhaseContrastOperator op(holo.rows(), holo.cols(), geom);
  ReconResult res = irgnm(op, holo.storage(), solver, {},
                          holo_c.noise_norm ? std::optional<double>(*holo_c.noise_norm)
                                            : std::nullopt);

  ComplexImage f(holo.rows(), holo.cols());
  f.storage() = res.final;
  Object2D obj(std::move(f), geom.pixel_size);
  Container obj_c = Container::from_complex_image(obj.f);
  obj_c.pixel_size_nm = geom.pixel_size;
  obj_c.fresnel_number = geom.fresnel_number;
  write_container(out_path(args, base + "_object.json"), obj_c);
  Container phi_c = Container::from_real_image(obj.phase());
  phi_c.pixel_size_nm = geom.pixel_size;
  write_container(out_path(args, base + "_phi.json"), phi_c);
  Container mu_c = Container::from_real_image(obj.absorption());
  mu_c.pixel_size_nm = geom.pixel_size;
  write_container(out_path(args, base + "_mu.json"), mu_c);
  write_history(out_path(args, base + "_history.txt"), res);
  std::cout << "newton_steps " << res.newton_count << " final_residual "
            << res.residual_history.back() << "\n";
  return 0;
}

// --- reconstruct-tomo -------------------------------------------------------

int cmd_reconstruct_tomo(const CliArgs& args) {
  RunConfig cfg = load(args);
  if (!cfg.input) throw ConfigError("reconstruct-tomo needs an 'input' hologram stack");
  if (!cfg.tomo) throw ConfigError("reconstruct-tomo needs a 'tomo' section (volume shape)");
  Container stack = read_container(*cfg.input);
  if (stack.shape.size() != 3) throw DataError("reconstruct-tomo expects a 3D frame stack");
  if (stack.angles_deg.empty())
    throw DataError("hologram stack carries no angles; cannot reconstruct");
  if (stack.angles_deg.size() != stack.shape[0])
    throw DataError("angle count does not match frame count");

  ImagingGeometry geom = require_geometry(cfg, stack);
  const auto [n0, n1, n2] = cfg.tomo->shape;
  if (stack.shape[1] != n0 || stack.shape[2] != n1)
    throw DataError("frame shape does not match tomo volume shape (expect frames n0 x n1)");

  HoloData data;
  data.frames = stack.as_frame_stack();
  for (double deg : stack.angles_deg) data.angles.push_back(deg * kDegToRad);
  data.geom = geom;
  if (stack.noise_norm) data.noise_norm = *stack.noise_norm;

  KaczmarzConfig kconf = cfg.kaczmarz;
  kconf.constraints = cfg.constraints.materialize({n0, n1, n2});
  const std::string base = cfg.output.value_or("tomo");

  auto run_subset = [&](const std::vector<int>& subset, const std::string& suffix) {
    HoloData sub;
    sub.geom = data.geom;
    for (int idx : subset) {
      sub.frames.push_back(data.frames[static_cast<std::size_t>(idx)]);
      sub.angles.push_back(data.angles[static_cast<std::size_t>(idx)]);
    }
    WedgeSchedule sched = build_schedule(
        static_cast<int>(sub.frames.size()), cfg.schedule_template.wedge_size,
        cfg.schedule_template.passes, cfg.schedule_template.order,
        cfg.schedule_has_seed ? cfg.schedule_template.seed : effective_seed(cfg));
    ReconResult res = kaczmarz_reconstruct(n0, n1, n2, sub, sched, kconf,
                                           cfg.tomo->projection_scale);
    ComplexVolume vol(n0, n1, n2);
    vol.storage() = res.final;
    Container vol_c = Container::from_complex_volume(vol);
    vol_c.pixel_size_nm = geom.pixel_size;
    write_container(out_path(args, base + suffix + "_volume.json"), vol_c);
    write_history(out_path(args, base + suffix + "_history.txt"), res);
    std::cout << "wedge_steps" << suffix << " " << res.newton_count << " final_residual "
              << res.residual_history.back() << "\n";
  };

  if (cfg.tomo->split_half) {
    std::vector<int> even, odd;
    for (int i = 0; i < static_cast<int>(data.frames.size()); ++i)
      (i % 2 == 0 ? even : odd).push_back(i);
    run_subset(even, "_half0");
    run_subset(odd, "_half1");
  } else {
    std::vector<int> all(data.frames.size());
    for (int i = 0; i < static_cast<int>(all.size()); ++i) all[i] = i;
    run_subset(all, "");
  }
  return 0;
}

// --- analyze ----------------------------------------------------------------

int cmd_analyze(const CliArgs& args) {
  RunConfig cfg = load(args);
  if (!cfg.analyze) throw ConfigError("analyze needs an 'analyze' section");
  const AnalyzeConfig& a = *cfg.analyze;
  if (!cfg.input) throw ConfigError("analyze needs an 'input' volume container");
  Container in_c = read_container(*cfg.input);
  const std::string base = cfg.output.value_or("analysis");

  auto to_real_volume = [](const Container& c) {
    if (c.shape.size() != 3) throw DataError("analyze expects 3D volume containers");
    RealVolume v(c.shape[0], c.shape[1], c.shape[2]);
    v.storage() = c.re;  // real part of complex reconstructions
    return v;
  };

  if (a.mode == "fsc") {
    if (!cfg.input_b) throw ConfigError("analyze fsc needs 'input_b'");
    Container b_c = read_container(*cfg.input_b);
    RealVolume va = to_real_volume(in_c), vb = to_real_volume(b_c);
    FscCurve curve = fsc(va, vb, a.n_shells);
    const double voxel = in_c.pixel_size_nm.value_or(a.voxel_size_nm);
    ResolutionEstimate est = resolution_from_fsc(curve, voxel);

    std::ofstream out(out_path(args, base + "_fsc.txt"));
    out << "# freq_cyc_per_voxel correlation half_bit_threshold\n";
    for (std::size_t s = 0; s < curve.correlation.size(); ++s)
      out << curve.shell_centers[s] << " " << curve.correlation[s] << " " << curve.threshold[s]
          << "\n";
    if (est.nyquist_limited) {
      out << "# resolution: Nyquist-limited\n";
      std::cout << "resolution Nyquist-limited\n";
    } else {
      out << "# resolution_half_period_nm: " << est.resolution << "\n";
      std::cout << "resolution_half_period_nm " << est.resolution << " crossing_freq "
                << est.crossing_freq << "\n";
    }
    return 0;
  }

  // localize
  if (!(a.sphere_diameter > 0))
    throw ConfigError("analyze localize needs 'analyze.sphere_diameter' > 0");
  RealVolume vol = to_real_volume(in_c);
  RealVolume score = formfactor_deconvolve(vol, a.sphere_diameter, a.smooth_fwhm, a.reg);
  const double min_sep = a.min_separation > 0 ? a.min_separation : a.sphere_diameter;
  PeakSet peaks = locate_peaks(score, min_sep, a.threshold_frac);
  const double voxel = in_c.pixel_size_nm.value_or(a.voxel_size_nm);

  std::ofstream csv(out_path(args, base + "_peaks.csv"));
  csv << "axis0_vox,axis1_vox,axis2_vox,axis0_nm,axis1_nm,axis2_nm,amplitude\n";
  for (std::size_t i = 0; i < peaks.count(); ++i) {
    const auto& p = peaks.positions[i];
    csv << p[0] << "," << p[1] << "," << p[2] << "," << p[0] * voxel << "," << p[1] * voxel
        << "," << p[2] * voxel << "," << peaks.amplitudes[i] << "\n";
  }
  std::cout << "peaks " << peaks.count() << "\n";
  return 0;
}

// --- export-image -----------------------------------------------------------

int cmd_export_image(const CliArgs& args) {
  RunConfig cfg = load(args);
  if (!cfg.input) throw ConfigError("export-image needs an 'input' container");
  Container c = read_container(*cfg.input);
  const std::string name = cfg.output.value_or("export.pgm");
  export_image(c, out_path(args, name), cfg.export_opts);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_threads_from_env();

  CLI::App app{"Near-field phase-contrast imaging: simulation, reconstruction, analysis"};
  app.require_subcommand(1);

  CliArgs args;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "JSON run configuration")->required();
    sub->add_option("--seed", args.seed, "override the config seed");
    sub->add_option("--out", args.out_dir, "output directory (default: .)");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "render a phantom and its hologram(s)");
  CLI::App* recon2d = app.add_subcommand("reconstruct2d", "IRGNM phase retrieval on one hologram");
  CLI::App* recon_tomo =
      app.add_subcommand("reconstruct-tomo", "Newton-Kaczmarz phase-contrast tomography");
  CLI::App* analyze = app.add_subcommand("analyze", "FSC curves or sphere localization");
  CLI::App* export_img = app.add_subcommand("export-image", "container to grayscale PGM");
  for (CLI::App* sub : {simulate, recon2d, recon_tomo, analyze, export_img}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(args);
    if (recon2d->parsed()) return cmd_reconstruct2d(args);
    if (recon_tomo->parsed()) return cmd_reconstruct_tomo(args);
    if (analyze->parsed()) return cmd_analyze(args);
    if (export_img->parsed()) return cmd_export_image(args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
