#include "holoreg/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace holoreg {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!ok.count(it.key()))
      throw ConfigError("unknown config key '" + section + "." + it.key() + "'");
}

SignConstraint parse_sign(const json& v, const std::string& where) {
  const std::string s = v.get<std::string>();
  if (s == "none") return SignConstraint::none;
  if (s == "nonnegative") return SignConstraint::nonnegative;
  if (s == "nonpositive") return SignConstraint::nonpositive;
  throw ConfigError("invalid value for '" + where + "': " + s);
}

template <typename T, std::size_t N>
std::array<T, N> parse_array(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != N)
    throw ConfigError("'" + where + "' must be an array of " + std::to_string(N) + " values");
  std::array<T, N> out;
  for (std::size_t i = 0; i < N; ++i) out[i] = v[i].get<T>();
  return out;
}

ImagingGeometry parse_geometry(const json& j) {
  check_keys(j, "geometry",
             {"fresnel_number", "pixel_size_nm", "defocus_nm", "wavenumber", "padding"});
  ImagingGeometry g;
  g.fresnel_number = j.at("fresnel_number").get<double>();
  g.pixel_size = j.value("pixel_size_nm", 1.0);
  if (j.contains("defocus_nm")) g.defocus = j["defocus_nm"].get<double>();
  if (j.contains("wavenumber")) g.wavenumber = j["wavenumber"].get<double>();
  g.padding = j.value("padding", true);
  g.validate();
  return g;
}

PhantomSpec2D parse_phantom2d(const json& j) {
  check_keys(j, "phantom2d", {"rows", "cols", "elements"});
  PhantomSpec2D spec;
  spec.rows = j.at("rows").get<std::size_t>();
  spec.cols = j.at("cols").get<std::size_t>();
  if (!j.at("elements").is_array()) throw ConfigError("'phantom2d.elements' must be an array");
  int idx = 0;
  for (const json& e : j["elements"]) {
    const std::string where = "phantom2d.elements[" + std::to_string(idx++) + "]";
    if (!e.is_object() || !e.contains("type"))
      throw ConfigError("'" + where + "' needs a 'type'");
    const std::string type = e["type"].get<std::string>();
    if (type == "disc") {
      check_keys(e, where, {"type", "center_row", "center_col", "radius", "phi", "mu"});
      DiscElement d;
      d.center_row = e.at("center_row").get<double>();
      d.center_col = e.at("center_col").get<double>();
      d.radius = e.at("radius").get<double>();
      d.phi = e.value("phi", 0.0);
      d.mu = e.value("mu", 0.0);
      spec.elements.emplace_back(d);
    } else if (type == "rect") {
      check_keys(e, where, {"type", "row0", "col0", "row1", "col1", "phi", "mu"});
      RectElement r;
      r.row0 = e.at("row0").get<double>();
      r.col0 = e.at("col0").get<double>();
      r.row1 = e.at("row1").get<double>();
      r.col1 = e.at("col1").get<double>();
      r.phi = e.value("phi", 0.0);
      r.mu = e.value("mu", 0.0);
      spec.elements.emplace_back(r);
    } else if (type == "glyph") {
      check_keys(e, where, {"type", "center_row", "center_col", "scale", "phi", "mu"});
      GlyphElement g;
      g.bitmap = builtin_glyph();
      g.center_row = e.at("center_row").get<double>();
      g.center_col = e.at("center_col").get<double>();
      g.scale = e.value("scale", 1.0);
      g.phi = e.value("phi", 0.0);
      g.mu = e.value("mu", 0.0);
      spec.elements.emplace_back(g);
    } else {
      throw ConfigError("unknown phantom element type '" + type + "' in " + where);
    }
  }
  return spec;
}

PackingConfig parse_packing(const json& j) {
  check_keys(j, "packing",
             {"kind", "count", "shape", "radius", "delta", "min_gap", "margin", "seed"});
  PackingConfig p;
  p.kind = j.value("kind", std::string("random"));
  if (p.kind != "random" && p.kind != "hcp")
    throw ConfigError("'packing.kind' must be 'random' or 'hcp'");
  p.count = j.value("count", std::size_t{0});
  p.shape = parse_array<std::size_t, 3>(j.at("shape"), "packing.shape");
  p.radius = j.at("radius").get<double>();
  p.delta = j.at("delta").get<double>();
  p.min_gap = j.value("min_gap", 1.0);
  p.margin = j.value("margin", 2.0);
  if (j.contains("seed")) {
    p.seed = j["seed"].get<std::uint64_t>();
    p.has_seed = true;
  }
  if (p.kind == "random" && p.count == 0)
    throw ConfigError("'packing.count' required for random packings");
  return p;
}

TomoSetup parse_tomo(const json& j) {
  check_keys(j, "tomo", {"shape", "angles_deg", "angle_count", "angle_start_deg",
                         "angle_end_deg", "projection_scale", "split_half"});
  TomoSetup t;
  t.shape = parse_array<std::size_t, 3>(j.at("shape"), "tomo.shape");
  if (j.contains("angles_deg")) {
    t.angles_deg = j["angles_deg"].get<std::vector<double>>();
  } else if (j.contains("angle_count")) {
    const auto n = j["angle_count"].get<std::size_t>();
    const double a0 = j.value("angle_start_deg", 0.0);
    const double a1 = j.value("angle_end_deg", 180.0);
    if (n < 1) throw ConfigError("'tomo.angle_count' must be >= 1");
    for (std::size_t i = 0; i < n; ++i)
      t.angles_deg.push_back(a0 + (a1 - a0) * static_cast<double>(i) / static_cast<double>(n));
  }
  t.projection_scale = j.value("projection_scale", 1.0);
  t.split_half = j.value("split_half", false);
  return t;
}

NoiseModel parse_noise(const json& j, bool* has_seed) {
  check_keys(j, "noise", {"kind", "sigma", "peak_flux", "seed"});
  NoiseModel m;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") {
    m.kind = NoiseKind::gaussian;
    m.sigma = j.at("sigma").get<double>();
  } else if (kind == "poisson") {
    m.kind = NoiseKind::poisson;
    m.peak_flux = j.at("peak_flux").get<double>();
  } else if (kind == "none") {
    m.kind = NoiseKind::gaussian;
    m.sigma = 0;
  } else {
    throw ConfigError("'noise.kind' must be gaussian, poisson or none");
  }
  if (j.contains("seed")) {
    m.seed = j["seed"].get<std::uint64_t>();
    *has_seed = true;
  }
  return m;
}

GramianSpec parse_gram(const json& j, const std::string& where) {
  if (j.is_string()) {
    if (j.get<std::string>() == "identity") return GramianSpec::identity();
    throw ConfigError("'" + where + "' must be 'identity' or a sobolev exponent");
  }
  return GramianSpec::sobolev(j.get<double>());
}

FidelitySpec parse_fidelity(const json& j, const std::string& section, FidelitySpec base) {
  if (j.contains("fidelity")) {
    const std::string kind = j["fidelity"].get<std::string>();
    if (kind == "l2")
      base.kind = FidelityKind::l2;
    else if (kind == "poisson")
      base.kind = FidelityKind::poisson_quadratic;
    else
      throw ConfigError("'" + section + ".fidelity' must be 'l2' or 'poisson'");
  }
  base.I0 = j.value("fidelity_floor", base.I0);
  return base;
}

SolverConfig parse_solver(const json& j) {
  check_keys(j, "solver",
             {"alpha0", "alpha_reduction", "tau", "max_newton", "cg_tol", "cg_max", "sobolev_s",
              "fidelity", "fidelity_floor", "gamma", "gamma_im", "escalate_gamma", "clip_re",
              "clip_im",
              "stop_rule", "plateau_fraction"});
  SolverConfig s;
  s.alpha0 = j.value("alpha0", s.alpha0);
  s.alpha_reduction = j.value("alpha_reduction", s.alpha_reduction);
  s.tau = j.value("tau", s.tau);
  s.max_newton = j.value("max_newton", s.max_newton);
  s.cg_tol = j.value("cg_tol", s.cg_tol);
  s.cg_max = j.value("cg_max", s.cg_max);
  if (j.contains("sobolev_s")) s.gram_X = parse_gram(j["sobolev_s"], "solver.sobolev_s");
  s.fidelity = parse_fidelity(j, "solver", s.fidelity);
  s.gamma = j.value("gamma", s.gamma);
  s.gamma_im = j.value("gamma_im", s.gamma_im);
  s.escalate_gamma = j.value("escalate_gamma", s.escalate_gamma);
  s.clip_re = j.value("clip_re", s.clip_re);
  s.clip_im = j.value("clip_im", s.clip_im);
  if (j.contains("stop_rule")) {
    const std::string rule = j["stop_rule"].get<std::string>();
    if (rule == "discrepancy")
      s.stop_rule = StopRule::discrepancy;
    else if (rule == "plateau")
      s.stop_rule = StopRule::plateau;
    else if (rule == "max_iter")
      s.stop_rule = StopRule::max_iter;
    else
      throw ConfigError("'solver.stop_rule' must be discrepancy, plateau or max_iter");
  }
  s.plateau_fraction = j.value("plateau_fraction", s.plateau_fraction);
  return s;
}

void parse_kaczmarz(const json& j, KaczmarzConfig* k, WedgeSchedule* sched, bool* sched_seeded) {
  check_keys(j, "kaczmarz",
             {"alpha0", "beta", "gamma", "cg_tol", "cg_max", "sobolev_s", "fidelity",
              "fidelity_floor", "wedge_size", "passes", "order", "schedule_seed"});
  k->alpha0 = j.value("alpha0", k->alpha0);
  k->beta = j.value("beta", k->beta);
  k->gamma = j.value("gamma", k->gamma);
  k->cg_tol = j.value("cg_tol", k->cg_tol);
  k->cg_max = j.value("cg_max", k->cg_max);
  if (j.contains("sobolev_s")) k->gram_X = parse_gram(j["sobolev_s"], "kaczmarz.sobolev_s");
  k->fidelity = parse_fidelity(j, "kaczmarz", k->fidelity);
  sched->wedge_size = j.value("wedge_size", sched->wedge_size);
  sched->passes = j.value("passes", sched->passes);
  if (j.contains("order")) {
    const std::string order = j["order"].get<std::string>();
    if (order == "sequential")
      sched->order = WedgeOrder::sequential;
    else if (order == "random")
      sched->order = WedgeOrder::random;
    else
      throw ConfigError("'kaczmarz.order' must be sequential or random");
  }
  if (j.contains("schedule_seed")) {
    sched->seed = j["schedule_seed"].get<std::uint64_t>();
    *sched_seeded = true;
  }
}

ConstraintConfig parse_constraints(const json& j) {
  check_keys(j, "constraints", {"support", "support_radius", "support_center", "real_valued",
                                "homogeneous_ratio", "sign_re", "sign_im"});
  ConstraintConfig c;
  c.support = j.value("support", std::string("none"));
  if (c.support != "none" && c.support != "disc")
    throw ConfigError("'constraints.support' must be 'none' or 'disc'");
  c.support_radius = j.value("support_radius", 0.0);
  if (j.contains("support_center"))
    c.support_center = parse_array<double, 2>(j["support_center"], "constraints.support_center");
  c.real_valued = j.value("real_valued", false);
  if (j.contains("homogeneous_ratio")) c.homogeneous_ratio = j["homogeneous_ratio"].get<double>();
  if (j.contains("sign_re")) c.sign_re = parse_sign(j["sign_re"], "constraints.sign_re");
  if (j.contains("sign_im")) c.sign_im = parse_sign(j["sign_im"], "constraints.sign_im");
  return c;
}

CtfConfig parse_ctf(const json& j) {
  check_keys(j, "ctf", {"enabled", "ratio", "alpha"});
  CtfConfig c;
  c.enabled = j.value("enabled", false);
  c.ratio = j.value("ratio", 0.0);
  c.alpha = j.value("alpha", 0.01);
  return c;
}

AnalyzeConfig parse_analyze(const json& j) {
  check_keys(j, "analyze", {"mode", "n_shells", "voxel_size_nm", "sphere_diameter",
                            "smooth_fwhm", "reg", "min_separation", "threshold_frac"});
  AnalyzeConfig a;
  a.mode = j.at("mode").get<std::string>();
  if (a.mode != "fsc" && a.mode != "localize")
    throw ConfigError("'analyze.mode' must be 'fsc' or 'localize'");
  a.n_shells = j.value("n_shells", a.n_shells);
  a.voxel_size_nm = j.value("voxel_size_nm", a.voxel_size_nm);
  a.sphere_diameter = j.value("sphere_diameter", a.sphere_diameter);
  a.smooth_fwhm = j.value("smooth_fwhm", a.smooth_fwhm);
  a.reg = j.value("reg", a.reg);
  a.min_separation = j.value("min_separation", a.min_separation);
  a.threshold_frac = j.value("threshold_frac", a.threshold_frac);
  return a;
}

ExportOptions parse_export(const json& j) {
  check_keys(j, "export", {"normalization", "lo", "hi", "bits", "slice"});
  ExportOptions e;
  if (j.contains("normalization")) {
    const std::string norm = j["normalization"].get<std::string>();
    if (norm == "percentile")
      e.percentile = true;
    else if (norm == "minmax")
      e.percentile = false;
    else
      throw ConfigError("'export.normalization' must be 'minmax' or 'percentile'");
  }
  e.lo = j.value("lo", e.lo);
  e.hi = j.value("hi", e.hi);
  e.bits = j.value("bits", e.bits);
  if (j.contains("slice")) e.slice = j["slice"].get<std::size_t>();
  return e;
}

}  // namespace

SpherePacking PackingConfig::build() const {
  if (kind == "hcp") return hcp_packing(shape[0], shape[1], shape[2], radius, delta);
  return random_packing(count, shape[0], shape[1], shape[2], radius, delta, min_gap, seed,
                        margin);
}

ConstraintSpec ConstraintConfig::materialize(const std::vector<std::size_t>& shape) const {
  ConstraintSpec spec;
  spec.real_valued = real_valued;
  spec.homogeneous_ratio = homogeneous_ratio;
  spec.sign_re = sign_re;
  spec.sign_im = sign_im;
  if (support == "disc") {
    if (shape.size() != 2 && shape.size() != 3)
      throw ConfigError("disc support needs a 2D or 3D grid");
    // For volumes the disc lives in the (axis 1, axis 2) plane and extends
    // along the rotation axis.
    const std::size_t rows = shape[shape.size() - 2], cols = shape[shape.size() - 1];
    const double cr = support_center ? (*support_center)[0]
                                     : 0.5 * static_cast<double>(rows - 1);
    const double cc = support_center ? (*support_center)[1]
                                     : 0.5 * static_cast<double>(cols - 1);
    const double r = support_radius > 0
                         ? support_radius
                         : 0.5 * static_cast<double>(std::min(rows, cols)) - 1.0;
    std::vector<char> plane(rows * cols, 0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        const double dr = static_cast<double>(i) - cr, dc = static_cast<double>(j) - cc;
        plane[i * cols + j] = (dr * dr + dc * dc <= r * r) ? 1 : 0;
      }
    if (shape.size() == 2) {
      spec.support_mask = std::move(plane);
    } else {
      spec.support_mask.resize(shape[0] * rows * cols);
      for (std::size_t a = 0; a < shape[0]; ++a)
        std::copy(plane.begin(), plane.end(), spec.support_mask.begin() + a * plane.size());
    }
  }
  return spec;
}

RunConfig parse_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  check_keys(j, "<root>",
             {"input", "input_b", "output", "seed", "geometry", "phantom2d", "packing", "tomo",
              "noise", "solver", "kaczmarz", "constraints", "ctf", "analyze", "export"});

  RunConfig cfg;
  try {
    if (j.contains("input")) cfg.input = j["input"].get<std::string>();
    if (j.contains("input_b")) cfg.input_b = j["input_b"].get<std::string>();
    if (j.contains("output")) cfg.output = j["output"].get<std::string>();
    if (j.contains("seed")) {
      cfg.seed = j["seed"].get<std::uint64_t>();
      cfg.has_seed = true;
    }
    if (j.contains("geometry")) cfg.geometry = parse_geometry(j["geometry"]);
    if (j.contains("phantom2d")) cfg.phantom2d = parse_phantom2d(j["phantom2d"]);
    if (j.contains("packing")) cfg.packing = parse_packing(j["packing"]);
    if (j.contains("tomo")) cfg.tomo = parse_tomo(j["tomo"]);
    if (j.contains("noise")) cfg.noise = parse_noise(j["noise"], &cfg.noise_has_seed);
    if (j.contains("solver")) {
      cfg.solver = parse_solver(j["solver"]);
      cfg.has_solver = true;
    }
    if (j.contains("kaczmarz")) {
      parse_kaczmarz(j["kaczmarz"], &cfg.kaczmarz, &cfg.schedule_template,
                     &cfg.schedule_has_seed);
      cfg.has_kaczmarz = true;
    }
    if (j.contains("constraints")) cfg.constraints = parse_constraints(j["constraints"]);
    if (j.contains("ctf")) cfg.ctf = parse_ctf(j["ctf"]);
    if (j.contains("analyze")) cfg.analyze = parse_analyze(j["analyze"]);
    if (j.contains("export")) cfg.export_opts = parse_export(j["export"]);
  } catch (const json::exception& e) {
    throw ConfigError("invalid config value in " + path.string() + ": " + e.what());
  }
  return cfg;
}

}  // namespace holoreg
