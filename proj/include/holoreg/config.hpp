#ifndef HOLOREG_CONFIG_HPP
#define HOLOREG_CONFIG_HPP

#include <filesystem>
#include <optional>
#include <string>

#include "holoreg/io.hpp"
#include "holoreg/kaczmarz.hpp"
#include "holoreg/phantom.hpp"

namespace holoreg {

// Disc/cylinder support and algebraic constraints, materialized into a
// ConstraintSpec once the grid shape is known.
struct ConstraintConfig {
  std::string support = "none";  // none | disc (cylinder about axis 0 in 3D)
  double support_radius = 0;     // pixels; <= 0 means inscribed
  std::optional<std::array<double, 2>> support_center;
  bool real_valued = false;
  std::optional<double> homogeneous_ratio;
  SignConstraint sign_re = SignConstraint::none;
  SignConstraint sign_im = SignConstraint::none;

  ConstraintSpec materialize(const std::vector<std::size_t>& shape) const;
};

struct TomoSetup {
  std::array<std::size_t, 3> shape = {0, 0, 0};
  std::vector<double> angles_deg;
  double projection_scale = 1.0;
  bool split_half = false;
};

struct PackingConfig {
  std::string kind = "random";  // random | hcp
  std::size_t count = 0;        // random only
  std::array<std::size_t, 3> shape = {0, 0, 0};
  double radius = 0;
  double delta = 0;
  double min_gap = 1.0;
  double margin = 2.0;
  std::uint64_t seed = 0;
  bool has_seed = false;

  SpherePacking build() const;
};

struct AnalyzeConfig {
  std::string mode;  // fsc | localize
  std::size_t n_shells = 32;
  double voxel_size_nm = 1.0;
  double sphere_diameter = 0;
  double smooth_fwhm = 2.0;
  double reg = 0.01;
  double min_separation = 0;  // <= 0: sphere_diameter
  double threshold_frac = 0.2;
};

struct CtfConfig {
  bool enabled = false;
  double ratio = 0;
  double alpha = 0.01;
};

// One structured-text (JSON) file per run; unknown keys are rejected with
// the offending key named. Defaults are listed in the README.
struct RunConfig {
  std::optional<std::string> input, input_b, output;
  std::uint64_t seed = 0;
  bool has_seed = false;

  std::optional<ImagingGeometry> geometry;
  std::optional<PhantomSpec2D> phantom2d;
  std::optional<PackingConfig> packing;
  std::optional<TomoSetup> tomo;
  std::optional<NoiseModel> noise;
  bool noise_has_seed = false;

  SolverConfig solver;
  bool has_solver = false;
  KaczmarzConfig kaczmarz;
  WedgeSchedule schedule_template;  // wedge_size/passes/order/seed only
  bool schedule_has_seed = false;
  bool has_kaczmarz = false;

  ConstraintConfig constraints;
  CtfConfig ctf;
  std::optional<AnalyzeConfig> analyze;
  ExportOptions export_opts;
};

RunConfig parse_run_config(const std::filesystem::path& path);

}  // namespace holoreg

#endif
