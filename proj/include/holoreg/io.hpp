#ifndef HOLOREG_IO_HPP
#define HOLOREG_IO_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "holoreg/operators.hpp"

namespace holoreg {

enum class DType { f32, f64, c64, c128 };

std::string dtype_name(DType d);
DType dtype_from_name(const std::string& name);
std::size_t dtype_bytes(DType d);

// N-dimensional array with a little-endian binary payload and a JSON
// sidecar carrying shape, dtype and imaging metadata. The sidecar path is
// the container's canonical path; it references the payload file.
struct Container {
  std::vector<std::size_t> shape;
  DType dtype = DType::f64;
  std::vector<std::string> axes;
  // Values stored as doubles regardless of on-disk precision; imaginary
  // part unused for real dtypes.
  std::vector<double> re, im;

  std::optional<double> pixel_size_nm;
  std::optional<double> fresnel_number;
  std::vector<double> angles_deg;
  std::optional<double> noise_norm;
  int format_version = 1;

  std::size_t element_count() const;

  bool is_complex() const { return dtype == DType::c64 || dtype == DType::c128; }

  RealImage as_real_image() const;
  ComplexImage as_complex_image() const;
  RealVolume as_real_volume() const;
  ComplexVolume as_complex_volume() const;
  std::vector<RealImage> as_frame_stack() const;

  static Container from_real_image(const RealImage& img, DType dtype = DType::f64);
  static Container from_complex_image(const ComplexImage& img, DType dtype = DType::c128);
  static Container from_real_volume(const RealVolume& vol, DType dtype = DType::f64);
  static Container from_complex_volume(const ComplexVolume& vol, DType dtype = DType::c128);
  static Container from_frame_stack(const std::vector<RealImage>& frames,
                                    DType dtype = DType::f64);
};

// Writes <path> (JSON sidecar) and the payload next to it, atomically
// (write-temp-then-rename). `path` should end in .json.
void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

// Grayscale PGM export with min-max or percentile normalization; writes a
// sidecar .txt documenting the normalization.
struct ExportOptions {
  bool percentile = false;
  double lo = 1.0, hi = 99.0;  // percentile bounds
  int bits = 8;                // 8 or 16
  std::optional<std::size_t> slice;  // axis-0 slice for 3D containers
};
void export_image(const Container& c, const std::filesystem::path& path,
                  const ExportOptions& opts);

}  // namespace holoreg

#endif
