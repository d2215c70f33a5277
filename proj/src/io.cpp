#include "holoreg/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace holoreg {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "container payloads assume a little-endian host");

std::string dtype_name(DType d) {
  switch (d) {
    case DType::f32: return "f32";
    case DType::f64: return "f64";
    case DType::c64: return "c64";
    case DType::c128: return "c128";
  }
  throw DataError("dtype_name: unknown dtype");
}

DType dtype_from_name(const std::string& name) {
  if (name == "f32") return DType::f32;
  if (name == "f64") return DType::f64;
  if (name == "c64") return DType::c64;
  if (name == "c128") return DType::c128;
  throw DataError("unknown dtype: " + name);
}

std::size_t dtype_bytes(DType d) {
  switch (d) {
    case DType::f32: return 4;
    case DType::f64: return 8;
    case DType::c64: return 8;
    case DType::c128: return 16;
  }
  throw DataError("dtype_bytes: unknown dtype");
}

std::size_t Container::element_count() const {
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  return shape.empty() ? 0 : n;
}

RealImage Container::as_real_image() const {
  if (shape.size() != 2 || is_complex()) throw DataError("container is not a real 2D image");
  RealImage img(shape[0], shape[1]);
  img.storage() = re;
  return img;
}

ComplexImage Container::as_complex_image() const {
  if (shape.size() != 2 || !is_complex())
    throw DataError("container is not a complex 2D image");
  ComplexImage img(shape[0], shape[1]);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = cplx(re[i], im[i]);
  return img;
}

RealVolume Container::as_real_volume() const {
  if (shape.size() != 3 || is_complex()) throw DataError("container is not a real 3D volume");
  if (!angles_deg.empty()) throw DataError("container is a frame stack, not a volume");
  RealVolume vol(shape[0], shape[1], shape[2]);
  vol.storage() = re;
  return vol;
}

ComplexVolume Container::as_complex_volume() const {
  if (shape.size() != 3 || !is_complex())
    throw DataError("container is not a complex 3D volume");
  ComplexVolume vol(shape[0], shape[1], shape[2]);
  for (std::size_t i = 0; i < vol.size(); ++i) vol[i] = cplx(re[i], im[i]);
  return vol;
}

std::vector<RealImage> Container::as_frame_stack() const {
  if (shape.size() != 3 || is_complex()) throw DataError("container is not a frame stack");
  std::vector<RealImage> frames(shape[0]);
  const std::size_t px = shape[1] * shape[2];
  for (std::size_t a = 0; a < shape[0]; ++a) {
    RealImage img(shape[1], shape[2]);
    std::copy(re.begin() + static_cast<std::ptrdiff_t>(a * px),
              re.begin() + static_cast<std::ptrdiff_t>((a + 1) * px), img.storage().begin());
    frames[a] = std::move(img);
  }
  return frames;
}

Container Container::from_real_image(const RealImage& img, DType dtype) {
  Container c;
  c.shape = {img.rows(), img.cols()};
  c.dtype = dtype;
  c.axes = {"row", "col"};
  c.re = img.storage();
  return c;
}

Container Container::from_complex_image(const ComplexImage& img, DType dtype) {
  Container c;
  c.shape = {img.rows(), img.cols()};
  c.dtype = dtype;
  c.axes = {"row", "col"};
  c.re.resize(img.size());
  c.im.resize(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    c.re[i] = img[i].real();
    c.im[i] = img[i].imag();
  }
  return c;
}

Container Container::from_real_volume(const RealVolume& vol, DType dtype) {
  Container c;
  c.shape = {vol.dim0(), vol.dim1(), vol.dim2()};
  c.dtype = dtype;
  c.axes = {"rotation_axis", "horizontal", "optical_axis"};
  c.re = vol.storage();
  return c;
}

Container Container::from_complex_volume(const ComplexVolume& vol, DType dtype) {
  Container c;
  c.shape = {vol.dim0(), vol.dim1(), vol.dim2()};
  c.dtype = dtype;
  c.axes = {"rotation_axis", "horizontal", "optical_axis"};
  c.re.resize(vol.size());
  c.im.resize(vol.size());
  for (std::size_t i = 0; i < vol.size(); ++i) {
    c.re[i] = vol[i].real();
    c.im[i] = vol[i].imag();
  }
  return c;
}

Container Container::from_frame_stack(const std::vector<RealImage>& frames, DType dtype) {
  if (frames.empty()) throw DataError("from_frame_stack: no frames");
  Container c;
  c.shape = {frames.size(), frames[0].rows(), frames[0].cols()};
  c.dtype = dtype;
  c.axes = {"angle", "row", "col"};
  c.re.reserve(frames.size() * frames[0].size());
  for (const auto& f : frames) {
    if (!f.same_shape(frames[0])) throw DataError("from_frame_stack: frame shape mismatch");
    c.re.insert(c.re.end(), f.storage().begin(), f.storage().end());
  }
  return c;
}

namespace {

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
void append_le(std::string& buf, T value) {
  char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  buf.append(raw, sizeof(T));
}

}  // namespace

void write_container(const std::filesystem::path& path, const Container& c) {
  if (c.re.size() != c.element_count() || (c.is_complex() && c.im.size() != c.re.size()))
    throw DataError("write_container: payload size does not match shape");

  std::string payload;
  payload.reserve(c.element_count() * dtype_bytes(c.dtype));
  for (std::size_t i = 0; i < c.re.size(); ++i) {
    switch (c.dtype) {
      case DType::f32: append_le(payload, static_cast<float>(c.re[i])); break;
      case DType::f64: append_le(payload, c.re[i]); break;
      case DType::c64:
        append_le(payload, static_cast<float>(c.re[i]));
        append_le(payload, static_cast<float>(c.im[i]));
        break;
      case DType::c128:
        append_le(payload, c.re[i]);
        append_le(payload, c.im[i]);
        break;
    }
  }

  std::filesystem::path data_path = path;
  data_path.replace_extension(".bin");

  json meta;
  meta["format_version"] = c.format_version;
  meta["data_file"] = data_path.filename().string();
  meta["shape"] = c.shape;
  meta["dtype"] = dtype_name(c.dtype);
  meta["axes"] = c.axes;
  meta["byte_order"] = "little";
  meta["layout"] = "row_major";
  if (c.pixel_size_nm) meta["pixel_size_nm"] = *c.pixel_size_nm;
  if (c.fresnel_number) meta["fresnel_number"] = *c.fresnel_number;
  if (!c.angles_deg.empty()) meta["angles_deg"] = c.angles_deg;
  if (c.noise_norm) meta["noise_norm"] = *c.noise_norm;

  atomic_write(data_path, payload);
  atomic_write(path, meta.dump(2) + "\n");
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream meta_in(path);
  if (!meta_in) throw DataError("cannot open container: " + path.string());
  json meta;
  try {
    meta_in >> meta;
  } catch (const json::exception& e) {
    throw DataError("malformed container sidecar " + path.string() + ": " + e.what());
  }

  Container c;
  try {
    c.format_version = meta.at("format_version").get<int>();
    c.shape = meta.at("shape").get<std::vector<std::size_t>>();
    c.dtype = dtype_from_name(meta.at("dtype").get<std::string>());
    c.axes = meta.value("axes", std::vector<std::string>{});
    if (meta.contains("pixel_size_nm")) c.pixel_size_nm = meta["pixel_size_nm"].get<double>();
    if (meta.contains("fresnel_number")) c.fresnel_number = meta["fresnel_number"].get<double>();
    if (meta.contains("angles_deg")) c.angles_deg = meta["angles_deg"].get<std::vector<double>>();
    if (meta.contains("noise_norm")) c.noise_norm = meta["noise_norm"].get<double>();
  } catch (const json::exception& e) {
    throw DataError("invalid container metadata in " + path.string() + ": " + e.what());
  }

  const std::filesystem::path data_path =
      path.parent_path() / meta.at("data_file").get<std::string>();
  std::ifstream data_in(data_path, std::ios::binary);
  if (!data_in) throw DataError("cannot open payload: " + data_path.string());
  std::string payload((std::istreambuf_iterator<char>(data_in)),
                      std::istreambuf_iterator<char>());

  const std::size_t n = c.element_count();
  if (payload.size() != n * dtype_bytes(c.dtype))
    throw DataError("payload byte length does not match shape x dtype: " + data_path.string());

  c.re.resize(n);
  if (c.is_complex()) c.im.resize(n);
  const char* p = payload.data();
  auto take = [&p](auto& dst) {
    std::memcpy(&dst, p, sizeof(dst));
    p += sizeof(dst);
  };
  for (std::size_t i = 0; i < n; ++i) {
    switch (c.dtype) {
      case DType::f32: {
        float v;
        take(v);
        c.re[i] = v;
        break;
      }
      case DType::f64: take(c.re[i]); break;
      case DType::c64: {
        float a, b;
        take(a);
        take(b);
        c.re[i] = a;
        c.im[i] = b;
        break;
      }
      case DType::c128:
        take(c.re[i]);
        take(c.im[i]);
        break;
    }
  }
  return c;
}

void export_image(const Container& c, const std::filesystem::path& path,
                  const ExportOptions& opts) {
  if (opts.bits != 8 && opts.bits != 16) throw ConfigError("export_image: bits must be 8 or 16");
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  if (c.shape.size() == 2) {
    rows = c.shape[0];
    cols = c.shape[1];
    values = c.re;
  } else if (c.shape.size() == 3) {
    if (!opts.slice) throw DataError("export_image: 3D container needs a slice index");
    if (*opts.slice >= c.shape[0]) throw DataError("export_image: slice index out of range");
    rows = c.shape[1];
    cols = c.shape[2];
    const std::size_t px = rows * cols;
    values.assign(c.re.begin() + static_cast<std::ptrdiff_t>(*opts.slice * px),
                  c.re.begin() + static_cast<std::ptrdiff_t>((*opts.slice + 1) * px));
  } else {
    throw DataError("export_image: container is not 2D and has no slice index");
  }

  double lo, hi;
  if (opts.percentile) {
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    auto pick = [&](double pct) {
      const double idx = pct / 100.0 * static_cast<double>(sorted.size() - 1);
      return sorted[static_cast<std::size_t>(std::llround(idx))];
    };
    lo = pick(opts.lo);
    hi = pick(opts.hi);
  } else {
    lo = *std::min_element(values.begin(), values.end());
    hi = *std::max_element(values.begin(), values.end());
  }

  const long maxval = opts.bits == 8 ? 255 : 65535;
  const bool degenerate = !(hi > lo);
  std::string body;
  body += "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n" +
          std::to_string(maxval) + "\n";
  for (double v : values) {
    long q;
    if (degenerate) {
      q = maxval / 2;  // constant image maps to mid-gray
    } else {
      const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
      q = std::lround(t * static_cast<double>(maxval));
    }
    if (opts.bits == 8) {
      body.push_back(static_cast<char>(q));
    } else {
      body.push_back(static_cast<char>(q >> 8));  // PGM 16-bit is big-endian
      body.push_back(static_cast<char>(q & 0xff));
    }
  }
  atomic_write(path, body);

  std::string sidecar;
  sidecar += "source_shape:";
  for (std::size_t s : c.shape) sidecar += " " + std::to_string(s);
  sidecar += "\nnormalization: " + std::string(opts.percentile ? "percentile" : "minmax");
  if (opts.percentile)
    sidecar += " " + std::to_string(opts.lo) + " " + std::to_string(opts.hi);
  sidecar += "\nrange_lo: " + std::to_string(lo) + "\nrange_hi: " + std::to_string(hi);
  sidecar += "\nbits: " + std::to_string(opts.bits);
  if (degenerate) sidecar += "\ndegenerate_range: mapped to mid-gray";
  if (opts.slice) sidecar += "\nslice: " + std::to_string(*opts.slice);
  sidecar += "\n";
  atomic_write(path.string() + ".txt", sidecar);
}

}  // namespace holoreg
