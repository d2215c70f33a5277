#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "holoreg/io.hpp"
#include "holoreg/rng.hpp"

using namespace holoreg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "holoreg_io_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("dtype names and sizes round-trip") {
  for (DType d : {DType::f32, DType::f64, DType::c64, DType::c128})
    CHECK(dtype_from_name(dtype_name(d)) == d);
  CHECK(dtype_bytes(DType::f32) == 4);
  CHECK(dtype_bytes(DType::f64) == 8);
  CHECK(dtype_bytes(DType::c64) == 8);
  CHECK(dtype_bytes(DType::c128) == 16);
  CHECK_THROWS_AS(dtype_from_name("i32"), DataError);
}

TEST_CASE("f64 and c128 containers round-trip exactly") {
  Rng rng(3);
  ComplexImage img(9, 7);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = cplx(rng.normal(), rng.normal());

  const fs::path p = temp_dir() / "c128.json";
  write_container(p, Container::from_complex_image(img));
  Container back = read_container(p);
  CHECK(back.dtype == DType::c128);
  CHECK(back.shape == std::vector<std::size_t>({9, 7}));
  ComplexImage img2 = back.as_complex_image();
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(img[i] == img2[i]);

  RealImage real(5, 6);
  for (std::size_t i = 0; i < real.size(); ++i) real[i] = rng.normal();
  const fs::path q = temp_dir() / "f64.json";
  write_container(q, Container::from_real_image(real));
  RealImage real2 = read_container(q).as_real_image();
  for (std::size_t i = 0; i < real.size(); ++i) CHECK(real[i] == real2[i]);
}

TEST_CASE("f32 and c64 containers round-trip with single precision") {
  Rng rng(4);
  RealVolume vol(4, 5, 6);
  for (std::size_t i = 0; i < vol.size(); ++i) vol[i] = rng.normal();
  const fs::path p = temp_dir() / "f32.json";
  write_container(p, Container::from_real_volume(vol, DType::f32));
  RealVolume vol2 = read_container(p).as_real_volume();
  for (std::size_t i = 0; i < vol.size(); ++i) {
    CHECK(vol2[i] == static_cast<double>(static_cast<float>(vol[i])));
    CHECK(vol2[i] == doctest::Approx(vol[i]).epsilon(1e-6));
  }

  ComplexVolume cv(3, 4, 5);
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = cplx(rng.normal(), rng.normal());
  const fs::path q = temp_dir() / "c64.json";
  write_container(q, Container::from_complex_volume(cv, DType::c64));
  ComplexVolume cv2 = read_container(q).as_complex_volume();
  for (std::size_t i = 0; i < cv.size(); ++i) {
    // volatile defeats a gcc -O3 misoptimization that skips the float rounding
    volatile float fr = static_cast<float>(cv[i].real());
    volatile float fi = static_cast<float>(cv[i].imag());
    const cplx want(fr, fi);
    CHECK(cv2[i] == want);
  }
}

TEST_CASE("frame stacks keep per-frame order and metadata") {
  std::vector<RealImage> frames;
  for (int a = 0; a < 3; ++a) {
    RealImage f(4, 4);
    for (std::size_t i = 0; i < f.size(); ++i)
      f[i] = a * 100.0 + static_cast<double>(i);
    frames.push_back(f);
  }
  Container c = Container::from_frame_stack(frames);
  c.pixel_size_nm = 12.5;
  c.fresnel_number = 0.004;
  c.angles_deg = {0.0, 60.0, 120.0};
  c.noise_norm = 1.75;
  const fs::path p = temp_dir() / "stack.json";
  write_container(p, c);

  Container back = read_container(p);
  REQUIRE(back.pixel_size_nm.has_value());
  CHECK(*back.pixel_size_nm == 12.5);
  REQUIRE(back.fresnel_number.has_value());
  CHECK(*back.fresnel_number == 0.004);
  CHECK(back.angles_deg == std::vector<double>({0.0, 60.0, 120.0}));
  REQUIRE(back.noise_norm.has_value());
  CHECK(*back.noise_norm == 1.75);
  std::vector<RealImage> frames2 = back.as_frame_stack();
  REQUIRE(frames2.size() == 3);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t i = 0; i < frames[a].size(); ++i) CHECK(frames2[a][i] == frames[a][i]);
}

TEST_CASE("sidecar is valid json and the payload lives next to it") {
  RealImage img(3, 3, 1.0);
  const fs::path p = temp_dir() / "sidecar.json";
  write_container(p, Container::from_real_image(img, DType::f32));
  CHECK(fs::exists(temp_dir() / "sidecar.bin"));
  CHECK(fs::file_size(temp_dir() / "sidecar.bin") == 9 * 4);

  nlohmann::json meta = nlohmann::json::parse(slurp(p));
  CHECK(meta["dtype"] == "f32");
  CHECK(meta["shape"] == nlohmann::json({3, 3}));
  CHECK(meta["data_file"] == "sidecar.bin");
  CHECK(meta["byte_order"] == "little");
  CHECK(meta["layout"] == "row_major");
  CHECK(meta["format_version"] == 1);
  CHECK(meta["axes"] == nlohmann::json({"row", "col"}));
}

TEST_CASE("rank and payload mismatches raise DataError") {
  RealImage img(4, 4, 0.5);
  const fs::path p = temp_dir() / "rank.json";
  write_container(p, Container::from_real_image(img));
  Container back = read_container(p);
  CHECK_THROWS_AS(back.as_real_volume(), DataError);
  CHECK_THROWS_AS(back.as_complex_image(), DataError);
  CHECK_THROWS_AS(back.as_frame_stack(), DataError);

  Container bad = Container::from_real_image(img);
  bad.shape = {4, 5};  // payload no longer matches
  CHECK_THROWS_AS(write_container(temp_dir() / "bad.json", bad), DataError);

  CHECK_THROWS_AS(read_container(temp_dir() / "missing.json"), DataError);

  // truncated payload
  const fs::path t = temp_dir() / "trunc.json";
  write_container(t, Container::from_real_image(img));
  std::ofstream(temp_dir() / "trunc.bin", std::ios::binary | std::ios::trunc) << "xx";
  CHECK_THROWS_AS(read_container(t), DataError);
}

TEST_CASE("malformed sidecar json raises DataError") {
  const fs::path p = temp_dir() / "broken.json";
  std::ofstream(p) << "{ not json";
  CHECK_THROWS_AS(read_container(p), DataError);
}

TEST_CASE("export_image writes 8-bit pgm with minmax normalization") {
  RealImage img(2, 3);
  img.storage() = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
  const fs::path p = temp_dir() / "img8.pgm";
  ExportOptions opts;
  export_image(Container::from_real_image(img), p, opts);
  const std::string body = slurp(p);
  const std::string header = "P5\n3 2\n255\n";
  REQUIRE(body.substr(0, header.size()) == header);
  REQUIRE(body.size() == header.size() + 6);
  const auto* px = reinterpret_cast<const unsigned char*>(body.data() + header.size());
  CHECK(px[0] == 0);
  CHECK(px[5] == 255);
  CHECK(px[1] == 51);  // round(1/5 * 255)
  CHECK(fs::exists(temp_dir() / "img8.pgm.txt"));
  const std::string sidecar = slurp(temp_dir() / "img8.pgm.txt");
  CHECK(sidecar.find("normalization: minmax") != std::string::npos);
  CHECK(sidecar.find("bits: 8") != std::string::npos);
}

TEST_CASE("export_image writes big-endian 16-bit pgm") {
  RealImage img(1, 2);
  img.storage() = {0.0, 1.0};
  const fs::path p = temp_dir() / "img16.pgm";
  ExportOptions opts;
  opts.bits = 16;
  export_image(Container::from_real_image(img), p, opts);
  const std::string body = slurp(p);
  const std::string header = "P5\n2 1\n65535\n";
  REQUIRE(body.substr(0, header.size()) == header);
  REQUIRE(body.size() == header.size() + 4);
  const auto* px = reinterpret_cast<const unsigned char*>(body.data() + header.size());
  CHECK(px[0] == 0);
  CHECK(px[1] == 0);
  CHECK(px[2] == 0xff);  // high byte first
  CHECK(px[3] == 0xff);
}

TEST_CASE("export_image percentile normalization clips outliers") {
  RealImage img(10, 10);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i);
  img[99] = 1e6;  // outlier absorbed by the 99th percentile
  const fs::path p = temp_dir() / "pct.pgm";
  ExportOptions opts;
  opts.percentile = true;
  opts.lo = 1.0;
  opts.hi = 99.0;
  export_image(Container::from_real_image(img), p, opts);
  const std::string body = slurp(p);
  const auto* px = reinterpret_cast<const unsigned char*>(body.data() + body.size() - 100);
  CHECK(px[50] > 100);  // mid values keep contrast despite the outlier
  CHECK(px[99] == 255);
  const std::string sidecar = slurp(temp_dir() / "pct.pgm.txt");
  CHECK(sidecar.find("normalization: percentile") != std::string::npos);
}

TEST_CASE("export_image maps constant images to mid-gray") {
  RealImage img(4, 4, 3.14);
  const fs::path p = temp_dir() / "flat.pgm";
  export_image(Container::from_real_image(img), p, ExportOptions{});
  const std::string body = slurp(p);
  const auto* px = reinterpret_cast<const unsigned char*>(body.data() + body.size() - 16);
  for (int i = 0; i < 16; ++i) CHECK(px[i] == 127);
  CHECK(slurp(temp_dir() / "flat.pgm.txt").find("degenerate_range") != std::string::npos);
}

TEST_CASE("export_image slices 3D containers and validates options") {
  RealVolume vol(3, 2, 2);
  for (std::size_t i = 0; i < vol.size(); ++i) vol[i] = static_cast<double>(i);
  Container c = Container::from_real_volume(vol);
  ExportOptions opts;
  CHECK_THROWS_AS(export_image(c, temp_dir() / "noslice.pgm", opts), DataError);
  opts.slice = 5;
  CHECK_THROWS_AS(export_image(c, temp_dir() / "oob.pgm", opts), DataError);
  opts.slice = 1;
  export_image(c, temp_dir() / "slice.pgm", opts);
  const std::string body = slurp(temp_dir() / "slice.pgm");
  CHECK(body.substr(0, 8) == "P5\n2 2\n2");  // 2x2 slice
  opts.bits = 12;
  CHECK_THROWS_AS(export_image(c, temp_dir() / "bits.pgm", opts), ConfigError);
}
