#include "holoreg/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "holoreg/rng.hpp"

namespace holoreg {

namespace {

constexpr int kSubsample2D = 4;
constexpr int kSubsample3D = 4;
constexpr double kOverlapTol = 0.05;

struct Box2D {
  double r0, c0, r1, c1;
};

Box2D element_bounds(const PhantomElement& element) {
  if (const auto* d = std::get_if<DiscElement>(&element))
    return {d->center_row - d->radius, d->center_col - d->radius, d->center_row + d->radius,
            d->center_col + d->radius};
  if (const auto* r = std::get_if<RectElement>(&element))
    return {r->row0, r->col0, r->row1, r->col1};
  const auto& g = std::get<GlyphElement>(element);
  const double hr = 0.5 * g.scale * static_cast<double>(g.bitmap.rows());
  const double hc = 0.5 * g.scale * static_cast<double>(g.bitmap.cols());
  return {g.center_row - hr, g.center_col - hc, g.center_row + hr, g.center_col + hc};
}

// Area fraction of one pixel covered by the element (subsampled on the
// boundary band, exact in the interior/exterior).
double pixel_coverage(const PhantomElement& element, double row, double col) {
  if (const auto* d = std::get_if<DiscElement>(&element)) {
    const double dr = row - d->center_row, dc = col - d->center_col;
    const double dist = std::sqrt(dr * dr + dc * dc);
    if (dist <= d->radius - 0.75) return 1.0;
    if (dist >= d->radius + 0.75) return 0.0;
    int hits = 0;
    for (int a = 0; a < kSubsample2D; ++a)
      for (int b = 0; b < kSubsample2D; ++b) {
        const double rr = row - 0.5 + (a + 0.5) / kSubsample2D;
        const double cc = col - 0.5 + (b + 0.5) / kSubsample2D;
        const double xr = rr - d->center_row, xc = cc - d->center_col;
        if (xr * xr + xc * xc <= d->radius * d->radius) ++hits;
      }
    return static_cast<double>(hits) / (kSubsample2D * kSubsample2D);
  }
  if (const auto* r = std::get_if<RectElement>(&element)) {
    const double or_ = std::max(0.0, std::min(row + 0.5, r->row1) - std::max(row - 0.5, r->row0));
    const double oc = std::max(0.0, std::min(col + 0.5, r->col1) - std::max(col - 0.5, r->col0));
    return or_ * oc;
  }
  const auto& g = std::get<GlyphElement>(element);
  const double hr = 0.5 * g.scale * static_cast<double>(g.bitmap.rows());
  const double hc = 0.5 * g.scale * static_cast<double>(g.bitmap.cols());
  int hits = 0;
  for (int a = 0; a < kSubsample2D; ++a)
    for (int b = 0; b < kSubsample2D; ++b) {
      const double rr = row - 0.5 + (a + 0.5) / kSubsample2D;
      const double cc = col - 0.5 + (b + 0.5) / kSubsample2D;
      const double br = (rr - (g.center_row - hr)) / g.scale;
      const double bc = (cc - (g.center_col - hc)) / g.scale;
      const auto ir = static_cast<std::ptrdiff_t>(std::floor(br));
      const auto ic = static_cast<std::ptrdiff_t>(std::floor(bc));
      if (ir >= 0 && ic >= 0 && ir < static_cast<std::ptrdiff_t>(g.bitmap.rows()) &&
          ic < static_cast<std::ptrdiff_t>(g.bitmap.cols()) &&
          g.bitmap(static_cast<std::size_t>(ir), static_cast<std::size_t>(ic)))
        ++hits;
    }
  return static_cast<double>(hits) / (kSubsample2D * kSubsample2D);
}

}  // namespace

RealImage element_coverage(const PhantomElement& element, std::size_t rows, std::size_t cols) {
  const Box2D box = element_bounds(element);
  if (box.r0 < -0.5 || box.c0 < -0.5 || box.r1 > static_cast<double>(rows) - 0.5 ||
      box.c1 > static_cast<double>(cols) - 0.5)
    throw ConfigError("render_phantom2d: element extends outside the frame");
  RealImage cov(rows, cols);
  const auto lo_r = static_cast<std::size_t>(std::max(0.0, std::floor(box.r0 - 1)));
  const auto lo_c = static_cast<std::size_t>(std::max(0.0, std::floor(box.c0 - 1)));
  const auto hi_r = std::min(rows, static_cast<std::size_t>(std::max(0.0, box.r1 + 2)));
  const auto hi_c = std::min(cols, static_cast<std::size_t>(std::max(0.0, box.c1 + 2)));
  for (std::size_t i = lo_r; i < hi_r; ++i)
    for (std::size_t j = lo_c; j < hi_c; ++j)
      cov(i, j) = pixel_coverage(element, static_cast<double>(i), static_cast<double>(j));
  return cov;
}

Object2D render_phantom2d(const PhantomSpec2D& spec) {
  Object2D obj(spec.rows, spec.cols);
  for (const auto& element : spec.elements) {
    const RealImage cov = element_coverage(element, spec.rows, spec.cols);
    double phi = 0, mu = 0;
    std::visit([&](const auto& e) { phi = e.phi, mu = e.mu; }, element);
    if (!std::isfinite(phi) || !std::isfinite(mu))
      throw ConfigError("render_phantom2d: non-finite phi/mu");
    const cplx value(phi, -0.5 * mu);
    for (std::size_t i = 0; i < cov.size(); ++i) obj.f[i] += cov[i] * value;
  }
  return obj;
}

Image<std::uint8_t> builtin_glyph() {
  // A perforated plate: solid rectangle with two round holes and two slots,
  // feature scale comparable to a milled test pattern.
  const std::size_t rows = 16, cols = 24;
  Image<std::uint8_t> glyph(rows, cols, 1);
  auto carve_disc = [&](double cr, double cc, double rad) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        const double dr = static_cast<double>(i) - cr, dc = static_cast<double>(j) - cc;
        if (dr * dr + dc * dc <= rad * rad) glyph(i, j) = 0;
      }
  };
  auto carve_rect = [&](std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
    for (std::size_t i = r0; i < r1; ++i)
      for (std::size_t j = c0; j < c1; ++j) glyph(i, j) = 0;
  };
  carve_disc(4.5, 5.5, 2.6);
  carve_disc(4.5, 18.5, 2.6);
  carve_rect(10, 12, 3, 21);
  carve_rect(3, 13, 11, 13);
  return glyph;
}

SpherePacking hcp_packing(std::size_t n0, std::size_t n1, std::size_t n2, double radius,
                          double delta_value) {
  if (!(radius > 0)) throw ConfigError("hcp_packing: radius must be > 0");
  SpherePacking packing;
  packing.radius = radius;
  packing.delta_value = delta_value;
  const double dz = 2.0 * radius * std::sqrt(2.0 / 3.0);
  const double dy = radius * std::sqrt(3.0);
  const double margin = radius + 1.0;
  const auto fits = [&](double a, double n) { return a >= margin && a <= n - 1 - margin; };
  for (int layer = 0;; ++layer) {
    const double x0 = margin + layer * dz;
    if (x0 > static_cast<double>(n0) - 1 - margin) break;
    const bool odd = layer % 2 == 1;
    for (int row = 0;; ++row) {
      const double x1 = margin + row * dy + (odd ? dy / 3.0 : 0.0);
      if (!fits(x1, static_cast<double>(n1))) {
        if (row > 0) break;
        continue;
      }
      for (int col = 0;; ++col) {
        const double x2 =
            margin + col * 2.0 * radius + ((row % 2 == 1) ? radius : 0.0) + (odd ? radius : 0.0);
        if (x2 > static_cast<double>(n2) - 1 - margin) break;
        if (fits(x2, static_cast<double>(n2))) packing.centers.push_back({x0, x1, x2});
      }
    }
  }
  return packing;
}

SpherePacking random_packing(std::size_t count, std::size_t n0, std::size_t n1, std::size_t n2,
                             double radius, double delta_value, double min_gap,
                             std::uint64_t seed, double margin) {
  if (!(radius > 0)) throw ConfigError("random_packing: radius must be > 0");
  SpherePacking packing;
  packing.radius = radius;
  packing.delta_value = delta_value;
  Rng rng(seed ^ 0x8f3c4a629be17d51ULL);
  const double pad = radius + margin;
  const double min_dist = 2.0 * radius + min_gap;
  std::size_t attempts = 0;
  while (packing.centers.size() < count) {
    if (++attempts > 100000 * count)
      throw ConfigError("random_packing: could not place spheres (box too small?)");
    std::array<double, 3> c = {rng.uniform(pad, static_cast<double>(n0) - 1 - pad),
                               rng.uniform(pad, static_cast<double>(n1) - 1 - pad),
                               rng.uniform(pad, static_cast<double>(n2) - 1 - pad)};
    bool ok = true;
    for (const auto& o : packing.centers) {
      const double d0 = c[0] - o[0], d1 = c[1] - o[1], d2 = c[2] - o[2];
      if (d0 * d0 + d1 * d1 + d2 * d2 < min_dist * min_dist) {
        ok = false;
        break;
      }
    }
    if (ok) packing.centers.push_back(c);
  }
  return packing;
}

Volume3D render_packing(const SpherePacking& packing, std::size_t n0, std::size_t n1,
                        std::size_t n2) {
  const double r = packing.radius;
  for (std::size_t i = 0; i < packing.centers.size(); ++i) {
    const auto& c = packing.centers[i];
    const double dims[3] = {static_cast<double>(n0), static_cast<double>(n1),
                            static_cast<double>(n2)};
    for (int d = 0; d < 3; ++d)
      if (c[d] - r < -0.5 || c[d] + r > dims[d] - 0.5)
        throw ConfigError("render_packing: sphere outside the volume");
    for (std::size_t j = i + 1; j < packing.centers.size(); ++j) {
      const auto& o = packing.centers[j];
      const double d0 = c[0] - o[0], d1 = c[1] - o[1], d2 = c[2] - o[2];
      const double dist = std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
      if (dist < 2.0 * r * (1.0 - kOverlapTol))
        throw ConfigError("render_packing: overlapping spheres beyond tolerance");
    }
  }
  Volume3D vol(n0, n1, n2);
  for (const auto& c : packing.centers) {
    const auto lo = [&](double x) {
      return static_cast<std::size_t>(std::max(0.0, std::floor(x - r - 1)));
    };
    const auto hi = [&](double x, std::size_t n) {
      return std::min(n, static_cast<std::size_t>(std::max(0.0, std::ceil(x + r + 2))));
    };
    for (std::size_t i = lo(c[0]); i < hi(c[0], n0); ++i)
      for (std::size_t j = lo(c[1]); j < hi(c[1], n1); ++j)
        for (std::size_t k = lo(c[2]); k < hi(c[2], n2); ++k) {
          const double d0 = static_cast<double>(i) - c[0];
          const double d1 = static_cast<double>(j) - c[1];
          const double d2 = static_cast<double>(k) - c[2];
          const double dist = std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
          double frac = 0;
          if (dist <= r - 0.9) {
            frac = 1.0;
          } else if (dist < r + 0.9) {
            int hits = 0;
            for (int a = 0; a < kSubsample3D; ++a)
              for (int b = 0; b < kSubsample3D; ++b)
                for (int cc = 0; cc < kSubsample3D; ++cc) {
                  const double x0 = d0 - 0.5 + (a + 0.5) / kSubsample3D;
                  const double x1 = d1 - 0.5 + (b + 0.5) / kSubsample3D;
                  const double x2 = d2 - 0.5 + (cc + 0.5) / kSubsample3D;
                  if (x0 * x0 + x1 * x1 + x2 * x2 <= r * r) ++hits;
                }
            frac = static_cast<double>(hits) / (kSubsample3D * kSubsample3D * kSubsample3D);
          }
          if (frac > 0) vol.v(i, j, k) += frac * packing.delta_value;
        }
  }
  return vol;
}

NoisyData add_noise(const std::vector<RealImage>& frames, const NoiseModel& model) {
  NoisyData out;
  out.frames = frames;
  Rng rng(model.seed ^ 0x51f0e9c35b9d2a74ULL);
  double eps_sq = 0;
  for (auto& frame : out.frames) {
    for (std::size_t i = 0; i < frame.size(); ++i) {
      double noisy = frame[i];
      if (model.kind == NoiseKind::gaussian) {
        if (model.sigma < 0) throw ConfigError("add_noise: sigma must be >= 0");
        noisy += model.sigma * rng.normal();
      } else {
        if (!(model.peak_flux > 0)) throw ConfigError("add_noise: peak_flux must be > 0");
        if (frame[i] < 0) throw DataError("add_noise: negative intensity under Poisson noise");
        noisy = static_cast<double>(rng.poisson(model.peak_flux * frame[i])) / model.peak_flux;
      }
      const double eps = noisy - frame[i];
      eps_sq += eps * eps;
      frame[i] = noisy;
    }
  }
  out.noise_norm = std::sqrt(eps_sq);
  return out;
}

NoisyData add_noise(const RealImage& frame, const NoiseModel& model) {
  return add_noise(std::vector<RealImage>{frame}, model);
}

}  // namespace holoreg
