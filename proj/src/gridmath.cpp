#include "holoreg/gridmath.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace holoreg {

void ImagingGeometry::validate() const {
  if (!(fresnel_number > 0))
    throw ConfigError("invalid geometry: fresnel_number must be > 0");
  if (!(pixel_size > 0)) throw ConfigError("invalid geometry: pixel_size must be > 0");
  if (defocus && wavenumber) {
    const double nf = pixel_size * pixel_size * (*wavenumber) / (2.0 * M_PI * (*defocus));
    if (std::abs(nf - fresnel_number) > 1e-9 * fresnel_number)
      throw ConfigError("invalid geometry: fresnel_number inconsistent with a^2 k / (2 pi d)");
  }
}

GramianSpec GramianSpec::sobolev(double s) {
  GramianSpec spec;
  spec.kind = Kind::sobolev;
  spec.s = s;
  spec.validate();
  return spec;
}

GramianSpec GramianSpec::weighted(RealImage w) {
  GramianSpec spec;
  spec.kind = Kind::weighted;
  spec.weights = std::move(w);
  spec.validate();
  return spec;
}

void GramianSpec::validate() const {
  if (kind == Kind::sobolev && s < 0)
    throw ConfigError("GramianSpec: Sobolev exponent must be >= 0");
  if (kind == Kind::weighted) {
    for (std::size_t i = 0; i < weights.size(); ++i)
      if (!(weights[i] > 0))
        throw ConfigError("GramianSpec: pointwise weights must be positive");
  }
}

namespace {

// FFTW plan cache. Plan creation is not thread-safe; execution is.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get2d(std::size_t rows, std::size_t cols, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_tuple(rows, cols, std::size_t{0}, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<cplx> buf(rows * cols);
    fftw_plan p = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols),
                                   reinterpret_cast<fftw_complex*>(buf.data()),
                                   reinterpret_cast<fftw_complex*>(buf.data()), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_[key] = p;
    return p;
  }

  fftw_plan get3d(std::size_t n0, std::size_t n1, std::size_t n2, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_tuple(n0, n1, n2 + 1, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<cplx> buf(n0 * n1 * n2);
    fftw_plan p = fftw_plan_dft_3d(static_cast<int>(n0), static_cast<int>(n1),
                                   static_cast<int>(n2),
                                   reinterpret_cast<fftw_complex*>(buf.data()),
                                   reinterpret_cast<fftw_complex*>(buf.data()), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_[key] = p;
    return p;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t, int>, fftw_plan> plans_;
};

void check_finite(const ComplexImage& f, const char* what) {
  if (!all_finite(f.storage()))
    throw DataError(std::string(what) + ": non-finite input entries");
}

ComplexImage transform2(const ComplexImage& f, int sign) {
  ComplexImage out = f;
  fftw_plan p = PlanCache::instance().get2d(f.rows(), f.cols(), sign);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(out.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  const double scale = 1.0 / std::sqrt(static_cast<double>(f.size()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= scale;
  return out;
}

ComplexVolume transform3(const ComplexVolume& f, int sign) {
  ComplexVolume out = f;
  fftw_plan p = PlanCache::instance().get3d(f.dim0(), f.dim1(), f.dim2(), sign);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(out.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  const double scale = 1.0 / std::sqrt(static_cast<double>(f.size()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= scale;
  return out;
}

}  // namespace

ComplexImage fft2(const ComplexImage& field) {
  check_finite(field, "fft2");
  return transform2(field, FFTW_FORWARD);
}

ComplexImage ifft2(const ComplexImage& spectrum) {
  check_finite(spectrum, "ifft2");
  return transform2(spectrum, FFTW_BACKWARD);
}

ComplexVolume fft3(const ComplexVolume& field) {
  if (!all_finite(field.storage())) throw DataError("fft3: non-finite input entries");
  return transform3(field, FFTW_FORWARD);
}

ComplexVolume ifft3(const ComplexVolume& spectrum) {
  if (!all_finite(spectrum.storage())) throw DataError("ifft3: non-finite input entries");
  return transform3(spectrum, FFTW_BACKWARD);
}

ComplexImage replicate_pad2(const ComplexImage& img) {
  const std::size_t r = img.rows(), c = img.cols();
  ComplexImage big(2 * r, 2 * c);
  for (std::size_t i = 0; i < 2 * r; ++i) {
    const std::size_t si = i < r ? i : r - 1;
    for (std::size_t j = 0; j < 2 * c; ++j) {
      const std::size_t sj = j < c ? j : c - 1;
      big(i, j) = img(si, sj);
    }
  }
  return big;
}

ComplexImage replicate_pad2_transpose(const ComplexImage& big, std::size_t rows,
                                      std::size_t cols) {
  ComplexImage out(rows, cols);
  for (std::size_t i = 0; i < big.rows(); ++i) {
    const std::size_t si = i < rows ? i : rows - 1;
    for (std::size_t j = 0; j < big.cols(); ++j) {
      const std::size_t sj = j < cols ? j : cols - 1;
      out(si, sj) += big(i, j);
    }
  }
  return out;
}

namespace {

// Sign chosen so that the weak-object linearization of the intensity model
// reproduces the contrast transfer function 2 sin - cos exactly.
const std::vector<cplx>& fresnel_multiplier(std::size_t rows, std::size_t cols,
                                            double fresnel_number, double sign) {
  static std::mutex mutex;
  static std::map<std::tuple<std::size_t, std::size_t, double, double>, std::vector<cplx>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  const auto key = std::make_tuple(rows, cols, fresnel_number, sign);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<cplx> m(rows * cols);
  FrequencyGrid grid(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double theta = sign * M_PI * grid.xi_sq(i, j) / fresnel_number;
      m[i * cols + j] = cplx(std::cos(theta), std::sin(theta));
    }
  return cache.emplace(key, std::move(m)).first->second;
}

ComplexImage fresnel_multiply(const ComplexImage& psi, double fresnel_number, double sign) {
  ComplexImage spec = transform2(psi, FFTW_FORWARD);
  const std::vector<cplx>& m = fresnel_multiplier(psi.rows(), psi.cols(), fresnel_number, sign);
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] *= m[i];
  return transform2(spec, FFTW_BACKWARD);
}

}  // namespace

ComplexImage fresnel_propagate(const ComplexImage& psi, const ImagingGeometry& geom,
                               Direction dir) {
  geom.validate();
  check_finite(psi, "fresnel_propagate");
  const double sign = dir == Direction::forward ? +1.0 : -1.0;
  if (!geom.padding) return fresnel_multiply(psi, geom.fresnel_number, sign);
  ComplexImage big = replicate_pad2(psi);
  big = fresnel_multiply(big, geom.fresnel_number, sign);
  ComplexImage out(psi.rows(), psi.cols());
  for (std::size_t i = 0; i < psi.rows(); ++i)
    for (std::size_t j = 0; j < psi.cols(); ++j) out(i, j) = big(i, j);
  return out;
}

namespace {

ComplexImage gram_apply_impl(const ComplexImage& f, const GramianSpec& spec, bool inverse) {
  spec.validate();
  switch (spec.kind) {
    case GramianSpec::Kind::identity:
      return f;
    case GramianSpec::Kind::weighted: {
      if (!spec.weights.same_shape(RealImage(f.rows(), f.cols())))
        throw DataError("gram_apply: weight shape mismatch");
      ComplexImage out = f;
      for (std::size_t i = 0; i < f.size(); ++i)
        out[i] *= inverse ? 1.0 / spec.weights[i] : spec.weights[i];
      return out;
    }
    case GramianSpec::Kind::sobolev: {
      const double expo = inverse ? -spec.s : spec.s;
      static std::mutex mutex;
      static std::map<std::tuple<std::size_t, std::size_t, double>, std::vector<double>> cache;
      const std::vector<double>* mult;
      {
        std::lock_guard<std::mutex> lock(mutex);
        const auto key = std::make_tuple(f.rows(), f.cols(), expo);
        auto it = cache.find(key);
        if (it == cache.end()) {
          std::vector<double> m(f.size());
          FrequencyGrid grid(f.rows(), f.cols());
          for (std::size_t i = 0; i < f.rows(); ++i)
            for (std::size_t j = 0; j < f.cols(); ++j)
              m[i * f.cols() + j] = std::pow(1.0 + grid.xi_sq(i, j), expo);
          it = cache.emplace(key, std::move(m)).first;
        }
        mult = &it->second;
      }
      ComplexImage spectrum = transform2(f, FFTW_FORWARD);
      for (std::size_t i = 0; i < spectrum.size(); ++i) spectrum[i] *= (*mult)[i];
      return transform2(spectrum, FFTW_BACKWARD);
    }
  }
  throw ConfigError("gram_apply: unknown Gramian kind");
}

}  // namespace

ComplexImage gram_apply(const ComplexImage& f, const GramianSpec& spec) {
  return gram_apply_impl(f, spec, false);
}

ComplexImage gram_apply_inverse(const ComplexImage& f, const GramianSpec& spec) {
  return gram_apply_impl(f, spec, true);
}

RealImage gram_apply(const RealImage& f, const GramianSpec& spec) {
  ComplexImage c(f.rows(), f.cols());
  for (std::size_t i = 0; i < f.size(); ++i) c[i] = f[i];
  ComplexImage r = gram_apply_impl(c, spec, false);
  RealImage out(f.rows(), f.cols());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = r[i].real();
  return out;
}

RealImage gram_apply_inverse(const RealImage& f, const GramianSpec& spec) {
  ComplexImage c(f.rows(), f.cols());
  for (std::size_t i = 0; i < f.size(); ++i) c[i] = f[i];
  ComplexImage r = gram_apply_impl(c, spec, true);
  RealImage out(f.rows(), f.cols());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = r[i].real();
  return out;
}

cplx weighted_inner(const ComplexImage& f, const ComplexImage& g, const GramianSpec& spec) {
  if (!f.same_shape(g)) throw DataError("weighted_inner: shape mismatch");
  ComplexImage gg = gram_apply(g, spec);
  cplx s = 0;
  for (std::size_t i = 0; i < f.size(); ++i) s += std::conj(f[i]) * gg[i];
  return s;
}

double weighted_inner(const RealImage& f, const RealImage& g, const GramianSpec& spec) {
  if (!f.same_shape(g)) throw DataError("weighted_inner: shape mismatch");
  RealImage gg = gram_apply(g, spec);
  double s = 0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * gg[i];
  return s;
}

std::vector<cplx> gram_apply_flat(const std::vector<cplx>& f, std::size_t rows, std::size_t cols,
                                  const GramianSpec& spec, bool inverse) {
  if (spec.kind == GramianSpec::Kind::identity) return f;
  if (f.size() != rows * cols) throw DataError("gram_apply_flat: size mismatch");
  ComplexImage img(rows, cols);
  img.storage() = f;
  ComplexImage out = gram_apply_impl(img, spec, inverse);
  return out.storage();
}

}  // namespace holoreg
