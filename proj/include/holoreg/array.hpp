#ifndef HOLOREG_ARRAY_HPP
#define HOLOREG_ARRAY_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "holoreg/errors.hpp"

namespace holoreg {

using cplx = std::complex<double>;

// Dense row-major 2D array.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  bool same_shape(const Image& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<T> data_;
};

// Dense row-major 3D array, index order (i0, i1, i2), i2 fastest.
template <typename T>
class Volume {
 public:
  Volume() = default;
  Volume(std::size_t n0, std::size_t n1, std::size_t n2, T fill = T{})
      : n0_(n0), n1_(n1), n2_(n2), data_(n0 * n1 * n2, fill) {}

  std::size_t dim0() const { return n0_; }
  std::size_t dim1() const { return n1_; }
  std::size_t dim2() const { return n2_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * n1_ + j) * n2_ + k];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * n1_ + j) * n2_ + k];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  bool same_shape(const Volume& o) const {
    return n0_ == o.n0_ && n1_ == o.n1_ && n2_ == o.n2_;
  }

 private:
  std::size_t n0_ = 0, n1_ = 0, n2_ = 0;
  std::vector<T> data_;
};

using RealImage = Image<double>;
using ComplexImage = Image<cplx>;
using RealVolume = Volume<double>;
using ComplexVolume = Volume<cplx>;

inline double norm2(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double norm2(const std::vector<cplx>& v) {
  double s = 0;
  for (const cplx& x : v) s += std::norm(x);
  return std::sqrt(s);
}

// Real inner product; complex fields are treated as real vector spaces.
inline double dot_re(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double dot_re(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  return s;
}

template <typename T>
bool all_finite(const std::vector<T>& v) {
  for (const T& x : v) {
    if constexpr (std::is_same_v<T, cplx>) {
      if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
    } else {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

}  // namespace holoreg

#endif
