// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <type_traits>
#include <vector>

#include "scramflow/core/error.hpp"

namespace scramflow {

template <class T>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};
template <class T>
inline constexpr bool is_complex_v = is_complex<T>::value;

/// Underlying real type of a (possibly complex) scalar.
template <class T>
struct real_of {
  using type = T;
};
template <class T>
struct real_of<std::complex<T>> {
  using type = T;
};
template <class T>
using real_t = typename real_of<T>::type;

template <class T>
constexpr real_t<T> abs2(const T& x) {
  if constexpr (is_complex_v<T>) {
    return std::norm(x);
  } else {
    return x * x;
  }
}

template <class T>
constexpr T conj_if_complex(const T& x) {
  if constexpr (is_complex_v<T>) {
    return std::conj(x);
  } else {
    return x;
  }
}

inline std::size_t ipow(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

/// Dense hypercubic tensor: `rank` axes of equal extent, row-major storage.
///
/// A rank-0 tensor holds a single element. Rank and extent are fixed at
/// construction; all entries start at zero.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rank, int extent) : rank_(rank), extent_(extent) {
    if (rank < 0 || extent < 0) throw DimensionError("negative tensor rank or extent");
    data_.assign(ipow(static_cast<std::size_t>(extent), rank), T{});
  }

  int rank() const { return rank_; }
  int extent() const { return extent_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  template <class... I>
  T& operator()(I... idx) {
    return data_[offset(idx...)];
  }
  template <class... I>
  const T& operator()(I... idx) const {
    return data_[offset(idx...)];
  }

  T& at(std::span<const int> idx) { return data_[offset_of(idx)]; }
  const T& at(std::span<const int> idx) const { return data_[offset_of(idx)]; }

  std::size_t offset_of(std::span<const int> idx) const {
    std::size_t off = 0;
    for (int i : idx) off = off * static_cast<std::size_t>(extent_) + static_cast<std::size_t>(i);
    return off;
  }

  /// Decode a flat offset into per-axis indices.
  void unravel(std::size_t off, std::span<int> idx) const {
    for (int a = rank_ - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(off % static_cast<std::size_t>(extent_));
      off /= static_cast<std::size_t>(extent_);
    }
  }

  void set_zero() { std::fill(data_.begin(), data_.end(), T{}); }

  bool is_zero() const {
    return std::all_of(data_.begin(), data_.end(), [](const T& x) { return x == T{}; });
  }

  Tensor& operator+=(const Tensor& o) {
    check_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    check_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Tensor& operator*=(const T& s) {
    for (auto& x : data_) x *= s;
    return *this;
  }

  void check_same_shape(const Tensor& o) const {
    if (o.rank_ != rank_ || o.extent_ != extent_) throw DimensionError("tensor shape mismatch");
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(rank_, extent_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  template <class... I>
  std::size_t offset(I... idx) const {
    std::size_t off = 0;
    ((off = off * static_cast<std::size_t>(extent_) + static_cast<std::size_t>(idx)), ...);
    return off;
  }

  int rank_ = 0;
  int extent_ = 0;
  std::vector<T> data_;
};

/// Square root of the sum of squared magnitudes of all entries.
///
/// Accumulates in long double so the result does not depend on storage order
/// at double precision.
template <class T>
real_t<T> frobenius_norm(std::span<const T> values) {
  long double acc = 0.0L;
  for (const T& x : values) acc += static_cast<long double>(abs2(x));
  return static_cast<real_t<T>>(std::sqrt(acc));
}

template <class T>
real_t<T> frobenius_norm(const Tensor<T>& t) {
  return frobenius_norm<T>(t.values());
}

template <class T>
real_t<T> max_abs(std::span<const T> values) {
  real_t<T> m = 0;
  for (const T& x : values) m = std::max<real_t<T>>(m, std::abs(x));
  return m;
}

template <class T>
real_t<T> max_abs(const Tensor<T>& t) {
  return max_abs<T>(t.values());
}

/// out(axes permuted) = src, i.e. out[i_perm[0], ..., i_perm[r-1]] = src[i_0, ..., i_{r-1}].
///
/// `perm[k]` names the source axis that becomes output axis k.
template <class T>
Tensor<T> permute_axes(const Tensor<T>& src, std::span<const int> perm) {
  const int r = src.rank();
  const int n = src.extent();
  if (static_cast<int>(perm.size()) != r) throw DimensionError("permutation rank mismatch");
  Tensor<T> out(r, n);
  if (r == 0) {
    out.data()[0] = src.data()[0];
    return out;
  }
  // Stride of each output axis in the source.
  std::vector<std::size_t> src_stride(r);
  {
    std::size_t s = 1;
    for (int a = r - 1; a >= 0; --a) {
      src_stride[a] = s;
      s *= static_cast<std::size_t>(n);
    }
  }
  std::vector<std::size_t> stride(r);
  for (int k = 0; k < r; ++k) stride[k] = src_stride[perm[k]];

  std::vector<int> idx(r, 0);
  const std::size_t total = out.size();
  std::size_t src_off = 0;
  T* dst = out.data();
  const T* s = src.data();
  // Innermost axis is contiguous in the output; walk it in a tight loop.
  const std::size_t inner_stride = stride[r - 1];
  for (std::size_t o = 0; o < total; o += static_cast<std::size_t>(n)) {
    std::size_t so = src_off;
    for (int i = 0; i < n; ++i, so += inner_stride) dst[o + i] = s[so];
    // Advance the odometer over axes 0..r-2.
    for (int a = r - 2; a >= 0; --a) {
      if (++idx[a] < n) {
        src_off += stride[a];
        break;
      }
      src_off -= stride[a] * static_cast<std::size_t>(n - 1);
      idx[a] = 0;
    }
  }
  return out;
}

}  // namespace scramflow
