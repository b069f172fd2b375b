// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Binary block format, all integers and floats little-endian:
//   magic "SCFPOLY1" | u32 n_modes | u8 parity (0 even, 1 odd) | u8 kind (0 real, 1 complex)
//   | scalar (f64, or re f64 + im f64) | u32 block count
//   | per block: u32 rank | u32 extent | entries row-major (f64, or re/im f64 pairs)
// Single-precision polynomials are widened to f64 on write.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "scramflow/core/error.hpp"
#include "scramflow/opalg/polynomial.hpp"

namespace scramflow::io {

inline constexpr std::array<char, 8> kPolyMagic{'S', 'C', 'F', 'P', 'O', 'L', 'Y', '1'};

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }

inline void put_f64(std::ostream& os, double x) {
  const auto v = std::bit_cast<std::uint64_t>(x);
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void read_exact(std::istream& is, unsigned char* dst, std::size_t n) {
  is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw FormatError("truncated binary stream");
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  read_exact(is, b, 4);
  std::uint32_t v = 0;
  for (int k = 3; k >= 0; --k) v = (v << 8) | b[k];
  return v;
}

inline std::uint8_t get_u8(std::istream& is) {
  unsigned char b;
  read_exact(is, &b, 1);
  return b;
}

inline double get_f64(std::istream& is) {
  unsigned char b[8];
  read_exact(is, b, 8);
  std::uint64_t v = 0;
  for (int k = 7; k >= 0; --k) v = (v << 8) | b[k];
  return std::bit_cast<double>(v);
}

template <class T>
void put_scalar(std::ostream& os, const T& x) {
  if constexpr (is_complex_v<T>) {
    put_f64(os, static_cast<double>(x.real()));
    put_f64(os, static_cast<double>(x.imag()));
  } else {
    put_f64(os, static_cast<double>(x));
  }
}

template <class T>
T get_scalar(std::istream& is, bool complex_kind) {
  const double re = get_f64(is);
  const double im = complex_kind ? get_f64(is) : 0.0;
  if constexpr (is_complex_v<T>) {
    return T(static_cast<real_t<T>>(re), static_cast<real_t<T>>(im));
  } else {
    if (im != 0.0) throw FormatError("complex data cannot be loaded into a real polynomial");
    return static_cast<T>(re);
  }
}

template <class T>
void dump(std::ostream& os, const OperatorPolynomial<T>& p) {
  os.write(kPolyMagic.data(), kPolyMagic.size());
  put_u32(os, static_cast<std::uint32_t>(p.n_modes));
  put_u8(os, p.parity == Parity::odd ? 1 : 0);
  put_u8(os, is_complex_v<T> ? 1 : 0);
  put_scalar(os, p.scalar);
  const auto ranks = p.present_ranks();
  put_u32(os, static_cast<std::uint32_t>(ranks.size()));
  for (int k : ranks) {
    const Tensor<T>& b = *p.block(k);
    put_u32(os, static_cast<std::uint32_t>(b.rank()));
    put_u32(os, static_cast<std::uint32_t>(b.extent()));
    for (const T& x : b.values()) put_scalar(os, x);
  }
  if (!os) throw FormatError("failed writing operator polynomial");
}

template <class T>
OperatorPolynomial<T> load(std::istream& is) {
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (is.gcount() != static_cast<std::streamsize>(magic.size()) || magic != kPolyMagic) {
    throw FormatError("not an operator polynomial stream");
  }
  OperatorPolynomial<T> p;
  p.n_modes = static_cast<int>(get_u32(is));
  const std::uint8_t parity = get_u8(is);
  const std::uint8_t kind = get_u8(is);
  if (parity > 1 || kind > 1) throw FormatError("bad polynomial header");
  p.parity = parity ? Parity::odd : Parity::even;
  p.scalar = get_scalar<T>(is, kind == 1);
  const std::uint32_t count = get_u32(is);
  if (count > 5) throw FormatError("too many blocks");
  for (std::uint32_t c = 0; c < count; ++c) {
    const int rank = static_cast<int>(get_u32(is));
    const int extent = static_cast<int>(get_u32(is));
    if (extent != p.n_modes) throw FormatError("block extent does not match the mode count");
    if (p.block(rank) == nullptr) throw FormatError("invalid block rank");
    Tensor<T>& b = p.ensure(rank);
    for (T& x : b.values()) x = get_scalar<T>(is, kind == 1);
  }
  return p;
}

}  // namespace scramflow::io
