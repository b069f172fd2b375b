// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scramflow/core/error.hpp"
#include "scramflow/opalg/polynomial.hpp"

namespace scramflow {

enum class DisorderFamily { random_box, quasi_periodic };

inline DisorderFamily parse_family(std::string_view s) {
  if (s == "random-box" || s == "random_box" || s == "box" || s == "random") return DisorderFamily::random_box;
  if (s == "quasi-periodic" || s == "quasi_periodic" || s == "qp") return DisorderFamily::quasi_periodic;
  throw ConfigError("unknown disorder family '" + std::string(s) + "'");
}

inline std::string to_string(DisorderFamily f) {
  return f == DisorderFamily::random_box ? "random-box" : "quasi-periodic";
}

/// Golden ratio, incommensurate wave number of the 1D quasi-periodic field and of its x component in 2D.
inline constexpr double kPhi = std::numbers::phi;
/// Silver ratio, wave number of the y component in 2D.
inline constexpr double kPhi2 = 1.0 + std::numbers::sqrt2;

/// Lattice geometry, couplings and disorder of one model. Boundaries are always open.
struct ModelSpec {
  int dims = 1;
  int lx = 8;
  int ly = 1;
  double J = 1.0;
  double delta0 = 0.1;
  DisorderFamily family = DisorderFamily::random_box;
  double d = 5.0;
  std::uint64_t seed = 0;

  int n_sites() const { return dims == 1 ? lx : lx * ly; }

  void validate() const {
    if (dims != 1 && dims != 2) throw ConfigError("dims must be 1 or 2");
    if (dims == 1 && (lx < 2 || ly != 1)) throw ConfigError("1D lattices need L >= 2");
    if (dims == 2 && (lx < 2 || ly < 2)) throw ConfigError("2D lattices need Lx, Ly >= 2");
    if (!(J >= 0.0)) throw ConfigError("hopping J must be non-negative");
    if (!(d >= 0.0)) throw ConfigError("disorder strength d must be non-negative");
    if (!std::isfinite(delta0)) throw ConfigError("interaction must be finite");
  }
};

struct SitePotential {
  std::vector<double> h;
  double theta = 0.0;
  double theta2 = 0.0;
};

/// Boustrophedon order: even rows left to right, odd rows right to left.
inline int snake_map(int ix, int iy, int lx, int ly) {
  if (ix < 0 || ix >= lx || iy < 0 || iy >= ly) throw IndexError("lattice coordinate out of range");
  return iy * lx + ((iy % 2 == 0) ? ix : lx - 1 - ix);
}

/// Quasi-periodic field for fixed phases.
inline SitePotential quasi_periodic_potential(const ModelSpec& spec, double theta, double theta2 = 0.0) {
  spec.validate();
  SitePotential p;
  p.theta = theta;
  p.theta2 = theta2;
  p.h.assign(static_cast<std::size_t>(spec.n_sites()), 0.0);
  const double two_pi = 2.0 * std::numbers::pi;
  if (spec.dims == 1) {
    for (int i = 0; i < spec.lx; ++i) p.h[i] = spec.d * std::cos(two_pi * i / kPhi + theta);
  } else {
    for (int iy = 0; iy < spec.ly; ++iy)
      for (int ix = 0; ix < spec.lx; ++ix)
        p.h[snake_map(ix, iy, spec.lx, spec.ly)] =
            spec.d * (std::cos(two_pi * ix / kPhi + theta) + std::cos(two_pi * iy / kPhi2 + theta2));
  }
  return p;
}

/// One disorder realization. The phases θ, θ₂ are drawn independently and uniformly on [0, 2π).
inline SitePotential sample_potential(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  if (spec.family == DisorderFamily::quasi_periodic) {
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const double t1 = phase(rng);
    const double t2 = spec.dims == 2 ? phase(rng) : 0.0;
    return quasi_periodic_potential(spec, t1, t2);
  }
  SitePotential p;
  std::uniform_real_distribution<double> box(-spec.d, spec.d);
  p.h.resize(static_cast<std::size_t>(spec.n_sites()));
  for (auto& x : p.h) x = spec.d > 0.0 ? box(rng) : 0.0;
  return p;
}

/// Nearest-neighbour bonds (i<j) in chain indices; 2D bonds follow the snake map.
inline std::vector<std::pair<int, int>> nearest_neighbor_bonds(const ModelSpec& spec) {
  spec.validate();
  std::vector<std::pair<int, int>> bonds;
  auto add = [&](int a, int b) { bonds.emplace_back(std::min(a, b), std::max(a, b)); };
  if (spec.dims == 1) {
    for (int i = 0; i + 1 < spec.lx; ++i) add(i, i + 1);
  } else {
    for (int iy = 0; iy < spec.ly; ++iy)
      for (int ix = 0; ix < spec.lx; ++ix) {
        const int s = snake_map(ix, iy, spec.lx, spec.ly);
        if (ix + 1 < spec.lx) add(s, snake_map(ix + 1, iy, spec.lx, spec.ly));
        if (iy + 1 < spec.ly) add(s, snake_map(ix, iy + 1, spec.lx, spec.ly));
      }
  }
  return bonds;
}

/// H = Σ h_i n_i + J Σ_<ij> (c†_i c_j + h.c.) + Δ₀ Σ_<ij> n_i n_j.
/// Each bond's interaction sits once at rank4(i,i,j,j), i<j.
template <class T = double>
OperatorPolynomial<T> build_hamiltonian(const ModelSpec& spec, const SitePotential& pot) {
  spec.validate();
  const int n = spec.n_sites();
  if (static_cast<int>(pot.h.size()) != n) throw DimensionError("potential size does not match the lattice");
  auto h = OperatorPolynomial<T>::even(n);
  for (int i = 0; i < n; ++i) h.rank2(i, i) = static_cast<T>(pot.h[i]);
  for (auto [i, j] : nearest_neighbor_bonds(spec)) {
    h.rank2(i, j) = h.rank2(j, i) = static_cast<T>(spec.J);
    h.rank4(i, i, j, j) = static_cast<T>(spec.delta0);
  }
  return h;
}

}  // namespace scramflow
