// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "scramflow/flow/flow.hpp"
#include "scramflow/oracle/fock.hpp"

namespace scramflow::oracle {

/// Relative eigenvalue errors of a flowed spectrum against exact diagonalization.
struct SpectrumError {
  double median_relative = 0.0;  // median over levels of |E_flow - E_exact| / |E_exact|
  double max_absolute = 0.0;
  std::size_t levels = 0;
};

/// Energies E(s) of the diagonal Hamiltonian for every occupation state of `sector`, sorted.
inline std::vector<double> flowed_spectrum(const DiagonalHamiltonian& diag, const Sector& sector) {
  if (diag.n_modes() != sector.n_modes) throw DimensionError("diagonal Hamiltonian and sector mode counts differ");
  std::vector<double> e;
  e.reserve(sector.dim());
  for (auto s : sector.states) e.push_back(diag.energy(s));
  std::sort(e.begin(), e.end());
  return e;
}

/// Levels are paired by sorted order. Exact zeros are skipped in the relative error.
inline SpectrumError spectrum_error(const DiagonalHamiltonian& diag, const OperatorPolynomial<double>& h,
                                    const Sector& sector) {
  const auto exact = exact_spectrum(h, sector);
  const auto flowed = flowed_spectrum(diag, sector);
  SpectrumError r;
  r.levels = exact.size();
  std::vector<double> rel;
  rel.reserve(exact.size());
  for (std::size_t k = 0; k < exact.size(); ++k) {
    const double diff = std::abs(flowed[k] - exact[k]);
    r.max_absolute = std::max(r.max_absolute, diff);
    if (exact[k] != 0.0) rel.push_back(diff / std::abs(exact[k]));
  }
  if (rel.empty()) return r;
  const auto mid = rel.begin() + static_cast<std::ptrdiff_t>(rel.size() / 2);
  std::nth_element(rel.begin(), mid, rel.end());
  r.median_relative = *mid;
  if (rel.size() % 2 == 0) r.median_relative = 0.5 * (r.median_relative + *std::max_element(rel.begin(), mid));
  return r;
}

}  // namespace scramflow::oracle
