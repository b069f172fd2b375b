// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Reference contraction engine for products and commutators of
// vacuum-normal-ordered fermionic operators of any rank and slot layout.
//
// A product :X::Y: is expanded by moving every annihilator of X past every
// creator of Y with c_a c†_b = δ_ab − c†_b c_a. Each resulting term is a
// tensor contraction over the paired axes (one GEMM) followed by an axis
// permutation into normal order. Results are reduced to the canonical
// ordered form described in polynomial.hpp.

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

#include "scramflow/core/error.hpp"
#include "scramflow/core/tensor.hpp"
#include "scramflow/opalg/polynomial.hpp"

namespace scramflow {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace wick {

/// Axes of a layout split into creators and annihilators, plus the sign with
/// :layout string: = sign · (creators in order)(annihilators in order).
struct NormalOrder {
  std::vector<int> creators;
  std::vector<int> annihilators;
  int sign = 1;
};

inline NormalOrder normal_order(const Layout& layout) {
  NormalOrder o;
  int inversions = 0;
  int ann_seen = 0;
  for (int a = 0; a < static_cast<int>(layout.size()); ++a) {
    if (layout[a]) {
      o.creators.push_back(a);
      inversions += ann_seen;
    } else {
      o.annihilators.push_back(a);
      ++ann_seen;
    }
  }
  o.sign = (inversions % 2) ? -1 : 1;
  return o;
}

/// Alternating c†c c†c … when creator and annihilator counts agree,
/// otherwise all creators followed by all annihilators.
inline Layout canonical_layout(int n_cre, int n_ann) {
  Layout l;
  if (n_cre == n_ann) {
    for (int k = 0; k < n_cre; ++k) {
      l.push_back(true);
      l.push_back(false);
    }
  } else {
    l.assign(static_cast<std::size_t>(n_cre), true);
    l.insert(l.end(), static_cast<std::size_t>(n_ann), false);
  }
  return l;
}

template <class T>
struct Block {
  Layout layout;
  Tensor<T> coeffs;  // rank == layout.size()
};

/// Sum of normal-ordered blocks with arbitrary layouts.
template <class T>
struct BlockSum {
  int n_modes = 0;
  T scalar{};
  std::vector<Block<T>> blocks;

  const Block<T>* find(const Layout& layout) const {
    for (const auto& b : blocks)
      if (b.layout == layout) return &b;
    return nullptr;
  }
};

/// One term of c_{a_0} … c_{a_{p-1}} c†_{b_0} … c†_{b_{q-1}} after full reordering:
/// sign · Π δ(a, b over pairs) · c†(creators_left) c(annihilators_left).
struct ReorderTerm {
  int sign = 1;
  std::vector<std::pair<int, int>> pairs;  // (annihilator position, creator position)
  std::vector<int> creators_left;
  std::vector<int> annihilators_left;
};

namespace detail {

struct Op {
  bool creator;
  int pos;
};

inline void expand(std::vector<Op> word, int sign, std::vector<std::pair<int, int>> pairs,
                   std::vector<ReorderTerm>& out) {
  for (std::size_t i = 0; i + 1 < word.size(); ++i) {
    if (!word[i].creator && word[i + 1].creator) {
      std::vector<Op> contracted = word;
      auto more = pairs;
      more.emplace_back(word[i].pos, word[i + 1].pos);
      contracted.erase(contracted.begin() + static_cast<std::ptrdiff_t>(i),
                       contracted.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      expand(std::move(contracted), sign, std::move(more), out);
      std::swap(word[i], word[i + 1]);
      expand(std::move(word), -sign, std::move(pairs), out);
      return;
    }
  }
  ReorderTerm t;
  t.sign = sign;
  t.pairs = std::move(pairs);
  for (const Op& o : word) (o.creator ? t.creators_left : t.annihilators_left).push_back(o.pos);
  out.push_back(std::move(t));
}

}  // namespace detail

/// All terms of c_{a_0..a_{p-1}} c†_{b_0..b_{q-1}} brought to normal order.
inline std::vector<ReorderTerm> reorder_terms(int n_ann, int n_cre) {
  std::vector<detail::Op> word;
  for (int a = 0; a < n_ann; ++a) word.push_back({false, a});
  for (int b = 0; b < n_cre; ++b) word.push_back({true, b});
  std::vector<ReorderTerm> out;
  detail::expand(std::move(word), 1, {}, out);
  return out;
}

/// Normal-ordered accumulators keyed by (creator count, annihilator count).
/// Each tensor has axes (creators..., annihilators...).
template <class T>
using RawAccumulator = std::map<std::pair<int, int>, Tensor<T>>;

template <class T>
Tensor<T>& raw_slot(RawAccumulator<T>& acc, int n_cre, int n_ann, int n_modes) {
  auto key = std::make_pair(n_cre, n_ann);
  auto it = acc.find(key);
  if (it != acc.end()) return it->second;
  const int rank = n_cre + n_ann;
  if (rank >= 6 && n_modes > kMaxRank6Modes) {
    throw CapacityError("rank-" + std::to_string(rank) + " blocks are refused above " +
                        std::to_string(kMaxRank6Modes) + " modes");
  }
  const std::size_t bytes = ipow(static_cast<std::size_t>(n_modes), rank) * sizeof(T);
  if (bytes > kDefaultBlockByteCeiling) {
    throw CapacityError("rank-" + std::to_string(rank) + " accumulator exceeds the memory ceiling");
  }
  return acc.emplace(key, Tensor<T>(rank, n_modes)).first->second;
}

namespace detail {

inline std::vector<std::vector<int>> ordered_tuples(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(k));
  if (k == 0) {
    out.emplace_back();
    return out;
  }
  if (k > n) return out;
  for (int i = 0; i < k; ++i) cur[i] = i;
  while (true) {
    out.push_back(cur);
    int i = k - 1;
    while (i >= 0 && cur[i] == n - k + i) --i;
    if (i < 0) break;
    ++cur[i];
    for (int j = i + 1; j < k; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

inline std::vector<std::pair<std::vector<int>, int>> signed_permutations(int k) {
  std::vector<int> p(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) p[i] = i;
  std::vector<std::pair<std::vector<int>, int>> out;
  do {
    int inv = 0;
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j)
        if (p[i] > p[j]) ++inv;
    out.emplace_back(p, (inv % 2) ? -1 : 1);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

}  // namespace detail

/// Reduce a raw normal-ordered tensor (axes creators then annihilators) to the
/// canonical block: one entry per ordered creator/annihilator tuple, written at
/// the canonical_layout slot.
template <class T>
Tensor<T> canonical_block(const Tensor<T>& raw, int n_cre, int n_ann) {
  const int n = raw.extent();
  Tensor<T> out(n_cre + n_ann, n);
  const NormalOrder slots = normal_order(canonical_layout(n_cre, n_ann));
  const auto cre_tuples = detail::ordered_tuples(n, n_cre);
  const auto ann_tuples = detail::ordered_tuples(n, n_ann);
  const auto cre_perms = detail::signed_permutations(n_cre);
  const auto ann_perms = detail::signed_permutations(n_ann);
  const std::size_t ext = static_cast<std::size_t>(n);

  // Offsets of every signed permutation of each annihilator tuple, reused across creator tuples.
  std::vector<int> slot(static_cast<std::size_t>(n_cre + n_ann));
  std::vector<std::size_t> ann_offsets(ann_perms.size());
  std::vector<int> ann_signs(ann_perms.size());
  for (const auto& c : cre_tuples) {
    std::vector<std::size_t> cre_offsets(cre_perms.size());
    for (std::size_t p = 0; p < cre_perms.size(); ++p) {
      std::size_t off = 0;
      for (int k = 0; k < n_cre; ++k) off = off * ext + static_cast<std::size_t>(c[cre_perms[p].first[k]]);
      cre_offsets[p] = off * ipow(ext, n_ann);
    }
    for (const auto& d : ann_tuples) {
      T sum{};
      for (std::size_t q = 0; q < ann_perms.size(); ++q) {
        std::size_t off = 0;
        for (int k = 0; k < n_ann; ++k) off = off * ext + static_cast<std::size_t>(d[ann_perms[q].first[k]]);
        const int sq = ann_perms[q].second;
        for (std::size_t p = 0; p < cre_perms.size(); ++p) {
          const T v = raw.data()[cre_offsets[p] + off];
          if (cre_perms[p].second * sq > 0) {
            sum += v;
          } else {
            sum -= v;
          }
        }
      }
      if (sum == T{}) continue;
      for (int k = 0; k < n_cre; ++k) slot[slots.creators[k]] = c[k];
      for (int k = 0; k < n_ann; ++k) slot[slots.annihilators[k]] = d[k];
      out.at(slot) = slots.sign > 0 ? sum : -sum;
    }
  }
  return out;
}

/// Canonical BlockSum from raw accumulators; (0,0) goes to the scalar.
template <class T>
BlockSum<T> canonicalize(const RawAccumulator<T>& acc, int n_modes) {
  BlockSum<T> out;
  out.n_modes = n_modes;
  for (const auto& [key, raw] : acc) {
    if (key.first == 0 && key.second == 0) {
      out.scalar += raw.data()[0];
      continue;
    }
    out.blocks.push_back({canonical_layout(key.first, key.second), canonical_block(raw, key.first, key.second)});
  }
  return out;
}

/// Add factor · :block: into the raw accumulator.
template <class T>
void accumulate_block(RawAccumulator<T>& acc, const Block<T>& b, int n_modes, T factor = T{1}) {
  const NormalOrder o = normal_order(b.layout);
  std::vector<int> perm = o.creators;
  perm.insert(perm.end(), o.annihilators.begin(), o.annihilators.end());
  Tensor<T> t = permute_axes(b.coeffs, perm);
  t *= (o.sign > 0 ? factor : -factor);
  raw_slot(acc, static_cast<int>(o.creators.size()), static_cast<int>(o.annihilators.size()), n_modes) += t;
}

/// Canonical ordered representative of an arbitrary BlockSum.
template <class T>
BlockSum<T> normal_form(const BlockSum<T>& x) {
  RawAccumulator<T> acc;
  for (const auto& b : x.blocks) accumulate_block(acc, b, x.n_modes);
  BlockSum<T> out = canonicalize(acc, x.n_modes);
  out.scalar += x.scalar;
  return out;
}

template <class T>
BlockSum<T> to_blocks(const OperatorPolynomial<T>& p) {
  BlockSum<T> out;
  out.n_modes = p.n_modes;
  out.scalar = p.scalar;
  for (int k : p.present_ranks()) out.blocks.push_back({polynomial_layout(k), *p.block(k)});
  return out;
}

/// Convert a BlockSum back into an OperatorPolynomial (canonical form).
/// Only creation-type blocks (creators − annihilators ∈ {0, 1}) of ranks 1..4, 6 are storable.
template <class T>
OperatorPolynomial<T> to_polynomial(const BlockSum<T>& x) {
  const BlockSum<T> c = normal_form(x);
  OperatorPolynomial<T> p;
  p.n_modes = x.n_modes;
  p.scalar = c.scalar;
  bool parity_set = false;
  for (const auto& b : c.blocks) {
    const NormalOrder o = normal_order(b.layout);
    const int diff = static_cast<int>(o.creators.size()) - static_cast<int>(o.annihilators.size());
    if (diff != 0 && diff != 1) throw DimensionError("block type cannot be stored in an OperatorPolynomial");
    const Parity par = diff == 0 ? Parity::even : Parity::odd;
    if (parity_set && par != p.parity) throw DimensionError("mixed-parity operator");
    p.parity = par;
    parity_set = true;
    const int rank = static_cast<int>(b.layout.size());
    if (rank == 5 || rank > 6) throw DimensionError("rank " + std::to_string(rank) + " has no polynomial slot");
    p.ensure(rank) += b.coeffs;
  }
  if (!parity_set) p.parity = Parity::even;
  if (p.parity == Parity::odd && p.scalar != T{}) throw DimensionError("odd operator with a scalar part");
  return p;
}

/// Hermitian adjoint: reversed slot order, creators and annihilators exchanged, conjugated entries.
template <class T>
BlockSum<T> adjoint(const BlockSum<T>& x) {
  BlockSum<T> out;
  out.n_modes = x.n_modes;
  out.scalar = conj_if_complex(x.scalar);
  for (const auto& b : x.blocks) {
    const int r = static_cast<int>(b.layout.size());
    Layout l(static_cast<std::size_t>(r));
    std::vector<int> perm(static_cast<std::size_t>(r));
    for (int a = 0; a < r; ++a) {
      l[a] = !b.layout[r - 1 - a];
      perm[a] = r - 1 - a;
    }
    Tensor<T> t = permute_axes(b.coeffs, perm);
    if constexpr (is_complex_v<T>) {
      for (auto& v : t.values()) v = std::conj(v);
    }
    out.blocks.push_back({std::move(l), std::move(t)});
  }
  return out;
}

struct ProductOptions {
  int max_rank = 6;          // output blocks above this rank are discarded
  int min_contractions = 0;  // 1 drops the fully uncontracted term
  bool track_discarded = false;
};

namespace detail {

template <class T>
void accumulate_product_pair(const Block<T>& bx, const Block<T>& by, T factor, int n_modes,
                             const ProductOptions& opt, RawAccumulator<T>& kept, RawAccumulator<T>* dropped) {
  const NormalOrder ox = normal_order(bx.layout);
  const NormalOrder oy = normal_order(by.layout);
  const int rx = static_cast<int>(bx.layout.size());
  const int ry = static_cast<int>(by.layout.size());
  const T sign0 = (ox.sign * oy.sign > 0) ? factor : -factor;
  const std::size_t n = static_cast<std::size_t>(n_modes);

  for (const ReorderTerm& term :
       reorder_terms(static_cast<int>(ox.annihilators.size()), static_cast<int>(oy.creators.size()))) {
    const int r = static_cast<int>(term.pairs.size());
    if (r < opt.min_contractions) continue;
    const int n_cre = static_cast<int>(ox.creators.size() + term.creators_left.size());
    const int n_ann = static_cast<int>(term.annihilators_left.size() + oy.annihilators.size());
    RawAccumulator<T>* target = &kept;
    if (n_cre + n_ann > opt.max_rank) {
      if (dropped == nullptr) continue;
      target = dropped;
    }

    // X axes: free (ascending) then contracted (pair order); Y axes: contracted then free.
    std::vector<bool> x_contracted(static_cast<std::size_t>(rx), false);
    std::vector<bool> y_contracted(static_cast<std::size_t>(ry), false);
    std::vector<int> px, py;
    for (const auto& pr : term.pairs) {
      x_contracted[ox.annihilators[pr.first]] = true;
      y_contracted[oy.creators[pr.second]] = true;
    }
    std::vector<int> x_free, y_free;
    for (int a = 0; a < rx; ++a)
      if (!x_contracted[a]) x_free.push_back(a);
    for (int a = 0; a < ry; ++a)
      if (!y_contracted[a]) y_free.push_back(a);
    px = x_free;
    for (const auto& pr : term.pairs) px.push_back(ox.annihilators[pr.first]);
    for (const auto& pr : term.pairs) py.push_back(oy.creators[pr.second]);
    py.insert(py.end(), y_free.begin(), y_free.end());

    const Tensor<T> xp = permute_axes(bx.coeffs, px);
    const Tensor<T> yp = permute_axes(by.coeffs, py);
    const int fx = static_cast<int>(x_free.size());
    const int fy = static_cast<int>(y_free.size());
    const auto rows = static_cast<Eigen::Index>(ipow(n, fx));
    const auto inner = static_cast<Eigen::Index>(ipow(n, r));
    const auto cols = static_cast<Eigen::Index>(ipow(n, fy));
    Tensor<T> prod(fx + fy, n_modes);
    Eigen::Map<const RowMatrix<T>> mx(xp.data(), rows, inner);
    Eigen::Map<const RowMatrix<T>> my(yp.data(), inner, cols);
    Eigen::Map<RowMatrix<T>> mp(prod.data(), rows, cols);
    mp.noalias() = mx * my;

    // prod axes: [x_free..., y_free...]; output axes: [creators..., annihilators...].
    auto pos_x = [&](int axis) {
      return static_cast<int>(std::find(x_free.begin(), x_free.end(), axis) - x_free.begin());
    };
    auto pos_y = [&](int axis) {
      return fx + static_cast<int>(std::find(y_free.begin(), y_free.end(), axis) - y_free.begin());
    };
    std::vector<int> out_perm;
    for (int a : ox.creators) out_perm.push_back(pos_x(a));
    for (int b : term.creators_left) out_perm.push_back(pos_y(oy.creators[b]));
    for (int a : term.annihilators_left) out_perm.push_back(pos_x(ox.annihilators[a]));
    for (int b : oy.annihilators) out_perm.push_back(pos_y(b));

    bool identity = true;
    for (int k = 0; k < static_cast<int>(out_perm.size()); ++k) identity = identity && out_perm[k] == k;
    Tensor<T> out = identity ? std::move(prod) : permute_axes(prod, out_perm);
    out *= (term.sign > 0 ? sign0 : -sign0);
    raw_slot(*target, n_cre, n_ann, n_modes) += out;
  }
}

template <class T>
std::vector<Block<T>> with_scalar(const BlockSum<T>& x) {
  std::vector<Block<T>> v = x.blocks;
  if (x.scalar != T{}) {
    Tensor<T> s(0, x.n_modes);
    s.data()[0] = x.scalar;
    v.push_back({Layout{}, std::move(s)});
  }
  return v;
}

template <class T>
void accumulate_product(const BlockSum<T>& x, const BlockSum<T>& y, T factor, const ProductOptions& opt,
                        RawAccumulator<T>& kept, RawAccumulator<T>* dropped) {
  if (x.n_modes != y.n_modes) throw DimensionError("operator mode counts differ");
  const auto bx = with_scalar(x);
  const auto by = with_scalar(y);
  for (const auto& a : bx)
    for (const auto& b : by) accumulate_product_pair(a, b, factor, x.n_modes, opt, kept, dropped);
}

template <class T>
real_t<T> canonical_norm(const RawAccumulator<T>& acc, int n_modes) {
  long double s = 0.0L;
  const BlockSum<T> c = canonicalize(acc, n_modes);
  s += static_cast<long double>(abs2(c.scalar));
  for (const auto& b : c.blocks) {
    const auto f = static_cast<long double>(frobenius_norm(b.coeffs));
    s += f * f;
  }
  return static_cast<real_t<T>>(std::sqrt(s));
}

}  // namespace detail

template <class T>
struct ProductResult {
  BlockSum<T> kept;
  real_t<T> discarded_norm = 0;  // Frobenius norm of the canonical discarded blocks
};

/// Normal-ordered expansion of the operator product X·Y.
template <class T>
ProductResult<T> product(const BlockSum<T>& x, const BlockSum<T>& y, const ProductOptions& opt = {}) {
  RawAccumulator<T> kept, dropped;
  detail::accumulate_product(x, y, T{1}, opt, kept, opt.track_discarded ? &dropped : nullptr);
  ProductResult<T> r;
  r.kept = canonicalize(kept, x.n_modes);
  if (opt.track_discarded) r.discarded_norm = detail::canonical_norm(dropped, x.n_modes);
  return r;
}

inline bool is_even(const Layout& l) { return l.size() % 2 == 0; }

/// [X, Y] for even X. Fully uncontracted terms cancel and are never formed.
template <class T>
ProductResult<T> commutator(const BlockSum<T>& x, const BlockSum<T>& y, ProductOptions opt = {}) {
  for (const auto& b : x.blocks)
    if (!is_even(b.layout)) throw DimensionError("commutator expects an even left operand");
  opt.min_contractions = std::max(opt.min_contractions, 1);
  RawAccumulator<T> kept, dropped;
  RawAccumulator<T>* d = opt.track_discarded ? &dropped : nullptr;
  detail::accumulate_product(x, y, T{1}, opt, kept, d);
  detail::accumulate_product(y, x, T{-1}, opt, kept, d);
  ProductResult<T> r;
  r.kept = canonicalize(kept, x.n_modes);
  if (opt.track_discarded) r.discarded_norm = detail::canonical_norm(dropped, x.n_modes);
  return r;
}

}  // namespace wick
}  // namespace scramflow
