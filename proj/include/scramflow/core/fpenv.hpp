// Copyright 2026 The scramflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Flow coefficients decay exponentially through the subnormal range, where
// x86 arithmetic is two orders of magnitude slower. Flushing them to zero
// changes results only below ~1e-308.

#if defined(__SSE2__) || defined(_M_X64)
#include <pmmintrin.h>
#include <xmmintrin.h>
#define SCRAMFLOW_HAS_MXCSR 1
#endif

namespace scramflow {

/// Enables flush-to-zero and denormals-are-zero for the current thread; restores on exit.
class ScopedFlushDenormals {
 public:
  ScopedFlushDenormals() {
#ifdef SCRAMFLOW_HAS_MXCSR
    saved_ = _mm_getcsr();
    _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
    _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
#endif
  }
  ~ScopedFlushDenormals() {
#ifdef SCRAMFLOW_HAS_MXCSR
    _mm_setcsr(saved_);
#endif
  }
  ScopedFlushDenormals(const ScopedFlushDenormals&) = delete;
  ScopedFlushDenormals& operator=(const ScopedFlushDenormals&) = delete;

 private:
  unsigned saved_ = 0;
};

}  // namespace scramflow
