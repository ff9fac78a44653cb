#pragma once

#if defined(__SSE2__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#endif

namespace groundfit::detail {

/// Scoped flush-to-zero / denormals-are-zero mode. Saturated activations
/// produce subnormal sigmoid outputs whose microcode-assisted arithmetic
/// dominates the fit loop on x86; flushing them is deterministic and loses
/// nothing at the loss scales involved.
class ScopedFlushDenormals {
 public:
#if defined(__SSE2__)
  ScopedFlushDenormals() : csr_(_mm_getcsr()) {
    _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
    _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
  }
  ~ScopedFlushDenormals() { _mm_setcsr(csr_); }

 private:
  unsigned int csr_;
#endif
  ScopedFlushDenormals(const ScopedFlushDenormals&) = delete;
  ScopedFlushDenormals& operator=(const ScopedFlushDenormals&) = delete;

#if !defined(__SSE2__)
 public:
  ScopedFlushDenormals() = default;
#endif
};

}  // namespace groundfit::detail
