#pragma once

#include <cmath>

namespace sct {

#if defined(SCT_HAVE_MVEC) && defined(__AVX2__)
extern "C" {
typedef double sct_v4df __attribute__((vector_size(32)));
sct_v4df _ZGVdN4v_exp(sct_v4df);
}

/// exp() over a buffer; the libmvec kernel stays within 1 ulp of libm.
inline void exp_inplace(double* a, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    sct_v4df v = {a[i], a[i + 1], a[i + 2], a[i + 3]};
    v = _ZGVdN4v_exp(v);
    a[i] = v[0];
    a[i + 1] = v[1];
    a[i + 2] = v[2];
    a[i + 3] = v[3];
  }
  for (; i < n; ++i) a[i] = std::exp(a[i]);
}
#else
inline void exp_inplace(double* a, int n) {
  for (int i = 0; i < n; ++i) a[i] = std::exp(a[i]);
}
#endif

}  // namespace sct
