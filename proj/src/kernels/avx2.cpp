#include "volmap/kernels.hpp"

#include <cmath>
#include <cstddef>
#include <immintrin.h>

// AVX2+FMA variants. Vector lanes map to consecutive output x positions, so
// each output element sees the same fma chain as the scalar reference; tails
// (x >= w8) reuse the reference chain verbatim. Reductions keep the 8-bin
// (lane = x mod 8) layout and fold lanes sequentially, matching scalar bins.
// This TU is compiled with -mavx2 -mfma and entered only after a cpuid check.

namespace volmap::kernels::avx2 {

namespace {

inline float hsum_seq(__m256 v) {
  alignas(32) float lanes[8];
  _mm256_store_ps(lanes, v);
  float s = lanes[0];
  for (int l = 1; l < 8; ++l) s += lanes[l];
  return s;
}

}  // namespace

void conv3x3_forward(const float* in_pad, int cin, int h, int w, const float* weight,
                     const float* bias, int cout, float* out) {
  const int wp = w + 2;
  const std::size_t ics = static_cast<std::size_t>(h + 2) * wp;
  const int w8 = w - (w % 8);
  for (int co = 0; co < cout; ++co) {
    const float* wco = weight + static_cast<std::size_t>(co) * cin * 9;
    float* oc = out + static_cast<std::size_t>(co) * h * w;
    const __m256 vbias = _mm256_set1_ps(bias[co]);
    for (int y = 0; y < h; ++y) {
      float* orow = oc + static_cast<std::size_t>(y) * w;
      int x = 0;
      for (; x < w8; x += 8) {
        __m256 acc = vbias;
        for (int ci = 0; ci < cin; ++ci) {
          const float* ic = in_pad + ci * ics;
          const float* wk = wco + ci * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const float* irow = ic + static_cast<std::size_t>(y + ky) * wp + x;
            acc = _mm256_fmadd_ps(_mm256_set1_ps(wk[ky * 3 + 0]),
                                  _mm256_loadu_ps(irow + 0), acc);
            acc = _mm256_fmadd_ps(_mm256_set1_ps(wk[ky * 3 + 1]),
                                  _mm256_loadu_ps(irow + 1), acc);
            acc = _mm256_fmadd_ps(_mm256_set1_ps(wk[ky * 3 + 2]),
                                  _mm256_loadu_ps(irow + 2), acc);
          }
        }
        _mm256_storeu_ps(orow + x, acc);
      }
      for (; x < w; ++x) {
        float acc = bias[co];
        for (int ci = 0; ci < cin; ++ci) {
          const float* ic = in_pad + ci * ics;
          const float* wk = wco + ci * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const float* irow = ic + static_cast<std::size_t>(y + ky) * wp + x;
            acc = std::fma(wk[ky * 3 + 0], irow[0], acc);
            acc = std::fma(wk[ky * 3 + 1], irow[1], acc);
            acc = std::fma(wk[ky * 3 + 2], irow[2], acc);
          }
        }
        orow[x] = acc;
      }
    }
  }
}

void conv3x3_backward_input(const float* gout_pad, const float* weight, int cin,
                            int cout, int h, int w, float* gin) {
  const int wp = w + 2;
  const std::size_t gcs = static_cast<std::size_t>(h + 2) * wp;
  const int w8 = w - (w % 8);
  for (int ci = 0; ci < cin; ++ci) {
    float* gc = gin + static_cast<std::size_t>(ci) * h * w;
    for (int y = 0; y < h; ++y) {
      float* grow_out = gc + static_cast<std::size_t>(y) * w;
      int x = 0;
      for (; x < w8; x += 8) {
        __m256 acc = _mm256_setzero_ps();
        for (int co = 0; co < cout; ++co) {
          const float* gp = gout_pad + co * gcs;
          const float* wk = weight + (static_cast<std::size_t>(co) * cin + ci) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const float* grow = gp + static_cast<std::size_t>(y + ky) * wp + x;
            acc = _mm256_fmadd_ps(_mm256_set1_ps(wk[(2 - ky) * 3 + 2]),
                                  _mm256_loadu_ps(grow + 0), acc);
            acc = _mm256_fmadd_ps(_mm256_set1_ps(wk[(2 - ky) * 3 + 1]),
                                  _mm256_loadu_ps(grow + 1), acc);
            acc = _mm256_fmadd_ps(_mm256_set1_ps(wk[(2 - ky) * 3 + 0]),
                                  _mm256_loadu_ps(grow + 2), acc);
          }
        }
        _mm256_storeu_ps(grow_out + x, acc);
      }
      for (; x < w; ++x) {
        float acc = 0.0f;
        for (int co = 0; co < cout; ++co) {
          const float* gp = gout_pad + co * gcs;
          const float* wk = weight + (static_cast<std::size_t>(co) * cin + ci) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const float* grow = gp + static_cast<std::size_t>(y + ky) * wp + x;
            acc = std::fma(wk[(2 - ky) * 3 + 2], grow[0], acc);
            acc = std::fma(wk[(2 - ky) * 3 + 1], grow[1], acc);
            acc = std::fma(wk[(2 - ky) * 3 + 0], grow[2], acc);
          }
        }
        grow_out[x] = acc;
      }
    }
  }
}

void conv3x3_backward_params(const float* in_pad, const float* gout, int cin,
                             int cout, int h, int w, float* gweight, float* gbias) {
  const int wp = w + 2;
  const std::size_t ics = static_cast<std::size_t>(h + 2) * wp;
  const int w8 = w - (w % 8);
  for (int co = 0; co < cout; ++co) {
    const float* gc = gout + static_cast<std::size_t>(co) * h * w;
    {
      __m256 vacc = _mm256_setzero_ps();
      float tail = 0.0f;
      for (int y = 0; y < h; ++y) {
        const float* grow = gc + static_cast<std::size_t>(y) * w;
        int x = 0;
        for (; x < w8; x += 8) vacc = _mm256_add_ps(vacc, _mm256_loadu_ps(grow + x));
        for (; x < w; ++x) tail += grow[x];
      }
      gbias[co] += hsum_seq(vacc) + tail;
    }
    for (int ci = 0; ci < cin; ++ci) {
      const float* ic = in_pad + ci * ics;
      float* wk = gweight + (static_cast<std::size_t>(co) * cin + ci) * 9;
      __m256 vacc[9];
      for (auto& v : vacc) v = _mm256_setzero_ps();
      float tacc[9] = {};
      for (int y = 0; y < h; ++y) {
        const float* grow = gc + static_cast<std::size_t>(y) * w;
        const float* ir0 = ic + static_cast<std::size_t>(y + 0) * wp;
        const float* ir1 = ic + static_cast<std::size_t>(y + 1) * wp;
        const float* ir2 = ic + static_cast<std::size_t>(y + 2) * wp;
        int x = 0;
        for (; x < w8; x += 8) {
          const __m256 g = _mm256_loadu_ps(grow + x);
          vacc[0] = _mm256_fmadd_ps(g, _mm256_loadu_ps(ir0 + x + 0), vacc[0]);
          vacc[1] = _mm256_fmadd_ps(g, _mm256_loadu_ps(ir0 + x + 1), vacc[1]);
          vacc[2] = _mm256_fmadd_ps(g, _mm256_loadu_ps(ir0 + x + 2), vacc[2]);
          vacc[3] = _mm256_fmadd_ps(g, _mm256_loadu_ps(ir1 + x + 0), vacc[3]);
          vacc[4] = _mm256_fmadd_ps(g, _mm256_loadu_ps(ir1 + x + 1), vacc[4]);
          vacc[5] = _mm256_fmadd_ps(g, _mm256_loadu_ps(ir1 + x + 2), vacc[5]);
          vacc[6] = _mm256_fmadd_ps(g, _mm256_loadu_ps(ir2 + x + 0), vacc[6]);
          vacc[7] = _mm256_fmadd_ps(g, _mm256_loadu_ps(ir2 + x + 1), vacc[7]);
          vacc[8] = _mm256_fmadd_ps(g, _mm256_loadu_ps(ir2 + x + 2), vacc[8]);
        }
        for (; x < w; ++x) {
          const float g = grow[x];
          tacc[0] = std::fma(g, ir0[x + 0], tacc[0]);
          tacc[1] = std::fma(g, ir0[x + 1], tacc[1]);
          tacc[2] = std::fma(g, ir0[x + 2], tacc[2]);
          tacc[3] = std::fma(g, ir1[x + 0], tacc[3]);
          tacc[4] = std::fma(g, ir1[x + 1], tacc[4]);
          tacc[5] = std::fma(g, ir1[x + 2], tacc[5]);
          tacc[6] = std::fma(g, ir2[x + 0], tacc[6]);
          tacc[7] = std::fma(g, ir2[x + 1], tacc[7]);
          tacc[8] = std::fma(g, ir2[x + 2], tacc[8]);
        }
      }
      for (int k = 0; k < 9; ++k) wk[k] += hsum_seq(vacc[k]) + tacc[k];
    }
  }
}

void conv1x1_forward(const float* in, int cin, int hw, const float* weight,
                     const float* bias, int cout, float* out) {
  const int n8 = hw - (hw % 8);
  for (int co = 0; co < cout; ++co) {
    const float* wco = weight + static_cast<std::size_t>(co) * cin;
    float* oc = out + static_cast<std::size_t>(co) * hw;
    const __m256 vbias = _mm256_set1_ps(bias[co]);
    int i = 0;
    for (; i < n8; i += 8) {
      __m256 acc = vbias;
      for (int ci = 0; ci < cin; ++ci)
        acc = _mm256_fmadd_ps(
            _mm256_set1_ps(wco[ci]),
            _mm256_loadu_ps(in + static_cast<std::size_t>(ci) * hw + i), acc);
      _mm256_storeu_ps(oc + i, acc);
    }
    for (; i < hw; ++i) {
      float acc = bias[co];
      for (int ci = 0; ci < cin; ++ci)
        acc = std::fma(wco[ci], in[static_cast<std::size_t>(ci) * hw + i], acc);
      oc[i] = acc;
    }
  }
}

void conv1x1_backward_input(const float* gout, const float* weight, int cin,
                            int cout, int hw, float* gin) {
  const int n8 = hw - (hw % 8);
  for (int ci = 0; ci < cin; ++ci) {
    float* gc = gin + static_cast<std::size_t>(ci) * hw;
    int i = 0;
    for (; i < n8; i += 8) {
      __m256 acc = _mm256_setzero_ps();
      for (int co = 0; co < cout; ++co)
        acc = _mm256_fmadd_ps(
            _mm256_set1_ps(weight[static_cast<std::size_t>(co) * cin + ci]),
            _mm256_loadu_ps(gout + static_cast<std::size_t>(co) * hw + i), acc);
      _mm256_storeu_ps(gc + i, acc);
    }
    for (; i < hw; ++i) {
      float acc = 0.0f;
      for (int co = 0; co < cout; ++co)
        acc = std::fma(weight[static_cast<std::size_t>(co) * cin + ci],
                       gout[static_cast<std::size_t>(co) * hw + i], acc);
      gc[i] = acc;
    }
  }
}

void conv1x1_backward_params(const float* in, const float* gout, int cin, int cout,
                             int hw, float* gweight, float* gbias) {
  const int n8 = hw - (hw % 8);
  for (int co = 0; co < cout; ++co) {
    const float* gc = gout + static_cast<std::size_t>(co) * hw;
    {
      __m256 vacc = _mm256_setzero_ps();
      float tail = 0.0f;
      int i = 0;
      for (; i < n8; i += 8) vacc = _mm256_add_ps(vacc, _mm256_loadu_ps(gc + i));
      for (; i < hw; ++i) tail += gc[i];
      gbias[co] += hsum_seq(vacc) + tail;
    }
    for (int ci = 0; ci < cin; ++ci) {
      const float* icol = in + static_cast<std::size_t>(ci) * hw;
      __m256 vacc = _mm256_setzero_ps();
      float tail = 0.0f;
      int i = 0;
      for (; i < n8; i += 8)
        vacc = _mm256_fmadd_ps(_mm256_loadu_ps(gc + i), _mm256_loadu_ps(icol + i),
                               vacc);
      for (; i < hw; ++i) tail = std::fma(gc[i], icol[i], tail);
      gweight[static_cast<std::size_t>(co) * cin + ci] += hsum_seq(vacc) + tail;
    }
  }
}

void relu_forward(const float* x, std::size_t n, float* y) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(const float* x, const float* gy, std::size_t n, float* gx) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_ps(gx + i, _mm256_and_ps(mask, _mm256_loadu_ps(gy + i)));
  }
  for (; i < n; ++i) gx[i] = x[i] > 0.0f ? gy[i] : 0.0f;
}

void sgd_update(float* param, const float* grad, float lr, std::size_t n) {
  const __m256 vlr = _mm256_set1_ps(lr);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(param + i,
                     _mm256_fnmadd_ps(vlr, _mm256_loadu_ps(grad + i),
                                      _mm256_loadu_ps(param + i)));
  for (; i < n; ++i) param[i] = std::fma(-lr, grad[i], param[i]);
}

}  // namespace volmap::kernels::avx2
