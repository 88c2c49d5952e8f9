#include "volmap/kernels.hpp"

#include <cmath>
#include <cstddef>

// Reference kernels. Accumulation-order contract shared with the AVX2 path:
//   conv forward / backward_input: one fma chain per output element, taps in
//     (ci|co, ky, kx) order, chain seeded with the bias (forward) or zero.
//   backward_params: per parameter, 8 lane bins over x positions < w8
//     (lane = x mod 8), a sequential tail for x >= w8, then a sequential fold
//     bins[0..7] plus tail. w8 = w - w % 8.
// std::fma is correctly rounded, so these chains are bit-identical to the
// fused vector instructions regardless of hardware.

namespace volmap::kernels::scalar {

template <typename T>
void conv3x3_forward(const T* in_pad, int cin, int h, int w, const T* weight,
                     const T* bias, int cout, T* out) {
  const int wp = w + 2;
  const std::size_t ics = static_cast<std::size_t>(h + 2) * wp;
  for (int co = 0; co < cout; ++co) {
    const T* wco = weight + static_cast<std::size_t>(co) * cin * 9;
    T* oc = out + static_cast<std::size_t>(co) * h * w;
    for (int y = 0; y < h; ++y) {
      T* orow = oc + static_cast<std::size_t>(y) * w;
      for (int x = 0; x < w; ++x) {
        T acc = bias[co];
        for (int ci = 0; ci < cin; ++ci) {
          const T* ic = in_pad + ci * ics;
          const T* wk = wco + ci * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const T* irow = ic + static_cast<std::size_t>(y + ky) * wp + x;
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

template <typename T>
void conv3x3_backward_input(const T* gout_pad, const T* weight, int cin, int cout,
                            int h, int w, T* gin) {
  const int wp = w + 2;
  const std::size_t gcs = static_cast<std::size_t>(h + 2) * wp;
  for (int ci = 0; ci < cin; ++ci) {
    T* gc = gin + static_cast<std::size_t>(ci) * h * w;
    for (int y = 0; y < h; ++y) {
      T* grow_out = gc + static_cast<std::size_t>(y) * w;
      for (int x = 0; x < w; ++x) {
        T acc = T(0);
        for (int co = 0; co < cout; ++co) {
          const T* gp = gout_pad + co * gcs;
          const T* wk = weight + (static_cast<std::size_t>(co) * cin + ci) * 9;
          for (int ky = 0; ky < 3; ++ky) {
            const T* grow = gp + static_cast<std::size_t>(y + ky) * wp + x;
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

template <typename T>
void conv3x3_backward_params(const T* in_pad, const T* gout, int cin, int cout,
                             int h, int w, T* gweight, T* gbias) {
  const int wp = w + 2;
  const std::size_t ics = static_cast<std::size_t>(h + 2) * wp;
  const int w8 = w - (w % 8);
  for (int co = 0; co < cout; ++co) {
    const T* gc = gout + static_cast<std::size_t>(co) * h * w;
    {
      T bins[8] = {};
      T tail = T(0);
      for (int y = 0; y < h; ++y) {
        const T* grow = gc + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w8; ++x) bins[x & 7] += grow[x];
        for (int x = w8; x < w; ++x) tail += grow[x];
      }
      T s = bins[0];
      for (int l = 1; l < 8; ++l) s += bins[l];
      gbias[co] += s + tail;
    }
    for (int ci = 0; ci < cin; ++ci) {
      const T* ic = in_pad + ci * ics;
      T* wk = gweight + (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          T bins[8] = {};
          T tail = T(0);
          for (int y = 0; y < h; ++y) {
            const T* grow = gc + static_cast<std::size_t>(y) * w;
            const T* irow = ic + static_cast<std::size_t>(y + ky) * wp + kx;
            for (int x = 0; x < w8; ++x)
              bins[x & 7] = std::fma(grow[x], irow[x], bins[x & 7]);
            for (int x = w8; x < w; ++x) tail = std::fma(grow[x], irow[x], tail);
          }
          T s = bins[0];
          for (int l = 1; l < 8; ++l) s += bins[l];
          wk[ky * 3 + kx] += s + tail;
        }
      }
    }
  }
}

template <typename T>
void conv1x1_forward(const T* in, int cin, int hw, const T* weight, const T* bias,
                     int cout, T* out) {
  for (int co = 0; co < cout; ++co) {
    const T* wco = weight + static_cast<std::size_t>(co) * cin;
    T* oc = out + static_cast<std::size_t>(co) * hw;
    for (int i = 0; i < hw; ++i) {
      T acc = bias[co];
      for (int ci = 0; ci < cin; ++ci)
        acc = std::fma(wco[ci], in[static_cast<std::size_t>(ci) * hw + i], acc);
      oc[i] = acc;
    }
  }
}

template <typename T>
void conv1x1_backward_input(const T* gout, const T* weight, int cin, int cout,
                            int hw, T* gin) {
  for (int ci = 0; ci < cin; ++ci) {
    T* gc = gin + static_cast<std::size_t>(ci) * hw;
    for (int i = 0; i < hw; ++i) {
      T acc = T(0);
      for (int co = 0; co < cout; ++co)
        acc = std::fma(weight[static_cast<std::size_t>(co) * cin + ci],
                       gout[static_cast<std::size_t>(co) * hw + i], acc);
      gc[i] = acc;
    }
  }
}

template <typename T>
void conv1x1_backward_params(const T* in, const T* gout, int cin, int cout, int hw,
                             T* gweight, T* gbias) {
  const int n8 = hw - (hw % 8);
  for (int co = 0; co < cout; ++co) {
    const T* gc = gout + static_cast<std::size_t>(co) * hw;
    {
      T bins[8] = {};
      T tail = T(0);
      for (int i = 0; i < n8; ++i) bins[i & 7] += gc[i];
      for (int i = n8; i < hw; ++i) tail += gc[i];
      T s = bins[0];
      for (int l = 1; l < 8; ++l) s += bins[l];
      gbias[co] += s + tail;
    }
    for (int ci = 0; ci < cin; ++ci) {
      const T* icol = in + static_cast<std::size_t>(ci) * hw;
      T bins[8] = {};
      T tail = T(0);
      for (int i = 0; i < n8; ++i) bins[i & 7] = std::fma(gc[i], icol[i], bins[i & 7]);
      for (int i = n8; i < hw; ++i) tail = std::fma(gc[i], icol[i], tail);
      T s = bins[0];
      for (int l = 1; l < 8; ++l) s += bins[l];
      gweight[static_cast<std::size_t>(co) * cin + ci] += s + tail;
    }
  }
}

template <typename T>
void relu_forward(const T* x, std::size_t n, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(const T* x, const T* gy, std::size_t n, T* gx) {
  for (std::size_t i = 0; i < n; ++i) gx[i] = x[i] > T(0) ? gy[i] : T(0);
}

template <typename T>
void sgd_update(T* param, const T* grad, T lr, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) param[i] = std::fma(-lr, grad[i], param[i]);
}

#define VOLMAP_INSTANTIATE(T)                                                        \
  template void conv3x3_forward<T>(const T*, int, int, int, const T*, const T*, int, \
                                   T*);                                              \
  template void conv3x3_backward_input<T>(const T*, const T*, int, int, int, int,    \
                                          T*);                                       \
  template void conv3x3_backward_params<T>(const T*, const T*, int, int, int, int,   \
                                           T*, T*);                                  \
  template void conv1x1_forward<T>(const T*, int, int, const T*, const T*, int, T*); \
  template void conv1x1_backward_input<T>(const T*, const T*, int, int, int, T*);    \
  template void conv1x1_backward_params<T>(const T*, const T*, int, int, int, T*,    \
                                           T*);                                      \
  template void relu_forward<T>(const T*, std::size_t, T*);                          \
  template void relu_backward<T>(const T*, const T*, std::size_t, T*);               \
  template void sgd_update<T>(T*, const T*, T, std::size_t);

VOLMAP_INSTANTIATE(float)
VOLMAP_INSTANTIATE(double)

#undef VOLMAP_INSTANTIATE

}  // namespace volmap::kernels::scalar
