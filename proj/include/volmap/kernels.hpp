#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops of the NN engine. Every kernel exists as a scalar
// reference; hot float kernels additionally have an AVX2 variant selected at
// runtime. Both variants follow one fixed accumulation-order contract, so a
// given input produces bit-identical output on every backend (the equivalence
// tests assert exactly that).
//
// Layout conventions:
//   in_pad    [cin][(h+2)][(w+2)]  zero-padded input
//   weight    [cout][cin][3][3]    (conv3x3) / [cout][cin] (conv1x1)
//   out,gout  [cout][h][w]
//   gout_pad  [cout][(h+2)][(w+2)] zero-padded upstream gradient
//
// backward_params kernels ACCUMULATE into gweight/gbias.

namespace volmap::kernels {

enum class Backend { scalar, avx2 };

/// Fastest backend this build + CPU supports.
Backend best_backend();

/// Backend the dispatched entry points use. Initialized to best_backend(),
/// overridable via the VOLMAP_KERNELS env var (scalar|avx2) or set_backend().
Backend active_backend();

/// Throws Error if the backend is not available on this build/CPU.
void set_backend(Backend b);

std::string backend_name(Backend b);
bool avx2_available();

// ---------------------------------------------------------------------------
// Dispatched entry points. float consults active_backend(); double always
// runs the scalar reference (it is the verification path).

template <typename T>
void conv3x3_forward(const T* in_pad, int cin, int h, int w, const T* weight,
                     const T* bias, int cout, T* out);

template <typename T>
void conv3x3_backward_input(const T* gout_pad, const T* weight, int cin, int cout,
                            int h, int w, T* gin);

template <typename T>
void conv3x3_backward_params(const T* in_pad, const T* gout, int cin, int cout,
                             int h, int w, T* gweight, T* gbias);

template <typename T>
void conv1x1_forward(const T* in, int cin, int hw, const T* weight, const T* bias,
                     int cout, T* out);

template <typename T>
void conv1x1_backward_input(const T* gout, const T* weight, int cin, int cout,
                            int hw, T* gin);

template <typename T>
void conv1x1_backward_params(const T* in, const T* gout, int cin, int cout, int hw,
                             T* gweight, T* gbias);

template <typename T>
void relu_forward(const T* x, std::size_t n, T* y);

template <typename T>
void relu_backward(const T* x, const T* gy, std::size_t n, T* gx);

/// p <- p - lr*g, fused per element.
template <typename T>
void sgd_update(T* param, const T* grad, T lr, std::size_t n);

// ---------------------------------------------------------------------------
// Reference kernels (also the double-precision path). Exposed for the
// equivalence tests.

namespace scalar {

template <typename T>
void conv3x3_forward(const T* in_pad, int cin, int h, int w, const T* weight,
                     const T* bias, int cout, T* out);
template <typename T>
void conv3x3_backward_input(const T* gout_pad, const T* weight, int cin, int cout,
                            int h, int w, T* gin);
template <typename T>
void conv3x3_backward_params(const T* in_pad, const T* gout, int cin, int cout,
                             int h, int w, T* gweight, T* gbias);
template <typename T>
void conv1x1_forward(const T* in, int cin, int hw, const T* weight, const T* bias,
                     int cout, T* out);
template <typename T>
void conv1x1_backward_input(const T* gout, const T* weight, int cin, int cout,
                            int hw, T* gin);
template <typename T>
void conv1x1_backward_params(const T* in, const T* gout, int cin, int cout, int hw,
                             T* gweight, T* gbias);
template <typename T>
void relu_forward(const T* x, std::size_t n, T* y);
template <typename T>
void relu_backward(const T* x, const T* gy, std::size_t n, T* gx);
template <typename T>
void sgd_update(T* param, const T* grad, T lr, std::size_t n);

}  // namespace scalar

// ---------------------------------------------------------------------------
// AVX2 float kernels. Declared unconditionally; defined only in x86-64 builds
// and reachable only when avx2_available() is true.

namespace avx2 {

void conv3x3_forward(const float* in_pad, int cin, int h, int w, const float* weight,
                     const float* bias, int cout, float* out);
void conv3x3_backward_input(const float* gout_pad, const float* weight, int cin,
                            int cout, int h, int w, float* gin);
void conv3x3_backward_params(const float* in_pad, const float* gout, int cin,
                             int cout, int h, int w, float* gweight, float* gbias);
void conv1x1_forward(const float* in, int cin, int hw, const float* weight,
                     const float* bias, int cout, float* out);
void conv1x1_backward_input(const float* gout, const float* weight, int cin,
                            int cout, int hw, float* gin);
void conv1x1_backward_params(const float* in, const float* gout, int cin, int cout,
                             int hw, float* gweight, float* gbias);
void relu_forward(const float* x, std::size_t n, float* y);
void relu_backward(const float* x, const float* gy, std::size_t n, float* gx);
void sgd_update(float* param, const float* grad, float lr, std::size_t n);

}  // namespace avx2

}  // namespace volmap::kernels
