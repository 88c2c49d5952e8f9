#include "volmap/kernels.hpp"

#include <atomic>
#include <cstdlib>

#include "volmap/error.hpp"

namespace volmap::kernels {

bool avx2_available() {
#if defined(VOLMAP_HAVE_AVX2)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend best_backend() {
  return avx2_available() ? Backend::avx2 : Backend::scalar;
}

namespace {

Backend initial_backend() {
  if (const char* env = std::getenv("VOLMAP_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2") {
      if (!avx2_available())
        throw Error("VOLMAP_KERNELS=avx2 but AVX2+FMA is unavailable on this CPU");
      return Backend::avx2;
    }
    if (!v.empty()) throw Error("unknown VOLMAP_KERNELS value: " + v);
  }
  return best_backend();
}

std::atomic<Backend>& state() {
  static std::atomic<Backend> b{initial_backend()};
  return b;
}

}  // namespace

Backend active_backend() { return state().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_available())
    throw Error("AVX2 backend requested but AVX2+FMA is unavailable on this CPU");
  state().store(b, std::memory_order_relaxed);
}

std::string backend_name(Backend b) {
  return b == Backend::scalar ? "scalar" : "avx2";
}

#if defined(VOLMAP_HAVE_AVX2)
#define VOLMAP_DISPATCH(fn, ...)                                          \
  do {                                                                    \
    if (active_backend() == Backend::avx2)                                \
      avx2::fn(__VA_ARGS__);                                              \
    else                                                                  \
      scalar::fn(__VA_ARGS__);                                            \
  } while (0)
#else
#define VOLMAP_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

template <typename T>
void conv3x3_forward(const T* in_pad, int cin, int h, int w, const T* weight,
                     const T* bias, int cout, T* out) {
  scalar::conv3x3_forward(in_pad, cin, h, w, weight, bias, cout, out);
}

template <>
void conv3x3_forward<float>(const float* in_pad, int cin, int h, int w,
                            const float* weight, const float* bias, int cout,
                            float* out) {
  VOLMAP_DISPATCH(conv3x3_forward, in_pad, cin, h, w, weight, bias, cout, out);
}

template <typename T>
void conv3x3_backward_input(const T* gout_pad, const T* weight, int cin, int cout,
                            int h, int w, T* gin) {
  scalar::conv3x3_backward_input(gout_pad, weight, cin, cout, h, w, gin);
}

template <>
void conv3x3_backward_input<float>(const float* gout_pad, const float* weight,
                                   int cin, int cout, int h, int w, float* gin) {
  VOLMAP_DISPATCH(conv3x3_backward_input, gout_pad, weight, cin, cout, h, w, gin);
}

template <typename T>
void conv3x3_backward_params(const T* in_pad, const T* gout, int cin, int cout,
                             int h, int w, T* gweight, T* gbias) {
  scalar::conv3x3_backward_params(in_pad, gout, cin, cout, h, w, gweight, gbias);
}

template <>
void conv3x3_backward_params<float>(const float* in_pad, const float* gout, int cin,
                                    int cout, int h, int w, float* gweight,
                                    float* gbias) {
  VOLMAP_DISPATCH(conv3x3_backward_params, in_pad, gout, cin, cout, h, w, gweight,
                  gbias);
}

template <typename T>
void conv1x1_forward(const T* in, int cin, int hw, const T* weight, const T* bias,
                     int cout, T* out) {
  scalar::conv1x1_forward(in, cin, hw, weight, bias, cout, out);
}

template <>
void conv1x1_forward<float>(const float* in, int cin, int hw, const float* weight,
                            const float* bias, int cout, float* out) {
  VOLMAP_DISPATCH(conv1x1_forward, in, cin, hw, weight, bias, cout, out);
}

template <typename T>
void conv1x1_backward_input(const T* gout, const T* weight, int cin, int cout,
                            int hw, T* gin) {
  scalar::conv1x1_backward_input(gout, weight, cin, cout, hw, gin);
}

template <>
void conv1x1_backward_input<float>(const float* gout, const float* weight, int cin,
                                   int cout, int hw, float* gin) {
  VOLMAP_DISPATCH(conv1x1_backward_input, gout, weight, cin, cout, hw, gin);
}

template <typename T>
void conv1x1_backward_params(const T* in, const T* gout, int cin, int cout, int hw,
                             T* gweight, T* gbias) {
  scalar::conv1x1_backward_params(in, gout, cin, cout, hw, gweight, gbias);
}

template <>
void conv1x1_backward_params<float>(const float* in, const float* gout, int cin,
                                    int cout, int hw, float* gweight, float* gbias) {
  VOLMAP_DISPATCH(conv1x1_backward_params, in, gout, cin, cout, hw, gweight, gbias);
}

template <typename T>
void relu_forward(const T* x, std::size_t n, T* y) {
  scalar::relu_forward(x, n, y);
}

template <>
void relu_forward<float>(const float* x, std::size_t n, float* y) {
  VOLMAP_DISPATCH(relu_forward, x, n, y);
}

template <typename T>
void relu_backward(const T* x, const T* gy, std::size_t n, T* gx) {
  scalar::relu_backward(x, gy, n, gx);
}

template <>
void relu_backward<float>(const float* x, const float* gy, std::size_t n,
                          float* gx) {
  VOLMAP_DISPATCH(relu_backward, x, gy, n, gx);
}

template <typename T>
void sgd_update(T* param, const T* grad, T lr, std::size_t n) {
  scalar::sgd_update(param, grad, lr, n);
}

template <>
void sgd_update<float>(float* param, const float* grad, float lr, std::size_t n) {
  VOLMAP_DISPATCH(sgd_update, param, grad, lr, n);
}

#undef VOLMAP_DISPATCH

template void conv3x3_forward<double>(const double*, int, int, int, const double*,
                                      const double*, int, double*);
template void conv3x3_backward_input<double>(const double*, const double*, int, int,
                                             int, int, double*);
template void conv3x3_backward_params<double>(const double*, const double*, int,
                                              int, int, int, double*, double*);
template void conv1x1_forward<double>(const double*, int, int, const double*,
                                      const double*, int, double*);
template void conv1x1_backward_input<double>(const double*, const double*, int, int,
                                             int, double*);
template void conv1x1_backward_params<double>(const double*, const double*, int,
                                              int, int, double*, double*);
template void relu_forward<double>(const double*, std::size_t, double*);
template void relu_backward<double>(const double*, const double*, std::size_t,
                                    double*);
template void sgd_update<double>(double*, const double*, double, std::size_t);

}  // namespace volmap::kernels
