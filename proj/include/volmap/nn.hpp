#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "volmap/tensor.hpp"

// Single-sample NN ops over [C,H,W] tensors. Inner loops of the convolutions,
// relu and the SGD update go through the dispatched kernels; everything else
// is plain code that behaves identically on every backend. Batching is a loop
// over samples with gradient accumulation, done by the network driver.

namespace volmap::nn {

/// Deterministic standard-normal generator: mt19937_64 plus Box-Muller,
/// independent of std::normal_distribution's unspecified algorithm.
class GaussianRng {
 public:
  explicit GaussianRng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform draw in [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double normal();

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// [C,H,W] -> [C,H+2,W+2] with a zero border.
template <typename T>
TensorT<T> zero_pad1(const TensorT<T>& x);

/// x [cin,h,w], weight [cout,cin,3,3], bias [cout] -> [cout,h,w], zero padding.
template <typename T>
TensorT<T> conv3x3_forward(const TensorT<T>& x, const TensorT<T>& weight,
                           const TensorT<T>& bias);

/// Returns gx; accumulates into gweight/gbias (which must be pre-shaped).
template <typename T>
TensorT<T> conv3x3_backward(const TensorT<T>& x, const TensorT<T>& weight,
                            const TensorT<T>& gy, TensorT<T>& gweight,
                            TensorT<T>& gbias);

/// x [cin,h,w], weight [cout,cin], bias [cout] -> [cout,h,w].
template <typename T>
TensorT<T> conv1x1_forward(const TensorT<T>& x, const TensorT<T>& weight,
                           const TensorT<T>& bias);

template <typename T>
TensorT<T> conv1x1_backward(const TensorT<T>& x, const TensorT<T>& weight,
                            const TensorT<T>& gy, TensorT<T>& gweight,
                            TensorT<T>& gbias);

template <typename T>
TensorT<T> relu_forward(const TensorT<T>& x);

/// x is the pre-activation input saved from the forward pass.
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& gy);

/// 2x2 stride-2 max pool; h and w must be even. argmax records the flat input
/// index of each winner (first occurrence wins ties) for the backward pass.
template <typename T>
TensorT<T> maxpool2_forward(const TensorT<T>& x, std::vector<std::int32_t>& argmax);

template <typename T>
TensorT<T> maxpool2_backward(const TensorT<T>& gy,
                             const std::vector<std::int32_t>& argmax,
                             std::size_t in_h, std::size_t in_w);

/// Nearest-neighbor x2: [c,h,w] -> [c,2h,2w].
template <typename T>
TensorT<T> upsample2_forward(const TensorT<T>& x);

template <typename T>
TensorT<T> upsample2_backward(const TensorT<T>& gy);

/// Channel concatenation [ca,h,w] + [cb,h,w] -> [ca+cb,h,w].
template <typename T>
TensorT<T> concat_forward(const TensorT<T>& a, const TensorT<T>& b);

template <typename T>
void concat_backward(const TensorT<T>& gy, std::size_t ca, TensorT<T>& ga,
                     TensorT<T>& gb);

/// Weighted softmax cross-entropy over logits [ncls,h,w] against a [h,w] label
/// plane. Cells labeled kIgnoreLabel contribute nothing. Loss is the mean over
/// the remaining cells of w[t] * -log softmax[t]; the gradient written to
/// glogits (if non-null) is w[t] * (softmax - onehot) / count. Per-cell math
/// runs in double with max subtraction. Throws if every cell is ignored.
template <typename T>
double weighted_ce(const TensorT<T>& logits, const LabelGrid& target,
                   const std::vector<double>& class_weights, TensorT<T>* glogits);

/// Inverse-log class weighting: w_c = 1 / ln(1.02 + f_c) for frequencies in
/// [0,1]. Finite for every f >= 0.
std::vector<double> class_weights(const std::vector<double>& frequencies);

/// Per-cell argmax over channels; ties pick the lower class id.
template <typename T>
LabelGrid argmax_plane(const TensorT<T>& logits);

/// He-normal fill: N(0, sqrt(2 / fan_in)).
template <typename T>
void he_normal_fill(TensorT<T>& t, std::size_t fan_in, GaussianRng& rng);

/// velocity <- momentum * velocity + grad; param <- param - lr * velocity.
/// With momentum == 0 the velocity buffer is bypassed entirely.
template <typename T>
void sgd_step(TensorT<T>& param, const TensorT<T>& grad, TensorT<T>* velocity,
              T lr, T momentum);

/// One named parameter pair with matching gradient buffers. Momentum buffers
/// are allocated on first use.
template <typename T>
struct LayerParamsT {
  std::string name;
  TensorT<T> weight, bias;
  TensorT<T> gweight, gbias;
  TensorT<T> vweight, vbias;

  void zero_grad() {
    gweight = TensorT<T>(weight.shape);
    gbias = TensorT<T>(bias.shape);
  }
};

using LayerParams = LayerParamsT<float>;

/// Updates every layer in place, then zeroes its gradient buffers.
template <typename T>
void sgd_step(std::vector<LayerParamsT<T>>& layers, T lr, T momentum);

}  // namespace volmap::nn
