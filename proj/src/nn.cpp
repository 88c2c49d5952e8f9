#include "volmap/nn.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <numbers>
#include <string>

#include "volmap/error.hpp"
#include "volmap/kernels.hpp"
#include "volmap/types.hpp"

namespace volmap::nn {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(msg);
}

template <typename T>
void require_chw(const TensorT<T>& t, const char* what) {
  require(t.rank() == 3, std::string(what) + " must be a [C,H,W] tensor");
}

int as_int(std::size_t v) { return static_cast<int>(v); }

}  // namespace

double GaussianRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

template <typename T>
TensorT<T> zero_pad1(const TensorT<T>& x) {
  require_chw(x, "pad input");
  const std::size_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
  TensorT<T> out({c, h + 2, w + 2});
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t y = 0; y < h; ++y)
      std::memcpy(out.data.data() + (ci * (h + 2) + y + 1) * (w + 2) + 1,
                  x.data.data() + (ci * h + y) * w, w * sizeof(T));
  return out;
}

template <typename T>
TensorT<T> conv3x3_forward(const TensorT<T>& x, const TensorT<T>& weight,
                           const TensorT<T>& bias) {
  require_chw(x, "conv3x3 input");
  require(weight.rank() == 4 && weight.shape[2] == 3 && weight.shape[3] == 3,
          "conv3x3 weight must be [cout,cin,3,3]");
  require(weight.shape[1] == x.shape[0], "conv3x3 weight cin mismatch");
  require(bias.rank() == 1 && bias.shape[0] == weight.shape[0],
          "conv3x3 bias shape mismatch");
  const std::size_t cout = weight.shape[0], cin = x.shape[0];
  const std::size_t h = x.shape[1], w = x.shape[2];
  const TensorT<T> xp = zero_pad1(x);
  TensorT<T> y({cout, h, w});
  kernels::conv3x3_forward(xp.data.data(), as_int(cin), as_int(h), as_int(w),
                           weight.data.data(), bias.data.data(), as_int(cout),
                           y.data.data());
  return y;
}

template <typename T>
TensorT<T> conv3x3_backward(const TensorT<T>& x, const TensorT<T>& weight,
                            const TensorT<T>& gy, TensorT<T>& gweight,
                            TensorT<T>& gbias) {
  require(gy.rank() == 3 && gy.shape[0] == weight.shape[0] &&
              gy.shape[1] == x.shape[1] && gy.shape[2] == x.shape[2],
          "conv3x3 upstream gradient shape mismatch");
  require(gweight.same_shape(weight) && gbias.shape == std::vector<std::size_t>{weight.shape[0]},
          "conv3x3 parameter gradient shape mismatch");
  const std::size_t cout = weight.shape[0], cin = x.shape[0];
  const std::size_t h = x.shape[1], w = x.shape[2];
  const TensorT<T> xp = zero_pad1(x);
  const TensorT<T> gyp = zero_pad1(gy);
  TensorT<T> gx({cin, h, w});
  kernels::conv3x3_backward_input(gyp.data.data(), weight.data.data(), as_int(cin),
                                  as_int(cout), as_int(h), as_int(w),
                                  gx.data.data());
  kernels::conv3x3_backward_params(xp.data.data(), gy.data.data(), as_int(cin),
                                   as_int(cout), as_int(h), as_int(w),
                                   gweight.data.data(), gbias.data.data());
  return gx;
}

template <typename T>
TensorT<T> conv1x1_forward(const TensorT<T>& x, const TensorT<T>& weight,
                           const TensorT<T>& bias) {
  require_chw(x, "conv1x1 input");
  require(weight.rank() == 2 && weight.shape[1] == x.shape[0],
          "conv1x1 weight must be [cout,cin]");
  require(bias.rank() == 1 && bias.shape[0] == weight.shape[0],
          "conv1x1 bias shape mismatch");
  const std::size_t cout = weight.shape[0], cin = x.shape[0];
  const std::size_t h = x.shape[1], w = x.shape[2];
  TensorT<T> y({cout, h, w});
  kernels::conv1x1_forward(x.data.data(), as_int(cin), as_int(h * w),
                           weight.data.data(), bias.data.data(), as_int(cout),
                           y.data.data());
  return y;
}

template <typename T>
TensorT<T> conv1x1_backward(const TensorT<T>& x, const TensorT<T>& weight,
                            const TensorT<T>& gy, TensorT<T>& gweight,
                            TensorT<T>& gbias) {
  require(gy.rank() == 3 && gy.shape[0] == weight.shape[0] &&
              gy.shape[1] == x.shape[1] && gy.shape[2] == x.shape[2],
          "conv1x1 upstream gradient shape mismatch");
  require(gweight.same_shape(weight) && gbias.shape == std::vector<std::size_t>{weight.shape[0]},
          "conv1x1 parameter gradient shape mismatch");
  const std::size_t cout = weight.shape[0], cin = x.shape[0];
  const std::size_t h = x.shape[1], w = x.shape[2];
  TensorT<T> gx({cin, h, w});
  kernels::conv1x1_backward_input(gy.data.data(), weight.data.data(), as_int(cin),
                                  as_int(cout), as_int(h * w), gx.data.data());
  kernels::conv1x1_backward_params(x.data.data(), gy.data.data(), as_int(cin),
                                   as_int(cout), as_int(h * w),
                                   gweight.data.data(), gbias.data.data());
  return gx;
}

template <typename T>
TensorT<T> relu_forward(const TensorT<T>& x) {
  TensorT<T> y(x.shape);
  kernels::relu_forward(x.data.data(), x.data.size(), y.data.data());
  return y;
}

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& gy) {
  require(x.same_shape(gy), "relu gradient shape mismatch");
  TensorT<T> gx(x.shape);
  kernels::relu_backward(x.data.data(), gy.data.data(), x.data.size(),
                         gx.data.data());
  return gx;
}

template <typename T>
TensorT<T> maxpool2_forward(const TensorT<T>& x, std::vector<std::int32_t>& argmax) {
  require_chw(x, "maxpool input");
  const std::size_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
  require(h % 2 == 0 && w % 2 == 0, "maxpool input height and width must be even");
  const std::size_t oh = h / 2, ow = w / 2;
  TensorT<T> y({c, oh, ow});
  argmax.assign(y.data.size(), 0);
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (ci * h + 2 * oy) * w + 2 * ox;
        T bv = x.data[best];
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (ci * h + 2 * oy + dy) * w + 2 * ox + dx;
            if (x.data[idx] > bv) {
              bv = x.data[idx];
              best = idx;
            }
          }
        }
        y.data[(ci * oh + oy) * ow + ox] = bv;
        argmax[(ci * oh + oy) * ow + ox] = static_cast<std::int32_t>(best);
      }
    }
  }
  return y;
}

template <typename T>
TensorT<T> maxpool2_backward(const TensorT<T>& gy,
                             const std::vector<std::int32_t>& argmax,
                             std::size_t in_h, std::size_t in_w) {
  require_chw(gy, "maxpool gradient");
  require(argmax.size() == gy.data.size(), "maxpool argmax size mismatch");
  TensorT<T> gx({gy.shape[0], in_h, in_w});
  for (std::size_t i = 0; i < gy.data.size(); ++i)
    gx.data[static_cast<std::size_t>(argmax[i])] += gy.data[i];
  return gx;
}

template <typename T>
TensorT<T> upsample2_forward(const TensorT<T>& x) {
  require_chw(x, "upsample input");
  const std::size_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
  TensorT<T> y({c, 2 * h, 2 * w});
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t oy = 0; oy < 2 * h; ++oy)
      for (std::size_t ox = 0; ox < 2 * w; ++ox)
        y.data[(ci * 2 * h + oy) * 2 * w + ox] =
            x.data[(ci * h + oy / 2) * w + ox / 2];
  return y;
}

template <typename T>
TensorT<T> upsample2_backward(const TensorT<T>& gy) {
  require_chw(gy, "upsample gradient");
  const std::size_t c = gy.shape[0], oh = gy.shape[1], ow = gy.shape[2];
  require(oh % 2 == 0 && ow % 2 == 0, "upsample gradient dims must be even");
  const std::size_t h = oh / 2, w = ow / 2;
  TensorT<T> gx({c, h, w});
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const T* r0 = gy.data.data() + (ci * oh + 2 * y) * ow + 2 * x;
        const T* r1 = gy.data.data() + (ci * oh + 2 * y + 1) * ow + 2 * x;
        gx.data[(ci * h + y) * w + x] = ((r0[0] + r0[1]) + r1[0]) + r1[1];
      }
    }
  }
  return gx;
}

template <typename T>
TensorT<T> concat_forward(const TensorT<T>& a, const TensorT<T>& b) {
  require_chw(a, "concat input");
  require(b.rank() == 3 && a.shape[1] == b.shape[1] && a.shape[2] == b.shape[2],
          "concat spatial dims mismatch");
  TensorT<T> y({a.shape[0] + b.shape[0], a.shape[1], a.shape[2]});
  std::memcpy(y.data.data(), a.data.data(), a.data.size() * sizeof(T));
  std::memcpy(y.data.data() + a.data.size(), b.data.data(),
              b.data.size() * sizeof(T));
  return y;
}

template <typename T>
void concat_backward(const TensorT<T>& gy, std::size_t ca, TensorT<T>& ga,
                     TensorT<T>& gb) {
  require_chw(gy, "concat gradient");
  require(ca <= gy.shape[0], "concat split larger than gradient");
  const std::size_t h = gy.shape[1], w = gy.shape[2];
  ga = TensorT<T>({ca, h, w});
  gb = TensorT<T>({gy.shape[0] - ca, h, w});
  std::memcpy(ga.data.data(), gy.data.data(), ga.data.size() * sizeof(T));
  std::memcpy(gb.data.data(), gy.data.data() + ga.data.size(),
              gb.data.size() * sizeof(T));
}

template <typename T>
double weighted_ce(const TensorT<T>& logits, const LabelGrid& target,
                   const std::vector<double>& class_weights, TensorT<T>* glogits) {
  require_chw(logits, "loss logits");
  const std::size_t ncls = logits.shape[0], h = logits.shape[1], w = logits.shape[2];
  require(target.rows == h && target.cols == w, "loss target shape mismatch");
  require(class_weights.size() == ncls, "loss class weight count mismatch");
  if (glogits) *glogits = TensorT<T>(logits.shape);

  std::int64_t count = 0;
  for (std::size_t i = 0; i < target.data.size(); ++i) {
    const std::int32_t t = target.data[i];
    if (t == kIgnoreLabel) continue;
    require(t >= 0 && static_cast<std::size_t>(t) < ncls,
            "cell label " + std::to_string(t) + " outside [0," +
                std::to_string(ncls) + ")");
    ++count;
  }
  require(count > 0, "every cell carries the ignore label; loss is undefined");

  const std::size_t plane = h * w;
  std::vector<double> prob(ncls);
  double total = 0.0;
  for (std::size_t cell = 0; cell < plane; ++cell) {
    const std::int32_t t = target.data[cell];
    if (t == kIgnoreLabel) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ncls; ++k)
      mx = std::max(mx, static_cast<double>(logits.data[k * plane + cell]));
    double denom = 0.0;
    for (std::size_t k = 0; k < ncls; ++k) {
      prob[k] = std::exp(static_cast<double>(logits.data[k * plane + cell]) - mx);
      denom += prob[k];
    }
    const double wt = class_weights[static_cast<std::size_t>(t)];
    total += wt * (std::log(denom) -
                   (static_cast<double>(logits.data[static_cast<std::size_t>(t) * plane + cell]) - mx));
    if (glogits) {
      for (std::size_t k = 0; k < ncls; ++k) {
        const double onehot = (k == static_cast<std::size_t>(t)) ? 1.0 : 0.0;
        glogits->data[k * plane + cell] =
            static_cast<T>(wt * (prob[k] / denom - onehot) /
                           static_cast<double>(count));
      }
    }
  }
  return total / static_cast<double>(count);
}

template <typename T>
LabelGrid argmax_plane(const TensorT<T>& logits) {
  require_chw(logits, "argmax logits");
  const std::size_t ncls = logits.shape[0], h = logits.shape[1], w = logits.shape[2];
  const std::size_t plane = h * w;
  LabelGrid out(h, w);
  for (std::size_t cell = 0; cell < plane; ++cell) {
    std::size_t best = 0;
    T bv = logits.data[cell];
    for (std::size_t k = 1; k < ncls; ++k) {
      if (logits.data[k * plane + cell] > bv) {
        bv = logits.data[k * plane + cell];
        best = k;
      }
    }
    out.data[cell] = static_cast<std::int32_t>(best);
  }
  return out;
}

template <typename T>
void he_normal_fill(TensorT<T>& t, std::size_t fan_in, GaussianRng& rng) {
  require(fan_in > 0, "he init needs a positive fan-in");
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.data) v = static_cast<T>(rng.normal() * stddev);
}

template <typename T>
void sgd_step(TensorT<T>& param, const TensorT<T>& grad, TensorT<T>* velocity,
              T lr, T momentum) {
  require(param.same_shape(grad), "sgd gradient shape mismatch");
  if (momentum == T(0)) {
    kernels::sgd_update(param.data.data(), grad.data.data(), lr, param.data.size());
    return;
  }
  require(velocity && velocity->same_shape(param), "sgd velocity shape mismatch");
  for (std::size_t i = 0; i < param.data.size(); ++i)
    velocity->data[i] = std::fma(momentum, velocity->data[i], grad.data[i]);
  kernels::sgd_update(param.data.data(), velocity->data.data(), lr,
                      param.data.size());
}

template <typename T>
void sgd_step(std::vector<LayerParamsT<T>>& layers, T lr, T momentum) {
  for (auto& layer : layers) {
    if (momentum != T(0)) {
      if (!layer.vweight.same_shape(layer.weight))
        layer.vweight = TensorT<T>(layer.weight.shape);
      if (!layer.vbias.same_shape(layer.bias))
        layer.vbias = TensorT<T>(layer.bias.shape);
    }
    sgd_step(layer.weight, layer.gweight,
             momentum != T(0) ? &layer.vweight : nullptr, lr, momentum);
    sgd_step(layer.bias, layer.gbias, momentum != T(0) ? &layer.vbias : nullptr,
             lr, momentum);
    layer.zero_grad();
  }
}

std::vector<double> class_weights(const std::vector<double>& frequencies) {
  std::vector<double> w(frequencies.size());
  for (std::size_t i = 0; i < frequencies.size(); ++i) {
    require(frequencies[i] >= 0.0,
            "class frequency " + std::to_string(frequencies[i]) + " is negative");
    w[i] = 1.0 / std::log(1.02 + frequencies[i]);
  }
  return w;
}

#define VOLMAP_NN_INSTANTIATE(T)                                                   \
  template TensorT<T> zero_pad1<T>(const TensorT<T>&);                             \
  template TensorT<T> conv3x3_forward<T>(const TensorT<T>&, const TensorT<T>&,     \
                                         const TensorT<T>&);                       \
  template TensorT<T> conv3x3_backward<T>(const TensorT<T>&, const TensorT<T>&,    \
                                          const TensorT<T>&, TensorT<T>&,          \
                                          TensorT<T>&);                            \
  template TensorT<T> conv1x1_forward<T>(const TensorT<T>&, const TensorT<T>&,     \
                                         const TensorT<T>&);                       \
  template TensorT<T> conv1x1_backward<T>(const TensorT<T>&, const TensorT<T>&,    \
                                          const TensorT<T>&, TensorT<T>&,          \
                                          TensorT<T>&);                            \
  template TensorT<T> relu_forward<T>(const TensorT<T>&);                          \
  template TensorT<T> relu_backward<T>(const TensorT<T>&, const TensorT<T>&);      \
  template TensorT<T> maxpool2_forward<T>(const TensorT<T>&,                       \
                                          std::vector<std::int32_t>&);             \
  template TensorT<T> maxpool2_backward<T>(const TensorT<T>&,                      \
                                           const std::vector<std::int32_t>&,       \
                                           std::size_t, std::size_t);              \
  template TensorT<T> upsample2_forward<T>(const TensorT<T>&);                     \
  template TensorT<T> upsample2_backward<T>(const TensorT<T>&);                    \
  template TensorT<T> concat_forward<T>(const TensorT<T>&, const TensorT<T>&);     \
  template void concat_backward<T>(const TensorT<T>&, std::size_t, TensorT<T>&,    \
                                   TensorT<T>&);                                   \
  template double weighted_ce<T>(const TensorT<T>&, const LabelGrid&,              \
                                 const std::vector<double>&, TensorT<T>*);         \
  template LabelGrid argmax_plane<T>(const TensorT<T>&);                           \
  template void he_normal_fill<T>(TensorT<T>&, std::size_t, GaussianRng&);         \
  template void sgd_step<T>(TensorT<T>&, const TensorT<T>&, TensorT<T>*, T, T);    \
  template void sgd_step<T>(std::vector<LayerParamsT<T>>&, T, T);

VOLMAP_NN_INSTANTIATE(float)
VOLMAP_NN_INSTANTIATE(double)

#undef VOLMAP_NN_INSTANTIATE

}  // namespace volmap::nn
