#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "volmap/nn.hpp"
#include "volmap/tensor.hpp"
#include "volmap/voxelizer.hpp"

// The lightweight 3-level UNet over volumetric BEV grids: encoder of three
// conv-conv-pool stages, two bottleneck convs, decoder of three
// upsample-concat-conv-conv stages, and a 1x1 head. No batch norm, nearest
// upsampling instead of deconvolution.

namespace volmap {

struct NetConfig {
  std::int32_t in_channels = 10;  // grid n_layers
  std::int32_t n_classes = 6;
  std::int32_t base_channels = 16;
  /// Encoder width multipliers per level; bottleneck width is
  /// base_channels * multipliers[2] * 2.
  std::array<std::int32_t, 3> multipliers{1, 2, 4};

  void validate() const;
  std::int32_t level_channels(int level) const {
    return base_channels * multipliers[static_cast<std::size_t>(level)];
  }
  std::int32_t bottleneck_channels() const { return 2 * level_channels(2); }
};

template <typename T>
struct ModelParamsT {
  static constexpr std::int32_t kFormatVersion = 1;

  NetConfig config;
  /// 15 layers in forward order: enc{1,2,3}_conv{1,2}, bottleneck_conv{1,2},
  /// dec{3,2,1}_conv{1,2}, head.
  std::vector<nn::LayerParamsT<T>> layers;
  /// Grid the model was trained for; carried in the weight file so inference
  /// needs no separate config.
  std::optional<GridConfig> grid;
};

using ModelParams = ModelParamsT<float>;

/// He-normal weights, zero biases, deterministic for a fixed seed.
template <typename T>
ModelParamsT<T> init_params(const NetConfig& cfg, std::uint64_t seed);

template <typename T>
struct UNetCache {
  struct ConvCache {
    TensorT<T> input;
    TensorT<T> pre;  // pre-activation output
  };
  std::vector<ConvCache> conv;  // the 12 3x3 convs, forward order
  TensorT<T> head_input;
  std::array<std::vector<std::int32_t>, 3> pool_argmax;
  std::array<std::array<std::size_t, 2>, 3> pool_in_dims;
};

/// Core pass. x is [in_channels,H,W] with H,W multiples of 8 and >= 8.
/// Returns logits [n_classes,H,W]. cache may be null for inference.
template <typename T>
TensorT<T> unet_forward(const ModelParamsT<T>& m, const TensorT<T>& x,
                        UNetCache<T>* cache);

/// Accumulates parameter gradients from the logit gradient; returns the input
/// gradient.
template <typename T>
TensorT<T> unet_backward(ModelParamsT<T>& m, const UNetCache<T>& cache,
                         const TensorT<T>& glogits);

/// unet_forward for arbitrary H,W: pads to the next multiple of 8, crops the
/// logits back.
template <typename T>
TensorT<T> forward(const ModelParamsT<T>& m, const TensorT<T>& x);

struct TrainConfig {
  int epochs = 300;
  double lr = 1e-4;
  int batch = 16;
  double momentum = 0.0;
};

struct TrainSample {
  Tensor values;     // [in_channels, rows, cols]
  LabelGrid target;  // [rows, cols], ignore-sentinel cells excluded from loss
};

struct TrainLog {
  std::vector<double> epoch_loss;  // mean per-sample loss per epoch
};

/// Minibatch SGD over shuffled samples. Weight init and the epoch shuffles
/// both derive from seed, so two runs with identical inputs produce identical
/// parameters and loss logs. Samples of any spatial size are padded
/// internally (targets with the ignore sentinel). Throws on an empty dataset.
ModelParams train(const std::vector<TrainSample>& data, const NetConfig& net_cfg,
                  const TrainConfig& train_cfg,
                  const std::vector<double>& class_weights, std::uint64_t seed,
                  TrainLog* log);

/// Full pipeline: voxelize, forward, per-cell argmax, back-project. Out-of-ROI
/// points come back with the ignore label.
PointCloud infer(const PointCloud& cloud, const ModelParams& m,
                 const GridConfig& grid_cfg);

/// Weight container: 8-byte magic, u64 little-endian manifest length, JSON
/// manifest (version, dtype, net config, grid echo, layer names and shapes),
/// then raw little-endian float32 blobs in layer order (weight then bias).
/// save(load(p)) is byte-identical to p.
void save(const ModelParams& m, const std::string& path);
ModelParams load(const std::string& path);

void write_loss_csv(const TrainLog& log, const std::string& path);

}  // namespace volmap
