#include "volmap/volmapnet.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <utility>

#include "json.hpp"
#include "volmap/error.hpp"
#include "volmap/runconfig.hpp"
#include "volmap/types.hpp"

namespace volmap {

namespace {

using nlohmann::json;

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(msg);
}

template <typename T>
void add_into(TensorT<T>& dst, const TensorT<T>& src) {
  require(dst.same_shape(src), "tensor sum shape mismatch");
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

struct LayerSpec {
  std::string name;
  std::int32_t cin;
  std::int32_t cout;
  bool is_1x1;
};

std::vector<LayerSpec> layer_plan(const NetConfig& cfg) {
  const std::int32_t c0 = cfg.level_channels(0), c1 = cfg.level_channels(1),
                     c2 = cfg.level_channels(2), cb = cfg.bottleneck_channels();
  return {
      {"enc1_conv1", cfg.in_channels, c0, false},
      {"enc1_conv2", c0, c0, false},
      {"enc2_conv1", c0, c1, false},
      {"enc2_conv2", c1, c1, false},
      {"enc3_conv1", c1, c2, false},
      {"enc3_conv2", c2, c2, false},
      {"bottleneck_conv1", c2, cb, false},
      {"bottleneck_conv2", cb, cb, false},
      {"dec3_conv1", cb + c2, c2, false},
      {"dec3_conv2", c2, c2, false},
      {"dec2_conv1", c2 + c1, c1, false},
      {"dec2_conv2", c1, c1, false},
      {"dec1_conv1", c1 + c0, c0, false},
      {"dec1_conv2", c0, c0, false},
      {"head", c0, cfg.n_classes, true},
  };
}

}  // namespace

void NetConfig::validate() const {
  if (in_channels < 1) throw Error("net needs at least one input channel");
  if (n_classes < 2) throw Error("net needs at least two classes");
  if (base_channels < 1) throw Error("base_channels must be >= 1");
  for (const auto m : multipliers)
    if (m < 1) throw Error("channel multipliers must be >= 1");
}

template <typename T>
ModelParamsT<T> init_params(const NetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParamsT<T> m;
  m.config = cfg;
  nn::GaussianRng rng(seed);
  for (const LayerSpec& spec : layer_plan(cfg)) {
    nn::LayerParamsT<T> layer;
    layer.name = spec.name;
    const auto cin = static_cast<std::size_t>(spec.cin);
    const auto cout = static_cast<std::size_t>(spec.cout);
    std::size_t fan_in = cin;
    if (spec.is_1x1) {
      layer.weight = TensorT<T>({cout, cin});
    } else {
      layer.weight = TensorT<T>({cout, cin, 3, 3});
      fan_in = cin * 9;
    }
    layer.bias = TensorT<T>({cout});
    nn::he_normal_fill(layer.weight, fan_in, rng);
    layer.zero_grad();
    m.layers.push_back(std::move(layer));
  }
  return m;
}

template <typename T>
TensorT<T> unet_forward(const ModelParamsT<T>& m, const TensorT<T>& x,
                        UNetCache<T>* cache) {
  m.config.validate();
  require(m.layers.size() == 15, "model holds the wrong layer count");
  require(x.rank() == 3 &&
              x.shape[0] == static_cast<std::size_t>(m.config.in_channels),
          "input channel count does not match the model");
  require(x.shape[1] % 8 == 0 && x.shape[2] % 8 == 0 && x.shape[1] >= 8 &&
              x.shape[2] >= 8,
          "input spatial dims must be multiples of 8 (pad first)");
  if (cache) {
    cache->conv.assign(14, {});
    for (auto& a : cache->pool_argmax) a.clear();
  }

  auto conv_relu = [&](int i, TensorT<T> a) {
    const auto& layer = m.layers[static_cast<std::size_t>(i)];
    TensorT<T> pre = nn::conv3x3_forward(a, layer.weight, layer.bias);
    TensorT<T> act = nn::relu_forward(pre);
    if (cache) {
      cache->conv[static_cast<std::size_t>(i)].input = std::move(a);
      cache->conv[static_cast<std::size_t>(i)].pre = std::move(pre);
    }
    return act;
  };
  auto pool = [&](int level, TensorT<T> a) {
    std::vector<std::int32_t> argmax;
    if (cache)
      cache->pool_in_dims[static_cast<std::size_t>(level)] = {a.shape[1],
                                                              a.shape[2]};
    TensorT<T> y = nn::maxpool2_forward(a, argmax);
    if (cache) cache->pool_argmax[static_cast<std::size_t>(level)] = std::move(argmax);
    return y;
  };

  TensorT<T> a = conv_relu(0, x);
  TensorT<T> skip1 = conv_relu(1, std::move(a));
  a = pool(0, skip1);
  a = conv_relu(2, std::move(a));
  TensorT<T> skip2 = conv_relu(3, std::move(a));
  a = pool(1, skip2);
  a = conv_relu(4, std::move(a));
  TensorT<T> skip3 = conv_relu(5, std::move(a));
  a = pool(2, skip3);

  a = conv_relu(6, std::move(a));
  a = conv_relu(7, std::move(a));

  a = nn::concat_forward(nn::upsample2_forward(a), skip3);
  a = conv_relu(8, std::move(a));
  a = conv_relu(9, std::move(a));
  a = nn::concat_forward(nn::upsample2_forward(a), skip2);
  a = conv_relu(10, std::move(a));
  a = conv_relu(11, std::move(a));
  a = nn::concat_forward(nn::upsample2_forward(a), skip1);
  a = conv_relu(12, std::move(a));
  a = conv_relu(13, std::move(a));

  const auto& head = m.layers[14];
  TensorT<T> logits = nn::conv1x1_forward(a, head.weight, head.bias);
  if (cache) cache->head_input = std::move(a);
  return logits;
}

template <typename T>
TensorT<T> unet_backward(ModelParamsT<T>& m, const UNetCache<T>& cache,
                         const TensorT<T>& glogits) {
  require(m.layers.size() == 15 && cache.conv.size() == 14,
          "backward needs a cache from unet_forward");
  const std::size_t c1 = static_cast<std::size_t>(m.config.level_channels(1));
  const std::size_t c2 = static_cast<std::size_t>(m.config.level_channels(2));
  const std::size_t cb = static_cast<std::size_t>(m.config.bottleneck_channels());

  auto conv_relu_back = [&](int i, const TensorT<T>& g) {
    auto& layer = m.layers[static_cast<std::size_t>(i)];
    const auto& cc = cache.conv[static_cast<std::size_t>(i)];
    TensorT<T> gpre = nn::relu_backward(cc.pre, g);
    return nn::conv3x3_backward(cc.input, layer.weight, gpre, layer.gweight,
                                layer.gbias);
  };
  auto pool_back = [&](int level, const TensorT<T>& g) {
    const auto& dims = cache.pool_in_dims[static_cast<std::size_t>(level)];
    return nn::maxpool2_backward(
        g, cache.pool_argmax[static_cast<std::size_t>(level)], dims[0], dims[1]);
  };

  auto& head = m.layers[14];
  TensorT<T> g = nn::conv1x1_backward(cache.head_input, head.weight, glogits,
                                      head.gweight, head.gbias);

  TensorT<T> gup, gskip1, gskip2, gskip3;
  g = conv_relu_back(13, g);
  g = conv_relu_back(12, g);
  nn::concat_backward(g, c1, gup, gskip1);
  g = nn::upsample2_backward(gup);
  g = conv_relu_back(11, g);
  g = conv_relu_back(10, g);
  nn::concat_backward(g, c2, gup, gskip2);
  g = nn::upsample2_backward(gup);
  g = conv_relu_back(9, g);
  g = conv_relu_back(8, g);
  nn::concat_backward(g, cb, gup, gskip3);
  g = nn::upsample2_backward(gup);

  g = conv_relu_back(7, g);
  g = conv_relu_back(6, g);

  g = pool_back(2, g);
  add_into(g, gskip3);
  g = conv_relu_back(5, g);
  g = conv_relu_back(4, g);
  g = pool_back(1, g);
  add_into(g, gskip2);
  g = conv_relu_back(3, g);
  g = conv_relu_back(2, g);
  g = pool_back(0, g);
  add_into(g, gskip1);
  g = conv_relu_back(1, g);
  return conv_relu_back(0, g);
}

template <typename T>
TensorT<T> forward(const ModelParamsT<T>& m, const TensorT<T>& x) {
  CropRecord rec;
  const TensorT<T> xp = pad_to_multiple(x, 8, rec);
  return crop_back(unet_forward(m, xp, static_cast<UNetCache<T>*>(nullptr)), rec);
}

ModelParams train(const std::vector<TrainSample>& data, const NetConfig& net_cfg,
                  const TrainConfig& train_cfg,
                  const std::vector<double>& class_weights, std::uint64_t seed,
                  TrainLog* log) {
  net_cfg.validate();
  require(!data.empty(), "training dataset is empty");
  require(train_cfg.epochs >= 0, "epochs must be >= 0");
  require(train_cfg.batch >= 1, "batch size must be >= 1");
  require(class_weights.size() == static_cast<std::size_t>(net_cfg.n_classes),
          "class weight count does not match n_classes");

  // Pad every sample up front; appended cells carry the ignore label so the
  // loss and gradients are unaffected.
  std::vector<Tensor> xs;
  std::vector<LabelGrid> ts;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const TrainSample& s = data[k];
    require(s.values.rank() == 3 &&
                s.values.shape[0] == static_cast<std::size_t>(net_cfg.in_channels),
            "sample " + std::to_string(k) + " channel count mismatch");
    require(s.target.rows == s.values.shape[1] && s.target.cols == s.values.shape[2],
            "sample " + std::to_string(k) + " target shape mismatch");
    CropRecord rec;
    Tensor xp = pad_to_multiple(s.values, 8, rec);
    LabelGrid tp(xp.shape[1], xp.shape[2], kIgnoreLabel);
    bool any = false;
    for (std::size_t r = 0; r < s.target.rows; ++r)
      for (std::size_t c = 0; c < s.target.cols; ++c) {
        tp.at(r, c) = s.target.at(r, c);
        any = any || s.target.at(r, c) != kIgnoreLabel;
      }
    require(any, "sample " + std::to_string(k) + " has no supervised cells");
    xs.push_back(std::move(xp));
    ts.push_back(std::move(tp));
  }

  ModelParams m = init_params<float>(net_cfg, seed);
  std::mt19937_64 shuffler(seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (log) log->epoch_loss.clear();

  UNetCache<float> cache;
  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(shuffler() % i);
      std::swap(order[i - 1], order[j]);
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(train_cfg.batch)) {
      const std::size_t stop = std::min(
          order.size(), start + static_cast<std::size_t>(train_cfg.batch));
      const float inv_batch = 1.0f / static_cast<float>(stop - start);
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t k = order[b];
        Tensor logits = unet_forward(m, xs[k], &cache);
        Tensor glogits;
        loss_sum += nn::weighted_ce(logits, ts[k], class_weights, &glogits);
        for (auto& v : glogits.data) v *= inv_batch;
        unet_backward(m, cache, glogits);
      }
      nn::sgd_step(m.layers, static_cast<float>(train_cfg.lr),
                   static_cast<float>(train_cfg.momentum));
    }
    if (log)
      log->epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
  }
  return m;
}

PointCloud infer(const PointCloud& cloud, const ModelParams& m,
                 const GridConfig& grid_cfg) {
  require(grid_cfg.n_layers == m.config.in_channels,
          "grid has " + std::to_string(grid_cfg.n_layers) +
              " layers but the model expects " +
              std::to_string(m.config.in_channels) + " input channels");
  const VolGrid grid = voxelize(cloud, grid_cfg);
  CropRecord rec;
  const Tensor xp = pad_to_multiple(grid.values, grid_cfg.pad_to_multiple, rec);
  const Tensor logits = crop_back(forward(m, xp), rec);
  const LabelGrid cells = nn::argmax_plane(logits);
  return backproject(cells, grid, cloud);
}

namespace {

void write_u64_le(std::uint64_t v, std::ostream& out) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t read_u64_le(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void write_f32_le(float v, std::ostream& out) {
  const auto u = std::bit_cast<std::uint32_t>(v);
  const char b[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                     static_cast<char>((u >> 16) & 0xff),
                     static_cast<char>((u >> 24) & 0xff)};
  out.write(b, 4);
}

float read_f32_le(const char* p) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i)
    u |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<float>(u);
}

constexpr char kMagic[8] = {'V', 'O', 'L', 'M', 'A', 'P', '0', '1'};

json shape_json(const std::vector<std::size_t>& shape) {
  json a = json::array();
  for (const auto s : shape) a.push_back(s);
  return a;
}

}  // namespace

void save(const ModelParams& m, const std::string& path) {
  m.config.validate();
  const auto plan = layer_plan(m.config);
  require(m.layers.size() == plan.size(), "model holds the wrong layer count");

  json manifest;
  manifest["version"] = ModelParams::kFormatVersion;
  manifest["dtype"] = "f32";
  manifest["net"] = net_to_json(m.config);
  if (m.grid) manifest["grid"] = grid_to_json(*m.grid);
  json layers = json::array();
  for (const auto& layer : m.layers) {
    json entry;
    entry["name"] = layer.name;
    entry["weight_shape"] = shape_json(layer.weight.shape);
    entry["bias_shape"] = shape_json(layer.bias.shape);
    layers.push_back(std::move(entry));
  }
  manifest["layers"] = std::move(layers);
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(kMagic, 8);
  write_u64_le(text.size(), out);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& layer : m.layers) {
    for (const float v : layer.weight.data) write_f32_le(v, out);
    for (const float v : layer.bias.data) write_f32_le(v, out);
  }
  if (!out) throw Error("short write to " + path);
}

ModelParams load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw ParseError(path + ": not a model file");
  const std::uint64_t mlen = read_u64_le(bytes.data() + 8);
  if (16 + mlen > bytes.size())
    throw ParseError(path + ": manifest extends past end of file");

  json manifest;
  try {
    manifest = json::parse(bytes.begin() + 16,
                           bytes.begin() + 16 + static_cast<std::ptrdiff_t>(mlen));
  } catch (const json::exception& e) {
    throw ParseError(path + ": bad manifest: " + e.what());
  }
  if (!manifest.contains("version") || !manifest["version"].is_number_integer())
    throw ParseError(path + ": manifest has no version");
  if (manifest["version"].get<std::int64_t>() != ModelParams::kFormatVersion)
    throw ParseError(path + ": unsupported model version " +
                     manifest["version"].dump());
  if (manifest.value("dtype", "") != "f32")
    throw ParseError(path + ": unsupported dtype");

  ModelParams m;
  m.config = net_from_json(manifest.at("net"), "/net");
  if (manifest.contains("grid"))
    m.grid = grid_from_json(manifest["grid"], "/grid");

  const auto plan = layer_plan(m.config);
  const auto& layers = manifest.at("layers");
  if (!layers.is_array() || layers.size() != plan.size())
    throw ParseError(path + ": manifest layer list does not match the topology");

  std::size_t offset = 16 + mlen;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& entry = layers[i];
    nn::LayerParams layer;
    layer.name = entry.at("name").get<std::string>();
    if (layer.name != plan[i].name)
      throw ParseError(path + ": unexpected layer " + layer.name);
    std::vector<std::size_t> wshape, bshape;
    for (const auto& v : entry.at("weight_shape")) wshape.push_back(v.get<std::size_t>());
    for (const auto& v : entry.at("bias_shape")) bshape.push_back(v.get<std::size_t>());
    layer.weight = Tensor(wshape);
    layer.bias = Tensor(bshape);
    const std::size_t want = plan[i].is_1x1 ? 2 : 4;
    const bool kernel_ok = plan[i].is_1x1 || (wshape.size() == 4 && wshape[2] == 3 && wshape[3] == 3);
    if (wshape.size() != want || !kernel_ok ||
        wshape[0] != static_cast<std::size_t>(plan[i].cout) ||
        wshape[1] != static_cast<std::size_t>(plan[i].cin) ||
        bshape != std::vector<std::size_t>{static_cast<std::size_t>(plan[i].cout)})
      throw ParseError(path + ": layer " + layer.name +
                       " shape does not match the net config");
    const std::size_t n = layer.weight.data.size() + layer.bias.data.size();
    if (offset + n * 4 > bytes.size())
      throw ParseError(path + ": blob shorter than the manifest shapes");
    for (auto& v : layer.weight.data) {
      v = read_f32_le(bytes.data() + offset);
      offset += 4;
    }
    for (auto& v : layer.bias.data) {
      v = read_f32_le(bytes.data() + offset);
      offset += 4;
    }
    layer.zero_grad();
    m.layers.push_back(std::move(layer));
  }
  if (offset != bytes.size())
    throw ParseError(path + ": trailing bytes after the last blob");
  return m;
}

void write_loss_csv(const TrainLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t i = 0; i < log.epoch_loss.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, log.epoch_loss[i]);
    out << buf;
  }
}

template ModelParamsT<float> init_params<float>(const NetConfig&, std::uint64_t);
template ModelParamsT<double> init_params<double>(const NetConfig&, std::uint64_t);
template TensorT<float> unet_forward<float>(const ModelParamsT<float>&,
                                            const TensorT<float>&,
                                            UNetCache<float>*);
template TensorT<double> unet_forward<double>(const ModelParamsT<double>&,
                                              const TensorT<double>&,
                                              UNetCache<double>*);
template TensorT<float> unet_backward<float>(ModelParamsT<float>&,
                                             const UNetCache<float>&,
                                             const TensorT<float>&);
template TensorT<double> unet_backward<double>(ModelParamsT<double>&,
                                               const UNetCache<double>&,
                                               const TensorT<double>&);
template TensorT<float> forward<float>(const ModelParamsT<float>&,
                                       const TensorT<float>&);
template TensorT<double> forward<double>(const ModelParamsT<double>&,
                                         const TensorT<double>&);

}  // namespace volmap
