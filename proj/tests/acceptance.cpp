#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

// Acceptance gate. One test case per criterion, each ending in exactly one
//   ACCEPTANCE NN (<name>): PASS|FAIL
// line; ctest keys on that line. Criterion 10 is a soft bound and always
// passes, logging a WARN instead when the budget is missed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "volmap/geometry.hpp"
#include "volmap/labeler.hpp"
#include "volmap/metrics.hpp"
#include "volmap/nn.hpp"
#include "volmap/spherical.hpp"
#include "volmap/synthgen.hpp"
#include "volmap/types.hpp"
#include "volmap/volmapnet.hpp"
#include "volmap/voxelizer.hpp"

using namespace volmap;
using nlohmann::json;

namespace {

void verdict(const char* num, const char* name, bool ok) {
    std::printf("ACCEPTANCE %s (%s): %s\n", num, name, ok ? "PASS" : "FAIL");
    std::fflush(stdout);
    CHECK(ok);
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Rng {
    std::mt19937_64 gen;
    explicit Rng(std::uint64_t seed) : gen(seed) {}
    double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
    double range(double lo, double hi) { return lo + uniform() * (hi - lo); }
    std::int64_t index(std::int64_t n) {
        return static_cast<std::int64_t>(gen() % static_cast<std::uint64_t>(n));
    }
};

PointCloud random_cloud(Rng& rng, std::size_t n, const GridConfig& cfg, bool labeled,
                        int n_classes = 4) {
    PointCloud cloud;
    for (std::size_t i = 0; i < n; ++i) {
        Point p;
        p.x = rng.range(cfg.x_range.first - 5.0, cfg.x_range.second + 5.0);
        p.y = rng.range(cfg.y_range.first - 5.0, cfg.y_range.second + 5.0);
        p.z = rng.range(-2.0, 1.0);
        p.intensity = rng.uniform();
        p.layer = static_cast<int32_t>(rng.index(cfg.n_layers));
        p.sensor_id = 1;
        if (labeled) {
            const int32_t lbl = rng.uniform() < 0.1
                                    ? kIgnoreLabel
                                    : static_cast<int32_t>(rng.index(n_classes));
            cloud.push_back(p, lbl);
        } else {
            cloud.push_back(p);
        }
    }
    return cloud;
}

OrientedBox3D scene_box(double cx, double cy, double cz, double dx, double dy, double dz,
                        double yaw, int32_t cls) {
    OrientedBox3D b;
    b.center = {cx, cy, cz};
    b.dims = {dx, dy, dz};
    b.yaw = yaw;
    b.class_id = cls;
    return b;
}

SensorSpec ring_sensor(int32_t id, double tx, double ty, double tz, double yaw) {
    SensorSpec s;
    s.id = id;
    s.pose = SensorPose::from_euler_zyx(tx, ty, tz, 0.0, 0.0, yaw);
    s.azimuth_fov = {-3.141592653589793, 3.141592653589793};
    s.azimuth_step = 0.012;
    return s;
}

// Training scene for the overfit gate: two sensors, two foreground classes on
// a ground plane, everything within the ROI below.
SceneSpec overfit_scene() {
    SceneSpec scene;
    scene.seed = 7;
    scene.ground_z = -1.7;
    scene.frame_jitter = 0.3;
    scene.obstacles = {
        scene_box(5.0, 3.0, -0.8, 2.2, 1.8, 1.8, 0.3, 1),
        scene_box(-6.0, -2.0, -0.8, 1.8, 1.8, 1.8, -0.5, 1),
        scene_box(-3.0, 5.0, -0.75, 1.6, 2.4, 1.9, 1.0, 2),
        scene_box(4.0, -5.0, -0.8, 2.4, 1.6, 1.8, 0.0, 2),
    };
    scene.sensors = {ring_sensor(1, 1.5, 0.0, 0.5, 0.0),
                     ring_sensor(2, -1.5, 0.3, 0.6, 3.141592653589793)};
    return scene;
}

// Per-op central-difference check: |numeric - analytic| relative to the larger
// magnitude must stay below tol at every coordinate.
struct GradCheck {
    double max_rel = 0.0;
    void compare(double numeric, double analytic, double tol) {
        const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
        max_rel = std::max(max_rel, std::abs(numeric - analytic) / scale);
        CHECK(std::abs(numeric - analytic) / scale < tol);
    }
};

void fill_randn(TensorD& t, nn::GaussianRng& rng) {
    for (double& v : t.data) v = rng.normal();
}

}  // namespace

// -------------------------------------------------------------------- 01

TEST_CASE("acceptance 01: voxelizer matches a brute-force oracle") {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(101);
    bool ok = true;

    for (int trial = 0; trial < 200 && ok; ++trial) {
        GridConfig cfg;
        cfg.x_range = {-rng.range(5.0, 30.0), rng.range(5.0, 30.0)};
        cfg.y_range = {-rng.range(5.0, 30.0), rng.range(5.0, 30.0)};
        cfg.res_x = rng.range(0.1, 0.8);
        cfg.res_y = rng.range(0.1, 0.8);
        cfg.n_layers = static_cast<int32_t>(1 + rng.index(12));
        if (trial % 4 == 0)
            cfg.shape_override = {
                {std::max<std::int32_t>(
                     1, cfg.derived_rows() + static_cast<std::int32_t>(rng.index(8)) - 2),
                 std::max<std::int32_t>(
                     1, cfg.derived_cols() + static_cast<std::int32_t>(rng.index(8)) - 2)}};

        const PointCloud cloud = random_cloud(rng, rng.index(10000), cfg, false);
        const VolGrid grid = voxelize(cloud, cfg);

        // Independent per-point oracle: plain floor binning, raw-range and
        // in-grid checks, running float max from a zero-filled tensor.
        Tensor values({static_cast<std::size_t>(cfg.n_layers),
                       static_cast<std::size_t>(cfg.rows()),
                       static_cast<std::size_t>(cfg.cols())});
        std::vector<std::int32_t> row(cloud.size(), -1), col(cloud.size(), -1);
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const Point p = cloud.point(i);
            const auto r =
                static_cast<std::int32_t>(std::floor((p.x - cfg.origin_x()) / cfg.res_x));
            const auto c =
                static_cast<std::int32_t>(std::floor((p.y - cfg.origin_y()) / cfg.res_y));
            const bool in = p.x >= cfg.x_range.first && p.x < cfg.x_range.second &&
                            p.y >= cfg.y_range.first && p.y < cfg.y_range.second &&
                            r >= 0 && r < cfg.rows() && c >= 0 && c < cfg.cols();
            if (!in) {
                out.push_back(i);
                continue;
            }
            row[i] = r;
            col[i] = c;
            float& cell = values.at(static_cast<std::size_t>(p.layer),
                                    static_cast<std::size_t>(r), static_cast<std::size_t>(c));
            cell = std::max(cell, static_cast<float>(p.intensity));
        }

        ok = ok && grid.values.shape == values.shape && grid.values.data == values.data &&
             grid.point_row == row && grid.point_col == col && grid.out_of_roi == out;
    }

    const double sec = elapsed_s(t0);
    std::printf("  200 randomized clouds and grids, exact match, %.1fs\n", sec);
    verdict("01", "voxelizer oracle", ok && sec < 60.0);
}

// -------------------------------------------------------------------- 02

TEST_CASE("acceptance 02: voxelization is permutation invariant") {
    Rng rng(202);
    bool ok = true;
    for (int trial = 0; trial < 50 && ok; ++trial) {
        GridConfig cfg;
        cfg.n_layers = static_cast<int32_t>(1 + rng.index(10));
        const PointCloud cloud = random_cloud(rng, 2000, cfg, false);
        const VolGrid reference = voxelize(cloud, cfg);

        std::vector<std::size_t> order(cloud.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (int shuffle = 0; shuffle < 5 && ok; ++shuffle) {
            std::shuffle(order.begin(), order.end(), rng.gen);
            PointCloud permuted;
            for (std::size_t i : order) permuted.push_back(cloud.point(i));
            const VolGrid grid = voxelize(permuted, cfg);
            ok = ok && grid.values.shape == reference.values.shape &&
                 grid.values.data == reference.values.data;
        }
    }
    std::printf("  50 clouds x 5 shuffles, bit-identical tensors\n");
    verdict("02", "permutation invariance", ok);
}

// -------------------------------------------------------------------- 03

TEST_CASE("acceptance 03: gradients match finite differences") {
    const auto t0 = std::chrono::steady_clock::now();
    const double eps = 1e-5;
    nn::GaussianRng rng(303);
    GradCheck per_op;

    // Shared scaffolding: loss = sum(coef * output), so dLoss/dOut = coef.
    auto coefs = [&rng](const TensorD& like) {
        TensorD c(like.shape);
        fill_randn(c, rng);
        return c;
    };
    auto dot = [](const TensorD& a, const TensorD& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
        return s;
    };

    {  // 3x3 convolution: input, weight and bias gradients.
        TensorD x({2, 5, 5}), w({3, 2, 3, 3}), b({3});
        fill_randn(x, rng);
        fill_randn(w, rng);
        fill_randn(b, rng);
        const TensorD gy = coefs(nn::conv3x3_forward(x, w, b));
        TensorD gw(w.shape), gb(b.shape);
        const TensorD gx = nn::conv3x3_backward(x, w, gy, gw, gb);
        auto loss = [&]() { return dot(nn::conv3x3_forward(x, w, b), gy); };
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            const double save = x.data[i];
            x.data[i] = save + eps;
            const double up = loss();
            x.data[i] = save - eps;
            const double dn = loss();
            x.data[i] = save;
            per_op.compare((up - dn) / (2 * eps), gx.data[i], 1e-4);
        }
        for (std::size_t i = 0; i < w.data.size(); ++i) {
            const double save = w.data[i];
            w.data[i] = save + eps;
            const double up = loss();
            w.data[i] = save - eps;
            const double dn = loss();
            w.data[i] = save;
            per_op.compare((up - dn) / (2 * eps), gw.data[i], 1e-4);
        }
        for (std::size_t i = 0; i < b.data.size(); ++i) {
            const double save = b.data[i];
            b.data[i] = save + eps;
            const double up = loss();
            b.data[i] = save - eps;
            const double dn = loss();
            b.data[i] = save;
            per_op.compare((up - dn) / (2 * eps), gb.data[i], 1e-4);
        }
    }

    {  // 1x1 convolution.
        TensorD x({3, 4, 4}), w({2, 3}), b({2});
        fill_randn(x, rng);
        fill_randn(w, rng);
        fill_randn(b, rng);
        const TensorD gy = coefs(nn::conv1x1_forward(x, w, b));
        TensorD gw(w.shape), gb(b.shape);
        const TensorD gx = nn::conv1x1_backward(x, w, gy, gw, gb);
        auto loss = [&]() { return dot(nn::conv1x1_forward(x, w, b), gy); };
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            const double save = x.data[i];
            x.data[i] = save + eps;
            const double up = loss();
            x.data[i] = save - eps;
            const double dn = loss();
            x.data[i] = save;
            per_op.compare((up - dn) / (2 * eps), gx.data[i], 1e-4);
        }
        for (std::size_t i = 0; i < w.data.size(); ++i) {
            const double save = w.data[i];
            w.data[i] = save + eps;
            const double up = loss();
            w.data[i] = save - eps;
            const double dn = loss();
            w.data[i] = save;
            per_op.compare((up - dn) / (2 * eps), gw.data[i], 1e-4);
        }
    }

    {  // relu, away from the kink.
        TensorD x({2, 4, 4});
        fill_randn(x, rng);
        for (double& v : x.data)
            if (std::abs(v) < 1e-3) v = 0.5;
        const TensorD gy = coefs(nn::relu_forward(x));
        const TensorD gx = nn::relu_backward(x, gy);
        auto loss = [&]() { return dot(nn::relu_forward(x), gy); };
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            const double save = x.data[i];
            x.data[i] = save + eps;
            const double up = loss();
            x.data[i] = save - eps;
            const double dn = loss();
            x.data[i] = save;
            per_op.compare((up - dn) / (2 * eps), gx.data[i], 1e-4);
        }
    }

    {  // maxpool, distinct values so the argmax is stable under probing.
        TensorD x({1, 4, 4});
        for (std::size_t i = 0; i < x.data.size(); ++i)
            x.data[i] = static_cast<double>(i) + 0.1 * rng.normal();
        std::vector<int32_t> argmax;
        const TensorD y = nn::maxpool2_forward(x, argmax);
        const TensorD gy = coefs(y);
        const TensorD gx = nn::maxpool2_backward(gy, argmax, 4, 4);
        auto loss = [&]() {
            std::vector<int32_t> am;
            return dot(nn::maxpool2_forward(x, am), gy);
        };
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            const double save = x.data[i];
            x.data[i] = save + eps;
            const double up = loss();
            x.data[i] = save - eps;
            const double dn = loss();
            x.data[i] = save;
            per_op.compare((up - dn) / (2 * eps), gx.data[i], 1e-4);
        }
    }

    {  // nearest-neighbor upsample.
        TensorD x({2, 3, 3});
        fill_randn(x, rng);
        const TensorD gy = coefs(nn::upsample2_forward(x));
        const TensorD gx = nn::upsample2_backward(gy);
        auto loss = [&]() { return dot(nn::upsample2_forward(x), gy); };
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            const double save = x.data[i];
            x.data[i] = save + eps;
            const double up = loss();
            x.data[i] = save - eps;
            const double dn = loss();
            x.data[i] = save;
            per_op.compare((up - dn) / (2 * eps), gx.data[i], 1e-4);
        }
    }

    {  // channel concatenation.
        TensorD a({2, 3, 3}), b({1, 3, 3});
        fill_randn(a, rng);
        fill_randn(b, rng);
        const TensorD gy = coefs(nn::concat_forward(a, b));
        TensorD ga(a.shape), gb(b.shape);
        nn::concat_backward(gy, a.shape[0], ga, gb);
        auto loss = [&]() { return dot(nn::concat_forward(a, b), gy); };
        for (std::size_t i = 0; i < a.data.size(); ++i) {
            const double save = a.data[i];
            a.data[i] = save + eps;
            const double up = loss();
            a.data[i] = save - eps;
            const double dn = loss();
            a.data[i] = save;
            per_op.compare((up - dn) / (2 * eps), ga.data[i], 1e-4);
        }
        for (std::size_t i = 0; i < b.data.size(); ++i) {
            const double save = b.data[i];
            b.data[i] = save + eps;
            const double up = loss();
            b.data[i] = save - eps;
            const double dn = loss();
            b.data[i] = save;
            per_op.compare((up - dn) / (2 * eps), gb.data[i], 1e-4);
        }
    }

    {  // weighted cross-entropy over cells, one cell ignored.
        TensorD logits({3, 4, 4});
        fill_randn(logits, rng);
        LabelGrid target(4, 4);
        Rng lrng(33);
        for (auto& v : target.data) v = static_cast<int32_t>(lrng.index(3));
        target.at(1, 2) = kIgnoreLabel;
        const std::vector<double> w = {1.5, 0.7, 2.2};
        TensorD grad(logits.shape);
        nn::weighted_ce(logits, target, w, &grad);
        for (std::size_t i = 0; i < logits.data.size(); ++i) {
            const double save = logits.data[i];
            logits.data[i] = save + eps;
            const double up = nn::weighted_ce<double>(logits, target, w, nullptr);
            logits.data[i] = save - eps;
            const double dn = nn::weighted_ce<double>(logits, target, w, nullptr);
            logits.data[i] = save;
            per_op.compare((up - dn) / (2 * eps), grad.data[i], 1e-4);
        }
    }

    // Composed tiny network end to end: base_channels 2 on a 4x16x16 input.
    NetConfig cfg;
    cfg.in_channels = 4;
    cfg.n_classes = 3;
    cfg.base_channels = 2;
    ModelParamsT<double> m = init_params<double>(cfg, 17);
    // Zero-initialized biases leave whole channels with pre-activations exactly
    // at the relu kink; probe at a generic point instead.
    for (auto& layer : m.layers)
        for (double& v : layer.bias.data) v = 0.02 * (rng.uniform() - 0.5);

    TensorD x({4, 16, 16});
    fill_randn(x, rng);
    LabelGrid target(16, 16);
    Rng trng(44);
    for (auto& v : target.data)
        v = trng.uniform() < 0.2 ? kIgnoreLabel : static_cast<int32_t>(trng.index(3));
    const std::vector<double> w = {1.2, 0.8, 2.0};

    auto eval_loss = [&]() {
        const TensorD logits = unet_forward<double>(m, x, nullptr);
        return nn::weighted_ce<double>(logits, target, w, nullptr);
    };
    UNetCache<double> cache;
    const TensorD logits = unet_forward(m, x, &cache);
    TensorD glogits(logits.shape);
    nn::weighted_ce(logits, target, w, &glogits);
    for (auto& layer : m.layers) layer.zero_grad();
    unet_backward(m, cache, glogits);

    double e2e_max_rel = 0.0;
    int checked = 0;
    Rng crng(55);
    for (int attempt = 0; attempt < 60 && checked < 20; ++attempt) {
        auto& layer = m.layers[static_cast<std::size_t>(crng.index(
            static_cast<std::int64_t>(m.layers.size())))];
        const bool probe_bias = crng.uniform() < 0.2;
        std::vector<double>& params = probe_bias ? layer.bias.data : layer.weight.data;
        const std::vector<double>& grads = probe_bias ? layer.gbias.data : layer.gweight.data;
        const std::size_t i = static_cast<std::size_t>(
            crng.index(static_cast<std::int64_t>(params.size())));

        auto central = [&](double h) {
            const double save = params[i];
            params[i] = save + h;
            const double up = eval_loss();
            params[i] = save - h;
            const double dn = eval_loss();
            params[i] = save;
            return (up - dn) / (2 * h);
        };
        const double coarse = central(eps);
        const double fine = central(eps / 8.0);
        const double agree = std::abs(coarse - fine) /
                             std::max({std::abs(coarse), std::abs(fine), 1e-8});
        if (agree > 1e-4) continue;  // straddles a relu kink; resample

        const double rel = std::abs(fine - grads[i]) /
                           std::max({std::abs(fine), std::abs(grads[i]), 1e-6});
        e2e_max_rel = std::max(e2e_max_rel, rel);
        CHECK(rel < 1e-3);
        ++checked;
    }

    const double sec = elapsed_s(t0);
    std::printf("  per-op max rel %.2e, end-to-end max rel %.2e at %d coords, %.1fs\n",
                per_op.max_rel, e2e_max_rel, checked, sec);
    verdict("03", "gradient checks",
            per_op.max_rel < 1e-4 && e2e_max_rel < 1e-3 && checked == 20 && sec < 120.0);
}

// -------------------------------------------------------------------- 04

TEST_CASE("acceptance 04: class weights match the inverse-log formula") {
    const double e_anchor = std::exp(1.0) - 1.02;
    const std::vector<double> freqs = {0.0, 0.01, 0.5, 0.98, e_anchor};
    const std::vector<double> w = nn::class_weights(freqs);
    bool ok = w.size() == freqs.size();
    for (std::size_t i = 0; i < freqs.size() && ok; ++i) {
        const double expected = 1.0 / std::log(1.02 + freqs[i]);
        ok = std::abs(w[i] - expected) / std::abs(expected) < 1e-9;
    }
    ok = ok && std::abs(w.back() - 1.0) <= 1e-12;
    std::printf("  w(e-1.02) = %.17g\n", w.back());
    verdict("04", "class weight formula", ok);
}

// -------------------------------------------------------------------- 05

TEST_CASE("acceptance 05: grid shapes with and without the override") {
    GridConfig kitti;
    kitti.x_range = {-30.0, 30.0};
    kitti.y_range = {-22.4, 22.4};
    kitti.res_x = kitti.res_y = 0.4;
    kitti.n_layers = 10;
    kitti.shape_override = {{160, 112}};

    Rng rng(505);
    const PointCloud cloud = random_cloud(rng, 3000, kitti, false);
    const VolGrid grid = voxelize(cloud, kitti);
    const bool override_ok =
        grid.values.shape == std::vector<std::size_t>{10, 160, 112};

    GridConfig formula = kitti;
    formula.shape_override.reset();
    const bool formula_ok = formula.rows() == 150 && formula.cols() == 112;
    const VolGrid plain = voxelize(cloud, formula);
    const bool plain_ok = plain.values.shape == std::vector<std::size_t>{10, 150, 112};

    std::printf(
        "  override [10,160,112]; ceil(60m / 0.4m) = 150 rows, not the reported 160;\n"
        "  the published shape needs the explicit override (see README)\n");
    verdict("05", "grid shapes", override_ok && formula_ok && plain_ok);
}

// -------------------------------------------------------------------- 06

TEST_CASE("acceptance 06: overfit on four cocoon frames") {
    const auto t0 = std::chrono::steady_clock::now();
    const SceneSpec scene = overfit_scene();

    GridConfig grid;
    grid.x_range = {-9.6, 9.6};
    grid.y_range = {-9.6, 9.6};
    grid.res_x = grid.res_y = 0.2;
    grid.n_layers = 4;

    NetConfig net;
    net.in_channels = 4;
    net.n_classes = 3;
    net.base_channels = 8;

    std::vector<PointCloud> clouds;
    for (int k = 0; k < 4; ++k)
        clouds.push_back(fuse_frames(generate(frame_variant(scene, k))));

    const ClassStats stats = class_frequencies(clouds, net.n_classes);
    const std::vector<double> weights = nn::class_weights(stats.frequencies);

    std::vector<TrainSample> samples;
    ConfusionMatrix ceiling_cm(net.n_classes);
    for (const PointCloud& c : clouds) {
        const VolGrid g = voxelize(c, grid);
        LabelGrid target = cell_ground_truth(g, c, stats);
        accumulate(ceiling_cm, c, backproject(target, g, c));
        samples.push_back(TrainSample{g.values, std::move(target)});
    }
    const auto ceiling = iou(ceiling_cm);
    std::printf("  cell-label ceiling IOU:");
    for (const auto& v : ceiling) std::printf(" %.4f", v ? *v : -1.0);
    std::printf("\n");

    TrainConfig tc;
    tc.epochs = 500;
    tc.lr = 1e-3;
    tc.batch = 4;
    tc.momentum = 0.9;
    TrainLog log;
    const ModelParams model = train(samples, net, tc, weights, scene.seed, &log);

    ConfusionMatrix cm(net.n_classes);
    for (const PointCloud& c : clouds) accumulate(cm, c, infer(c, model, grid));
    const auto per_class = iou(cm);

    const double sec = elapsed_s(t0);
    std::printf("  loss %.4f -> %.4f over %d epochs; per-point IOU", log.epoch_loss.front(),
                log.epoch_loss.back(), tc.epochs);
    for (const auto& v : per_class) std::printf(" %.4f", v ? *v : -1.0);
    std::printf("; %.0fs\n", sec);

    const bool fg_ok = per_class.size() == 3 && per_class[1] && *per_class[1] > 0.9 &&
                       per_class[2] && *per_class[2] > 0.9;
    verdict("06", "overfit", fg_ok && sec < 900.0);
}

// -------------------------------------------------------------------- 07

TEST_CASE("acceptance 07: spherical projection collides where the grid does not") {
    // Two sensors, two returns collinear from the fused origin: same layer,
    // same azimuth, different range.
    PointCloud fused;
    Point near;
    near.x = 10.0;
    near.z = -0.5;
    near.intensity = 0.5;
    near.sensor_id = 1;
    Point far = near;
    far.x = 20.0;
    far.z = -1.0;
    far.sensor_id = 5;
    fused.push_back(near);
    fused.push_back(far);

    SphericalConfig sph;
    sph.n_layers = 4;
    const OcclusionReport rep = occlusion_report(fused, sph);

    GridConfig grid;
    const VolGrid vg = voxelize(fused, grid);
    const bool distinct_cells = vg.point_row[0] != vg.point_row[1] ||
                                vg.point_col[0] != vg.point_col[1];
    const bool cells_valid = vg.point_row[0] >= 0 && vg.point_row[1] >= 0;

    // One sensor, distinct azimuths: no collision.
    PointCloud solo;
    Point a = near;
    Point b = near;
    b.x = 0.0;
    b.y = 10.0;
    solo.push_back(a);
    solo.push_back(b);
    const OcclusionReport solo_rep = occlusion_report(solo, sph);

    std::printf("  fused collisions %zu (pair 1-5: %zu), grid cells distinct: %s; "
                "single-sensor collisions %zu\n",
                rep.collisions,
                rep.pair_collisions.count({1, 5}) ? rep.pair_collisions.at({1, 5}) : 0,
                distinct_cells ? "yes" : "no", solo_rep.collisions);
    verdict("07", "occlusion diagnostic",
            rep.collisions >= 1 && distinct_cells && cells_valid &&
                solo_rep.collisions == 0);
}

// -------------------------------------------------------------------- 08

TEST_CASE("acceptance 08: cell labels back-project onto the raw points") {
    Rng rng(808);
    ClassStats stats;
    stats.frequencies = {0.25, 0.25, 0.25, 0.25};
    stats.counts.assign(4, 0);

    bool ok = true;
    std::size_t single_class_points = 0;
    for (int trial = 0; trial < 100 && ok; ++trial) {
        GridConfig cfg;
        cfg.n_layers = static_cast<int32_t>(1 + rng.index(8));
        const PointCloud cloud = random_cloud(rng, 1500, cfg, true);
        const VolGrid grid = voxelize(cloud, cfg);
        const LabelGrid target = cell_ground_truth(grid, cloud, stats);
        const PointCloud back = backproject(target, grid, cloud);

        ok = ok && grid.in_roi_count() + grid.out_of_roi.size() == cloud.size();

        // Cells whose non-ignored points all share one class must hand that
        // class back unchanged.
        std::map<std::pair<std::int64_t, std::int64_t>, std::set<int32_t>> cell_classes;
        for (std::size_t i = 0; i < cloud.size(); ++i)
            if (grid.point_row[i] >= 0 && cloud.label[i] != kIgnoreLabel)
                cell_classes[{grid.point_row[i], grid.point_col[i]}].insert(cloud.label[i]);
        for (std::size_t i = 0; i < cloud.size() && ok; ++i) {
            if (grid.point_row[i] < 0 || cloud.label[i] == kIgnoreLabel) continue;
            const auto& classes = cell_classes[{grid.point_row[i], grid.point_col[i]}];
            if (classes.size() != 1) continue;
            ok = back.label[i] == cloud.label[i];
            ++single_class_points;
        }
    }
    std::printf("  100 clouds, %zu points in single-class cells reproduced exactly\n",
                single_class_points);
    verdict("08", "backprojection round trip", ok && single_class_points > 10000);
}

// -------------------------------------------------------------------- 09

TEST_CASE("acceptance 09: sensor-subset ablation harness") {
    namespace fs = std::filesystem;
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = fs::temp_directory_path() / "volmap_acceptance_ablation";
    fs::create_directories(dir);

    SceneSpec scene;
    scene.seed = 11;
    scene.ground_z = -1.7;
    scene.frame_jitter = 0.25;
    scene.obstacles = {
        scene_box(6.0, 4.0, -0.8, 2.2, 1.8, 1.8, 0.3, 1),
        scene_box(-5.0, -4.0, -0.8, 1.8, 1.8, 1.8, -0.5, 2),
        scene_box(-4.0, 6.0, -0.75, 1.6, 2.4, 1.9, 1.0, 1),
        scene_box(7.0, -3.0, -0.8, 2.4, 1.6, 1.8, 0.0, 2),
    };
    scene.sensors = {ring_sensor(1, 2.2, 0.0, 0.5, 0.0),
                     ring_sensor(2, 1.0, 0.9, 0.55, 1.2),
                     ring_sensor(3, -1.0, 0.9, 0.45, 2.4),
                     ring_sensor(4, 1.0, -0.9, 0.6, -1.2),
                     ring_sensor(5, -2.2, 0.0, 0.5, 3.141592653589793)};
    const fs::path scene_path = dir / "scene.json";
    std::ofstream(scene_path) << scene_to_json(scene).dump(2);

    const json config = {
        {"seed", 11},
        {"grid",
         {{"x_range", {-12.8, 12.8}},
          {"y_range", {-12.8, 12.8}},
          {"res_x", 0.2},
          {"res_y", 0.2},
          {"n_layers", 4}}},
        {"net", {{"n_classes", 3}, {"base_channels", 8}}},
        {"train", {{"epochs", 400}, {"lr", 1e-3}, {"batch", 4}, {"momentum", 0.8}}}};
    const fs::path config_path = dir / "config.json";
    std::ofstream(config_path) << config.dump(2);

    const fs::path report_path = dir / "report.json";
    const std::string cmd = std::string("\"") + VOLMAP_CLI_PATH + "\" ablation --scene \"" +
                            scene_path.string() + "\" --subsets \"S1;S5;S1,S5;ALL\"" +
                            " --report \"" + report_path.string() + "\" --config \"" +
                            config_path.string() + "\" --frames 2 > \"" +
                            (dir / "log.txt").string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());

    bool ok = status == 0;
    if (ok) {
        json report;
        std::ifstream(report_path) >> report;
        const json& rows = report.at("rows");
        ok = rows.size() == 4;

        std::map<std::string, json> by_name;
        for (const json& row : rows) by_name[row.at("name")] = row;
        ok = ok && by_name.count("S1") && by_name.count("S5") && by_name.count("S1,S5") &&
             by_name.count("ALL");

        if (ok) {
            const auto all_obj =
                by_name["ALL"].at("per_object_points").get<std::vector<std::int64_t>>();
            for (const char* solo : {"S1", "S5"}) {
                const auto solo_obj =
                    by_name[solo].at("per_object_points").get<std::vector<std::int64_t>>();
                ok = ok && all_obj.size() == solo_obj.size();
                for (std::size_t b = 0; b < all_obj.size() && ok; ++b)
                    ok = all_obj[b] > solo_obj[b];
            }
            std::printf("  mean IOU by subset (reported, not asserted):");
            for (const char* name : {"S1", "S5", "S1,S5", "ALL"}) {
                const json& v = by_name[name].at("mean_iou");
                std::printf(" %s=%.3f", name, v.is_null() ? -1.0 : v.get<double>());
            }
            std::printf("\n  fused per-object points strictly exceed both single-sensor"
                        " rows\n");
        }
    }
    const double sec = elapsed_s(t0);
    std::printf("  4-row report via the CLI in %.0fs\n", sec);
    verdict("09", "ablation harness", ok);
}

// -------------------------------------------------------------------- 10

TEST_CASE("acceptance 10: inference timing stays near the budget") {
    GridConfig grid;
    grid.x_range = {-30.0, 30.0};
    grid.y_range = {-22.4, 22.4};
    grid.res_x = grid.res_y = 0.4;
    grid.n_layers = 10;
    grid.shape_override = {{160, 112}};

    NetConfig net;  // paper-sized defaults: 10 channels in, 6 classes, base 16
    ModelParams model = init_params<float>(net, 10);
    model.grid = grid;

    Rng rng(1010);
    const PointCloud cloud = random_cloud(rng, 8000, grid, false);
    const TimingReport t = time_inference(cloud, model, grid, 1, 5);

    const bool well_formed = t.grid_shape == std::vector<std::size_t>{10, 160, 112} &&
                             t.n_runs == 5 && t.n_warmup == 1 && t.mean_ms > 0.0 &&
                             t.p50_ms > 0.0 && t.p95_ms >= t.p50_ms && t.threads >= 1;
    std::printf("  [10,160,112] forward+backproject: mean %.1f ms, p50 %.1f ms, "
                "p95 %.1f ms over %d runs\n",
                t.mean_ms, t.p50_ms, t.p95_ms, t.n_runs);
    if (t.mean_ms >= 500.0)
        std::printf("  WARN: mean above the 500 ms desktop budget (soft bound, "
                    "hardware-dependent)\n");
    verdict("10", "timing harness", well_formed);
}

// -------------------------------------------------------------------- 11

TEST_CASE("acceptance 11: weight files survive save/load/save byte-identically") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "volmap_acceptance_models";
    fs::create_directories(dir);

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };

    Rng rng(1111);
    bool ok = true;
    for (int trial = 0; trial < 20 && ok; ++trial) {
        NetConfig cfg;
        cfg.in_channels = static_cast<int32_t>(1 + rng.index(12));
        cfg.n_classes = static_cast<int32_t>(2 + rng.index(6));
        cfg.base_channels = static_cast<int32_t>(2 << rng.index(4));
        ModelParams m = init_params<float>(cfg, 1111 + static_cast<std::uint64_t>(trial));
        if (trial % 2 == 0) {
            GridConfig grid;
            grid.n_layers = cfg.in_channels;
            if (trial % 4 == 0)
                grid.shape_override = {{static_cast<std::int32_t>(16 + rng.index(64)),
                                        static_cast<std::int32_t>(16 + rng.index(64))}};
            m.grid = grid;
        }

        const fs::path first = dir / ("m" + std::to_string(trial) + "_a.vmp");
        const fs::path second = dir / ("m" + std::to_string(trial) + "_b.vmp");
        save(m, first.string());
        const ModelParams loaded = load(first.string());
        save(loaded, second.string());
        const std::string a = slurp(first), b = slurp(second);
        ok = !a.empty() && a == b;
    }
    std::printf("  20 random models, save -> load -> save byte-identical\n");
    verdict("11", "weight serialization", ok);
}
