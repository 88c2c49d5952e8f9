#include "doctest.h"

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "volmap/error.hpp"
#include "volmap/kernels.hpp"

using namespace volmap;

namespace {

std::vector<float> random_vec(std::size_t n, std::mt19937_64& gen, float scale = 1.0f) {
    std::uniform_real_distribution<float> u(-scale, scale);
    std::vector<float> v(n);
    for (float& x : v) x = u(gen);
    return v;
}

bool bitwise_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

// Straightforward double-precision convolution, written independently of the
// kernel loop structure. Verifies the math; the bit-level contract between
// backends is checked separately.
std::vector<double> conv3x3_oracle(const std::vector<float>& in_pad, int cin, int h,
                                   int w, const std::vector<float>& weight,
                                   const std::vector<float>& bias, int cout) {
    const int wp = w + 2;
    std::vector<double> out(static_cast<std::size_t>(cout) * h * w, 0.0);
    for (int co = 0; co < cout; ++co)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = bias[co];
                for (int ci = 0; ci < cin; ++ci)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx)
                            acc += static_cast<double>(
                                       weight[((co * cin + ci) * 3 + ky) * 3 + kx]) *
                                   in_pad[(ci * (h + 2) + y + ky) * wp + x + kx];
                out[(static_cast<std::size_t>(co) * h + y) * w + x] = acc;
            }
    return out;
}

struct ConvShape {
    int cin, cout, h, w;
};

const ConvShape kShapes[] = {
    {1, 1, 1, 1},  {1, 1, 1, 7},   {1, 1, 1, 8},  {1, 1, 1, 9},   {2, 3, 4, 5},
    {3, 2, 5, 16}, {4, 4, 3, 17},  {2, 5, 6, 23}, {5, 2, 2, 24},  {3, 3, 7, 31},
    {1, 2, 8, 33}, {2, 1, 16, 40},
};

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar conv3x3 forward matches an independent oracle") {
    std::mt19937_64 gen(21);
    for (const ConvShape& s : kShapes) {
        const int hp = s.h + 2, wp = s.w + 2;
        const auto in = random_vec(static_cast<std::size_t>(s.cin) * hp * wp, gen);
        const auto wgt = random_vec(static_cast<std::size_t>(s.cout) * s.cin * 9, gen);
        const auto bias = random_vec(s.cout, gen);
        std::vector<float> out(static_cast<std::size_t>(s.cout) * s.h * s.w);
        kernels::scalar::conv3x3_forward(in.data(), s.cin, s.h, s.w, wgt.data(),
                                         bias.data(), s.cout, out.data());
        const auto expect = conv3x3_oracle(in, s.cin, s.h, s.w, wgt, bias, s.cout);
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-4));
    }
}

TEST_CASE("backward_params kernels accumulate instead of overwriting") {
    std::mt19937_64 gen(22);
    const ConvShape s{2, 3, 4, 9};
    const auto in = random_vec(static_cast<std::size_t>(s.cin) * (s.h + 2) * (s.w + 2), gen);
    const auto gout = random_vec(static_cast<std::size_t>(s.cout) * s.h * s.w, gen);
    std::vector<float> gw_once(static_cast<std::size_t>(s.cout) * s.cin * 9, 0.0f);
    std::vector<float> gb_once(s.cout, 0.0f);
    kernels::scalar::conv3x3_backward_params(in.data(), gout.data(), s.cin, s.cout,
                                             s.h, s.w, gw_once.data(), gb_once.data());
    std::vector<float> gw_twice(gw_once.size(), 0.0f), gb_twice(s.cout, 0.0f);
    for (int rep = 0; rep < 2; ++rep)
        kernels::scalar::conv3x3_backward_params(in.data(), gout.data(), s.cin, s.cout,
                                                 s.h, s.w, gw_twice.data(),
                                                 gb_twice.data());
    for (std::size_t i = 0; i < gw_once.size(); ++i)
        CHECK(gw_twice[i] == doctest::Approx(2.0f * gw_once[i]));
    for (int i = 0; i < s.cout; ++i)
        CHECK(gb_twice[i] == doctest::Approx(2.0f * gb_once[i]));
}

#ifdef VOLMAP_HAVE_AVX2
TEST_CASE("avx2 kernels are bit-identical to the scalar reference" *
          doctest::skip(!kernels::avx2_available())) {
    std::mt19937_64 gen(23);
    for (const ConvShape& s : kShapes) {
        const int hp = s.h + 2, wp = s.w + 2;
        const auto in_pad = random_vec(static_cast<std::size_t>(s.cin) * hp * wp, gen);
        const auto gout_pad = random_vec(static_cast<std::size_t>(s.cout) * hp * wp, gen);
        const auto w3 = random_vec(static_cast<std::size_t>(s.cout) * s.cin * 9, gen);
        const auto w1 = random_vec(static_cast<std::size_t>(s.cout) * s.cin, gen);
        const auto bias = random_vec(s.cout, gen);
        const auto gout = random_vec(static_cast<std::size_t>(s.cout) * s.h * s.w, gen);
        const int hw = s.h * s.w;
        const auto flat_in = random_vec(static_cast<std::size_t>(s.cin) * hw, gen);

        std::vector<float> a(static_cast<std::size_t>(s.cout) * hw), b(a.size());
        kernels::scalar::conv3x3_forward(in_pad.data(), s.cin, s.h, s.w, w3.data(),
                                         bias.data(), s.cout, a.data());
        kernels::avx2::conv3x3_forward(in_pad.data(), s.cin, s.h, s.w, w3.data(),
                                       bias.data(), s.cout, b.data());
        CHECK(bitwise_equal(a, b));

        std::vector<float> ga(static_cast<std::size_t>(s.cin) * hw), gb(ga.size());
        kernels::scalar::conv3x3_backward_input(gout_pad.data(), w3.data(), s.cin,
                                                s.cout, s.h, s.w, ga.data());
        kernels::avx2::conv3x3_backward_input(gout_pad.data(), w3.data(), s.cin,
                                              s.cout, s.h, s.w, gb.data());
        CHECK(bitwise_equal(ga, gb));

        std::vector<float> gwa(w3.size(), 0.1f), gwb(w3.size(), 0.1f);
        std::vector<float> gba(s.cout, -0.2f), gbb(s.cout, -0.2f);
        kernels::scalar::conv3x3_backward_params(in_pad.data(), gout.data(), s.cin,
                                                 s.cout, s.h, s.w, gwa.data(),
                                                 gba.data());
        kernels::avx2::conv3x3_backward_params(in_pad.data(), gout.data(), s.cin,
                                               s.cout, s.h, s.w, gwb.data(),
                                               gbb.data());
        CHECK(bitwise_equal(gwa, gwb));
        CHECK(bitwise_equal(gba, gbb));

        std::vector<float> o1(static_cast<std::size_t>(s.cout) * hw), o2(o1.size());
        kernels::scalar::conv1x1_forward(flat_in.data(), s.cin, hw, w1.data(),
                                         bias.data(), s.cout, o1.data());
        kernels::avx2::conv1x1_forward(flat_in.data(), s.cin, hw, w1.data(),
                                       bias.data(), s.cout, o2.data());
        CHECK(bitwise_equal(o1, o2));

        std::vector<float> gi1(static_cast<std::size_t>(s.cin) * hw), gi2(gi1.size());
        kernels::scalar::conv1x1_backward_input(gout.data(), w1.data(), s.cin, s.cout,
                                                hw, gi1.data());
        kernels::avx2::conv1x1_backward_input(gout.data(), w1.data(), s.cin, s.cout,
                                              hw, gi2.data());
        CHECK(bitwise_equal(gi1, gi2));

        std::vector<float> pw1(w1.size(), 0.3f), pw2(w1.size(), 0.3f);
        std::vector<float> pb1(s.cout, 0.0f), pb2(s.cout, 0.0f);
        kernels::scalar::conv1x1_backward_params(flat_in.data(), gout.data(), s.cin,
                                                 s.cout, hw, pw1.data(), pb1.data());
        kernels::avx2::conv1x1_backward_params(flat_in.data(), gout.data(), s.cin,
                                               s.cout, hw, pw2.data(), pb2.data());
        CHECK(bitwise_equal(pw1, pw2));
        CHECK(bitwise_equal(pb1, pb2));
    }
}

TEST_CASE("avx2 relu and sgd match scalar bitwise, including signed zero" *
          doctest::skip(!kernels::avx2_available())) {
    std::mt19937_64 gen(24);
    for (std::size_t n : {1u, 7u, 8u, 9u, 31u, 64u, 100u}) {
        auto x = random_vec(n, gen);
        x[0] = -0.0f;
        if (n > 2) x[2] = 0.0f;
        const auto gy = random_vec(n, gen);
        std::vector<float> ya(n), yb(n), gxa(n), gxb(n);
        kernels::scalar::relu_forward(x.data(), n, ya.data());
        kernels::avx2::relu_forward(x.data(), n, yb.data());
        CHECK(bitwise_equal(ya, yb));
        kernels::scalar::relu_backward(x.data(), gy.data(), n, gxa.data());
        kernels::avx2::relu_backward(x.data(), gy.data(), n, gxb.data());
        CHECK(bitwise_equal(gxa, gxb));

        auto pa = random_vec(n, gen);
        auto pb = pa;
        const auto g = random_vec(n, gen);
        kernels::scalar::sgd_update(pa.data(), g.data(), 0.01f, n);
        kernels::avx2::sgd_update(pb.data(), g.data(), 0.01f, n);
        CHECK(bitwise_equal(pa, pb));
    }
}
#endif  // VOLMAP_HAVE_AVX2

TEST_CASE("relu clamps negatives and keeps positives") {
    const std::vector<float> x{-3.0f, -0.0f, 0.0f, 2.5f};
    std::vector<float> y(x.size());
    kernels::relu_forward(x.data(), x.size(), y.data());
    CHECK(y == std::vector<float>{0.0f, 0.0f, 0.0f, 2.5f});
    const std::vector<float> gy{1, 1, 1, 1};
    std::vector<float> gx(x.size());
    kernels::relu_backward(x.data(), gy.data(), x.size(), gx.data());
    CHECK(gx == std::vector<float>{0, 0, 0, 1});
}

TEST_CASE("dispatched float kernels honor set_backend") {
    const kernels::Backend before = kernels::active_backend();
    kernels::set_backend(kernels::Backend::scalar);
    CHECK(kernels::active_backend() == kernels::Backend::scalar);
    std::mt19937_64 gen(25);
    const auto x = random_vec(33, gen);
    std::vector<float> y_scalar(x.size());
    kernels::relu_forward(x.data(), x.size(), y_scalar.data());
    if (kernels::avx2_available()) {
        kernels::set_backend(kernels::Backend::avx2);
        std::vector<float> y_avx(x.size());
        kernels::relu_forward(x.data(), x.size(), y_avx.data());
        CHECK(bitwise_equal(y_scalar, y_avx));
    } else {
        CHECK_THROWS_AS(kernels::set_backend(kernels::Backend::avx2), Error);
    }
    kernels::set_backend(before);
    CHECK(kernels::backend_name(kernels::Backend::scalar) == "scalar");
    CHECK(kernels::backend_name(kernels::Backend::avx2) == "avx2");
}

TEST_CASE("double kernels run the scalar reference") {
    // Same inputs through the dispatched double path and the scalar namespace:
    // identical results by construction.
    std::mt19937_64 gen(26);
    const ConvShape s{2, 2, 3, 10};
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> in(static_cast<std::size_t>(s.cin) * (s.h + 2) * (s.w + 2));
    for (double& v : in) v = u(gen);
    std::vector<double> w(static_cast<std::size_t>(s.cout) * s.cin * 9), b(s.cout);
    for (double& v : w) v = u(gen);
    for (double& v : b) v = u(gen);
    std::vector<double> o1(static_cast<std::size_t>(s.cout) * s.h * s.w), o2(o1.size());
    kernels::conv3x3_forward(in.data(), s.cin, s.h, s.w, w.data(), b.data(), s.cout,
                             o1.data());
    kernels::scalar::conv3x3_forward(in.data(), s.cin, s.h, s.w, w.data(), b.data(),
                                     s.cout, o2.data());
    CHECK(std::memcmp(o1.data(), o2.data(), o1.size() * sizeof(double)) == 0);
}

}  // TEST_SUITE
