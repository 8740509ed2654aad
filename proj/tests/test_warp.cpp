#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vigen/gradcheck.hpp"
#include "vigen/ops.hpp"
#include "vigen/rng.hpp"
#include "vigen/warp.hpp"

using namespace vigen;

namespace {

Tensor random_image(Rng& rng, Shape shape) {
    std::vector<float> data(static_cast<size_t>(numel_of(shape)));
    for (float& v : data) v = static_cast<float>(rng.uniform());
    return Tensor::from_data(std::move(shape), std::move(data));
}

}  // namespace

TEST_CASE("affine_grid identity equals the canonical grid exactly") {
    SampleGrid g = affine_grid(AffineTransform::identity(), 4, 5);
    auto v = g.coords.values();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 5; ++c) {
            const float x = 2.0f * c / 4 - 1.0f;
            const float y = 2.0f * r / 3 - 1.0f;
            CHECK(v[(r * 5 + c) * 2 + 0] == x);
            CHECK(v[(r * 5 + c) * 2 + 1] == y);
        }
}

TEST_CASE("affine_grid applies the 2x3 matrix to normalized points") {
    // translation: point (0,0) -> (0.5, 0.25); on a 3x3 grid that is pixel (1,1)
    AffineTransform t{{1, 0, 0.5f, 0, 1, 0.25f}};
    SampleGrid g = affine_grid(t, 3, 3);
    CHECK(g.coords.values()[(1 * 3 + 1) * 2 + 0] == doctest::Approx(0.5f));
    CHECK(g.coords.values()[(1 * 3 + 1) * 2 + 1] == doctest::Approx(0.25f));

    // 90-degree rotation: point (1,0) -> (0,1); pixel (row 1, col 2)
    AffineTransform rot{{0, -1, 0, 1, 0, 0}};
    SampleGrid gr = affine_grid(rot, 3, 3);
    CHECK(gr.coords.values()[(1 * 3 + 2) * 2 + 0] == doctest::Approx(0.0f));
    CHECK(gr.coords.values()[(1 * 3 + 2) * 2 + 1] == doctest::Approx(1.0f));
}

TEST_CASE("affine_grid rejects degenerate extents") {
    CHECK_THROWS_AS(affine_grid(AffineTransform::identity(), 1, 5), std::invalid_argument);
    CHECK_THROWS_AS(affine_grid(AffineTransform::identity(), 5, 1), std::invalid_argument);
}

TEST_CASE("bilinear_sample with the identity grid reproduces the image") {
    Rng rng(21);
    Tensor img = random_image(rng, {3, 6, 7});
    Tensor out = bilinear_sample(img, affine_grid(AffineTransform::identity(), 6, 7));
    CHECK(oracles::max_abs_diff(img, out) < 1e-6);
}

TEST_CASE("bilinear_sample interpolates linearly along a row") {
    // I(x=0)=0, I(x=1)=4; sample at pixel x=0.25 -> 1.0
    Tensor img = Tensor::from_data({1, 1, 2}, {0.0f, 4.0f});
    const float xn = 2.0f * 0.25f / 1.0f - 1.0f;  // pixel 0.25 on a width-2 row
    Tensor grid = Tensor::from_data({1, 1, 2}, {xn, -1.0f});
    Tensor out = bilinear_sample(img, SampleGrid{grid});
    CHECK(out.values()[0] == doctest::Approx(1.0f));
}

TEST_CASE("bilinear_sample outside the image yields zero") {
    Tensor img = Tensor::ones({1, 4, 4});
    // pixel coordinate (-2,-2) => normalized 2*(-2)/3 - 1
    const float n = 2.0f * -2.0f / 3.0f - 1.0f;
    Tensor grid = Tensor::from_data({1, 1, 2}, {n, n});
    Tensor out = bilinear_sample(img, SampleGrid{grid});
    CHECK(out.values()[0] == 0.0f);
}

TEST_CASE("partition of unity for interior samples") {
    // sampling an all-ones image returns exactly 1 wherever the tent weights
    // form a partition of unity
    Tensor ones = Tensor::ones({1, 8, 8});
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const float px = static_cast<float>(rng.uniform(1.0, 6.0));
        const float py = static_cast<float>(rng.uniform(1.0, 6.0));
        Tensor grid = Tensor::from_data({1, 1, 2}, {2.0f * px / 7 - 1.0f, 2.0f * py / 7 - 1.0f});
        Tensor out = bilinear_sample(ones, SampleGrid{grid});
        CHECK(out.values()[0] == doctest::Approx(1.0f).epsilon(1e-6));
    }
}

TEST_CASE("warp_image identity round trip") {
    Rng rng(17);
    Tensor img = random_image(rng, {2, 9, 9});
    Tensor out = warp_image(img, AffineTransform::identity());
    CHECK(oracles::max_abs_diff(img, out) < 1e-6);
}

TEST_CASE("integer translation matches the shift oracle") {
    // +2 pixel translation in the sampling direction moves content -2 columns
    const int W = 9, H = 9;
    Tensor img = Tensor::zeros({1, H, W});
    img.values()[4 * W + 5] = 1.0f;  // single lit pixel at (row 4, col 5)

    AffineTransform t = AffineTransform::translation(2.0f * 2.0f / (W - 1), 0.0f);
    Tensor out = warp_image(img, t);
    Tensor expected = oracles::shift_reference(img, -2, 0);
    CHECK(oracles::max_abs_diff(out, expected) < 1e-6);

    // vertical shift too
    AffineTransform tv = AffineTransform::translation(0.0f, 2.0f * 3.0f / (H - 1));
    CHECK(oracles::max_abs_diff(warp_image(img, tv), oracles::shift_reference(img, 0, -3)) <
          1e-6);
}

TEST_CASE("translation composition is consistent on interior pixels") {
    const int S = 12;
    // integer-pixel shifts compose exactly on any image
    Rng rng(77);
    Tensor img = random_image(rng, {1, S, S});
    const float unit = 2.0f / (S - 1);
    Tensor once = warp_image(warp_image(img, AffineTransform::translation(1 * unit, 0)),
                             AffineTransform::translation(2 * unit, 0));
    Tensor direct = warp_image(img, AffineTransform::translation(3 * unit, 0));
    auto a = once.values();
    auto b = direct.values();
    for (int r = 4; r < S - 4; ++r)
        for (int c = 4; c < S - 4; ++c)
            CHECK(a[r * S + c] == doctest::Approx(b[r * S + c]).epsilon(1e-4));

    // fractional shifts compose exactly wherever the image is locally linear
    std::vector<float> ramp(S * S);
    for (int r = 0; r < S; ++r)
        for (int c = 0; c < S; ++c) ramp[r * S + c] = 0.05f * c + 0.03f * r;
    Tensor lin = Tensor::from_data({1, S, S}, std::move(ramp));
    Tensor lonce = warp_image(warp_image(lin, AffineTransform::translation(0.08f, 0.05f)),
                              AffineTransform::translation(0.11f, 0.07f));
    Tensor ldirect = warp_image(lin, AffineTransform::translation(0.19f, 0.12f));
    auto la = lonce.values();
    auto lb = ldirect.values();
    for (int r = 4; r < S - 4; ++r)
        for (int c = 4; c < S - 4; ++c)
            CHECK(la[r * S + c] == doctest::Approx(lb[r * S + c]).epsilon(1e-4));
}

TEST_CASE("warp gradients match finite differences") {
    Rng rng(55);
    const int S = 8;
    Tensor img = random_image(rng, {1, S, S});
    Tensor params = Tensor::from_data({6}, {1.02f, 0.013f, 0.0537f, -0.021f, 0.97f, -0.0417f});

    // jitter translations until every sample point sits clear of the
    // tent-kernel kinks at integer pixel coordinates
    auto kink_distance = [&] {
        auto p = params.values();
        float worst = 1e9f;
        for (int r = 0; r < S; ++r)
            for (int c = 0; c < S; ++c) {
                const float x = 2.0f * c / (S - 1) - 1.0f;
                const float y = 2.0f * r / (S - 1) - 1.0f;
                const float px = (p[0] * x + p[1] * y + p[2] + 1.0f) * 0.5f * (S - 1);
                const float py = (p[3] * x + p[4] * y + p[5] + 1.0f) * 0.5f * (S - 1);
                worst = std::min(worst, std::abs(px - std::round(px)));
                worst = std::min(worst, std::abs(py - std::round(py)));
            }
        return worst;
    };
    for (int tries = 0; tries < 200 && kink_distance() < 0.02f; ++tries) {
        params.values()[2] += 0.0037f;
        params.values()[5] += 0.0023f;
    }
    REQUIRE(kink_distance() >= 0.02f);

    auto forward = [&] { return reduce_mean(warp_image(img, params)); };
    CHECK(check_gradient_wrt(forward, params) < 1e-3);
    CHECK(check_gradient_wrt(forward, img) < 1e-3);
}

TEST_CASE("batched multi-transform sampling agrees with per-image calls") {
    Rng rng(61);
    Tensor img0 = random_image(rng, {2, 6, 6});
    Tensor img1 = random_image(rng, {2, 6, 6});
    Tensor p0 = Tensor::from_data({6}, {1.0f, 0.0f, 0.2f, 0.0f, 1.0f, -0.1f});
    Tensor p1 = Tensor::from_data({6}, {0.9f, 0.05f, 0.0f, -0.05f, 1.1f, 0.3f});

    Tensor batch = concat({reshape(img0, {1, 2, 6, 6}), reshape(img1, {1, 2, 6, 6})}, 0);
    std::vector<float> params;
    for (float v : p0.values()) params.push_back(v);
    for (float v : p1.values()) params.push_back(v);
    Tensor grids = affine_grid(Tensor::from_data({2, 1, 6}, std::move(params)), 6, 6);
    Tensor out = bilinear_sample_multi(batch, grids);  // [2,1,2,6,6]

    Tensor single0 = warp_image(img0, p0);
    Tensor single1 = warp_image(img1, p1);
    auto o = out.values();
    auto s0 = single0.values();
    auto s1 = single1.values();
    for (size_t i = 0; i < s0.size(); ++i) {
        CHECK(o[i] == doctest::Approx(s0[i]).epsilon(1e-6));
        CHECK(o[s0.size() + i] == doctest::Approx(s1[i]).epsilon(1e-6));
    }
}
