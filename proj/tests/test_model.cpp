#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "vigen/gradcheck.hpp"
#include "vigen/model.hpp"
#include "vigen/ops.hpp"
#include "vigen/rng.hpp"

using namespace vigen;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.image_size = 16;
    cfg.channels = 1;
    cfg.transform_count = 2;
    cfg.latent_dim = 8;
    cfg.code_dim = 16;
    cfg.base_channels = 4;
    return cfg;
}

Tensor random_frame(Rng& rng, int c, int s) {
    std::vector<float> data(static_cast<size_t>(c) * s * s);
    for (float& v : data) v = static_cast<float>(rng.uniform());
    return Tensor::from_data({c, s, s}, std::move(data));
}

Tensor random_latent(Rng& rng, int dz) {
    std::vector<float> data(static_cast<size_t>(dz));
    for (float& v : data) v = rng.normal_f();
    return Tensor::from_data({dz}, std::move(data));
}

void randomize(ParamSet& set, uint64_t seed, float scale) {
    Rng rng(seed);
    for (auto& [name, t] : set.items())
        for (float& v : t.values()) v = static_cast<float>(rng.uniform(-scale, scale));
}

}  // namespace

TEST_CASE("generator input stacks the start frame with the difference image") {
    Rng rng(1);
    Tensor rgb_start = random_frame(rng, 3, 16);
    Tensor rgb_end = random_frame(rng, 3, 16);
    Tensor z = random_latent(rng, 8);
    GeneratorInput in = build_generator_input(rgb_start, rgb_end, z);
    CHECK(in.encoder_channels().shape() == Shape{6, 16, 16});  // 6 channels for RGB

    Tensor gray = random_frame(rng, 1, 16);
    GeneratorInput gin = build_generator_input(gray, gray, z);
    CHECK(gin.encoder_channels().shape() == Shape{2, 16, 16});
    for (float v : gin.f_minus.values()) CHECK(v == 0.0f);

    // f_minus always recomputes to f_end - f_start exactly
    auto fm = in.f_minus.values();
    auto fs = in.f_start.values();
    auto fe = in.f_end.values();
    for (size_t i = 0; i < fm.size(); ++i) CHECK(fm[i] == fe[i] - fs[i]);

    CHECK_THROWS_AS(build_generator_input(rgb_start, gray, z), std::invalid_argument);
    CHECK_THROWS_AS(
        build_generator_input(Tensor::full({1, 16, 16}, 1.5f), Tensor::ones({1, 16, 16}), z),
        std::invalid_argument);
}

TEST_CASE("scenario code has the configured width") {
    ModelConfig cfg;  // paper-scale defaults
    ModelParams params = init_params(7, cfg);
    Rng rng(2);
    GeneratorInput in =
        build_generator_input(random_frame(rng, 1, 64), random_frame(rng, 1, 64),
                              random_latent(rng, cfg.latent_dim));
    ScenarioCode code = encode_scenario(params, in);
    CHECK(code.code.shape() == Shape{512});

    // zero input with zero biases gives the zero code
    Tensor blank = Tensor::zeros({1, 64, 64});
    ScenarioCode zero_code = encode_scenario(
        params, build_generator_input(blank, blank, random_latent(rng, cfg.latent_dim)));
    for (float v : zero_code.code.values()) CHECK(v == 0.0f);

    // different inputs map to different codes
    ScenarioCode other = encode_scenario(
        params, build_generator_input(random_frame(rng, 1, 64), random_frame(rng, 1, 64),
                                      random_latent(rng, cfg.latent_dim)));
    bool differ = false;
    for (size_t i = 0; i < 512; ++i)
        differ = differ || code.code.values()[i] != other.code.values()[i];
    CHECK(differ);
}

TEST_CASE("transforms start at identity and respond to the latent code") {
    ModelConfig cfg = tiny_config();
    cfg.transform_count = 4;
    ModelParams params = init_params(3, cfg);
    Rng rng(5);
    GeneratorInput in = build_generator_input(random_frame(rng, 1, 16), random_frame(rng, 1, 16),
                                              random_latent(rng, cfg.latent_dim));
    ScenarioCode code = encode_scenario(params, in);

    auto transforms = generate_transforms(params, code, in.z);
    CHECK(transforms.size() == 4);
    for (const auto& t : transforms) {
        CHECK(t.params == AffineTransform::identity().params);
    }

    // with nonzero head weights, different z may give different transforms
    randomize(params.generator, 99, 0.1f);
    Tensor z2 = random_latent(rng, cfg.latent_dim);
    auto ta = generate_transforms(params, code, in.z);
    auto tb = generate_transforms(params, code, z2);
    bool differ = false;
    for (size_t i = 0; i < ta.size(); ++i) differ = differ || ta[i].params != tb[i].params;
    CHECK(differ);
}

TEST_CASE("masks are a normalized stack over the image plane") {
    ModelConfig cfg = tiny_config();
    ModelParams params = init_params(11, cfg);
    Rng rng(6);
    GeneratorInput in = build_generator_input(random_frame(rng, 1, 16), random_frame(rng, 1, 16),
                                              random_latent(rng, cfg.latent_dim));
    ScenarioCode code = encode_scenario(params, in);
    MaskStack masks = decode_masks(params, code, in.z);
    REQUIRE(masks.masks.shape() == Shape{2, 16, 16});
    auto mv = masks.masks.values();
    for (int px = 0; px < 16 * 16; ++px)
        CHECK(mv[px] + mv[256 + px] == doctest::Approx(1.0f).epsilon(1e-6));

    // all-zero decoder weights give constant logits, so every mask is 1/P
    for (auto& [name, t] : params.generator.items())
        if (name.rfind("mask.", 0) == 0)
            for (float& v : t.values()) v = 0.0f;
    MaskStack uniform = decode_masks(params, code, in.z);
    for (float v : uniform.masks.values()) CHECK(v == doctest::Approx(0.5f).epsilon(1e-6));
}

TEST_CASE("identity-initialized generator reproduces the start frame") {
    ModelConfig cfg = tiny_config();
    ModelParams params = init_params(17, cfg);
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor f0 = random_frame(rng, 1, 16);
        Tensor f1 = random_frame(rng, 1, 16);
        Tensor z = random_latent(rng, cfg.latent_dim);
        Tensor out = generate_midpoint_frame(params, f0, f1, z);
        auto ov = out.values();
        auto fv = f0.values();
        for (size_t i = 0; i < ov.size(); ++i)
            CHECK(std::abs(ov[i] - fv[i]) < 1e-5f);
    }

    Tensor blank = Tensor::zeros({1, 16, 16});
    Tensor out = generate_midpoint_frame(params, blank, blank, random_latent(rng, 8));
    for (float v : out.values()) CHECK(std::abs(v) < 1e-5f);
}

TEST_CASE("generator output stays in [0,1] even with random weights") {
    ModelConfig cfg = tiny_config();
    ModelParams params = init_params(23, cfg);
    randomize(params.generator, 1234, 0.3f);
    Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor out = generate_midpoint_frame(params, random_frame(rng, 1, 16),
                                             random_frame(rng, 1, 16),
                                             random_latent(rng, cfg.latent_dim));
        for (float v : out.values()) {
            CHECK(v >= -1e-6f);
            CHECK(v <= 1.0f + 1e-6f);
        }
    }
}

TEST_CASE("latent code can steer the generated frame") {
    ModelConfig cfg = tiny_config();
    ModelParams params = init_params(29, cfg);
    randomize(params.generator, 4321, 0.2f);
    Rng rng(10);
    Tensor f0 = random_frame(rng, 1, 16);
    Tensor f1 = random_frame(rng, 1, 16);
    Tensor a = generate_midpoint_frame(params, f0, f1, random_latent(rng, cfg.latent_dim));
    Tensor b = generate_midpoint_frame(params, f0, f1, random_latent(rng, cfg.latent_dim));
    double diff = 0.0;
    for (size_t i = 0; i < a.values().size(); ++i)
        diff += std::abs(static_cast<double>(a.values()[i]) - b.values()[i]);
    CHECK(diff > 0.0);
}

TEST_CASE("critic scores clips with a linear head") {
    ModelConfig cfg = tiny_config();
    ModelParams params = init_params(31, cfg);
    Rng rng(12);
    std::vector<Tensor> frames;
    for (int t = 0; t < cfg.clip_len; ++t) frames.push_back(random_frame(rng, 1, 16));
    VideoClip clip = make_clip(frames);

    const float d1 = criticize_clip(params, clip);
    CHECK(std::isfinite(d1));

    // doubling the final dense layer doubles the score
    Tensor* w = params.critic.find("critic.fc.w");
    Tensor* b = params.critic.find("critic.fc.b");
    REQUIRE(w != nullptr);
    for (float& v : w->values()) v *= 2.0f;
    for (float& v : b->values()) v *= 2.0f;
    CHECK(criticize_clip(params, clip) == doctest::Approx(2.0f * d1).epsilon(1e-4));

    VideoClip short_clip = make_clip({frames[0], frames[1]});
    CHECK_THROWS_AS(criticize_clip(params, short_clip), std::invalid_argument);
}

TEST_CASE("clipped critic weights bound the score by interval arithmetic") {
    ModelConfig cfg = tiny_config();
    ModelParams params = init_params(37, cfg);
    const float c = 0.01f;
    for (auto& [name, t] : params.critic.items())
        for (float& v : t.values()) v = std::clamp(v, -c, c);

    // propagate |activation| bounds through conv(k=4,s=2,p=1) + leaky_relu
    const int cb = cfg.critic_base();
    double bound = 1.0;  // clip values in [0,1]
    const int fan[4] = {cfg.clip_len * cfg.channels * 16, cb * 16, 2 * cb * 16, 4 * cb * 16};
    for (int layer = 0; layer < 4; ++layer) bound = c * fan[layer] * bound + c;
    const int flat = 8 * cb * cfg.encoder_spatial() * cfg.encoder_spatial();
    bound = c * flat * bound + c;

    Rng rng(13);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<Tensor> frames;
        for (int t = 0; t < cfg.clip_len; ++t) frames.push_back(random_frame(rng, 1, 16));
        const float score = criticize_clip(params, make_clip(frames));
        CHECK(std::isfinite(score));
        CHECK(std::abs(score) <= bound);
    }
}

TEST_CASE("init is deterministic and counts match the architecture table") {
    ModelConfig cfg;  // defaults: 64x64, C=1, P=4, Dz=100, Ds=512, bc=32, T=5
    ModelParams a = init_params(42, cfg);
    ModelParams b = init_params(42, cfg);
    for (size_t i = 0; i < a.generator.items().size(); ++i) {
        auto av = a.generator.items()[i].second.values();
        auto bv = b.generator.items()[i].second.values();
        REQUIRE(av.size() == bv.size());
        for (size_t j = 0; j < av.size(); ++j) REQUIRE(av[j] == bv[j]);
    }

    // closed-form counts, frozen from the architecture definition (see README)
    CHECK(a.generator.parameter_count() == 4742128);
    CHECK(a.critic.parameter_count() == 2860865);

    ModelParams c = init_params(43, cfg);
    bool differ = false;
    auto av = a.generator.items()[0].second.values();
    auto cv = c.generator.items()[0].second.values();
    for (size_t j = 0; j < av.size(); ++j) differ = differ || av[j] != cv[j];
    CHECK(differ);
}

TEST_CASE("full generator gradient matches finite differences on a reduced model") {
    // smallest config the 4-layer stride-2 encoder admits (16x16)
    ModelConfig cfg = tiny_config();
    ModelParams params = init_params(41, cfg);
    randomize(params.generator, 777, 0.15f);
    // restore an identity-leaning transform head so warps stay in-range
    Tensor* fc2w = params.generator.find("tform.fc2.w");
    for (float& v : fc2w->values()) v *= 0.05f;

    Rng rng(14);
    Tensor f0 = random_frame(rng, 1, 16);
    Tensor f1 = random_frame(rng, 1, 16);
    Tensor z = random_latent(rng, cfg.latent_dim);
    auto forward = [&] { return reduce_mean(generate_midpoint_frame(params, f0, f1, z)); };

    for (const char* name : {"enc.conv1.w", "enc.fc.w", "tform.fc1.w", "tform.fc2.b",
                             "mask.fc.w", "mask.tconv3.w"}) {
        Tensor* t = params.generator.find(name);
        REQUIRE(t != nullptr);
        CHECK(check_gradient_wrt(forward, *t, 1e-3) < 1e-2);
    }
}
