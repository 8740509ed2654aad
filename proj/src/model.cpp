#include "vigen/model.hpp"

#include <cmath>

#include "vigen/ops.hpp"
#include "vigen/rng.hpp"

namespace vigen {

using detail::check;

void ModelConfig::validate() const {
    check(image_size >= 16 && image_size % 16 == 0,
          "ModelConfig: image_size must be a positive multiple of 16, got " +
              std::to_string(image_size));
    check(channels >= 1, "ModelConfig: channels must be >= 1");
    check(transform_count >= 1 && transform_count <= 8,
          "ModelConfig: transform_count must be in [1,8], got " +
              std::to_string(transform_count));
    check(latent_dim >= 1, "ModelConfig: latent_dim must be >= 1");
    check(code_dim >= 1, "ModelConfig: code_dim must be >= 1");
    check(base_channels >= 1, "ModelConfig: base_channels must be >= 1");
    check(clip_len >= 3, "ModelConfig: clip_len must be >= 3");
}

Tensor& ParamSet::add(const std::string& name, Tensor t) {
    check(find(name) == nullptr, "ParamSet: duplicate parameter name " + name);
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
}

Tensor* ParamSet::find(const std::string& name) {
    for (auto& [n, t] : items_)
        if (n == name) return &t;
    return nullptr;
}

const Tensor* ParamSet::find(const std::string& name) const {
    for (const auto& [n, t] : items_)
        if (n == name) return &t;
    return nullptr;
}

void ParamSet::set_requires_grad(bool on) {
    for (auto& [n, t] : items_) t.set_requires_grad(on);
}

void ParamSet::zero_grads() {
    for (auto& [n, t] : items_) t.zero_grad();
}

int64_t ParamSet::parameter_count() const {
    int64_t total = 0;
    for (const auto& [n, t] : items_) total += t.numel();
    return total;
}

namespace {

Tensor he_uniform(Rng& rng, Shape shape, int fan_in) {
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    std::vector<float> data(static_cast<size_t>(numel_of(shape)));
    for (float& v : data) v = static_cast<float>(rng.uniform(-bound, bound));
    return Tensor::from_data(std::move(shape), std::move(data));
}

void add_conv(ParamSet& set, Rng& rng, const std::string& name, int cin, int cout) {
    set.add(name + ".w", he_uniform(rng, {cout, cin, 4, 4}, cin * 16));
    set.add(name + ".b", Tensor::zeros({cout}));
}

void add_tconv(ParamSet& set, Rng& rng, const std::string& name, int cin, int cout) {
    set.add(name + ".w", he_uniform(rng, {cin, cout, 4, 4}, cin * 16));
    set.add(name + ".b", Tensor::zeros({cout}));
}

void add_dense(ParamSet& set, Rng& rng, const std::string& name, int din, int dout) {
    set.add(name + ".w", he_uniform(rng, {dout, din}, din));
    set.add(name + ".b", Tensor::zeros({dout}));
}

constexpr float kLeakySlope = 0.2f;

}  // namespace

ModelParams init_params(uint64_t seed, const ModelConfig& config) {
    config.validate();
    const int bc = config.base_channels;
    const int cb = config.critic_base();
    const int C = config.channels;
    const int es = config.encoder_spatial();
    const int ds = config.decoder_spatial();

    ModelParams params;
    params.config = config;

    Rng rng(mix_seed(seed, 0x6d6f64656cULL));

    // scenario encoder: 4 stride-2 convs then a projection to the code
    add_conv(params.generator, rng, "enc.conv1", 2 * C, bc);
    add_conv(params.generator, rng, "enc.conv2", bc, 2 * bc);
    add_conv(params.generator, rng, "enc.conv3", 2 * bc, 4 * bc);
    add_conv(params.generator, rng, "enc.conv4", 4 * bc, 8 * bc);
    add_dense(params.generator, rng, "enc.fc", 8 * bc * es * es, config.code_dim);

    // transform head: two dense layers; the last starts at zero weights with
    // identity biases so every transform begins as the identity map
    const int zin = config.code_dim + config.latent_dim;
    add_dense(params.generator, rng, "tform.fc1", zin, config.transform_hidden());
    params.generator.add("tform.fc2.w",
                         Tensor::zeros({6 * config.transform_count, config.transform_hidden()}));
    std::vector<float> identity_bias;
    for (int p = 0; p < config.transform_count; ++p)
        for (float v : {1.0f, 0.0f, 0.0f, 0.0f, 1.0f, 0.0f}) identity_bias.push_back(v);
    params.generator.add("tform.fc2.b",
                         Tensor::from_data({6 * config.transform_count}, std::move(identity_bias)));

    // mask decoder: projection then 3 stride-2 transposed convs to P logits
    add_dense(params.generator, rng, "mask.fc", zin, 4 * bc * ds * ds);
    add_tconv(params.generator, rng, "mask.tconv1", 4 * bc, 2 * bc);
    add_tconv(params.generator, rng, "mask.tconv2", 2 * bc, bc);
    add_tconv(params.generator, rng, "mask.tconv3", bc, config.transform_count);

    // spatio-temporal critic: clip frames stacked in depth, 4 convs, scalar head
    add_conv(params.critic, rng, "critic.conv1", config.clip_len * C, cb);
    add_conv(params.critic, rng, "critic.conv2", cb, 2 * cb);
    add_conv(params.critic, rng, "critic.conv3", 2 * cb, 4 * cb);
    add_conv(params.critic, rng, "critic.conv4", 4 * cb, 8 * cb);
    add_dense(params.critic, rng, "critic.fc", 8 * cb * es * es, 1);

    return params;
}

namespace {

const Tensor& p(const ParamSet& set, const std::string& name) {
    const Tensor* t = set.find(name);
    check(t != nullptr, "missing parameter " + name);
    return *t;
}

}  // namespace

Tensor encoder_forward(const ModelParams& params, const Tensor& input) {
    const auto& g = params.generator;
    check(input.defined() && input.rank() == 4 &&
              input.dim(1) == 2 * params.config.channels &&
              input.dim(2) == params.config.image_size &&
              input.dim(3) == params.config.image_size,
          "encoder: input must be [N," + std::to_string(2 * params.config.channels) + "," +
              std::to_string(params.config.image_size) + "," +
              std::to_string(params.config.image_size) + "], got " +
              (input.defined() ? shape_str(input.shape()) : std::string("undefined")));
    Tensor h = leaky_relu(conv2d(input, p(g, "enc.conv1.w"), p(g, "enc.conv1.b"), 2, 1),
                          kLeakySlope);
    h = leaky_relu(conv2d(h, p(g, "enc.conv2.w"), p(g, "enc.conv2.b"), 2, 1), kLeakySlope);
    h = leaky_relu(conv2d(h, p(g, "enc.conv3.w"), p(g, "enc.conv3.b"), 2, 1), kLeakySlope);
    h = leaky_relu(conv2d(h, p(g, "enc.conv4.w"), p(g, "enc.conv4.b"), 2, 1), kLeakySlope);
    const int flat = 8 * params.config.base_channels * params.config.encoder_spatial() *
                     params.config.encoder_spatial();
    Tensor code = dense(reshape(h, {h.dim(0), flat}), p(g, "enc.fc.w"), p(g, "enc.fc.b"));
    return code;
}

Tensor transform_head_forward(const ModelParams& params, const Tensor& code_and_z) {
    const auto& g = params.generator;
    Tensor h = leaky_relu(dense(code_and_z, p(g, "tform.fc1.w"), p(g, "tform.fc1.b")),
                          kLeakySlope);
    Tensor t = dense(h, p(g, "tform.fc2.w"), p(g, "tform.fc2.b"));
    return reshape(t, {code_and_z.dim(0), params.config.transform_count, 6});
}

Tensor mask_decoder_forward(const ModelParams& params, const Tensor& code_and_z) {
    const auto& g = params.generator;
    const int bc = params.config.base_channels;
    const int ds = params.config.decoder_spatial();
    Tensor h = leaky_relu(dense(code_and_z, p(g, "mask.fc.w"), p(g, "mask.fc.b")), kLeakySlope);
    h = reshape(h, {code_and_z.dim(0), 4 * bc, ds, ds});
    h = leaky_relu(transposed_conv2d(h, p(g, "mask.tconv1.w"), p(g, "mask.tconv1.b"), 2, 1),
                   kLeakySlope);
    h = leaky_relu(transposed_conv2d(h, p(g, "mask.tconv2.w"), p(g, "mask.tconv2.b"), 2, 1),
                   kLeakySlope);
    Tensor logits = transposed_conv2d(h, p(g, "mask.tconv3.w"), p(g, "mask.tconv3.b"), 2, 1);
    return softmax_channels(logits);
}

Tensor generator_forward(const ModelParams& params, const Tensor& f_start, const Tensor& f_end,
                         const Tensor& z) {
    const int S = params.config.image_size;
    check(f_start.defined() && f_start.rank() == 4, "generator: f_start must be [N,C,H,W]");
    check(f_start.shape() == f_end.shape(),
          "generator: frame shapes differ, " + shape_str(f_start.shape()) + " vs " +
              shape_str(f_end.shape()));
    check(z.defined() && z.rank() == 2 && z.dim(0) == f_start.dim(0) &&
              z.dim(1) == params.config.latent_dim,
          "generator: z must be [N," + std::to_string(params.config.latent_dim) + "]");

    Tensor f_minus = sub(f_end, f_start);
    Tensor code = encoder_forward(params, concat_channels({f_start, f_minus}));
    Tensor cz = concat({code, z}, 1);
    Tensor tparams = transform_head_forward(params, cz);  // [N,P,6]
    Tensor masks = mask_decoder_forward(params, cz);      // [N,P,S,S]
    Tensor grids = affine_grid(tparams, S, S);            // [N,P,S,S,2]
    Tensor warped = bilinear_sample_multi(f_start, grids);
    return merge_masked_multi(warped, masks);
}

Tensor critic_forward(const ModelParams& params, const Tensor& clip_channels) {
    const auto& c = params.critic;
    const int expect = params.config.clip_len * params.config.channels;
    check(clip_channels.defined() && clip_channels.rank() == 4 &&
              clip_channels.dim(1) == expect,
          "critic: input must be [N," + std::to_string(expect) + ",H,W], got " +
              (clip_channels.defined() ? shape_str(clip_channels.shape())
                                       : std::string("undefined")));
    Tensor h = leaky_relu(conv2d(clip_channels, p(c, "critic.conv1.w"), p(c, "critic.conv1.b"),
                                 2, 1),
                          kLeakySlope);
    h = leaky_relu(conv2d(h, p(c, "critic.conv2.w"), p(c, "critic.conv2.b"), 2, 1), kLeakySlope);
    h = leaky_relu(conv2d(h, p(c, "critic.conv3.w"), p(c, "critic.conv3.b"), 2, 1), kLeakySlope);
    h = leaky_relu(conv2d(h, p(c, "critic.conv4.w"), p(c, "critic.conv4.b"), 2, 1), kLeakySlope);
    const int flat = 8 * params.config.critic_base() * params.config.encoder_spatial() *
                     params.config.encoder_spatial();
    return dense(reshape(h, {h.dim(0), flat}), p(c, "critic.fc.w"), p(c, "critic.fc.b"));
}

VideoClip make_clip(const std::vector<Tensor>& frames) {
    check(!frames.empty(), "make_clip: no frames");
    const Tensor& first = frames.front();
    check(first.defined() && first.rank() == 3, "make_clip: frames must be [C,H,W]");
    std::vector<Tensor> lifted;
    lifted.reserve(frames.size());
    for (const Tensor& f : frames) {
        check(f.shape() == first.shape(), "make_clip: frame shape mismatch");
        lifted.push_back(reshape(f, {1, first.dim(0), first.dim(1), first.dim(2)}));
    }
    return VideoClip{frames.size() == 1 ? lifted[0] : concat(lifted, 0)};
}

Tensor clip_frame(const VideoClip& clip, int t) {
    check(t >= 0 && t < clip.length(),
          "clip_frame: index " + std::to_string(t) + " out of range for length " +
              std::to_string(clip.length()));
    const int C = clip.channels(), H = clip.height(), W = clip.width();
    const size_t plane = static_cast<size_t>(C) * H * W;
    auto v = clip.frames.values();
    return Tensor::from_data({C, H, W}, {v.begin() + t * plane, v.begin() + (t + 1) * plane});
}

Tensor GeneratorInput::encoder_channels() const {
    return concat({f_start, f_minus}, 0);
}

GeneratorInput build_generator_input(const Tensor& f_start, const Tensor& f_end,
                                     const Tensor& z) {
    check(f_start.defined() && f_start.rank() == 3, "build_generator_input: frames are [C,H,W]");
    check(f_start.shape() == f_end.shape(),
          "build_generator_input: frame shapes differ, " + shape_str(f_start.shape()) + " vs " +
              shape_str(f_end.shape()));
    for (float v : f_start.values())
        check(v >= -1e-5f && v <= 1.0f + 1e-5f,
              "build_generator_input: f_start value " + std::to_string(v) + " outside [0,1]");
    for (float v : f_end.values())
        check(v >= -1e-5f && v <= 1.0f + 1e-5f,
              "build_generator_input: f_end value " + std::to_string(v) + " outside [0,1]");
    return GeneratorInput{f_start, f_end, sub(f_end, f_start), z};
}

ScenarioCode encode_scenario(const ModelParams& params, const GeneratorInput& input) {
    const int C = params.config.channels, S = params.config.image_size;
    Tensor batched = reshape(input.encoder_channels(), {1, 2 * C, S, S});
    return ScenarioCode{reshape(encoder_forward(params, batched), {params.config.code_dim})};
}

std::vector<AffineTransform> generate_transforms(const ModelParams& params,
                                                 const ScenarioCode& code, const Tensor& z) {
    check(z.defined() && z.numel() == params.config.latent_dim,
          "generate_transforms: z must have " + std::to_string(params.config.latent_dim) +
              " entries, got " + std::to_string(z.defined() ? z.numel() : 0));
    Tensor cz = concat({reshape(code.code, {1, params.config.code_dim}),
                        reshape(z, {1, params.config.latent_dim})},
                       1);
    Tensor t = transform_head_forward(params, cz);  // [1,P,6]
    std::vector<AffineTransform> out;
    auto v = t.values();
    for (int pidx = 0; pidx < params.config.transform_count; ++pidx)
        out.push_back(AffineTransform::from_span(v.subspan(static_cast<size_t>(pidx) * 6, 6)));
    return out;
}

MaskStack decode_masks(const ModelParams& params, const ScenarioCode& code, const Tensor& z) {
    Tensor cz = concat({reshape(code.code, {1, params.config.code_dim}),
                        reshape(z, {1, params.config.latent_dim})},
                       1);
    Tensor masks = mask_decoder_forward(params, cz);  // [1,P,S,S]
    return MaskStack{reshape(masks, {params.config.transform_count, params.config.image_size,
                                     params.config.image_size})};
}

Tensor generate_midpoint_frame(const ModelParams& params, const Tensor& f_start,
                               const Tensor& f_end, const Tensor& z) {
    const int C = params.config.channels, S = params.config.image_size;
    check(f_start.defined() && f_start.rank() == 3 && f_start.dim(0) == C &&
              f_start.dim(1) == S && f_start.dim(2) == S,
          "generate_midpoint_frame: frame must be [" + std::to_string(C) + "," +
              std::to_string(S) + "," + std::to_string(S) + "], got " +
              (f_start.defined() ? shape_str(f_start.shape()) : std::string("undefined")));
    Tensor out = generator_forward(params, reshape(f_start, {1, C, S, S}),
                                   reshape(f_end, {1, C, S, S}),
                                   reshape(z, {1, params.config.latent_dim}));
    return reshape(out, {C, S, S});
}

float criticize_clip(const ModelParams& params, const VideoClip& clip) {
    check(clip.frames.defined() && clip.length() == params.config.clip_len,
          "criticize_clip: clip has " +
              std::to_string(clip.frames.defined() ? clip.length() : 0) + " frames, expected " +
              std::to_string(params.config.clip_len));
    const int C = clip.channels(), H = clip.height(), W = clip.width();
    Tensor stacked = reshape(clip.frames, {1, clip.length() * C, H, W});
    return critic_forward(params, stacked).item();
}

}  // namespace vigen
