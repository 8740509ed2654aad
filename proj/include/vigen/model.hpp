#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vigen/merge.hpp"
#include "vigen/tensor.hpp"
#include "vigen/warp.hpp"

namespace vigen {

// Architecture knobs. Defaults are the 64x64 configuration; the desk-scale
// experiments shrink image_size / base_channels / code_dim together.
struct ModelConfig {
    int image_size = 64;      // H = W, must be divisible by 16
    int channels = 1;         // C of a frame
    int transform_count = 4;  // P
    int latent_dim = 100;     // Dz
    int code_dim = 512;       // Ds
    int base_channels = 32;   // encoder conv1 width; the other widths derive from it
    int clip_len = 5;         // T

    int critic_base() const { return base_channels * 2; }
    int transform_hidden() const { return base_channels * 8; }
    int encoder_spatial() const { return image_size / 16; }
    int decoder_spatial() const { return image_size / 8; }

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

// Ordered name -> tensor map. Order is construction order and is the layout
// contract for checkpoints and optimizer state.
class ParamSet {
  public:
    Tensor& add(const std::string& name, Tensor t);
    Tensor* find(const std::string& name);
    const Tensor* find(const std::string& name) const;

    std::vector<std::pair<std::string, Tensor>>& items() { return items_; }
    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    size_t size() const { return items_.size(); }

    void set_requires_grad(bool on);
    void zero_grads();
    int64_t parameter_count() const;

  private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

// All four networks: scenario encoder + transform head + mask decoder form
// the generator group; the spatio-temporal critic is its own group.
struct ModelParams {
    ModelConfig config;
    ParamSet generator;
    ParamSet critic;
};

// Deterministic He-uniform init; the transform head's last layer starts at
// zero weights with identity biases so every transform begins as identity.
ModelParams init_params(uint64_t seed, const ModelConfig& config);

// frames [T,C,H,W] in [0,1]
struct VideoClip {
    Tensor frames;

    int length() const { return frames.dim(0); }
    int channels() const { return frames.dim(1); }
    int height() const { return frames.dim(2); }
    int width() const { return frames.dim(3); }
};

VideoClip make_clip(const std::vector<Tensor>& frames);  // each [C,H,W]
Tensor clip_frame(const VideoClip& clip, int t);         // copy, off-tape

// ---- batched internals (the differentiable path) ---------------------------

// f_start/f_end [N,C,H,W], z [N,Dz] -> one generated frame [N,C,H,W]
Tensor generator_forward(const ModelParams& params, const Tensor& f_start, const Tensor& f_end,
                         const Tensor& z);

// clip frames stacked along channels [N,T*C,H,W] -> scores [N,1]
Tensor critic_forward(const ModelParams& params, const Tensor& clip_channels);

// encoder input [N,2C,H,W] -> code [N,Ds]
Tensor encoder_forward(const ModelParams& params, const Tensor& input);

// code||z [N,Ds+Dz] -> transform parameters [N,P,6]
Tensor transform_head_forward(const ModelParams& params, const Tensor& code_and_z);

// code||z [N,Ds+Dz] -> normalized masks [N,P,H,W]
Tensor mask_decoder_forward(const ModelParams& params, const Tensor& code_and_z);

// ---- single-sample surface --------------------------------------------------

struct GeneratorInput {
    Tensor f_start;  // [C,H,W] in [0,1]
    Tensor f_end;    // [C,H,W] in [0,1]
    Tensor f_minus;  // f_end - f_start
    Tensor z;        // [Dz]

    // start frame and difference image stacked in depth: [2C,H,W]
    Tensor encoder_channels() const;
};

GeneratorInput build_generator_input(const Tensor& f_start, const Tensor& f_end,
                                     const Tensor& z);

struct ScenarioCode {
    Tensor code;  // [Ds]
};

ScenarioCode encode_scenario(const ModelParams& params, const GeneratorInput& input);

std::vector<AffineTransform> generate_transforms(const ModelParams& params,
                                                 const ScenarioCode& code, const Tensor& z);

MaskStack decode_masks(const ModelParams& params, const ScenarioCode& code, const Tensor& z);

// Full single-sample generator pass: encode, generate P transforms and masks,
// warp f_start by each transform, merge.
Tensor generate_midpoint_frame(const ModelParams& params, const Tensor& f_start,
                               const Tensor& f_end, const Tensor& z);

float criticize_clip(const ModelParams& params, const VideoClip& clip);

}  // namespace vigen
