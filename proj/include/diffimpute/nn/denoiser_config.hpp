#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "diffimpute/core/error.hpp"

namespace diffimpute {

enum class Architecture { mlp, resnet, transformer, unet };

inline std::string to_string(Architecture a) {
    switch (a) {
    case Architecture::mlp: return "mlp";
    case Architecture::resnet: return "resnet";
    case Architecture::transformer: return "transformer";
    case Architecture::unet: return "unet";
    }
    return "?";
}

inline Architecture parse_architecture(const std::string& s) {
    if (s == "mlp") return Architecture::mlp;
    if (s == "resnet") return Architecture::resnet;
    if (s == "transformer") return Architecture::transformer;
    if (s == "unet") return Architecture::unet;
    throw InputError("unknown architecture '" + s + "' (expected mlp, resnet, transformer or unet)");
}

/// Shape and regularization of a noise-prediction network.
///
/// `hidden` is the MLP/ResNet main width; ResNet blocks expand it by
/// `resnet_factor` inside the time-conditioned layer. `d`, `heads` and
/// `ffn_factor` size the transformer (hidden FFN width ceil(ffn_factor * d)).
/// `unet_channels` is the encoder channel ramp; the bottleneck keeps the
/// last entry and the decoders mirror it down to one channel.
struct DenoiserConfig {
    Architecture arch = Architecture::mlp;
    std::size_t k = 0;
    std::size_t blocks = 3;
    std::size_t hidden = 64;
    std::size_t resnet_factor = 2;
    std::size_t d = 192;
    std::size_t heads = 8;
    double ffn_factor = 4.0 / 3.0;
    double attention_dropout = 0.2;
    double ffn_dropout = 0.1;
    double residual_dropout = 0.0;
    std::vector<std::size_t> unet_channels{16, 32};
    std::size_t unet_groups = 8;
    bool time_embedding = true;

    std::size_t transformer_ffn_hidden() const {
        return static_cast<std::size_t>(std::ceil(ffn_factor * static_cast<double>(d) - 1e-9));
    }

    void validate() const {
        if (k < 1) throw InputError("denoiser: feature count k must be >= 1");
        if (blocks < 1) throw InputError("denoiser: blocks must be >= 1");
        for (double p : {attention_dropout, ffn_dropout, residual_dropout})
            if (p < 0.0 || p >= 1.0) throw InputError("denoiser: dropout rates must lie in [0, 1)");
        switch (arch) {
        case Architecture::mlp:
        case Architecture::resnet:
            if (hidden < 1 || resnet_factor < 1) throw InputError("denoiser: hidden width must be >= 1");
            break;
        case Architecture::transformer:
            if (heads == 0 || d % heads != 0)
                throw InputError("denoiser: embedding width d=" + std::to_string(d) +
                                 " is not divisible by heads=" + std::to_string(heads));
            if (ffn_factor <= 0) throw InputError("denoiser: ffn_factor must be positive");
            break;
        case Architecture::unet:
            if (k < 4) throw InputError("denoiser: unet needs k >= 4 features, got " + std::to_string(k));
            if (unet_channels.empty()) throw InputError("denoiser: unet needs at least one encoder level");
            for (auto c : unet_channels)
                if (c == 0) throw InputError("denoiser: unet channel counts must be positive");
            if (heads == 0 || unet_groups == 0) throw InputError("denoiser: unet heads/groups must be positive");
            break;
        }
    }
};

} // namespace diffimpute
