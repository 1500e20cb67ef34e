#pragma once

#include <array>
#include <string>
#include <vector>

#include "capepde/rng.hpp"
#include "capepde/tensor.hpp"

namespace capepde {

/// How the residual head combines the input state with each predicted
/// increment: u + LN(y_i), u + y_i, or u * (1 + LN(y_i)).
enum class CapeVariant { layernorm, no_layernorm, multiplicative };

std::string cape_variant_name(CapeVariant v);
CapeVariant cape_variant_from_name(const std::string& s);

struct CapeAblation {
    bool drop_spectral = false;
    bool drop_conv1x1 = false;
    bool drop_depthwise = false;

    bool any() const { return drop_spectral || drop_conv1x1 || drop_depthwise; }
};

struct CapeConfig {
    std::int64_t d = 64;        // feature channels
    std::int64_t ell = 1;       // intermediate future steps
    std::int64_t kernel = 5;    // depthwise kernel taps
    std::int64_t modes = 12;    // spectral branch modes
    std::int64_t p = 1;         // parameter vector length
    std::int64_t hidden = 0;    // embedding MLP width; 0 means d
    std::int64_t channels = 1;  // field channels c
    std::int64_t n_x = 128;     // needed for LayerNorm affine shapes
    CapeVariant variant = CapeVariant::no_layernorm;
    CapeAblation ablation;

    std::int64_t hidden_width() const { return hidden > 0 ? hidden : d; }
    void validate() const;
};

/// Returns a copy of `config` with the named contribution removed. Valid
/// names: "spectral", "conv1x1", "depthwise", "layernorm" (the last switches
/// the head to the no-LayerNorm variant).
CapeConfig ablate(const CapeConfig& config, const std::string& drop);

/// Channel-attention module conditioned on the PDE parameter: three
/// embedding MLPs gate a pointwise, a depthwise and a spectral convolution
/// over the lifted input, and a residual head emits ell intermediate future
/// states for the base model to interpolate.
class CapeModule {
public:
    CapeModule(const CapeConfig& cfg, Rng& rng);

    struct Output {
        std::vector<Tensor> intermediates;  // ell tensors of shape (c, n_x)
    };

    /// Attention gates a_1..a_3 (raw, no output activation) from the
    /// log10-encoded parameter value.
    std::array<Tensor, 3> attention_masks(double lambda_value) const;

    Output forward(const Tensor& u, double lambda_value) const;

    /// Base-model input: channels (u^k, u_hat^{k->k+1}, ..., u_hat^{k->k+ell}).
    static Tensor assemble_base_input(const Tensor& u, const Output& out);

    const CapeConfig& config() const { return cfg_; }
    const std::vector<std::pair<std::string, Tensor>>& named_params() const { return params_; }
    std::vector<Tensor> params() const;
    std::int64_t param_count() const;
    Tensor param(const std::string& name) const;

    CapeModule clone() const;

private:
    CapeConfig cfg_;
    std::vector<std::pair<std::string, Tensor>> params_;
};

/// Writes the attention-gated depthwise kernels (a_2 odot g2 taps, one row
/// per feature channel: channel id + taps) to one CSV per parameter value.
/// Returns the written paths.
std::vector<std::string> dump_gated_kernels(const CapeModule& cape,
                                            std::span<const double> lambda_values,
                                            const std::string& out_dir);

}  // namespace capepde
