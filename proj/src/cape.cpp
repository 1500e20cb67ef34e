#include "capepde/cape.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "capepde/errors.hpp"
#include "capepde/models.hpp"
#include "capepde/ops.hpp"

namespace capepde {

std::string cape_variant_name(CapeVariant v) {
    switch (v) {
        case CapeVariant::layernorm: return "layernorm";
        case CapeVariant::no_layernorm: return "no_layernorm";
        case CapeVariant::multiplicative: return "multiplicative";
    }
    return "?";
}

CapeVariant cape_variant_from_name(const std::string& s) {
    if (s == "layernorm") return CapeVariant::layernorm;
    if (s == "no_layernorm") return CapeVariant::no_layernorm;
    if (s == "multiplicative") return CapeVariant::multiplicative;
    throw ConfigError("unknown cape variant '" + s + "'");
}

void CapeConfig::validate() const {
    if (d < channels) throw ConfigError("cape d must be >= field channels");
    if (ell < 1) throw ConfigError("cape ell must be >= 1");
    if (kernel % 2 == 0) throw ConfigError("cape depthwise kernel must be odd");
    if (p < 1 || modes < 1) throw ConfigError("cape p and modes must be positive");
    if (variant != CapeVariant::no_layernorm && n_x < 1)
        throw ConfigError("cape layernorm variants need n_x");
}

CapeConfig ablate(const CapeConfig& config, const std::string& drop) {
    CapeConfig out = config;
    if (drop == "spectral")
        out.ablation.drop_spectral = true;
    else if (drop == "conv1x1")
        out.ablation.drop_conv1x1 = true;
    else if (drop == "depthwise")
        out.ablation.drop_depthwise = true;
    else if (drop == "layernorm")
        out.variant = CapeVariant::no_layernorm;
    else
        throw ConfigError("unknown ablation flag '" + drop + "'");
    return out;
}

CapeModule::CapeModule(const CapeConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const std::int64_t d = cfg_.d, h = cfg_.hidden_width(), c = cfg_.channels;
    for (int a = 1; a <= 3; ++a) {
        const std::string p = "mlp" + std::to_string(a);
        params_.emplace_back(p + ".w1", kaiming_uniform({h, cfg_.p}, cfg_.p, rng));
        params_.emplace_back(p + ".b1", bias_uniform(h, cfg_.p, rng));
        params_.emplace_back(p + ".w2", kaiming_uniform({d, h}, h, rng));
        params_.emplace_back(p + ".b2", bias_uniform(d, h, rng));
    }
    params_.emplace_back("lift.w", kaiming_uniform({d, c}, c, rng));
    params_.emplace_back("lift.b", bias_uniform(d, c, rng));
    params_.emplace_back("g1.w", kaiming_uniform({d, d}, d, rng));
    params_.emplace_back("g1.b", bias_uniform(d, d, rng));
    params_.emplace_back("g2.k", kaiming_uniform({d, cfg_.kernel}, cfg_.kernel, rng));
    params_.emplace_back("g2.b", bias_uniform(d, cfg_.kernel, rng));
    {
        const double s = 1.0 / static_cast<double>(d * d);
        Tensor re = Tensor::zeros({cfg_.modes, d, d}, true);
        Tensor im = Tensor::zeros({cfg_.modes, d, d}, true);
        for (std::int64_t i = 0; i < re.numel(); ++i) {
            re.raw_value()[i] = s * rng.normal();
            im.raw_value()[i] = s * rng.normal();
        }
        params_.emplace_back("g3.re", re);
        params_.emplace_back("g3.im", im);
    }
    // Zero-initialized head: the residual output starts at the identity
    // (intermediates equal the input state) and the branches fade in as the
    // head trains away from zero.
    params_.emplace_back("head.w", Tensor::zeros({c * cfg_.ell, d}, true));
    params_.emplace_back("head.b", Tensor::zeros({c * cfg_.ell}, true));
    if (cfg_.variant != CapeVariant::no_layernorm) {
        params_.emplace_back("ln.gamma", Tensor::full({c, cfg_.n_x}, 1.0, true));
        params_.emplace_back("ln.beta", Tensor::zeros({c, cfg_.n_x}, true));
    }
}

Tensor CapeModule::param(const std::string& name) const {
    for (const auto& [n, t] : params_)
        if (n == name) return t;
    throw ConfigError("cape has no parameter named '" + name + "'");
}

std::array<Tensor, 3> CapeModule::attention_masks(double lambda_value) const {
    if (lambda_value <= 0.0)
        throw ConfigError("pde parameter must be positive for the log encoding");
    // Parameters span decades; the embedding sees log10(lambda).
    Tensor lam = Tensor::from({cfg_.p}, std::vector<double>(static_cast<std::size_t>(cfg_.p),
                                                            std::log10(lambda_value)));
    std::array<Tensor, 3> masks;
    for (int a = 1; a <= 3; ++a) {
        const std::string p = "mlp" + std::to_string(a);
        Tensor hidden = gelu(linear(param(p + ".w1"), param(p + ".b1"), lam));
        masks[static_cast<std::size_t>(a - 1)] = linear(param(p + ".w2"), param(p + ".b2"), hidden);
    }
    return masks;
}

CapeModule::Output CapeModule::forward(const Tensor& u, double lambda_value) const {
    if (u.rank() != 2 || u.dim(0) != cfg_.channels)
        throw ShapeError("cape expects (" + std::to_string(cfg_.channels) + ", n_x) input, got " +
                         shape_str(u.shape()));
    const auto masks = attention_masks(lambda_value);
    Tensor lifted = conv1x1(u, param("lift.w"), param("lift.b"));
    Tensor mix = lifted;
    if (!cfg_.ablation.drop_conv1x1) {
        Tensor z1 = conv1x1(lifted, param("g1.w"), param("g1.b"));
        mix = add(mix, mul(z1, masks[0]));
    }
    if (!cfg_.ablation.drop_depthwise) {
        Tensor z2 = depthwise_conv(lifted, param("g2.k"), param("g2.b"));
        mix = add(mix, mul(z2, masks[1]));
    }
    if (!cfg_.ablation.drop_spectral) {
        Tensor z3 = spectral_conv(lifted, param("g3.re"), param("g3.im"));
        mix = add(mix, mul(z3, masks[2]));
    }
    Tensor y = conv1x1(gelu(mix), param("head.w"), param("head.b"));

    Output out;
    out.intermediates.reserve(static_cast<std::size_t>(cfg_.ell));
    for (std::int64_t i = 0; i < cfg_.ell; ++i) {
        Tensor yi = slice_channels(y, i * cfg_.channels, cfg_.channels);
        switch (cfg_.variant) {
            case CapeVariant::no_layernorm:
                out.intermediates.push_back(add(u, yi));
                break;
            case CapeVariant::layernorm:
                out.intermediates.push_back(
                    add(u, layer_norm(yi, param("ln.gamma"), param("ln.beta"))));
                break;
            case CapeVariant::multiplicative: {
                Tensor ln = layer_norm(yi, param("ln.gamma"), param("ln.beta"));
                out.intermediates.push_back(mul(u, add(Tensor::full(ln.shape(), 1.0), ln)));
                break;
            }
        }
    }
    return out;
}

Tensor CapeModule::assemble_base_input(const Tensor& u, const Output& out) {
    std::vector<Tensor> parts;
    parts.reserve(out.intermediates.size() + 1);
    parts.push_back(u);
    for (const auto& t : out.intermediates) {
        if (t.shape() != u.shape())
            throw ShapeError("assemble_base_input: intermediate shape mismatch");
        parts.push_back(t);
    }
    return concat_channels(parts);
}

std::vector<Tensor> CapeModule::params() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& [n, t] : params_) out.push_back(t);
    return out;
}

std::int64_t CapeModule::param_count() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
}

CapeModule CapeModule::clone() const {
    CapeModule m = *this;
    m.params_.clear();
    for (const auto& [n, t] : params_) m.params_.emplace_back(n, t.clone());
    return m;
}

std::vector<std::string> dump_gated_kernels(const CapeModule& cape,
                                            std::span<const double> lambda_values,
                                            const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const Tensor kernels = cape.param("g2.k");
    const std::int64_t d = kernels.dim(0), taps = kernels.dim(1);
    std::vector<std::string> paths;
    for (double lam : lambda_values) {
        const auto masks = cape.attention_masks(lam);
        const auto a2 = masks[1].value();
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%g", lam);
        const std::string path = out_dir + "/gated_kernels_lambda_" + buf + ".csv";
        std::ofstream f(path, std::ios::trunc);
        if (!f) throw DataError("cannot write " + path);
        f << "channel";
        for (std::int64_t t = 0; t < taps; ++t) f << ",k" << t;
        f << "\n";
        f.precision(17);
        for (std::int64_t ch = 0; ch < d; ++ch) {
            f << ch;
            for (std::int64_t t = 0; t < taps; ++t)
                f << "," << a2[static_cast<std::size_t>(ch)] * kernels.value()[ch * taps + t];
            f << "\n";
        }
        paths.push_back(path);
    }
    return paths;
}

}  // namespace capepde
