#include "capepde/models.hpp"

#include <cmath>

#include "capepde/errors.hpp"
#include "capepde/ops.hpp"

namespace capepde {

std::string base_kind_name(BaseKind k) { return k == BaseKind::fno ? "fno" : "cnn"; }

BaseKind base_kind_from_name(const std::string& s) {
    if (s == "fno") return BaseKind::fno;
    if (s == "cnn") return BaseKind::cnn;
    throw ConfigError("unknown base model kind '" + s + "'");
}

std::string conditioning_name(Conditioning c) {
    switch (c) {
        case Conditioning::vanilla: return "vanilla";
        case Conditioning::conditional: return "conditional";
        case Conditioning::prev2: return "prev2";
        case Conditioning::cape: return "cape";
    }
    return "?";
}

Conditioning conditioning_from_name(const std::string& s) {
    if (s == "vanilla") return Conditioning::vanilla;
    if (s == "conditional") return Conditioning::conditional;
    if (s == "prev2") return Conditioning::prev2;
    if (s == "cape") return Conditioning::cape;
    throw ConfigError("unknown conditioning mode '" + s + "'");
}

Tensor kaiming_uniform(Shape shape, std::int64_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (auto& v : t.node()->value) v = rng.uniform(-bound, bound);
    return t;
}

Tensor bias_uniform(std::int64_t n, std::int64_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t = Tensor::zeros({n}, true);
    for (auto& v : t.node()->value) v = rng.uniform(-bound, bound);
    return t;
}

namespace {

// Spectral weights: complex entries ~ N(0, s^2) with s = 1/(cin*cout).
std::pair<Tensor, Tensor> spectral_init(std::int64_t modes, std::int64_t cout, std::int64_t cin,
                                        Rng& rng) {
    const double s = 1.0 / static_cast<double>(cin * cout);
    Tensor re = Tensor::zeros({modes, cout, cin}, true);
    Tensor im = Tensor::zeros({modes, cout, cin}, true);
    for (std::int64_t i = 0; i < re.numel(); ++i) {
        re.raw_value()[i] = s * rng.normal();
        im.raw_value()[i] = s * rng.normal();
    }
    return {re, im};
}

}  // namespace

BaseModel BaseModel::make_fno(const FnoConfig& cfg, Rng& rng) {
    if (cfg.width < cfg.out_channels)
        throw ConfigError("fno width must be at least the output channel count");
    if (cfg.n_layers < 1 || cfg.modes < 1) throw ConfigError("fno needs layers >= 1, modes >= 1");
    BaseModel m;
    m.kind_ = BaseKind::fno;
    m.fno_ = cfg;
    m.in_channels_ = cfg.in_channels;
    m.out_channels_ = cfg.out_channels;
    m.params_.emplace_back("lift.w", kaiming_uniform({cfg.width, cfg.in_channels}, cfg.in_channels, rng));
    m.params_.emplace_back("lift.b", bias_uniform(cfg.width, cfg.in_channels, rng));
    for (std::int64_t l = 0; l < cfg.n_layers; ++l) {
        auto [re, im] = spectral_init(cfg.modes, cfg.width, cfg.width, rng);
        const std::string p = "layer" + std::to_string(l);
        m.params_.emplace_back(p + ".spec.re", re);
        m.params_.emplace_back(p + ".spec.im", im);
        m.params_.emplace_back(p + ".pw.w", kaiming_uniform({cfg.width, cfg.width}, cfg.width, rng));
        m.params_.emplace_back(p + ".pw.b", bias_uniform(cfg.width, cfg.width, rng));
    }
    m.params_.emplace_back("proj.w", kaiming_uniform({cfg.out_channels, cfg.width}, cfg.width, rng));
    m.params_.emplace_back("proj.b", bias_uniform(cfg.out_channels, cfg.width, rng));
    return m;
}

BaseModel BaseModel::make_cnn(const CnnConfig& cfg, Rng& rng) {
    if (cfg.channels.empty()) throw ConfigError("cnn needs at least one layer");
    if (cfg.kernel % 2 == 0) throw ConfigError("cnn kernel must be odd");
    BaseModel m;
    m.kind_ = BaseKind::cnn;
    m.cnn_ = cfg;
    m.in_channels_ = cfg.in_channels;
    m.out_channels_ = cfg.out_channels;
    std::int64_t prev = cfg.in_channels;
    for (std::size_t l = 0; l < cfg.channels.size(); ++l) {
        const std::int64_t ch = cfg.channels[l];
        const std::string p = "conv" + std::to_string(l);
        m.params_.emplace_back(p + ".w",
                               kaiming_uniform({ch, prev, cfg.kernel}, prev * cfg.kernel, rng));
        m.params_.emplace_back(p + ".b", bias_uniform(ch, prev * cfg.kernel, rng));
        prev = ch;
    }
    m.params_.emplace_back("proj.w", kaiming_uniform({cfg.out_channels, prev}, prev, rng));
    m.params_.emplace_back("proj.b", bias_uniform(cfg.out_channels, prev, rng));
    return m;
}

Tensor BaseModel::param(const std::string& name) const {
    for (const auto& [n, t] : params_)
        if (n == name) return t;
    throw ConfigError("no parameter named '" + name + "'");
}

Tensor BaseModel::forward(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(0) != in_channels_)
        throw ShapeError("base model expects (" + std::to_string(in_channels_) + ", n_x) input, got " +
                         shape_str(x.shape()));
    if (kind_ == BaseKind::fno) {
        if (fno_.modes > x.dim(1) / 2 + 1)
            throw ConfigError("fno modes exceed n_x/2+1");
        Tensor h = conv1x1(x, param("lift.w"), param("lift.b"));
        for (std::int64_t l = 0; l < fno_.n_layers; ++l) {
            const std::string p = "layer" + std::to_string(l);
            Tensor s = spectral_conv(h, param(p + ".spec.re"), param(p + ".spec.im"));
            Tensor c = conv1x1(h, param(p + ".pw.w"), param(p + ".pw.b"));
            Tensor y = add(s, c);
            h = (l + 1 < fno_.n_layers) ? gelu(y) : y;
        }
        return conv1x1(h, param("proj.w"), param("proj.b"));
    }
    Tensor h = x;
    for (std::size_t l = 0; l < cnn_.channels.size(); ++l) {
        const std::string p = "conv" + std::to_string(l);
        h = gelu(conv1d(h, param(p + ".w"), param(p + ".b")));
    }
    return conv1x1(h, param("proj.w"), param("proj.b"));
}

std::vector<Tensor> BaseModel::params() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& [n, t] : params_) out.push_back(t);
    return out;
}

std::int64_t BaseModel::param_count() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
}

BaseModel BaseModel::clone() const {
    BaseModel m = *this;
    m.params_.clear();
    for (const auto& [n, t] : params_) m.params_.emplace_back(n, t.clone());
    return m;
}

Tensor make_conditional_input(const Tensor& u, double lambda_value) {
    if (u.rank() < 2) throw ShapeError("make_conditional_input: expected (c, spatial...)");
    Shape ch_shape = u.shape();
    ch_shape[0] = 1;
    Tensor lam = Tensor::full(ch_shape, lambda_value);
    const Tensor parts[] = {u, lam};
    return concat_channels(parts);
}

Tensor make_prev2_input(const Tensor& u_k, const Tensor& u_km1) {
    if (u_k.shape() != u_km1.shape())
        throw ShapeError("make_prev2_input: frame shapes differ");
    const Tensor parts[] = {u_k, u_km1};
    return concat_channels(parts);
}

}  // namespace capepde
