#pragma once

#include <string>
#include <vector>

#include "capepde/rng.hpp"
#include "capepde/tensor.hpp"

namespace capepde {

enum class BaseKind { fno, cnn };
enum class Conditioning { vanilla, conditional, prev2, cape };

std::string base_kind_name(BaseKind k);
BaseKind base_kind_from_name(const std::string& s);
std::string conditioning_name(Conditioning c);
Conditioning conditioning_from_name(const std::string& s);

struct FnoConfig {
    std::int64_t width = 20;  // lifted channels (36 without an attached attention module)
    std::int64_t modes = 12;
    std::int64_t n_layers = 4;
    std::int64_t in_channels = 1;
    std::int64_t out_channels = 1;
};

struct CnnConfig {
    std::vector<std::int64_t> channels = {32, 32, 32};
    std::int64_t kernel = 5;
    std::int64_t in_channels = 1;
    std::int64_t out_channels = 1;
};

/// Base surrogate: lift -> n_layers x (spectral conv + pointwise conv,
/// summed, GeLU except after the last layer) -> pointwise projection for the
/// FNO; a plain periodic CNN stack otherwise. Immutable during forward;
/// weights mutate only through the optimizer between steps.
class BaseModel {
public:
    static BaseModel make_fno(const FnoConfig& cfg, Rng& rng);
    static BaseModel make_cnn(const CnnConfig& cfg, Rng& rng);

    Tensor forward(const Tensor& x) const;

    BaseKind kind() const { return kind_; }
    std::int64_t in_channels() const { return in_channels_; }
    std::int64_t out_channels() const { return out_channels_; }
    const FnoConfig& fno_config() const { return fno_; }
    const CnnConfig& cnn_config() const { return cnn_; }

    const std::vector<std::pair<std::string, Tensor>>& named_params() const { return params_; }
    std::vector<Tensor> params() const;
    std::int64_t param_count() const;
    Tensor param(const std::string& name) const;

    BaseModel clone() const;

private:
    BaseKind kind_ = BaseKind::fno;
    FnoConfig fno_;
    CnnConfig cnn_;
    std::int64_t in_channels_ = 1, out_channels_ = 1;
    std::vector<std::pair<std::string, Tensor>> params_;
};

/// Appends a constant channel holding the raw PDE parameter value.
Tensor make_conditional_input(const Tensor& u, double lambda_value);

/// Channel concatenation (u^k, u^{k-1}).
Tensor make_prev2_input(const Tensor& u_k, const Tensor& u_km1);

// Initializers shared by the model builders.
Tensor kaiming_uniform(Shape shape, std::int64_t fan_in, Rng& rng);
Tensor bias_uniform(std::int64_t n, std::int64_t fan_in, Rng& rng);

}  // namespace capepde
