#include "capepde/tensor.hpp"

#include <sstream>

#include "capepde/errors.hpp"
#include "capepde/rng.hpp"

namespace capepde {

std::int64_t numel_of(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) {
        if (d <= 0) throw ShapeError("non-positive extent in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    auto n = std::make_shared<TensorNode>();
    const std::int64_t want = numel_of(shape);
    if (want != static_cast<std::int64_t>(data.size()))
        throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_str(shape));
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = std::make_shared<TensorNode>();
    const std::int64_t count = numel_of(shape);
    n->shape = std::move(shape);
    n->value.assign(static_cast<std::size_t>(count), 0.0);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (auto& x : t.node()->value) x = v;
    return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) { return full(Shape{}, v, requires_grad); }

Tensor Tensor::randn(Shape shape, Rng& rng, double scale, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (auto& x : t.node()->value) x = scale * rng.normal();
    return t;
}

std::span<const double> Tensor::grad() const {
    if (node_->grad.empty())
        throw NumericError("gradient requested before backward populated it");
    return node_->grad;
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on non-scalar tensor of shape " + shape_str(shape()));
    return node_->value[0];
}

Tensor Tensor::clone() const {
    auto n = std::make_shared<TensorNode>();
    n->shape = node_->shape;
    n->value = node_->value;
    n->requires_grad = node_->requires_grad;
    return Tensor(std::move(n));
}

namespace {
thread_local Tape* t_active_tape = nullptr;
}

Tape::Tape() : parent_(t_active_tape) { t_active_tape = this; }

Tape::~Tape() { t_active_tape = parent_; }

Tape* Tape::active() { return t_active_tape; }

void Tape::backward(const Tensor& loss) {
    if (consumed_)
        throw UnsupportedError("backward already ran on this tape; higher-order passes are unsupported");
    if (!loss.defined() || loss.numel() != 1)
        throw ShapeError("backward requires a scalar loss");
    consumed_ = true;

    auto ln = loss.node();
    ln->ensure_grad();
    ln->grad[0] = 1.0;

    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        bool any = false;
        for (const auto& out : it->outputs) {
            if (!out->grad.empty()) {
                any = true;
                break;
            }
        }
        if (any) it->backward();
    }
}

}  // namespace capepde
