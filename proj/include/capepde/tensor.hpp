#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace capepde {

class Rng;

using Shape = std::vector<std::int64_t>;

std::int64_t numel_of(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until backward reaches this node
    bool requires_grad = false;

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
};

/// Shared handle to an n-dimensional double array, row-major.
///
/// Copies share storage (cheap to pass around); clone() makes an independent
/// value-semantic copy for cross-thread transfer.
class Tensor {
public:
    Tensor() = default;

    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    /// Leaf filled with N(0, scale^2) draws, in row-major order.
    static Tensor randn(Shape shape, Rng& rng, double scale, bool requires_grad = true);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    std::int64_t dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }
    bool requires_grad() const { return node_->requires_grad; }

    std::span<const double> value() const { return node_->value; }
    /// Mutable view of the raw values; for optimizers and loaders only.
    std::span<double> raw_value() { return node_->value; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const;
    /// Mutable grad buffer, allocated as zeros when absent.
    std::span<double> raw_grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad() {
        if (!node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
    }

    /// Scalar extraction; ShapeError when numel != 1.
    double item() const;

    /// Deep copy (new leaf, same values and requires_grad, no grad).
    Tensor clone() const;

    std::shared_ptr<TensorNode> node() const { return node_; }
    static Tensor wrap(std::shared_ptr<TensorNode> n) { return Tensor(std::move(n)); }

private:
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<TensorNode> node_;
};

/// One recorded operation: output nodes plus a closure that routes their
/// cotangents into the inputs' grad buffers.
struct TapeEntry {
    std::vector<std::shared_ptr<TensorNode>> outputs;
    std::function<void()> backward;
};

/// Define-by-run operation tape. Constructing a Tape makes it the active
/// recorder for the current thread; ops append entries in execution order,
/// so reverse iteration is reverse topological order. One backward() per
/// tape; rebuild the graph for the next step.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    void record(TapeEntry e) { entries_.push_back(std::move(e)); }
    std::size_t size() const { return entries_.size(); }

    /// Reverse sweep from a scalar loss. Accumulates into every
    /// requires_grad node reachable from the loss. Errors: non-scalar loss
    /// -> ShapeError; second call -> UnsupportedError.
    void backward(const Tensor& loss);

private:
    std::vector<TapeEntry> entries_;
    bool consumed_ = false;
    Tape* parent_ = nullptr;
};

}  // namespace capepde
