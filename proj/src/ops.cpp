#include "capepde/ops.hpp"

#include <cmath>
#include <complex>
#include <cstring>

#include "capepde/errors.hpp"
#include "capepde/fft.hpp"

namespace capepde {

namespace {

using NodePtr = std::shared_ptr<TensorNode>;

bool recording(std::initializer_list<const Tensor*> ins) {
    if (!Tape::active()) return false;
    for (const Tensor* t : ins)
        if (t->defined() && t->requires_grad()) return true;
    return false;
}

Tensor make_out(Shape shape, bool rg) { return Tensor::zeros(std::move(shape), rg); }

void check_finite(const Tensor& t, const char* op) {
    double s = 0.0;
    for (double v : t.value()) s += v;
    if (!std::isfinite(s))
        throw NumericError(std::string(op) + " produced non-finite values");
}

// Channel broadcast: b is a rank-1 vector matching a's leading dimension.
bool channel_broadcast(const Tensor& a, const Tensor& b) {
    return b.rank() == 1 && a.rank() >= 2 && b.dim(0) == a.dim(0);
}

void require_binary_shapes(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() == b.shape() || channel_broadcast(a, b)) return;
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " neither match nor channel-broadcast");
}

// f(a,b) elementwise with optional channel broadcast of b; dfa/dfb are the
// local partials as functions of (a_i, b_i).
template <typename F>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, F&& f, double da, double db) {
    require_binary_shapes(a, b, name);
    const bool bc = channel_broadcast(a, b);
    const bool rg = recording({&a, &b});
    Tensor out = make_out(a.shape(), rg);
    const std::int64_t n = a.numel();
    const std::int64_t spatial = bc ? n / a.dim(0) : 0;
    {
        const double* pa = a.value().data();
        const double* pb = b.value().data();
        double* po = out.raw_value().data();
        if (!bc) {
            for (std::int64_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
        } else {
            for (std::int64_t c = 0; c < a.dim(0); ++c) {
                const double bv = pb[c];
                for (std::int64_t s = 0; s < spatial; ++s)
                    po[c * spatial + s] = f(pa[c * spatial + s], bv);
            }
        }
    }
    check_finite(out, name);
    if (rg) {
        auto an = a.node(), bn = b.node(), on = out.node();
        const bool is_mul = (da == 0.0);  // sentinel: mul needs value-dependent partials
        Tape::active()->record(
            {{on}, [an, bn, on, bc, spatial, is_mul, da, db] {
                 const auto& g = on->grad;
                 const std::int64_t n = static_cast<std::int64_t>(g.size());
                 if (an->requires_grad) {
                     an->ensure_grad();
                     double* ga = an->grad.data();
                     if (!is_mul) {
                         for (std::int64_t i = 0; i < n; ++i) ga[i] += da * g[i];
                     } else if (!bc) {
                         const double* pb = bn->value.data();
                         for (std::int64_t i = 0; i < n; ++i) ga[i] += pb[i] * g[i];
                     } else {
                         const double* pb = bn->value.data();
                         const std::int64_t ch = static_cast<std::int64_t>(bn->value.size());
                         for (std::int64_t c = 0; c < ch; ++c)
                             for (std::int64_t s = 0; s < spatial; ++s)
                                 ga[c * spatial + s] += pb[c] * g[c * spatial + s];
                     }
                 }
                 if (bn->requires_grad) {
                     bn->ensure_grad();
                     double* gb = bn->grad.data();
                     if (!bc) {
                         if (!is_mul) {
                             for (std::int64_t i = 0; i < n; ++i) gb[i] += db * g[i];
                         } else {
                             const double* pa = an->value.data();
                             for (std::int64_t i = 0; i < n; ++i) gb[i] += pa[i] * g[i];
                         }
                     } else {
                         const std::int64_t ch = static_cast<std::int64_t>(bn->value.size());
                         const double* pa = an->value.data();
                         for (std::int64_t c = 0; c < ch; ++c) {
                             double acc = 0.0;
                             for (std::int64_t s = 0; s < spatial; ++s) {
                                 const double gi = g[c * spatial + s];
                                 acc += is_mul ? pa[c * spatial + s] * gi : db * gi;
                             }
                             gb[c] += acc;
                         }
                     }
                 }
             }});
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(a, b, "add", [](double x, double y) { return x + y; }, 1.0, 1.0);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(a, b, "sub", [](double x, double y) { return x - y; }, 1.0, -1.0);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(a, b, "mul", [](double x, double y) { return x * y; }, 0.0, 0.0);
}

Tensor scale(const Tensor& a, double s) {
    const bool rg = recording({&a});
    Tensor out = make_out(a.shape(), rg);
    const double* pa = a.value().data();
    double* po = out.raw_value().data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) po[i] = s * pa[i];
    check_finite(out, "scale");
    if (rg) {
        auto an = a.node(), on = out.node();
        Tape::active()->record({{on}, [an, on, s] {
                                    an->ensure_grad();
                                    const auto& g = on->grad;
                                    for (std::size_t i = 0; i < g.size(); ++i) an->grad[i] += s * g[i];
                                }});
    }
    return out;
}

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Tensor gelu(const Tensor& a) {
    const bool rg = recording({&a});
    Tensor out = make_out(a.shape(), rg);
    const double* pa = a.value().data();
    double* po = out.raw_value().data();
    const std::int64_t n = a.numel();
    std::vector<double> deriv;  // saved for backward: cdf + x * pdf
    if (rg) deriv.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const double cdf = 0.5 * (1.0 + std::erf(pa[i] * kInvSqrt2));
        po[i] = pa[i] * cdf;
        if (rg)
            deriv[static_cast<std::size_t>(i)] =
                cdf + pa[i] * kInvSqrt2Pi * std::exp(-0.5 * pa[i] * pa[i]);
    }
    check_finite(out, "gelu");
    if (rg) {
        auto an = a.node(), on = out.node();
        Tape::active()->record({{on}, [an, on, deriv = std::move(deriv)] {
                                    an->ensure_grad();
                                    const auto& g = on->grad;
                                    for (std::size_t i = 0; i < g.size(); ++i)
                                        an->grad[i] += g[i] * deriv[i];
                                }});
    }
    return out;
}

Tensor tanh(const Tensor& a) {
    const bool rg = recording({&a});
    Tensor out = make_out(a.shape(), rg);
    const double* pa = a.value().data();
    double* po = out.raw_value().data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) po[i] = std::tanh(pa[i]);
    check_finite(out, "tanh");
    if (rg) {
        auto an = a.node(), on = out.node();
        Tape::active()->record({{on}, [an, on] {
                                    an->ensure_grad();
                                    const auto& g = on->grad;
                                    const double* y = on->value.data();
                                    for (std::size_t i = 0; i < g.size(); ++i)
                                        an->grad[i] += g[i] * (1.0 - y[i] * y[i]);
                                }});
    }
    return out;
}

Tensor sqrt(const Tensor& a) {
    const bool rg = recording({&a});
    Tensor out = make_out(a.shape(), rg);
    const double* pa = a.value().data();
    double* po = out.raw_value().data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) {
        if (pa[i] < 0.0) throw NumericError("sqrt of negative value");
        po[i] = std::sqrt(pa[i]);
    }
    if (rg) {
        auto an = a.node(), on = out.node();
        Tape::active()->record({{on}, [an, on] {
                                    an->ensure_grad();
                                    const auto& g = on->grad;
                                    const double* y = on->value.data();
                                    for (std::size_t i = 0; i < g.size(); ++i)
                                        an->grad[i] += g[i] * 0.5 / y[i];
                                }});
    }
    return out;
}

Tensor sum(const Tensor& a) {
    const bool rg = recording({&a});
    double acc = 0.0;
    for (double v : a.value()) acc += v;
    Tensor out = Tensor::scalar(acc, rg);
    if (rg) {
        auto an = a.node(), on = out.node();
        Tape::active()->record({{on}, [an, on] {
                                    an->ensure_grad();
                                    const double g = on->grad[0];
                                    for (auto& x : an->grad) x += g;
                                }});
    }
    return out;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor concat_channels(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no inputs");
    const Tensor& first = parts[0];
    if (first.rank() < 1) throw ShapeError("concat_channels: rank-0 input");
    Shape trailing(first.shape().begin() + 1, first.shape().end());
    std::int64_t channels = 0;
    bool rg = false;
    for (const Tensor& p : parts) {
        Shape t(p.shape().begin() + 1, p.shape().end());
        if (p.rank() != first.rank() || t != trailing)
            throw ShapeError("concat_channels: trailing dims differ");
        channels += p.dim(0);
        rg = rg || (Tape::active() && p.requires_grad());
    }
    Shape out_shape = first.shape();
    out_shape[0] = channels;
    Tensor out = make_out(out_shape, rg);
    const std::int64_t spatial = first.numel() / first.dim(0);
    double* po = out.raw_value().data();
    std::int64_t off = 0;
    std::vector<NodePtr> in_nodes;
    for (const Tensor& p : parts) {
        std::memcpy(po + off, p.value().data(), static_cast<std::size_t>(p.numel()) * sizeof(double));
        off += p.numel();
        in_nodes.push_back(p.node());
    }
    if (rg) {
        auto on = out.node();
        Tape::active()->record({{on}, [in_nodes, on, spatial] {
                                    const auto& g = on->grad;
                                    std::int64_t off = 0;
                                    for (const auto& in : in_nodes) {
                                        const std::int64_t cnt =
                                            static_cast<std::int64_t>(in->value.size());
                                        if (in->requires_grad) {
                                            in->ensure_grad();
                                            for (std::int64_t i = 0; i < cnt; ++i)
                                                in->grad[i] += g[off + i];
                                        }
                                        off += cnt;
                                    }
                                    (void)spatial;
                                }});
    }
    return out;
}

Tensor slice_channels(const Tensor& x, std::int64_t start, std::int64_t count) {
    if (x.rank() < 1) throw ShapeError("slice_channels: rank-0 input");
    if (start < 0 || count <= 0 || start + count > x.dim(0))
        throw ShapeError("slice_channels: range out of bounds");
    const bool rg = recording({&x});
    Shape out_shape = x.shape();
    out_shape[0] = count;
    Tensor out = make_out(out_shape, rg);
    const std::int64_t spatial = x.numel() / x.dim(0);
    std::memcpy(out.raw_value().data(), x.value().data() + start * spatial,
                static_cast<std::size_t>(count * spatial) * sizeof(double));
    if (rg) {
        auto xn = x.node(), on = out.node();
        Tape::active()->record({{on}, [xn, on, start, spatial] {
                                    xn->ensure_grad();
                                    const auto& g = on->grad;
                                    double* gx = xn->grad.data() + start * spatial;
                                    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                                }});
    }
    return out;
}

Tensor linear(const Tensor& w, const Tensor& b, const Tensor& x) {
    if (w.rank() != 2 || x.rank() != 1 || w.dim(1) != x.dim(0))
        throw ShapeError("linear: w " + shape_str(w.shape()) + " incompatible with x " +
                         shape_str(x.shape()));
    const std::int64_t out_n = w.dim(0), in_n = w.dim(1);
    if (b.defined() && (b.rank() != 1 || b.dim(0) != out_n))
        throw ShapeError("linear: bias shape mismatch");
    const bool rg = b.defined() ? recording({&w, &b, &x}) : recording({&w, &x});
    Tensor out = make_out({out_n}, rg);
    {
        const double* pw = w.value().data();
        const double* px = x.value().data();
        double* po = out.raw_value().data();
        for (std::int64_t o = 0; o < out_n; ++o) {
            double acc = b.defined() ? b.value()[static_cast<std::size_t>(o)] : 0.0;
            for (std::int64_t i = 0; i < in_n; ++i) acc += pw[o * in_n + i] * px[i];
            po[o] = acc;
        }
    }
    if (rg) {
        auto wn = w.node(), xn = x.node(), on = out.node();
        NodePtr bn = b.defined() ? b.node() : nullptr;
        Tape::active()->record({{on}, [wn, bn, xn, on, out_n, in_n] {
                                    const auto& g = on->grad;
                                    if (wn->requires_grad) {
                                        wn->ensure_grad();
                                        for (std::int64_t o = 0; o < out_n; ++o)
                                            for (std::int64_t i = 0; i < in_n; ++i)
                                                wn->grad[o * in_n + i] += g[o] * xn->value[i];
                                    }
                                    if (bn && bn->requires_grad) {
                                        bn->ensure_grad();
                                        for (std::int64_t o = 0; o < out_n; ++o) bn->grad[o] += g[o];
                                    }
                                    if (xn->requires_grad) {
                                        xn->ensure_grad();
                                        for (std::int64_t o = 0; o < out_n; ++o)
                                            for (std::int64_t i = 0; i < in_n; ++i)
                                                xn->grad[i] += wn->value[o * in_n + i] * g[o];
                                    }
                                }});
    }
    return out;
}

Tensor conv1x1(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() < 2 || w.rank() != 2)
        throw ShapeError("conv1x1: x must be (cin, spatial...), w (cout, cin)");
    const std::int64_t cin = x.dim(0), cout = w.dim(0);
    if (w.dim(1) != cin)
        throw ShapeError("conv1x1: w has " + std::to_string(w.dim(1)) + " input channels, x has " +
                         std::to_string(cin));
    if (b.defined() && (b.rank() != 1 || b.dim(0) != cout))
        throw ShapeError("conv1x1: bias shape mismatch");
    const std::int64_t spatial = x.numel() / cin;
    const bool rg = b.defined() ? recording({&x, &w, &b}) : recording({&x, &w});
    Shape out_shape = x.shape();
    out_shape[0] = cout;
    Tensor out = make_out(out_shape, rg);
    {
        const double* px = x.value().data();
        const double* pw = w.value().data();
        double* po = out.raw_value().data();
        for (std::int64_t co = 0; co < cout; ++co) {
            double* yo = po + co * spatial;
            if (b.defined()) {
                const double bv = b.value()[static_cast<std::size_t>(co)];
                for (std::int64_t s = 0; s < spatial; ++s) yo[s] = bv;
            }
            for (std::int64_t ci = 0; ci < cin; ++ci) {
                const double wv = pw[co * cin + ci];
                const double* xi = px + ci * spatial;
                for (std::int64_t s = 0; s < spatial; ++s) yo[s] += wv * xi[s];
            }
        }
    }
    if (rg) {
        auto xn = x.node(), wn = w.node(), on = out.node();
        NodePtr bn = b.defined() ? b.node() : nullptr;
        Tape::active()->record({{on}, [xn, wn, bn, on, cin, cout, spatial] {
                                    const double* g = on->grad.data();
                                    if (xn->requires_grad) {
                                        xn->ensure_grad();
                                        double* gx = xn->grad.data();
                                        const double* pw = wn->value.data();
                                        for (std::int64_t ci = 0; ci < cin; ++ci) {
                                            double* gxi = gx + ci * spatial;
                                            for (std::int64_t co = 0; co < cout; ++co) {
                                                const double wv = pw[co * cin + ci];
                                                const double* go = g + co * spatial;
                                                for (std::int64_t s = 0; s < spatial; ++s)
                                                    gxi[s] += wv * go[s];
                                            }
                                        }
                                    }
                                    if (wn->requires_grad) {
                                        wn->ensure_grad();
                                        double* gw = wn->grad.data();
                                        const double* px = xn->value.data();
                                        for (std::int64_t co = 0; co < cout; ++co) {
                                            const double* go = g + co * spatial;
                                            for (std::int64_t ci = 0; ci < cin; ++ci) {
                                                const double* xi = px + ci * spatial;
                                                double acc = 0.0;
                                                for (std::int64_t s = 0; s < spatial; ++s)
                                                    acc += go[s] * xi[s];
                                                gw[co * cin + ci] += acc;
                                            }
                                        }
                                    }
                                    if (bn && bn->requires_grad) {
                                        bn->ensure_grad();
                                        for (std::int64_t co = 0; co < cout; ++co) {
                                            const double* go = g + co * spatial;
                                            double acc = 0.0;
                                            for (std::int64_t s = 0; s < spatial; ++s) acc += go[s];
                                            bn->grad[co] += acc;
                                        }
                                    }
                                }});
    }
    return out;
}

namespace {

// y[j] += kv * x[(j + shift) mod n], vectorizable two-segment form.
inline void rolled_axpy(double* y, const double* x, double kv, std::int64_t shift, std::int64_t n) {
    shift = ((shift % n) + n) % n;
    const std::int64_t head = n - shift;
    for (std::int64_t j = 0; j < head; ++j) y[j] += kv * x[j + shift];
    for (std::int64_t j = head; j < n; ++j) y[j] += kv * x[j + shift - n];
}

// dot(g, roll(x, shift)) = sum_j g[j] * x[(j + shift) mod n].
inline double rolled_dot(const double* g, const double* x, std::int64_t shift, std::int64_t n) {
    shift = ((shift % n) + n) % n;
    const std::int64_t head = n - shift;
    double acc = 0.0;
    for (std::int64_t j = 0; j < head; ++j) acc += g[j] * x[j + shift];
    for (std::int64_t j = head; j < n; ++j) acc += g[j] * x[j + shift - n];
    return acc;
}

void require_odd(std::int64_t k, const char* op) {
    if (k % 2 == 0)
        throw ConfigError(std::string(op) + ": kernel extent " + std::to_string(k) + " must be odd");
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 2 || w.rank() != 3)
        throw ShapeError("conv1d: x must be (cin,n), w (cout,cin,K)");
    const std::int64_t cin = x.dim(0), n = x.dim(1);
    const std::int64_t cout = w.dim(0), k = w.dim(2);
    if (w.dim(1) != cin) throw ShapeError("conv1d: channel mismatch");
    require_odd(k, "conv1d");
    if (b.defined() && (b.rank() != 1 || b.dim(0) != cout))
        throw ShapeError("conv1d: bias shape mismatch");
    const bool rg = b.defined() ? recording({&x, &w, &b}) : recording({&x, &w});
    Tensor out = make_out({cout, n}, rg);
    const std::int64_t half = k / 2;
    {
        const double* px = x.value().data();
        const double* pw = w.value().data();
        double* po = out.raw_value().data();
        for (std::int64_t co = 0; co < cout; ++co) {
            double* yo = po + co * n;
            if (b.defined()) {
                const double bv = b.value()[static_cast<std::size_t>(co)];
                for (std::int64_t j = 0; j < n; ++j) yo[j] = bv;
            }
            for (std::int64_t ci = 0; ci < cin; ++ci)
                for (std::int64_t t = 0; t < k; ++t)
                    rolled_axpy(yo, px + ci * n, pw[(co * cin + ci) * k + t], t - half, n);
        }
    }
    if (rg) {
        auto xn = x.node(), wn = w.node(), on = out.node();
        NodePtr bn = b.defined() ? b.node() : nullptr;
        Tape::active()->record({{on}, [xn, wn, bn, on, cin, cout, n, k, half] {
                                    const double* g = on->grad.data();
                                    if (xn->requires_grad) {
                                        xn->ensure_grad();
                                        for (std::int64_t ci = 0; ci < cin; ++ci) {
                                            double* gx = xn->grad.data() + ci * n;
                                            for (std::int64_t co = 0; co < cout; ++co)
                                                for (std::int64_t t = 0; t < k; ++t)
                                                    rolled_axpy(gx, g + co * n,
                                                                wn->value[(co * cin + ci) * k + t],
                                                                half - t, n);
                                        }
                                    }
                                    if (wn->requires_grad) {
                                        wn->ensure_grad();
                                        for (std::int64_t co = 0; co < cout; ++co)
                                            for (std::int64_t ci = 0; ci < cin; ++ci)
                                                for (std::int64_t t = 0; t < k; ++t)
                                                    wn->grad[(co * cin + ci) * k + t] += rolled_dot(
                                                        g + co * n, xn->value.data() + ci * n,
                                                        t - half, n);
                                    }
                                    if (bn && bn->requires_grad) {
                                        bn->ensure_grad();
                                        for (std::int64_t co = 0; co < cout; ++co) {
                                            double acc = 0.0;
                                            for (std::int64_t j = 0; j < n; ++j) acc += g[co * n + j];
                                            bn->grad[co] += acc;
                                        }
                                    }
                                }});
    }
    return out;
}

Tensor depthwise_conv(const Tensor& x, const Tensor& k, const Tensor& b) {
    if (!((x.rank() == 2 && k.rank() == 2) || (x.rank() == 3 && k.rank() == 3)))
        throw ShapeError("depthwise_conv: expected x (c,n) with k (c,K) or x (c,ny,nx) with k (c,Ky,Kx)");
    const std::int64_t c = x.dim(0);
    if (k.dim(0) != c) throw ShapeError("depthwise_conv: channel mismatch");
    if (b.defined() && (b.rank() != 1 || b.dim(0) != c))
        throw ShapeError("depthwise_conv: bias shape mismatch");
    const bool rg = b.defined() ? recording({&x, &k, &b}) : recording({&x, &k});

    if (x.rank() == 2) {
        const std::int64_t n = x.dim(1), kk = k.dim(1);
        require_odd(kk, "depthwise_conv");
        const std::int64_t half = kk / 2;
        Tensor out = make_out({c, n}, rg);
        {
            const double* px = x.value().data();
            const double* pk = k.value().data();
            double* po = out.raw_value().data();
            for (std::int64_t ch = 0; ch < c; ++ch) {
                double* yo = po + ch * n;
                if (b.defined()) {
                    const double bv = b.value()[static_cast<std::size_t>(ch)];
                    for (std::int64_t j = 0; j < n; ++j) yo[j] = bv;
                }
                for (std::int64_t t = 0; t < kk; ++t)
                    rolled_axpy(yo, px + ch * n, pk[ch * kk + t], t - half, n);
            }
        }
        if (rg) {
            auto xn = x.node(), kn = k.node(), on = out.node();
            NodePtr bn = b.defined() ? b.node() : nullptr;
            Tape::active()->record({{on}, [xn, kn, bn, on, c, n, kk, half] {
                                        const double* g = on->grad.data();
                                        if (xn->requires_grad) {
                                            xn->ensure_grad();
                                            for (std::int64_t ch = 0; ch < c; ++ch)
                                                for (std::int64_t t = 0; t < kk; ++t)
                                                    rolled_axpy(xn->grad.data() + ch * n, g + ch * n,
                                                                kn->value[ch * kk + t], half - t, n);
                                        }
                                        if (kn->requires_grad) {
                                            kn->ensure_grad();
                                            for (std::int64_t ch = 0; ch < c; ++ch)
                                                for (std::int64_t t = 0; t < kk; ++t)
                                                    kn->grad[ch * kk + t] +=
                                                        rolled_dot(g + ch * n, xn->value.data() + ch * n,
                                                                   t - half, n);
                                        }
                                        if (bn && bn->requires_grad) {
                                            bn->ensure_grad();
                                            for (std::int64_t ch = 0; ch < c; ++ch) {
                                                double acc = 0.0;
                                                for (std::int64_t j = 0; j < n; ++j) acc += g[ch * n + j];
                                                bn->grad[ch] += acc;
                                            }
                                        }
                                    }});
        }
        return out;
    }

    // 2D case (used for synthetic checks; plain modular indexing).
    const std::int64_t ny = x.dim(1), nx = x.dim(2);
    const std::int64_t ky = k.dim(1), kx = k.dim(2);
    require_odd(ky, "depthwise_conv");
    require_odd(kx, "depthwise_conv");
    Tensor out = make_out({c, ny, nx}, rg);
    const std::int64_t hy = ky / 2, hx = kx / 2;
    {
        const double* px = x.value().data();
        const double* pk = k.value().data();
        double* po = out.raw_value().data();
        for (std::int64_t ch = 0; ch < c; ++ch)
            for (std::int64_t iy = 0; iy < ny; ++iy)
                for (std::int64_t ix = 0; ix < nx; ++ix) {
                    double acc = b.defined() ? b.value()[static_cast<std::size_t>(ch)] : 0.0;
                    for (std::int64_t ty = 0; ty < ky; ++ty)
                        for (std::int64_t tx = 0; tx < kx; ++tx) {
                            const std::int64_t sy = (iy + ty - hy + ny) % ny;
                            const std::int64_t sx = (ix + tx - hx + nx) % nx;
                            acc += pk[(ch * ky + ty) * kx + tx] * px[(ch * ny + sy) * nx + sx];
                        }
                    po[(ch * ny + iy) * nx + ix] = acc;
                }
    }
    if (rg) {
        auto xn = x.node(), kn = k.node(), on = out.node();
        NodePtr bn = b.defined() ? b.node() : nullptr;
        Tape::active()->record(
            {{on}, [xn, kn, bn, on, c, ny, nx, ky, kx, hy, hx] {
                 const double* g = on->grad.data();
                 if (xn->requires_grad) xn->ensure_grad();
                 if (kn->requires_grad) kn->ensure_grad();
                 if (bn && bn->requires_grad) bn->ensure_grad();
                 for (std::int64_t ch = 0; ch < c; ++ch)
                     for (std::int64_t iy = 0; iy < ny; ++iy)
                         for (std::int64_t ix = 0; ix < nx; ++ix) {
                             const double gv = g[(ch * ny + iy) * nx + ix];
                             if (bn && bn->requires_grad) bn->grad[ch] += gv;
                             for (std::int64_t ty = 0; ty < ky; ++ty)
                                 for (std::int64_t tx = 0; tx < kx; ++tx) {
                                     const std::int64_t sy = (iy + ty - hy + ny) % ny;
                                     const std::int64_t sx = (ix + tx - hx + nx) % nx;
                                     if (xn->requires_grad)
                                         xn->grad[(ch * ny + sy) * nx + sx] +=
                                             gv * kn->value[(ch * ky + ty) * kx + tx];
                                     if (kn->requires_grad)
                                         kn->grad[(ch * ky + ty) * kx + tx] +=
                                             gv * xn->value[(ch * ny + sy) * nx + sx];
                                 }
                         }
             }});
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.numel() < 1) throw ShapeError("layer_norm: empty input");
    if (gamma.shape() != x.shape() || beta.shape() != x.shape())
        throw ShapeError("layer_norm: gamma/beta must match x");
    const bool rg = recording({&x, &gamma, &beta});
    const std::int64_t n = x.numel();
    const double inv_n = 1.0 / static_cast<double>(n);
    double mu = 0.0;
    for (double v : x.value()) mu += v;
    mu *= inv_n;
    double var = 0.0;
    for (double v : x.value()) var += (v - mu) * (v - mu);
    var *= inv_n;
    const double s = std::sqrt(var + eps);
    Tensor out = make_out(x.shape(), rg);
    std::vector<double> xhat(static_cast<std::size_t>(n));
    {
        const double* px = x.value().data();
        const double* pg = gamma.value().data();
        const double* pb = beta.value().data();
        double* po = out.raw_value().data();
        for (std::int64_t i = 0; i < n; ++i) {
            xhat[static_cast<std::size_t>(i)] = (px[i] - mu) / s;
            po[i] = pg[i] * xhat[static_cast<std::size_t>(i)] + pb[i];
        }
    }
    if (rg) {
        auto xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node();
        Tape::active()->record(
            {{on}, [xn, gn, bn, on, xhat = std::move(xhat), s, inv_n, n] {
                 const auto& g = on->grad;
                 if (gn->requires_grad) {
                     gn->ensure_grad();
                     for (std::int64_t i = 0; i < n; ++i)
                         gn->grad[i] += g[i] * xhat[static_cast<std::size_t>(i)];
                 }
                 if (bn->requires_grad) {
                     bn->ensure_grad();
                     for (std::int64_t i = 0; i < n; ++i) bn->grad[i] += g[i];
                 }
                 if (xn->requires_grad) {
                     xn->ensure_grad();
                     double m1 = 0.0, m2 = 0.0;
                     for (std::int64_t i = 0; i < n; ++i) {
                         const double t = gn->value[i] * g[i];
                         m1 += t;
                         m2 += t * xhat[static_cast<std::size_t>(i)];
                     }
                     m1 *= inv_n;
                     m2 *= inv_n;
                     for (std::int64_t i = 0; i < n; ++i) {
                         const double t = gn->value[i] * g[i];
                         xn->grad[i] += (t - m1 - xhat[static_cast<std::size_t>(i)] * m2) / s;
                     }
                 }
             }});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spectral ops
// ---------------------------------------------------------------------------

namespace {

struct RowView {
    std::int64_t rows;
    std::int64_t n;
};

RowView last_axis(const Tensor& x) {
    if (x.rank() < 1) throw ShapeError("spectral op on rank-0 tensor");
    const std::int64_t n = x.dim(x.rank() - 1);
    return {x.numel() / n, n};
}

}  // namespace

std::pair<Tensor, Tensor> rfft(const Tensor& x) {
    const auto [rows, n] = last_axis(x);
    if (!fft::is_pow2(n))
        throw ConfigError("rfft: length " + std::to_string(n) + " is not a power of two");
    const std::int64_t nf = n / 2 + 1;
    const bool rg = recording({&x});
    Shape out_shape = x.shape();
    out_shape.back() = nf;
    Tensor re = make_out(out_shape, rg);
    Tensor im = make_out(out_shape, rg);
    {
        thread_local std::vector<std::complex<double>> spec_a, spec_b, scratch;
        spec_a.resize(static_cast<std::size_t>(nf));
        spec_b.resize(static_cast<std::size_t>(nf));
        scratch.resize(static_cast<std::size_t>(n));
        auto store = [&](std::int64_t r, const std::vector<std::complex<double>>& spec) {
            for (std::int64_t k = 0; k < nf; ++k) {
                re.raw_value()[r * nf + k] = spec[static_cast<std::size_t>(k)].real();
                im.raw_value()[r * nf + k] = spec[static_cast<std::size_t>(k)].imag();
            }
        };
        std::int64_t r = 0;
        for (; r + 1 < rows; r += 2) {
            fft::rfft_pair_into(
                x.value().subspan(static_cast<std::size_t>(r * n), static_cast<std::size_t>(n)),
                x.value().subspan(static_cast<std::size_t>((r + 1) * n), static_cast<std::size_t>(n)),
                spec_a.data(), spec_b.data(), scratch.data());
            store(r, spec_a);
            store(r + 1, spec_b);
        }
        if (r < rows) {
            fft::rfft_into(x.value().subspan(static_cast<std::size_t>(r * n), static_cast<std::size_t>(n)),
                           spec_a.data(), scratch.data());
            store(r, spec_a);
        }
    }
    if (rg) {
        auto xn = x.node(), ren = re.node(), imn = im.node();
        Tape::active()->record(
            {{ren, imn}, [xn, ren, imn, rows, n, nf] {
                 xn->ensure_grad();
                 // The adjoint of the one-sided rfft is an inverse transform
                 // of the bin-rescaled cotangent (Hermitian doubling undone):
                 // full weight at DC/Nyquist, half weight elsewhere, times n.
                 thread_local std::vector<std::complex<double>> ha, hb, scratch;
                 thread_local std::vector<double> ya, yb;
                 ha.resize(static_cast<std::size_t>(nf));
                 hb.resize(static_cast<std::size_t>(nf));
                 scratch.resize(static_cast<std::size_t>(n));
                 ya.resize(static_cast<std::size_t>(n));
                 yb.resize(static_cast<std::size_t>(n));
                 const bool has_re = !ren->grad.empty();
                 const bool has_im = !imn->grad.empty();
                 auto fill = [&](std::int64_t r, std::vector<std::complex<double>>& h) {
                     for (std::int64_t k = 0; k < nf; ++k) {
                         const double scale_k =
                             (k == 0 || k == n / 2) ? static_cast<double>(n) : 0.5 * static_cast<double>(n);
                         h[static_cast<std::size_t>(k)] = {
                             scale_k * (has_re ? ren->grad[r * nf + k] : 0.0),
                             scale_k * (has_im ? imn->grad[r * nf + k] : 0.0)};
                     }
                 };
                 std::int64_t r = 0;
                 for (; r + 1 < rows; r += 2) {
                     fill(r, ha);
                     fill(r + 1, hb);
                     fft::irfft_pair_into(ha, hb, n, ya.data(), yb.data(), scratch.data());
                     for (std::int64_t j = 0; j < n; ++j) {
                         xn->grad[r * n + j] += ya[static_cast<std::size_t>(j)];
                         xn->grad[(r + 1) * n + j] += yb[static_cast<std::size_t>(j)];
                     }
                 }
                 if (r < rows) {
                     fill(r, ha);
                     fft::irfft_into(ha, n, ya.data(), scratch.data());
                     for (std::int64_t j = 0; j < n; ++j)
                         xn->grad[r * n + j] += ya[static_cast<std::size_t>(j)];
                 }
             }});
    }
    return {re, im};
}

Tensor irfft(const Tensor& re, const Tensor& im, std::int64_t n) {
    if (re.shape() != im.shape()) throw ShapeError("irfft: re/im shapes differ");
    const auto [rows, nf] = last_axis(re);
    if (!fft::is_pow2(n)) throw ConfigError("irfft: length is not a power of two");
    if (nf != n / 2 + 1) throw ShapeError("irfft: expected n/2+1 bins");
    const bool rg = recording({&re, &im});
    Shape out_shape = re.shape();
    out_shape.back() = n;
    Tensor out = make_out(out_shape, rg);
    {
        thread_local std::vector<std::complex<double>> half_a, half_b, scratch;
        half_a.resize(static_cast<std::size_t>(nf));
        half_b.resize(static_cast<std::size_t>(nf));
        scratch.resize(static_cast<std::size_t>(n));
        auto fill = [&](std::int64_t r, std::vector<std::complex<double>>& half) {
            for (std::int64_t k = 0; k < nf; ++k)
                half[static_cast<std::size_t>(k)] = {re.value()[r * nf + k], im.value()[r * nf + k]};
        };
        std::int64_t r = 0;
        for (; r + 1 < rows; r += 2) {
            fill(r, half_a);
            fill(r + 1, half_b);
            fft::irfft_pair_into(half_a, half_b, n, out.raw_value().data() + r * n,
                                 out.raw_value().data() + (r + 1) * n, scratch.data());
        }
        if (r < rows) {
            fill(r, half_a);
            fft::irfft_into(half_a, n, out.raw_value().data() + r * n, scratch.data());
        }
    }
    if (rg) {
        auto ren = re.node(), imn = im.node(), on = out.node();
        Tape::active()->record(
            {{on}, [ren, imn, on, rows, n, nf] {
                 if (ren->requires_grad) ren->ensure_grad();
                 if (imn->requires_grad) imn->ensure_grad();
                 thread_local std::vector<std::complex<double>> Ga, Gb, scratch;
                 Ga.resize(static_cast<std::size_t>(nf));
                 Gb.resize(static_cast<std::size_t>(nf));
                 scratch.resize(static_cast<std::size_t>(n));
                 auto scatter = [&](std::int64_t r, const std::vector<std::complex<double>>& G) {
                     for (std::int64_t k = 0; k < nf; ++k) {
                         const double ck = (k == 0 || k == n / 2) ? 1.0 : 2.0;
                         if (ren->requires_grad)
                             ren->grad[r * nf + k] += ck / static_cast<double>(n) * G[static_cast<std::size_t>(k)].real();
                         if (imn->requires_grad)
                             imn->grad[r * nf + k] += ck / static_cast<double>(n) * G[static_cast<std::size_t>(k)].imag();
                     }
                 };
                 std::int64_t r = 0;
                 for (; r + 1 < rows; r += 2) {
                     fft::rfft_pair_into(std::span<const double>(on->grad.data() + r * n,
                                                                 static_cast<std::size_t>(n)),
                                         std::span<const double>(on->grad.data() + (r + 1) * n,
                                                                 static_cast<std::size_t>(n)),
                                         Ga.data(), Gb.data(), scratch.data());
                     scatter(r, Ga);
                     scatter(r + 1, Gb);
                 }
                 if (r < rows) {
                     fft::rfft_into(std::span<const double>(on->grad.data() + r * n,
                                                            static_cast<std::size_t>(n)),
                                    Ga.data(), scratch.data());
                     scatter(r, Ga);
                 }
             }});
    }
    return out;
}

std::pair<Tensor, Tensor> mode_mix(const Tensor& xre, const Tensor& xim, const Tensor& wre,
                                   const Tensor& wim) {
    if (xre.rank() != 2 || xre.shape() != xim.shape())
        throw ShapeError("mode_mix: x spectra must be (cin, nf) with matching shapes");
    if (wre.rank() != 3 || wre.shape() != wim.shape())
        throw ShapeError("mode_mix: weights must be (modes, cout, cin)");
    const std::int64_t cin = xre.dim(0), nf = xre.dim(1);
    const std::int64_t modes = wre.dim(0), cout = wre.dim(1);
    if (wre.dim(2) != cin) throw ShapeError("mode_mix: channel mismatch");
    if (modes > nf)
        throw ConfigError("mode_mix: modes " + std::to_string(modes) + " exceed available bins " +
                          std::to_string(nf));
    const bool rg = recording({&xre, &xim, &wre, &wim});
    Tensor yre = make_out({cout, nf}, rg);
    Tensor yim = make_out({cout, nf}, rg);
    {
        const double* pxr = xre.value().data();
        const double* pxi = xim.value().data();
        const double* pwr = wre.value().data();
        const double* pwi = wim.value().data();
        double* pyr = yre.raw_value().data();
        double* pyi = yim.raw_value().data();
        for (std::int64_t m = 0; m < modes; ++m)
            for (std::int64_t co = 0; co < cout; ++co) {
                double ar = 0.0, ai = 0.0;
                for (std::int64_t ci = 0; ci < cin; ++ci) {
                    const double wr = pwr[(m * cout + co) * cin + ci];
                    const double wi = pwi[(m * cout + co) * cin + ci];
                    const double xr = pxr[ci * nf + m];
                    const double xi = pxi[ci * nf + m];
                    ar += wr * xr - wi * xi;
                    ai += wr * xi + wi * xr;
                }
                pyr[co * nf + m] = ar;
                pyi[co * nf + m] = ai;
            }
    }
    if (rg) {
        auto xrn = xre.node(), xin = xim.node(), wrn = wre.node(), win = wim.node();
        auto yrn = yre.node(), yin = yim.node();
        Tape::active()->record(
            {{yrn, yin}, [xrn, xin, wrn, win, yrn, yin, cin, cout, nf, modes] {
                 const bool xrg = xrn->requires_grad, xig = xin->requires_grad;
                 const bool wrg = wrn->requires_grad, wig = win->requires_grad;
                 if (xrg) xrn->ensure_grad();
                 if (xig) xin->ensure_grad();
                 if (wrg) wrn->ensure_grad();
                 if (wig) win->ensure_grad();
                 const bool has_re = !yrn->grad.empty();
                 const bool has_im = !yin->grad.empty();
                 for (std::int64_t m = 0; m < modes; ++m)
                     for (std::int64_t co = 0; co < cout; ++co) {
                         const double gr = has_re ? yrn->grad[co * nf + m] : 0.0;
                         const double gi = has_im ? yin->grad[co * nf + m] : 0.0;
                         if (gr == 0.0 && gi == 0.0) continue;
                         for (std::int64_t ci = 0; ci < cin; ++ci) {
                             const std::int64_t wi_idx = (m * cout + co) * cin + ci;
                             const double wr = wrn->value[wi_idx];
                             const double wi = win->value[wi_idx];
                             const double xr = xrn->value[ci * nf + m];
                             const double xi = xin->value[ci * nf + m];
                             if (xrg) xrn->grad[ci * nf + m] += wr * gr + wi * gi;
                             if (xig) xin->grad[ci * nf + m] += -wi * gr + wr * gi;
                             if (wrg) wrn->grad[wi_idx] += gr * xr + gi * xi;
                             if (wig) win->grad[wi_idx] += -gr * xi + gi * xr;
                         }
                     }
             }});
    }
    return {yre, yim};
}

Tensor spectral_conv(const Tensor& x, const Tensor& wre, const Tensor& wim) {
    if (x.rank() != 2) throw ShapeError("spectral_conv: x must be (cin, n)");
    const std::int64_t n = x.dim(1);
    const std::int64_t modes = wre.dim(0);
    if (modes > n / 2 + 1)
        throw ConfigError("spectral_conv: modes " + std::to_string(modes) + " exceed n/2+1 = " +
                          std::to_string(n / 2 + 1));
    auto [xr, xi] = rfft(x);
    auto [yr, yi] = mode_mix(xr, xi, wre, wim);
    return irfft(yr, yi, n);
}

// --- 2D ---

std::pair<Tensor, Tensor> rfft2(const Tensor& x) {
    if (x.rank() < 2) throw ShapeError("rfft2: need at least 2 dims");
    const std::int64_t nx = x.dim(x.rank() - 1);
    const std::int64_t ny = x.dim(x.rank() - 2);
    if (!fft::is_pow2(nx) || !fft::is_pow2(ny))
        throw ConfigError("rfft2: extents must be powers of two");
    const std::int64_t nfx = nx / 2 + 1;
    const std::int64_t planes = x.numel() / (ny * nx);
    const bool rg = recording({&x});
    Shape out_shape = x.shape();
    out_shape.back() = nfx;
    Tensor re = make_out(out_shape, rg);
    Tensor im = make_out(out_shape, rg);
    std::vector<std::complex<double>> col(static_cast<std::size_t>(ny));
    for (std::int64_t p = 0; p < planes; ++p) {
        std::vector<std::complex<double>> plane(static_cast<std::size_t>(ny * nfx));
        for (std::int64_t iy = 0; iy < ny; ++iy) {
            auto spec = fft::rfft(x.value().subspan(static_cast<std::size_t>((p * ny + iy) * nx),
                                                    static_cast<std::size_t>(nx)));
            for (std::int64_t kx = 0; kx < nfx; ++kx) plane[static_cast<std::size_t>(iy * nfx + kx)] = spec[static_cast<std::size_t>(kx)];
        }
        for (std::int64_t kx = 0; kx < nfx; ++kx) {
            for (std::int64_t iy = 0; iy < ny; ++iy) col[static_cast<std::size_t>(iy)] = plane[static_cast<std::size_t>(iy * nfx + kx)];
            fft::transform(col.data(), ny, false);
            for (std::int64_t ky = 0; ky < ny; ++ky) {
                re.raw_value()[(p * ny + ky) * nfx + kx] = col[static_cast<std::size_t>(ky)].real();
                im.raw_value()[(p * ny + ky) * nfx + kx] = col[static_cast<std::size_t>(ky)].imag();
            }
        }
    }
    if (rg) {
        auto xn = x.node(), ren = re.node(), imn = im.node();
        Tape::active()->record(
            {{ren, imn}, [xn, ren, imn, planes, ny, nx, nfx] {
                 xn->ensure_grad();
                 const bool has_re = !ren->grad.empty();
                 const bool has_im = !imn->grad.empty();
                 std::vector<std::complex<double>> col(static_cast<std::size_t>(ny));
                 std::vector<std::complex<double>> rowbuf(static_cast<std::size_t>(nx));
                 for (std::int64_t p = 0; p < planes; ++p) {
                     std::vector<std::complex<double>> plane(static_cast<std::size_t>(ny * nfx));
                     // Adjoint of the column FFT: ny * inverse FFT per column.
                     for (std::int64_t kx = 0; kx < nfx; ++kx) {
                         for (std::int64_t ky = 0; ky < ny; ++ky)
                             col[static_cast<std::size_t>(ky)] = {
                                 has_re ? ren->grad[(p * ny + ky) * nfx + kx] : 0.0,
                                 has_im ? imn->grad[(p * ny + ky) * nfx + kx] : 0.0};
                         fft::transform(col.data(), ny, true);
                         for (std::int64_t iy = 0; iy < ny; ++iy)
                             plane[static_cast<std::size_t>(iy * nfx + kx)] =
                                 static_cast<double>(ny) * col[static_cast<std::size_t>(iy)];
                     }
                     // Adjoint of the row rfft per row.
                     for (std::int64_t iy = 0; iy < ny; ++iy) {
                         std::fill(rowbuf.begin(), rowbuf.end(), std::complex<double>{0.0, 0.0});
                         for (std::int64_t kx = 0; kx < nfx; ++kx)
                             rowbuf[static_cast<std::size_t>(kx)] = plane[static_cast<std::size_t>(iy * nfx + kx)];
                         fft::transform(rowbuf.data(), nx, true);
                         for (std::int64_t jx = 0; jx < nx; ++jx)
                             xn->grad[(p * ny + iy) * nx + jx] +=
                                 static_cast<double>(nx) * rowbuf[static_cast<std::size_t>(jx)].real();
                     }
                 }
             }});
    }
    return {re, im};
}

Tensor irfft2(const Tensor& re, const Tensor& im, std::int64_t nx) {
    if (re.rank() < 2 || re.shape() != im.shape()) throw ShapeError("irfft2: bad spectra");
    const std::int64_t nfx = re.dim(re.rank() - 1);
    const std::int64_t ny = re.dim(re.rank() - 2);
    if (!fft::is_pow2(nx) || nfx != nx / 2 + 1) throw ConfigError("irfft2: bad nx");
    const std::int64_t planes = re.numel() / (ny * nfx);
    const bool rg = recording({&re, &im});
    Shape out_shape = re.shape();
    out_shape.back() = nx;
    Tensor out = make_out(out_shape, rg);
    std::vector<std::complex<double>> col(static_cast<std::size_t>(ny));
    std::vector<std::complex<double>> half(static_cast<std::size_t>(nfx));
    for (std::int64_t p = 0; p < planes; ++p) {
        std::vector<std::complex<double>> plane(static_cast<std::size_t>(ny * nfx));
        for (std::int64_t kx = 0; kx < nfx; ++kx) {
            for (std::int64_t ky = 0; ky < ny; ++ky)
                col[static_cast<std::size_t>(ky)] = {re.value()[(p * ny + ky) * nfx + kx],
                                                     im.value()[(p * ny + ky) * nfx + kx]};
            fft::transform(col.data(), ny, true);
            for (std::int64_t iy = 0; iy < ny; ++iy) plane[static_cast<std::size_t>(iy * nfx + kx)] = col[static_cast<std::size_t>(iy)];
        }
        for (std::int64_t iy = 0; iy < ny; ++iy) {
            for (std::int64_t kx = 0; kx < nfx; ++kx) half[static_cast<std::size_t>(kx)] = plane[static_cast<std::size_t>(iy * nfx + kx)];
            auto row = fft::irfft(half, nx);
            std::memcpy(out.raw_value().data() + (p * ny + iy) * nx, row.data(),
                        static_cast<std::size_t>(nx) * sizeof(double));
        }
    }
    if (rg) {
        auto ren = re.node(), imn = im.node(), on = out.node();
        Tape::active()->record(
            {{on}, [ren, imn, on, planes, ny, nx, nfx] {
                 if (ren->requires_grad) ren->ensure_grad();
                 if (imn->requires_grad) imn->ensure_grad();
                 std::vector<std::complex<double>> col(static_cast<std::size_t>(ny));
                 for (std::int64_t p = 0; p < planes; ++p) {
                     std::vector<std::complex<double>> plane(static_cast<std::size_t>(ny * nfx));
                     // Adjoint of per-row irfft.
                     for (std::int64_t iy = 0; iy < ny; ++iy) {
                         auto G = fft::rfft(std::span<const double>(
                             on->grad.data() + (p * ny + iy) * nx, static_cast<std::size_t>(nx)));
                         for (std::int64_t kx = 0; kx < nfx; ++kx) {
                             const double ck = (kx == 0 || kx == nx / 2) ? 1.0 : 2.0;
                             plane[static_cast<std::size_t>(iy * nfx + kx)] =
                                 ck / static_cast<double>(nx) * G[static_cast<std::size_t>(kx)];
                         }
                     }
                     // Adjoint of per-column inverse FFT: (1/ny) * forward FFT.
                     for (std::int64_t kx = 0; kx < nfx; ++kx) {
                         for (std::int64_t iy = 0; iy < ny; ++iy) col[static_cast<std::size_t>(iy)] = plane[static_cast<std::size_t>(iy * nfx + kx)];
                         fft::transform(col.data(), ny, false);
                         for (std::int64_t ky = 0; ky < ny; ++ky) {
                             const auto v = col[static_cast<std::size_t>(ky)] / static_cast<double>(ny);
                             if (ren->requires_grad) ren->grad[(p * ny + ky) * nfx + kx] += v.real();
                             if (imn->requires_grad) imn->grad[(p * ny + ky) * nfx + kx] += v.imag();
                         }
                     }
                 }
             }});
    }
    return out;
}

std::pair<Tensor, Tensor> mode_mix2(const Tensor& xre, const Tensor& xim, const Tensor& wre,
                                    const Tensor& wim, std::int64_t my) {
    if (xre.rank() != 3 || xre.shape() != xim.shape())
        throw ShapeError("mode_mix2: x spectra must be (cin, ny, nfx)");
    if (wre.rank() != 4 || wre.shape() != wim.shape())
        throw ShapeError("mode_mix2: weights must be (2*my-1, mx, cout, cin)");
    const std::int64_t cin = xre.dim(0), ny = xre.dim(1), nfx = xre.dim(2);
    const std::int64_t my2 = wre.dim(0), mx = wre.dim(1), cout = wre.dim(2);
    if (wre.dim(3) != cin) throw ShapeError("mode_mix2: channel mismatch");
    if (my < 1 || my2 != 2 * my - 1) throw ConfigError("mode_mix2: weight rows must equal 2*my-1");
    if (2 * my - 1 > ny || mx > nfx) throw ConfigError("mode_mix2: modes exceed available bins");
    const bool rg = recording({&xre, &xim, &wre, &wim});
    Tensor yre = make_out({cout, ny, nfx}, rg);
    Tensor yim = make_out({cout, ny, nfx}, rg);
    auto ky_of = [&](std::int64_t r) { return r < my ? r : ny - (my2 - r); };
    {
        double* pyr = yre.raw_value().data();
        double* pyi = yim.raw_value().data();
        const double* pxr = xre.value().data();
        const double* pxi = xim.value().data();
        const double* pwr = wre.value().data();
        const double* pwi = wim.value().data();
        for (std::int64_t r = 0; r < my2; ++r) {
            const std::int64_t ky = ky_of(r);
            for (std::int64_t kx = 0; kx < mx; ++kx)
                for (std::int64_t co = 0; co < cout; ++co) {
                    double ar = 0.0, ai = 0.0;
                    for (std::int64_t ci = 0; ci < cin; ++ci) {
                        const std::int64_t widx = ((r * mx + kx) * cout + co) * cin + ci;
                        const double wr = pwr[widx], wi = pwi[widx];
                        const double xr = pxr[(ci * ny + ky) * nfx + kx];
                        const double xi = pxi[(ci * ny + ky) * nfx + kx];
                        ar += wr * xr - wi * xi;
                        ai += wr * xi + wi * xr;
                    }
                    pyr[(co * ny + ky) * nfx + kx] = ar;
                    pyi[(co * ny + ky) * nfx + kx] = ai;
                }
        }
    }
    if (rg) {
        auto xrn = xre.node(), xin = xim.node(), wrn = wre.node(), win = wim.node();
        auto yrn = yre.node(), yin = yim.node();
        Tape::active()->record(
            {{yrn, yin}, [xrn, xin, wrn, win, yrn, yin, cin, cout, ny, nfx, my, my2, mx] {
                 auto ky_of = [&](std::int64_t r) { return r < my ? r : ny - (my2 - r); };
                 const bool xrg = xrn->requires_grad, xig = xin->requires_grad;
                 const bool wrg = wrn->requires_grad, wig = win->requires_grad;
                 if (xrg) xrn->ensure_grad();
                 if (xig) xin->ensure_grad();
                 if (wrg) wrn->ensure_grad();
                 if (wig) win->ensure_grad();
                 const bool has_re = !yrn->grad.empty();
                 const bool has_im = !yin->grad.empty();
                 for (std::int64_t r = 0; r < my2; ++r) {
                     const std::int64_t ky = ky_of(r);
                     for (std::int64_t kx = 0; kx < mx; ++kx)
                         for (std::int64_t co = 0; co < cout; ++co) {
                             const double gr = has_re ? yrn->grad[(co * ny + ky) * nfx + kx] : 0.0;
                             const double gi = has_im ? yin->grad[(co * ny + ky) * nfx + kx] : 0.0;
                             if (gr == 0.0 && gi == 0.0) continue;
                             for (std::int64_t ci = 0; ci < cin; ++ci) {
                                 const std::int64_t widx = ((r * mx + kx) * cout + co) * cin + ci;
                                 const double wr = wrn->value[widx], wi = win->value[widx];
                                 const double xr = xrn->value[(ci * ny + ky) * nfx + kx];
                                 const double xi = xin->value[(ci * ny + ky) * nfx + kx];
                                 if (xrg) xrn->grad[(ci * ny + ky) * nfx + kx] += wr * gr + wi * gi;
                                 if (xig) xin->grad[(ci * ny + ky) * nfx + kx] += -wi * gr + wr * gi;
                                 if (wrg) wrn->grad[widx] += gr * xr + gi * xi;
                                 if (wig) win->grad[widx] += -gr * xi + gi * xr;
                             }
                         }
                 }
             }});
    }
    return {yre, yim};
}

Tensor spectral_conv2(const Tensor& x, const Tensor& wre, const Tensor& wim, std::int64_t my) {
    if (x.rank() != 3) throw ShapeError("spectral_conv2: x must be (cin, ny, nx)");
    const std::int64_t nx = x.dim(2);
    auto [xr, xi] = rfft2(x);
    auto [yr, yi] = mode_mix2(xr, xi, wre, wim, my);
    return irfft2(yr, yi, nx);
}

}  // namespace capepde
