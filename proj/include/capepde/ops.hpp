#pragma once

#include <span>
#include <utility>

#include "capepde/tensor.hpp"

namespace capepde {

// Elementwise. Binary ops accept equal shapes, or `b` of shape (a.dim(0))
// broadcast over the trailing spatial dimensions of `a` (channel broadcast).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor gelu(const Tensor& a);  // exact erf form
Tensor tanh(const Tensor& a);
Tensor sqrt(const Tensor& a);

// Reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Channel plumbing (dimension 0 is the channel dimension).
Tensor concat_channels(std::span<const Tensor> parts);
Tensor slice_channels(const Tensor& x, std::int64_t start, std::int64_t count);

// Dense layers. linear: w (out,in) @ x (in) + b (out). conv1x1 applies a
// per-site channel map, any number of trailing spatial dims; w (cout,cin),
// optional bias (cout) -- pass a default-constructed Tensor for none.
Tensor linear(const Tensor& w, const Tensor& b, const Tensor& x);
Tensor conv1x1(const Tensor& x, const Tensor& w, const Tensor& b);

// Spatial convolutions, periodic (circular) padding, odd kernels only.
// conv1d: x (cin,n), w (cout,cin,K), b (cout) optional.
// depthwise_conv: x (c,n) with k (c,K), or x (c,ny,nx) with k (c,Ky,Kx);
// optional per-channel bias (c).
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor depthwise_conv(const Tensor& x, const Tensor& k, const Tensor& b);

// Normalizes over all elements of x (no batch dimension in this engine);
// gamma/beta have the same shape as x.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Spectral ops over the last axis (1D) or last two axes (2D). Power-of-two
// extents only. rfft returns (real, imag) one-sided spectra.
std::pair<Tensor, Tensor> rfft(const Tensor& x);
Tensor irfft(const Tensor& re, const Tensor& im, std::int64_t n);

// Per-mode complex channel mixing: x spectra (cin,nf), w (modes,cout,cin)
// as separate real/imag tensors. Bins >= modes are zeroed.
std::pair<Tensor, Tensor> mode_mix(const Tensor& xre, const Tensor& xim, const Tensor& wre,
                                   const Tensor& wim);

// FNO-style spectral convolution: rfft -> truncate/mix -> irfft.
// 1D: x (cin,n), weights (modes,cout,cin).
Tensor spectral_conv(const Tensor& x, const Tensor& wre, const Tensor& wim);

// 2D counterparts: x (c,ny,nx); spectra (c,ny,nfx); weights
// (2*my-1, mx, cout, cin) covering ky in {-(my-1)..my-1}, kx in [0,mx).
std::pair<Tensor, Tensor> rfft2(const Tensor& x);
Tensor irfft2(const Tensor& re, const Tensor& im, std::int64_t nx);
std::pair<Tensor, Tensor> mode_mix2(const Tensor& xre, const Tensor& xim, const Tensor& wre,
                                    const Tensor& wim, std::int64_t my);
Tensor spectral_conv2(const Tensor& x, const Tensor& wre, const Tensor& wim, std::int64_t my);

}  // namespace capepde
