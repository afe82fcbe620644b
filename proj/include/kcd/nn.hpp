#pragma once

#include <cstddef>
#include <vector>

#include "kcd/error.hpp"

namespace kcd::nn {

/// Dense CHW tensor. Scalar type S is float (training speed) or double
/// (gradient verification); both instantiations share one code path.
template <typename S>
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<S> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(std::size_t(c_) * h_ * w_, S(0)) {}

    std::size_t plane_size() const { return std::size_t(h) * w; }
    std::size_t size() const { return v.size(); }
    S* plane(int ci) { return v.data() + std::size_t(ci) * plane_size(); }
    const S* plane(int ci) const { return v.data() + std::size_t(ci) * plane_size(); }
    void zero() { std::fill(v.begin(), v.end(), S(0)); }
    void resize(int c_, int h_, int w_) {
        c = c_;
        h = h_;
        w = w_;
        v.assign(std::size_t(c_) * h_ * w_, S(0));
    }
};

/// Convolution descriptor; weights live in an external flat parameter vector
/// at [w_off, w_off + out_c*in_c*k*k) and biases at [b_off, b_off + out_c).
/// k is 1 or 3; stride 1; zero padding keeps H, W unchanged.
struct ConvDesc {
    int in_c = 0, out_c = 0, k = 3;
    std::size_t w_off = 0, b_off = 0;

    std::size_t weight_count() const { return std::size_t(out_c) * in_c * k * k; }
    std::size_t param_count() const { return weight_count() + out_c; }
};

/// Linear map descriptor (time-embedding projection).
struct LinearDesc {
    int in_n = 0, out_n = 0;
    std::size_t w_off = 0, b_off = 0;

    std::size_t param_count() const { return std::size_t(out_n) * in_n + out_n; }
};

/// Reusable scratch for im2col strips.
template <typename S>
struct ColBuffer {
    std::vector<S> col;  // [K x strip*W]
    std::vector<S> dcol; // backward counterpart
};

template <typename S>
void conv_forward(const S* theta, const ConvDesc& d, const Tensor<S>& x, Tensor<S>& y,
                  ColBuffer<S>& buf);

/// Accumulates parameter gradients into `grad` (same layout as theta) and
/// writes the input gradient to gx (overwritten).
template <typename S>
void conv_backward(const S* theta, const ConvDesc& d, const Tensor<S>& x, const Tensor<S>& gy,
                   Tensor<S>& gx, S* grad, ColBuffer<S>& buf);

template <typename S>
void linear_forward(const S* theta, const LinearDesc& d, const S* in, S* out);

template <typename S>
void linear_backward(const LinearDesc& d, const S* in, const S* gout, S* grad);

/// y = silu(x) = x * sigmoid(x), elementwise.
template <typename S>
void silu_forward(const Tensor<S>& x, Tensor<S>& y);

/// gx = gy * silu'(x); x is the saved pre-activation.
template <typename S>
void silu_backward(const Tensor<S>& x, const Tensor<S>& gy, Tensor<S>& gx);

/// 2x2 average pooling (H, W must be even).
template <typename S>
void avgpool2_forward(const Tensor<S>& x, Tensor<S>& y);
template <typename S>
void avgpool2_backward(const Tensor<S>& gy, Tensor<S>& gx);

/// Nearest-neighbor 2x upsampling.
template <typename S>
void upsample2_forward(const Tensor<S>& x, Tensor<S>& y);
template <typename S>
void upsample2_backward(const Tensor<S>& gy, Tensor<S>& gx);

/// y = concat(a, b) along channels; backward splits.
template <typename S>
void concat_forward(const Tensor<S>& a, const Tensor<S>& b, Tensor<S>& y);
template <typename S>
void concat_backward(const Tensor<S>& gy, Tensor<S>& ga, Tensor<S>& gb);

/// Adds value[c] to every pixel of channel c.
template <typename S>
void add_channel_shift(Tensor<S>& x, const S* value);

/// gshift[c] = sum over pixels of gy channel c (accumulated into grad slice).
template <typename S>
void channel_shift_backward(const Tensor<S>& gy, S* gshift);

/// Mirror-pad (reflect without edge repeat) on the bottom/right to reach
/// (target_h, target_w). Requires pad < current extent along each axis.
template <typename S>
Tensor<S> reflect_pad_to(const Tensor<S>& x, int target_h, int target_w);

/// Pin the BLAS backend to one thread (deterministic reductions).
void pin_blas_single_thread();

} // namespace kcd::nn
