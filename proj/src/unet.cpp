#include "kcd/unet.hpp"

#include <algorithm>
#include <cmath>

#include "kcd/error.hpp"
#include "kcd/rng.hpp"

namespace kcd {

using nn::ConvDesc;
using nn::LinearDesc;
using nn::Tensor;

void validate(const UNetConfig& cfg) {
    if (cfg.depth < 1 || cfg.depth > 6) throw ValidationError("unet: depth must be in [1, 6]");
    if (cfg.base_channels < 1 || cfg.base_channels > 1024)
        throw ValidationError("unet: base_channels must be in [1, 1024]");
    if (cfg.time_dim < 2 || cfg.time_dim % 2 != 0)
        throw ValidationError("unet: time_dim must be even and >= 2");
    if (cfg.in_channels < 1 || cfg.out_channels < 1)
        throw ValidationError("unet: channel counts must be positive");
}

template <typename S>
UNet<S>::UNet(const UNetConfig& cfg) : cfg_(cfg) {
    validate(cfg);
    std::size_t off = 0;
    auto add = [&](const std::string& name, std::vector<int> shape, double init_std) {
        std::size_t n = 1;
        for (int d : shape) n *= std::size_t(d);
        blocks_.push_back({name, off, n, std::move(shape), init_std});
        const std::size_t at = off;
        off += n;
        return at;
    };
    auto add_conv = [&](const std::string& name, int in_c, int out_c, int k, double wstd) {
        ConvDesc d;
        d.in_c = in_c;
        d.out_c = out_c;
        d.k = k;
        d.w_off = add(name + ".weight", {out_c, in_c, k, k}, wstd);
        d.b_off = add(name + ".bias", {out_c}, 0.0);
        return d;
    };
    auto add_block = [&](const std::string& name, int in_c, int out_c) {
        detail::BlockDesc bd;
        bd.conv1 = add_conv(name + ".conv1", in_c, out_c, 3, std::sqrt(2.0 / (in_c * 9)));
        LinearDesc t;
        t.in_n = cfg_.time_dim;
        t.out_n = out_c;
        t.w_off = add(name + ".time.weight", {out_c, cfg_.time_dim}, 0.01);
        t.b_off = add(name + ".time.bias", {out_c}, 0.0);
        bd.time = t;
        bd.conv2 = add_conv(name + ".conv2", out_c, out_c, 3, std::sqrt(2.0 / (out_c * 9)));
        return bd;
    };

    const auto ch = [&](int lvl) { return cfg_.base_channels << lvl; };
    for (int lvl = 0; lvl <= cfg_.depth; ++lvl) {
        const int in_c = lvl == 0 ? cfg_.in_channels : ch(lvl - 1);
        enc_.push_back(add_block("enc" + std::to_string(lvl), in_c, ch(lvl)));
    }
    up_.resize(std::size_t(cfg_.depth));
    dec_.resize(std::size_t(cfg_.depth));
    for (int lvl = cfg_.depth - 1; lvl >= 0; --lvl) {
        up_[std::size_t(lvl)] = add_conv("up" + std::to_string(lvl), ch(lvl + 1), ch(lvl), 1,
                                         std::sqrt(2.0 / ch(lvl + 1)));
        dec_[std::size_t(lvl)] = add_block("dec" + std::to_string(lvl), 2 * ch(lvl), ch(lvl));
    }
    head_ = add_conv("head", ch(0), cfg_.out_channels, 1, 0.0);
    theta_.assign(off, S(0));
}

template <typename S>
void UNet<S>::init_params(std::uint64_t seed) {
    Rng rng(seed);
    for (const ParamBlock& b : blocks_) {
        S* p = theta_.data() + b.offset;
        if (b.init_std == 0.0) {
            std::fill(p, p + b.count, S(0));
        } else {
            for (std::size_t i = 0; i < b.count; ++i) p[i] = S(rng.normal() * b.init_std);
        }
    }
}

template <typename S>
void UNet<S>::block_forward(const detail::BlockDesc& bd, BlockTape<S>& tape,
                            Workspace<S>& ws) const {
    nn::conv_forward(theta_.data(), bd.conv1, tape.x, tape.pre1, ws.colbuf);
    tape.shift.resize(std::size_t(bd.time.out_n));
    nn::linear_forward(theta_.data(), bd.time, ws.emb.data(), tape.shift.data());
    nn::add_channel_shift(tape.pre1, tape.shift.data());
    nn::silu_forward(tape.pre1, tape.act1);
    nn::conv_forward(theta_.data(), bd.conv2, tape.act1, tape.pre2, ws.colbuf);
    nn::silu_forward(tape.pre2, tape.act2);
}

template <typename S>
const Tensor<S>& UNet<S>::forward(const Tensor<S>& x, const std::vector<double>& emb,
                                  Workspace<S>& ws) const {
    if (x.c != cfg_.in_channels) throw ValidationError("unet forward: wrong channel count");
    const int div = extent_divisor();
    if (x.h <= 0 || x.w <= 0 || x.h % div || x.w % div)
        throw ValidationError("unet forward: extents must be positive and divisible by 2^depth");
    if (int(emb.size()) != cfg_.time_dim)
        throw ValidationError("unet forward: embedding size mismatch");

    ws.emb.resize(emb.size());
    for (std::size_t i = 0; i < emb.size(); ++i) ws.emb[i] = S(emb[i]);
    ws.enc.resize(std::size_t(cfg_.depth) + 1);
    ws.dec.resize(std::size_t(cfg_.depth));
    ws.upsampled.resize(std::size_t(cfg_.depth));

    ws.enc[0].x = x;
    for (int lvl = 0; lvl <= cfg_.depth; ++lvl) {
        if (lvl > 0) nn::avgpool2_forward(ws.enc[std::size_t(lvl - 1)].act2, ws.enc[std::size_t(lvl)].x);
        block_forward(enc_[std::size_t(lvl)], ws.enc[std::size_t(lvl)], ws);
    }
    const Tensor<S>* cur = &ws.enc[std::size_t(cfg_.depth)].act2;
    for (int lvl = cfg_.depth - 1; lvl >= 0; --lvl) {
        nn::upsample2_forward(*cur, ws.upsampled[std::size_t(lvl)]);
        nn::conv_forward(theta_.data(), up_[std::size_t(lvl)], ws.upsampled[std::size_t(lvl)],
                         ws.reduced, ws.colbuf);
        nn::concat_forward(ws.reduced, ws.enc[std::size_t(lvl)].act2, ws.dec[std::size_t(lvl)].x);
        block_forward(dec_[std::size_t(lvl)], ws.dec[std::size_t(lvl)], ws);
        cur = &ws.dec[std::size_t(lvl)].act2;
    }
    nn::conv_forward(theta_.data(), head_, *cur, ws.head_out, ws.colbuf);
    return ws.head_out;
}

template <typename S>
void UNet<S>::block_backward(const detail::BlockDesc& bd, const BlockTape<S>& tape,
                             const Tensor<S>& g_out, Tensor<S>& g_in, S* grad,
                             Workspace<S>& ws) const {
    nn::silu_backward(tape.pre2, g_out, ws.t1);
    nn::conv_backward(theta_.data(), bd.conv2, tape.act1, ws.t1, ws.t2, grad, ws.colbuf);
    nn::silu_backward(tape.pre1, ws.t2, ws.t1);
    ws.gshift.assign(std::size_t(bd.time.out_n), S(0));
    nn::channel_shift_backward(ws.t1, ws.gshift.data());
    nn::linear_backward(bd.time, ws.emb.data(), ws.gshift.data(), grad);
    nn::conv_backward(theta_.data(), bd.conv1, tape.x, ws.t1, g_in, grad, ws.colbuf);
}

template <typename S>
Tensor<S> UNet<S>::backward(const Tensor<S>& g_out, Workspace<S>& ws, S* grad) const {
    ws.gskip.resize(std::size_t(cfg_.depth));

    // Head.
    Tensor<S> gcur;
    nn::conv_backward(theta_.data(), head_,
                      cfg_.depth > 0 ? ws.dec[0].act2 : ws.enc[0].act2, g_out, gcur, grad,
                      ws.colbuf);

    // Decoder, shallow to deep.
    for (int lvl = 0; lvl < cfg_.depth; ++lvl) {
        auto& dtape = ws.dec[std::size_t(lvl)];
        block_backward(dec_[std::size_t(lvl)], dtape, gcur, ws.gcat, grad, ws);
        const int half_c = ws.gcat.c / 2;
        Tensor<S>& gskip = ws.gskip[std::size_t(lvl)];
        ws.t1.resize(half_c, ws.gcat.h, ws.gcat.w);
        gskip.resize(half_c, ws.gcat.h, ws.gcat.w);
        nn::concat_backward(ws.gcat, ws.t1, gskip);
        nn::conv_backward(theta_.data(), up_[std::size_t(lvl)], ws.upsampled[std::size_t(lvl)],
                          ws.t1, ws.t2, grad, ws.colbuf);
        nn::upsample2_backward(ws.t2, gcur);
    }

    // Bottom encoder block.
    Tensor<S> gprev;
    block_backward(enc_[std::size_t(cfg_.depth)], ws.enc[std::size_t(cfg_.depth)], gcur, gprev,
                   grad, ws);

    // Remaining encoder levels, deep to shallow; each output fed both the
    // pooling path and a skip connection.
    for (int lvl = cfg_.depth - 1; lvl >= 0; --lvl) {
        nn::avgpool2_backward(gprev, gcur);
        const Tensor<S>& gskip = ws.gskip[std::size_t(lvl)];
        for (std::size_t i = 0; i < gcur.size(); ++i) gcur.v[i] += gskip.v[i];
        block_backward(enc_[std::size_t(lvl)], ws.enc[std::size_t(lvl)], gcur, gprev, grad, ws);
    }
    return gprev;
}

template <typename S>
nn::Tensor<S> complex_to_tensor(const ComplexImage& x, double scale) {
    nn::Tensor<S> t(2, x.height, x.width);
    S* re = t.plane(0);
    S* im = t.plane(1);
    const double inv = 1.0 / scale;
    for (std::size_t i = 0; i < x.size(); ++i) {
        re[i] = S(x.data[i].real() * inv);
        im[i] = S(x.data[i].imag() * inv);
    }
    return t;
}

template <typename S>
ComplexImage tensor_to_complex(const nn::Tensor<S>& t, double scale) {
    if (t.c != 2) throw ValidationError("tensor_to_complex: need 2 channels");
    ComplexImage x(t.h, t.w);
    const S* re = t.plane(0);
    const S* im = t.plane(1);
    for (std::size_t i = 0; i < x.size(); ++i)
        x.data[i] = Complex(double(re[i]) * scale, double(im[i]) * scale);
    return x;
}

double input_scale(const ComplexImage& x) {
    const double m = norm_linf(x);
    return m > 0.0 ? m : 1.0;
}

template <typename S>
ReferenceUNet<S>::ReferenceUNet(const UNetConfig& cfg, std::uint64_t init_seed) : net_(cfg) {
    net_.init_params(init_seed);
}

template <typename S>
ReferenceUNet<S>::ReferenceUNet(UNet<S> net) : net_(std::move(net)) {}

template <typename S>
std::string ReferenceUNet<S>::kind() const {
    return sizeof(S) == 4 ? "unet-float32" : "unet-float64";
}

template <typename S>
ComplexImage ReferenceUNet<S>::apply(const ComplexImage& x_t, int t, int total_steps) const {
    check_apply_args(x_t, t, total_steps);
    const double s = input_scale(x_t);
    nn::Tensor<S> xin = complex_to_tensor<S>(x_t, s);
    const int div = net_.extent_divisor();
    const int hp = (x_t.height + div - 1) / div * div;
    const int wp = (x_t.width + div - 1) / div * div;
    if (hp != x_t.height || wp != x_t.width) xin = nn::reflect_pad_to(xin, hp, wp);
    const std::vector<double> emb = time_embed(t, total_steps, net_.config().time_dim);
    Workspace<S> ws;
    const nn::Tensor<S>& y = net_.forward(xin, emb, ws);
    ComplexImage out(x_t.height, x_t.width);
    const S* re = y.plane(0);
    const S* im = y.plane(1);
    for (int j = 0; j < x_t.height; ++j)
        for (int i = 0; i < x_t.width; ++i)
            out.at(j, i) = Complex(double(re[std::size_t(j) * wp + i]) * s,
                                   double(im[std::size_t(j) * wp + i]) * s);
    return out;
}

template class UNet<float>;
template class UNet<double>;
template class ReferenceUNet<float>;
template class ReferenceUNet<double>;
template nn::Tensor<float> complex_to_tensor<float>(const ComplexImage&, double);
template nn::Tensor<double> complex_to_tensor<double>(const ComplexImage&, double);
template ComplexImage tensor_to_complex<float>(const nn::Tensor<float>&, double);
template ComplexImage tensor_to_complex<double>(const nn::Tensor<double>&, double);

} // namespace kcd
