#include "kcd/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <cblas.h>

namespace kcd::nn {

namespace {

// Strip size for im2col: keep K * strip_pixels below ~2M scalars so the
// column buffer stays cache- and memory-friendly at large image sizes.
constexpr std::size_t kColBudget = std::size_t(1) << 21;

void gemm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m,
                n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m,
                n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

// Gathers rows [y0, y1) of the zero-padded 3x3 neighborhood expansion:
// col[(ci*9 + ky*3 + kx)][(y-y0)*w + x] = x[ci][y+ky-1][x+kx-1].
template <typename S>
void im2col3(const Tensor<S>& x, int y0, int y1, S* col) {
    const int w = x.w, h = x.h;
    const std::size_t strip = std::size_t(y1 - y0) * w;
    for (int ci = 0; ci < x.c; ++ci) {
        const S* src_plane = x.plane(ci);
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                S* row = col + (std::size_t(ci) * 9 + ky * 3 + kx) * strip;
                for (int y = y0; y < y1; ++y) {
                    S* dst = row + std::size_t(y - y0) * w;
                    const int yy = y + ky - 1;
                    if (yy < 0 || yy >= h) {
                        std::fill(dst, dst + w, S(0));
                        continue;
                    }
                    const S* src = src_plane + std::size_t(yy) * w;
                    if (kx == 1) {
                        std::memcpy(dst, src, sizeof(S) * w);
                    } else if (kx == 0) {
                        dst[0] = S(0);
                        std::memcpy(dst + 1, src, sizeof(S) * (w - 1));
                    } else {
                        std::memcpy(dst, src + 1, sizeof(S) * (w - 1));
                        dst[w - 1] = S(0);
                    }
                }
            }
        }
    }
}

// Scatter-add transpose of im2col3: gx[ci][y+ky-1][x+kx-1] += col[...].
template <typename S>
void col2im3(const S* col, int y0, int y1, Tensor<S>& gx) {
    const int w = gx.w, h = gx.h;
    const std::size_t strip = std::size_t(y1 - y0) * w;
    for (int ci = 0; ci < gx.c; ++ci) {
        S* dst_plane = gx.plane(ci);
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const S* row = col + (std::size_t(ci) * 9 + ky * 3 + kx) * strip;
                for (int y = y0; y < y1; ++y) {
                    const int yy = y + ky - 1;
                    if (yy < 0 || yy >= h) continue;
                    const S* src = row + std::size_t(y - y0) * w;
                    S* dst = dst_plane + std::size_t(yy) * w;
                    if (kx == 1) {
                        for (int i = 0; i < w; ++i) dst[i] += src[i];
                    } else if (kx == 0) {
                        for (int i = 1; i < w; ++i) dst[i - 1] += src[i];
                    } else {
                        for (int i = 0; i < w - 1; ++i) dst[i + 1] += src[i];
                    }
                }
            }
        }
    }
}

int strip_height(int k_rows, int h, int w) {
    const std::size_t per_row = std::size_t(k_rows) * w;
    std::size_t rows = per_row ? kColBudget / per_row : std::size_t(h);
    rows = std::clamp<std::size_t>(rows, 1, std::size_t(h));
    return int(rows);
}

} // namespace

template <typename S>
void conv_forward(const S* theta, const ConvDesc& d, const Tensor<S>& x, Tensor<S>& y,
                  ColBuffer<S>& buf) {
    if (x.c != d.in_c) throw ValidationError("conv_forward: channel mismatch");
    y.resize(d.out_c, x.h, x.w);
    const S* wgt = theta + d.w_off;
    const S* bias = theta + d.b_off;
    const std::size_t npix = x.plane_size();

    if (d.k == 1) {
        // 1x1 convolution is a plain channel-mixing GEMM over the raw planes.
        gemm(false, false, d.out_c, int(npix), d.in_c, S(1), wgt, d.in_c, x.v.data(), int(npix),
             S(0), y.v.data(), int(npix));
    } else {
        const int K = d.in_c * 9;
        const int sh = strip_height(K, x.h, x.w);
        buf.col.resize(std::size_t(K) * sh * x.w);
        for (int y0 = 0; y0 < x.h; y0 += sh) {
            const int y1 = std::min(x.h, y0 + sh);
            const int n = (y1 - y0) * x.w;
            im2col3(x, y0, y1, buf.col.data());
            gemm(false, false, d.out_c, n, K, S(1), wgt, K, buf.col.data(), n, S(0),
                 y.v.data() + std::size_t(y0) * x.w, int(npix));
        }
    }
    for (int oc = 0; oc < d.out_c; ++oc) {
        S* p = y.plane(oc);
        const S b = bias[oc];
        for (std::size_t i = 0; i < npix; ++i) p[i] += b;
    }
}

template <typename S>
void conv_backward(const S* theta, const ConvDesc& d, const Tensor<S>& x, const Tensor<S>& gy,
                   Tensor<S>& gx, S* grad, ColBuffer<S>& buf) {
    if (x.c != d.in_c || gy.c != d.out_c) throw ValidationError("conv_backward: channel mismatch");
    gx.resize(d.in_c, x.h, x.w);
    const S* wgt = theta + d.w_off;
    S* gw = grad + d.w_off;
    S* gb = grad + d.b_off;
    const std::size_t npix = x.plane_size();

    for (int oc = 0; oc < d.out_c; ++oc) {
        const S* p = gy.plane(oc);
        S acc = S(0);
        for (std::size_t i = 0; i < npix; ++i) acc += p[i];
        gb[oc] += acc;
    }

    if (d.k == 1) {
        // gw += gy * x^T ; gx = w^T * gy
        gemm(false, true, d.out_c, d.in_c, int(npix), S(1), gy.v.data(), int(npix), x.v.data(),
             int(npix), S(1), gw, d.in_c);
        gemm(true, false, d.in_c, int(npix), d.out_c, S(1), wgt, d.in_c, gy.v.data(), int(npix),
             S(0), gx.v.data(), int(npix));
        return;
    }

    const int K = d.in_c * 9;
    const int sh = strip_height(K, x.h, x.w);
    buf.col.resize(std::size_t(K) * sh * x.w);
    buf.dcol.resize(std::size_t(K) * sh * x.w);
    gx.zero();
    for (int y0 = 0; y0 < x.h; y0 += sh) {
        const int y1 = std::min(x.h, y0 + sh);
        const int n = (y1 - y0) * x.w;
        im2col3(x, y0, y1, buf.col.data());
        // gw[out_c x K] += gy_strip[out_c x n] * col[K x n]^T
        gemm(false, true, d.out_c, K, n, S(1), gy.v.data() + std::size_t(y0) * x.w, int(npix),
             buf.col.data(), n, S(1), gw, K);
        // dcol[K x n] = w[out_c x K]^T * gy_strip
        gemm(true, false, K, n, d.out_c, S(1), wgt, K, gy.v.data() + std::size_t(y0) * x.w,
             int(npix), S(0), buf.dcol.data(), n);
        col2im3(buf.dcol.data(), y0, y1, gx);
    }
}

template <typename S>
void linear_forward(const S* theta, const LinearDesc& d, const S* in, S* out) {
    const S* wgt = theta + d.w_off;
    const S* bias = theta + d.b_off;
    for (int o = 0; o < d.out_n; ++o) {
        S acc = bias[o];
        const S* row = wgt + std::size_t(o) * d.in_n;
        for (int i = 0; i < d.in_n; ++i) acc += row[i] * in[i];
        out[o] = acc;
    }
}

template <typename S>
void linear_backward(const LinearDesc& d, const S* in, const S* gout, S* grad) {
    S* gw = grad + d.w_off;
    S* gb = grad + d.b_off;
    for (int o = 0; o < d.out_n; ++o) {
        gb[o] += gout[o];
        S* row = gw + std::size_t(o) * d.in_n;
        const S g = gout[o];
        for (int i = 0; i < d.in_n; ++i) row[i] += g * in[i];
    }
}

template <typename S>
void silu_forward(const Tensor<S>& x, Tensor<S>& y) {
    y.resize(x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const S z = x.v[i];
        const S s = S(1) / (S(1) + std::exp(-z));
        y.v[i] = z * s;
    }
}

template <typename S>
void silu_backward(const Tensor<S>& x, const Tensor<S>& gy, Tensor<S>& gx) {
    gx.resize(x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const S z = x.v[i];
        const S s = S(1) / (S(1) + std::exp(-z));
        gx.v[i] = gy.v[i] * s * (S(1) + z * (S(1) - s));
    }
}

template <typename S>
void avgpool2_forward(const Tensor<S>& x, Tensor<S>& y) {
    if (x.h % 2 || x.w % 2) throw ValidationError("avgpool2: odd input extent");
    y.resize(x.c, x.h / 2, x.w / 2);
    for (int ci = 0; ci < x.c; ++ci) {
        const S* src = x.plane(ci);
        S* dst = y.plane(ci);
        for (int j = 0; j < y.h; ++j) {
            const S* r0 = src + std::size_t(2 * j) * x.w;
            const S* r1 = r0 + x.w;
            for (int i = 0; i < y.w; ++i)
                dst[std::size_t(j) * y.w + i] =
                    (r0[2 * i] + r0[2 * i + 1] + r1[2 * i] + r1[2 * i + 1]) * S(0.25);
        }
    }
}

template <typename S>
void avgpool2_backward(const Tensor<S>& gy, Tensor<S>& gx) {
    gx.resize(gy.c, gy.h * 2, gy.w * 2);
    for (int ci = 0; ci < gy.c; ++ci) {
        const S* src = gy.plane(ci);
        S* dst = gx.plane(ci);
        for (int j = 0; j < gy.h; ++j) {
            S* r0 = dst + std::size_t(2 * j) * gx.w;
            S* r1 = r0 + gx.w;
            for (int i = 0; i < gy.w; ++i) {
                const S g = src[std::size_t(j) * gy.w + i] * S(0.25);
                r0[2 * i] = g;
                r0[2 * i + 1] = g;
                r1[2 * i] = g;
                r1[2 * i + 1] = g;
            }
        }
    }
}

template <typename S>
void upsample2_forward(const Tensor<S>& x, Tensor<S>& y) {
    y.resize(x.c, x.h * 2, x.w * 2);
    for (int ci = 0; ci < x.c; ++ci) {
        const S* src = x.plane(ci);
        S* dst = y.plane(ci);
        for (int j = 0; j < x.h; ++j) {
            S* r0 = dst + std::size_t(2 * j) * y.w;
            S* r1 = r0 + y.w;
            for (int i = 0; i < x.w; ++i) {
                const S v = src[std::size_t(j) * x.w + i];
                r0[2 * i] = v;
                r0[2 * i + 1] = v;
                r1[2 * i] = v;
                r1[2 * i + 1] = v;
            }
        }
    }
}

template <typename S>
void upsample2_backward(const Tensor<S>& gy, Tensor<S>& gx) {
    if (gy.h % 2 || gy.w % 2) throw ValidationError("upsample2_backward: odd extent");
    gx.resize(gy.c, gy.h / 2, gy.w / 2);
    for (int ci = 0; ci < gy.c; ++ci) {
        const S* src = gy.plane(ci);
        S* dst = gx.plane(ci);
        for (int j = 0; j < gx.h; ++j) {
            const S* r0 = src + std::size_t(2 * j) * gy.w;
            const S* r1 = r0 + gy.w;
            for (int i = 0; i < gx.w; ++i)
                dst[std::size_t(j) * gx.w + i] =
                    r0[2 * i] + r0[2 * i + 1] + r1[2 * i] + r1[2 * i + 1];
        }
    }
}

template <typename S>
void concat_forward(const Tensor<S>& a, const Tensor<S>& b, Tensor<S>& y) {
    if (a.h != b.h || a.w != b.w) throw ValidationError("concat: extent mismatch");
    y.resize(a.c + b.c, a.h, a.w);
    std::memcpy(y.v.data(), a.v.data(), sizeof(S) * a.size());
    std::memcpy(y.v.data() + a.size(), b.v.data(), sizeof(S) * b.size());
}

template <typename S>
void concat_backward(const Tensor<S>& gy, Tensor<S>& ga, Tensor<S>& gb) {
    std::memcpy(ga.v.data(), gy.v.data(), sizeof(S) * ga.size());
    std::memcpy(gb.v.data(), gy.v.data() + ga.size(), sizeof(S) * gb.size());
}

template <typename S>
void add_channel_shift(Tensor<S>& x, const S* value) {
    const std::size_t npix = x.plane_size();
    for (int ci = 0; ci < x.c; ++ci) {
        S* p = x.plane(ci);
        const S v = value[ci];
        for (std::size_t i = 0; i < npix; ++i) p[i] += v;
    }
}

template <typename S>
void channel_shift_backward(const Tensor<S>& gy, S* gshift) {
    const std::size_t npix = gy.plane_size();
    for (int ci = 0; ci < gy.c; ++ci) {
        const S* p = gy.plane(ci);
        S acc = S(0);
        for (std::size_t i = 0; i < npix; ++i) acc += p[i];
        gshift[ci] += acc;
    }
}

template <typename S>
Tensor<S> reflect_pad_to(const Tensor<S>& x, int target_h, int target_w) {
    if (target_h == x.h && target_w == x.w) return x;
    if (target_h < x.h || target_w < x.w) throw ValidationError("reflect_pad_to: target too small");
    if (target_h - x.h >= x.h || target_w - x.w >= x.w)
        throw ValidationError("reflect_pad_to: input too small for requested padding");
    Tensor<S> y(x.c, target_h, target_w);
    for (int ci = 0; ci < x.c; ++ci) {
        const S* src = x.plane(ci);
        S* dst = y.plane(ci);
        for (int j = 0; j < target_h; ++j) {
            const int sj = j < x.h ? j : 2 * x.h - 2 - j;
            for (int i = 0; i < target_w; ++i) {
                const int si = i < x.w ? i : 2 * x.w - 2 - i;
                dst[std::size_t(j) * target_w + i] = src[std::size_t(sj) * x.w + si];
            }
        }
    }
    return y;
}

void pin_blas_single_thread() { openblas_set_num_threads(1); }

#define KCD_NN_INSTANTIATE(S)                                                                      \
    template struct Tensor<S>;                                                                     \
    template void conv_forward<S>(const S*, const ConvDesc&, const Tensor<S>&, Tensor<S>&,         \
                                  ColBuffer<S>&);                                                  \
    template void conv_backward<S>(const S*, const ConvDesc&, const Tensor<S>&, const Tensor<S>&,  \
                                   Tensor<S>&, S*, ColBuffer<S>&);                                 \
    template void linear_forward<S>(const S*, const LinearDesc&, const S*, S*);                    \
    template void linear_backward<S>(const LinearDesc&, const S*, const S*, S*);                   \
    template void silu_forward<S>(const Tensor<S>&, Tensor<S>&);                                   \
    template void silu_backward<S>(const Tensor<S>&, const Tensor<S>&, Tensor<S>&);                \
    template void avgpool2_forward<S>(const Tensor<S>&, Tensor<S>&);                               \
    template void avgpool2_backward<S>(const Tensor<S>&, Tensor<S>&);                              \
    template void upsample2_forward<S>(const Tensor<S>&, Tensor<S>&);                              \
    template void upsample2_backward<S>(const Tensor<S>&, Tensor<S>&);                             \
    template void concat_forward<S>(const Tensor<S>&, const Tensor<S>&, Tensor<S>&);               \
    template void concat_backward<S>(const Tensor<S>&, Tensor<S>&, Tensor<S>&);                    \
    template void add_channel_shift<S>(Tensor<S>&, const S*);                                      \
    template void channel_shift_backward<S>(const Tensor<S>&, S*);                                 \
    template Tensor<S> reflect_pad_to<S>(const Tensor<S>&, int, int);

KCD_NN_INSTANTIATE(float)
KCD_NN_INSTANTIATE(double)

#undef KCD_NN_INSTANTIATE

} // namespace kcd::nn
