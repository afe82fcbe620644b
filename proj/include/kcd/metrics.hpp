#pragma once

#include "kcd/image.hpp"
#include "kcd/png_io.hpp"

namespace kcd {

/// Peak signal-to-noise ratio in dB: 10*log10(data_range^2 / MSE).
/// Identical images have MSE 0 and return +infinity.
double psnr(const RealImage& reference, const RealImage& test, double data_range);

/// Mean structural similarity over all fully-interior windows, using a
/// uniform window (default 7x7), k1 = 0.01, k2 = 0.03, and unbiased
/// (n-1-normalized) variance/covariance estimates.
double ssim(const RealImage& reference, const RealImage& test, double data_range, int window = 7);

/// Absolute error scaled by `magnification` and clipped to [0, data_range].
RealImage error_map(const RealImage& prediction, const RealImage& target, double data_range,
                    double magnification = 5.0);

/// Map values linearly from [lo, hi] to 8-bit gray (clipped).
Gray8 render_real(const RealImage& img, double lo, double hi);

} // namespace kcd
