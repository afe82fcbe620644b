#pragma once

#include "kcd/image.hpp"

namespace kcd {

/// Centered orthonormal 2D Fourier transform:
///   F(x) = fftshift(fft2(ifftshift(x))) / sqrt(H*W)
/// The DC coefficient of the result sits at (H/2, W/2) and energy is
/// preserved (Parseval): ||F(x)||_2 == ||x||_2.
KSpaceGrid forward_transform(const ComplexImage& x);

/// Exact inverse of forward_transform (up to floating-point round-off):
///   F^-1(k) = fftshift(ifft2(ifftshift(k))) * sqrt(H*W)
ComplexImage inverse_transform(const KSpaceGrid& k);

} // namespace kcd
