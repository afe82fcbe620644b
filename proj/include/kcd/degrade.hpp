#pragma once

#include <vector>

#include "kcd/fourier.hpp"
#include "kcd/image.hpp"
#include "kcd/mask.hpp"
#include "kcd/png_io.hpp"

namespace kcd {

/// Hadamard product of a k-space grid with a binary mask.
KSpaceGrid apply_mask(const KSpaceGrid& k, const SamplingMask& mask);

/// Inverse transform of the masked k-space: F^-1(M o k).
ComplexImage zero_filled(const KSpaceGrid& k, const SamplingMask& mask);

/// Cold-diffusion degradation operator: D(x0, t) = F^-1(M_t o F(x0)).
/// t = 0 reproduces x0 (all-ones mask, FFT round trip); t = T gives the
/// zero-filled reconstruction under the schedule's base mask.
ComplexImage degrade(const ComplexImage& x0, int t, const MaskSchedule& schedule);

/// Degraded images at selected steps, ordered as given, for visualization.
std::vector<ComplexImage> degradation_strip(const ComplexImage& x0, const MaskSchedule& schedule,
                                            const std::vector<int>& steps);

/// Render a complex image's magnitude to 8-bit using shared [lo, hi] bounds.
Gray8 render_magnitude(const ComplexImage& x, double lo, double hi);

/// Export a strip as PNGs named <prefix><t>.png, min-max normalized over the
/// whole strip so frames are comparable.
void export_strip_png(const std::vector<ComplexImage>& strip, const std::vector<int>& steps,
                      const std::string& prefix);

} // namespace kcd
