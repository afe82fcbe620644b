#include "kcd/degrade.hpp"

#include <algorithm>
#include <cmath>

namespace kcd {

KSpaceGrid apply_mask(const KSpaceGrid& k, const SamplingMask& mask) {
    require_same_shape(k, mask, "apply_mask");
    KSpaceGrid out(k.height, k.width);
    for (std::size_t i = 0; i < k.data.size(); ++i)
        out.data[i] = mask.bits[i] ? k.data[i] : Complex{0.0, 0.0};
    return out;
}

ComplexImage zero_filled(const KSpaceGrid& k, const SamplingMask& mask) {
    return inverse_transform(apply_mask(k, mask));
}

ComplexImage degrade(const ComplexImage& x0, int t, const MaskSchedule& schedule) {
    require_same_shape(x0, schedule.base, "degrade");
    const SamplingMask m_t = mask_at(schedule, t); // validates t
    return zero_filled(forward_transform(x0), m_t);
}

std::vector<ComplexImage> degradation_strip(const ComplexImage& x0, const MaskSchedule& schedule,
                                            const std::vector<int>& steps) {
    std::vector<ComplexImage> out;
    out.reserve(steps.size());
    const KSpaceGrid k = forward_transform(x0);
    for (int t : steps) out.push_back(zero_filled(k, mask_at(schedule, t)));
    return out;
}

Gray8 render_magnitude(const ComplexImage& x, double lo, double hi) {
    Gray8 img(x.height, x.width);
    const double span = hi > lo ? hi - lo : 1.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double v = (std::abs(x.data[i]) - lo) / span;
        img.pixels[i] = std::uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
    return img;
}

void export_strip_png(const std::vector<ComplexImage>& strip, const std::vector<int>& steps,
                      const std::string& prefix) {
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& x : strip)
        for (const auto& v : x.data) {
            const double a = std::abs(v);
            if (first) {
                lo = hi = a;
                first = false;
            }
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        }
    for (std::size_t i = 0; i < strip.size(); ++i)
        write_png(prefix + std::to_string(steps[i]) + ".png", render_magnitude(strip[i], lo, hi));
}

} // namespace kcd
