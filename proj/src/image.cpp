#include "kcd/image.hpp"

#include <algorithm>

namespace kcd {

RealImage magnitude(const ComplexImage& x) {
    require_finite(x, "magnitude");
    RealImage out(x.height, x.width);
    for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = std::abs(x.data[i]);
    return out;
}

double norm_l2(const ComplexImage& x) {
    double s = 0.0;
    for (const auto& v : x.data) s += std::norm(v);
    return std::sqrt(s);
}

double norm_l2(const KSpaceGrid& k) {
    double s = 0.0;
    for (const auto& v : k.data) s += std::norm(v);
    return std::sqrt(s);
}

double norm_linf(const ComplexImage& x) {
    double m = 0.0;
    for (const auto& v : x.data) m = std::max(m, std::abs(v));
    return m;
}

double max_abs(const RealImage& x) {
    double m = 0.0;
    for (double v : x.data) m = std::max(m, std::abs(v));
    return m;
}

ComplexImage linear_combine(Complex a, const ComplexImage& x, Complex b, const ComplexImage& y) {
    require_same_shape(x, y, "linear_combine");
    ComplexImage out(x.height, x.width);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a * x.data[i] + b * y.data[i];
    return out;
}

} // namespace kcd
