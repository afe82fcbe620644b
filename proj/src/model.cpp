#include "kcd/model.hpp"

#include <cmath>

#include "kcd/error.hpp"

namespace kcd {

void check_apply_args(const ComplexImage& x_t, int t, int total_steps) {
    if (total_steps < 1) throw ValidationError("apply: total_steps must be >= 1");
    if (t < 0 || t > total_steps) throw ValidationError("apply: t outside [0, total_steps]");
    require_finite(x_t, "apply input");
}

OracleRestorer::OracleRestorer(ComplexImage clean) : clean_(std::move(clean)) {
    require_finite(clean_, "oracle image");
}

ComplexImage OracleRestorer::apply(const ComplexImage& x_t, int t, int total_steps) const {
    check_apply_args(x_t, t, total_steps);
    require_same_shape(x_t, clean_, "oracle apply");
    return clean_;
}

ConstantRestorer::ConstantRestorer(ComplexImage value) : value_(std::move(value)) {
    require_finite(value_, "constant image");
}

ComplexImage ConstantRestorer::apply(const ComplexImage& x_t, int t, int total_steps) const {
    check_apply_args(x_t, t, total_steps);
    require_same_shape(x_t, value_, "constant apply");
    return value_;
}

std::vector<double> time_embed(int t, int total_steps, int dim) {
    if (dim < 2 || dim % 2 != 0) throw ValidationError("time_embed: dim must be even and >= 2");
    if (total_steps < 1) throw ValidationError("time_embed: total_steps must be >= 1");
    if (t < 0 || t > total_steps) throw ValidationError("time_embed: t outside [0, total_steps]");
    const int half = dim / 2;
    const double u = double(t) / double(total_steps);
    std::vector<double> e(static_cast<std::size_t>(dim));
    for (int i = 0; i < half; ++i) {
        const double omega =
            half > 1 ? std::pow(1000.0, double(i) / double(half - 1)) : 1.0;
        e[std::size_t(i)] = std::sin(omega * u);
        e[std::size_t(half + i)] = std::cos(omega * u);
    }
    return e;
}

} // namespace kcd
