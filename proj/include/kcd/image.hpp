#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "kcd/error.hpp"

namespace kcd {

using Complex = std::complex<double>;

/// Complex-valued 2D array in image space, row-major.
struct ComplexImage {
    int height = 0;
    int width = 0;
    std::vector<Complex> data;

    ComplexImage() = default;
    ComplexImage(int h, int w) : height(h), width(w), data(std::size_t(h) * std::size_t(w)) {}

    Complex& at(int y, int x) { return data[std::size_t(y) * width + x]; }
    const Complex& at(int y, int x) const { return data[std::size_t(y) * width + x]; }
    std::size_t size() const { return data.size(); }
};

/// Complex-valued 2D array of frequency coefficients. DC-centered layout: the
/// zero-frequency coefficient lives at (height/2, width/2).
struct KSpaceGrid {
    int height = 0;
    int width = 0;
    std::vector<Complex> data;

    KSpaceGrid() = default;
    KSpaceGrid(int h, int w) : height(h), width(w), data(std::size_t(h) * std::size_t(w)) {}

    Complex& at(int y, int x) { return data[std::size_t(y) * width + x]; }
    const Complex& at(int y, int x) const { return data[std::size_t(y) * width + x]; }
    std::size_t size() const { return data.size(); }
};

/// Real-valued 2D array (magnitude images, targets, uncertainty maps).
struct RealImage {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    RealImage() = default;
    RealImage(int h, int w) : height(h), width(w), data(std::size_t(h) * std::size_t(w), 0.0) {}

    double& at(int y, int x) { return data[std::size_t(y) * width + x]; }
    const double& at(int y, int x) const { return data[std::size_t(y) * width + x]; }
    std::size_t size() const { return data.size(); }
};

template <typename Grid>
bool all_finite(const Grid& g) {
    for (const auto& v : g.data)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
}

inline bool all_finite(const RealImage& g) {
    for (double v : g.data)
        if (!std::isfinite(v)) return false;
    return true;
}

template <typename Grid>
void require_finite(const Grid& g, const std::string& what) {
    if (!all_finite(g)) throw ValidationError(what + ": non-finite values");
}

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const std::string& what) {
    if (a.height != b.height || a.width != b.width)
        throw ValidationError(what + ": shape mismatch (" + std::to_string(a.height) + "x" +
                              std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                              std::to_string(b.width) + ")");
}

/// Elementwise complex modulus.
RealImage magnitude(const ComplexImage& x);

double norm_l2(const ComplexImage& x);
double norm_l2(const KSpaceGrid& k);
double norm_linf(const ComplexImage& x);
double max_abs(const RealImage& x);

/// a*x + b*y, same shape required.
ComplexImage linear_combine(Complex a, const ComplexImage& x, Complex b, const ComplexImage& y);

} // namespace kcd
