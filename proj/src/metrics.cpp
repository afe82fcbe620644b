#include "kcd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "kcd/error.hpp"

namespace kcd {

namespace {

void check_pair(const RealImage& a, const RealImage& b, double data_range, const char* what) {
    require_same_shape(a, b, what);
    if (a.height <= 0 || a.width <= 0) throw ValidationError(std::string(what) + ": empty image");
    require_finite(a, what);
    require_finite(b, what);
    if (!(data_range > 0.0) || !std::isfinite(data_range))
        throw ValidationError(std::string(what) + ": data_range must be positive and finite");
}

// Summed-area table with a zero top row/left column: I[y][x] = sum of the
// rectangle [0, y) x [0, x).
std::vector<double> integral(const RealImage& a, const RealImage& b, int mode) {
    const int h = a.height, w = a.width;
    std::vector<double> ii(std::size_t(h + 1) * (w + 1), 0.0);
    for (int y = 0; y < h; ++y) {
        double row = 0.0;
        for (int x = 0; x < w; ++x) {
            const double va = a.data[std::size_t(y) * w + x];
            const double vb = b.data[std::size_t(y) * w + x];
            row += mode == 0 ? va : mode == 1 ? va * va : va * vb;
            ii[std::size_t(y + 1) * (w + 1) + (x + 1)] = ii[std::size_t(y) * (w + 1) + (x + 1)] + row;
        }
    }
    return ii;
}

double window_sum(const std::vector<double>& ii, int stride, int y, int x, int win) {
    return ii[std::size_t(y + win) * stride + (x + win)] - ii[std::size_t(y) * stride + (x + win)] -
           ii[std::size_t(y + win) * stride + x] + ii[std::size_t(y) * stride + x];
}

} // namespace

double psnr(const RealImage& reference, const RealImage& test, double data_range) {
    check_pair(reference, test, data_range, "psnr");
    double se = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double d = reference.data[i] - test.data[i];
        se += d * d;
    }
    const double mse = se / double(reference.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / mse);
}

double ssim(const RealImage& reference, const RealImage& test, double data_range, int window) {
    check_pair(reference, test, data_range, "ssim");
    if (window < 3 || window % 2 == 0) throw ValidationError("ssim: window must be odd and >= 3");
    if (window > reference.height || window > reference.width)
        throw ValidationError("ssim: window larger than image");

    const int h = reference.height, w = reference.width, stride = w + 1;
    const double np = double(window) * window;
    const double c1 = (0.01 * data_range) * (0.01 * data_range);
    const double c2 = (0.03 * data_range) * (0.03 * data_range);

    const std::vector<double> sx = integral(reference, reference, 0);
    const std::vector<double> sy = integral(test, test, 0);
    const std::vector<double> sxx = integral(reference, reference, 1);
    const std::vector<double> syy = integral(test, test, 1);
    const std::vector<double> sxy = integral(reference, test, 2);

    double acc = 0.0;
    std::size_t count = 0;
    for (int y = 0; y + window <= h; ++y) {
        for (int x = 0; x + window <= w; ++x) {
            const double ax = window_sum(sx, stride, y, x, window);
            const double ay = window_sum(sy, stride, y, x, window);
            const double axx = window_sum(sxx, stride, y, x, window);
            const double ayy = window_sum(syy, stride, y, x, window);
            const double axy = window_sum(sxy, stride, y, x, window);
            const double ux = ax / np, uy = ay / np;
            const double vx = (axx - ax * ax / np) / (np - 1.0);
            const double vy = (ayy - ay * ay / np) / (np - 1.0);
            const double vxy = (axy - ax * ay / np) / (np - 1.0);
            acc += ((2.0 * ux * uy + c1) * (2.0 * vxy + c2)) /
                   ((ux * ux + uy * uy + c1) * (vx + vy + c2));
            ++count;
        }
    }
    return acc / double(count);
}

RealImage error_map(const RealImage& prediction, const RealImage& target, double data_range,
                    double magnification) {
    check_pair(prediction, target, data_range, "error_map");
    if (!(magnification > 0.0)) throw ValidationError("error_map: magnification must be positive");
    RealImage out(prediction.height, prediction.width);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] =
            std::min(std::abs(prediction.data[i] - target.data[i]) * magnification, data_range);
    return out;
}

Gray8 render_real(const RealImage& img, double lo, double hi) {
    if (!(hi > lo)) throw ValidationError("render_real: need hi > lo");
    Gray8 g(img.height, img.width);
    const double scale = 255.0 / (hi - lo);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double v = std::clamp((img.data[i] - lo) * scale, 0.0, 255.0);
        g.pixels[i] = std::uint8_t(std::lround(v));
    }
    return g;
}

} // namespace kcd
