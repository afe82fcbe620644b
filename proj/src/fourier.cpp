#include "kcd/fourier.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <utility>

namespace kcd {
namespace {

// FFTW planning is not thread-safe; execution through the new-array interface
// is. Plans are cached per (H, W, sign) and created under a mutex with
// FFTW_ESTIMATE (deterministic plan choice, no measurement).
class PlanCache {
public:
    static fftw_plan get(int h, int w, int sign) {
        static PlanCache cache;
        std::lock_guard<std::mutex> lock(cache.mutex_);
        auto key = std::make_tuple(h, w, sign);
        auto it = cache.plans_.find(key);
        if (it != cache.plans_.end()) return it->second;
        fftw_complex* buf = fftw_alloc_complex(std::size_t(h) * std::size_t(w));
        fftw_plan plan = fftw_plan_dft_2d(h, w, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(buf);
        cache.plans_.emplace(key, plan);
        return plan;
    }

private:
    PlanCache() = default;
    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }
    std::mutex mutex_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

// Copy src into dst applying a circular shift of (sy, sx):
// dst[(y+sy)%H][(x+sx)%W] = src[y][x] * scale.
void shifted_copy(const Complex* src, Complex* dst, int h, int w, int sy, int sx, double scale) {
    for (int y = 0; y < h; ++y) {
        const int yy = (y + sy) % h;
        const Complex* s = src + std::size_t(y) * w;
        Complex* d = dst + std::size_t(yy) * w;
        for (int x = 0; x < w; ++x) d[(x + sx) % w] = s[x] * scale;
    }
}

void transform(const Complex* in, Complex* out, int h, int w, int sign, double scale) {
    std::vector<Complex> buf(std::size_t(h) * std::size_t(w));
    // ifftshift: origin moves from (h/2, w/2) to (0, 0)
    shifted_copy(in, buf.data(), h, w, (h + 1) / 2, (w + 1) / 2, 1.0);
    fftw_plan plan = PlanCache::get(h, w, sign);
    std::vector<Complex> buf2(buf.size());
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(buf.data()),
                     reinterpret_cast<fftw_complex*>(buf2.data()));
    // fftshift + normalization
    shifted_copy(buf2.data(), out, h, w, h / 2, w / 2, scale);
}

} // namespace

KSpaceGrid forward_transform(const ComplexImage& x) {
    require_finite(x, "forward_transform");
    if (x.height <= 0 || x.width <= 0) throw ValidationError("forward_transform: empty image");
    KSpaceGrid k(x.height, x.width);
    const double scale = 1.0 / std::sqrt(double(x.height) * double(x.width));
    transform(x.data.data(), k.data.data(), x.height, x.width, FFTW_FORWARD, scale);
    return k;
}

ComplexImage inverse_transform(const KSpaceGrid& k) {
    require_finite(k, "inverse_transform");
    if (k.height <= 0 || k.width <= 0) throw ValidationError("inverse_transform: empty grid");
    ComplexImage x(k.height, k.width);
    // FFTW's backward transform is unnormalized; 1/sqrt(HW) makes the pair orthonormal.
    const double scale = 1.0 / std::sqrt(double(k.height) * double(k.width));
    transform(k.data.data(), x.data.data(), k.height, k.width, FFTW_BACKWARD, scale);
    return x;
}

} // namespace kcd
