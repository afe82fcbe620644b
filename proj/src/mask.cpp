#include "kcd/mask.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "kcd/png_io.hpp"
#include "kcd/rng.hpp"

namespace kcd {

const char* family_name(MaskFamily f) {
    switch (f) {
        case MaskFamily::CartesianRandom: return "cartesian-random";
        case MaskFamily::CartesianEquispaced: return "cartesian-equispaced";
        case MaskFamily::Gaussian1D: return "gaussian-1d";
        case MaskFamily::Gaussian2D: return "gaussian-2d";
    }
    return "?";
}

MaskFamily parse_family(const std::string& name) {
    if (name == "cartesian-random") return MaskFamily::CartesianRandom;
    if (name == "cartesian-equispaced") return MaskFamily::CartesianEquispaced;
    if (name == "gaussian-1d") return MaskFamily::Gaussian1D;
    if (name == "gaussian-2d") return MaskFamily::Gaussian2D;
    throw ValidationError("unknown mask family: " + name);
}

bool is_line_family(MaskFamily f) { return f != MaskFamily::Gaussian2D; }

std::size_t count_ones(const SamplingMask& m) {
    std::size_t n = 0;
    for (auto b : m.bits) n += b;
    return n;
}

std::size_t count_sampled_columns(const SamplingMask& m) {
    std::size_t n = 0;
    for (int x = 0; x < m.width; ++x) n += m.bits[x];
    return n;
}

namespace {

void fill_column(SamplingMask& m, int col) {
    for (int y = 0; y < m.height; ++y) m.bits[std::size_t(y) * m.width + col] = 1;
}

// Solve for sigma such that sum_i exp(-d_i^2 / (2 sigma^2)) == target.
// The sum is strictly increasing in sigma, so bisection applies.
double solve_sigma(const std::vector<double>& dist2, double target) {
    auto weight_sum = [&](double sigma) {
        const double inv = 1.0 / (2.0 * sigma * sigma);
        double s = 0.0;
        for (double d2 : dist2) s += std::exp(-d2 * inv);
        return s;
    };
    double lo = 1e-6, hi = 1.0;
    while (weight_sum(hi) < target) {
        hi *= 2.0;
        if (hi > 1e9) return hi; // target ~ all entries; weights ~ uniform
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (weight_sum(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Weighted sampling without replacement (Efraimidis-Spirakis): draw one
// uniform per candidate in index order, rank by log(u)/w descending, keep the
// first `count`. Deterministic per seed.
std::vector<std::uint32_t> weighted_sample(const std::vector<std::uint32_t>& candidates,
                                           const std::vector<double>& weights, std::size_t count,
                                           Rng& rng) {
    std::vector<std::pair<double, std::uint32_t>> keyed(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        double u = rng.uniform01();
        if (u <= 0.0) u = 0x1.0p-53;
        keyed[i] = {std::log(u) / weights[i], candidates[i]};
    }
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::uint32_t> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = keyed[i].second;
    return out;
}

} // namespace

SamplingMask make_mask(MaskFamily family, int height, int width, double acceleration,
                       double center_fraction, std::uint64_t seed) {
    if (height < 1 || width < 1) throw ValidationError("make_mask: empty shape");
    if (acceleration < 1.0) throw ValidationError("make_mask: acceleration must be >= 1");
    if (center_fraction < 0.0 || center_fraction > 1.0)
        throw ValidationError("make_mask: center_fraction must be in [0, 1]");

    SamplingMask m;
    m.height = height;
    m.width = width;
    m.bits.assign(std::size_t(height) * std::size_t(width), 0);
    m.family = family;
    m.acceleration = acceleration;
    m.center_fraction = center_fraction;
    m.seed = seed;

    Rng rng(seed);

    if (is_line_family(family)) {
        if (center_fraction * width < 1.0)
            throw ValidationError("make_mask: center_fraction*width must be >= 1 for line masks");
        const int n_center = int(std::lround(center_fraction * width));
        const int n_total = int(std::lround(width / acceleration));
        if (n_center > n_total)
            throw ValidationError("make_mask: center fraction alone exceeds 1/R");
        if (n_total < 1) throw ValidationError("make_mask: acceleration leaves no sampled column");

        const int pad = (width - n_center + 1) / 2;
        for (int c = pad; c < pad + n_center; ++c) fill_column(m, c);

        std::vector<std::uint32_t> comp;
        for (int c = 0; c < width; ++c)
            if (c < pad || c >= pad + n_center) comp.push_back(std::uint32_t(c));
        const std::size_t n_extra = std::size_t(n_total - n_center);

        if (n_extra == comp.size()) {
            for (auto c : comp) fill_column(m, int(c));
            return m;
        }

        switch (family) {
            case MaskFamily::CartesianRandom: {
                // partial Fisher-Yates, first n_extra entries are the draw
                for (std::size_t i = 0; i < n_extra; ++i) {
                    std::size_t j = i + std::size_t(rng.uniform_int(comp.size() - i));
                    std::swap(comp[i], comp[j]);
                }
                for (std::size_t i = 0; i < n_extra; ++i) fill_column(m, int(comp[i]));
                break;
            }
            case MaskFamily::CartesianEquispaced: {
                if (n_extra > 0) {
                    const double stride = double(comp.size()) / double(n_extra);
                    const double offset = rng.uniform01() * stride;
                    for (std::size_t j = 0; j < n_extra; ++j)
                        fill_column(m, int(comp[std::size_t(offset + stride * double(j))]));
                }
                break;
            }
            case MaskFamily::Gaussian1D: {
                const int dc = width / 2;
                std::vector<double> dist2(comp.size());
                for (std::size_t i = 0; i < comp.size(); ++i) {
                    const double d = double(int(comp[i]) - dc);
                    dist2[i] = d * d;
                }
                const double sigma = solve_sigma(dist2, double(n_extra));
                std::vector<double> w(comp.size());
                for (std::size_t i = 0; i < comp.size(); ++i)
                    w[i] = std::exp(-dist2[i] / (2.0 * sigma * sigma));
                for (auto c : weighted_sample(comp, w, n_extra, rng)) fill_column(m, int(c));
                break;
            }
            default: break;
        }
        return m;
    }

    // gaussian-2d: pixel granularity, fully sampled central square
    const int side = int(std::ceil(std::sqrt(center_fraction) * double(std::min(height, width))));
    const std::size_t total = std::size_t(height) * std::size_t(width);
    const std::size_t n_total = std::size_t(std::llround(double(total) / acceleration));
    if (std::size_t(side) * std::size_t(side) > n_total)
        throw ValidationError("make_mask: center fraction alone exceeds 1/R");

    const int py = (height - side + 1) / 2;
    const int px = (width - side + 1) / 2;
    for (int y = py; y < py + side; ++y)
        for (int x = px; x < px + side; ++x) m.bits[std::size_t(y) * width + x] = 1;

    std::vector<std::uint32_t> comp;
    comp.reserve(total - std::size_t(side) * side);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (!m.bits[std::size_t(y) * width + x]) comp.push_back(std::uint32_t(y * width + x));
    const std::size_t n_extra = n_total - std::size_t(side) * side;

    if (n_extra >= comp.size()) {
        for (auto i : comp) m.bits[i] = 1;
        return m;
    }
    const int cy = height / 2, cx = width / 2;
    std::vector<double> dist2(comp.size());
    for (std::size_t i = 0; i < comp.size(); ++i) {
        const double dy = double(int(comp[i]) / width - cy);
        const double dx = double(int(comp[i]) % width - cx);
        dist2[i] = dy * dy + dx * dx;
    }
    const double sigma = solve_sigma(dist2, double(n_extra));
    std::vector<double> w(comp.size());
    for (std::size_t i = 0; i < comp.size(); ++i)
        w[i] = std::exp(-dist2[i] / (2.0 * sigma * sigma));
    for (auto i : weighted_sample(comp, w, n_extra, rng)) m.bits[i] = 1;
    return m;
}

MaskSchedule make_schedule(const SamplingMask& mask, int total_steps, std::uint64_t seed,
                           bool independent_subsets) {
    if (total_steps < 1) throw ValidationError("make_schedule: total_steps must be >= 1");
    MaskSchedule s;
    s.base = mask;
    s.total_steps = total_steps;
    s.seed = seed;
    s.independent_subsets = independent_subsets;
    s.granularity = is_line_family(mask.family) ? Granularity::Column : Granularity::Pixel;

    if (s.granularity == Granularity::Column) {
        for (int c = 0; c < mask.width; ++c)
            if (!mask.bits[c]) s.complement_order.push_back(std::uint32_t(c));
    } else {
        for (std::size_t i = 0; i < mask.bits.size(); ++i)
            if (!mask.bits[i]) s.complement_order.push_back(std::uint32_t(i));
    }
    Rng rng(seed);
    for (std::size_t i = s.complement_order.size(); i > 1; --i) {
        std::size_t j = std::size_t(rng.uniform_int(i));
        std::swap(s.complement_order[i - 1], s.complement_order[j]);
    }
    return s;
}

std::size_t complement_count_at(const MaskSchedule& s, int t) {
    if (t < 0 || t > s.total_steps) throw ValidationError("mask_at: step out of range");
    // floor(|M^c| * (T - t) / T), exact in 64-bit integers
    return std::size_t(std::uint64_t(s.complement_order.size()) *
                       std::uint64_t(s.total_steps - t) / std::uint64_t(s.total_steps));
}

SamplingMask mask_at(const MaskSchedule& s, int t) {
    const std::size_t count = complement_count_at(s, t); // validates t
    SamplingMask m = s.base;

    const std::uint32_t* chosen = s.complement_order.data();
    std::vector<std::uint32_t> redraw;
    if (s.independent_subsets) {
        redraw = s.complement_order;
        std::sort(redraw.begin(), redraw.end());
        Rng rng(splitmix64(s.seed ^ (0x9e3779b97f4a7c15ULL * std::uint64_t(t + 1))));
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t j = i + std::size_t(rng.uniform_int(redraw.size() - i));
            std::swap(redraw[i], redraw[j]);
        }
        chosen = redraw.data();
    }

    if (s.granularity == Granularity::Column) {
        for (std::size_t i = 0; i < count; ++i) fill_column(m, int(chosen[i]));
    } else {
        for (std::size_t i = 0; i < count; ++i) m.bits[chosen[i]] = 1;
    }
    return m;
}

void save_mask_png(const SamplingMask& m, const std::string& path) {
    Gray8 img(m.height, m.width);
    for (std::size_t i = 0; i < m.bits.size(); ++i) img.pixels[i] = m.bits[i] ? 255 : 0;
    write_png(path, img);
}

void save_mask_json(const SamplingMask& m, const std::string& path) {
    nlohmann::json j = {
        {"format", "kcd-mask"},        {"version", 1},
        {"family", family_name(m.family)}, {"height", m.height},
        {"width", m.width},            {"acceleration", m.acceleration},
        {"center_fraction", m.center_fraction}, {"seed", m.seed},
    };
    std::ofstream out(path);
    if (!out) throw IoError("save_mask_json: cannot open " + path);
    out << j.dump(2) << "\n";
}

namespace {
nlohmann::json read_mask_descriptor(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_mask: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("load_mask: malformed JSON in " + path + ": " + e.what());
    }
    if (j.value("format", "") != "kcd-mask")
        throw IoError("load_mask: not a mask descriptor: " + path);
    if (j.value("version", 0) != 1)
        throw IoError("load_mask: unsupported descriptor version in " + path);
    return j;
}
} // namespace

SamplingMask load_mask_json(const std::string& path) {
    const auto j = read_mask_descriptor(path);
    return make_mask(parse_family(j.at("family").get<std::string>()), j.at("height").get<int>(),
                     j.at("width").get<int>(), j.at("acceleration").get<double>(),
                     j.at("center_fraction").get<double>(), j.at("seed").get<std::uint64_t>());
}

SamplingMask make_mask(const MaskSpec& spec, int height, int width, std::uint64_t seed) {
    return make_mask(spec.family, height, width, spec.acceleration, spec.center_fraction, seed);
}

SamplingMask load_mask(const std::string& json_path, const std::string& png_path) {
    const auto j = read_mask_descriptor(json_path);
    const Gray8 img = read_png(png_path);
    if (img.height != j.at("height").get<int>() || img.width != j.at("width").get<int>())
        throw IoError("load_mask: PNG shape does not match descriptor");
    SamplingMask m;
    m.height = img.height;
    m.width = img.width;
    m.bits.resize(img.pixels.size());
    for (std::size_t i = 0; i < img.pixels.size(); ++i) m.bits[i] = img.pixels[i] ? 1 : 0;
    m.family = parse_family(j.at("family").get<std::string>());
    m.acceleration = j.at("acceleration").get<double>();
    m.center_fraction = j.at("center_fraction").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    return m;
}

} // namespace kcd
