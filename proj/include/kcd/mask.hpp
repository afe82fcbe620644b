#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kcd/error.hpp"

namespace kcd {

enum class MaskFamily {
    CartesianRandom,
    CartesianEquispaced,
    Gaussian1D,
    Gaussian2D,
};

const char* family_name(MaskFamily f);
MaskFamily parse_family(const std::string& name);

/// True for the line-mask families whose sampling unit is a whole column.
bool is_line_family(MaskFamily f);

/// Binary k-space under-sampling pattern. 1 = entry kept, 0 = discarded.
/// Line families (cartesian-random, cartesian-equispaced, gaussian-1d) are
/// constant along the vertical axis; gaussian-2d is sampled per pixel.
struct SamplingMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> bits; // row-major, values in {0,1}
    MaskFamily family = MaskFamily::CartesianRandom;
    double acceleration = 1.0;
    double center_fraction = 0.0;
    std::uint64_t seed = 0;

    std::uint8_t at(int y, int x) const { return bits[std::size_t(y) * width + x]; }
};

std::size_t count_ones(const SamplingMask& m);
std::size_t count_sampled_columns(const SamplingMask& m);

/// Build an under-sampling mask. Deterministic per (family, shape, R,
/// center_fraction, seed). The fully sampled central region covers
/// round(center_fraction*width) columns for line families and a central
/// square of side ceil(sqrt(center_fraction)*min(H,W)) for gaussian-2d.
/// Total kept units: round(width/R) columns resp. round(H*W/R) pixels; the
/// non-center remainder is drawn uniformly (cartesian-random), on a regular
/// stride (cartesian-equispaced), or by distance-weighted sampling without
/// replacement with weight exp(-d^2/(2 sigma^2)) (gaussian families, sigma
/// solved so the weights sum to the number of entries to draw).
SamplingMask make_mask(MaskFamily family, int height, int width, double acceleration,
                       double center_fraction, std::uint64_t seed);

/// Shape-independent mask parameters, reusable across slices of differing
/// extents (the seed is supplied per use).
struct MaskSpec {
    MaskFamily family = MaskFamily::CartesianRandom;
    double acceleration = 4.0;
    double center_fraction = 0.08;
};

SamplingMask make_mask(const MaskSpec& spec, int height, int width, std::uint64_t seed);

enum class Granularity { Column, Pixel };

/// Time-indexed degradation schedule. The complement of the base mask is put
/// in one seeded random order; M_t re-adds the first
/// floor(|M^c| * (T - t) / T) complement units to the base mask, so M_0 is
/// all ones, M_T is the base mask, and the kept sets are nested along t.
/// With independent_subsets the subset is re-drawn per t instead (same sizes,
/// no nesting guarantee).
struct MaskSchedule {
    SamplingMask base;
    int total_steps = 1;
    std::vector<std::uint32_t> complement_order; // column or flat pixel indices
    Granularity granularity = Granularity::Column;
    std::uint64_t seed = 0;
    bool independent_subsets = false;
};

MaskSchedule make_schedule(const SamplingMask& mask, int total_steps, std::uint64_t seed,
                           bool independent_subsets = false);

/// Number of complement units re-added at step t.
std::size_t complement_count_at(const MaskSchedule& s, int t);

/// M_t = base + first complement_count_at(t) entries of the complement order.
SamplingMask mask_at(const MaskSchedule& s, int t);

// PNG (0/255 binary image) + JSON descriptor serialization. The descriptor
// alone regenerates the mask bit-identically via make_mask.
void save_mask_png(const SamplingMask& m, const std::string& path);
void save_mask_json(const SamplingMask& m, const std::string& path);
SamplingMask load_mask_json(const std::string& path);                 // regenerates from descriptor
SamplingMask load_mask(const std::string& json_path, const std::string& png_path); // bits from PNG

} // namespace kcd
