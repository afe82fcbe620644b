#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kcd/image.hpp"

namespace kcd {

enum class Contrast { PD, PDFS, Synthetic };

const char* contrast_name(Contrast c);
Contrast parse_contrast(const std::string& name);

/// One fully-sampled k-space slice plus its ground-truth magnitude image.
struct SliceRecord {
    KSpaceGrid kspace;
    RealImage target;
    std::string volume_id;
    int slice_index = 0;
    Contrast contrast = Contrast::Synthetic;
};

struct EllipseSpec {
    double cy = 0, cx = 0;       // center, normalized [-1, 1] coordinates
    double ay = 0, ax = 0;       // semi-axes
    double angle = 0;            // radians
    double intensity = 0;
};

/// Synthetic slice: a few overlapping ellipses, blurred with a fixed small
/// Gaussian, magnitude normalized to max 1, and given a smooth low-order
/// polynomial phase so the image is genuinely complex.
struct PhantomSpec {
    int size = 64;
    std::vector<EllipseSpec> ellipses;
    std::array<double, 6> phase{}; // c0 + c1 u + c2 v + c3 uv + c4 (u^2-v^2) + c5 (u^2+v^2)
};

PhantomSpec random_phantom_spec(int size, std::uint64_t seed);
ComplexImage render_phantom(const PhantomSpec& spec);

/// n deterministic synthetic slices, each its own single-slice volume with
/// id "syn<i>". The target (magnitude) has maximum exactly 1 and matches the
/// magnitude of the inverse transform of the stored k-space to FFT round-trip
/// precision.
std::vector<SliceRecord> generate_phantoms(int n, int size, std::uint64_t seed);

/// Portable binary dataset: magic, version, record headers and raw arrays,
/// CRC32 trailer. Complex128 by default; complex64 available to halve size.
void export_dataset(const std::vector<SliceRecord>& records, const std::string& path,
                    bool complex64 = false);
std::vector<SliceRecord> import_dataset(const std::string& path);

/// Human-readable JSON companion: record/volume counts, shapes, contrasts.
void write_manifest(const std::vector<SliceRecord>& records, const std::string& dataset_file,
                    const std::string& manifest_path);

/// Accepts a .kcds dataset, a manifest .json (resolving its dataset entry
/// relative to the manifest's directory), or a directory of HDF5 volumes.
/// `volumes`, when non-empty, filters by volume id.
std::vector<SliceRecord> load_dataset(const std::string& path,
                                      const std::vector<std::string>& volumes = {});

/// Sorted list of distinct volume ids.
std::vector<std::string> volume_ids(const std::vector<SliceRecord>& records);

} // namespace kcd
