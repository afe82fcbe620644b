#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kcd/data.hpp"

namespace kcd {

/// Side of the central square retained from scanner k-space, matching the
/// extent of the single-coil reference reconstructions stored in the files.
constexpr int kScannerCrop = 320;

/// Reads one HDF5 volume: dataset "kspace" (slices x H x W, compound r/i),
/// optional "reconstruction_esc"/"reconstruction_rss" target (used when its
/// extent matches the crop), and the "acquisition" attribute for contrast.
/// Slices are cropped to crop x crop in image space (inverse transform,
/// center crop, forward transform); when no stored target applies, the
/// magnitude of the cropped image is used.
std::vector<SliceRecord> ingest_fastmri_file(const std::string& path, int crop = kScannerCrop);

/// All *.h5 volumes under dir, visited in sorted order. A file that cannot
/// be read is recorded in `errors` (when given) and skipped.
std::vector<SliceRecord> ingest_fastmri_dir(const std::string& dir,
                                            std::vector<std::string>* errors = nullptr,
                                            int crop = kScannerCrop);

/// Streaming variant: hands each record to `sink` as soon as it is read.
void for_each_fastmri_slice(const std::string& dir,
                            const std::function<void(SliceRecord&&)>& sink,
                            std::vector<std::string>* errors = nullptr, int crop = kScannerCrop);

} // namespace kcd
