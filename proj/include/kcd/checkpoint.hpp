#pragma once

#include <string>

#include "kcd/unet.hpp"

namespace kcd {

/// Header of a network checkpoint, readable without loading parameters.
struct CheckpointInfo {
    UNetConfig config;
    int scalar_bytes = 4; // 4 = float32, 8 = float64
};

/// Binary checkpoint: magic, version, scalar width, architecture config,
/// then each named parameter block (name, shape, raw values), with a CRC32
/// trailer. Loading verifies the CRC, the architecture, and every block's
/// name/shape, so truncation, corruption, and config mismatches all fail
/// loudly.
template <typename S>
void save_checkpoint(const UNet<S>& net, const std::string& path);

CheckpointInfo peek_checkpoint(const std::string& path);

/// Loads a checkpoint into a network of scalar type S. Stored float32 values
/// may be widened into a float64 network; narrowing float64 to float32 is
/// rejected because it silently changes the model.
template <typename S>
UNet<S> load_checkpoint(const std::string& path);

} // namespace kcd
