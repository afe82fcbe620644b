#include "kcd/checkpoint.hpp"

#include "kcd/binio.hpp"

namespace kcd {

namespace {

constexpr char kMagic[9] = "KCDMODEL";
constexpr std::uint32_t kVersion = 1;

void write_config(ByteWriter& w, const UNetConfig& c) {
    w.i32(c.depth);
    w.i32(c.base_channels);
    w.i32(c.time_dim);
    w.i32(c.in_channels);
    w.i32(c.out_channels);
}

UNetConfig read_config(ByteReader& r) {
    UNetConfig c;
    c.depth = r.i32();
    c.base_channels = r.i32();
    c.time_dim = r.i32();
    c.in_channels = r.i32();
    c.out_channels = r.i32();
    return c;
}

} // namespace

template <typename S>
void save_checkpoint(const UNet<S>& net, const std::string& path) {
    ByteWriter w;
    w.magic(kMagic);
    w.u32(kVersion);
    w.u8(std::uint8_t(sizeof(S)));
    write_config(w, net.config());
    const auto& blocks = net.blocks();
    w.u32(std::uint32_t(blocks.size()));
    const S* theta = net.params().data();
    for (const ParamBlock& b : blocks) {
        w.str(b.name);
        w.u8(std::uint8_t(b.shape.size()));
        for (int d : b.shape) w.i32(d);
        w.u64(b.count);
        if constexpr (sizeof(S) == 4)
            w.f32_array(theta + b.offset, b.count);
        else
            w.f64_array(theta + b.offset, b.count);
    }
    w.write_file_with_crc(path);
}

CheckpointInfo peek_checkpoint(const std::string& path) {
    ByteReader r = ByteReader::from_file_with_crc(path, "checkpoint");
    r.expect_magic(kMagic, "checkpoint");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw IoError("checkpoint: unsupported version " + std::to_string(version));
    CheckpointInfo info;
    info.scalar_bytes = r.u8();
    if (info.scalar_bytes != 4 && info.scalar_bytes != 8)
        throw IoError("checkpoint: unknown scalar width");
    info.config = read_config(r);
    return info;
}

template <typename S>
UNet<S> load_checkpoint(const std::string& path) {
    ByteReader r = ByteReader::from_file_with_crc(path, "checkpoint");
    r.expect_magic(kMagic, "checkpoint");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw IoError("checkpoint: unsupported version " + std::to_string(version));
    const int stored_bytes = r.u8();
    if (stored_bytes != 4 && stored_bytes != 8)
        throw IoError("checkpoint: unknown scalar width");
    if (stored_bytes > int(sizeof(S)))
        throw IoError("checkpoint: refusing to narrow float64 parameters to float32");
    const UNetConfig cfg = read_config(r);

    UNet<S> net(cfg);
    const auto& blocks = net.blocks();
    const std::uint32_t n_blocks = r.u32();
    if (n_blocks != blocks.size())
        throw IoError("checkpoint: parameter block count mismatch");
    S* theta = net.params().data();
    for (const ParamBlock& b : blocks) {
        const std::string name = r.str();
        if (name != b.name) throw IoError("checkpoint: unexpected block '" + name + "'");
        const int ndim = r.u8();
        if (ndim != int(b.shape.size())) throw IoError("checkpoint: rank mismatch in " + name);
        for (int d : b.shape)
            if (r.i32() != d) throw IoError("checkpoint: shape mismatch in " + name);
        const std::uint64_t count = r.u64();
        if (count != b.count) throw IoError("checkpoint: size mismatch in " + name);
        for (std::uint64_t i = 0; i < count; ++i) {
            const double v = stored_bytes == 4 ? double(r.f32()) : r.f64();
            theta[b.offset + i] = S(v);
        }
    }
    if (r.remaining() != 0) throw IoError("checkpoint: trailing bytes after parameters");
    return net;
}

std::unique_ptr<RestorationModel> load_restoration_model(const std::string& path) {
    const CheckpointInfo info = peek_checkpoint(path);
    if (info.scalar_bytes == 8)
        return std::make_unique<ReferenceUNet<double>>(load_checkpoint<double>(path));
    return std::make_unique<ReferenceUNet<float>>(load_checkpoint<float>(path));
}

template void save_checkpoint<float>(const UNet<float>&, const std::string&);
template void save_checkpoint<double>(const UNet<double>&, const std::string&);
template UNet<float> load_checkpoint<float>(const std::string&);
template UNet<double> load_checkpoint<double>(const std::string&);

} // namespace kcd
