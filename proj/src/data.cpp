#include "kcd/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "kcd/binio.hpp"
#include "kcd/error.hpp"
#include "kcd/fastmri.hpp"
#include "kcd/fourier.hpp"
#include "kcd/rng.hpp"

namespace fs = std::filesystem;

namespace kcd {

const char* contrast_name(Contrast c) {
    switch (c) {
    case Contrast::PD: return "PD";
    case Contrast::PDFS: return "PDFS";
    case Contrast::Synthetic: return "synthetic";
    }
    return "?";
}

Contrast parse_contrast(const std::string& name) {
    if (name == "PD") return Contrast::PD;
    if (name == "PDFS") return Contrast::PDFS;
    if (name == "synthetic") return Contrast::Synthetic;
    throw ValidationError("unknown contrast '" + name + "'");
}

PhantomSpec random_phantom_spec(int size, std::uint64_t seed) {
    if (size < 16) throw ValidationError("phantom size must be >= 16");
    Rng rng(seed);
    PhantomSpec spec;
    spec.size = size;
    const int n = 3 + int(rng.uniform_int(5)); // 3..7 ellipses
    for (int i = 0; i < n; ++i) {
        EllipseSpec e;
        e.cy = rng.uniform(-0.55, 0.55);
        e.cx = rng.uniform(-0.55, 0.55);
        e.ay = rng.uniform(0.12, 0.5);
        e.ax = rng.uniform(0.12, 0.5);
        e.angle = rng.uniform(0.0, 3.14159265358979323846);
        e.intensity = rng.uniform(0.25, 1.0);
        spec.ellipses.push_back(e);
    }
    for (double& c : spec.phase) c = rng.uniform(-0.4, 0.4);
    return spec;
}

namespace {

// Fixed small blur so phantom edges are not perfectly sharp; radius-3
// truncated Gaussian, renormalized at the borders.
RealImage blur(const RealImage& img) {
    constexpr double kSigma = 0.8;
    constexpr int kRadius = 3;
    double kernel[2 * kRadius + 1];
    for (int i = -kRadius; i <= kRadius; ++i)
        kernel[i + kRadius] = std::exp(-0.5 * (i * i) / (kSigma * kSigma));

    const int h = img.height, w = img.width;
    RealImage tmp(h, w), out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0, wsum = 0.0;
            for (int i = -kRadius; i <= kRadius; ++i) {
                const int xx = x + i;
                if (xx < 0 || xx >= w) continue;
                acc += kernel[i + kRadius] * img.at(y, xx);
                wsum += kernel[i + kRadius];
            }
            tmp.at(y, x) = acc / wsum;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0, wsum = 0.0;
            for (int i = -kRadius; i <= kRadius; ++i) {
                const int yy = y + i;
                if (yy < 0 || yy >= h) continue;
                acc += kernel[i + kRadius] * tmp.at(yy, x);
                wsum += kernel[i + kRadius];
            }
            out.at(y, x) = acc / wsum;
        }
    return out;
}

} // namespace

ComplexImage render_phantom(const PhantomSpec& spec) {
    const int s = spec.size;
    if (s < 16) throw ValidationError("phantom size must be >= 16");
    RealImage mag(s, s);
    const double half = s / 2.0;
    for (int y = 0; y < s; ++y) {
        const double v = (y - half) / half;
        for (int x = 0; x < s; ++x) {
            const double u = (x - half) / half;
            double val = 0.0;
            for (const EllipseSpec& e : spec.ellipses) {
                const double du = u - e.cx, dv = v - e.cy;
                const double ca = std::cos(e.angle), sa = std::sin(e.angle);
                const double p = (ca * du + sa * dv) / e.ax;
                const double q = (-sa * du + ca * dv) / e.ay;
                if (p * p + q * q <= 1.0) val += e.intensity;
            }
            mag.at(y, x) = val;
        }
    }
    mag = blur(mag);
    const double m = max_abs(mag);
    if (m > 0.0)
        for (double& v : mag.data) v /= m;

    ComplexImage img(s, s);
    for (int y = 0; y < s; ++y) {
        const double v = (y - half) / half;
        for (int x = 0; x < s; ++x) {
            const double u = (x - half) / half;
            const auto& c = spec.phase;
            const double phi =
                c[0] + c[1] * u + c[2] * v + c[3] * u * v + c[4] * (u * u - v * v) +
                c[5] * (u * u + v * v);
            img.at(y, x) = std::polar(mag.at(y, x), phi);
        }
    }
    return img;
}

std::vector<SliceRecord> generate_phantoms(int n, int size, std::uint64_t seed) {
    if (n < 1) throw ValidationError("generate_phantoms: need n >= 1");
    std::vector<SliceRecord> out;
    out.reserve(std::size_t(n));
    for (int i = 0; i < n; ++i) {
        const PhantomSpec spec = random_phantom_spec(size, splitmix64(seed + std::uint64_t(i)));
        const ComplexImage img = render_phantom(spec);
        SliceRecord rec;
        rec.kspace = forward_transform(img);
        rec.target = magnitude(img);
        rec.volume_id = "syn" + std::to_string(i);
        rec.slice_index = 0;
        rec.contrast = Contrast::Synthetic;
        out.push_back(std::move(rec));
    }
    return out;
}

namespace {

constexpr char kDataMagic[9] = "KCDSLICE";
constexpr std::uint32_t kDataVersion = 1;

} // namespace

void export_dataset(const std::vector<SliceRecord>& records, const std::string& path,
                    bool complex64) {
    ByteWriter w;
    w.magic(kDataMagic);
    w.u32(kDataVersion);
    w.u32(std::uint32_t(records.size()));
    for (const SliceRecord& r : records) {
        if (r.kspace.height != r.target.height || r.kspace.width != r.target.width)
            throw ValidationError("export_dataset: k-space/target shape mismatch in " +
                                  r.volume_id);
        w.u32(std::uint32_t(r.kspace.height));
        w.u32(std::uint32_t(r.kspace.width));
        w.u8(complex64 ? 0 : 1);
        w.u8(std::uint8_t(r.contrast));
        w.str(r.volume_id);
        w.u32(std::uint32_t(r.slice_index));
        if (complex64) {
            for (const Complex& c : r.kspace.data) {
                w.f32(float(c.real()));
                w.f32(float(c.imag()));
            }
            for (double v : r.target.data) w.f32(float(v));
        } else {
            for (const Complex& c : r.kspace.data) {
                w.f64(c.real());
                w.f64(c.imag());
            }
            for (double v : r.target.data) w.f64(v);
        }
    }
    w.write_file_with_crc(path);
}

std::vector<SliceRecord> import_dataset(const std::string& path) {
    ByteReader r = ByteReader::from_file_with_crc(path, "dataset");
    r.expect_magic(kDataMagic, "dataset");
    const std::uint32_t version = r.u32();
    if (version != kDataVersion)
        throw IoError("dataset: unsupported version " + std::to_string(version));
    const std::uint32_t count = r.u32();
    std::vector<SliceRecord> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const int h = int(r.u32());
        const int w = int(r.u32());
        if (h < 1 || w < 1 || std::size_t(h) * std::size_t(w) > (std::size_t(1) << 28))
            throw IoError("dataset: implausible record shape");
        const int dtype = r.u8();
        if (dtype != 0 && dtype != 1) throw IoError("dataset: unknown dtype");
        SliceRecord rec;
        const int contrast = r.u8();
        if (contrast > 2) throw IoError("dataset: unknown contrast");
        rec.contrast = Contrast(contrast);
        rec.volume_id = r.str();
        rec.slice_index = int(r.u32());
        rec.kspace = KSpaceGrid(h, w);
        rec.target = RealImage(h, w);
        if (dtype == 0) {
            for (Complex& c : rec.kspace.data) {
                const float re = r.f32(), im = r.f32();
                c = Complex(re, im);
            }
            for (double& v : rec.target.data) v = r.f32();
        } else {
            for (Complex& c : rec.kspace.data) {
                const double re = r.f64(), im = r.f64();
                c = Complex(re, im);
            }
            for (double& v : rec.target.data) v = r.f64();
        }
        out.push_back(std::move(rec));
    }
    if (r.remaining() != 0) throw IoError("dataset: trailing bytes after records");
    return out;
}

std::vector<std::string> volume_ids(const std::vector<SliceRecord>& records) {
    std::set<std::string> ids;
    for (const SliceRecord& r : records) ids.insert(r.volume_id);
    return {ids.begin(), ids.end()};
}

void write_manifest(const std::vector<SliceRecord>& records, const std::string& dataset_file,
                    const std::string& manifest_path) {
    nlohmann::json j;
    j["format"] = "kcd-dataset-manifest";
    j["version"] = 1;
    j["dataset"] = dataset_file;
    j["record_count"] = records.size();
    nlohmann::json vols = nlohmann::json::array();
    for (const std::string& id : volume_ids(records)) {
        std::size_t n = 0;
        int h = 0, w = 0;
        const char* contrast = "";
        for (const SliceRecord& r : records)
            if (r.volume_id == id) {
                ++n;
                h = r.kspace.height;
                w = r.kspace.width;
                contrast = contrast_name(r.contrast);
            }
        vols.push_back({{"volume_id", id},
                        {"slices", n},
                        {"height", h},
                        {"width", w},
                        {"contrast", contrast}});
    }
    j["volumes"] = std::move(vols);
    const std::string text = j.dump(2) + "\n";
    write_file_bytes(manifest_path, text.data(), text.size());
}

std::vector<SliceRecord> load_dataset(const std::string& path,
                                      const std::vector<std::string>& volumes) {
    std::vector<SliceRecord> records;
    const fs::path p(path);
    if (fs::is_directory(p) && fs::exists(p / "manifest.json")) {
        return load_dataset((p / "manifest.json").string(), volumes);
    } else if (fs::is_directory(p)) {
        std::vector<std::string> errors;
        records = ingest_fastmri_dir(path, &errors);
        if (records.empty()) {
            std::string msg = "no readable volumes in " + path;
            for (const std::string& e : errors) msg += "\n  " + e;
            throw IoError(msg);
        }
    } else if (p.extension() == ".json") {
        const std::vector<std::uint8_t> raw = read_file_bytes(path);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(raw.begin(), raw.end());
        } catch (const nlohmann::json::exception& e) {
            throw IoError("manifest: invalid JSON in " + path + ": " + e.what());
        }
        if (j.value("format", "") != "kcd-dataset-manifest")
            throw IoError("manifest: wrong format field in " + path);
        const fs::path ds = p.parent_path() / j.at("dataset").get<std::string>();
        records = import_dataset(ds.string());
    } else if (!fs::exists(p)) {
        throw IoError("dataset path does not exist: " + path);
    } else {
        records = import_dataset(path);
    }
    if (!volumes.empty()) {
        std::vector<SliceRecord> kept;
        for (SliceRecord& r : records)
            if (std::find(volumes.begin(), volumes.end(), r.volume_id) != volumes.end())
                kept.push_back(std::move(r));
        if (kept.empty()) throw ValidationError("volume filter matched no records");
        records = std::move(kept);
    }
    return records;
}

} // namespace kcd
