#include "kcd/fastmri.hpp"

#include <algorithm>
#include <filesystem>

#include <hdf5.h>

#include "kcd/error.hpp"
#include "kcd/fourier.hpp"

namespace fs = std::filesystem;

namespace kcd {

namespace {

struct ComplexF {
    float r, i;
};

// RAII for hid_t handles.
struct Handle {
    hid_t id = -1;
    herr_t (*closer)(hid_t) = nullptr;
    Handle(hid_t id_, herr_t (*closer_)(hid_t)) : id(id_), closer(closer_) {}
    ~Handle() {
        if (id >= 0 && closer) closer(id);
    }
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    explicit operator bool() const { return id >= 0; }
};

void silence_hdf5_once() {
    static const bool done = [] {
        H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);
        return true;
    }();
    (void)done;
}

std::string read_acquisition(hid_t file) {
    if (H5Aexists(file, "acquisition") <= 0) return {};
    Handle attr(H5Aopen(file, "acquisition", H5P_DEFAULT), H5Aclose);
    if (!attr) return {};
    Handle ftype(H5Aget_type(attr.id), H5Tclose);
    if (!ftype) return {};
    if (H5Tis_variable_str(ftype.id) > 0) {
        Handle mtype(H5Tcopy(H5T_C_S1), H5Tclose);
        H5Tset_size(mtype.id, H5T_VARIABLE);
        char* p = nullptr;
        if (H5Aread(attr.id, mtype.id, &p) < 0 || !p) return {};
        std::string s(p);
        H5free_memory(p);
        return s;
    }
    const std::size_t n = H5Tget_size(ftype.id);
    std::vector<char> buf(n + 1, '\0');
    Handle mtype(H5Tcopy(H5T_C_S1), H5Tclose);
    H5Tset_size(mtype.id, n);
    if (H5Aread(attr.id, mtype.id, buf.data()) < 0) return {};
    return std::string(buf.data());
}

Contrast contrast_from_acquisition(const std::string& acq) {
    if (acq.find("PDFS") != std::string::npos || acq.find("FS") != std::string::npos)
        return Contrast::PDFS;
    return Contrast::PD;
}

// Reads a 3D float dataset if present and shaped (slices, crop, crop).
bool read_target_stack(hid_t file, const char* name, hsize_t slices, int crop,
                       std::vector<float>& out) {
    if (H5Lexists(file, name, H5P_DEFAULT) <= 0) return false;
    Handle ds(H5Dopen2(file, name, H5P_DEFAULT), H5Dclose);
    if (!ds) return false;
    Handle space(H5Dget_space(ds.id), H5Sclose);
    if (H5Sget_simple_extent_ndims(space.id) != 3) return false;
    hsize_t dims[3];
    H5Sget_simple_extent_dims(space.id, dims, nullptr);
    if (dims[0] != slices || dims[1] != hsize_t(crop) || dims[2] != hsize_t(crop)) return false;
    out.resize(std::size_t(dims[0]) * dims[1] * dims[2]);
    return H5Dread(ds.id, H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, out.data()) >= 0;
}

} // namespace

std::vector<SliceRecord> ingest_fastmri_file(const std::string& path, int crop) {
    silence_hdf5_once();
    if (crop < 1) throw ValidationError("ingest: crop must be positive");

    Handle file(H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose);
    if (!file) throw IoError("cannot open HDF5 file: " + path);

    Handle ds(H5Dopen2(file.id, "kspace", H5P_DEFAULT), H5Dclose);
    if (!ds) throw IoError("no 'kspace' dataset in " + path);
    Handle space(H5Dget_space(ds.id), H5Sclose);
    if (H5Sget_simple_extent_ndims(space.id) != 3)
        throw IoError("'kspace' is not 3-dimensional in " + path);
    hsize_t dims[3];
    H5Sget_simple_extent_dims(space.id, dims, nullptr);
    const int slices = int(dims[0]), h = int(dims[1]), w = int(dims[2]);
    if (h < crop || w < crop)
        throw IoError("k-space extent " + std::to_string(h) + "x" + std::to_string(w) +
                      " smaller than crop in " + path);

    Handle ctype(H5Tcreate(H5T_COMPOUND, sizeof(ComplexF)), H5Tclose);
    H5Tinsert(ctype.id, "r", offsetof(ComplexF, r), H5T_NATIVE_FLOAT);
    H5Tinsert(ctype.id, "i", offsetof(ComplexF, i), H5T_NATIVE_FLOAT);
    std::vector<ComplexF> raw(std::size_t(slices) * h * w);
    if (H5Dread(ds.id, ctype.id, H5S_ALL, H5S_ALL, H5P_DEFAULT, raw.data()) < 0)
        throw IoError("failed to read 'kspace' from " + path);

    std::vector<float> targets;
    const bool have_targets =
        read_target_stack(file.id, "reconstruction_esc", dims[0], crop, targets) ||
        read_target_stack(file.id, "reconstruction_rss", dims[0], crop, targets);

    const std::string acq = read_acquisition(file.id);
    const Contrast contrast = acq.empty() ? Contrast::PD : contrast_from_acquisition(acq);
    const std::string volume_id = fs::path(path).stem().string();

    const int oy = (h - crop) / 2, ox = (w - crop) / 2;
    std::vector<SliceRecord> out;
    out.reserve(std::size_t(slices));
    for (int s = 0; s < slices; ++s) {
        KSpaceGrid full(h, w);
        const ComplexF* src = raw.data() + std::size_t(s) * h * w;
        for (std::size_t i = 0; i < full.size(); ++i)
            full.data[i] = Complex(src[i].r, src[i].i);
        const ComplexImage img = inverse_transform(full);
        ComplexImage cropped(crop, crop);
        for (int y = 0; y < crop; ++y)
            for (int x = 0; x < crop; ++x) cropped.at(y, x) = img.at(oy + y, ox + x);

        SliceRecord rec;
        rec.kspace = forward_transform(cropped);
        if (have_targets) {
            rec.target = RealImage(crop, crop);
            const float* t = targets.data() + std::size_t(s) * crop * crop;
            for (std::size_t i = 0; i < rec.target.size(); ++i) rec.target.data[i] = t[i];
        } else {
            rec.target = magnitude(cropped);
        }
        rec.volume_id = volume_id;
        rec.slice_index = s;
        rec.contrast = contrast;
        out.push_back(std::move(rec));
    }
    return out;
}

void for_each_fastmri_slice(const std::string& dir,
                            const std::function<void(SliceRecord&&)>& sink,
                            std::vector<std::string>* errors, int crop) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".h5")
            files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    for (const std::string& f : files) {
        try {
            for (SliceRecord& r : ingest_fastmri_file(f, crop)) sink(std::move(r));
        } catch (const std::exception& e) {
            if (errors) errors->push_back(f + ": " + e.what());
        }
    }
}

std::vector<SliceRecord> ingest_fastmri_dir(const std::string& dir,
                                            std::vector<std::string>* errors, int crop) {
    std::vector<SliceRecord> out;
    for_each_fastmri_slice(
        dir, [&](SliceRecord&& r) { out.push_back(std::move(r)); }, errors, crop);
    return out;
}

} // namespace kcd
