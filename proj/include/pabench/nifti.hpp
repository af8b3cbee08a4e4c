#pragma once

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include "pabench/voxel_grid.hpp"

namespace pabench {

/// Malformed or unsupported NIfTI-1 payload. `field()` names the header
/// field that failed validation, when one is responsible.
class NiftiError : public Error {
public:
    NiftiError(const std::string& field, const std::string& message)
        : Error(field.empty() ? message : field + ": " + message),
          field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

namespace nifti_detail {

// NIfTI-1 datatype codes.
inline constexpr std::int16_t kDtUint8 = 2;
inline constexpr std::int16_t kDtInt16 = 4;
inline constexpr std::int16_t kDtFloat32 = 16;

inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::size_t kVoxOffset = 352;
inline constexpr int kMaxDim = 32767; // dim fields are int16

template <class T>
T load_le(const std::uint8_t* p) {
    static_assert(std::is_trivially_copyable_v<T>);
    T out;
    if constexpr (sizeof(T) == 1) {
        std::memcpy(&out, p, 1);
    } else {
        std::uint8_t buf[sizeof(T)];
        for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = p[i];
        std::memcpy(&out, buf, sizeof(T)); // host is assumed little-endian
    }
    return out;
}

template <class T>
void store_le(std::uint8_t* p, T v) {
    std::memcpy(p, &v, sizeof(T));
}

static_assert(std::endian::native == std::endian::little,
              "big-endian hosts need byte swapping in load_le/store_le");

struct RawHeader {
    const std::uint8_t* bytes;

    template <class T>
    T get(std::size_t offset) const {
        return load_le<T>(bytes + offset);
    }
};

inline int bytes_per_voxel(std::int16_t code) {
    switch (code) {
        case kDtUint8: return 1;
        case kDtInt16: return 2;
        case kDtFloat32: return 4;
    }
    return 0;
}

inline std::int16_t datatype_code(Datatype dt) {
    switch (dt) {
        case Datatype::Uint8: return kDtUint8;
        case Datatype::Int16: return kDtInt16;
        case Datatype::Float32: return kDtFloat32;
    }
    return kDtFloat32;
}

} // namespace nifti_detail

/// Serializes a grid as an uncompressed NIfTI-1 single-file image:
/// 348-byte header, magic "n+1\0", vox_offset 352, scl_slope 1, scl_inter 0.
inline std::vector<std::uint8_t> encode_nifti(const VoxelGrid& grid) {
    namespace nd = nifti_detail;
    for (int a = 0; a < 3; ++a) {
        if (grid.dims[a] < 1 || grid.dims[a] > nd::kMaxDim) {
            throw NiftiError("dim", "grid dimension out of range: " +
                                        detail::triple_str(grid.dims));
        }
        if (!(grid.spacing[a] > 0.0)) {
            throw NiftiError("pixdim", "spacing must be positive: " +
                                           detail::triple_str(grid.spacing));
        }
    }
    if (grid.data.size() != grid.size()) {
        throw NiftiError("", "data length " + std::to_string(grid.data.size()) +
                                 " does not match dims " +
                                 detail::triple_str(grid.dims));
    }

    const int bpp = nd::bytes_per_voxel(nd::datatype_code(grid.dtype));
    std::vector<std::uint8_t> out(nd::kVoxOffset + grid.size() * bpp, 0);
    std::uint8_t* h = out.data();

    nd::store_le<std::int32_t>(h + 0, 348);          // sizeof_hdr
    nd::store_le<char>(h + 38, 'r');                 // regular (conventional)
    nd::store_le<std::int16_t>(h + 40, 3);           // dim[0]
    for (int a = 0; a < 3; ++a) {
        nd::store_le<std::int16_t>(h + 42 + 2 * a,
                                   static_cast<std::int16_t>(grid.dims[a]));
    }
    for (int a = 4; a <= 7; ++a) nd::store_le<std::int16_t>(h + 40 + 2 * a, 1);
    nd::store_le<std::int16_t>(h + 70, nd::datatype_code(grid.dtype));
    nd::store_le<std::int16_t>(h + 72, static_cast<std::int16_t>(8 * bpp));
    nd::store_le<float>(h + 76, grid.orientation.qfac); // pixdim[0]
    for (int a = 0; a < 3; ++a) {
        nd::store_le<float>(h + 80 + 4 * a, static_cast<float>(grid.spacing[a]));
    }
    nd::store_le<float>(h + 108, static_cast<float>(nd::kVoxOffset));
    nd::store_le<float>(h + 112, 1.0f); // scl_slope
    nd::store_le<float>(h + 116, 0.0f); // scl_inter
    nd::store_le<char>(h + 123, 2);     // xyzt_units = mm

    const Orientation& o = grid.orientation;
    nd::store_le<std::int16_t>(h + 252, o.qform_code);
    nd::store_le<std::int16_t>(h + 254, o.sform_code);
    for (int i = 0; i < 3; ++i) nd::store_le<float>(h + 256 + 4 * i, o.quatern[i]);
    for (int i = 0; i < 3; ++i) nd::store_le<float>(h + 268 + 4 * i, o.qoffset[i]);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
            nd::store_le<float>(h + 280 + 16 * r + 4 * c, o.srow[r][c]);
        }
    }
    std::memcpy(h + 344, "n+1\0", 4);

    std::uint8_t* payload = out.data() + nd::kVoxOffset;
    switch (grid.dtype) {
        case Datatype::Uint8:
            for (std::size_t i = 0; i < grid.data.size(); ++i) {
                const float v = grid.data[i];
                const long r = std::lround(std::min(255.0f, std::max(0.0f, v)));
                payload[i] = static_cast<std::uint8_t>(r);
            }
            break;
        case Datatype::Int16:
            for (std::size_t i = 0; i < grid.data.size(); ++i) {
                const float v = std::min(32767.0f, std::max(-32768.0f, grid.data[i]));
                nd::store_le<std::int16_t>(payload + 2 * i,
                                           static_cast<std::int16_t>(std::lround(v)));
            }
            break;
        case Datatype::Float32:
            std::memcpy(payload, grid.data.data(), 4 * grid.data.size());
            break;
    }
    return out;
}

/// Decodes an uncompressed NIfTI-1 byte buffer. Every validation failure
/// throws NiftiError naming the offending header field; no input crashes.
inline VoxelGrid parse_nifti(const std::vector<std::uint8_t>& bytes) {
    namespace nd = nifti_detail;
    if (bytes.size() < nd::kHeaderSize) {
        throw NiftiError("sizeof_hdr", "file holds " + std::to_string(bytes.size()) +
                                           " bytes, header needs 348");
    }
    nd::RawHeader h{bytes.data()};

    const auto sizeof_hdr = h.get<std::int32_t>(0);
    if (sizeof_hdr != 348) {
        throw NiftiError("sizeof_hdr",
                         "expected 348, got " + std::to_string(sizeof_hdr) +
                             " (not NIfTI-1, or non-little-endian file)");
    }
    char magic[4];
    std::memcpy(magic, bytes.data() + 344, 4);
    if (std::memcmp(magic, "n+1\0", 4) != 0) {
        throw NiftiError("magic", "expected \"n+1\", single-file NIfTI-1 only");
    }

    const auto ndim = h.get<std::int16_t>(40);
    if (ndim != 3) {
        throw NiftiError("dim[0]", "only 3-D images supported, got dim[0]=" +
                                       std::to_string(ndim));
    }
    std::array<int, 3> dims{};
    for (int a = 0; a < 3; ++a) {
        const auto d = h.get<std::int16_t>(42 + 2 * a);
        if (d < 1) {
            throw NiftiError("dim[" + std::to_string(a + 1) + "]",
                             "dimension must be >= 1, got " + std::to_string(d));
        }
        dims[a] = d;
    }

    const auto dt_code = h.get<std::int16_t>(70);
    const int bpp = nd::bytes_per_voxel(dt_code);
    if (bpp == 0) {
        throw NiftiError("datatype",
                         "unsupported code " + std::to_string(dt_code) +
                             " (supported: 2=uint8, 4=int16, 16=float32)");
    }
    const auto bitpix = h.get<std::int16_t>(72);
    if (bitpix != 8 * bpp) {
        throw NiftiError("bitpix", "expected " + std::to_string(8 * bpp) +
                                       " for datatype " + std::to_string(dt_code) +
                                       ", got " + std::to_string(bitpix));
    }

    std::array<double, 3> spacing{};
    for (int a = 0; a < 3; ++a) {
        const float s = h.get<float>(80 + 4 * a);
        if (!(s > 0.0f) || !std::isfinite(s)) {
            throw NiftiError("pixdim[" + std::to_string(a + 1) + "]",
                             "spacing must be positive and finite, got " +
                                 std::to_string(s));
        }
        spacing[a] = s;
    }

    const float vox_offset_f = h.get<float>(108);
    if (!std::isfinite(vox_offset_f) || vox_offset_f < 348.0f ||
        vox_offset_f != std::floor(vox_offset_f)) {
        throw NiftiError("vox_offset", "expected an integral value >= 348, got " +
                                           std::to_string(vox_offset_f));
    }
    const std::uint64_t vox_offset = static_cast<std::uint64_t>(vox_offset_f);

    const std::uint64_t nvox =
        static_cast<std::uint64_t>(dims[0]) * dims[1] * dims[2];
    const std::uint64_t need = vox_offset + nvox * static_cast<std::uint64_t>(bpp);
    if (need > bytes.size()) {
        throw NiftiError("vox_offset", "truncated payload: need " +
                                           std::to_string(need) + " bytes, have " +
                                           std::to_string(bytes.size()));
    }

    float slope = h.get<float>(112);
    float inter = h.get<float>(116);
    if (!std::isfinite(slope)) slope = 0.0f;
    if (!std::isfinite(inter)) inter = 0.0f;
    const bool rescale = slope != 0.0f && !(slope == 1.0f && inter == 0.0f);

    VoxelGrid grid;
    grid.dims = dims;
    grid.spacing = spacing;
    grid.dtype = dt_code == nd::kDtUint8    ? Datatype::Uint8
                 : dt_code == nd::kDtInt16 ? Datatype::Int16
                                           : Datatype::Float32;
    grid.orientation.qform_code = h.get<std::int16_t>(252);
    grid.orientation.sform_code = h.get<std::int16_t>(254);
    for (int i = 0; i < 3; ++i) {
        grid.orientation.quatern[i] = h.get<float>(256 + 4 * i);
        grid.orientation.qoffset[i] = h.get<float>(268 + 4 * i);
    }
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
            grid.orientation.srow[r][c] = h.get<float>(280 + 16 * r + 4 * c);
        }
    }
    grid.orientation.qfac = h.get<float>(76);

    grid.data.resize(nvox);
    const std::uint8_t* payload = bytes.data() + vox_offset;
    switch (grid.dtype) {
        case Datatype::Uint8:
            for (std::uint64_t i = 0; i < nvox; ++i) {
                grid.data[i] = static_cast<float>(payload[i]);
            }
            break;
        case Datatype::Int16:
            for (std::uint64_t i = 0; i < nvox; ++i) {
                grid.data[i] = static_cast<float>(
                    nd::load_le<std::int16_t>(payload + 2 * i));
            }
            break;
        case Datatype::Float32:
            std::memcpy(grid.data.data(), payload, 4 * nvox);
            break;
    }
    if (rescale) {
        for (auto& v : grid.data) v = slope * v + inter;
        grid.dtype = Datatype::Float32; // values no longer fit the raw tag
    }
    return grid;
}

/// Reads a whole file through zlib; handles both plain bytes and gzip
/// containers (detected by the 0x1f 0x8b prefix) transparently.
inline std::vector<std::uint8_t> read_file_maybe_gz(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (f == nullptr) {
        throw Error("cannot open " + path + ": " + std::strerror(errno));
    }
    std::vector<std::uint8_t> out;
    std::vector<std::uint8_t> buf(1 << 20);
    for (;;) {
        const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
        if (n < 0) {
            int errnum = 0;
            const char* msg = gzerror(f, &errnum);
            std::string text = msg ? msg : "gzip read error";
            gzclose(f);
            throw NiftiError("", "corrupt gzip stream in " + path + ": " + text);
        }
        if (n == 0) break;
        out.insert(out.end(), buf.begin(), buf.begin() + n);
    }
    gzclose(f);
    return out;
}

/// Reads a NIfTI-1 single-file image, optionally gzip-wrapped.
inline VoxelGrid read_nifti(const std::string& path) {
    try {
        return parse_nifti(read_file_maybe_gz(path));
    } catch (const NiftiError& e) {
        throw NiftiError(e.field(), path + ": " + e.what());
    }
}

/// Writes a gzip-wrapped NIfTI-1 file. The gzip header carries no
/// timestamp, so identical grids produce byte-identical files.
inline void write_nifti(const VoxelGrid& grid, const std::string& path) {
    const std::vector<std::uint8_t> bytes = encode_nifti(grid);
    gzFile f = gzopen(path.c_str(), "wb6");
    if (f == nullptr) {
        throw Error("cannot open " + path + " for writing: " +
                    std::strerror(errno));
    }
    std::size_t written = 0;
    while (written < bytes.size()) {
        const unsigned chunk = static_cast<unsigned>(
            std::min<std::size_t>(bytes.size() - written, 1u << 24));
        const int n = gzwrite(f, bytes.data() + written, chunk);
        if (n <= 0) {
            gzclose(f);
            throw Error("short write to " + path);
        }
        written += static_cast<std::size_t>(n);
    }
    if (gzclose(f) != Z_OK) {
        throw Error("failed to finalize " + path);
    }
}

} // namespace pabench
