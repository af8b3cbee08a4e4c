#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace pabench {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Grid geometry disagreement between two volumes.
class GridMismatch : public Error {
public:
    using Error::Error;
};

enum class Datatype : std::uint8_t {
    Uint8,
    Int16,
    Float32,
};

inline const char* datatype_name(Datatype dt) {
    switch (dt) {
        case Datatype::Uint8: return "uint8";
        case Datatype::Int16: return "int16";
        case Datatype::Float32: return "float32";
    }
    return "?";
}

/// Orientation fields carried through file round-trips untouched.
/// Metric computation happens in index space scaled by spacing and never
/// consults these.
struct Orientation {
    std::int16_t qform_code = 0;
    std::int16_t sform_code = 0;
    float quatern[3] = {0, 0, 0};
    float qoffset[3] = {0, 0, 0};
    float srow[3][4] = {{0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}};
    float qfac = 1.0f;
};

/// A 3D scalar lattice with physical spacing. Data is stored x-fastest:
/// index(i,j,k) = i + dims[0]*(j + dims[1]*k). Values live in a float
/// array regardless of the on-disk datatype tag.
struct VoxelGrid {
    std::array<int, 3> dims{0, 0, 0};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    Datatype dtype = Datatype::Float32;
    Orientation orientation{};
    std::vector<float> data;

    std::size_t size() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(j) +
                    static_cast<std::size_t>(dims[1]) * k);
    }
    float at(int i, int j, int k) const { return data[index(i, j, k)]; }
    float& at(int i, int j, int k) { return data[index(i, j, k)]; }
};

/// A voxel grid restricted to {0,1}, stored compactly.
struct BinaryMask {
    std::array<int, 3> dims{0, 0, 0};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::vector<std::uint8_t> voxels;

    std::size_t size() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(j) +
                    static_cast<std::size_t>(dims[1]) * k);
    }
    std::uint8_t at(int i, int j, int k) const { return voxels[index(i, j, k)]; }
    std::uint8_t& at(int i, int j, int k) { return voxels[index(i, j, k)]; }

    bool in_bounds(int i, int j, int k) const {
        return i >= 0 && i < dims[0] && j >= 0 && j < dims[1] && k >= 0 &&
               k < dims[2];
    }
};

inline BinaryMask make_mask(std::array<int, 3> dims,
                            std::array<double, 3> spacing) {
    BinaryMask m;
    m.dims = dims;
    m.spacing = spacing;
    m.voxels.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0);
    return m;
}

inline std::uint64_t foreground_count(const BinaryMask& m) {
    std::uint64_t n = 0;
    for (auto v : m.voxels) n += v;
    return n;
}

namespace detail {

inline std::string triple_str(const std::array<int, 3>& a) {
    return "(" + std::to_string(a[0]) + ", " + std::to_string(a[1]) + ", " +
           std::to_string(a[2]) + ")";
}

inline std::string triple_str(const std::array<double, 3>& a) {
    return "(" + std::to_string(a[0]) + ", " + std::to_string(a[1]) + ", " +
           std::to_string(a[2]) + ")";
}

} // namespace detail

/// Per-axis relative tolerance for spacing comparison.
inline constexpr double kSpacingRelTol = 1e-4;

/// Succeeds iff dims match exactly and spacing matches within a relative
/// tolerance of 1e-4 per axis. Throws GridMismatch reporting both triples.
template <class GridA, class GridB>
void check_compatible(const GridA& a, const GridB& b) {
    if (a.dims != b.dims) {
        throw GridMismatch("dimension mismatch: " + detail::triple_str(a.dims) +
                           " vs " + detail::triple_str(b.dims));
    }
    for (int axis = 0; axis < 3; ++axis) {
        const double sa = a.spacing[axis];
        const double sb = b.spacing[axis];
        const double scale = std::max(std::abs(sa), std::abs(sb));
        if (std::abs(sa - sb) > kSpacingRelTol * scale) {
            throw GridMismatch("spacing mismatch: " +
                               detail::triple_str(a.spacing) + " vs " +
                               detail::triple_str(b.spacing));
        }
    }
}

/// Rejects pairs whose stored orientation transforms disagree. Grids without
/// any orientation code always pass (computation is index-space anyway).
inline void check_same_orientation(const VoxelGrid& a, const VoxelGrid& b) {
    const Orientation& oa = a.orientation;
    const Orientation& ob = b.orientation;
    if (oa.sform_code <= 0 && ob.sform_code <= 0 && oa.qform_code <= 0 &&
        ob.qform_code <= 0) {
        return;
    }
    auto close = [](float x, float y) {
        const float scale = std::max({std::abs(x), std::abs(y), 1.0f});
        return std::abs(x - y) <= 1e-3f * scale;
    };
    bool same = oa.sform_code == ob.sform_code && oa.qform_code == ob.qform_code;
    for (int r = 0; same && r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
            if (!close(oa.srow[r][c], ob.srow[r][c])) {
                same = false;
                break;
            }
        }
    }
    for (int i = 0; same && i < 3; ++i) {
        same = close(oa.quatern[i], ob.quatern[i]) &&
               close(oa.qoffset[i], ob.qoffset[i]);
    }
    if (!same) {
        throw GridMismatch(
            "orientation mismatch: inputs carry different affine transforms; "
            "reorient upstream, this tool does not resample");
    }
}

/// Loads a mask from an arbitrary scalar grid: any voxel > 0.5 is foreground.
/// Tolerates float-encoded masks.
inline BinaryMask binarize(const VoxelGrid& g) {
    BinaryMask m = make_mask(g.dims, g.spacing);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
        m.voxels[i] = g.data[i] > 0.5f ? 1 : 0;
    }
    return m;
}

/// Mask as a writable grid (uint8 payload).
inline VoxelGrid to_grid(const BinaryMask& m) {
    VoxelGrid g;
    g.dims = m.dims;
    g.spacing = m.spacing;
    g.dtype = Datatype::Uint8;
    g.data.resize(m.voxels.size());
    for (std::size_t i = 0; i < m.voxels.size(); ++i) {
        g.data[i] = static_cast<float>(m.voxels[i]);
    }
    return g;
}

} // namespace pabench
