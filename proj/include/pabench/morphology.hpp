#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "pabench/edt.hpp"
#include "pabench/voxel_grid.hpp"

namespace pabench {

/// One dilation step with the 6-connected cross. Out-of-volume neighbors
/// are background (zero padding).
inline BinaryMask dilate_cross_once(const BinaryMask& m) {
    BinaryMask out = m;
    const int nx = m.dims[0], ny = m.dims[1], nz = m.dims[2];
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                if (m.at(i, j, k)) continue;
                const bool hit = (i > 0 && m.at(i - 1, j, k)) ||
                                 (i + 1 < nx && m.at(i + 1, j, k)) ||
                                 (j > 0 && m.at(i, j - 1, k)) ||
                                 (j + 1 < ny && m.at(i, j + 1, k)) ||
                                 (k > 0 && m.at(i, j, k - 1)) ||
                                 (k + 1 < nz && m.at(i, j, k + 1));
                if (hit) out.at(i, j, k) = 1;
            }
        }
    }
    return out;
}

inline BinaryMask erode_cross_once(const BinaryMask& m) {
    BinaryMask out = m;
    const int nx = m.dims[0], ny = m.dims[1], nz = m.dims[2];
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                if (!m.at(i, j, k)) continue;
                const bool keep = (i > 0 && m.at(i - 1, j, k)) &&
                                  (i + 1 < nx && m.at(i + 1, j, k)) &&
                                  (j > 0 && m.at(i, j - 1, k)) &&
                                  (j + 1 < ny && m.at(i, j + 1, k)) &&
                                  (k > 0 && m.at(i, j, k - 1)) &&
                                  (k + 1 < nz && m.at(i, j, k + 1));
                if (!keep) out.at(i, j, k) = 0;
            }
        }
    }
    return out;
}

/// Binary dilation with the 6-connected cross applied k times.
inline BinaryMask dilate_cross(BinaryMask m, int k) {
    for (int step = 0; step < k; ++step) m = dilate_cross_once(m);
    return m;
}

/// Binary erosion with the 6-connected cross applied k times.
inline BinaryMask erode_cross(BinaryMask m, int k) {
    for (int step = 0; step < k; ++step) m = erode_cross_once(m);
    return m;
}

inline BinaryMask complement(const BinaryMask& m) {
    BinaryMask out = m;
    for (auto& v : out.voxels) v = v ? 0 : 1;
    return out;
}

/// Dilation by a discrete Euclidean ball of the given index-space radius,
/// computed by thresholding the exact distance transform.
inline BinaryMask dilate_ball(const BinaryMask& m, double radius_voxels,
                              unsigned threads = 0) {
    const double r2 = radius_voxels * radius_voxels;
    const std::vector<double> d2 = edt_squared_index(m, threads);
    BinaryMask out = m;
    for (std::size_t i = 0; i < d2.size(); ++i) {
        out.voxels[i] = d2[i] <= r2 ? 1 : 0;
    }
    return out;
}

/// Erosion by a discrete Euclidean ball. Out-of-volume counts as background,
/// so foreground within the radius of the volume edge erodes as well.
inline BinaryMask erode_ball(const BinaryMask& m, double radius_voxels,
                             unsigned threads = 0) {
    const double r2 = radius_voxels * radius_voxels;
    const std::vector<double> d2 = edt_squared_index(complement(m), threads);
    BinaryMask out = m;
    const int nx = m.dims[0], ny = m.dims[1], nz = m.dims[2];
    std::size_t idx = 0;
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i, ++idx) {
                if (!m.voxels[idx]) {
                    out.voxels[idx] = 0;
                    continue;
                }
                // squared distance to the nearest out-of-volume voxel center
                const int ex = std::min(i + 1, nx - i);
                const int ey = std::min(j + 1, ny - j);
                const int ez = std::min(k + 1, nz - k);
                const int edge = std::min({ex, ey, ez});
                const double edge2 = static_cast<double>(edge) * edge;
                out.voxels[idx] = (d2[idx] > r2 && edge2 > r2) ? 1 : 0;
            }
        }
    }
    return out;
}

/// Morphological closing with a discrete Euclidean ball.
inline BinaryMask close_ball(const BinaryMask& m, double radius_voxels,
                             unsigned threads = 0) {
    return erode_ball(dilate_ball(m, radius_voxels, threads), radius_voxels,
                      threads);
}

} // namespace pabench
