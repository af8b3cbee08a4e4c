#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "pabench/parallel.hpp"
#include "pabench/voxel_grid.hpp"

namespace pabench {

namespace edt_detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// One 1-D pass of the lower-envelope-of-parabolas transform.
///
/// Input f[j] is the squared distance attached to the parabola rooted at
/// physical position j*step; output d[i] = min_j f[j] + ((i-j)*step)^2.
/// Infinite entries are skipped, which is what carries "no foreground in
/// this row" through the separable passes.
struct EnvelopeScratch {
    std::vector<double> f;
    std::vector<int> v;
    std::vector<double> z;

    void resize(std::size_t n) {
        f.resize(n);
        v.resize(n);
        z.resize(n + 1);
    }
};

inline void envelope_pass(const double* f, double* d, int n, double step,
                          EnvelopeScratch& s) {
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        const double xq = q * step;
        const double fq_plus = f[q] + xq * xq;
        if (k < 0) {
            k = 0;
            s.v[0] = q;
            s.z[0] = -kInf;
            s.z[1] = kInf;
            continue;
        }
        double intersect;
        for (;;) {
            const int p = s.v[k];
            const double xp = p * step;
            intersect = (fq_plus - (f[p] + xp * xp)) / (2.0 * xq - 2.0 * xp);
            if (intersect > s.z[k]) break;
            if (--k < 0) break;
        }
        ++k;
        s.v[k] = q;
        s.z[k] = intersect;
        s.z[k + 1] = kInf;
    }
    if (k < 0) {
        for (int i = 0; i < n; ++i) d[i] = kInf;
        return;
    }
    int j = 0;
    for (int i = 0; i < n; ++i) {
        const double xi = i * step;
        while (s.z[j + 1] < xi) ++j;
        const double dx = xi - s.v[j] * step;
        d[i] = dx * dx + f[s.v[j]];
    }
}

} // namespace edt_detail

/// Exact squared Euclidean distance transform with anisotropic spacing.
///
/// Each voxel receives the squared distance in mm^2 from its center to the
/// nearest foreground voxel center. Foreground voxels hold 0; a mask with
/// no foreground yields +infinity everywhere. Separable passes, O(N) per
/// axis; rows are independent, so the result is identical for any thread
/// count.
inline std::vector<double> edt_squared(const BinaryMask& mask,
                                       std::array<double, 3> spacing,
                                       unsigned threads = 0) {
    using edt_detail::kInf;
    const int nx = mask.dims[0], ny = mask.dims[1], nz = mask.dims[2];
    const std::size_t total = mask.size();

    std::vector<double> dist(total);
    for (std::size_t i = 0; i < total; ++i) {
        dist[i] = mask.voxels[i] ? 0.0 : kInf;
    }
    if (total == 0) return dist;

    const std::size_t sx = 1;
    const std::size_t sy = static_cast<std::size_t>(nx);
    const std::size_t sz = static_cast<std::size_t>(nx) * ny;

    struct Axis {
        int len;
        double step;
        std::size_t stride;
        std::size_t rows;
        std::size_t row_stride_a;
        std::size_t row_stride_b;
        std::size_t rows_a;
    };
    const Axis axes[3] = {
        {nx, spacing[0], sx, static_cast<std::size_t>(ny) * nz, sy, sz,
         static_cast<std::size_t>(ny)},
        {ny, spacing[1], sy, static_cast<std::size_t>(nx) * nz, sx, sz,
         static_cast<std::size_t>(nx)},
        {nz, spacing[2], sz, static_cast<std::size_t>(nx) * ny, sx, sy,
         static_cast<std::size_t>(nx)},
    };

    for (const Axis& ax : axes) {
        parallel_for(ax.rows, threads, [&](std::size_t row) {
            thread_local edt_detail::EnvelopeScratch scratch;
            thread_local std::vector<double> line_in, line_out;
            scratch.resize(static_cast<std::size_t>(ax.len));
            line_in.resize(static_cast<std::size_t>(ax.len));
            line_out.resize(static_cast<std::size_t>(ax.len));

            const std::size_t a = row % ax.rows_a;
            const std::size_t b = row / ax.rows_a;
            const std::size_t base = a * ax.row_stride_a + b * ax.row_stride_b;
            for (int i = 0; i < ax.len; ++i) {
                line_in[static_cast<std::size_t>(i)] = dist[base + i * ax.stride];
            }
            edt_detail::envelope_pass(line_in.data(), line_out.data(), ax.len,
                                      ax.step, scratch);
            for (int i = 0; i < ax.len; ++i) {
                dist[base + i * ax.stride] = line_out[static_cast<std::size_t>(i)];
            }
        });
    }
    return dist;
}

/// Euclidean distances in mm (square root of edt_squared).
inline std::vector<double> edt(const BinaryMask& mask,
                               std::array<double, 3> spacing,
                               unsigned threads = 0) {
    std::vector<double> d = edt_squared(mask, spacing, threads);
    for (auto& v : d) v = std::sqrt(v);
    return d;
}

/// Squared transform in index space (unit spacing), used by ball morphology.
inline std::vector<double> edt_squared_index(const BinaryMask& mask,
                                             unsigned threads = 0) {
    return edt_squared(mask, {1.0, 1.0, 1.0}, threads);
}

} // namespace pabench
