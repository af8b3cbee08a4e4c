#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "pabench/morphology.hpp"
#include "pabench/voxel_grid.hpp"

namespace pabench {

/// Thresholding found no interior low-intensity component to call a lung.
class NoLungFound : public Error {
public:
    using Error::Error;
};

/// Labeled connected components. Labels are 1..count in decreasing size
/// order (ties broken by first raster occurrence); 0 is background.
struct ComponentLabels {
    std::vector<std::int32_t> labels;
    std::vector<std::uint64_t> sizes; // sizes[l-1] is the size of label l
    int count = 0;
};

namespace region_detail {

class UnionFind {
public:
    std::int32_t make() {
        parent_.push_back(static_cast<std::int32_t>(parent_.size()));
        return parent_.back();
    }
    std::int32_t find(std::int32_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void merge(std::int32_t a, std::int32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::int32_t> parent_;
};

} // namespace region_detail

/// Two-pass union-find labeling under 6- or 26-adjacency.
inline ComponentLabels connected_components(const BinaryMask& mask,
                                            int connectivity = 26) {
    if (connectivity != 6 && connectivity != 26) {
        throw Error("connectivity must be 6 or 26");
    }
    const int nx = mask.dims[0], ny = mask.dims[1], nz = mask.dims[2];
    ComponentLabels out;
    out.labels.assign(mask.size(), 0);

    // Offsets to already-scanned neighbors in raster order.
    std::vector<std::array<int, 3>> prev;
    if (connectivity == 6) {
        prev = {{-1, 0, 0}, {0, -1, 0}, {0, 0, -1}};
    } else {
        for (int dz = -1; dz <= 0; ++dz) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dz < 0 || (dz == 0 && dy < 0) ||
                        (dz == 0 && dy == 0 && dx < 0)) {
                        prev.push_back({dx, dy, dz});
                    }
                }
            }
        }
    }

    region_detail::UnionFind uf;
    std::vector<std::int32_t> provisional(mask.size(), -1);
    std::size_t idx = 0;
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i, ++idx) {
                if (!mask.voxels[idx]) continue;
                std::int32_t label = -1;
                for (const auto& d : prev) {
                    const int pi = i + d[0], pj = j + d[1], pk = k + d[2];
                    if (!mask.in_bounds(pi, pj, pk)) continue;
                    const std::int32_t n = provisional[mask.index(pi, pj, pk)];
                    if (n < 0) continue;
                    if (label < 0) {
                        label = uf.find(n);
                    } else {
                        uf.merge(label, n);
                        label = uf.find(label);
                    }
                }
                if (label < 0) label = uf.make();
                provisional[idx] = label;
            }
        }
    }

    // Resolve roots, measure sizes, note first occurrence for tie order.
    std::vector<std::int32_t> root_of;
    std::vector<std::uint64_t> size_of;
    std::vector<std::int32_t> compact; // provisional root -> dense id
    std::vector<std::size_t> first_seen;
    for (std::size_t v = 0; v < provisional.size(); ++v) {
        if (provisional[v] < 0) continue;
        const std::int32_t root = uf.find(provisional[v]);
        if (static_cast<std::size_t>(root) >= compact.size()) {
            compact.resize(root + 1, -1);
        }
        if (compact[root] < 0) {
            compact[root] = static_cast<std::int32_t>(size_of.size());
            size_of.push_back(0);
            first_seen.push_back(v);
        }
        provisional[v] = compact[root];
        ++size_of[provisional[v]];
    }

    std::vector<std::int32_t> order(size_of.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
        if (size_of[a] != size_of[b]) return size_of[a] > size_of[b];
        return first_seen[a] < first_seen[b];
    });
    std::vector<std::int32_t> rank(size_of.size());
    out.sizes.resize(size_of.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        rank[order[r]] = static_cast<std::int32_t>(r + 1);
        out.sizes[r] = size_of[order[r]];
    }
    for (std::size_t v = 0; v < provisional.size(); ++v) {
        if (provisional[v] >= 0) out.labels[v] = rank[provisional[v]];
    }
    out.count = static_cast<int>(size_of.size());
    return out;
}

/// Pre-closing lung candidate voxels: sub-threshold, 26-connected components
/// not touching the volume boundary, largest components up to 95% cumulative
/// volume, at most two.
inline BinaryMask lung_candidates(const VoxelGrid& ct, double threshold_hu) {
    BinaryMask below = make_mask(ct.dims, ct.spacing);
    for (std::size_t i = 0; i < ct.data.size(); ++i) {
        below.voxels[i] = ct.data[i] < threshold_hu ? 1 : 0;
    }
    const ComponentLabels cc = connected_components(below, 26);

    std::vector<char> touches(cc.count + 1, 0);
    const int nx = ct.dims[0], ny = ct.dims[1], nz = ct.dims[2];
    std::size_t idx = 0;
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i, ++idx) {
                const std::int32_t l = cc.labels[idx];
                if (l == 0) continue;
                if (i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 ||
                    k == nz - 1) {
                    touches[l] = 1;
                }
            }
        }
    }

    std::uint64_t interior_total = 0;
    std::vector<std::int32_t> interior; // labels, already size-ordered
    for (std::int32_t l = 1; l <= cc.count; ++l) {
        if (!touches[l]) {
            interior.push_back(l);
            interior_total += cc.sizes[l - 1];
        }
    }

    std::vector<char> keep(cc.count + 1, 0);
    std::uint64_t kept = 0;
    int kept_n = 0;
    for (const std::int32_t l : interior) {
        if (kept_n == 2) break;
        keep[l] = 1;
        kept += cc.sizes[l - 1];
        ++kept_n;
        if (kept * 100 >= interior_total * 95) break;
    }

    BinaryMask out = make_mask(ct.dims, ct.spacing);
    for (std::size_t v = 0; v < out.voxels.size(); ++v) {
        out.voxels[v] = cc.labels[v] > 0 && keep[cc.labels[v]] ? 1 : 0;
    }
    return out;
}

/// Lung segmentation by thresholding plus connected-component analysis,
/// finished with a ball closing that fills intrapulmonary vessel holes.
inline BinaryMask extract_lungs(const VoxelGrid& ct,
                                double threshold_hu = -320.0,
                                int closing_radius_voxels = 3,
                                unsigned threads = 0) {
    BinaryMask cand = lung_candidates(ct, threshold_hu);
    if (foreground_count(cand) == 0) {
        throw NoLungFound("no lung found: no interior component below " +
                          std::to_string(threshold_hu) + " HU");
    }
    if (closing_radius_voxels > 0) {
        cand = close_ball(cand, closing_radius_voxels, threads);
    }
    return cand;
}

/// A PA mask split into the two scored levels.
/// Invariants: main and branch partition the input mask; branch lies inside
/// the lung mask and main outside it.
struct RegionSplit {
    BinaryMask main;
    BinaryMask branch;
    BinaryMask lung;
};

/// branch = pa AND lung, main = pa AND NOT lung.
inline RegionSplit split_levels(const BinaryMask& pa, const BinaryMask& lung) {
    check_compatible(pa, lung);
    RegionSplit split;
    split.main = make_mask(pa.dims, pa.spacing);
    split.branch = make_mask(pa.dims, pa.spacing);
    split.lung = lung;
    for (std::size_t i = 0; i < pa.voxels.size(); ++i) {
        if (!pa.voxels[i]) continue;
        if (lung.voxels[i]) {
            split.branch.voxels[i] = 1;
        } else {
            split.main.voxels[i] = 1;
        }
    }
    return split;
}

} // namespace pabench
