#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "pabench/morphology.hpp"
#include "pabench/rng.hpp"
#include "pabench/voxel_grid.hpp"

namespace pabench {

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalize(Vec3 a) {
    const double n = norm(a);
    return n > 0 ? a * (1.0 / n) : Vec3{0, 0, 1};
}

struct Ellipsoid {
    Vec3 center;
    Vec3 semi;

    /// 0 at the center, 1 on the surface.
    double normalized_radius(Vec3 p) const {
        const double dx = (p.x - center.x) / semi.x;
        const double dy = (p.y - center.y) / semi.y;
        const double dz = (p.z - center.z) / semi.z;
        return std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    bool contains(Vec3 p) const { return normalized_radius(p) <= 1.0; }
    double min_semi() const { return std::min({semi.x, semi.y, semi.z}); }
};

enum class SegmentLevel : std::uint8_t { Main, Branch };

/// One straight tube. A segment's start coincides with its parent's end.
struct TubeSegment {
    Vec3 start;
    Vec3 end;
    double radius = 0;
    int parent = -1; // -1 for the root
    SegmentLevel level = SegmentLevel::Main;
};

struct TubeTree {
    std::vector<TubeSegment> segments;

    void validate() const {
        int roots = 0;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            const TubeSegment& s = segments[i];
            if (!(s.radius > 0)) throw Error("tube radius must be positive");
            if (s.parent < 0) {
                ++roots;
                continue;
            }
            if (static_cast<std::size_t>(s.parent) >= i) {
                throw Error("parent indices must strictly decrease");
            }
            const TubeSegment& p = segments[static_cast<std::size_t>(s.parent)];
            const Vec3 gap = s.start - p.end;
            if (dot(gap, gap) > 1e-12) {
                throw Error("segment start must equal parent end");
            }
            if (s.radius > p.radius + 1e-12) {
                throw Error("radii must be non-increasing along paths");
            }
        }
        if (!segments.empty() && roots != 1) {
            throw Error("tree must have exactly one root");
        }
    }
};

/// Full description of one synthetic thorax volume. Everything downstream
/// is a pure function of this struct, so a (spec, seed) pair regenerates
/// bit-identical fixtures.
struct PhantomSpec {
    std::array<int, 3> dims{128, 128, 128};
    std::array<double, 3> spacing{0.7, 0.7, 1.0};
    Ellipsoid lungs[2];
    Ellipsoid body;
    double root_radius = 4.0;
    int depth = 7;
    double radius_decay = 0.7937005259840998; // 2^(-1/3), Murray's law
    double branch_length = 10.0;              // first intrapulmonary generation, mm
    double branch_length_scale = 0.85;        // per generation
    double noise_sigma = 20.0;
    std::uint64_t seed = 1;

    std::array<double, 3> extent() const {
        return {(dims[0] - 1) * spacing[0], (dims[1] - 1) * spacing[1],
                (dims[2] - 1) * spacing[2]};
    }

    void validate() const {
        if (depth < 1) throw Error("phantom depth must be >= 1");
        if (!(radius_decay > 0.0 && radius_decay < 1.0)) {
            throw Error("radius decay must lie in (0,1)");
        }
        if (!(root_radius > 0.0) || !(branch_length > 0.0) ||
            !(branch_length_scale > 0.0) || noise_sigma < 0.0) {
            throw Error("phantom geometry parameters must be positive");
        }
        for (int a = 0; a < 3; ++a) {
            if (dims[a] < 1 || !(spacing[a] > 0.0)) {
                throw Error("phantom grid must have positive dims and spacing");
            }
        }
        const auto ext = extent();
        for (const Ellipsoid& lung : lungs) {
            if (!(lung.semi.x > 0 && lung.semi.y > 0 && lung.semi.z > 0)) {
                throw Error("lung semi-axes must be positive");
            }
            const double lo[3] = {lung.center.x - lung.semi.x,
                                  lung.center.y - lung.semi.y,
                                  lung.center.z - lung.semi.z};
            const double hi[3] = {lung.center.x + lung.semi.x,
                                  lung.center.y + lung.semi.y,
                                  lung.center.z + lung.semi.z};
            for (int a = 0; a < 3; ++a) {
                if (lo[a] < 0.0 || hi[a] > ext[a]) {
                    throw Error("lung ellipsoid must lie inside the grid bounds");
                }
            }
        }
    }

    /// Thorax-like geometry scaled to the grid: two lateral lungs inside a
    /// soft-tissue body ellipsoid, trunk radius proportional to size.
    static PhantomSpec with_defaults(std::array<int, 3> dims,
                                     std::array<double, 3> spacing,
                                     std::uint64_t seed) {
        PhantomSpec s;
        s.dims = dims;
        s.spacing = spacing;
        s.seed = seed;
        const auto ext = s.extent();
        const Vec3 c{ext[0] / 2, ext[1] / 2, ext[2] / 2};
        for (int side = 0; side < 2; ++side) {
            const double dir = side == 0 ? -1.0 : 1.0;
            s.lungs[side].center = {c.x + dir * 0.25 * ext[0], c.y, c.z};
            s.lungs[side].semi = {0.17 * ext[0], 0.27 * ext[1], 0.33 * ext[2]};
        }
        s.body.center = c;
        s.body.semi = {0.47 * ext[0], 0.47 * ext[1], 0.48 * ext[2]};
        s.root_radius = 0.045 * std::min(ext[0], ext[1]);
        s.branch_length = 0.65 * s.lungs[0].min_semi();
        return s;
    }
};

namespace phantom_detail {

inline void orthonormal_frame(Vec3 d, Vec3& u, Vec3& v) {
    const Vec3 h = std::abs(d.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    u = normalize(cross(d, h));
    v = cross(d, u);
}

inline Vec3 cone_direction(Vec3 axis, double theta, double phi) {
    Vec3 u, v;
    orthonormal_frame(axis, u, v);
    return axis * std::cos(theta) +
           (u * std::cos(phi) + v * std::sin(phi)) * std::sin(theta);
}

inline double azimuth_of(Vec3 axis, Vec3 target) {
    Vec3 u, v;
    orthonormal_frame(axis, u, v);
    return std::atan2(dot(target, v), dot(target, u));
}

/// Smallest positive ray parameter where the ray enters the ellipsoid,
/// or nullopt when it misses.
inline std::optional<double> ray_entry(Vec3 origin, Vec3 dir,
                                       const Ellipsoid& e) {
    const Vec3 s{(origin.x - e.center.x) / e.semi.x,
                 (origin.y - e.center.y) / e.semi.y,
                 (origin.z - e.center.z) / e.semi.z};
    const Vec3 d{dir.x / e.semi.x, dir.y / e.semi.y, dir.z / e.semi.z};
    const double a = dot(d, d);
    const double b = 2.0 * dot(s, d);
    const double c = dot(s, s) - 1.0;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0 || a <= 0.0) return std::nullopt;
    const double t = (-b - std::sqrt(disc)) / (2.0 * a);
    if (t <= 0.0) return std::nullopt;
    return t;
}

inline constexpr double kDegree = 3.14159265358979323846 / 180.0;

} // namespace phantom_detail

/// Deterministic bifurcating tube tree: the trunk rises between the lungs,
/// one child per side enters its lung and ends on the lung surface, and all
/// deeper generations branch inside the lungs. Branching angles are drawn
/// from [20, 60] degrees; radii shrink by the decay factor per generation.
/// Segment level tags come from the midpoint test against the lung
/// ellipsoids.
inline TubeTree generate_tree(const PhantomSpec& spec) {
    using namespace phantom_detail;
    spec.validate();
    SplitMix64 rng(spec.seed);

    const auto ext = spec.extent();
    const Vec3 c{ext[0] / 2, ext[1] / 2, ext[2] / 2};

    TubeTree tree;
    tree.segments.reserve((std::size_t{2} << spec.depth) - 1);

    TubeSegment root;
    root.start = {c.x, c.y, c.z - 0.28 * ext[2]};
    root.end = {c.x, c.y, c.z - 0.10 * ext[2]};
    root.radius = spec.root_radius;
    root.parent = -1;
    root.level = SegmentLevel::Main;
    tree.segments.push_back(root);

    auto midpoint_level = [&](Vec3 a, Vec3 b) {
        const Vec3 mid = (a + b) * 0.5;
        return (spec.lungs[0].contains(mid) || spec.lungs[1].contains(mid))
                   ? SegmentLevel::Branch
                   : SegmentLevel::Main;
    };

    struct Node {
        int index;
        int generation;
        int lung;      // which lung this lineage feeds
        double length; // reference length for children
    };
    std::vector<Node> frontier{{0, 0, -1, norm(root.end - root.start)}};

    for (std::size_t f = 0; f < frontier.size(); ++f) {
        const Node node = frontier[f];
        if (node.generation == spec.depth) continue;
        const TubeSegment parent = tree.segments[static_cast<std::size_t>(node.index)];
        const Vec3 axis = normalize(parent.end - parent.start);
        const double child_radius = parent.radius * spec.radius_decay;
        const int child_generation = node.generation + 1;

        double first_phi = 0.0;
        for (int side = 0; side < 2; ++side) {
            const int lung_idx = child_generation == 1 ? side : node.lung;
            const Ellipsoid& lung = spec.lungs[lung_idx];

            Vec3 dir{0, 0, 1};
            double length = 0.0;

            if (child_generation == 1) {
                // Entry segment: aim into this side's lung and stop one
                // radius step short of the surface, so the end cap stays
                // outside while the children's capsules take over inside.
                const double pullback =
                    3.0 * child_radius * (1.0 - spec.radius_decay);
                const Vec3 to_lung = normalize(lung.center - parent.end);
                auto near_normal_entry = [&](Vec3 cand, double t) {
                    // Reject glancing entries: the capsule sidewall would
                    // ride along the surface and smear the level boundary.
                    const Vec3 hit = parent.end + cand * t;
                    const Vec3 n = normalize(
                        {(hit.x - lung.center.x) / (lung.semi.x * lung.semi.x),
                         (hit.y - lung.center.y) / (lung.semi.y * lung.semi.y),
                         (hit.z - lung.center.z) / (lung.semi.z * lung.semi.z)});
                    return dot(cand, n) <= -0.72;
                };
                bool placed = false;
                for (int attempt = 0; attempt < 16 && !placed; ++attempt) {
                    const double theta = rng.uniform(20.0, 60.0) * kDegree;
                    const double phi = azimuth_of(axis, to_lung) +
                                       rng.uniform(-15.0, 15.0) * kDegree;
                    const Vec3 cand = cone_direction(axis, theta, phi);
                    const auto entry = ray_entry(parent.end, cand, lung);
                    if (entry.has_value() && *entry >= 6.0 &&
                        near_normal_entry(cand, *entry)) {
                        dir = cand;
                        length = *entry - pullback;
                        placed = true;
                    }
                }
                if (!placed) {
                    const double want = std::acos(std::clamp(dot(axis, to_lung), -1.0, 1.0));
                    const double theta =
                        std::clamp(want, 20.0 * kDegree, 60.0 * kDegree);
                    dir = cone_direction(axis, theta, azimuth_of(axis, to_lung));
                    const auto entry = ray_entry(parent.end, dir, lung);
                    length = entry.value_or(norm(lung.center - parent.end) * 0.6) -
                             pullback;
                }
                length = std::max(length, 4.0);
            } else {
                // Intrapulmonary segment: keep the endpoint inside the lung
                // with a margin of one tube radius plus a voxel.
                const double margin =
                    1.0 - (child_radius + 1.0) / lung.min_semi();
                double length_try =
                    std::max(3.0, (child_generation == 2
                                       ? spec.branch_length
                                       : node.length * spec.branch_length_scale));
                // The first intrapulmonary generation stays steep so the
                // crossing region is handed over cleanly; deeper ones may
                // fan out across the full sampling range.
                const double theta_hi = child_generation == 2 ? 40.0 : 60.0;
                bool placed = false;
                for (int attempt = 0; attempt < 12 && !placed; ++attempt) {
                    const double theta = rng.uniform(20.0, theta_hi) * kDegree;
                    double phi;
                    if (side == 0) {
                        phi = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
                        first_phi = phi;
                    } else {
                        phi = first_phi + 3.14159265358979323846 +
                              rng.uniform(-0.5, 0.5);
                    }
                    const Vec3 cand = cone_direction(axis, theta, phi);
                    const Vec3 end = parent.end + cand * length_try;
                    if (lung.normalized_radius(end) <= margin) {
                        dir = cand;
                        length = length_try;
                        placed = true;
                    }
                    if ((attempt + 1) % 4 == 0) length_try *= 0.85;
                }
                if (!placed) {
                    const Vec3 to_center = normalize(lung.center - parent.end);
                    const double want =
                        std::acos(std::clamp(dot(axis, to_center), -1.0, 1.0));
                    const double theta =
                        std::clamp(want, 20.0 * kDegree, 60.0 * kDegree);
                    dir = cone_direction(axis, theta, azimuth_of(axis, to_center));
                    length = std::min(length_try,
                                      norm(lung.center - parent.end) * 0.8);
                    length = std::max(length, 3.0);
                }
            }

            TubeSegment child;
            child.start = parent.end;
            child.end = parent.end + dir * length;
            child.radius = child_radius;
            child.parent = node.index;
            child.level = midpoint_level(child.start, child.end);
            tree.segments.push_back(child);
            frontier.push_back({static_cast<int>(tree.segments.size()) - 1,
                                child_generation, lung_idx,
                                child_generation == 1 ? spec.branch_length
                                                      : length});
        }
    }
    return tree;
}

enum class RasterLevel : std::uint8_t { Main, Branch, All };

namespace phantom_detail {

inline double dist2_point_segment(Vec3 p, Vec3 a, Vec3 b) {
    const Vec3 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    const Vec3 q = a + ab * t;
    const Vec3 d = p - q;
    return dot(d, d);
}

} // namespace phantom_detail

/// Capsule rasterization over voxel centers: a voxel is foreground iff its
/// physical center lies within the segment radius of a selected segment's
/// axis. No partial-volume anti-aliasing, so brute-force oracles are exact.
inline BinaryMask rasterize(const TubeTree& tree, std::array<int, 3> dims,
                            std::array<double, 3> spacing,
                            RasterLevel which = RasterLevel::All) {
    tree.validate();
    BinaryMask mask = make_mask(dims, spacing);
    for (const TubeSegment& seg : tree.segments) {
        if (which == RasterLevel::Main && seg.level != SegmentLevel::Main) continue;
        if (which == RasterLevel::Branch && seg.level != SegmentLevel::Branch) continue;

        int lo[3], hi[3];
        const double mins[3] = {std::min(seg.start.x, seg.end.x) - seg.radius,
                                std::min(seg.start.y, seg.end.y) - seg.radius,
                                std::min(seg.start.z, seg.end.z) - seg.radius};
        const double maxs[3] = {std::max(seg.start.x, seg.end.x) + seg.radius,
                                std::max(seg.start.y, seg.end.y) + seg.radius,
                                std::max(seg.start.z, seg.end.z) + seg.radius};
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::max(0, static_cast<int>(std::floor(mins[a] / spacing[a])) - 1);
            hi[a] = std::min(dims[a] - 1,
                             static_cast<int>(std::ceil(maxs[a] / spacing[a])) + 1);
        }
        const double r2 = seg.radius * seg.radius;
        for (int k = lo[2]; k <= hi[2]; ++k) {
            for (int j = lo[1]; j <= hi[1]; ++j) {
                for (int i = lo[0]; i <= hi[0]; ++i) {
                    const Vec3 p{i * spacing[0], j * spacing[1], k * spacing[2]};
                    if (phantom_detail::dist2_point_segment(p, seg.start, seg.end) <= r2) {
                        mask.at(i, j, k) = 1;
                    }
                }
            }
        }
    }
    return mask;
}

/// Voxelization of the two constructed lung ellipsoids — the phantom's
/// exact lung ground truth.
inline BinaryMask lung_mask(const PhantomSpec& spec) {
    spec.validate();
    BinaryMask m = make_mask(spec.dims, spec.spacing);
    std::size_t idx = 0;
    for (int k = 0; k < spec.dims[2]; ++k) {
        for (int j = 0; j < spec.dims[1]; ++j) {
            for (int i = 0; i < spec.dims[0]; ++i, ++idx) {
                const Vec3 p{i * spec.spacing[0], j * spec.spacing[1],
                             k * spec.spacing[2]};
                if (spec.lungs[0].contains(p) || spec.lungs[1].contains(p)) {
                    m.voxels[idx] = 1;
                }
            }
        }
    }
    return m;
}

/// CT-like intensity volume in Hounsfield-style units: air -1000, body
/// +40, lungs -800, vessels +300, plus seeded zero-mean Gaussian noise.
inline VoxelGrid synthesize_ct(const PhantomSpec& spec, const TubeTree& tree) {
    spec.validate();
    VoxelGrid ct;
    ct.dims = spec.dims;
    ct.spacing = spec.spacing;
    ct.dtype = Datatype::Float32;
    ct.data.assign(ct.size(), -1000.0f);

    std::size_t idx = 0;
    for (int k = 0; k < spec.dims[2]; ++k) {
        for (int j = 0; j < spec.dims[1]; ++j) {
            for (int i = 0; i < spec.dims[0]; ++i, ++idx) {
                const Vec3 p{i * spec.spacing[0], j * spec.spacing[1],
                             k * spec.spacing[2]};
                if (spec.body.contains(p)) {
                    ct.data[idx] = spec.lungs[0].contains(p) ||
                                           spec.lungs[1].contains(p)
                                       ? -800.0f
                                       : 40.0f;
                }
            }
        }
    }

    const BinaryMask vessels =
        rasterize(tree, spec.dims, spec.spacing, RasterLevel::All);
    for (std::size_t v = 0; v < vessels.voxels.size(); ++v) {
        if (vessels.voxels[v]) ct.data[v] = 300.0f;
    }

    if (spec.noise_sigma > 0.0) {
        SplitMix64 noise(mix_seed(spec.seed, 0xC70015EULL));
        for (auto& v : ct.data) {
            v += static_cast<float>(spec.noise_sigma * noise.normal());
        }
    }
    return ct;
}

/// Removes every voxel not covered by a segment at or above the radius
/// threshold; on a tree-derived mask this deletes the distal vasculature
/// while leaving parent tubes intact.
inline BinaryMask prune_distal(const BinaryMask& mask, const TubeTree& tree,
                               double radius_threshold_mm) {
    TubeTree kept;
    std::vector<int> remap(tree.segments.size(), -1);
    for (std::size_t i = 0; i < tree.segments.size(); ++i) {
        const TubeSegment& s = tree.segments[i];
        if (s.radius < radius_threshold_mm) continue;
        TubeSegment copy = s;
        if (s.parent >= 0) copy.parent = remap[static_cast<std::size_t>(s.parent)];
        remap[i] = static_cast<int>(kept.segments.size());
        kept.segments.push_back(copy);
    }
    BinaryMask out = make_mask(mask.dims, mask.spacing);
    if (kept.segments.empty()) return out;
    // Radii never grow child-ward, so kept segments always form a prefix
    // tree and the remapped parents stay valid.
    const BinaryMask keep_raster = rasterize(kept, mask.dims, mask.spacing);
    for (std::size_t i = 0; i < mask.voxels.size(); ++i) {
        out.voxels[i] = mask.voxels[i] & keep_raster.voxels[i];
    }
    return out;
}

/// Unions a rasterized ball centered at a physical point.
inline BinaryMask add_blob(const BinaryMask& mask, Vec3 center_mm,
                           double radius_mm) {
    BinaryMask out = mask;
    int lo[3], hi[3];
    const double cs[3] = {center_mm.x, center_mm.y, center_mm.z};
    for (int a = 0; a < 3; ++a) {
        lo[a] = std::max(
            0, static_cast<int>(std::floor((cs[a] - radius_mm) / mask.spacing[a])) - 1);
        hi[a] = std::min(
            mask.dims[a] - 1,
            static_cast<int>(std::ceil((cs[a] + radius_mm) / mask.spacing[a])) + 1);
    }
    const double r2 = radius_mm * radius_mm;
    for (int k = lo[2]; k <= hi[2]; ++k) {
        for (int j = lo[1]; j <= hi[1]; ++j) {
            for (int i = lo[0]; i <= hi[0]; ++i) {
                const double dx = i * mask.spacing[0] - center_mm.x;
                const double dy = j * mask.spacing[1] - center_mm.y;
                const double dz = k * mask.spacing[2] - center_mm.z;
                if (dx * dx + dy * dy + dz * dz <= r2) out.at(i, j, k) = 1;
            }
        }
    }
    return out;
}

/// add_blob with a seeded uniform center inside the volume.
inline BinaryMask add_random_blob(const BinaryMask& mask, double radius_mm,
                                  std::uint64_t seed) {
    SplitMix64 rng(seed);
    const Vec3 center{rng.uniform(0.0, (mask.dims[0] - 1) * mask.spacing[0]),
                      rng.uniform(0.0, (mask.dims[1] - 1) * mask.spacing[1]),
                      rng.uniform(0.0, (mask.dims[2] - 1) * mask.spacing[2])};
    return add_blob(mask, center, radius_mm);
}

/// Shifts the mask by whole voxels, filling with background.
inline BinaryMask translate(const BinaryMask& mask, std::array<int, 3> offset) {
    BinaryMask out = make_mask(mask.dims, mask.spacing);
    for (int k = 0; k < mask.dims[2]; ++k) {
        const int sk = k - offset[2];
        if (sk < 0 || sk >= mask.dims[2]) continue;
        for (int j = 0; j < mask.dims[1]; ++j) {
            const int sj = j - offset[1];
            if (sj < 0 || sj >= mask.dims[1]) continue;
            for (int i = 0; i < mask.dims[0]; ++i) {
                const int si = i - offset[0];
                if (si < 0 || si >= mask.dims[0]) continue;
                out.at(i, j, k) = mask.at(si, sj, sk);
            }
        }
    }
    return out;
}

} // namespace pabench
