#include <catch_amalgamated.hpp>

#include <algorithm>
#include <map>

#include "pabench/metrics.hpp"
#include "pabench/phantom.hpp"
#include "pabench/regions.hpp"
#include "pabench/rng.hpp"
#include "support/oracles.hpp"

using namespace pabench;

TEST_CASE("two disjoint cubes label as two components, larger first") {
    BinaryMask m = make_mask({12, 6, 6}, {1, 1, 1});
    for (int k = 0; k < 3; ++k) {
        for (int j = 0; j < 3; ++j) {
            for (int i = 0; i < 3; ++i) m.at(i, j, k) = 1; // 27 voxels
        }
    }
    for (int k = 0; k < 2; ++k) {
        for (int j = 0; j < 2; ++j) {
            for (int i = 9; i < 11; ++i) m.at(i, j, k) = 1; // 8 voxels
        }
    }
    const ComponentLabels cc = connected_components(m, 26);
    CHECK(cc.count == 2);
    REQUIRE(cc.sizes.size() == 2);
    CHECK(cc.sizes[0] == 27);
    CHECK(cc.sizes[1] == 8);
    CHECK(cc.labels[m.index(0, 0, 0)] == 1);
    CHECK(cc.labels[m.index(9, 0, 0)] == 2);
}

TEST_CASE("corner-touching voxels merge under 26 but not 6 connectivity") {
    BinaryMask m = make_mask({4, 4, 4}, {1, 1, 1});
    m.at(1, 1, 1) = 1;
    m.at(2, 2, 2) = 1;
    CHECK(connected_components(m, 6).count == 2);
    CHECK(connected_components(m, 26).count == 1);
}

TEST_CASE("empty mask has zero components") {
    const BinaryMask m = make_mask({5, 5, 5}, {1, 1, 1});
    CHECK(connected_components(m, 6).count == 0);
    CHECK(connected_components(m, 26).count == 0);
}

TEST_CASE("component sizes survive axis transposition") {
    SplitMix64 rng(202);
    const BinaryMask m =
        oracle::sparse_mask(rng, {9, 7, 5}, {1, 1, 1}, 0.25, true);
    BinaryMask t = make_mask({5, 7, 9}, {1, 1, 1}); // swap x and z
    for (int k = 0; k < 5; ++k) {
        for (int j = 0; j < 7; ++j) {
            for (int i = 0; i < 9; ++i) t.at(k, j, i) = m.at(i, j, k);
        }
    }
    for (const int conn : {6, 26}) {
        auto a = connected_components(m, conn).sizes;
        auto b = connected_components(t, conn).sizes;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
    }
}

TEST_CASE("labels tile the foreground exactly") {
    SplitMix64 rng(7);
    const BinaryMask m =
        oracle::sparse_mask(rng, {10, 10, 10}, {1, 1, 1}, 0.3, true);
    const ComponentLabels cc = connected_components(m, 6);
    std::map<std::int32_t, std::uint64_t> counted;
    for (std::size_t i = 0; i < m.voxels.size(); ++i) {
        CHECK((cc.labels[i] > 0) == (m.voxels[i] == 1));
        if (cc.labels[i] > 0) ++counted[cc.labels[i]];
    }
    CHECK(counted.size() == static_cast<std::size_t>(cc.count));
    for (const auto& [label, size] : counted) {
        CHECK(cc.sizes[static_cast<std::size_t>(label - 1)] == size);
    }
}

TEST_CASE("split_levels with an all-ones lung sends everything to branch") {
    SplitMix64 rng(3);
    const BinaryMask pa =
        oracle::sparse_mask(rng, {8, 8, 8}, {1, 1, 1}, 0.2, true);
    BinaryMask lung = make_mask({8, 8, 8}, {1, 1, 1});
    for (auto& v : lung.voxels) v = 1;
    const RegionSplit s = split_levels(pa, lung);
    CHECK(s.branch.voxels == pa.voxels);
    CHECK(foreground_count(s.main) == 0);
}

TEST_CASE("split_levels with an empty lung sends everything to main") {
    SplitMix64 rng(4);
    const BinaryMask pa =
        oracle::sparse_mask(rng, {8, 8, 8}, {1, 1, 1}, 0.2, true);
    const BinaryMask lung = make_mask({8, 8, 8}, {1, 1, 1});
    const RegionSplit s = split_levels(pa, lung);
    CHECK(s.main.voxels == pa.voxels);
    CHECK(foreground_count(s.branch) == 0);
}

TEST_CASE("split_levels partitions the PA mask") {
    SplitMix64 rng(88);
    for (int trial = 0; trial < 10; ++trial) {
        const BinaryMask pa =
            oracle::sparse_mask(rng, {10, 9, 8}, {1, 1, 1}, 0.3, false);
        const BinaryMask lung =
            oracle::blob_mask(rng, {10, 9, 8}, {1, 1, 1}, 2);
        const RegionSplit s = split_levels(pa, lung);
        CHECK(foreground_count(s.main) + foreground_count(s.branch) ==
              foreground_count(pa));
        for (std::size_t i = 0; i < pa.voxels.size(); ++i) {
            CHECK((s.main.voxels[i] & s.branch.voxels[i]) == 0);
            CHECK((s.main.voxels[i] | s.branch.voxels[i]) == pa.voxels[i]);
            if (s.branch.voxels[i]) CHECK(lung.voxels[i] == 1);
            if (s.main.voxels[i]) CHECK(lung.voxels[i] == 0);
        }
    }
}

TEST_CASE("split_levels rejects incompatible grids") {
    const BinaryMask pa = make_mask({4, 4, 4}, {1, 1, 1});
    const BinaryMask lung = make_mask({4, 4, 5}, {1, 1, 1});
    CHECK_THROWS_AS(split_levels(pa, lung), GridMismatch);
}

TEST_CASE("extract_lungs recovers the phantom ellipsoids") {
    PhantomSpec spec = PhantomSpec::with_defaults({96, 96, 96}, {0.8, 0.8, 1.1}, 61);
    spec.depth = 4;
    const TubeTree tree = generate_tree(spec);
    const VoxelGrid ct = synthesize_ct(spec, tree);
    const BinaryMask extracted = extract_lungs(ct);
    const BinaryMask truth = lung_mask(spec);
    CHECK(dice(extracted, truth) >= 0.95);
}

TEST_CASE("extract_lungs fills vessels thinner than the closing ball") {
    PhantomSpec spec = PhantomSpec::with_defaults({96, 96, 96}, {0.7, 0.7, 1.0}, 33);
    spec.depth = 3;
    spec.root_radius = 2.0; // all intrapulmonary tubes well under the ball
    spec.noise_sigma = 0.0;
    const TubeTree tree = generate_tree(spec);
    const VoxelGrid ct = synthesize_ct(spec, tree);
    const BinaryMask extracted = extract_lungs(ct, -320.0, 3);
    const BinaryMask branch = rasterize(tree, spec.dims, spec.spacing,
                                        RasterLevel::Branch);
    const BinaryMask lungs = lung_mask(spec);
    // vessel voxels comfortably inside the lung must be inside the closed mask
    std::size_t checked = 0, inside = 0;
    for (int k = 1; k + 1 < spec.dims[2]; ++k) {
        for (int j = 1; j + 1 < spec.dims[1]; ++j) {
            for (int i = 1; i + 1 < spec.dims[0]; ++i) {
                if (!branch.at(i, j, k)) continue;
                const Vec3 p{i * spec.spacing[0], j * spec.spacing[1],
                             k * spec.spacing[2]};
                const bool deep = spec.lungs[0].normalized_radius(p) < 0.85 ||
                                  spec.lungs[1].normalized_radius(p) < 0.85;
                if (!deep) continue;
                ++checked;
                inside += extracted.at(i, j, k);
                (void)lungs;
            }
        }
    }
    REQUIRE(checked > 0);
    CHECK(inside == checked);
}

TEST_CASE("uniform soft-tissue volume has no lung to find") {
    VoxelGrid ct;
    ct.dims = {24, 24, 24};
    ct.spacing = {1, 1, 1};
    ct.data.assign(ct.size(), 40.0f);
    CHECK_THROWS_AS(extract_lungs(ct), NoLungFound);
}

TEST_CASE("boundary-touching air is never kept") {
    // a volume that is all air except a small dense shell with a cavity:
    // outside air touches the boundary and must be discarded
    VoxelGrid ct;
    ct.dims = {24, 24, 24};
    ct.spacing = {1, 1, 1};
    ct.data.assign(ct.size(), -1000.0f);
    auto at = [&](int i, int j, int k) -> float& {
        return ct.data[ct.index(i, j, k)];
    };
    for (int k = 4; k < 20; ++k) {
        for (int j = 4; j < 20; ++j) {
            for (int i = 4; i < 20; ++i) at(i, j, k) = 40.0f;
        }
    }
    for (int k = 9; k < 15; ++k) {
        for (int j = 9; j < 15; ++j) {
            for (int i = 9; i < 15; ++i) at(i, j, k) = -800.0f;
        }
    }
    const BinaryMask lungs = extract_lungs(ct, -320.0, 0);
    CHECK(foreground_count(lungs) == 6 * 6 * 6);
    CHECK(lungs.at(0, 0, 0) == 0);
    CHECK(lungs.at(10, 10, 10) == 1);
}

TEST_CASE("candidate set grows monotonically with the threshold") {
    PhantomSpec spec = PhantomSpec::with_defaults({64, 64, 64}, {0.7, 0.7, 1.0}, 9);
    spec.depth = 3;
    spec.noise_sigma = 0.0;
    const TubeTree tree = generate_tree(spec);
    const VoxelGrid ct = synthesize_ct(spec, tree);
    BinaryMask prev = lung_candidates(ct, -900.0);
    for (const double thr : {-600.0, -320.0, -100.0}) {
        const BinaryMask cur = lung_candidates(ct, thr);
        for (std::size_t i = 0; i < cur.voxels.size(); ++i) {
            CHECK(prev.voxels[i] <= cur.voxels[i]);
        }
        prev = cur;
    }
}

TEST_CASE("at most two components are kept") {
    // three interior air pockets; only the two largest may be kept
    VoxelGrid ct;
    ct.dims = {40, 20, 20};
    ct.spacing = {1, 1, 1};
    ct.data.assign(ct.size(), 40.0f);
    auto fill = [&](int i0, int n) {
        for (int k = 8; k < 8 + n; ++k) {
            for (int j = 8; j < 8 + n; ++j) {
                for (int i = i0; i < i0 + n; ++i) {
                    ct.data[ct.index(i, j, k)] = -800.0f;
                }
            }
        }
    };
    fill(2, 6);  // 216
    fill(14, 5); // 125
    fill(26, 3); // 27
    const BinaryMask kept = extract_lungs(ct, -320.0, 0);
    const ComponentLabels cc = connected_components(kept, 26);
    CHECK(cc.count == 2);
    CHECK(foreground_count(kept) == 216 + 125);
}
