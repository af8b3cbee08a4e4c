#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pabench/edt.hpp"
#include "pabench/regions.hpp"
#include "pabench/voxel_grid.hpp"

namespace pabench {

/// Nearest-rank percentile: index ceil(p*n) of the ascending sort, 1-based.
/// No interpolation, so every language reproduces the same value.
inline double percentile_nearest_rank(std::vector<double> values, double p) {
    if (values.empty()) throw Error("percentile of empty set");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    std::size_t rank = static_cast<std::size_t>(std::ceil(p * n));
    rank = std::min(std::max<std::size_t>(rank, 1), values.size());
    return values[rank - 1];
}

/// Dice similarity coefficient 2|a∩b| / (|a|+|b|).
/// Both masks empty -> 1; exactly one empty -> 0.
inline double dice(const BinaryMask& a, const BinaryMask& b) {
    check_compatible(a, b);
    std::uint64_t na = 0, nb = 0, ni = 0;
    for (std::size_t i = 0; i < a.voxels.size(); ++i) {
        na += a.voxels[i];
        nb += b.voxels[i];
        ni += static_cast<std::uint64_t>(a.voxels[i] & b.voxels[i]);
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(ni) / static_cast<double>(na + nb);
}

/// Surface voxels: foreground with at least one 6-neighbor that is
/// background or outside the volume.
inline BinaryMask surface(const BinaryMask& m) {
    BinaryMask out = make_mask(m.dims, m.spacing);
    const int nx = m.dims[0], ny = m.dims[1], nz = m.dims[2];
    std::size_t idx = 0;
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i, ++idx) {
                if (!m.voxels[idx]) continue;
                const bool interior = i > 0 && m.at(i - 1, j, k) &&
                                      i + 1 < nx && m.at(i + 1, j, k) &&
                                      j > 0 && m.at(i, j - 1, k) &&
                                      j + 1 < ny && m.at(i, j + 1, k) &&
                                      k > 0 && m.at(i, j, k - 1) &&
                                      k + 1 < nz && m.at(i, j, k + 1);
                if (!interior) out.voxels[idx] = 1;
            }
        }
    }
    return out;
}

struct Hd95Options {
    /// Measure between surface voxel sets (default) or full masks.
    bool use_surface = true;
    /// Take the 95th percentile per direction and then the max (default),
    /// or pool both directed multisets into a single percentile.
    bool pooled_percentile = false;
    unsigned threads = 0;
};

namespace metric_detail {

/// Distances from each foreground voxel of `from` to the nearest foreground
/// voxel of `to`, via the exact transform of `to`.
inline std::vector<double> directed_distances(const BinaryMask& from,
                                              const BinaryMask& to,
                                              std::array<double, 3> spacing,
                                              unsigned threads) {
    const std::vector<double> d2 = edt_squared(to, spacing, threads);
    std::vector<double> out;
    for (std::size_t i = 0; i < from.voxels.size(); ++i) {
        if (from.voxels[i]) out.push_back(std::sqrt(d2[i]));
    }
    return out;
}

} // namespace metric_detail

/// 95th-percentile Hausdorff distance in mm between two masks, or nullopt
/// when either mask is empty.
inline std::optional<double> hd95(const BinaryMask& a, const BinaryMask& b,
                                  std::array<double, 3> spacing,
                                  const Hd95Options& opt = {}) {
    check_compatible(a, b);
    if (foreground_count(a) == 0 || foreground_count(b) == 0) {
        return std::nullopt;
    }
    const BinaryMask sa = opt.use_surface ? surface(a) : a;
    const BinaryMask sb = opt.use_surface ? surface(b) : b;

    std::vector<double> ab =
        metric_detail::directed_distances(sa, sb, spacing, opt.threads);
    std::vector<double> ba =
        metric_detail::directed_distances(sb, sa, spacing, opt.threads);
    if (opt.pooled_percentile) {
        ab.insert(ab.end(), ba.begin(), ba.end());
        return percentile_nearest_rank(std::move(ab), 0.95);
    }
    const double p_ab = percentile_nearest_rank(std::move(ab), 0.95);
    const double p_ba = percentile_nearest_rank(std::move(ba), 0.95);
    return std::max(p_ab, p_ba);
}

/// Level weights for combining branch (level one) and main (level two)
/// scores. The branch level carries 80% by default.
struct LevelWeights {
    double w_branch = 0.8;
    double w_main = 0.2;

    void validate() const {
        if (!(w_branch >= 0.0 && w_main >= 0.0) ||
            std::abs(w_branch + w_main - 1.0) > 1e-9) {
            throw Error("level weights must be nonnegative and sum to 1");
        }
    }
};

/// One test case's metric record. Undefined-ness is explicit: HD95 entries
/// are absent when a level has an empty operand mask.
struct CaseScore {
    std::string case_id;
    std::optional<double> dsc_main;
    std::optional<double> dsc_branch;
    std::optional<double> dsc_weighted;
    std::optional<double> hd95_main;
    std::optional<double> hd95_branch;
    std::optional<double> hd95_weighted;
    bool failed = false;     // case could not be evaluated at all
    std::string error;       // populated when failed
};

/// Combines two optional level scores; defined iff both components are.
inline std::optional<double> weighted_level(const std::optional<double>& main,
                                            const std::optional<double>& branch,
                                            const LevelWeights& w) {
    if (!main.has_value() || !branch.has_value()) return std::nullopt;
    return w.w_branch * *branch + w.w_main * *main;
}

/// DSC and HD95 on the main and branch levels plus their weighted
/// combinations. The branch pair is lung-confined by construction of the
/// splits.
inline CaseScore score_case(const RegionSplit& gt, const RegionSplit& pred,
                            const LevelWeights& weights,
                            std::array<double, 3> spacing,
                            const Hd95Options& hd_opt = {}) {
    weights.validate();
    check_compatible(gt.main, pred.main);
    check_compatible(gt.branch, pred.branch);

    CaseScore s;
    s.dsc_main = dice(gt.main, pred.main);
    s.dsc_branch = dice(gt.branch, pred.branch);
    s.dsc_weighted = weighted_level(s.dsc_main, s.dsc_branch, weights);
    s.hd95_main = hd95(gt.main, pred.main, spacing, hd_opt);
    s.hd95_branch = hd95(gt.branch, pred.branch, spacing, hd_opt);
    s.hd95_weighted = weighted_level(s.hd95_main, s.hd95_branch, weights);
    return s;
}

} // namespace pabench
