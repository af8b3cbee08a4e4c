#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "pabench/voxel_grid.hpp"

namespace pabench {

enum class Alternative : std::uint8_t { Greater, Less };
enum class WilcoxonMethod : std::uint8_t { Auto, Exact, Normal };

struct WilcoxonResult {
    double p_value = 1.0;
    double w_plus = 0.0;       // rank sum of positive differences
    std::size_t n_effective = 0; // pairs remaining after zero discard
    bool degenerate = false;   // all differences zero
    bool exact = false;        // computed from the exact null distribution
};

namespace stats_detail {

/// Average ranks of |d| ascending, doubled so ties stay integral.
/// Returns the doubled ranks aligned with d and the tie group sizes.
inline void doubled_ranks(const std::vector<double>& d,
                          std::vector<std::int64_t>& ranks2,
                          std::vector<std::size_t>& tie_sizes) {
    const std::size_t n = d.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(d[a]) < std::abs(d[b]);
    });
    ranks2.assign(n, 0);
    tie_sizes.clear();
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n &&
               std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) {
            ++j;
        }
        // ranks i+1 .. j+1 share the average; doubled average is (i+j+2)
        const std::int64_t r2 = static_cast<std::int64_t>(i + j + 2);
        for (std::size_t k = i; k <= j; ++k) ranks2[order[k]] = r2;
        tie_sizes.push_back(j - i + 1);
        i = j + 1;
    }
}

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

} // namespace stats_detail

/// One-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are discarded (Wilcoxon's rule); tied magnitudes get
/// average ranks. With at most `exact_cutoff` effective pairs the p-value
/// is exact, from a dynamic program over achievable rank sums; otherwise a
/// normal approximation with tie-corrected variance and 0.5 continuity
/// correction is used. alternative=Greater tests P(W+ >= observed).
inline WilcoxonResult wilcoxon_one_sided(const std::vector<double>& x,
                                         const std::vector<double>& y,
                                         Alternative alternative,
                                         WilcoxonMethod method = WilcoxonMethod::Auto,
                                         std::size_t exact_cutoff = 25) {
    if (x.size() != y.size()) {
        throw Error("wilcoxon: paired samples must have equal length, got " +
                    std::to_string(x.size()) + " vs " + std::to_string(y.size()));
    }
    if (x.empty()) throw Error("wilcoxon: empty samples");

    std::vector<double> d;
    d.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double di = x[i] - y[i];
        if (di != 0.0) d.push_back(di);
    }

    WilcoxonResult res;
    res.n_effective = d.size();
    if (d.empty()) {
        res.degenerate = true;
        res.p_value = 1.0;
        return res;
    }

    std::vector<std::int64_t> ranks2;
    std::vector<std::size_t> ties;
    stats_detail::doubled_ranks(d, ranks2, ties);

    std::int64_t w2_plus = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] > 0.0) w2_plus += ranks2[i];
    }
    res.w_plus = static_cast<double>(w2_plus) / 2.0;

    const std::size_t n = d.size();
    const bool use_exact =
        method == WilcoxonMethod::Exact ||
        (method == WilcoxonMethod::Auto && n <= exact_cutoff);

    if (use_exact) {
        // ways[s] = number of sign assignments with doubled rank sum s
        const std::int64_t max2 =
            std::accumulate(ranks2.begin(), ranks2.end(), std::int64_t{0});
        std::vector<double> ways(static_cast<std::size_t>(max2) + 1, 0.0);
        ways[0] = 1.0;
        for (const std::int64_t w : ranks2) {
            for (std::int64_t s = max2; s >= w; --s) {
                ways[static_cast<std::size_t>(s)] +=
                    ways[static_cast<std::size_t>(s - w)];
            }
        }
        double count = 0.0;
        if (alternative == Alternative::Greater) {
            for (std::int64_t s = w2_plus; s <= max2; ++s) {
                count += ways[static_cast<std::size_t>(s)];
            }
        } else {
            for (std::int64_t s = 0; s <= w2_plus; ++s) {
                count += ways[static_cast<std::size_t>(s)];
            }
        }
        res.p_value = count / std::ldexp(1.0, static_cast<int>(n));
        res.exact = true;
    } else {
        const double nn = static_cast<double>(n);
        const double mu = nn * (nn + 1.0) / 4.0;
        double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
        for (const std::size_t t : ties) {
            const double td = static_cast<double>(t);
            var -= (td * td * td - td) / 48.0;
        }
        if (var <= 0.0) {
            // every magnitude tied with every other; the exact program is
            // cheap in that regime
            return wilcoxon_one_sided(x, y, alternative, WilcoxonMethod::Exact);
        }
        const double sigma = std::sqrt(var);
        const double w = res.w_plus;
        double p;
        if (alternative == Alternative::Greater) {
            p = stats_detail::normal_sf((w - mu - 0.5) / sigma);
        } else {
            p = 1.0 - stats_detail::normal_sf((w - mu + 0.5) / sigma);
        }
        res.p_value = p;
        res.exact = false;
    }
    res.p_value = std::min(1.0, std::max(res.p_value,
                                         std::numeric_limits<double>::min()));
    return res;
}

enum class Direction : std::uint8_t { HigherBetter, LowerBetter };

enum class CellState : std::uint8_t { NotSuperior, Superior, Self };

/// K x K pairwise one-sided significance results for one metric. Teams are
/// ordered by mean score, best first; cell[i][j] says whether team i's
/// scores are significantly superior to team j's.
struct SignificanceMatrix {
    std::vector<std::string> teams;
    std::vector<std::vector<CellState>> cells;
    std::vector<std::vector<double>> p_values; // NaN where not tested
    std::vector<std::vector<std::uint8_t>> insufficient;
    double alpha = 0.05;
    std::string metric;
    Direction direction = Direction::HigherBetter;
};

/// Builds the significance map from per-team per-case scores (aligned on a
/// shared case roster; undefined entries excluded pairwise).
inline SignificanceMatrix significance_map(
    const std::vector<std::string>& team_ids,
    const std::vector<std::vector<std::optional<double>>>& scores,
    Direction direction, double alpha = 0.05, const std::string& metric = "") {
    if (team_ids.size() != scores.size()) {
        throw Error("significance_map: team id / score row count mismatch");
    }
    const std::size_t k = team_ids.size();
    for (std::size_t i = 1; i < k; ++i) {
        if (scores[i].size() != scores[0].size()) {
            throw Error("significance_map: all teams must be scored on the "
                        "same case roster");
        }
    }

    // Order best-first by mean over defined cases; teams with no defined
    // scores go last. Ties stay in id order.
    std::vector<double> means(k);
    std::vector<char> has_mean(k, 0);
    for (std::size_t i = 0; i < k; ++i) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& v : scores[i]) {
            if (v.has_value()) {
                sum += *v;
                ++count;
            }
        }
        if (count > 0) {
            means[i] = sum / static_cast<double>(count);
            has_mean[i] = 1;
        }
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) -> bool {
                         if (has_mean[a] != has_mean[b]) return has_mean[a] != 0;
                         if (!has_mean[a]) return false;
                         if (means[a] != means[b]) {
                             return direction == Direction::HigherBetter
                                        ? means[a] > means[b]
                                        : means[a] < means[b];
                         }
                         return false;
                     });

    SignificanceMatrix m;
    m.alpha = alpha;
    m.metric = metric;
    m.direction = direction;
    m.teams.resize(k);
    for (std::size_t i = 0; i < k; ++i) m.teams[i] = team_ids[order[i]];
    m.cells.assign(k, std::vector<CellState>(k, CellState::NotSuperior));
    m.p_values.assign(
        k, std::vector<double>(k, std::numeric_limits<double>::quiet_NaN()));
    m.insufficient.assign(k, std::vector<std::uint8_t>(k, 0));

    for (std::size_t i = 0; i < k; ++i) {
        m.cells[i][i] = CellState::Self;
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) continue;
            const auto& si = scores[order[i]];
            const auto& sj = scores[order[j]];
            std::vector<double> xi, xj;
            for (std::size_t c = 0; c < si.size(); ++c) {
                if (si[c].has_value() && sj[c].has_value()) {
                    xi.push_back(*si[c]);
                    xj.push_back(*sj[c]);
                }
            }
            if (xi.empty()) {
                m.insufficient[i][j] = 1;
                continue;
            }
            const Alternative alt = direction == Direction::HigherBetter
                                        ? Alternative::Greater
                                        : Alternative::Less;
            const WilcoxonResult r = wilcoxon_one_sided(xi, xj, alt);
            m.p_values[i][j] = r.p_value;
            if (r.p_value < alpha) m.cells[i][j] = CellState::Superior;
        }
    }
    return m;
}

} // namespace pabench
