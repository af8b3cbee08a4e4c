#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "pabench/efficiency.hpp"
#include "pabench/metrics.hpp"
#include "pabench/stats.hpp"

namespace pabench {

/// The metrics a team can be ranked on.
enum class MetricId : std::uint8_t {
    DscMain,
    DscBranch,
    DscWeighted,
    Hd95Main,
    Hd95Branch,
    Hd95Weighted,
    Runtime,
    Gpu,
};

inline const char* metric_name(MetricId id) {
    switch (id) {
        case MetricId::DscMain: return "dsc_main";
        case MetricId::DscBranch: return "dsc_branch";
        case MetricId::DscWeighted: return "dsc_weighted";
        case MetricId::Hd95Main: return "hd95_main";
        case MetricId::Hd95Branch: return "hd95_branch";
        case MetricId::Hd95Weighted: return "hd95_weighted";
        case MetricId::Runtime: return "runtime";
        case MetricId::Gpu: return "gpu";
    }
    return "?";
}

inline Direction metric_direction(MetricId id) {
    switch (id) {
        case MetricId::DscMain:
        case MetricId::DscBranch:
        case MetricId::DscWeighted:
            return Direction::HigherBetter;
        default:
            return Direction::LowerBetter;
    }
}

inline std::optional<double> case_metric(const CaseScore& s, MetricId id) {
    switch (id) {
        case MetricId::DscMain: return s.dsc_main;
        case MetricId::DscBranch: return s.dsc_branch;
        case MetricId::DscWeighted: return s.dsc_weighted;
        case MetricId::Hd95Main: return s.hd95_main;
        case MetricId::Hd95Branch: return s.hd95_branch;
        case MetricId::Hd95Weighted: return s.hd95_weighted;
        default: return std::nullopt;
    }
}

/// A team's evaluated cases plus aggregated efficiency measurements.
struct TeamRecord {
    std::string team_id;
    std::vector<CaseScore> case_scores;
    std::optional<EfficiencySummary> efficiency;
};

/// Mean, sample standard deviation (n-1 divisor, 0 when n < 2), and the
/// defined-case count for one metric of one team.
struct MetricStat {
    std::optional<double> mean;
    double sd = 0.0;
    std::size_t defined = 0;
};

struct TeamMeans {
    std::array<MetricStat, 8> stats{};

    const MetricStat& of(MetricId id) const {
        return stats[static_cast<std::size_t>(id)];
    }
    MetricStat& of(MetricId id) { return stats[static_cast<std::size_t>(id)]; }
};

/// Step-1 aggregation: per-case metrics averaged over defined cases;
/// runtime and GPU taken from the efficiency summary.
inline TeamMeans team_means(const TeamRecord& team) {
    TeamMeans out;
    for (MetricId id : {MetricId::DscMain, MetricId::DscBranch,
                        MetricId::DscWeighted, MetricId::Hd95Main,
                        MetricId::Hd95Branch, MetricId::Hd95Weighted}) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const CaseScore& s : team.case_scores) {
            const auto v = case_metric(s, id);
            if (v.has_value()) {
                sum += *v;
                ++n;
            }
        }
        MetricStat& stat = out.of(id);
        stat.defined = n;
        if (n > 0) {
            const double mean = sum / static_cast<double>(n);
            stat.mean = mean;
            if (n > 1) {
                double ss = 0.0;
                for (const CaseScore& s : team.case_scores) {
                    const auto v = case_metric(s, id);
                    if (v.has_value()) ss += (*v - mean) * (*v - mean);
                }
                stat.sd = std::sqrt(ss / static_cast<double>(n - 1));
            }
        }
    }
    if (team.efficiency.has_value()) {
        out.of(MetricId::Runtime).mean = team.efficiency->mean_runtime_seconds;
        out.of(MetricId::Runtime).defined = team.efficiency->cases;
        out.of(MetricId::Gpu).mean = team.efficiency->gpu_stat_mb;
        out.of(MetricId::Gpu).defined = team.efficiency->cases;
    }
    return out;
}

enum class MissingPolicy : std::uint8_t {
    RankWorst, // missing values share the averaged worst ranks (default)
    Exclude,   // missing values drop out of that metric's ranking
};

/// Ranks one metric across teams: better value, smaller rank; ties receive
/// the average of the spanned ranks. Under RankWorst, missing values share
/// the averaged worst ranks; under Exclude they yield no rank at all.
inline std::vector<std::optional<double>> rank_metric(
    const std::vector<std::optional<double>>& values, Direction direction,
    MissingPolicy missing = MissingPolicy::RankWorst) {
    const std::size_t k = values.size();
    if (k == 0) throw Error("rank_metric: empty team list");

    std::vector<std::size_t> present;
    std::vector<std::size_t> absent;
    for (std::size_t i = 0; i < k; ++i) {
        (values[i].has_value() ? present : absent).push_back(i);
    }
    std::stable_sort(present.begin(), present.end(),
                     [&](std::size_t a, std::size_t b) {
                         return direction == Direction::HigherBetter
                                    ? *values[a] > *values[b]
                                    : *values[a] < *values[b];
                     });

    std::vector<std::optional<double>> ranks(k);
    std::size_t pos = 0;
    while (pos < present.size()) {
        std::size_t end = pos;
        while (end + 1 < present.size() &&
               *values[present[end + 1]] == *values[present[pos]]) {
            ++end;
        }
        // spanned ranks pos+1 .. end+1 share the average
        const double avg = static_cast<double>(pos + end + 2) / 2.0;
        for (std::size_t i = pos; i <= end; ++i) ranks[present[i]] = avg;
        pos = end + 1;
    }
    if (missing == MissingPolicy::RankWorst && !absent.empty()) {
        // worst |absent| ranks, averaged among the missing teams
        const double lo = static_cast<double>(present.size()) + 1.0;
        const double hi = static_cast<double>(k);
        const double avg = (lo + hi) / 2.0;
        for (const std::size_t i : absent) ranks[i] = avg;
    }
    return ranks;
}

/// The nine single-metric rankings of the stability analysis plus the
/// official all-metrics ranking.
inline constexpr std::array<const char*, 9> kStabilityVariants = {
    "dsc_main", "dsc_branch", "dsc_weighted", "hd95_main", "hd95_branch",
    "hd95_weighted", "runtime", "gpu", "all_metrics"};

struct RankedTeam {
    std::string team_id;
    TeamMeans means;
    // ranks on the four official metrics: dsc_weighted, hd95_weighted,
    // runtime, gpu
    std::array<std::optional<double>, 4> metric_ranks{};
    double average_rank = 0.0;
    int position = 0;
    std::array<double, 9> stability{}; // aligned with kStabilityVariants
};

struct RankingResult {
    std::vector<RankedTeam> teams; // ordered by final position
    LevelWeights weights;
    MissingPolicy missing_policy = MissingPolicy::RankWorst;
};

inline constexpr std::array<MetricId, 4> kOfficialMetrics = {
    MetricId::DscWeighted, MetricId::Hd95Weighted, MetricId::Runtime,
    MetricId::Gpu};

namespace ranking_detail {

inline void check_roster(const std::vector<TeamRecord>& teams) {
    if (teams.empty()) throw Error("rank_teams: no teams");
    auto roster_of = [](const TeamRecord& t) {
        std::vector<std::string> ids;
        ids.reserve(t.case_scores.size());
        for (const auto& c : t.case_scores) ids.push_back(c.case_id);
        std::sort(ids.begin(), ids.end());
        for (std::size_t i = 1; i < ids.size(); ++i) {
            if (ids[i] == ids[i - 1]) {
                throw Error("team " + t.team_id + ": duplicate case id " +
                            ids[i]);
            }
        }
        return ids;
    };
    const std::vector<std::string> reference = roster_of(teams[0]);
    for (std::size_t i = 1; i < teams.size(); ++i) {
        const std::vector<std::string> r = roster_of(teams[i]);
        if (r != reference) {
            std::string missing, extra;
            for (const auto& id : reference) {
                if (!std::binary_search(r.begin(), r.end(), id)) {
                    missing += (missing.empty() ? "" : ", ") + id;
                }
            }
            for (const auto& id : r) {
                if (!std::binary_search(reference.begin(), reference.end(), id)) {
                    extra += (extra.empty() ? "" : ", ") + id;
                }
            }
            throw Error("team " + teams[i].team_id +
                        " case roster differs from team " + teams[0].team_id +
                        (missing.empty() ? "" : "; missing: " + missing) +
                        (extra.empty() ? "" : "; extra: " + extra));
        }
    }
}

} // namespace ranking_detail

/// The four-step ranking scheme: per-team means (step 1), per-metric ranks
/// (step 2), the average of the four ranks (step 3), and final positions
/// with ties on equal averages (step 4). Also fills the per-variant
/// stability ranks.
inline RankingResult rank_teams(const std::vector<TeamRecord>& teams,
                                const LevelWeights& weights = {},
                                MissingPolicy missing = MissingPolicy::RankWorst) {
    weights.validate();
    ranking_detail::check_roster(teams);
    const std::size_t k = teams.size();

    std::vector<TeamMeans> means;
    means.reserve(k);
    for (const auto& t : teams) means.push_back(team_means(t));

    auto collect = [&](MetricId id) {
        std::vector<std::optional<double>> v(k);
        for (std::size_t i = 0; i < k; ++i) v[i] = means[i].of(id).mean;
        return v;
    };

    RankingResult result;
    result.weights = weights;
    result.missing_policy = missing;
    result.teams.resize(k);

    std::array<std::vector<std::optional<double>>, 4> official_ranks;
    for (std::size_t m = 0; m < kOfficialMetrics.size(); ++m) {
        official_ranks[m] = rank_metric(collect(kOfficialMetrics[m]),
                                        metric_direction(kOfficialMetrics[m]),
                                        missing);
    }

    std::vector<double> average_rank(k);
    for (std::size_t i = 0; i < k; ++i) {
        double sum = 0.0;
        std::size_t defined = 0;
        for (std::size_t m = 0; m < 4; ++m) {
            if (official_ranks[m][i].has_value()) {
                sum += *official_ranks[m][i];
                ++defined;
            }
        }
        average_rank[i] = defined > 0
                              ? sum / static_cast<double>(defined)
                              : std::numeric_limits<double>::infinity();
    }

    // Step 4: order by average rank; equal averages share a position.
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         if (average_rank[a] != average_rank[b]) {
                             return average_rank[a] < average_rank[b];
                         }
                         return teams[a].team_id < teams[b].team_id;
                     });
    std::vector<int> position(k);
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t i = order[r];
        if (r > 0 && average_rank[i] == average_rank[order[r - 1]]) {
            position[i] = position[order[r - 1]];
        } else {
            position[i] = static_cast<int>(r + 1);
        }
    }

    // Stability variants: each single metric ranked on its own, plus the
    // official all-metrics positions.
    std::array<std::vector<std::optional<double>>, 8> variant_ranks;
    for (std::size_t v = 0; v < 8; ++v) {
        const MetricId id = static_cast<MetricId>(v);
        variant_ranks[v] =
            rank_metric(collect(id), metric_direction(id), missing);
    }

    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t i = order[r];
        RankedTeam& out = result.teams[r];
        out.team_id = teams[i].team_id;
        out.means = means[i];
        for (std::size_t m = 0; m < 4; ++m) {
            out.metric_ranks[m] = official_ranks[m][i];
        }
        out.average_rank = average_rank[i];
        out.position = position[i];
        for (std::size_t v = 0; v < 8; ++v) {
            out.stability[v] = variant_ranks[v][i].value_or(
                static_cast<double>(k)); // unrankable sits last
        }
        out.stability[8] = static_cast<double>(position[i]);
    }
    return result;
}

/// Per-variant rank matrix for the stability analysis, one row per team in
/// final-position order, suitable for a parallel-coordinates rendering.
struct StabilityTable {
    std::vector<std::string> team_ids;
    std::array<const char*, 9> variants = kStabilityVariants;
    std::vector<std::array<double, 9>> ranks;
};

inline StabilityTable stability_table(const std::vector<TeamRecord>& teams,
                                      const LevelWeights& weights = {},
                                      MissingPolicy missing = MissingPolicy::RankWorst) {
    const RankingResult r = rank_teams(teams, weights, missing);
    StabilityTable t;
    for (const RankedTeam& team : r.teams) {
        t.team_ids.push_back(team.team_id);
        t.ranks.push_back(team.stability);
    }
    return t;
}

/// One row per team for the accuracy/efficiency bubble rendering:
/// x = mean weighted DSC, y = mean weighted HD95, z = mean runtime,
/// size = GPU statistic.
struct BubbleDatum {
    std::string team_id;
    std::optional<double> dsc_weighted;
    std::optional<double> hd95_weighted;
    std::optional<double> runtime_seconds;
    std::optional<double> gpu_mb;
};

inline std::vector<BubbleDatum> bubble_data(const std::vector<TeamRecord>& teams) {
    std::vector<BubbleDatum> out;
    out.reserve(teams.size());
    for (const auto& t : teams) {
        const TeamMeans m = team_means(t);
        out.push_back({t.team_id, m.of(MetricId::DscWeighted).mean,
                       m.of(MetricId::Hd95Weighted).mean,
                       m.of(MetricId::Runtime).mean, m.of(MetricId::Gpu).mean});
    }
    return out;
}

} // namespace pabench
