#include <catch_amalgamated.hpp>

#include <cmath>

#include "pabench/ranking.hpp"
#include "pabench/rng.hpp"
#include "support/oracles.hpp"

using namespace pabench;

namespace {

std::vector<std::optional<double>> vals(std::initializer_list<double> v) {
    std::vector<std::optional<double>> out;
    for (const double x : v) out.push_back(x);
    return out;
}

TeamRecord team_const(const std::string& id, int cases, double dsc_main,
                      double dsc_branch, std::optional<double> hd_main,
                      std::optional<double> hd_branch,
                      std::optional<double> rt, std::optional<double> gpu) {
    TeamRecord t;
    t.team_id = id;
    const LevelWeights w{};
    for (int c = 0; c < cases; ++c) {
        CaseScore s;
        s.case_id = "case_" + std::to_string(c);
        s.dsc_main = dsc_main;
        s.dsc_branch = dsc_branch;
        s.dsc_weighted = weighted_level(s.dsc_main, s.dsc_branch, w);
        s.hd95_main = hd_main;
        s.hd95_branch = hd_branch;
        s.hd95_weighted = weighted_level(hd_main, hd_branch, w);
        t.case_scores.push_back(s);
    }
    if (rt.has_value() && gpu.has_value()) {
        EfficiencySummary e;
        e.mean_runtime_seconds = *rt;
        e.gpu_stat_mb = *gpu;
        e.cases = static_cast<std::size_t>(cases);
        t.efficiency = e;
    }
    return t;
}

} // namespace

TEST_CASE("rank_metric basic direction handling") {
    const auto lower = rank_metric(vals({3, 1, 2}), Direction::LowerBetter);
    CHECK(*lower[0] == 3.0);
    CHECK(*lower[1] == 1.0);
    CHECK(*lower[2] == 2.0);
}

TEST_CASE("rank_metric averages tied ranks") {
    const auto r = rank_metric(vals({5, 5, 1}), Direction::HigherBetter);
    CHECK(*r[0] == 1.5);
    CHECK(*r[1] == 1.5);
    CHECK(*r[2] == 3.0);
}

TEST_CASE("published weighted-DSC top three rank as 2, 3, 1") {
    const auto r =
        rank_metric(vals({79.69, 79.68, 79.80}), Direction::HigherBetter);
    CHECK(*r[0] == 2.0);
    CHECK(*r[1] == 3.0);
    CHECK(*r[2] == 1.0);
}

TEST_CASE("missing values share the averaged worst ranks") {
    std::vector<std::optional<double>> v{1.0, std::nullopt, 2.0, std::nullopt};
    const auto r = rank_metric(v, Direction::LowerBetter);
    CHECK(*r[0] == 1.0);
    CHECK(*r[2] == 2.0);
    CHECK(*r[1] == 3.5); // ranks 3 and 4 averaged
    CHECK(*r[3] == 3.5);

    const auto excl =
        rank_metric(v, Direction::LowerBetter, MissingPolicy::Exclude);
    CHECK_FALSE(excl[1].has_value());
    CHECK(*excl[0] == 1.0);
}

TEST_CASE("rank_metric rejects an empty list") {
    CHECK_THROWS_AS(rank_metric({}, Direction::HigherBetter), Error);
}

TEST_CASE("rank sums are conserved") {
    SplitMix64 rng(10101);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 2 + rng.below(18);
        std::vector<std::optional<double>> v(k);
        for (auto& x : v) {
            // coarse values force plenty of ties; some missing entries
            if (rng.uniform() < 0.15) continue;
            x = static_cast<double>(rng.below(6));
        }
        const auto r = rank_metric(v, Direction::HigherBetter);
        double sum = 0.0;
        for (const auto& x : r) sum += *x;
        CHECK(sum == Catch::Approx(k * (k + 1) / 2.0).margin(1e-9));
    }
}

TEST_CASE("rank_metric is permutation-equivariant") {
    SplitMix64 rng(321);
    std::vector<std::optional<double>> v =
        vals({4.0, 9.5, 1.25, 4.0, 7.0, 0.5});
    const auto base = rank_metric(v, Direction::HigherBetter);
    std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    std::vector<std::optional<double>> pv(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) pv[i] = v[perm[i]];
    const auto pr = rank_metric(pv, Direction::HigherBetter);
    for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(*pr[i] == *base[perm[i]]);
    }
}

TEST_CASE("improving one team's value never hurts it, never helps others") {
    SplitMix64 rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t k = 3 + rng.below(10);
        std::vector<std::optional<double>> v(k);
        for (auto& x : v) x = rng.uniform(0, 10);
        const std::size_t target = rng.below(k);
        const auto before = rank_metric(v, Direction::HigherBetter);
        auto improved = v;
        *improved[target] += rng.uniform(0.1, 5.0);
        const auto after = rank_metric(improved, Direction::HigherBetter);
        CHECK(*after[target] <= *before[target] + 1e-12);
        for (std::size_t i = 0; i < k; ++i) {
            if (i != target) CHECK(*after[i] >= *before[i] - 1e-12);
        }
    }
}

TEST_CASE("dominant team takes position 1, dominated team takes last") {
    std::vector<TeamRecord> teams;
    teams.push_back(team_const("winner", 5, 0.95, 0.90, 3.0, 2.5, 5.0, 1000));
    teams.push_back(team_const("loser", 5, 0.80, 0.70, 9.0, 8.5, 50.0, 9000));
    const RankingResult r = rank_teams(teams);
    REQUIRE(r.teams.size() == 2);
    CHECK(r.teams[0].team_id == "winner");
    CHECK(r.teams[0].position == 1);
    CHECK(r.teams[1].team_id == "loser");
    CHECK(r.teams[1].position == 2);
}

TEST_CASE("equal average ranks share a position") {
    // A ranks (1,2,2,1), B ranks (2,1,1,2): both average 1.5
    std::vector<TeamRecord> teams;
    teams.push_back(team_const("A", 4, 0.95, 0.92, 6.0, 5.0, 20.0, 1000));
    teams.push_back(team_const("B", 4, 0.85, 0.80, 3.0, 2.0, 5.0, 4000));
    const RankingResult r = rank_teams(teams);
    CHECK(r.teams[0].average_rank == 1.5);
    CHECK(r.teams[1].average_rank == 1.5);
    CHECK(r.teams[0].position == 1);
    CHECK(r.teams[1].position == 1);
}

TEST_CASE("step 1 reproduces published weighted columns from level means") {
    // constant per-case scores seeded from three published rows (percent)
    std::vector<TeamRecord> teams;
    teams.push_back(team_const("T1", 3, 0.8970, 0.7719, 7.08, 4.80, 7.92, 1674));
    teams.push_back(team_const("T2", 3, 0.9171, 0.7667, 4.83, 4.74, 18.61, 3658));
    teams.push_back(team_const("T3", 3, 0.9157, 0.7686, 4.99, 5.46, 14.53, 6300));
    const RankingResult r = rank_teams(teams);
    for (const auto& t : r.teams) {
        const auto& m = t.means;
        const double dsc_w = *m.of(MetricId::DscWeighted).mean * 100.0;
        const double hd_w = *m.of(MetricId::Hd95Weighted).mean;
        if (t.team_id == "T1") {
            CHECK(std::abs(dsc_w - 79.69) <= 0.02);
            CHECK(std::abs(hd_w - 5.26) <= 0.02);
        } else if (t.team_id == "T2") {
            CHECK(std::abs(dsc_w - 79.68) <= 0.02);
        } else {
            CHECK(std::abs(dsc_w - 79.80) <= 0.02);
        }
    }
    // the weighted-DSC metric rank puts T3 first
    for (const auto& t : r.teams) {
        if (t.team_id == "T3") CHECK(*t.metric_ranks[0] == 1.0);
        if (t.team_id == "T1") CHECK(*t.metric_ranks[0] == 2.0);
        if (t.team_id == "T2") CHECK(*t.metric_ranks[0] == 3.0);
    }
}

TEST_CASE("ranking agrees with the straight-line reimplementation") {
    SplitMix64 rng(90210);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t k = 2 + rng.below(14);
        std::vector<TeamRecord> teams;
        std::vector<oracle::SimpleTeam> simple(k);
        for (std::size_t t = 0; t < k; ++t) {
            // coarse grids of values produce frequent ties
            const double dsc_m = 0.80 + 0.01 * static_cast<double>(rng.below(10));
            const double dsc_b = 0.70 + 0.01 * static_cast<double>(rng.below(10));
            const double hd_m = 4.0 + static_cast<double>(rng.below(5));
            const double hd_b = 3.0 + static_cast<double>(rng.below(5));
            const bool has_hd = rng.uniform() > 0.15;
            const bool has_eff = rng.uniform() > 0.1;
            const double rt = 5.0 * (1.0 + static_cast<double>(rng.below(8)));
            const double gpu = 1000.0 * (1.0 + static_cast<double>(rng.below(6)));
            teams.push_back(team_const(
                "T" + std::to_string(t), 4, dsc_m, dsc_b,
                has_hd ? std::optional<double>(hd_m) : std::nullopt,
                has_hd ? std::optional<double>(hd_b) : std::nullopt,
                has_eff ? std::optional<double>(rt) : std::nullopt,
                has_eff ? std::optional<double>(gpu) : std::nullopt));
        }
        // the oracle reimplements steps 2-4 over the shared step-1 means
        for (std::size_t t = 0; t < k; ++t) {
            const TeamMeans m = team_means(teams[t]);
            simple[t].id = teams[t].team_id;
            simple[t].metrics[0] = m.of(MetricId::DscWeighted).mean;
            simple[t].metrics[1] = m.of(MetricId::Hd95Weighted).mean;
            simple[t].metrics[2] = m.of(MetricId::Runtime).mean;
            simple[t].metrics[3] = m.of(MetricId::Gpu).mean;
        }
        const RankingResult fast = rank_teams(teams);
        const auto slow = oracle::simple_rank_teams(simple);
        REQUIRE(fast.teams.size() == slow.size());
        for (std::size_t i = 0; i < slow.size(); ++i) {
            CHECK(fast.teams[i].team_id == slow[i].id);
            CHECK(fast.teams[i].average_rank ==
                  Catch::Approx(slow[i].average_rank).margin(1e-12));
            CHECK(fast.teams[i].position == slow[i].position);
        }
    }
}

TEST_CASE("roster mismatch names the offending team") {
    std::vector<TeamRecord> teams;
    teams.push_back(team_const("A", 3, 0.9, 0.8, 1.0, 1.0, 1.0, 1.0));
    teams.push_back(team_const("B", 4, 0.9, 0.8, 1.0, 1.0, 1.0, 1.0));
    try {
        rank_teams(teams);
        FAIL("expected roster error");
    } catch (const Error& e) {
        const std::string what = e.what();
        CHECK(what.find("B") != std::string::npos);
        CHECK(what.find("case_3") != std::string::npos);
    }
}

TEST_CASE("duplicate case ids are rejected") {
    TeamRecord t = team_const("A", 2, 0.9, 0.8, 1.0, 1.0, 1.0, 1.0);
    t.case_scores[1].case_id = t.case_scores[0].case_id;
    CHECK_THROWS_AS(rank_teams({t}), Error);
}

TEST_CASE("means lie within the per-case range") {
    SplitMix64 rng(15);
    TeamRecord t;
    t.team_id = "x";
    double lo = 1.0, hi = 0.0;
    const LevelWeights w{};
    for (int c = 0; c < 20; ++c) {
        CaseScore s;
        s.case_id = "c" + std::to_string(c);
        s.dsc_main = rng.uniform(0.5, 1.0);
        s.dsc_branch = rng.uniform(0.4, 0.9);
        s.dsc_weighted = weighted_level(s.dsc_main, s.dsc_branch, w);
        lo = std::min(lo, *s.dsc_weighted);
        hi = std::max(hi, *s.dsc_weighted);
        t.case_scores.push_back(s);
    }
    const TeamMeans m = team_means(t);
    CHECK(*m.of(MetricId::DscWeighted).mean >= lo);
    CHECK(*m.of(MetricId::DscWeighted).mean <= hi);
    CHECK(m.of(MetricId::DscWeighted).defined == 20);
}

TEST_CASE("a team that wins every variant is rank 1 everywhere") {
    std::vector<TeamRecord> teams;
    teams.push_back(team_const("best", 4, 0.96, 0.93, 2.0, 1.5, 4.0, 900));
    teams.push_back(team_const("mid", 4, 0.90, 0.85, 4.0, 3.5, 9.0, 2000));
    teams.push_back(team_const("worst", 4, 0.85, 0.80, 7.0, 6.0, 30.0, 5000));
    const StabilityTable t = stability_table(teams);
    REQUIRE(t.team_ids[0] == "best");
    for (const double r : t.ranks[0]) CHECK(r == 1.0);
}

TEST_CASE("all-metrics stability column equals the final ordering") {
    SplitMix64 rng(77);
    std::vector<TeamRecord> teams;
    for (int i = 0; i < 8; ++i) {
        teams.push_back(team_const("T" + std::to_string(i), 3,
                                   rng.uniform(0.8, 0.95), rng.uniform(0.6, 0.9),
                                   rng.uniform(3, 9), rng.uniform(3, 9),
                                   rng.uniform(4, 100), rng.uniform(800, 9000)));
    }
    const RankingResult r = rank_teams(teams);
    for (const auto& t : r.teams) {
        CHECK(t.stability[8] == static_cast<double>(t.position));
    }
}

TEST_CASE("a runtime specialist shows a wide stability spread") {
    // fastest runtime but mediocre accuracy, mirroring the published
    // example of a team that optimized one metric only
    std::vector<TeamRecord> teams;
    teams.push_back(team_const("fast", 4, 0.85, 0.70, 7.0, 8.8, 4.21, 8230));
    teams.push_back(team_const("good1", 4, 0.92, 0.77, 5.0, 4.8, 7.92, 1674));
    teams.push_back(team_const("good2", 4, 0.91, 0.77, 4.8, 4.7, 18.6, 3658));
    teams.push_back(team_const("good3", 4, 0.90, 0.76, 5.0, 5.4, 14.5, 6300));
    const StabilityTable t = stability_table(teams);
    std::size_t fast_row = 0;
    for (std::size_t i = 0; i < t.team_ids.size(); ++i) {
        if (t.team_ids[i] == "fast") fast_row = i;
    }
    const auto& ranks = t.ranks[fast_row];
    // rank 1 on runtime (index 6), worse elsewhere
    CHECK(ranks[6] == 1.0);
    const double spread = *std::max_element(ranks.begin(), ranks.end()) -
                          *std::min_element(ranks.begin(), ranks.end());
    CHECK(spread > 0.0);
}

TEST_CASE("bubble data carries the four plotted fields") {
    std::vector<TeamRecord> teams;
    teams.push_back(team_const("T1", 3, 0.8970, 0.7719, 7.08, 4.80, 7.92, 1674));
    teams.push_back(team_const("T2", 3, 0.9171, 0.7667, 4.83, 4.74, 18.61, 3658));
    const auto data = bubble_data(teams);
    REQUIRE(data.size() == teams.size());
    CHECK(data[0].team_id == "T1");
    CHECK(*data[0].dsc_weighted == Catch::Approx(0.79692).margin(2e-4));
    CHECK(*data[0].hd95_weighted == Catch::Approx(5.256).margin(2e-2));
    CHECK(*data[0].runtime_seconds == 7.92);
    CHECK(*data[0].gpu_mb == 1674.0);
    for (const auto& d : data) {
        CHECK(d.dsc_weighted.has_value());
        CHECK(d.hd95_weighted.has_value());
        CHECK(d.runtime_seconds.has_value());
        CHECK(d.gpu_mb.has_value());
    }
}

TEST_CASE("single team ranks trivially first") {
    std::vector<TeamRecord> teams;
    teams.push_back(team_const("only", 2, 0.9, 0.8, 3.0, 2.0, 5.0, 100));
    const RankingResult r = rank_teams(teams);
    REQUIRE(r.teams.size() == 1);
    CHECK(r.teams[0].position == 1);
}

TEST_CASE("final ordering ignores uniform rescaling of one metric") {
    SplitMix64 rng(2025);
    std::vector<TeamRecord> base;
    for (int i = 0; i < 6; ++i) {
        base.push_back(team_const("T" + std::to_string(i), 3,
                                  rng.uniform(0.8, 0.95), rng.uniform(0.6, 0.9),
                                  rng.uniform(3, 9), rng.uniform(3, 9),
                                  rng.uniform(4, 100), rng.uniform(800, 9000)));
    }
    std::vector<TeamRecord> scaled = base;
    for (auto& t : scaled) {
        t.efficiency->mean_runtime_seconds *= 17.0; // ranks are scale-free
    }
    const RankingResult a = rank_teams(base);
    const RankingResult b = rank_teams(scaled);
    for (std::size_t i = 0; i < a.teams.size(); ++i) {
        CHECK(a.teams[i].team_id == b.teams[i].team_id);
        CHECK(a.teams[i].position == b.teams[i].position);
    }
}
