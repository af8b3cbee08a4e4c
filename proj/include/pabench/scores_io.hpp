#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pabench/config.hpp"
#include "pabench/efficiency.hpp"
#include "pabench/metrics.hpp"
#include "pabench/ranking.hpp"
#include "pabench/stats.hpp"

namespace pabench {

// Team score files and efficiency files are independent JSON documents so
// each team evaluates in isolation and ranking happens later. Undefined
// values are encoded as null plus a defined flag, never NaN.

namespace io_detail {

inline nlohmann::json opt_json(const std::optional<double>& v) {
    if (v.has_value()) return *v;
    return nullptr;
}

inline std::optional<double> opt_from(const nlohmann::json& j,
                                      const std::string& key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": invalid JSON: " + e.what());
    }
    return j;
}

inline void save_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw Error("short write to " + path);
}

} // namespace io_detail

inline nlohmann::json case_score_to_json(const CaseScore& s) {
    nlohmann::json j{
        {"case_id", s.case_id},
        {"dsc_main", io_detail::opt_json(s.dsc_main)},
        {"dsc_branch", io_detail::opt_json(s.dsc_branch)},
        {"dsc_weighted", io_detail::opt_json(s.dsc_weighted)},
        {"hd95_main", io_detail::opt_json(s.hd95_main)},
        {"hd95_branch", io_detail::opt_json(s.hd95_branch)},
        {"hd95_weighted", io_detail::opt_json(s.hd95_weighted)},
        {"defined",
         {{"dsc_main", s.dsc_main.has_value()},
          {"dsc_branch", s.dsc_branch.has_value()},
          {"dsc_weighted", s.dsc_weighted.has_value()},
          {"hd95_main", s.hd95_main.has_value()},
          {"hd95_branch", s.hd95_branch.has_value()},
          {"hd95_weighted", s.hd95_weighted.has_value()}}},
    };
    if (s.failed) {
        j["failed"] = true;
        j["error"] = s.error;
    }
    return j;
}

inline CaseScore case_score_from_json(const nlohmann::json& j) {
    CaseScore s;
    s.case_id = j.at("case_id").get<std::string>();
    s.dsc_main = io_detail::opt_from(j, "dsc_main");
    s.dsc_branch = io_detail::opt_from(j, "dsc_branch");
    s.dsc_weighted = io_detail::opt_from(j, "dsc_weighted");
    s.hd95_main = io_detail::opt_from(j, "hd95_main");
    s.hd95_branch = io_detail::opt_from(j, "hd95_branch");
    s.hd95_weighted = io_detail::opt_from(j, "hd95_weighted");
    s.failed = j.value("failed", false);
    s.error = j.value("error", std::string{});
    return s;
}

/// scores.json: { team_id, config, cases: [...] }.
inline nlohmann::json team_scores_to_json(const std::string& team_id,
                                          const EvalConfig& config,
                                          const std::vector<CaseScore>& cases) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : cases) arr.push_back(case_score_to_json(c));
    return {{"team_id", team_id}, {"config", to_json(config)}, {"cases", arr}};
}

struct TeamScoresFile {
    std::string team_id;
    std::vector<CaseScore> cases;
};

inline TeamScoresFile read_team_scores(const std::string& path) {
    const nlohmann::json j = io_detail::load_json_file(path);
    TeamScoresFile f;
    try {
        f.team_id = j.at("team_id").get<std::string>();
        for (const auto& c : j.at("cases")) {
            f.cases.push_back(case_score_from_json(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": not a team scores file: " + e.what());
    }
    return f;
}

/// Efficiency file: { team_id, records: [ {case_id, runtime_seconds,
/// gpu_max_mb, ...} ] }.
inline nlohmann::json efficiency_to_json(
    const std::string& team_id, const std::vector<EfficiencyRecord>& records) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records) {
        nlohmann::json item{{"case_id", r.case_id},
                            {"runtime_seconds", r.runtime_seconds},
                            {"gpu_max_mb", r.gpu_max_mb},
                            {"exit_status", r.exit_status}};
        if (r.failed) item["failed"] = true;
        if (r.timed_out) item["timed_out"] = true;
        arr.push_back(item);
    }
    return {{"team_id", team_id}, {"records", arr}};
}

struct EfficiencyFile {
    std::string team_id;
    std::vector<EfficiencyRecord> records;
};

inline EfficiencyFile read_efficiency(const std::string& path) {
    const nlohmann::json j = io_detail::load_json_file(path);
    EfficiencyFile f;
    try {
        f.team_id = j.at("team_id").get<std::string>();
        for (const auto& item : j.at("records")) {
            EfficiencyRecord r;
            r.case_id = item.at("case_id").get<std::string>();
            r.runtime_seconds = item.at("runtime_seconds").get<double>();
            r.gpu_max_mb = item.value("gpu_max_mb", 0.0);
            r.exit_status = item.value("exit_status", 0);
            r.failed = item.value("failed", false);
            r.timed_out = item.value("timed_out", false);
            f.records.push_back(r);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": not an efficiency file: " + e.what());
    }
    return f;
}

inline nlohmann::json significance_to_json(const SignificanceMatrix& m) {
    const std::size_t k = m.teams.size();
    nlohmann::json superior = nlohmann::json::array();
    nlohmann::json pvals = nlohmann::json::array();
    nlohmann::json notes = nlohmann::json::array();
    for (std::size_t i = 0; i < k; ++i) {
        nlohmann::json srow = nlohmann::json::array();
        nlohmann::json prow = nlohmann::json::array();
        for (std::size_t j = 0; j < k; ++j) {
            srow.push_back(m.cells[i][j] == CellState::Superior);
            if (std::isnan(m.p_values[i][j])) {
                prow.push_back(nullptr);
            } else {
                prow.push_back(m.p_values[i][j]);
            }
            if (m.insufficient[i][j]) {
                notes.push_back({{"row", i},
                                 {"col", j},
                                 {"reason", "no shared defined cases"}});
            }
        }
        superior.push_back(srow);
        pvals.push_back(prow);
    }
    return {{"teams", m.teams},
            {"superior", superior},
            {"p_values", pvals},
            {"alpha", m.alpha},
            {"metric", m.metric},
            {"direction", m.direction == Direction::HigherBetter
                              ? "higher-better"
                              : "lower-better"},
            {"insufficient_pairs", notes}};
}

inline nlohmann::json ranking_to_json(const RankingResult& r) {
    nlohmann::json teams = nlohmann::json::array();
    for (const RankedTeam& t : r.teams) {
        nlohmann::json means;
        for (int m = 0; m < 8; ++m) {
            const MetricId id = static_cast<MetricId>(m);
            const MetricStat& st = t.means.of(id);
            means[metric_name(id)] = {{"mean", io_detail::opt_json(st.mean)},
                                      {"sd", st.sd},
                                      {"defined_cases", st.defined}};
        }
        nlohmann::json stability;
        for (std::size_t v = 0; v < kStabilityVariants.size(); ++v) {
            stability[kStabilityVariants[v]] = t.stability[v];
        }
        teams.push_back(
            {{"team_id", t.team_id},
             {"means", means},
             {"ranks",
              {{"dsc_weighted", io_detail::opt_json(t.metric_ranks[0])},
               {"hd95_weighted", io_detail::opt_json(t.metric_ranks[1])},
               {"runtime", io_detail::opt_json(t.metric_ranks[2])},
               {"gpu", io_detail::opt_json(t.metric_ranks[3])}}},
             {"average_rank", std::isfinite(t.average_rank)
                                  ? nlohmann::json(t.average_rank)
                                  : nlohmann::json(nullptr)},
             {"position", t.position},
             {"stability", stability}});
    }
    return {{"teams", teams},
            {"weights",
             {{"w_branch", r.weights.w_branch}, {"w_main", r.weights.w_main}}},
            {"missing_policy", r.missing_policy == MissingPolicy::RankWorst
                                   ? "rank-worst"
                                   : "exclude"}};
}

} // namespace pabench
