// pabench: batch evaluation and ranking for two-level (main/branch)
// vascular segmentation benchmarks. Subcommands operate on files so the
// whole pipeline is scriptable: phantom -> evaluate/measure -> rank ->
// significance/report.

#include <glob.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pabench/config.hpp"
#include "pabench/efficiency.hpp"
#include "pabench/nifti.hpp"
#include "pabench/phantom.hpp"
#include "pabench/pipeline.hpp"
#include "pabench/ranking.hpp"
#include "pabench/regions.hpp"
#include "pabench/report.hpp"
#include "pabench/scores_io.hpp"
#include "pabench/stats.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitUsage = 2;

std::vector<std::string> expand_globs(const std::vector<std::string>& patterns) {
    std::vector<std::string> out;
    for (const auto& pattern : patterns) {
        if (pattern.find_first_of("*?[") == std::string::npos) {
            out.push_back(pattern);
            continue;
        }
        glob_t g{};
        const int rc = glob(pattern.c_str(), 0, nullptr, &g);
        if (rc == 0) {
            for (std::size_t i = 0; i < g.gl_pathc; ++i) {
                out.emplace_back(g.gl_pathv[i]);
            }
        }
        globfree(&g);
        if (rc != 0 && rc != GLOB_NOMATCH) {
            throw pabench::ConfigError("glob failed for pattern " + pattern);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

struct ConfigCli {
    std::string config_file;
    std::optional<double> w_branch, w_main, alpha, lung_threshold;
    std::optional<int> closing_radius;
    std::optional<unsigned> threads;
    bool hd95_mask = false;
    bool hd95_pooled = false;
    bool gpu_max_of_max = false;
    bool missing_exclude = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_file,
                        "JSON config file (flat keys; flags override it)");
        cmd->add_option("--w-branch", w_branch, "branch-level weight");
        cmd->add_option("--w-main", w_main, "main-level weight");
        cmd->add_option("--alpha", alpha, "significance level");
        cmd->add_option("--lung-threshold", lung_threshold,
                        "lung threshold in HU");
        cmd->add_option("--closing-radius", closing_radius,
                        "lung closing ball radius in voxels");
        cmd->add_option("--threads", threads, "worker threads (0 = all cores)");
        cmd->add_flag("--hd95-mask", hd95_mask,
                      "measure HD95 between full masks instead of surfaces");
        cmd->add_flag("--hd95-pooled", hd95_pooled,
                      "pool both directed distance multisets into one "
                      "percentile");
        cmd->add_flag("--gpu-max-of-max", gpu_max_of_max,
                      "aggregate GPU as the overall maximum instead of the "
                      "mean of per-case maxima");
        cmd->add_flag("--missing-exclude", missing_exclude,
                      "drop missing metric values from rankings instead of "
                      "ranking them worst");
    }

    pabench::EvalConfig resolve() const {
        pabench::EvalConfig c;
        if (!config_file.empty()) {
            c = pabench::config_from_json(
                pabench::io_detail::load_json_file(config_file), c);
        }
        if (w_branch) c.weights.w_branch = *w_branch;
        if (w_main) c.weights.w_main = *w_main;
        if (alpha) c.alpha = *alpha;
        if (lung_threshold) c.lung_threshold_hu = *lung_threshold;
        if (closing_radius) c.lung_closing_radius = *closing_radius;
        if (threads) c.threads = *threads;
        if (hd95_mask) c.hd95_surface = false;
        if (hd95_pooled) c.hd95_pooled = true;
        if (gpu_max_of_max) c.gpu_policy = pabench::GpuPolicy::MaxOfMax;
        if (missing_exclude) {
            c.missing_policy = pabench::MissingPolicy::Exclude;
        }
        c.validate();
        return c;
    }
};

pabench::MetricId metric_id_from_name(const std::string& name) {
    for (int m = 0; m < 8; ++m) {
        const auto id = static_cast<pabench::MetricId>(m);
        if (name == pabench::metric_name(id)) return id;
    }
    throw pabench::ConfigError(
        "unknown metric " + name +
        " (expected dsc_main|dsc_branch|dsc_weighted|hd95_main|hd95_branch|"
        "hd95_weighted)");
}

struct LoadedTeams {
    std::vector<pabench::TeamRecord> records;
    std::vector<std::string> roster; // sorted case ids of the first team
};

LoadedTeams load_teams(const std::vector<std::string>& score_patterns,
                       const std::vector<std::string>& efficiency_patterns,
                       pabench::GpuPolicy gpu_policy) {
    const auto score_files = expand_globs(score_patterns);
    if (score_files.empty()) {
        throw pabench::ConfigError("no team score files matched");
    }
    LoadedTeams out;
    std::map<std::string, std::size_t> by_id;
    for (const auto& path : score_files) {
        const pabench::TeamScoresFile f = pabench::read_team_scores(path);
        if (by_id.count(f.team_id)) {
            throw pabench::ConfigError("duplicate team id " + f.team_id +
                                       " in " + path);
        }
        by_id[f.team_id] = out.records.size();
        out.records.push_back({f.team_id, f.cases, std::nullopt});
    }
    for (const auto& path : expand_globs(efficiency_patterns)) {
        const pabench::EfficiencyFile f = pabench::read_efficiency(path);
        const auto it = by_id.find(f.team_id);
        if (it == by_id.end()) {
            std::fprintf(stderr,
                         "warning: efficiency file %s names team %s with no "
                         "score file; ignored\n",
                         path.c_str(), f.team_id.c_str());
            continue;
        }
        if (f.records.empty()) continue;
        out.records[it->second].efficiency =
            pabench::aggregate_efficiency(f.records, gpu_policy);
    }
    for (const auto& c : out.records.front().case_scores) {
        out.roster.push_back(c.case_id);
    }
    std::sort(out.roster.begin(), out.roster.end());
    return out;
}

/// Per-team per-case metric table aligned on the sorted roster.
std::vector<std::vector<std::optional<double>>> metric_table(
    const LoadedTeams& teams, pabench::MetricId metric) {
    std::vector<std::vector<std::optional<double>>> rows;
    for (const auto& team : teams.records) {
        std::map<std::string, std::optional<double>> by_case;
        for (const auto& c : team.case_scores) {
            by_case[c.case_id] = pabench::case_metric(c, metric);
        }
        std::vector<std::optional<double>> row;
        row.reserve(teams.roster.size());
        for (const auto& id : teams.roster) {
            const auto it = by_case.find(id);
            row.push_back(it == by_case.end() ? std::nullopt : it->second);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ranking_csv(const pabench::RankingResult& r) {
    std::ostringstream csv;
    csv << "team_id,position,average_rank,mean_dsc_weighted,mean_hd95_weighted,"
           "mean_runtime_s,gpu_mb,rank_dsc_weighted,rank_hd95_weighted,"
           "rank_runtime,rank_gpu";
    for (const char* v : pabench::kStabilityVariants) csv << ",stab_" << v;
    csv << "\n";
    auto cell = [](const std::optional<double>& v) {
        if (!v.has_value()) return std::string("-");
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.6g", *v);
        return std::string(buf);
    };
    for (const auto& t : r.teams) {
        csv << t.team_id << ',' << t.position << ','
            << cell(std::isfinite(t.average_rank)
                        ? std::optional<double>(t.average_rank)
                        : std::nullopt)
            << ',' << cell(t.means.of(pabench::MetricId::DscWeighted).mean)
            << ',' << cell(t.means.of(pabench::MetricId::Hd95Weighted).mean)
            << ',' << cell(t.means.of(pabench::MetricId::Runtime).mean) << ','
            << cell(t.means.of(pabench::MetricId::Gpu).mean);
        for (const auto& rank : t.metric_ranks) csv << ',' << cell(rank);
        for (const double s : t.stability) csv << ',' << cell(s);
        csv << "\n";
    }
    return csv.str();
}

std::string bubble_csv(const std::vector<pabench::BubbleDatum>& data) {
    std::ostringstream csv;
    csv << "team_id,mean_dsc_weighted,mean_hd95_weighted,mean_runtime_s,gpu_mb\n";
    auto cell = [](const std::optional<double>& v) {
        if (!v.has_value()) return std::string("");
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.6g", *v);
        return std::string(buf);
    };
    for (const auto& d : data) {
        csv << d.team_id << ',' << cell(d.dsc_weighted) << ','
            << cell(d.hd95_weighted) << ',' << cell(d.runtime_seconds) << ','
            << cell(d.gpu_mb) << "\n";
    }
    return csv.str();
}

// ---------------------------------------------------------------------------
// subcommand runners

int run_phantom(const std::string& out_dir, int cases, std::uint64_t seed,
                std::vector<int> dims, std::vector<double> spacing, int depth,
                double root_radius, double decay, double noise_sigma) {
    if (dims.size() != 3 || spacing.size() != 3) {
        throw pabench::ConfigError("--dims and --spacing need three values");
    }
    pabench::PhantomSpec spec = pabench::PhantomSpec::with_defaults(
        {dims[0], dims[1], dims[2]}, {spacing[0], spacing[1], spacing[2]},
        seed);
    spec.depth = depth;
    if (root_radius > 0) spec.root_radius = root_radius;
    if (decay > 0) spec.radius_decay = decay;
    spec.noise_sigma = noise_sigma;
    const json manifest = pabench::write_phantom_set(out_dir, cases, spec);
    std::printf("wrote %d case(s) under %s\n",
                manifest.at("cases").get<int>(), out_dir.c_str());
    return kExitOk;
}

int run_evaluate(const ConfigCli& cfg_cli, const std::string& gt_dir,
                 const std::string& pred_dir, const std::string& lung_dir,
                 const std::string& ct_dir, bool extract_lungs_flag,
                 const std::string& team_id, const std::string& out_path) {
    pabench::EvalConfig config = cfg_cli.resolve();
    if (extract_lungs_flag) {
        config.lung_source = pabench::LungSource::ThresholdExtract;
    }
    if (config.lung_source == pabench::LungSource::ExternalMask &&
        lung_dir.empty()) {
        throw pabench::ConfigError(
            "--lung DIR is required unless --extract-lungs is given");
    }
    if (config.lung_source == pabench::LungSource::ThresholdExtract &&
        ct_dir.empty()) {
        throw pabench::ConfigError("--ct DIR is required with --extract-lungs");
    }

    const auto cases =
        pabench::pair_cases(gt_dir, pred_dir, lung_dir, ct_dir);
    const auto scores = pabench::evaluate_cases(cases, config);

    const json doc = pabench::team_scores_to_json(team_id, config, scores);
    pabench::io_detail::save_json_file(doc, out_path);

    std::size_t failed = 0;
    for (const auto& s : scores) {
        if (s.failed) {
            ++failed;
            std::fprintf(stderr, "case %s failed: %s\n", s.case_id.c_str(),
                         s.error.c_str());
        }
    }
    std::printf("scored %zu case(s), %zu failed -> %s\n", scores.size(),
                failed, out_path.c_str());
    return failed == 0 ? kExitOk : kExitPartial;
}

int run_lungmask(const ConfigCli& cfg_cli, const std::string& ct_path,
                 const std::string& out_path) {
    const pabench::EvalConfig config = cfg_cli.resolve();
    const pabench::VoxelGrid ct = pabench::read_nifti(ct_path);
    const pabench::BinaryMask lungs = pabench::extract_lungs(
        ct, config.lung_threshold_hu, config.lung_closing_radius,
        config.threads);
    pabench::write_nifti(pabench::to_grid(lungs), out_path);
    std::printf("lung mask: %llu voxel(s) -> %s\n",
                static_cast<unsigned long long>(pabench::foreground_count(lungs)),
                out_path.c_str());
    return kExitOk;
}

int run_measure(const std::string& team_id, std::vector<std::string> case_ids,
                const std::vector<std::string>& command,
                const std::string& gpu_log_dir, double timeout,
                const std::string& out_path) {
    if (command.empty()) {
        throw pabench::ConfigError("--cmd requires a command to run");
    }
    if (case_ids.empty()) case_ids.push_back("case_000");

    std::vector<pabench::EfficiencyRecord> records;
    std::size_t failed = 0;
    for (const auto& case_id : case_ids) {
        std::vector<std::string> argv = command;
        for (auto& arg : argv) {
            const auto pos = arg.find("{case}");
            if (pos != std::string::npos) arg.replace(pos, 6, case_id);
        }
        pabench::EfficiencyRecord rec = pabench::measure_command(
            argv, case_id,
            timeout > 0 ? std::optional<double>(timeout) : std::nullopt);
        if (!gpu_log_dir.empty()) {
            const fs::path log = fs::path(gpu_log_dir) / (case_id + ".csv");
            if (fs::is_regular_file(log)) {
                rec.gpu_max_mb = pabench::ingest_gpu_log(log.string());
            }
        }
        if (rec.failed) ++failed;
        records.push_back(std::move(rec));
        std::printf("%s: %.3f s%s\n", case_id.c_str(),
                    records.back().runtime_seconds,
                    records.back().failed ? " (failed)" : "");
    }
    pabench::io_detail::save_json_file(
        pabench::efficiency_to_json(team_id, records), out_path);
    return failed == 0 ? kExitOk : kExitPartial;
}

int run_rank(const ConfigCli& cfg_cli,
             const std::vector<std::string>& team_patterns,
             const std::vector<std::string>& efficiency_patterns,
             const std::string& out_dir) {
    const pabench::EvalConfig config = cfg_cli.resolve();
    const LoadedTeams teams =
        load_teams(team_patterns, efficiency_patterns, config.gpu_policy);
    const pabench::RankingResult result = pabench::rank_teams(
        teams.records, config.weights, config.missing_policy);

    fs::create_directories(out_dir);
    json ranking_json = pabench::ranking_to_json(result);
    ranking_json["config"] = pabench::to_json(config);
    pabench::io_detail::save_json_file(
        ranking_json, (fs::path(out_dir) / "ranking.json").string());
    pabench::write_text_file((fs::path(out_dir) / "ranking.csv").string(),
                             ranking_csv(result));

    const auto bubbles = pabench::bubble_data(teams.records);
    pabench::write_text_file((fs::path(out_dir) / "bubble.csv").string(),
                             bubble_csv(bubbles));

    const pabench::StabilityTable stab = pabench::stability_table(
        teams.records, config.weights, config.missing_policy);
    std::ostringstream stab_csv;
    stab_csv << "team_id";
    for (const char* v : stab.variants) stab_csv << ',' << v;
    stab_csv << "\n";
    for (std::size_t i = 0; i < stab.team_ids.size(); ++i) {
        stab_csv << stab.team_ids[i];
        for (const double r : stab.ranks[i]) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.6g", r);
            stab_csv << ',' << buf;
        }
        stab_csv << "\n";
    }
    pabench::write_text_file((fs::path(out_dir) / "stability.csv").string(),
                             stab_csv.str());

    for (const auto& t : result.teams) {
        std::printf("#%d %s (average rank %.3f)\n", t.position,
                    t.team_id.c_str(), t.average_rank);
    }
    return kExitOk;
}

int run_significance(const ConfigCli& cfg_cli,
                     const std::vector<std::string>& team_patterns,
                     const std::string& metric, const std::string& out_path) {
    const pabench::EvalConfig config = cfg_cli.resolve();
    const LoadedTeams teams = load_teams(team_patterns, {}, config.gpu_policy);
    const pabench::MetricId id = metric_id_from_name(metric);

    std::vector<std::string> ids;
    for (const auto& t : teams.records) ids.push_back(t.team_id);
    const pabench::SignificanceMatrix matrix = pabench::significance_map(
        ids, metric_table(teams, id), pabench::metric_direction(id),
        config.alpha, metric);
    pabench::io_detail::save_json_file(pabench::significance_to_json(matrix),
                                       out_path);
    std::printf("%zu-team significance map for %s -> %s\n", ids.size(),
                metric.c_str(), out_path.c_str());
    return kExitOk;
}

int run_report(const ConfigCli& cfg_cli, const std::string& ranking_path,
               const std::vector<std::string>& team_patterns,
               const std::vector<std::string>& efficiency_patterns,
               const std::string& out_dir) {
    pabench::EvalConfig config = cfg_cli.resolve();
    if (!ranking_path.empty()) {
        // reuse the weights and missing policy the ranking run used
        const json r = pabench::io_detail::load_json_file(ranking_path);
        if (r.contains("weights")) {
            config.weights.w_branch = r["weights"].value(
                "w_branch", config.weights.w_branch);
            config.weights.w_main =
                r["weights"].value("w_main", config.weights.w_main);
        }
        if (r.value("missing_policy", "rank-worst") == std::string("exclude")) {
            config.missing_policy = pabench::MissingPolicy::Exclude;
        }
    }
    const LoadedTeams teams =
        load_teams(team_patterns, efficiency_patterns, config.gpu_policy);
    const pabench::RankingResult ranking = pabench::rank_teams(
        teams.records, config.weights, config.missing_policy);

    fs::create_directories(out_dir);
    const pabench::ExportedTables tables =
        pabench::export_tables(ranking, teams.records);
    pabench::write_text_file((fs::path(out_dir) / "summary.csv").string(),
                             tables.summary_csv);
    pabench::write_text_file((fs::path(out_dir) / "per_case.csv").string(),
                             tables.per_case_csv);
    pabench::io_detail::save_json_file(
        tables.json, (fs::path(out_dir) / "summary.json").string());

    std::vector<std::string> ids;
    for (const auto& t : teams.records) ids.push_back(t.team_id);

    for (int m = 0; m < 6; ++m) {
        const auto id = static_cast<pabench::MetricId>(m);
        const auto table = metric_table(teams, id);

        std::vector<pabench::BoxplotSeries> series;
        for (std::size_t t = 0; t < ids.size(); ++t) {
            pabench::BoxplotSeries s;
            s.team_id = ids[t];
            for (const auto& v : table[t]) {
                if (v.has_value()) s.values.push_back(*v);
            }
            if (!s.values.empty()) series.push_back(std::move(s));
        }
        const bool is_dsc = m < 3;
        if (!series.empty()) {
            const auto spec = pabench::make_boxplot_spec(
                series, pabench::metric_name(id), is_dsc ? "" : "mm",
                pabench::metric_direction(id));
            pabench::write_text_file(
                (fs::path(out_dir) /
                 ("boxplot_" + std::string(pabench::metric_name(id)) + ".svg"))
                    .string(),
                pabench::render_boxplot(spec));
        }

        const pabench::SignificanceMatrix matrix = pabench::significance_map(
            ids, table, pabench::metric_direction(id), config.alpha,
            pabench::metric_name(id));
        pabench::write_text_file(
            (fs::path(out_dir) /
             ("significance_" + std::string(pabench::metric_name(id)) + ".svg"))
                .string(),
            pabench::render_significance(matrix));
    }

    const auto bubbles = pabench::bubble_data(teams.records);
    pabench::write_text_file((fs::path(out_dir) / "bubble.csv").string(),
                             bubble_csv(bubbles));
    pabench::write_text_file((fs::path(out_dir) / "bubble.svg").string(),
                             pabench::render_bubble(bubbles));
    std::printf("report written to %s\n", out_dir.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "pabench: evaluation and ranking engine for two-level vascular "
        "segmentation benchmarks"};
    app.require_subcommand(1);

    // phantom
    auto* phantom = app.add_subcommand(
        "phantom", "generate synthetic thorax/vessel fixtures with exact "
                   "ground truth");
    std::string ph_out;
    int ph_cases = 1, ph_depth = 7;
    std::uint64_t ph_seed = 1;
    std::vector<int> ph_dims{128, 128, 128};
    std::vector<double> ph_spacing{0.7, 0.7, 1.0};
    double ph_root_radius = 0, ph_decay = 0, ph_noise = 20.0;
    phantom->add_option("--out", ph_out, "output directory")->required();
    phantom->add_option("--cases", ph_cases, "number of cases");
    phantom->add_option("--seed", ph_seed, "master seed");
    phantom->add_option("--dims", ph_dims, "grid size, e.g. 128,128,128")
        ->delimiter(',')
        ->expected(3);
    phantom->add_option("--spacing", ph_spacing, "voxel spacing in mm")
        ->delimiter(',')
        ->expected(3);
    phantom->add_option("--depth", ph_depth, "bifurcation depth");
    phantom->add_option("--root-radius", ph_root_radius,
                        "trunk radius in mm (default scales with the grid)");
    phantom->add_option("--decay", ph_decay,
                        "radius decay per bifurcation (default 2^(-1/3))");
    phantom->add_option("--noise-sigma", ph_noise,
                        "CT noise standard deviation (0 disables)");

    // evaluate
    auto* evaluate = app.add_subcommand(
        "evaluate", "score predictions against ground truth, case by case");
    ConfigCli ev_cfg;
    std::string ev_gt, ev_pred, ev_lung, ev_ct, ev_team = "team",
                ev_out = "scores.json";
    bool ev_extract = false;
    evaluate->add_option("--gt", ev_gt, "ground-truth directory")->required();
    evaluate->add_option("--pred", ev_pred, "prediction directory")->required();
    evaluate->add_option("--lung", ev_lung, "lung mask directory");
    evaluate->add_option("--ct", ev_ct,
                         "CT directory (needed with --extract-lungs)");
    evaluate->add_flag("--extract-lungs", ev_extract,
                       "derive lung masks from CT by thresholding");
    evaluate->add_option("--team-id", ev_team, "team id stored in the output");
    evaluate->add_option("--out", ev_out, "output scores JSON path");
    ev_cfg.attach(evaluate);

    // lungmask
    auto* lungmask = app.add_subcommand(
        "lungmask", "extract a lung mask from one CT volume");
    ConfigCli lm_cfg;
    std::string lm_ct, lm_out;
    lungmask->add_option("ct", lm_ct, "CT volume (.nii/.nii.gz)")->required();
    lungmask->add_option("--out", lm_out, "output mask path")->required();
    lm_cfg.attach(lungmask);

    // measure
    auto* measure = app.add_subcommand(
        "measure", "run a command per case and record wall-clock runtime");
    std::string me_team = "team", me_out = "efficiency.json", me_gpu_dir;
    std::vector<std::string> me_cases, me_cmd;
    double me_timeout = 0;
    measure->add_option("--team-id", me_team, "team id stored in the output");
    measure->add_option("--cases", me_cases, "case ids")->delimiter(',');
    measure->add_option("--gpu-log-dir", me_gpu_dir,
                        "directory of <case>.csv GPU sampler logs");
    measure->add_option("--timeout", me_timeout,
                        "per-case ceiling in seconds (0 = none)");
    measure->add_option("--out", me_out, "output efficiency JSON path");
    measure
        ->add_option("--cmd", me_cmd,
                     "command to run; {case} expands to the case id")
        ->required()
        ->expected(-1);

    // rank
    auto* rank = app.add_subcommand(
        "rank", "apply the four-step ranking scheme to team score files");
    ConfigCli rk_cfg;
    std::vector<std::string> rk_teams, rk_eff;
    std::string rk_out = ".";
    rank->add_option("--teams", rk_teams, "team score JSONs (globs ok)")
        ->required();
    rank->add_option("--efficiency", rk_eff, "efficiency JSONs (globs ok)");
    rank->add_option("--out-dir", rk_out, "output directory");
    rk_cfg.attach(rank);

    // significance
    auto* significance = app.add_subcommand(
        "significance",
        "pairwise one-sided Wilcoxon significance map for one metric");
    ConfigCli sg_cfg;
    std::vector<std::string> sg_teams;
    std::string sg_metric = "dsc_weighted", sg_out = "significance.json";
    significance->add_option("--teams", sg_teams, "team score JSONs (globs ok)")
        ->required();
    significance->add_option("--metric", sg_metric,
                             "metric name, e.g. dsc_weighted");
    significance->add_option("--out", sg_out, "output JSON path");
    sg_cfg.attach(significance);

    // report
    auto* report = app.add_subcommand(
        "report", "render boxplots, significance maps, and summary tables");
    ConfigCli rp_cfg;
    std::vector<std::string> rp_teams, rp_eff;
    std::string rp_ranking, rp_out = "report";
    report->add_option("--ranking", rp_ranking,
                       "ranking.json from a previous rank run (reuses its "
                       "weights and policies)");
    report->add_option("--scores", rp_teams, "team score JSONs (globs ok)")
        ->required();
    report->add_option("--efficiency", rp_eff, "efficiency JSONs (globs ok)");
    report->add_option("--out-dir", rp_out, "output directory");
    rp_cfg.attach(report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (phantom->parsed()) {
            return run_phantom(ph_out, ph_cases, ph_seed, ph_dims, ph_spacing,
                               ph_depth, ph_root_radius, ph_decay, ph_noise);
        }
        if (evaluate->parsed()) {
            return run_evaluate(ev_cfg, ev_gt, ev_pred, ev_lung, ev_ct,
                                ev_extract, ev_team, ev_out);
        }
        if (lungmask->parsed()) {
            return run_lungmask(lm_cfg, lm_ct, lm_out);
        }
        if (measure->parsed()) {
            return run_measure(me_team, me_cases, me_cmd, me_gpu_dir,
                               me_timeout, me_out);
        }
        if (rank->parsed()) {
            return run_rank(rk_cfg, rk_teams, rk_eff, rk_out);
        }
        if (significance->parsed()) {
            return run_significance(sg_cfg, sg_teams, sg_metric, sg_out);
        }
        if (report->parsed()) {
            return run_report(rp_cfg, rp_ranking, rp_teams, rp_eff, rp_out);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    return kExitUsage;
}
