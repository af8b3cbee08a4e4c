#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "pabench/config.hpp"
#include "pabench/morphology.hpp"
#include "pabench/pipeline.hpp"
#include "pabench/scores_io.hpp"
#include "support/oracles.hpp"

using namespace pabench;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "pabench_pipeline" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

PhantomSpec tiny_spec(std::uint64_t seed) {
    PhantomSpec s = PhantomSpec::with_defaults({48, 48, 48}, {0.9, 0.9, 1.2}, seed);
    s.depth = 3;
    return s;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

} // namespace

TEST_CASE("phantom set writes one directory per case plus a manifest") {
    const fs::path out = fresh_dir("set3");
    write_phantom_set(out.string(), 3, tiny_spec(77));
    CHECK(fs::is_regular_file(out / "manifest.json"));
    for (const char* c : {"case_000", "case_001", "case_002"}) {
        CHECK(fs::is_regular_file(out / c / "gt.nii.gz"));
        CHECK(fs::is_regular_file(out / c / "ct.nii.gz"));
        CHECK(fs::is_regular_file(out / c / "lung.nii.gz"));
    }
}

TEST_CASE("phantom sets are byte-identical across runs") {
    const fs::path a = fresh_dir("det_a");
    const fs::path b = fresh_dir("det_b");
    write_phantom_set(a.string(), 2, tiny_spec(123));
    write_phantom_set(b.string(), 2, tiny_spec(123));
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
    for (const char* f : {"gt.nii.gz", "ct.nii.gz", "lung.nii.gz"}) {
        CHECK(slurp(a / "case_001" / f) == slurp(b / "case_001" / f));
    }
}

TEST_CASE("case discovery handles both layouts") {
    const fs::path root = fresh_dir("layouts");
    write_phantom_set((root / "set").string(), 2, tiny_spec(5));
    // per-case layout
    auto per_case = discover_cases((root / "set").string(), {"gt.nii.gz"});
    CHECK(per_case.size() == 2);
    CHECK(per_case.count("case_000") == 1);
    // flat layout
    fs::create_directories(root / "flat");
    fs::copy_file(root / "set" / "case_000" / "gt.nii.gz",
                  root / "flat" / "PA000123.nii.gz");
    auto flat = discover_cases((root / "flat").string(), {"gt.nii.gz"});
    REQUIRE(flat.size() == 1);
    CHECK(flat.count("PA000123") == 1);
}

TEST_CASE("self-evaluation scores perfectly") {
    const fs::path root = fresh_dir("self");
    write_phantom_set((root / "set").string(), 2, tiny_spec(9));
    EvalConfig config;
    config.threads = 1;
    const auto cases = pair_cases((root / "set").string(), (root / "set").string(),
                                  (root / "set").string(), "");
    const auto scores = evaluate_cases(cases, config);
    REQUIRE(scores.size() == 2);
    for (const auto& s : scores) {
        CHECK_FALSE(s.failed);
        CHECK(*s.dsc_weighted == 1.0);
        CHECK(*s.hd95_weighted == 0.0);
    }
}

TEST_CASE("a missing prediction marks the case failed") {
    const fs::path root = fresh_dir("missing");
    write_phantom_set((root / "gt").string(), 2, tiny_spec(10));
    fs::create_directories(root / "pred");
    fs::copy_file(root / "gt" / "case_000" / "gt.nii.gz",
                  root / "pred" / "case_000.nii.gz");
    EvalConfig config;
    config.threads = 1;
    const auto cases = pair_cases((root / "gt").string(), (root / "pred").string(),
                                  (root / "gt").string(), "");
    const auto scores = evaluate_cases(cases, config);
    REQUIRE(scores.size() == 2);
    CHECK_FALSE(scores[0].failed);
    CHECK(scores[1].failed);
    CHECK(scores[1].error.find("missing prediction") != std::string::npos);
    CHECK_FALSE(scores[1].dsc_weighted.has_value());
}

TEST_CASE("a dilated prediction scores between 0 and 1 with bounded HD95") {
    const fs::path root = fresh_dir("dilated");
    const PhantomSpec spec = tiny_spec(21);
    write_phantom_set((root / "gt").string(), 1, spec);

    // build the degraded prediction from the emitted ground truth
    const VoxelGrid gt_grid =
        read_nifti((root / "gt" / "case_000" / "gt.nii.gz").string());
    const BinaryMask gt = binarize(gt_grid);
    const BinaryMask pred = dilate_cross(gt, 1);
    fs::create_directories(root / "pred");
    write_nifti(to_grid(pred), (root / "pred" / "case_000.nii.gz").string());

    EvalConfig config;
    config.threads = 1;
    const auto cases = pair_cases((root / "gt").string(), (root / "pred").string(),
                                  (root / "gt").string(), "");
    const auto scores = evaluate_cases(cases, config);
    REQUIRE(scores.size() == 1);
    const CaseScore& s = scores[0];
    REQUIRE_FALSE(s.failed);
    CHECK(*s.dsc_weighted > 0.0);
    CHECK(*s.dsc_weighted < 1.0);
    const double max_sp = 1.2, diag = std::sqrt(0.9 * 0.9 + 0.9 * 0.9 + 1.2 * 1.2);
    CHECK(*s.hd95_weighted <= max_sp + diag);

    // cross-check one level against the brute-force oracle
    const VoxelGrid lung_grid =
        read_nifti((root / "gt" / "case_000" / "lung.nii.gz").string());
    const RegionSplit gs = split_levels(gt, binarize(lung_grid));
    const RegionSplit ps = split_levels(pred, binarize(lung_grid));
    const auto brute =
        oracle::hd95_brute(gs.branch, ps.branch, gt_grid.spacing);
    REQUIRE(brute.has_value());
    CHECK(*s.hd95_branch == Catch::Approx(*brute).margin(1e-9));
}

TEST_CASE("threshold extraction feeds the same pipeline") {
    const fs::path root = fresh_dir("extract");
    write_phantom_set((root / "set").string(), 1, tiny_spec(31));
    EvalConfig config;
    config.threads = 1;
    config.lung_source = LungSource::ThresholdExtract;
    const auto cases = pair_cases((root / "set").string(), (root / "set").string(),
                                  "", (root / "set").string());
    const auto scores = evaluate_cases(cases, config);
    REQUIRE(scores.size() == 1);
    CHECK_FALSE(scores[0].failed);
    CHECK(*scores[0].dsc_weighted == 1.0);
}

TEST_CASE("scores JSON round trips") {
    std::vector<CaseScore> cases(2);
    cases[0].case_id = "a";
    cases[0].dsc_main = 0.9;
    cases[0].dsc_branch = 0.8;
    cases[0].dsc_weighted = 0.82;
    cases[0].hd95_main = 4.5;
    cases[1].case_id = "b";
    cases[1].failed = true;
    cases[1].error = "missing prediction file";

    const nlohmann::json doc = team_scores_to_json("team_x", EvalConfig{}, cases);
    const fs::path path = fresh_dir("scores") / "scores.json";
    io_detail::save_json_file(doc, path.string());
    const TeamScoresFile f = read_team_scores(path.string());
    CHECK(f.team_id == "team_x");
    REQUIRE(f.cases.size() == 2);
    CHECK(*f.cases[0].dsc_main == 0.9);
    CHECK(*f.cases[0].hd95_main == 4.5);
    CHECK_FALSE(f.cases[0].hd95_branch.has_value());
    CHECK(f.cases[1].failed);
    CHECK_FALSE(f.cases[1].dsc_main.has_value());
}

TEST_CASE("efficiency JSON round trips") {
    std::vector<EfficiencyRecord> recs(2);
    recs[0].case_id = "a";
    recs[0].runtime_seconds = 7.92;
    recs[0].gpu_max_mb = 1674.0;
    recs[1].case_id = "b";
    recs[1].runtime_seconds = 60.0;
    recs[1].failed = true;
    recs[1].timed_out = true;
    recs[1].exit_status = -1;

    const fs::path path = fresh_dir("eff") / "efficiency.json";
    io_detail::save_json_file(efficiency_to_json("team_x", recs), path.string());
    const EfficiencyFile f = read_efficiency(path.string());
    CHECK(f.team_id == "team_x");
    REQUIRE(f.records.size() == 2);
    CHECK(f.records[0].gpu_max_mb == 1674.0);
    CHECK(f.records[1].timed_out);
}

TEST_CASE("significance matrix serializes its team order and cells") {
    std::vector<std::string> ids{"A", "B"};
    std::vector<std::vector<std::optional<double>>> scores(2);
    for (int c = 0; c < 12; ++c) {
        scores[0].push_back(2.0 + c);
        scores[1].push_back(1.0 + c);
    }
    const SignificanceMatrix m =
        significance_map(ids, scores, Direction::HigherBetter, 0.05, "dsc");
    const nlohmann::json j = significance_to_json(m);
    CHECK(j.at("teams").at(0) == "A");
    CHECK(j.at("superior").at(0).at(1) == true);
    CHECK(j.at("superior").at(1).at(0) == false);
    CHECK(j.at("alpha") == 0.05);
}

TEST_CASE("config JSON applies and rejects unknown keys") {
    EvalConfig c = config_from_json(nlohmann::json{{"w_branch", 0.6},
                                                   {"w_main", 0.4},
                                                   {"alpha", 0.01},
                                                   {"hd95_pooled", true},
                                                   {"lung_source",
                                                    "threshold-extract"}});
    CHECK(c.weights.w_branch == 0.6);
    CHECK(c.alpha == 0.01);
    CHECK(c.hd95_pooled);
    CHECK(c.lung_source == LungSource::ThresholdExtract);

    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"nonsense", 1}}),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"alpha", 1.5}}),
                    ConfigError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json{{"w_branch", 0.5}}),
                    ConfigError); // weights no longer sum to 1
}

TEST_CASE("config echo appears in the scores document") {
    EvalConfig c;
    c.alpha = 0.01;
    const nlohmann::json doc = team_scores_to_json("t", c, {});
    CHECK(doc.at("config").at("alpha") == 0.01);
    CHECK(doc.at("config").at("lung_source") == "external-mask");
}

TEST_CASE("evaluation output is deterministic") {
    const fs::path root = fresh_dir("determinism");
    write_phantom_set((root / "set").string(), 2, tiny_spec(64));
    EvalConfig config;
    config.threads = 2;
    const auto cases = pair_cases((root / "set").string(), (root / "set").string(),
                                  (root / "set").string(), "");
    const auto s1 = evaluate_cases(cases, config);
    const auto s2 = evaluate_cases(cases, config);
    const auto j1 = team_scores_to_json("t", config, s1).dump();
    const auto j2 = team_scores_to_json("t", config, s2).dump();
    CHECK(j1 == j2);
}
