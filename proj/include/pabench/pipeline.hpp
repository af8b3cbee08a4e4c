#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pabench/config.hpp"
#include "pabench/metrics.hpp"
#include "pabench/nifti.hpp"
#include "pabench/parallel.hpp"
#include "pabench/phantom.hpp"
#include "pabench/regions.hpp"
#include "pabench/scores_io.hpp"

namespace pabench {

namespace fs = std::filesystem;

/// Strips .nii / .nii.gz, returning the case id, or nullopt for other files.
inline std::optional<std::string> nifti_stem(const std::string& filename) {
    auto ends_with = [&](const std::string& suffix) {
        return filename.size() > suffix.size() &&
               filename.compare(filename.size() - suffix.size(), suffix.size(),
                                suffix) == 0;
    };
    if (ends_with(".nii.gz")) return filename.substr(0, filename.size() - 7);
    if (ends_with(".nii")) return filename.substr(0, filename.size() - 4);
    return std::nullopt;
}

/// Case discovery. Two layouts are accepted:
///   flat:      DIR/<case_id>.nii.gz
///   per-case:  DIR/<case_id>/<role>.nii.gz   (phantom output layout)
/// `role_names` lists acceptable filenames for the per-case layout in
/// preference order (e.g. {"pred.nii.gz", "gt.nii.gz"}).
inline std::map<std::string, std::string> discover_cases(
    const std::string& dir, const std::vector<std::string>& role_names) {
    if (!fs::is_directory(dir)) {
        throw ConfigError(dir + " is not a directory");
    }
    std::map<std::string, std::string> found;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file()) {
            const auto stem = nifti_stem(entry.path().filename().string());
            if (stem.has_value()) found[*stem] = entry.path().string();
        } else if (entry.is_directory()) {
            for (const auto& role : role_names) {
                const fs::path candidate = entry.path() / role;
                if (fs::is_regular_file(candidate)) {
                    found[entry.path().filename().string()] = candidate.string();
                    break;
                }
            }
        }
    }
    return found;
}

struct CasePaths {
    std::string case_id;
    std::string gt;
    std::string pred; // empty when the prediction is missing
    std::string lung; // external lung mask (lung_source ExternalMask)
    std::string ct;   // CT volume (lung_source ThresholdExtract)
};

/// Pairs cases across the ground-truth, prediction, and lung/CT
/// directories by case id. The ground-truth directory defines the roster;
/// a case without a counterpart is kept with the missing path empty so the
/// evaluator can mark it failed.
inline std::vector<CasePaths> pair_cases(const std::string& gt_dir,
                                         const std::string& pred_dir,
                                         const std::string& lung_dir,
                                         const std::string& ct_dir) {
    const auto gt = discover_cases(gt_dir, {"gt.nii.gz", "gt.nii"});
    if (gt.empty()) {
        throw ConfigError("no cases found in ground-truth directory " + gt_dir);
    }
    const auto pred =
        discover_cases(pred_dir, {"pred.nii.gz", "pred.nii", "gt.nii.gz", "gt.nii"});
    std::map<std::string, std::string> lung, ct;
    if (!lung_dir.empty()) {
        lung = discover_cases(lung_dir, {"lung.nii.gz", "lung.nii"});
    }
    if (!ct_dir.empty()) {
        ct = discover_cases(ct_dir, {"ct.nii.gz", "ct.nii"});
    }

    std::vector<CasePaths> cases;
    for (const auto& [id, gt_path] : gt) {
        CasePaths p;
        p.case_id = id;
        p.gt = gt_path;
        if (const auto it = pred.find(id); it != pred.end()) p.pred = it->second;
        if (const auto it = lung.find(id); it != lung.end()) p.lung = it->second;
        if (const auto it = ct.find(id); it != ct.end()) p.ct = it->second;
        cases.push_back(std::move(p));
    }
    return cases; // std::map iteration keeps ids sorted
}

/// Scores one case. Any per-case failure is captured in the score record
/// instead of aborting the batch.
inline CaseScore evaluate_case(const CasePaths& paths, const EvalConfig& config,
                               unsigned edt_threads) {
    CaseScore score;
    score.case_id = paths.case_id;
    try {
        if (paths.pred.empty()) {
            throw Error("missing prediction file");
        }
        const VoxelGrid gt_grid = read_nifti(paths.gt);
        const VoxelGrid pred_grid = read_nifti(paths.pred);
        check_compatible(gt_grid, pred_grid);
        check_same_orientation(gt_grid, pred_grid);
        const BinaryMask gt = binarize(gt_grid);
        const BinaryMask pred = binarize(pred_grid);

        BinaryMask lung;
        if (config.lung_source == LungSource::ExternalMask) {
            if (paths.lung.empty()) {
                throw Error("missing lung mask (lung_source=external-mask)");
            }
            const VoxelGrid lung_grid = read_nifti(paths.lung);
            check_compatible(gt_grid, lung_grid);
            lung = binarize(lung_grid);
        } else {
            if (paths.ct.empty()) {
                throw Error("missing CT volume (lung_source=threshold-extract)");
            }
            const VoxelGrid ct = read_nifti(paths.ct);
            check_compatible(gt_grid, ct);
            lung = extract_lungs(ct, config.lung_threshold_hu,
                                 config.lung_closing_radius, edt_threads);
        }

        const RegionSplit gt_split = split_levels(gt, lung);
        const RegionSplit pred_split = split_levels(pred, lung);
        Hd95Options hd = config.hd95_options();
        hd.threads = edt_threads;
        score = score_case(gt_split, pred_split, config.weights,
                           gt_grid.spacing, hd);
        score.case_id = paths.case_id;
    } catch (const std::exception& e) {
        score = CaseScore{};
        score.case_id = paths.case_id;
        score.failed = true;
        score.error = e.what();
    }
    return score;
}

/// Evaluates a whole case list, parallel across cases, output ordered by
/// case id regardless of completion order.
inline std::vector<CaseScore> evaluate_cases(const std::vector<CasePaths>& cases,
                                             const EvalConfig& config) {
    std::vector<CaseScore> scores(cases.size());
    // one case per worker; the per-case transforms run single-threaded
    parallel_for(cases.size(), config.threads, [&](std::size_t i) {
        scores[i] = evaluate_case(cases[i], config, 1);
    });
    return scores;
}

/// Phantom fixture emission: one directory per case holding gt.nii.gz,
/// ct.nii.gz, and lung.nii.gz, plus a manifest listing every case seed.
inline nlohmann::json write_phantom_set(const std::string& out_dir,
                                        int case_count,
                                        const PhantomSpec& base) {
    base.validate();
    if (case_count < 1) throw ConfigError("case count must be >= 1");
    fs::create_directories(out_dir);

    SplitMix64 seeder(base.seed);
    std::vector<std::uint64_t> case_seeds;
    for (int i = 0; i < case_count; ++i) case_seeds.push_back(seeder.next());

    nlohmann::json manifest{
        {"seed", base.seed},
        {"cases", case_count},
        {"dims", base.dims},
        {"spacing", base.spacing},
        {"depth", base.depth},
        {"root_radius", base.root_radius},
        {"radius_decay", base.radius_decay},
        {"noise_sigma", base.noise_sigma},
    };
    nlohmann::json case_list = nlohmann::json::array();

    for (int i = 0; i < case_count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "case_%03d", i);
        const fs::path dir = fs::path(out_dir) / name;
        fs::create_directories(dir);

        PhantomSpec spec = base;
        spec.seed = case_seeds[static_cast<std::size_t>(i)];
        const TubeTree tree = generate_tree(spec);
        const BinaryMask gt = rasterize(tree, spec.dims, spec.spacing);
        const VoxelGrid ct = synthesize_ct(spec, tree);
        const BinaryMask lungs = lung_mask(spec);

        write_nifti(to_grid(gt), (dir / "gt.nii.gz").string());
        write_nifti(ct, (dir / "ct.nii.gz").string());
        write_nifti(to_grid(lungs), (dir / "lung.nii.gz").string());

        case_list.push_back({{"case_id", name}, {"seed", spec.seed}});
    }
    manifest["case_list"] = case_list;
    io_detail::save_json_file(manifest, (fs::path(out_dir) / "manifest.json").string());
    return manifest;
}

} // namespace pabench
