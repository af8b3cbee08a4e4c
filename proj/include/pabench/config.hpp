#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "pabench/efficiency.hpp"
#include "pabench/metrics.hpp"
#include "pabench/ranking.hpp"

namespace pabench {

class ConfigError : public Error {
public:
    using Error::Error;
};

enum class LungSource : std::uint8_t {
    ExternalMask,    // per-case lung mask files supplied alongside the data
    ThresholdExtract // threshold + connected components on the CT volume
};

/// Every protocol parameter in one place. Each run echoes the resolved
/// configuration into its outputs so results are self-describing.
struct EvalConfig {
    LevelWeights weights{};
    double alpha = 0.05;
    bool hd95_surface = true;
    bool hd95_pooled = false;
    LungSource lung_source = LungSource::ExternalMask;
    double lung_threshold_hu = -320.0;
    int lung_closing_radius = 3;
    MissingPolicy missing_policy = MissingPolicy::RankWorst;
    GpuPolicy gpu_policy = GpuPolicy::MeanOfMax;
    unsigned threads = 0; // 0 = hardware concurrency

    Hd95Options hd95_options() const {
        Hd95Options o;
        o.use_surface = hd95_surface;
        o.pooled_percentile = hd95_pooled;
        o.threads = threads;
        return o;
    }

    void validate() const {
        try {
            weights.validate();
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
        if (!(alpha > 0.0 && alpha < 1.0)) {
            throw ConfigError("alpha must lie in (0,1), got " +
                              std::to_string(alpha));
        }
        if (lung_closing_radius < 0) {
            throw ConfigError("lung closing radius must be >= 0");
        }
    }
};

inline nlohmann::json to_json(const EvalConfig& c) {
    return {
        {"w_branch", c.weights.w_branch},
        {"w_main", c.weights.w_main},
        {"alpha", c.alpha},
        {"hd95_surface", c.hd95_surface},
        {"hd95_pooled", c.hd95_pooled},
        {"lung_source", c.lung_source == LungSource::ExternalMask
                            ? "external-mask"
                            : "threshold-extract"},
        {"lung_threshold_hu", c.lung_threshold_hu},
        {"lung_closing_radius", c.lung_closing_radius},
        {"missing_policy", c.missing_policy == MissingPolicy::RankWorst
                               ? "rank-worst"
                               : "exclude"},
        {"gpu_policy",
         c.gpu_policy == GpuPolicy::MeanOfMax ? "mean-of-max" : "max-of-max"},
        {"threads", c.threads},
    };
}

/// Applies a flat JSON object on top of an existing config. Unknown keys
/// are rejected so typos cannot silently run a different protocol.
inline EvalConfig config_from_json(const nlohmann::json& j,
                                   EvalConfig base = {}) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "w_branch") {
                base.weights.w_branch = value.get<double>();
            } else if (key == "w_main") {
                base.weights.w_main = value.get<double>();
            } else if (key == "alpha") {
                base.alpha = value.get<double>();
            } else if (key == "hd95_surface") {
                base.hd95_surface = value.get<bool>();
            } else if (key == "hd95_pooled") {
                base.hd95_pooled = value.get<bool>();
            } else if (key == "lung_source") {
                const std::string s = value.get<std::string>();
                if (s == "external-mask") {
                    base.lung_source = LungSource::ExternalMask;
                } else if (s == "threshold-extract") {
                    base.lung_source = LungSource::ThresholdExtract;
                } else {
                    throw ConfigError("lung_source must be external-mask or "
                                      "threshold-extract, got " + s);
                }
            } else if (key == "lung_threshold_hu") {
                base.lung_threshold_hu = value.get<double>();
            } else if (key == "lung_closing_radius") {
                base.lung_closing_radius = value.get<int>();
            } else if (key == "missing_policy") {
                const std::string s = value.get<std::string>();
                if (s == "rank-worst") {
                    base.missing_policy = MissingPolicy::RankWorst;
                } else if (s == "exclude") {
                    base.missing_policy = MissingPolicy::Exclude;
                } else {
                    throw ConfigError(
                        "missing_policy must be rank-worst or exclude, got " + s);
                }
            } else if (key == "gpu_policy") {
                const std::string s = value.get<std::string>();
                if (s == "mean-of-max") {
                    base.gpu_policy = GpuPolicy::MeanOfMax;
                } else if (s == "max-of-max") {
                    base.gpu_policy = GpuPolicy::MaxOfMax;
                } else {
                    throw ConfigError(
                        "gpu_policy must be mean-of-max or max-of-max, got " + s);
                }
            } else if (key == "threads") {
                base.threads = value.get<unsigned>();
            } else {
                throw ConfigError("unknown config key: " + key);
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config key " + key + ": " + e.what());
        }
    }
    base.validate();
    return base;
}

} // namespace pabench
