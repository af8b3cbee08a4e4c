#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pabench/metrics.hpp"
#include "pabench/ranking.hpp"
#include "pabench/rng.hpp"
#include "pabench/scores_io.hpp"
#include "pabench/stats.hpp"

namespace pabench {

namespace svg_detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (const char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

/// Short general-precision label for axis ticks.
inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

} // namespace svg_detail

struct BoxplotSeries {
    std::string team_id;
    std::vector<double> values;
};

/// Input for the dot-and-boxplot rendering. Teams are listed in display
/// order (left to right); make_boxplot_spec arranges them by mean score,
/// best first.
struct BoxplotSpec {
    std::vector<BoxplotSeries> teams;
    std::string metric_label;
    std::string unit;
    Direction direction = Direction::HigherBetter;
    std::uint64_t jitter_seed = 7;
};

inline BoxplotSpec make_boxplot_spec(std::vector<BoxplotSeries> teams,
                                     const std::string& metric_label,
                                     const std::string& unit,
                                     Direction direction,
                                     std::uint64_t jitter_seed = 7) {
    std::stable_sort(teams.begin(), teams.end(),
                     [&](const BoxplotSeries& a, const BoxplotSeries& b) {
                         auto mean = [](const BoxplotSeries& s) {
                             return s.values.empty()
                                        ? std::numeric_limits<double>::quiet_NaN()
                                        : std::accumulate(s.values.begin(),
                                                          s.values.end(), 0.0) /
                                              static_cast<double>(s.values.size());
                         };
                         const double ma = mean(a), mb = mean(b);
                         if (std::isnan(ma)) return false;
                         if (std::isnan(mb)) return true;
                         return direction == Direction::HigherBetter ? ma > mb
                                                                     : ma < mb;
                     });
    return BoxplotSpec{std::move(teams), metric_label, unit, direction,
                       jitter_seed};
}

/// Nearest-rank order statistics of one team's values, with whiskers to the
/// furthest point within 1.5 IQR of the box.
struct BoxStats {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
    double whisker_lo = 0, whisker_hi = 0;
    std::vector<double> outliers;
};

inline BoxStats box_stats(const std::vector<double>& values) {
    if (values.empty()) throw Error("boxplot: empty value list");
    BoxStats b;
    b.min = *std::min_element(values.begin(), values.end());
    b.max = *std::max_element(values.begin(), values.end());
    b.q1 = percentile_nearest_rank(values, 0.25);
    b.median = percentile_nearest_rank(values, 0.50);
    b.q3 = percentile_nearest_rank(values, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr;
    const double hi_fence = b.q3 + 1.5 * iqr;
    b.whisker_lo = b.max;
    b.whisker_hi = b.min;
    for (const double v : values) {
        if (v >= lo_fence) b.whisker_lo = std::min(b.whisker_lo, v);
        if (v <= hi_fence) b.whisker_hi = std::max(b.whisker_hi, v);
        if (v < lo_fence || v > hi_fence) b.outliers.push_back(v);
    }
    return b;
}

/// Standalone SVG 1.1 dot-and-boxplot: one box per team, raw values as
/// seeded jittered dots, fence outliers ringed. Deterministic byte output.
inline std::string render_boxplot(const BoxplotSpec& spec) {
    if (spec.teams.empty()) throw Error("boxplot: no teams");
    for (const auto& t : spec.teams) {
        if (t.values.empty()) {
            throw Error("boxplot: team " + t.team_id + " has no values");
        }
    }
    const std::size_t k = spec.teams.size();
    const double col_w = 46.0;
    const double margin_l = 64.0, margin_r = 20.0, margin_t = 40.0,
                 margin_b = 74.0;
    const double plot_h = 320.0;
    const double width = margin_l + col_w * static_cast<double>(k) + margin_r;
    const double height = margin_t + plot_h + margin_b;

    double vmin = std::numeric_limits<double>::infinity();
    double vmax = -std::numeric_limits<double>::infinity();
    for (const auto& t : spec.teams) {
        for (const double v : t.values) {
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
    }
    if (vmin == vmax) {
        vmin -= 0.5;
        vmax += 0.5;
    } else {
        const double pad = 0.05 * (vmax - vmin);
        vmin -= pad;
        vmax += pad;
    }
    auto y_of = [&](double v) {
        return margin_t + plot_h * (1.0 - (v - vmin) / (vmax - vmin));
    };

    using svg_detail::num;
    using svg_detail::xml_escape;
    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
        << num(width) << "\" height=\"" << num(height) << "\" viewBox=\"0 0 "
        << num(width) << " " << num(height) << "\">\n"
        << "<rect width=\"" << num(width) << "\" height=\"" << num(height)
        << "\" fill=\"white\"/>\n";

    const std::string title = spec.metric_label +
                              (spec.unit.empty() ? "" : " (" + spec.unit + ")");
    svg << "<text x=\"" << num(width / 2) << "\" y=\"22\" font-family=\"sans-serif\""
        << " font-size=\"14\" text-anchor=\"middle\">" << xml_escape(title)
        << "</text>\n";

    // y grid and tick labels
    for (int tick = 0; tick <= 5; ++tick) {
        const double v = vmin + (vmax - vmin) * tick / 5.0;
        const double y = y_of(v);
        svg << "<line x1=\"" << num(margin_l) << "\" y1=\"" << num(y)
            << "\" x2=\"" << num(width - margin_r) << "\" y2=\"" << num(y)
            << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n"
            << "<text x=\"" << num(margin_l - 6) << "\" y=\"" << num(y + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" "
               "text-anchor=\"end\">"
            << svg_detail::tick_label(v) << "</text>\n";
    }

    SplitMix64 jitter(spec.jitter_seed);
    for (std::size_t t = 0; t < k; ++t) {
        const BoxStats b = box_stats(spec.teams[t].values);
        const double cx = margin_l + col_w * (static_cast<double>(t) + 0.5);
        const double half_box = col_w * 0.27;

        // raw values as jittered dots behind the box
        for (const double v : spec.teams[t].values) {
            const double jx = cx + jitter.uniform(-half_box, half_box);
            svg << "<circle cx=\"" << num(jx) << "\" cy=\"" << num(y_of(v))
                << "\" r=\"1.8\" fill=\"#4878a8\" fill-opacity=\"0.45\"/>\n";
        }

        svg << "<line x1=\"" << num(cx) << "\" y1=\"" << num(y_of(b.whisker_lo))
            << "\" x2=\"" << num(cx) << "\" y2=\"" << num(y_of(b.q1))
            << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n"
            << "<line x1=\"" << num(cx) << "\" y1=\"" << num(y_of(b.q3))
            << "\" x2=\"" << num(cx) << "\" y2=\"" << num(y_of(b.whisker_hi))
            << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
        for (const double w : {b.whisker_lo, b.whisker_hi}) {
            svg << "<line x1=\"" << num(cx - half_box * 0.6) << "\" y1=\""
                << num(y_of(w)) << "\" x2=\"" << num(cx + half_box * 0.6)
                << "\" y2=\"" << num(y_of(w))
                << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
        }
        svg << "<rect x=\"" << num(cx - half_box) << "\" y=\"" << num(y_of(b.q3))
            << "\" width=\"" << num(2 * half_box) << "\" height=\""
            << num(std::max(0.0, y_of(b.q1) - y_of(b.q3)))
            << "\" fill=\"#9ec5e8\" fill-opacity=\"0.55\" stroke=\"#2a5a8a\" "
               "stroke-width=\"1.2\"/>\n"
            << "<line x1=\"" << num(cx - half_box) << "\" y1=\""
            << num(y_of(b.median)) << "\" x2=\"" << num(cx + half_box)
            << "\" y2=\"" << num(y_of(b.median))
            << "\" stroke=\"#17375e\" stroke-width=\"2\"/>\n";
        for (const double o : b.outliers) {
            svg << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(y_of(o))
                << "\" r=\"2.6\" fill=\"none\" stroke=\"#b2403c\" "
                   "stroke-width=\"1\"/>\n";
        }

        svg << "<text x=\"" << num(cx) << "\" y=\""
            << num(margin_t + plot_h + 14) << "\" font-family=\"sans-serif\""
            << " font-size=\"10\" text-anchor=\"end\" transform=\"rotate(-60 "
            << num(cx) << " " << num(margin_t + plot_h + 14) << ")\">"
            << xml_escape(spec.teams[t].team_id) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

/// K x K significance heatmap: light fill where the x-axis team is
/// significantly superior to the y-axis team, dark fill where it is not,
/// neutral diagonal.
inline std::string render_significance(const SignificanceMatrix& m) {
    using svg_detail::num;
    using svg_detail::xml_escape;
    const std::size_t k = m.teams.size();
    if (k == 0) throw Error("significance rendering: empty matrix");
    const double cell = 22.0;
    const double margin_l = 80.0, margin_t = 96.0;
    const double width = margin_l + cell * static_cast<double>(k) + 20.0;
    const double height = margin_t + cell * static_cast<double>(k) + 20.0;

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
        << num(width) << "\" height=\"" << num(height) << "\" viewBox=\"0 0 "
        << num(width) << " " << num(height) << "\">\n"
        << "<rect width=\"" << num(width) << "\" height=\"" << num(height)
        << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << num(margin_l + cell * k / 2) << "\" y=\"18\""
        << " font-family=\"sans-serif\" font-size=\"13\" "
           "text-anchor=\"middle\">"
        << xml_escape(m.metric) << " significance (alpha=" << num(m.alpha)
        << ")</text>\n";

    for (std::size_t col = 0; col < k; ++col) {
        const double x = margin_l + cell * (static_cast<double>(col) + 0.5);
        svg << "<text x=\"" << num(x) << "\" y=\"" << num(margin_t - 8)
            << "\" font-family=\"sans-serif\" font-size=\"10\" "
               "text-anchor=\"start\" transform=\"rotate(-60 "
            << num(x) << " " << num(margin_t - 8) << ")\">"
            << xml_escape(m.teams[col]) << "</text>\n";
    }
    for (std::size_t row = 0; row < k; ++row) {
        const double y = margin_t + cell * (static_cast<double>(row) + 0.5);
        svg << "<text x=\"" << num(margin_l - 6) << "\" y=\"" << num(y + 3.5)
            << "\" font-family=\"sans-serif\" font-size=\"10\" "
               "text-anchor=\"end\">"
            << xml_escape(m.teams[row]) << "</text>\n";
    }

    for (std::size_t col = 0; col < k; ++col) {
        for (std::size_t row = 0; row < k; ++row) {
            const char* fill = "#8c1d18"; // not superior: dark red
            if (m.cells[col][row] == CellState::Superior) {
                fill = "#f5c6b8"; // superior: light red
            } else if (m.cells[col][row] == CellState::Self) {
                fill = "#d9d9d9";
            }
            svg << "<rect x=\"" << num(margin_l + cell * col) << "\" y=\""
                << num(margin_t + cell * row) << "\" width=\"" << num(cell)
                << "\" height=\"" << num(cell) << "\" fill=\"" << fill
                << "\" stroke=\"white\" stroke-width=\"1\"/>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

/// 2-D projection of the accuracy/efficiency bubble data: x = weighted DSC,
/// y = weighted HD95, circle area tracks the GPU statistic, fill darkness
/// tracks the runtime quantile. Teams missing any field are omitted.
inline std::string render_bubble(const std::vector<BubbleDatum>& data) {
    using svg_detail::num;
    using svg_detail::xml_escape;
    std::vector<const BubbleDatum*> full;
    for (const auto& d : data) {
        if (d.dsc_weighted && d.hd95_weighted && d.runtime_seconds && d.gpu_mb) {
            full.push_back(&d);
        }
    }
    const double width = 560, height = 420;
    const double ml = 64, mr = 24, mt = 36, mb = 56;
    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
        << num(width) << "\" height=\"" << num(height) << "\" viewBox=\"0 0 "
        << num(width) << " " << num(height) << "\">\n"
        << "<rect width=\"" << num(width) << "\" height=\"" << num(height)
        << "\" fill=\"white\"/>\n"
        << "<text x=\"" << num(width / 2)
        << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\" "
           "text-anchor=\"middle\">accuracy vs efficiency</text>\n";
    if (full.empty()) {
        svg << "<text x=\"" << num(width / 2) << "\" y=\"" << num(height / 2)
            << "\" font-family=\"sans-serif\" font-size=\"12\" "
               "text-anchor=\"middle\">no fully defined teams</text>\n</svg>\n";
        return svg.str();
    }

    auto minmax = [&](auto get) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto* d : full) {
            lo = std::min(lo, get(*d));
            hi = std::max(hi, get(*d));
        }
        if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
        return std::pair<double, double>{lo, hi};
    };
    const auto [dsc_lo, dsc_hi] =
        minmax([](const BubbleDatum& d) { return *d.dsc_weighted; });
    const auto [hd_lo, hd_hi] =
        minmax([](const BubbleDatum& d) { return *d.hd95_weighted; });
    const auto [gpu_lo, gpu_hi] =
        minmax([](const BubbleDatum& d) { return *d.gpu_mb; });

    std::vector<double> runtimes;
    for (const auto* d : full) runtimes.push_back(*d->runtime_seconds);
    std::sort(runtimes.begin(), runtimes.end());
    auto rt_quantile = [&](double v) {
        const auto it = std::upper_bound(runtimes.begin(), runtimes.end(), v);
        return static_cast<double>(it - runtimes.begin()) /
               static_cast<double>(runtimes.size());
    };

    auto x_of = [&](double dsc) {
        return ml + (width - ml - mr) * (dsc - dsc_lo) / (dsc_hi - dsc_lo);
    };
    auto y_of = [&](double hd) {
        return mt + (height - mt - mb) * (hd - hd_lo) / (hd_hi - hd_lo);
    };

    for (const auto* d : full) {
        const double r =
            6.0 + 16.0 * std::sqrt((*d->gpu_mb - gpu_lo) / (gpu_hi - gpu_lo));
        const int shade =
            230 - static_cast<int>(170.0 * rt_quantile(*d->runtime_seconds));
        svg << "<circle cx=\"" << num(x_of(*d->dsc_weighted)) << "\" cy=\""
            << num(y_of(*d->hd95_weighted)) << "\" r=\"" << num(r)
            << "\" fill=\"rgb(" << shade << "," << shade / 2 + 40 << ","
            << 80 << ")\" fill-opacity=\"0.75\" stroke=\"#333333\" "
               "stroke-width=\"0.8\"/>\n"
            << "<text x=\"" << num(x_of(*d->dsc_weighted)) << "\" y=\""
            << num(y_of(*d->hd95_weighted) - r - 3)
            << "\" font-family=\"sans-serif\" font-size=\"9\" "
               "text-anchor=\"middle\">"
            << xml_escape(d->team_id) << "</text>\n";
    }
    svg << "<text x=\"" << num(width / 2) << "\" y=\"" << num(height - 16)
        << "\" font-family=\"sans-serif\" font-size=\"11\" "
           "text-anchor=\"middle\">mean weighted DSC</text>\n"
        << "<text x=\"18\" y=\"" << num(height / 2)
        << "\" font-family=\"sans-serif\" font-size=\"11\" "
           "text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << num(height / 2) << ")\">mean weighted HD95 (mm)</text>\n"
        << "</svg>\n";
    return svg.str();
}

namespace report_detail {

inline std::string mean_std(const MetricStat& s, double scale) {
    if (!s.mean.has_value()) return "-";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f±%.2f", *s.mean * scale,
                  s.sd * scale);
    return buf;
}

inline std::string plain(const std::optional<double>& v) {
    if (!v.has_value()) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

} // namespace report_detail

/// Per-team summary and per-case long-format tables. DSC columns are
/// percentages formatted mean±sd to two decimals; HD95 columns are mm.
/// The JSON mirror carries the unrounded values.
struct ExportedTables {
    std::string summary_csv;
    std::string per_case_csv;
    nlohmann::json json;
};

inline ExportedTables export_tables(const RankingResult& ranking,
                                    const std::vector<TeamRecord>& teams) {
    using report_detail::csv_field;
    ExportedTables out;

    std::ostringstream summary;
    summary << "team_id,position,average_rank,dsc_main,dsc_branch,"
               "dsc_weighted,hd95_main,hd95_branch,hd95_weighted,"
               "hd95_defined_cases,rt_seconds,gpu_mb\n";
    for (const RankedTeam& t : ranking.teams) {
        summary << csv_field(t.team_id) << ',' << t.position << ','
                << (std::isfinite(t.average_rank)
                        ? svg_detail::num(t.average_rank)
                        : "-");
        for (MetricId id : {MetricId::DscMain, MetricId::DscBranch,
                            MetricId::DscWeighted}) {
            summary << ',' << report_detail::mean_std(t.means.of(id), 100.0);
        }
        for (MetricId id : {MetricId::Hd95Main, MetricId::Hd95Branch,
                            MetricId::Hd95Weighted}) {
            summary << ',' << report_detail::mean_std(t.means.of(id), 1.0);
        }
        summary << ',' << t.means.of(MetricId::Hd95Weighted).defined;
        summary << ',' << report_detail::plain(t.means.of(MetricId::Runtime).mean);
        summary << ',' << report_detail::plain(t.means.of(MetricId::Gpu).mean);
        summary << '\n';
    }
    out.summary_csv = summary.str();

    std::ostringstream per_case;
    per_case << "team_id,case_id,metric,value\n";
    nlohmann::json per_case_json = nlohmann::json::array();
    for (const TeamRecord& team : teams) {
        for (const CaseScore& c : team.case_scores) {
            for (int m = 0; m < 6; ++m) {
                const MetricId id = static_cast<MetricId>(m);
                const auto v = case_metric(c, id);
                per_case << csv_field(team.team_id) << ','
                         << csv_field(c.case_id) << ',' << metric_name(id)
                         << ',';
                if (v.has_value()) {
                    char buf[40];
                    std::snprintf(buf, sizeof(buf), "%.9g", *v);
                    per_case << buf;
                }
                per_case << '\n';
                per_case_json.push_back(
                    {{"team_id", team.team_id},
                     {"case_id", c.case_id},
                     {"metric", metric_name(id)},
                     {"value", v.has_value() ? nlohmann::json(*v)
                                             : nlohmann::json(nullptr)}});
            }
        }
    }
    out.per_case_csv = per_case.str();

    out.json = {{"summary", ranking_to_json(ranking)},
                {"per_case", per_case_json}};
    return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path + " for writing");
    f << text;
    if (!f) throw Error("short write to " + path);
}

} // namespace pabench
