// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "promptseg/errors.hpp"

namespace promptseg {

namespace {

using SliceKey = std::tuple<std::string, Orientation, int>;

Variant variant_of(const EvalRecord& r) { return {r.policy, r.cropped}; }

nlohmann::json summary_json(const stats::SummaryStats& s) {
    return {{"n", s.n}, {"mean", s.mean}, {"median", s.median}, {"q1", s.q1}, {"q3", s.q3}};
}

nlohmann::json test_json(const std::optional<stats::TestResult>& t) {
    if (!t) {
        return nullptr;
    }
    return {{"statistic", t->statistic}, {"p_value", t->p_value}, {"exact", t->exact}};
}

std::string fmt_summary(const stats::SummaryStats& s) {
    return fmt::format("{:.3f} ({:.3f} – {:.3f})", s.mean, s.q1, s.q3);
}

std::string fmt_p(double p) { return p < 0.001 ? std::string("< 0.001") : fmt::format("{:.3f}", p); }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw IoError(fmt::format("writing '{}' failed", path.string()));
    }
}

}  // namespace

std::string Variant::label() const {
    return fmt::format("{}/{}", to_string(policy), cropped ? "cropped" : "full");
}

AggregateReport aggregate_report(const std::vector<EvalRecord>& records, const ReportOptions& options) {
    if (records.empty()) {
        throw StatsError("aggregate_report: no records");
    }
    AggregateReport report;
    report.n_records = records.size();

    std::map<Variant, std::vector<const EvalRecord*>> by_variant;
    for (const auto& r : records) {
        if (r.failed) {
            ++report.n_failed;
        } else {
            by_variant[variant_of(r)].push_back(&r);
        }
        report.n_oracle_seeded += r.oracle_seeded ? 1 : 0;
    }
    if (report.n_oracle_seeded > 0) {
        report.notes.push_back(fmt::format(
            "{} previous-slice sessions had no predecessor and were seeded with oracle selection",
            report.n_oracle_seeded));
    }
    if (by_variant.empty()) {
        report.notes.push_back("every record failed; no statistics computed");
        return report;
    }

    std::map<Variant, std::size_t> failed_by_variant;
    for (const auto& r : records) {
        if (r.failed) {
            ++failed_by_variant[variant_of(r)];
        }
    }

    for (const auto& [variant, rows] : by_variant) {
        std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> grouped;
        for (const auto* r : rows) {
            for (const std::string grade : {std::string("all"), std::string(to_string(r->grade))}) {
                grouped[grade].first.push_back(r->best_iou);
                grouped[grade].second.push_back(static_cast<double>(r->best_step));
            }
        }
        for (const auto& [grade, values] : grouped) {
            report.groups.push_back({variant, grade, stats::summarize(values.first), stats::summarize(values.second),
                                     grade == "all" ? failed_by_variant[variant] : 0});
        }

        StepCurve curve;
        curve.variant = variant;
        curve.n = rows.size();
        for (const auto* r : rows) {
            double best = 0.0;
            for (std::size_t k = 0; k < curve.mean_best_iou.size(); ++k) {
                if (k < r->step_ious.size()) {
                    best = std::max(best, r->step_ious[k]);
                }
                curve.mean_best_iou[k] += best;
            }
        }
        for (auto& v : curve.mean_best_iou) {
            v /= static_cast<double>(rows.size());
        }
        report.curves.push_back(curve);

        std::vector<double> hgg;
        std::vector<double> lgg;
        for (const auto* r : rows) {
            if (r->grade == Grade::HGG) {
                hgg.push_back(r->best_iou);
            } else if (r->grade == Grade::LGG) {
                lgg.push_back(r->best_iou);
            }
        }
        GradeComparison cmp{variant, hgg.size(), lgg.size(), std::nullopt, {}};
        if (hgg.empty() || lgg.empty()) {
            cmp.note = "needs both HGG and LGG records";
        } else {
            cmp.test = stats::wilcoxon_rank_sum(hgg, lgg);
        }
        report.by_grade.push_back(cmp);
    }

    report.primary = by_variant.contains(Variant{PolicyKind::Oracle, false}) ? Variant{PolicyKind::Oracle, false}
                                                                              : by_variant.begin()->first;
    std::vector<double> areas;
    std::vector<double> ious;
    for (const auto* r : by_variant[report.primary]) {
        report.scatter.push_back({r->case_id, r->slice_index, r->gt_area_mm2, r->best_iou});
        areas.push_back(r->gt_area_mm2);
        ious.push_back(r->best_iou);
    }
    try {
        report.area_correlation = stats::spearman_rho(areas, ious);
    } catch (const StatsError& e) {
        report.notes.push_back(fmt::format("area/IoU correlation skipped: {}", e.what()));
    }
    try {
        report.area_threshold = stats::maxstat_threshold(areas, ious, options.maxstat);
        std::vector<double> below;
        std::vector<double> above;
        for (std::size_t i = 0; i < areas.size(); ++i) {
            (areas[i] < report.area_threshold->threshold ? below : above).push_back(ious[i]);
        }
        report.below_threshold = stats::summarize(below);
        report.above_threshold = stats::summarize(above);
    } catch (const StatsError& e) {
        report.notes.push_back(fmt::format("area threshold skipped: {}", e.what()));
    }

    std::map<Variant, std::map<SliceKey, double>> indexed;
    for (const auto& [variant, rows] : by_variant) {
        for (const auto* r : rows) {
            indexed[variant][{r->case_id, r->orientation, r->slice_index}] = r->best_iou;
        }
    }
    for (auto a = indexed.begin(); a != indexed.end(); ++a) {
        for (auto b = std::next(a); b != indexed.end(); ++b) {
            PairedComparison cmp{a->first, b->first, 0, 0.0, std::nullopt, {}};
            std::vector<double> diffs;
            for (const auto& [key, value] : a->second) {
                if (const auto it = b->second.find(key); it != b->second.end()) {
                    diffs.push_back(value - it->second);
                }
            }
            cmp.n_pairs = diffs.size();
            if (diffs.empty()) {
                cmp.note = "no matched slices";
            } else {
                cmp.mean_difference = std::accumulate(diffs.begin(), diffs.end(), 0.0) / static_cast<double>(diffs.size());
                try {
                    cmp.test = stats::wilcoxon_signed_rank(diffs);
                } catch (const StatsError& e) {
                    cmp.note = e.what();
                }
            }
            report.paired.push_back(cmp);
        }
    }
    return report;
}

nlohmann::json to_json(const AggregateReport& report) {
    nlohmann::json j;
    j["n_records"] = report.n_records;
    j["n_failed"] = report.n_failed;
    j["n_oracle_seeded"] = report.n_oracle_seeded;
    j["primary_variant"] = report.primary.label();

    j["groups"] = nlohmann::json::array();
    for (const auto& g : report.groups) {
        j["groups"].push_back({{"policy", to_string(g.variant.policy)},
                               {"cropped", g.variant.cropped},
                               {"grade", g.grade},
                               {"best_iou", summary_json(g.best_iou)},
                               {"best_step", summary_json(g.best_step)},
                               {"failed", g.failed}});
    }
    j["curves"] = nlohmann::json::array();
    for (const auto& c : report.curves) {
        j["curves"].push_back({{"variant", c.variant.label()}, {"n", c.n}, {"mean_best_iou", c.mean_best_iou}});
    }
    if (report.area_correlation) {
        j["area_correlation"] = {{"rho", report.area_correlation->rho}, {"p_value", report.area_correlation->p_value}};
    }
    if (report.area_threshold) {
        const auto& t = *report.area_threshold;
        j["area_threshold"] = {{"threshold_mm2", t.threshold},
                               {"max_abs_z", t.max_abs_z},
                               {"significant", t.significant},
                               {"p_adjustment", "bonferroni bound only"},
                               {"n_candidates", t.candidates.size()}};
        j["below_threshold"] = summary_json(*report.below_threshold);
        j["above_threshold"] = summary_json(*report.above_threshold);
    }
    j["paired"] = nlohmann::json::array();
    for (const auto& p : report.paired) {
        j["paired"].push_back({{"a", p.a.label()},
                               {"b", p.b.label()},
                               {"n_pairs", p.n_pairs},
                               {"mean_difference", p.mean_difference},
                               {"signed_rank", test_json(p.test)},
                               {"note", p.note}});
    }
    j["by_grade"] = nlohmann::json::array();
    for (const auto& g : report.by_grade) {
        j["by_grade"].push_back({{"variant", g.variant.label()},
                                 {"n_hgg", g.n_hgg},
                                 {"n_lgg", g.n_lgg},
                                 {"rank_sum", test_json(g.test)},
                                 {"note", g.note}});
    }
    j["notes"] = report.notes;
    return j;
}

std::string to_markdown(const AggregateReport& report) {
    std::ostringstream md;
    md << "# Evaluation report\n\n";
    md << fmt::format("Records: {} ({} failed). Primary variant: {}.\n\n", report.n_records, report.n_failed,
                      report.primary.label());

    md << "## Best IoU per slice\n\n";
    md << "| Policy | Slices | Grade | n | Mean best IoU (IQR) | Median | Prompts to best (IQR) | Failed |\n";
    md << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& g : report.groups) {
        md << fmt::format("| {} | {} | {} | {} | {} | {:.3f} | {} | {} |\n", to_string(g.variant.policy),
                          g.variant.cropped ? "cropped" : "full", g.grade, g.best_iou.n, fmt_summary(g.best_iou),
                          g.best_iou.median, fmt_summary(g.best_step), g.failed);
    }

    md << "\n## Mean best IoU by number of prompts\n\n| Variant |";
    for (int k = 1; k <= kMaxPromptBudget; ++k) {
        md << ' ' << k << " |";
    }
    md << "\n|---|";
    for (int k = 1; k <= kMaxPromptBudget; ++k) {
        md << "---|";
    }
    md << '\n';
    for (const auto& c : report.curves) {
        md << "| " << c.variant.label() << " |";
        for (const double v : c.mean_best_iou) {
            md << fmt::format(" {:.3f} |", v);
        }
        md << '\n';
    }

    md << "\n## Tumor area\n\n";
    if (report.area_correlation) {
        md << fmt::format("Spearman rho (area, best IoU) = {:.3f}, p {}\n\n", report.area_correlation->rho,
                          fmt_p(report.area_correlation->p_value));
    }
    if (report.area_threshold) {
        const auto& t = *report.area_threshold;
        md << fmt::format("Optimal area threshold: {} mm² (max |Z| = {:.2f}, {} candidates, {}).\n\n", t.threshold,
                          t.max_abs_z, t.candidates.size(),
                          t.significant ? "significant after Bonferroni bound" : "not significant");
        md << fmt::format("Below threshold: {}; at or above: {}.\n\n", fmt_summary(*report.below_threshold),
                          fmt_summary(*report.above_threshold));
    }

    if (!report.paired.empty()) {
        md << "## Paired comparisons (Wilcoxon signed-rank)\n\n| A | B | Pairs | Mean A−B | p |\n|---|---|---|---|---|\n";
        for (const auto& p : report.paired) {
            md << fmt::format("| {} | {} | {} | {:.4f} | {} |\n", p.a.label(), p.b.label(), p.n_pairs,
                              p.mean_difference, p.test ? fmt_p(p.test->p_value) : p.note);
        }
        md << '\n';
    }
    md << "## HGG vs LGG (Wilcoxon rank-sum)\n\n| Variant | HGG | LGG | p |\n|---|---|---|---|\n";
    for (const auto& g : report.by_grade) {
        md << fmt::format("| {} | {} | {} | {} |\n", g.variant.label(), g.n_hgg, g.n_lgg,
                          g.test ? fmt_p(g.test->p_value) : g.note);
    }
    if (!report.notes.empty()) {
        md << "\n## Notes\n\n";
        for (const auto& n : report.notes) {
            md << "- " << n << '\n';
        }
    }
    return md.str();
}

void write_report(const std::filesystem::path& dir, const AggregateReport& report) {
    std::filesystem::create_directories(dir);
    write_text(dir / "report.json", to_json(report).dump(2) + "\n");
    write_text(dir / "report.md", to_markdown(report));

    std::ostringstream curves;
    curves << "variant,prompts,mean_best_iou,n\n";
    for (const auto& c : report.curves) {
        for (std::size_t k = 0; k < c.mean_best_iou.size(); ++k) {
            curves << fmt::format("{},{},{},{}\n", c.variant.label(), k + 1, c.mean_best_iou[k], c.n);
        }
    }
    write_text(dir / "curves.csv", curves.str());

    std::ostringstream scatter;
    scatter << "case_id,slice_index,gt_area_mm2,best_iou\n";
    for (const auto& p : report.scatter) {
        scatter << fmt::format("{},{},{},{}\n", p.case_id, p.slice_index, p.gt_area_mm2, p.best_iou);
    }
    write_text(dir / "scatter.csv", scatter.str());

    std::ostringstream maxstat;
    maxstat << "cutpoint_mm2,n_below,n_above,z,p_unadjusted,p_bonferroni\n";
    if (report.area_threshold) {
        for (const auto& c : report.area_threshold->candidates) {
            maxstat << fmt::format("{},{},{},{},{},{}\n", c.cutpoint, c.n_below, c.n_above, c.z, c.p_unadjusted,
                                   c.p_bonferroni);
        }
    }
    write_text(dir / "maxstat.csv", maxstat.str());
}

}  // namespace promptseg
