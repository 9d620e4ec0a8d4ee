#ifndef FPFUSE_EVALUATION_HPP
#define FPFUSE_EVALUATION_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "fpfuse/errors.hpp"
#include "fpfuse/fusion.hpp"
#include "fpfuse/keypoint_io.hpp"
#include "fpfuse/matching.hpp"

namespace fpfuse {

/// A verification experiment: genuine trials claim the probe's own subject,
/// impostor trials claim somebody else's.
struct TrialSet {
    struct Trial {
        FusedTemplate probe;
        std::string claimed_id;
    };
    std::vector<Trial> genuine;
    std::vector<Trial> impostor;
    std::vector<FusedTemplate> gallery;
};

struct RocRow {
    double threshold = 0.0;
    double far = 0.0;              // percent
    double frr = 0.0;              // percent
    double recognition_rate = 0.0; // 100 - FRR (genuine-accept convention)
};

struct RocReport {
    MatchMetric metric = MatchMetric::KnnEuclidean;
    std::size_t k = 1;
    std::vector<RocRow> rows;
    double eer = 0.0; // percent
    double auc = 0.0; // in [0, 1]
    std::string config_snapshot;
};

namespace detail {

/// Score of one claimed-identity trial: the probe is verified against the
/// claimed subject's enrolled templates only (the K-best rule degenerates to
/// the single enrolled template in the usual one-per-subject store).
inline double trial_score(const FusedTemplate& probe, const std::vector<FusedTemplate>& gallery,
                          const std::string& claimed_id, MatchMetric metric) {
    bool found = false;
    double best = metric == MatchMetric::KnnEuclidean ? std::numeric_limits<double>::infinity()
                                                      : kUndefinedCorrelation;
    for (const auto& g : gallery) {
        if (g.subject_id != claimed_id) continue;
        found = true;
        if (metric == MatchMetric::KnnEuclidean)
            best = std::min(best, euclidean_distance(probe, g));
        else
            best = std::max(best, normalized_correlation(probe, g));
    }
    if (!found) throw Error("claimed subject '" + claimed_id + "' is not enrolled");
    return best;
}

inline bool score_accepted(double score, double threshold, MatchMetric metric) {
    if (metric == MatchMetric::KnnEuclidean) return score <= threshold;
    return score != kUndefinedCorrelation && score >= threshold;
}

} // namespace detail

/// Evenly spaced grid spanning the observed score range, endpoints included.
inline std::vector<double> threshold_grid(const std::vector<double>& scores, std::size_t count = 200) {
    if (scores.empty() || count == 0) throw Error("cannot build a threshold grid without scores");
    const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    const double lo = *lo_it, hi = *hi_it;
    if (lo == hi || count == 1) return {lo};
    std::vector<double> grid(count);
    for (std::size_t i = 0; i < count; ++i)
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    grid.back() = hi;
    return grid;
}

/// Threshold grid spanning the scores a trial set produces under a metric.
inline std::vector<double> trial_threshold_grid(const TrialSet& trials, MatchMetric metric,
                                                std::size_t count = 200) {
    std::vector<double> scores;
    scores.reserve(trials.genuine.size() + trials.impostor.size());
    for (const auto& t : trials.genuine)
        scores.push_back(detail::trial_score(t.probe, trials.gallery, t.claimed_id, metric));
    for (const auto& t : trials.impostor)
        scores.push_back(detail::trial_score(t.probe, trials.gallery, t.claimed_id, metric));
    return threshold_grid(scores, count);
}

/// Sweeps the threshold grid over all trials and reports FAR, FRR and
/// recognition rate per threshold, EER by linear interpolation of the
/// FAR/FRR crossing and AUC by the trapezoid rule over (FAR, 1-FRR).
/// An empty `thresholds` asks for the default 200-point grid spanning the
/// observed scores.
inline RocReport run_trials(const TrialSet& trials, MatchMetric metric, std::size_t k,
                            std::vector<double> thresholds = {}) {
    if (trials.genuine.empty() || trials.impostor.empty())
        throw EmptyTrials("need at least one genuine and one impostor trial");
    if (trials.gallery.empty()) throw EmptyGallery("trial set has no enrolled templates");
    if (k < 1) throw BadK("K must be >= 1");
    if (!std::is_sorted(thresholds.begin(), thresholds.end()))
        throw Error("threshold grid must be sorted ascending");

    for (const auto& t : trials.genuine)
        if (t.probe.subject_id != t.claimed_id)
            throw Error("genuine trial claims '" + t.claimed_id + "' for probe of '" +
                        t.probe.subject_id + "'");
    for (const auto& t : trials.impostor)
        if (t.probe.subject_id == t.claimed_id)
            throw Error("impostor trial claims the probe's own subject '" + t.claimed_id + "'");

    std::vector<double> genuine_scores, impostor_scores;
    genuine_scores.reserve(trials.genuine.size());
    impostor_scores.reserve(trials.impostor.size());
    for (const auto& t : trials.genuine)
        genuine_scores.push_back(detail::trial_score(t.probe, trials.gallery, t.claimed_id, metric));
    for (const auto& t : trials.impostor)
        impostor_scores.push_back(detail::trial_score(t.probe, trials.gallery, t.claimed_id, metric));

    if (thresholds.empty()) {
        std::vector<double> all = genuine_scores;
        all.insert(all.end(), impostor_scores.begin(), impostor_scores.end());
        thresholds = threshold_grid(all);
    }

    RocReport report;
    report.metric = metric;
    report.k = k;
    report.rows.reserve(thresholds.size());
    const double n_gen = static_cast<double>(genuine_scores.size());
    const double n_imp = static_cast<double>(impostor_scores.size());
    for (double t : thresholds) {
        std::size_t false_accepts = 0, false_rejects = 0;
        for (double s : impostor_scores)
            if (detail::score_accepted(s, t, metric)) ++false_accepts;
        for (double s : genuine_scores)
            if (!detail::score_accepted(s, t, metric)) ++false_rejects;
        RocRow row;
        row.threshold = t;
        row.far = 100.0 * static_cast<double>(false_accepts) / n_imp;
        row.frr = 100.0 * static_cast<double>(false_rejects) / n_gen;
        row.recognition_rate = 100.0 - row.frr;
        report.rows.push_back(row);
    }

    // EER: first sign change of FAR - FRR along the sweep, linearly
    // interpolated between the bracketing grid points.
    bool found = false;
    for (std::size_t i = 0; i < report.rows.size() && !found; ++i) {
        const double di = report.rows[i].far - report.rows[i].frr;
        if (di == 0.0) {
            report.eer = report.rows[i].far;
            found = true;
        } else if (i + 1 < report.rows.size()) {
            const double dn = report.rows[i + 1].far - report.rows[i + 1].frr;
            if ((di < 0.0) != (dn < 0.0)) {
                const double alpha = di / (di - dn);
                report.eer =
                    report.rows[i].far + alpha * (report.rows[i + 1].far - report.rows[i].far);
                found = true;
            }
        }
    }
    if (!found) {
        double best_gap = std::numeric_limits<double>::infinity();
        for (const auto& row : report.rows) {
            const double gap = std::abs(row.far - row.frr);
            if (gap < best_gap) {
                best_gap = gap;
                report.eer = (row.far + row.frr) / 2.0;
            }
        }
    }

    // AUC over (FAR, genuine accept rate) with the (0,0) and (1,1) corners.
    std::vector<std::pair<double, double>> roc;
    roc.reserve(report.rows.size() + 2);
    roc.emplace_back(0.0, 0.0);
    roc.emplace_back(1.0, 1.0);
    for (const auto& row : report.rows)
        roc.emplace_back(row.far / 100.0, (100.0 - row.frr) / 100.0);
    std::sort(roc.begin(), roc.end());
    report.auc = 0.0;
    for (std::size_t i = 0; i + 1 < roc.size(); ++i)
        report.auc +=
            (roc[i + 1].first - roc[i].first) * (roc[i].second + roc[i + 1].second) / 2.0;

    return report;
}

struct MethodSummary {
    std::string name;
    double eer = 0.0;
    double auc = 0.0;
};

/// Same-grid comparison of one metric's unimodal baselines against fusion.
struct ComparisonReport {
    std::vector<MethodSummary> rows; // face, palm, fused
    bool fused_improves_over_face = false;
    bool fused_improves_over_palm = false;
};

inline ComparisonReport compare_modalities(const RocReport& face_only, const RocReport& palm_only,
                                           const RocReport& fused) {
    auto grid_of = [](const RocReport& r) {
        std::vector<double> g;
        g.reserve(r.rows.size());
        for (const auto& row : r.rows) g.push_back(row.threshold);
        return g;
    };
    const auto base = grid_of(face_only);
    if (grid_of(palm_only) != base || grid_of(fused) != base)
        throw MismatchedGrids("reports were swept over different threshold grids");

    ComparisonReport out;
    out.rows = {{"face", face_only.eer, face_only.auc},
                {"palm", palm_only.eer, palm_only.auc},
                {"fused", fused.eer, fused.auc}};
    out.fused_improves_over_face = fused.auc > face_only.auc;
    out.fused_improves_over_palm = fused.auc > palm_only.auc;
    return out;
}

/// Writes a .roc file: `threshold far frr recognition_rate` rows followed by
/// a `eer <v> auc <v>` summary line.
inline void write_roc_report(const RocReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "threshold far frr recognition_rate\n";
    for (const auto& row : report.rows)
        out << detail::format_double(row.threshold) << ' ' << detail::format_double(row.far) << ' '
            << detail::format_double(row.frr) << ' ' << detail::format_double(row.recognition_rate)
            << '\n';
    out << "eer " << detail::format_double(report.eer) << " auc " << detail::format_double(report.auc)
        << '\n';
    if (!out.flush()) throw IoError("write failed: " + path.string());
}

} // namespace fpfuse

#endif // FPFUSE_EVALUATION_HPP
