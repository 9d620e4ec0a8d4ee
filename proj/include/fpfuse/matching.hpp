#ifndef FPFUSE_MATCHING_HPP
#define FPFUSE_MATCHING_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fpfuse/errors.hpp"
#include "fpfuse/fusion.hpp"

namespace fpfuse {

enum class MatchMetric { KnnEuclidean, NormalizedCorrelation };

inline const char* to_string(MatchMetric m) {
    return m == MatchMetric::KnnEuclidean ? "knn-euclidean" : "normalized-correlation";
}

/// Similarity value standing in for an undefined correlation (a zero
/// template on either side). It compares below every valid correlation of
/// non-negative templates and is never accepted by correlation_verify.
inline constexpr double kUndefinedCorrelation = -1.0;

inline double euclidean_distance(const FusedTemplate& f1, const FusedTemplate& f2) {
    if (f1.size() != f2.size())
        throw DimensionMismatch("template lengths differ: " + std::to_string(f1.size()) + " vs " +
                                std::to_string(f2.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < f1.size(); ++i) {
        const double d = f1.values[i] - f2.values[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

/// Normalized correlation sum(f1*f2) / sqrt(sum(f1^2) * sum(f2^2)). Returns
/// kUndefinedCorrelation when either template is all zero.
inline double normalized_correlation(const FusedTemplate& f1, const FusedTemplate& f2) {
    if (f1.size() != f2.size())
        throw DimensionMismatch("template lengths differ: " + std::to_string(f1.size()) + " vs " +
                                std::to_string(f2.size()));
    double dot = 0.0, n1 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < f1.size(); ++i) {
        dot += f1.values[i] * f2.values[i];
        n1 += f1.values[i] * f1.values[i];
        n2 += f2.values[i] * f2.values[i];
    }
    if (n1 == 0.0 || n2 == 0.0) return kUndefinedCorrelation;
    return dot / std::sqrt(n1 * n2);
}

struct MatchDecision {
    MatchMetric metric = MatchMetric::KnnEuclidean;
    double score = 0.0;
    std::string best_subject_id;
    bool accepted = false;
    double threshold_used = 0.0;
    std::size_t k_used = 1;
};

namespace detail {

inline void check_gallery(const FusedTemplate& probe, const std::vector<FusedTemplate>& gallery,
                          std::size_t k) {
    if (gallery.empty()) throw EmptyGallery("verification needs a non-empty gallery");
    if (k < 1 || k > gallery.size())
        throw BadK("K must lie in [1, " + std::to_string(gallery.size()) + "], got " + std::to_string(k));
    for (const auto& g : gallery)
        if (g.size() != probe.size())
            throw DimensionMismatch("gallery template '" + g.subject_id + "' has length " +
                                    std::to_string(g.size()) + ", probe has " +
                                    std::to_string(probe.size()));
}

} // namespace detail

/// Euclidean K-NN verification: of the K nearest gallery templates, the
/// minimum distance d decides; accept iff d <= threshold. Ties resolve to
/// the lexicographically smallest subject id.
inline MatchDecision knn_verify(const FusedTemplate& probe, const std::vector<FusedTemplate>& gallery,
                                std::size_t k, double threshold) {
    detail::check_gallery(probe, gallery, k);

    std::vector<std::pair<double, const FusedTemplate*>> scored;
    scored.reserve(gallery.size());
    for (const auto& g : gallery) scored.emplace_back(euclidean_distance(probe, g), &g);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second->subject_id < b.second->subject_id;
    });
    scored.resize(k); // the K best matches; their minimum is the front

    MatchDecision d;
    d.metric = MatchMetric::KnnEuclidean;
    d.k_used = k;
    d.threshold_used = threshold;
    d.score = scored.front().first;
    d.best_subject_id = scored.front().second->subject_id;
    d.accepted = d.score <= threshold;
    return d;
}

/// Correlation verification, the similarity mirror of knn_verify: of the K
/// most similar gallery templates, the maximum similarity decides; accept
/// iff it is >= threshold. Undefined correlations are never accepted.
inline MatchDecision correlation_verify(const FusedTemplate& probe,
                                        const std::vector<FusedTemplate>& gallery, std::size_t k,
                                        double threshold) {
    detail::check_gallery(probe, gallery, k);

    std::vector<std::pair<double, const FusedTemplate*>> scored;
    scored.reserve(gallery.size());
    for (const auto& g : gallery) scored.emplace_back(normalized_correlation(probe, g), &g);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second->subject_id < b.second->subject_id;
    });
    scored.resize(k);

    MatchDecision d;
    d.metric = MatchMetric::NormalizedCorrelation;
    d.k_used = k;
    d.threshold_used = threshold;
    d.score = scored.front().first;
    d.best_subject_id = scored.front().second->subject_id;
    d.accepted = d.score != kUndefinedCorrelation && d.score >= threshold;
    return d;
}

} // namespace fpfuse

#endif // FPFUSE_MATCHING_HPP
