#ifndef FPFUSE_PIPELINE_HPP
#define FPFUSE_PIPELINE_HPP

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fpfuse/clustering.hpp"
#include "fpfuse/correspondence.hpp"
#include "fpfuse/errors.hpp"
#include "fpfuse/fusion.hpp"
#include "fpfuse/graph_mapping.hpp"
#include "fpfuse/keypoint.hpp"
#include "fpfuse/matching.hpp"

namespace fpfuse {

/// Global configuration for the enrollment pipeline. The clustering config
/// (including k) is shared by both modalities.
struct PipelineConfig {
    ClusterConfig cluster;
    std::size_t p = 8; // keypoint pairs retained per cluster pairing
    RelaxationConfig relaxation;
    double ratio_threshold = 0.8; // nearest/second-nearest false-match test
    // Added per padded slot to a pairing's distortion when choosing the
    // cluster assignment, so that pairings with real correspondences always
    // beat fully padded ones.
    double padding_penalty = 1e6;

    MatchMetric match_metric = MatchMetric::NormalizedCorrelation;
    std::size_t knn_k = 1;
    std::optional<double> verify_threshold;
};

inline void validate_pipeline_config(const PipelineConfig& cfg) {
    validate_cluster_config(cfg.cluster);
    validate_relaxation_config(cfg.relaxation);
    if (cfg.p < 3) throw Error("p (pairs per cluster) must be >= 3");
    if (cfg.ratio_threshold <= 0.0) throw Error("ratio threshold must be positive");
    if (cfg.padding_penalty < 0.0) throw Error("padding penalty must be non-negative");
    if (cfg.knn_k < 1) throw Error("K must be >= 1");
}

struct PipelineStats {
    std::size_t padded_pairs = 0; // sentinel slots across the k chosen pairings
    Clustering face_clustering;
    Clustering palm_clustering;
    std::vector<ClusterPairing> pairings; // the k chosen pairings, by face cluster
};

namespace detail {

template <typename Fn>
auto staged(const std::string& stage, Fn&& fn) {
    try {
        return fn();
    } catch (const PipelineError&) {
        throw;
    } catch (const Error& e) {
        throw PipelineError(stage, e.what());
    }
}

inline Clustering cluster_and_refine(const KeypointSet& set, const ClusterConfig& cfg,
                                     const char* modality) {
    Clustering cl = staged(std::string("clustering(") + modality + ")", [&] {
        if (set.points.size() < cfg.k * 3)
            throw TooFewPoints("need at least 3k=" + std::to_string(cfg.k * 3) + " points, got " +
                               std::to_string(set.points.size()));
        return pam_cluster(set, cfg);
    });
    staged(std::string("silhouette(") + modality + ")", [&] {
        SilhouetteScores s = silhouette_scores(set, cl, cfg);
        cl.silhouette = std::move(s.value);
        cl.silhouette_defaulted = std::move(s.defaulted);
        return 0;
    });
    return staged(std::string("refine(") + modality + ")", [&] { return refine_clusters(set, cl, cfg); });
}

inline std::vector<Keypoint> cluster_points(const KeypointSet& set, const Clustering& cl,
                                            std::size_t cluster_id) {
    std::vector<Keypoint> pts;
    for (std::size_t idx : retained_points(cl, cluster_id)) pts.push_back(set.points[idx]);
    return pts;
}

/// Canonical cluster ranking. Clusters are ordered by the descending-value
/// argsort sequence of their mean retained descriptor, compared
/// lexicographically; the medoid position and cluster id break exact ties.
/// The argsort key is invariant to per-capture descriptor gains and stable
/// under point drops, so reference and probe captures of one subject agree
/// on the concatenation order.
inline std::vector<std::size_t> cluster_rank_order(const KeypointSet& set, const Clustering& cl) {
    std::vector<std::vector<std::size_t>> key(cl.k);
    for (std::size_t c = 0; c < cl.k; ++c) {
        Descriptor mean{};
        std::size_t count = 0;
        for (std::size_t idx : retained_points(cl, c)) {
            for (std::size_t t = 0; t < kDescriptorSize; ++t)
                mean[t] += set.points[idx].descriptor[t];
            ++count;
        }
        if (count)
            for (double& v : mean) v /= static_cast<double>(count);
        std::vector<std::size_t> order(kDescriptorSize);
        for (std::size_t t = 0; t < kDescriptorSize; ++t) order[t] = t;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (mean[a] != mean[b]) return mean[a] > mean[b];
            return a < b;
        });
        key[c] = std::move(order);
    }

    std::vector<std::size_t> order(cl.k);
    for (std::size_t c = 0; c < cl.k; ++c) order[c] = c;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (key[a] != key[b]) return key[a] < key[b];
        const Keypoint& ma = set.points[cl.medoids[a]];
        const Keypoint& mb = set.points[cl.medoids[b]];
        if (ma.x != mb.x) return ma.x < mb.x;
        if (ma.y != mb.y) return ma.y < mb.y;
        return a < b;
    });
    std::vector<std::size_t> rank(cl.k);
    for (std::size_t pos = 0; pos < cl.k; ++pos) rank[order[pos]] = pos;
    return rank;
}

} // namespace detail

/// End-to-end bimodal enrollment: cluster and refine both modalities, match
/// and equalize every candidate cluster pair, search each pair's vertex
/// mapping, assign face clusters to palm clusters at minimum total cost and
/// fuse the chosen pairings into one template. Deterministic for fixed
/// inputs and config.
inline FusedTemplate build_template(const KeypointSet& face, const KeypointSet& palm,
                                    const PipelineConfig& cfg, PipelineStats* stats = nullptr) {
    validate_pipeline_config(cfg);
    const std::size_t k = cfg.cluster.k;

    const Clustering face_cl = detail::cluster_and_refine(face, cfg.cluster, "face");
    const Clustering palm_cl = detail::cluster_and_refine(palm, cfg.cluster, "palm");

    std::vector<std::vector<Keypoint>> face_pts(k), palm_pts(k);
    for (std::size_t c = 0; c < k; ++c) {
        face_pts[c] = detail::cluster_points(face, face_cl, c);
        palm_pts[c] = detail::cluster_points(palm, palm_cl, c);
    }

    // Every (face cluster, palm cluster) candidate: correspond, equalize to
    // p pairs, map the resulting equal-order graphs.
    std::vector<std::vector<ClusterPairing>> candidate(k, std::vector<ClusterPairing>(k));
    std::vector<std::vector<double>> cost(k, std::vector<double>(k, 0.0));
    for (std::size_t fc = 0; fc < k; ++fc)
        for (std::size_t pc = 0; pc < k; ++pc) {
            const std::string stage =
                "pairing(face=" + std::to_string(fc) + ",palm=" + std::to_string(pc) + ")";
            detail::staged(stage, [&] {
                CorrespondenceSet cs = match_clusters(face_pts[fc], palm_pts[pc], cfg.ratio_threshold, fc, pc);
                CorrespondenceSet eq = equalize(cs, cfg.p);
                auto [face_v, palm_v] = materialize_pairs(face_pts[fc], palm_pts[pc], eq);
                ClusterPairing& pairing = candidate[fc][pc];
                pairing.face_cluster = fc;
                pairing.palm_cluster = pc;
                pairing.face_graph = build_graph(face_v);
                pairing.palm_graph = build_graph(palm_v);
                CorrespondenceSet hint; // equalized slots align by construction
                for (std::size_t j = 0; j < eq.pairs.size(); ++j)
                    if (!eq.pairs[j].padded) hint.pairs.push_back({j, j, eq.pairs[j].pair_distance, false});
                pairing.mapping = best_mapping(pairing.face_graph, pairing.palm_graph, hint, cfg.relaxation);
                pairing.padded_pairs = eq.padded_count();
                cost[fc][pc] = pairing.mapping.distortion_cost +
                               cfg.padding_penalty * static_cast<double>(pairing.padded_pairs);
                return 0;
            });
        }

    const AssignmentResult sol =
        detail::staged("assignment", [&] { return solve_assignment(cost); });

    const auto rank = detail::cluster_rank_order(face, face_cl);
    std::vector<FusedCluster> fused(k);
    std::size_t padded = 0;
    for (std::size_t fc = 0; fc < k; ++fc) {
        ClusterPairing pairing = candidate[fc][sol.assignment[fc]];
        pairing.cluster_rank = rank[fc];
        padded += pairing.padded_pairs;
        fused[fc] = detail::staged("fusion", [&] { return fuse_cluster(pairing); });
        if (stats) stats->pairings.push_back(std::move(pairing));
    }
    if (stats) {
        stats->padded_pairs = padded;
        stats->face_clustering = face_cl;
        stats->palm_clustering = palm_cl;
    }
    return detail::staged("fusion", [&] { return concatenate(fused, face.subject_id); });
}

/// Unimodal baseline template: the same clustering and refinement, then each
/// cluster contributes its p points nearest the medoid (zero-padded when
/// short), concatenated in the same canonical cluster order.
inline FusedTemplate build_unimodal_template(const KeypointSet& set, const PipelineConfig& cfg,
                                             PipelineStats* stats = nullptr) {
    validate_pipeline_config(cfg);
    const std::size_t k = cfg.cluster.k;
    const char* modality = set.modality == Modality::Face ? "face" : "palm";

    const Clustering cl = detail::cluster_and_refine(set, cfg.cluster, modality);
    const auto dist = distance_matrix(set, cfg.cluster);
    const std::size_t n = set.points.size();
    const auto rank = detail::cluster_rank_order(set, cl);

    std::vector<FusedCluster> blocks(k);
    std::size_t padded = 0;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<std::size_t> members = retained_points(cl, c);
        const std::size_t medoid = cl.medoids[c];
        std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            const double da = dist[a * n + medoid], db = dist[b * n + medoid];
            if (da != db) return da < db;
            return a < b;
        });
        if (members.size() > cfg.p) members.resize(cfg.p);

        FusedCluster& block = blocks[c];
        block.cluster_rank = rank[c];
        block.values.assign(cfg.p * kDescriptorSize, 0.0);
        for (std::size_t j = 0; j < members.size(); ++j) {
            const Descriptor& d = set.points[members[j]].descriptor;
            std::copy(d.begin(), d.end(), block.values.begin() + j * kDescriptorSize);
        }
        padded += cfg.p - members.size();
    }
    if (stats) stats->padded_pairs = padded;
    return detail::staged("fusion", [&] { return concatenate(blocks, set.subject_id); });
}

// ---------------------------------------------------------------------------
// Flat key=value configuration files. Every key has a default; unknown keys
// are rejected.

inline void apply_config_entry(PipelineConfig& cfg, const std::string& key, const std::string& value,
                               std::size_t line_no = 0) {
    auto bad = [&](const std::string& what) { throw FormatError(what + ": '" + value + "'", line_no); };
    auto as_double = [&](double& out) {
        if (!detail::parse_double(value, out)) bad("malformed number for " + key);
    };
    auto as_size = [&](std::size_t& out) {
        if (!detail::parse_size(value, out)) bad("malformed integer for " + key);
    };

    if (key == "k") as_size(cfg.cluster.k);
    else if (key == "metric") {
        if (value == "euclidean") cfg.cluster.metric = Metric::Euclidean;
        else if (value == "minkowski") cfg.cluster.metric = Metric::Minkowski;
        else bad("metric must be euclidean or minkowski");
    } else if (key == "minkowski_p") as_double(cfg.cluster.minkowski_p);
    else if (key == "feature_space") {
        if (value == "descriptor") cfg.cluster.feature_space = FeatureSpace::Descriptor;
        else if (value == "spatial") cfg.cluster.feature_space = FeatureSpace::Spatial;
        else if (value == "descriptor+spatial")
            cfg.cluster.feature_space = FeatureSpace::DescriptorPlusSpatial;
        else bad("feature_space must be descriptor, spatial or descriptor+spatial");
    } else if (key == "spatial_weight") as_double(cfg.cluster.spatial_weight);
    else if (key == "max_iterations") as_size(cfg.cluster.max_iterations);
    else if (key == "cluster_seed") {
        std::size_t s;
        as_size(s);
        cfg.cluster.seed = s;
    } else if (key == "silhouette_threshold") as_double(cfg.cluster.silhouette_threshold);
    else if (key == "p") as_size(cfg.p);
    else if (key == "ratio_threshold") as_double(cfg.ratio_threshold);
    else if (key == "padding_penalty") as_double(cfg.padding_penalty);
    else if (key == "sigma_edge") as_double(cfg.relaxation.sigma_edge);
    else if (key == "lambda_desc") as_double(cfg.relaxation.lambda_desc);
    else if (key == "relax_max_iters") as_size(cfg.relaxation.max_iters);
    else if (key == "relax_epsilon") as_double(cfg.relaxation.epsilon);
    else if (key == "relax_seed") {
        std::size_t s;
        as_size(s);
        cfg.relaxation.seed = s;
    } else if (key == "match_metric") {
        if (value == "knn") cfg.match_metric = MatchMetric::KnnEuclidean;
        else if (value == "correlation") cfg.match_metric = MatchMetric::NormalizedCorrelation;
        else bad("match_metric must be knn or correlation");
    } else if (key == "knn_k") as_size(cfg.knn_k);
    else if (key == "verify_threshold") {
        double t;
        as_double(t);
        cfg.verify_threshold = t;
    } else {
        throw FormatError("unknown configuration key '" + key + "'", line_no);
    }
}

/// Reads a flat key=value configuration file ('#' starts a comment).
inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    PipelineConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto tokens = detail::split_ws(line);
        std::string joined;
        for (auto t : tokens) joined += std::string(t);
        if (joined.empty()) continue;
        const auto eq = joined.find('=');
        if (eq == std::string::npos || eq == 0)
            throw FormatError(path.string() + ": expected key=value", line_no);
        apply_config_entry(cfg, joined.substr(0, eq), joined.substr(eq + 1), line_no);
    }
    validate_pipeline_config(cfg);
    return cfg;
}

inline std::string config_summary(const PipelineConfig& cfg) {
    std::ostringstream out;
    out << "k=" << cfg.cluster.k << " p=" << cfg.p << " metric="
        << (cfg.cluster.metric == Metric::Euclidean ? "euclidean" : "minkowski")
        << " silhouette_threshold=" << cfg.cluster.silhouette_threshold
        << " ratio_threshold=" << cfg.ratio_threshold << " sigma_edge=" << cfg.relaxation.sigma_edge
        << " lambda_desc=" << cfg.relaxation.lambda_desc << " knn_k=" << cfg.knn_k;
    return out.str();
}

} // namespace fpfuse

#endif // FPFUSE_PIPELINE_HPP
