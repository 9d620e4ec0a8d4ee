#ifndef FPFUSE_CLUSTERING_HPP
#define FPFUSE_CLUSTERING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "fpfuse/errors.hpp"
#include "fpfuse/keypoint.hpp"
#include "fpfuse/keypoint_io.hpp"

namespace fpfuse {

enum class Metric { Euclidean, Minkowski };
enum class FeatureSpace { Descriptor, Spatial, DescriptorPlusSpatial };

struct ClusterConfig {
    std::size_t k = 4;
    Metric metric = Metric::Euclidean;
    double minkowski_p = 2.0; // used when metric == Minkowski
    FeatureSpace feature_space = FeatureSpace::Descriptor;
    double spatial_weight = 1.0; // used when feature_space == DescriptorPlusSpatial
    std::size_t max_iterations = 100;
    std::uint64_t seed = 1;
    double silhouette_threshold = 0.0;
};

inline void validate_cluster_config(const ClusterConfig& c) {
    if (c.k == 0) throw Error("cluster count k must be positive");
    if (c.metric == Metric::Minkowski && c.minkowski_p < 1.0)
        throw Error("Minkowski exponent must be >= 1");
    if (c.max_iterations == 0) throw Error("max_iterations must be >= 1");
    if (c.silhouette_threshold < -1.0 || c.silhouette_threshold > 1.0)
        throw Error("silhouette threshold must lie in [-1, 1]");
    if (c.spatial_weight < 0.0) throw Error("spatial weight must be non-negative");
}

/// A k-way partition of a KeypointSet. Medoids are data points; every point
/// is assigned to a nearest medoid (ties to the lowest medoid point index).
struct Clustering {
    std::size_t k = 0;
    std::vector<std::size_t> medoids;    // ascending point indices, size k
    std::vector<std::size_t> assignment; // per point, cluster id in [0, k)
    double total_cost = 0.0;
    bool degenerate = false;             // all points identical
    std::vector<double> cost_trace;      // cost after init and each accepted swap

    std::vector<double> silhouette;          // empty until scored
    std::vector<bool> silhouette_defaulted;  // singleton / single-cluster convention
    std::vector<bool> excluded;              // set by refine_clusters
    std::vector<bool> rescinded;             // exclusion undone to keep a cluster viable

    bool scored() const { return !silhouette.empty(); }
};

namespace detail {

inline std::vector<std::vector<double>> feature_vectors(const KeypointSet& set, const ClusterConfig& cfg) {
    std::vector<std::vector<double>> feats(set.points.size());
    for (std::size_t i = 0; i < set.points.size(); ++i) {
        const Keypoint& kp = set.points[i];
        std::vector<double>& f = feats[i];
        switch (cfg.feature_space) {
        case FeatureSpace::Descriptor:
            f.assign(kp.descriptor.begin(), kp.descriptor.end());
            break;
        case FeatureSpace::Spatial:
            f = {kp.x, kp.y};
            break;
        case FeatureSpace::DescriptorPlusSpatial:
            f.assign(kp.descriptor.begin(), kp.descriptor.end());
            f.push_back(cfg.spatial_weight * kp.x);
            f.push_back(cfg.spatial_weight * kp.y);
            break;
        }
    }
    return feats;
}

inline double minkowski(const std::vector<double>& a, const std::vector<double>& b, double p) {
    double sum = 0.0;
    if (p == 2.0) {
        for (std::size_t t = 0; t < a.size(); ++t) {
            const double d = a[t] - b[t];
            sum += d * d;
        }
        return std::sqrt(sum);
    }
    if (p == 1.0) {
        for (std::size_t t = 0; t < a.size(); ++t) sum += std::abs(a[t] - b[t]);
        return sum;
    }
    for (std::size_t t = 0; t < a.size(); ++t) sum += std::pow(std::abs(a[t] - b[t]), p);
    return std::pow(sum, 1.0 / p);
}

} // namespace detail

/// Distance between two points of `set` under the configured metric and
/// feature space.
inline double point_distance(const KeypointSet& set, std::size_t i, std::size_t j, const ClusterConfig& cfg) {
    auto feats = detail::feature_vectors(set, cfg); // small sets only; see distance_matrix
    const double p = cfg.metric == Metric::Euclidean ? 2.0 : cfg.minkowski_p;
    return detail::minkowski(feats[i], feats[j], p);
}

/// Full symmetric pairwise distance matrix (row-major n*n).
inline std::vector<double> distance_matrix(const KeypointSet& set, const ClusterConfig& cfg) {
    const std::size_t n = set.points.size();
    auto feats = detail::feature_vectors(set, cfg);
    const double p = cfg.metric == Metric::Euclidean ? 2.0 : cfg.minkowski_p;
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = detail::minkowski(feats[i], feats[j], p);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    return dist;
}

namespace detail {

/// Step 1 medoid selection: seeded positions into a content-sorted point
/// order. Tying the draw to content rather than raw indices keeps the
/// initial configuration (and therefore the whole deterministic descent)
/// stable across captures that add, drop or permute a few points.
inline std::vector<std::size_t> seeded_initial_medoids(const std::vector<std::vector<double>>& feats,
                                                       std::size_t k, std::uint64_t seed) {
    const std::size_t n = feats.size();
    std::vector<std::pair<double, std::size_t>> keyed(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (double v : feats[i]) sum += v;
        keyed[i] = {sum, i};
    }
    std::sort(keyed.begin(), keyed.end());

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<bool> taken(n, false);
    std::vector<std::size_t> medoids;
    medoids.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t pos = std::min(n - 1, static_cast<std::size_t>(u(rng) * static_cast<double>(n)));
        while (taken[pos]) pos = (pos + 1) % n;
        taken[pos] = true;
        medoids.push_back(keyed[pos].second);
    }
    std::sort(medoids.begin(), medoids.end());
    return medoids;
}

} // namespace detail

namespace detail {

/// Nearest-medoid assignment. Medoid points go to their own cluster; ties
/// elsewhere resolve to the lowest medoid point index (medoids are kept in
/// ascending order, so the lowest cluster id wins).
inline void assign_points(const std::vector<double>& dist, std::size_t n,
                          const std::vector<std::size_t>& medoids,
                          std::vector<std::size_t>& assignment, double& cost) {
    assignment.assign(n, 0);
    cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        bool is_medoid = false;
        for (std::size_t c = 0; c < medoids.size(); ++c) {
            if (medoids[c] == i) {
                best = c;
                is_medoid = true;
                break;
            }
            const double d = dist[i * n + medoids[c]];
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        assignment[i] = best;
        if (!is_medoid) cost += dist[i * n + medoids[best]];
    }
}

inline double configuration_cost(const std::vector<double>& dist, std::size_t n,
                                 const std::vector<std::size_t>& medoids) {
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t m : medoids) best = std::min(best, dist[i * n + m]);
        cost += best;
    }
    return cost;
}

} // namespace detail

/// PAM k-medoids: seeded random initial medoids, nearest-medoid assignment,
/// then repeated steepest-descent medoid/non-medoid swaps until no swap
/// lowers the configuration cost (or max_iterations sweeps).
inline Clustering pam_cluster(const KeypointSet& set, const ClusterConfig& cfg) {
    validate_cluster_config(cfg);
    const std::size_t n = set.points.size();
    if (n < cfg.k)
        throw TooFewPoints("need at least k=" + std::to_string(cfg.k) + " points, got " + std::to_string(n));

    const auto feats = detail::feature_vectors(set, cfg);
    const double mink_p = cfg.metric == Metric::Euclidean ? 2.0 : cfg.minkowski_p;
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = detail::minkowski(feats[i], feats[j], mink_p);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }

    Clustering cl;
    cl.k = cfg.k;

    // Step 1: seeded random distinct medoids.
    cl.medoids = detail::seeded_initial_medoids(feats, cfg.k, cfg.seed);

    double cost = detail::configuration_cost(dist, n, cl.medoids);
    cl.cost_trace.push_back(cost);

    std::vector<bool> is_medoid(n, false);
    for (std::size_t m : cl.medoids) is_medoid[m] = true;

    for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
        // Steps 3-4: evaluate every (medoid, non-medoid) swap, keep the best.
        double best_cost = cost;
        std::size_t best_slot = 0, best_point = 0;
        bool improved = false;
        std::vector<std::size_t> trial = cl.medoids;
        for (std::size_t slot = 0; slot < cfg.k; ++slot) {
            const std::size_t original = trial[slot];
            for (std::size_t j = 0; j < n; ++j) {
                if (is_medoid[j]) continue;
                trial[slot] = j;
                const double c = detail::configuration_cost(dist, n, trial);
                if (c < best_cost) {
                    best_cost = c;
                    best_slot = slot;
                    best_point = j;
                    improved = true;
                }
            }
            trial[slot] = original;
        }
        if (!improved) break; // Step 5: no medoid changed
        is_medoid[cl.medoids[best_slot]] = false;
        is_medoid[best_point] = true;
        cl.medoids[best_slot] = best_point;
        std::sort(cl.medoids.begin(), cl.medoids.end());
        cost = best_cost;
        cl.cost_trace.push_back(cost);
    }

    detail::assign_points(dist, n, cl.medoids, cl.assignment, cl.total_cost);

    double max_d = 0.0;
    for (double d : dist) max_d = std::max(max_d, d);
    cl.degenerate = (max_d == 0.0);
    return cl;
}

struct SilhouetteScores {
    std::vector<double> value;
    std::vector<bool> defaulted;
};

/// Pairwise silhouette of each point. Within each cluster, points are ordered
/// by ascending distance to the medoid (ties by index) and scored in
/// consecutive pairs: with X = x(i)+x(i+1) the summed own-cluster average
/// distances and Y = y(i)+y(i+1) the same sums against the nearest other
/// cluster, both pair members receive S = (Y - X) / max(X, Y).
///
/// An unpaired trailing point falls back to the classical single-point
/// silhouette. Points in singleton clusters (and everything when k == 1)
/// score 0 and are marked defaulted.
inline SilhouetteScores silhouette_scores(const KeypointSet& set, const Clustering& cl,
                                          const ClusterConfig& cfg) {
    const std::size_t n = set.points.size();
    if (cl.assignment.size() != n) throw Error("clustering does not match keypoint set");
    const auto dist = distance_matrix(set, cfg);

    std::vector<std::vector<std::size_t>> members(cl.k);
    for (std::size_t i = 0; i < n; ++i) members[cl.assignment[i]].push_back(i);
    for (const auto& m : members)
        if (m.empty()) throw EmptyCluster("silhouette scoring requires every cluster non-empty");

    SilhouetteScores out;
    out.value.assign(n, 0.0);
    out.defaulted.assign(n, false);

    if (cl.k == 1) {
        out.defaulted.assign(n, true);
        return out;
    }

    // avg[i][c]: average distance of point i to the members of cluster c
    // (own cluster: average over the other members).
    std::vector<std::vector<double>> avg(n, std::vector<double>(cl.k, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < cl.k; ++c) {
            double sum = 0.0;
            std::size_t cnt = 0;
            for (std::size_t j : members[c]) {
                if (j == i) continue;
                sum += dist[i * n + j];
                ++cnt;
            }
            avg[i][c] = cnt ? sum / static_cast<double>(cnt) : 0.0;
        }
    }

    for (std::size_t c = 0; c < cl.k; ++c) {
        std::vector<std::size_t> order = members[c];
        const std::size_t medoid = cl.medoids[c];
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double da = dist[a * n + medoid], db = dist[b * n + medoid];
            if (da != db) return da < db;
            return a < b;
        });

        if (order.size() == 1) {
            out.defaulted[order[0]] = true; // x(i) undefined for a singleton
            continue;
        }

        std::size_t idx = 0;
        for (; idx + 1 < order.size(); idx += 2) {
            const std::size_t a = order[idx], b = order[idx + 1];
            const double X = avg[a][c] + avg[b][c];
            std::size_t best_c = cl.k;
            double best_sum = std::numeric_limits<double>::infinity();
            for (std::size_t oc = 0; oc < cl.k; ++oc) {
                if (oc == c) continue;
                const double s = avg[a][oc] + avg[b][oc];
                if (s < best_sum) {
                    best_sum = s;
                    best_c = oc;
                }
            }
            const double Y = avg[a][best_c] + avg[b][best_c];
            const double denom = std::max(X, Y);
            const double s = denom > 0.0 ? (Y - X) / denom : 0.0;
            out.value[a] = s;
            out.value[b] = s;
        }
        if (idx < order.size()) { // odd cluster size: classical silhouette
            const std::size_t a = order[idx];
            const double x = avg[a][c];
            double y = std::numeric_limits<double>::infinity();
            for (std::size_t oc = 0; oc < cl.k; ++oc) {
                if (oc == c) continue;
                y = std::min(y, avg[a][oc]);
            }
            const double denom = std::max(x, y);
            out.value[a] = denom > 0.0 ? (y - x) / denom : 0.0;
        }
    }
    return out;
}

/// Marks points whose silhouette falls below the configured threshold as
/// excluded from downstream graph construction. A cluster is never refined
/// below three retained points: the highest-scoring exclusions are rescinded
/// (and flagged) until the cluster is viable again.
inline Clustering refine_clusters(const KeypointSet& set, const Clustering& cl, const ClusterConfig& cfg) {
    if (!cl.scored()) throw Error("refine_clusters requires scored silhouettes");
    if (cl.silhouette.size() != set.points.size()) throw Error("clustering does not match keypoint set");

    Clustering out = cl;
    const std::size_t n = set.points.size();
    out.excluded.assign(n, false);
    out.rescinded.assign(n, false);

    for (std::size_t i = 0; i < n; ++i)
        out.excluded[i] = cl.silhouette[i] < cfg.silhouette_threshold;

    for (std::size_t c = 0; c < cl.k; ++c) {
        std::vector<std::size_t> members, dropped;
        for (std::size_t i = 0; i < n; ++i) {
            if (cl.assignment[i] != c) continue;
            members.push_back(i);
            if (out.excluded[i]) dropped.push_back(i);
        }
        const std::size_t keep_target = std::min<std::size_t>(3, members.size());
        std::size_t retained = members.size() - dropped.size();
        if (retained >= keep_target) continue;
        std::sort(dropped.begin(), dropped.end(), [&](std::size_t a, std::size_t b) {
            if (cl.silhouette[a] != cl.silhouette[b]) return cl.silhouette[a] > cl.silhouette[b];
            return a < b;
        });
        for (std::size_t i : dropped) {
            if (retained >= keep_target) break;
            out.excluded[i] = false;
            out.rescinded[i] = true;
            ++retained;
        }
    }
    return out;
}

/// Indices of a cluster's retained (non-excluded) points, in point order.
/// Before refinement every member counts as retained.
inline std::vector<std::size_t> retained_points(const Clustering& cl, std::size_t cluster_id) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < cl.assignment.size(); ++i)
        if (cl.assignment[i] == cluster_id && (cl.excluded.empty() || !cl.excluded[i]))
            out.push_back(i);
    return out;
}

/// Writes the optional .clu dump: `CLU1 k n` then one line per point with
/// `index cluster_id silhouette excluded_flag`.
inline void write_clustering_dump(const Clustering& cl, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "CLU1 " << cl.k << ' ' << cl.assignment.size() << '\n';
    for (std::size_t i = 0; i < cl.assignment.size(); ++i) {
        const double s = cl.scored() ? cl.silhouette[i] : 0.0;
        const bool ex = !cl.excluded.empty() && cl.excluded[i];
        out << i << ' ' << cl.assignment[i] << ' ' << detail::format_double(s) << ' ' << (ex ? 1 : 0)
            << '\n';
    }
    if (!out.flush()) throw IoError("write failed: " + path.string());
}

} // namespace fpfuse

#endif // FPFUSE_CLUSTERING_HPP
