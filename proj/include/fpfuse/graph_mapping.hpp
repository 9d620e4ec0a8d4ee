#ifndef FPFUSE_GRAPH_MAPPING_HPP
#define FPFUSE_GRAPH_MAPPING_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <vector>

#include "fpfuse/correspondence.hpp"
#include "fpfuse/errors.hpp"
#include "fpfuse/keypoint.hpp"
#include "fpfuse/keypoint_io.hpp"

namespace fpfuse {

/// Complete graph over a cluster's retained keypoints. Edge lengths are the
/// spatial Euclidean distances between vertex positions.
struct ClusterGraph {
    std::vector<Keypoint> vertices;
    std::vector<double> edge_length; // n*n symmetric, zero diagonal

    std::size_t order() const { return vertices.size(); }
    std::size_t edge_count() const { return order() * (order() - 1) / 2; }
    double length(std::size_t i, std::size_t j) const { return edge_length[i * order() + j]; }
};

inline ClusterGraph build_graph(const std::vector<Keypoint>& cluster) {
    if (cluster.size() < 3)
        throw TooFewVertices("a cluster graph needs at least 3 vertices, got " +
                             std::to_string(cluster.size()));
    ClusterGraph g;
    g.vertices = cluster;
    const std::size_t n = cluster.size();
    g.edge_length.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = spatial_distance(cluster[i], cluster[j]);
            g.edge_length[i * n + j] = d;
            g.edge_length[j * n + i] = d;
        }
    return g;
}

struct RelaxationConfig {
    double sigma_edge = 10.0;  // edge-length compatibility bandwidth, pixels
    double lambda_desc = 0.5;  // descriptor term weight in the distortion cost
    std::size_t max_iters = 50;
    double epsilon = 1e-4;     // convergence tolerance on assignment change
    std::uint64_t seed = 0;    // reserved; the relaxation itself is deterministic
};

inline void validate_relaxation_config(const RelaxationConfig& c) {
    if (c.sigma_edge <= 0.0) throw Error("sigma_edge must be positive");
    if (c.lambda_desc < 0.0) throw Error("lambda_desc must be non-negative");
    if (c.max_iters == 0) throw Error("max_iters must be >= 1");
    if (c.epsilon <= 0.0) throw Error("epsilon must be positive");
}

/// A bijection between two equal-order cluster graphs plus the geometric
/// distortion it induces.
struct IsomorphicMapping {
    std::vector<std::size_t> map; // face vertex v -> palm vertex map[v]
    double distortion_cost = 0.0;
    bool converged = false;
    std::size_t iterations_used = 0;
};

/// Distortion of a candidate bijection: summed edge-length disagreement over
/// all vertex pairs plus lambda_desc times the summed descriptor distance of
/// mapped vertices.
inline double mapping_cost(const ClusterGraph& face_g, const ClusterGraph& palm_g,
                           const std::vector<std::size_t>& map, const RelaxationConfig& cfg) {
    const std::size_t n = face_g.order();
    double cost = 0.0;
    for (std::size_t v = 0; v < n; ++v)
        for (std::size_t w = v + 1; w < n; ++w)
            cost += std::abs(face_g.length(v, w) - palm_g.length(map[v], map[w]));
    for (std::size_t v = 0; v < n; ++v)
        cost += cfg.lambda_desc * descriptor_distance(face_g.vertices[v].descriptor,
                                                      palm_g.vertices[map[v]].descriptor);
    return cost;
}

/// Searches a low-distortion bijection between two equal-order complete
/// graphs by probabilistic relaxation labeling.
///
/// An assignment matrix P (rows: face vertices, columns: palm vertices) is
/// initialized from descriptor similarity, with extra mass on any pairs the
/// caller already matched. Each iteration multiplies P[v][w] by the support
///   q(v,w) = sum over v' != v, w' != w of P[v'][w'] *
///            exp(-|len(v,v') - len(w,w')| / sigma_edge)
/// and renormalizes rows; iteration stops when the largest entry change
/// falls below epsilon or max_iters is reached. The bijection is extracted
/// greedily from P (global maximum first, ties to the lowest indices).
inline IsomorphicMapping best_mapping(const ClusterGraph& face_g, const ClusterGraph& palm_g,
                                      const CorrespondenceSet& init, const RelaxationConfig& cfg) {
    validate_relaxation_config(cfg);
    const std::size_t n = face_g.order();
    if (palm_g.order() != n)
        throw SizeMismatch("graphs must have equal order: " + std::to_string(n) + " vs " +
                           std::to_string(palm_g.order()));

    // Descriptor affinity init, rows normalized.
    std::vector<double> desc_d(n * n);
    double mean = 0.0;
    for (std::size_t v = 0; v < n; ++v)
        for (std::size_t w = 0; w < n; ++w) {
            desc_d[v * n + w] =
                descriptor_distance(face_g.vertices[v].descriptor, palm_g.vertices[w].descriptor);
            mean += desc_d[v * n + w];
        }
    mean /= static_cast<double>(n * n);

    std::vector<double> p(n * n, 1.0);
    if (mean > 0.0)
        for (std::size_t i = 0; i < n * n; ++i) p[i] = std::exp(-desc_d[i] / mean);
    for (const auto& pc : init.pairs)
        if (!pc.padded && pc.face_index < n && pc.palm_index < n)
            p[pc.face_index * n + pc.palm_index] *= 2.0;

    auto normalize_rows = [&](std::vector<double>& m) {
        for (std::size_t v = 0; v < n; ++v) {
            double sum = 0.0;
            for (std::size_t w = 0; w < n; ++w) sum += m[v * n + w];
            if (sum > 0.0) {
                for (std::size_t w = 0; w < n; ++w) m[v * n + w] /= sum;
            } else {
                for (std::size_t w = 0; w < n; ++w) m[v * n + w] = 1.0 / static_cast<double>(n);
            }
        }
    };
    normalize_rows(p);

    // Edge compatibility table, indexed [(v*n+v')*n*n + w*n+w'].
    std::vector<double> comp(n * n * n * n);
    for (std::size_t v = 0; v < n; ++v)
        for (std::size_t vp = 0; vp < n; ++vp)
            for (std::size_t w = 0; w < n; ++w)
                for (std::size_t wp = 0; wp < n; ++wp)
                    comp[((v * n + vp) * n + w) * n + wp] =
                        std::exp(-std::abs(face_g.length(v, vp) - palm_g.length(w, wp)) /
                                 cfg.sigma_edge);

    IsomorphicMapping result;
    std::vector<double> q(n * n), next(n * n);
    for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
        for (std::size_t v = 0; v < n; ++v)
            for (std::size_t w = 0; w < n; ++w) {
                double support = 0.0;
                for (std::size_t vp = 0; vp < n; ++vp) {
                    if (vp == v) continue;
                    const double* row_comp = &comp[((v * n + vp) * n + w) * n];
                    const double* row_p = &p[vp * n];
                    for (std::size_t wp = 0; wp < n; ++wp) {
                        if (wp == w) continue;
                        support += row_p[wp] * row_comp[wp];
                    }
                }
                q[v * n + w] = support;
            }
        for (std::size_t i = 0; i < n * n; ++i) next[i] = p[i] * q[i];
        normalize_rows(next);
        double delta = 0.0;
        for (std::size_t i = 0; i < n * n; ++i) delta = std::max(delta, std::abs(next[i] - p[i]));
        p.swap(next);
        result.iterations_used = iter + 1;
        if (delta < cfg.epsilon) {
            result.converged = true;
            break;
        }
    }

    // Greedy extraction: repeatedly fix the global maximum of P.
    result.map.assign(n, kNoIndex);
    std::vector<bool> row_done(n, false), col_done(n, false);
    for (std::size_t step = 0; step < n; ++step) {
        double best = -1.0;
        std::size_t bv = 0, bw = 0;
        for (std::size_t v = 0; v < n; ++v) {
            if (row_done[v]) continue;
            for (std::size_t w = 0; w < n; ++w) {
                if (col_done[w]) continue;
                if (p[v * n + w] > best) {
                    best = p[v * n + w];
                    bv = v;
                    bw = w;
                }
            }
        }
        result.map[bv] = bw;
        row_done[bv] = true;
        col_done[bw] = true;
    }

    result.distortion_cost = mapping_cost(face_g, palm_g, result.map, cfg);
    return result;
}

struct AssignmentResult {
    std::vector<std::size_t> assignment; // row i -> column assignment[i]
    double total_cost = 0.0;
};

/// Exact minimum-total-cost assignment on a square cost matrix. Exhaustive
/// permutation search for k <= 8, subset dynamic programming beyond; both
/// return the lexicographically smallest optimal assignment.
inline AssignmentResult solve_assignment(const std::vector<std::vector<double>>& cost) {
    const std::size_t k = cost.size();
    if (k == 0) throw Error("empty cost matrix");
    for (const auto& row : cost)
        if (row.size() != k) throw Error("cost matrix must be square");

    AssignmentResult best;
    if (k <= 8) {
        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        best.total_cost = std::numeric_limits<double>::infinity();
        do {
            double c = 0.0;
            for (std::size_t i = 0; i < k; ++i) c += cost[i][perm[i]];
            if (c < best.total_cost) {
                best.total_cost = c;
                best.assignment = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }

    // dp[mask]: minimum cost of assigning rows 0..popcount(mask)-1 to the
    // column set encoded by mask.
    const std::size_t full = (std::size_t{1} << k) - 1;
    std::vector<double> dp(full + 1, std::numeric_limits<double>::infinity());
    dp[0] = 0.0;
    for (std::size_t mask = 1; mask <= full; ++mask) {
        const std::size_t row = static_cast<std::size_t>(std::popcount(mask)) - 1;
        for (std::size_t c = 0; c < k; ++c) {
            if (!(mask & (std::size_t{1} << c))) continue;
            const double cand = dp[mask ^ (std::size_t{1} << c)] + cost[row][c];
            if (cand < dp[mask]) dp[mask] = cand;
        }
    }
    best.total_cost = dp[full];
    best.assignment.assign(k, 0);
    std::size_t mask = full;
    for (std::size_t row = k; row-- > 0;) {
        for (std::size_t c = 0; c < k; ++c) {
            if (!(mask & (std::size_t{1} << c))) continue;
            if (dp[mask ^ (std::size_t{1} << c)] + cost[row][c] == dp[mask]) {
                best.assignment[row] = c;
                mask ^= std::size_t{1} << c;
                break;
            }
        }
    }
    return best;
}

/// A matched face/palm cluster pair carrying its graphs and vertex mapping.
struct ClusterPairing {
    std::size_t face_cluster = 0;
    std::size_t palm_cluster = 0;
    ClusterGraph face_graph;
    ClusterGraph palm_graph;
    IsomorphicMapping mapping;
    std::size_t cluster_rank = 0;  // canonical concatenation position
    std::size_t padded_pairs = 0;  // sentinel slots carried into this pairing
};

/// Pairs up k face-cluster graphs with k palm-cluster graphs: every pair's
/// best_mapping distortion fills a k x k cost matrix and the exact
/// minimum-total-cost assignment picks the pairing.
inline std::vector<ClusterPairing> assign_cluster_pairs(const std::vector<ClusterGraph>& face_graphs,
                                                        const std::vector<ClusterGraph>& palm_graphs,
                                                        const RelaxationConfig& cfg) {
    if (face_graphs.size() != palm_graphs.size())
        throw ClusterCountMismatch("need equal cluster counts, got " +
                                   std::to_string(face_graphs.size()) + " vs " +
                                   std::to_string(palm_graphs.size()));
    const std::size_t k = face_graphs.size();
    if (k == 0) throw ClusterCountMismatch("no clusters to pair");

    std::vector<std::vector<IsomorphicMapping>> maps(k, std::vector<IsomorphicMapping>(k));
    std::vector<std::vector<double>> cost(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            maps[i][j] = best_mapping(face_graphs[i], palm_graphs[j], CorrespondenceSet{}, cfg);
            cost[i][j] = maps[i][j].distortion_cost;
        }

    const AssignmentResult sol = solve_assignment(cost);
    std::vector<ClusterPairing> out(k);
    for (std::size_t i = 0; i < k; ++i) {
        out[i].face_cluster = i;
        out[i].palm_cluster = sol.assignment[i];
        out[i].face_graph = face_graphs[i];
        out[i].palm_graph = palm_graphs[sol.assignment[i]];
        out[i].mapping = maps[i][sol.assignment[i]];
        out[i].cluster_rank = i;
    }
    return out;
}

/// Writes the optional .map dump: one `face_vertex palm_vertex` line per
/// mapped pair, then `cost <value> converged <0|1>`.
inline void write_mapping_dump(const IsomorphicMapping& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (std::size_t v = 0; v < m.map.size(); ++v) out << v << ' ' << m.map[v] << '\n';
    out << "cost " << detail::format_double(m.distortion_cost) << " converged " << (m.converged ? 1 : 0)
        << '\n';
    if (!out.flush()) throw IoError("write failed: " + path.string());
}

} // namespace fpfuse

#endif // FPFUSE_GRAPH_MAPPING_HPP
