#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "fpfuse/clustering.hpp"

using namespace fpfuse;

namespace {

// Points whose descriptors are zero except entry 0; clustering in descriptor
// space then reduces to 1-D geometry that is easy to reason about.
KeypointSet line_set(const std::vector<double>& values) {
    KeypointSet set;
    set.subject_id = "t";
    set.capture_id = "t";
    for (double v : values) {
        Keypoint kp;
        kp.x = v;
        kp.y = 0.0;
        kp.descriptor.fill(0.0);
        kp.descriptor[0] = v;
        set.points.push_back(kp);
    }
    return set;
}

KeypointSet random_descriptor_set(std::mt19937_64& rng, std::size_t n, std::size_t dims = 4) {
    std::uniform_real_distribution<double> u(0.0, 10.0);
    KeypointSet set;
    set.subject_id = "t";
    set.capture_id = "t";
    for (std::size_t i = 0; i < n; ++i) {
        Keypoint kp;
        kp.x = u(rng);
        kp.y = u(rng);
        kp.descriptor.fill(0.0);
        for (std::size_t d = 0; d < dims; ++d) kp.descriptor[d] = u(rng);
        set.points.push_back(kp);
    }
    return set;
}

// Clustered instance: k groups of points inside radius r around centers
// spaced far enough apart that the separation ratio (min inter-cluster point
// distance / max intra-cluster point distance) is at least `ratio`.
KeypointSet separated_set(std::mt19937_64& rng, std::size_t n, std::size_t k, double ratio) {
    const double r = 1.0;
    const double center_gap = ratio * (2.0 * r) + 2.0 * r + 0.5;
    std::uniform_real_distribution<double> off(-r / 1.5, r / 1.5);
    KeypointSet set;
    set.subject_id = "t";
    set.capture_id = "t";
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t g = i % k;
        Keypoint kp;
        kp.x = 0.0;
        kp.y = 0.0;
        kp.descriptor.fill(0.0);
        kp.descriptor[0] = static_cast<double>(g + 1) * center_gap + off(rng);
        kp.descriptor[1] = off(rng);
        set.points.push_back(kp);
    }
    return set;
}

double euclid(const Descriptor& a, const Descriptor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// Exhaustive k-medoid oracle over all C(n, k) medoid subsets.
double exhaustive_pam_cost(const KeypointSet& set, std::size_t k) {
    const std::size_t n = set.points.size();
    std::vector<std::size_t> subset(k);
    std::iota(subset.begin(), subset.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        double cost = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = std::numeric_limits<double>::infinity();
            for (std::size_t m : subset)
                d = std::min(d, euclid(set.points[i].descriptor, set.points[m].descriptor));
            cost += d;
        }
        best = std::min(best, cost);
        // next combination
        std::size_t pos = k;
        while (pos > 0 && subset[pos - 1] == n - k + pos - 1) --pos;
        if (pos == 0) break;
        ++subset[pos - 1];
        for (std::size_t q = pos; q < k; ++q) subset[q] = subset[q - 1] + 1;
    }
    return best;
}

// Straight re-implementation of the pairwise silhouette rules, kept separate
// from the library code path on purpose.
std::vector<double> silhouette_oracle(const KeypointSet& set, const Clustering& cl) {
    const std::size_t n = set.points.size();
    std::vector<double> scores(n, 0.0);
    if (cl.k < 2) return scores;

    auto avg_to = [&](std::size_t i, std::size_t cluster) {
        double sum = 0.0;
        std::size_t cnt = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || cl.assignment[j] != cluster) continue;
            sum += euclid(set.points[i].descriptor, set.points[j].descriptor);
            ++cnt;
        }
        return cnt ? sum / static_cast<double>(cnt) : 0.0;
    };

    for (std::size_t c = 0; c < cl.k; ++c) {
        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < n; ++i)
            if (cl.assignment[i] == c) order.push_back(i);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double da = euclid(set.points[a].descriptor, set.points[cl.medoids[c]].descriptor);
            const double db = euclid(set.points[b].descriptor, set.points[cl.medoids[c]].descriptor);
            if (da != db) return da < db;
            return a < b;
        });
        if (order.size() == 1) continue; // singleton: defaulted to 0

        std::size_t idx = 0;
        for (; idx + 1 < order.size(); idx += 2) {
            const std::size_t a = order[idx], b = order[idx + 1];
            const double X = avg_to(a, c) + avg_to(b, c);
            double Y = std::numeric_limits<double>::infinity();
            for (std::size_t oc = 0; oc < cl.k; ++oc) {
                if (oc == c) continue;
                Y = std::min(Y, avg_to(a, oc) + avg_to(b, oc));
            }
            const double denom = std::max(X, Y);
            const double s = denom > 0.0 ? (Y - X) / denom : 0.0;
            scores[a] = s;
            scores[b] = s;
        }
        if (idx < order.size()) {
            const std::size_t a = order[idx];
            const double x = avg_to(a, c);
            double y = std::numeric_limits<double>::infinity();
            for (std::size_t oc = 0; oc < cl.k; ++oc) {
                if (oc == c) continue;
                y = std::min(y, avg_to(a, oc));
            }
            const double denom = std::max(x, y);
            scores[a] = denom > 0.0 ? (y - x) / denom : 0.0;
        }
    }
    return scores;
}

ClusterConfig config_k(std::size_t k, std::uint64_t seed = 1) {
    ClusterConfig cfg;
    cfg.k = k;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("four points on a line split into the optimal two clusters") {
    const KeypointSet set = line_set({0.0, 1.0, 10.0, 11.0});
    const Clustering cl = pam_cluster(set, config_k(2));

    // Brute force over all C(4,2) medoid pairs confirms the global optimum.
    CHECK(exhaustive_pam_cost(set, 2) == 2.0);
    CHECK(cl.total_cost == 2.0);
    CHECK(cl.assignment[0] == cl.assignment[1]);
    CHECK(cl.assignment[2] == cl.assignment[3]);
    CHECK(cl.assignment[0] != cl.assignment[2]);
}

TEST_CASE("k equal to n makes every point its own medoid at zero cost") {
    const KeypointSet set = line_set({3.0, 1.0, 4.0, 1.5, 9.0});
    const Clustering cl = pam_cluster(set, config_k(5));
    CHECK(cl.total_cost == 0.0);
    std::vector<std::size_t> medoids = cl.medoids;
    std::sort(medoids.begin(), medoids.end());
    for (std::size_t i = 0; i < 5; ++i) CHECK(medoids[i] == i);
}

TEST_CASE("PAM matches the exhaustive oracle on separated instances") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        std::uniform_int_distribution<std::size_t> nk(2, 3);
        const std::size_t k = nk(rng);
        std::uniform_int_distribution<std::size_t> nn(k * 3, 12);
        const std::size_t n = nn(rng);
        const KeypointSet set = separated_set(rng, n, k, 3.0);
        const Clustering cl = pam_cluster(set, config_k(k, trial));
        const double best = exhaustive_pam_cost(set, k);
        CHECK(cl.total_cost == best);
    }
}

TEST_CASE("PAM never beats the exhaustive minimum") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        std::uniform_int_distribution<std::size_t> nn(4, 12);
        const std::size_t n = nn(rng);
        const KeypointSet set = random_descriptor_set(rng, n);
        const Clustering cl = pam_cluster(set, config_k(3, trial));
        CHECK(cl.total_cost >= exhaustive_pam_cost(set, 3));
    }
}

TEST_CASE("accepted swap costs never increase") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const KeypointSet set = random_descriptor_set(rng, 30);
        const Clustering cl = pam_cluster(set, config_k(4, trial));
        REQUIRE(!cl.cost_trace.empty());
        for (std::size_t i = 1; i < cl.cost_trace.size(); ++i)
            CHECK(cl.cost_trace[i] <= cl.cost_trace[i - 1]);
        CHECK(cl.total_cost <= cl.cost_trace.front());
    }
}

TEST_CASE("clustering is deterministic and medoids are data points") {
    std::mt19937_64 rng(42);
    const KeypointSet set = random_descriptor_set(rng, 25);
    const Clustering a = pam_cluster(set, config_k(3, 5));
    const Clustering b = pam_cluster(set, config_k(3, 5));
    CHECK(a.medoids == b.medoids);
    CHECK(a.assignment == b.assignment);
    CHECK(a.total_cost == b.total_cost);
    for (std::size_t m : a.medoids) {
        CHECK(m < set.points.size());
        CHECK(a.assignment[m] == a.assignment[m]); // medoid assigned to itself
    }
    for (std::size_t c = 0; c < a.k; ++c) CHECK(a.assignment[a.medoids[c]] == c);
}

TEST_CASE("permuting point order preserves the cost on separated instances") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        KeypointSet set = separated_set(rng, 12, 3, 3.0);
        const Clustering a = pam_cluster(set, config_k(3, trial));
        std::shuffle(set.points.begin(), set.points.end(), rng);
        const Clustering b = pam_cluster(set, config_k(3, trial));
        // same optimum, summed in a different point order
        CHECK(a.total_cost == Catch::Approx(b.total_cost).epsilon(1e-12));
    }
}

TEST_CASE("identical points produce a degenerate but valid clustering") {
    const KeypointSet set = line_set({2.0, 2.0, 2.0, 2.0, 2.0});
    const Clustering cl = pam_cluster(set, config_k(2));
    CHECK(cl.degenerate);
    CHECK(cl.total_cost == 0.0);
    CHECK(cl.medoids.size() == 2);
    CHECK(cl.medoids[0] != cl.medoids[1]);
}

TEST_CASE("too few points is an error") {
    const KeypointSet set = line_set({1.0, 2.0});
    CHECK_THROWS_AS(pam_cluster(set, config_k(3)), TooFewPoints);
}

TEST_CASE("duplicate-pair clusters far apart score a perfect silhouette") {
    // Intra-cluster distances vanish, so Eq-style numerator equals the
    // denominator and every point scores 1.
    const KeypointSet set = line_set({0.0, 0.0, 10.0, 10.0});
    Clustering cl;
    cl.k = 2;
    cl.medoids = {0, 2};
    cl.assignment = {0, 0, 1, 1};
    const SilhouetteScores s = silhouette_scores(set, cl, config_k(2));
    for (double v : s.value) CHECK(v == 1.0);
}

TEST_CASE("a pair equidistant between clusters scores zero and survives threshold 0") {
    // Own-cluster pair sums equal the neighbor sums: X = 2+2, Y = 2+2.
    const KeypointSet set = line_set({1.0, 3.0, 0.0, 4.0});
    Clustering cl;
    cl.k = 2;
    cl.medoids = {0, 2};
    cl.assignment = {0, 0, 1, 1};
    const SilhouetteScores s = silhouette_scores(set, cl, config_k(2));
    CHECK(s.value[0] == 0.0);
    CHECK(s.value[1] == 0.0);

    Clustering scored = cl;
    scored.silhouette = s.value;
    scored.silhouette_defaulted = s.defaulted;
    ClusterConfig cfg = config_k(2);
    cfg.silhouette_threshold = 0.0;
    const Clustering refined = refine_clusters(set, scored, cfg);
    CHECK_FALSE(refined.excluded[0]); // S == 0 is retained (strict inequality)
    CHECK_FALSE(refined.excluded[1]);
}

TEST_CASE("a point planted in the wrong cluster is excluded at threshold 0") {
    // Point 3 (value 9.9) is assigned to the low cluster by construction.
    const KeypointSet set = line_set({0.0, 0.1, 0.2, 9.9, 10.0, 10.1, 10.2});
    Clustering cl;
    cl.k = 2;
    cl.medoids = {1, 5};
    cl.assignment = {0, 0, 0, 0, 1, 1, 1};
    const SilhouetteScores s = silhouette_scores(set, cl, config_k(2));

    const std::vector<double> oracle = silhouette_oracle(set, cl);
    for (std::size_t i = 0; i < set.points.size(); ++i)
        CHECK(std::abs(s.value[i] - oracle[i]) <= 1e-12);
    REQUIRE(s.value[3] < 0.0);

    Clustering scored = cl;
    scored.silhouette = s.value;
    scored.silhouette_defaulted = s.defaulted;
    const Clustering refined = refine_clusters(set, scored, config_k(2));
    CHECK(refined.excluded[3]);
    // Its pair partner also scored negative but was rescinded to keep the
    // cluster at three retained points.
    CHECK_FALSE(refined.excluded[2]);
    CHECK(refined.rescinded[2]);
    CHECK(retained_points(refined, 0).size() == 3);
}

TEST_CASE("threshold -1 excludes nothing") {
    std::mt19937_64 rng(8);
    const KeypointSet set = random_descriptor_set(rng, 20);
    ClusterConfig cfg = config_k(3);
    cfg.silhouette_threshold = -1.0;
    Clustering cl = pam_cluster(set, cfg);
    SilhouetteScores s = silhouette_scores(set, cl, cfg);
    cl.silhouette = s.value;
    cl.silhouette_defaulted = s.defaulted;
    const Clustering refined = refine_clusters(set, cl, cfg);
    for (bool e : refined.excluded) CHECK_FALSE(e);
}

TEST_CASE("silhouettes match the independent evaluator and stay in [-1, 1]") {
    std::mt19937_64 rng(555);
    for (int trial = 0; trial < 60; ++trial) {
        std::uniform_int_distribution<std::size_t> nn(9, 24);
        const KeypointSet set = random_descriptor_set(rng, nn(rng));
        const ClusterConfig cfg = config_k(3, trial);
        Clustering cl = pam_cluster(set, cfg);
        const SilhouetteScores s = silhouette_scores(set, cl, cfg);
        const std::vector<double> oracle = silhouette_oracle(set, cl);
        for (std::size_t i = 0; i < set.points.size(); ++i) {
            CHECK(std::abs(s.value[i] - oracle[i]) <= 1e-12);
            CHECK(s.value[i] >= -1.0);
            CHECK(s.value[i] <= 1.0);
        }
    }
}

TEST_CASE("even duplicate-pair clusters reduce to the classical silhouette") {
    // Each consecutive pair consists of two coincident points, so x(i+1) =
    // x(i) and y(i+1) = y(i); the pair score must equal (y - x)/max(x, y).
    const KeypointSet set = line_set({0.0, 0.0, 1.0, 1.0, 6.0, 6.0, 8.0, 8.0});
    Clustering cl;
    cl.k = 2;
    cl.medoids = {0, 4};
    cl.assignment = {0, 0, 0, 0, 1, 1, 1, 1};
    const SilhouetteScores s = silhouette_scores(set, cl, config_k(2));

    auto classical = [&](std::size_t i) {
        double x = 0.0, y = 0.0;
        std::size_t cx = 0, cy = 0;
        for (std::size_t j = 0; j < set.points.size(); ++j) {
            if (j == i) continue;
            const double d = std::abs(set.points[i].descriptor[0] - set.points[j].descriptor[0]);
            if (cl.assignment[j] == cl.assignment[i]) {
                x += d;
                ++cx;
            } else {
                y += d;
                ++cy;
            }
        }
        x /= static_cast<double>(cx);
        y /= static_cast<double>(cy);
        return (y - x) / std::max(x, y);
    };
    for (std::size_t i = 0; i < set.points.size(); ++i)
        CHECK(std::abs(s.value[i] - classical(i)) <= 1e-12);
}

TEST_CASE("singleton clusters score zero and are flagged") {
    const KeypointSet set = line_set({0.0, 0.1, 5.0});
    Clustering cl;
    cl.k = 2;
    cl.medoids = {0, 2};
    cl.assignment = {0, 0, 1};
    const SilhouetteScores s = silhouette_scores(set, cl, config_k(2));
    CHECK(s.value[2] == 0.0);
    CHECK(s.defaulted[2]);
    CHECK_FALSE(s.defaulted[0]);
}

TEST_CASE("cluster dump writes one line per point") {
    std::mt19937_64 rng(4);
    const KeypointSet set = random_descriptor_set(rng, 10);
    const ClusterConfig cfg = config_k(2);
    Clustering cl = pam_cluster(set, cfg);
    const auto path = std::filesystem::temp_directory_path() / "fpfuse_dump_test.clu";
    write_clustering_dump(cl, path);
    std::ifstream in(path);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == set.points.size() + 1);
}
