#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "fpfuse/evaluation.hpp"

using namespace fpfuse;

namespace {

FusedTemplate value_tpl(double value, std::string id) {
    FusedTemplate t;
    t.subject_id = std::move(id);
    t.k = 1;
    t.p = 1;
    t.values.assign(128, 0.0);
    t.values[0] = value;
    return t;
}

// Gallery templates sit at 0, so a probe with entry value v scores Euclidean
// distance v against any claimed subject.
TrialSet distance_trials(const std::vector<double>& genuine, const std::vector<double>& impostor,
                         std::size_t subjects = 5) {
    TrialSet ts;
    for (std::size_t s = 0; s < subjects; ++s)
        ts.gallery.push_back(value_tpl(0.0, "s" + std::to_string(s)));
    for (std::size_t i = 0; i < genuine.size(); ++i) {
        const std::string id = "s" + std::to_string(i % subjects);
        FusedTemplate probe = value_tpl(genuine[i], id);
        ts.genuine.push_back({std::move(probe), id});
    }
    for (std::size_t i = 0; i < impostor.size(); ++i) {
        FusedTemplate probe = value_tpl(impostor[i], "imp" + std::to_string(i));
        ts.impostor.push_back({std::move(probe), "s" + std::to_string(i % subjects)});
    }
    return ts;
}

} // namespace

TEST_CASE("perfect separation gives zero EER and unit AUC") {
    const TrialSet ts = distance_trials({1.0, 2.0}, {5.0, 6.0});
    const RocReport r = run_trials(ts, MatchMetric::KnnEuclidean, 1);
    CHECK(r.eer == 0.0);
    CHECK(r.auc == 1.0);
}

TEST_CASE("indistinguishable score distributions sit at FAR == FRR") {
    const TrialSet ts = distance_trials({1.0, 9.0}, {1.0, 9.0});
    const RocReport r = run_trials(ts, MatchMetric::KnnEuclidean, 1);
    for (const RocRow& row : r.rows)
        if (row.threshold < 9.0) CHECK(row.far == row.frr);
    CHECK(r.eer == 50.0);
    CHECK(r.auc == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("ten hand-built trials reproduce the hand-computed table") {
    const TrialSet ts = distance_trials({1.0, 2.0, 3.0, 4.0, 5.0}, {2.5, 6.0, 7.0, 8.0, 9.0});
    const RocReport r =
        run_trials(ts, MatchMetric::KnnEuclidean, 1, {0.0, 2.6, 5.5, 10.0});

    REQUIRE(r.rows.size() == 4);
    CHECK(r.rows[0].far == 0.0);
    CHECK(r.rows[0].frr == 100.0);
    CHECK(r.rows[0].recognition_rate == 0.0);
    CHECK(r.rows[1].far == 20.0);
    CHECK(r.rows[1].frr == 60.0);
    CHECK(r.rows[1].recognition_rate == 40.0);
    CHECK(r.rows[2].far == 20.0);
    CHECK(r.rows[2].frr == 0.0);
    CHECK(r.rows[2].recognition_rate == 100.0);
    CHECK(r.rows[3].far == 100.0);
    CHECK(r.rows[3].frr == 0.0);

    CHECK(r.eer == 20.0);                                // FAR constant across the crossing
    CHECK(r.auc == Catch::Approx(0.84).margin(1e-12));   // hand-worked trapezoid
}

TEST_CASE("correlation sweeps run in the opposite direction") {
    // Probe value v against a gallery at entry 0 = 1: correlation is 1 when
    // v > 0 (same single-entry support), so build two-entry templates.
    TrialSet ts;
    auto corr_tpl = [](double a, double b, std::string id) {
        FusedTemplate t;
        t.subject_id = std::move(id);
        t.k = 1;
        t.p = 1;
        t.values.assign(128, 0.0);
        t.values[0] = a;
        t.values[1] = b;
        return t;
    };
    ts.gallery = {corr_tpl(1.0, 0.0, "g0"), corr_tpl(1.0, 0.0, "g1")};
    ts.genuine.push_back({corr_tpl(1.0, 0.1, "g0"), "g0"});  // high correlation
    ts.genuine.push_back({corr_tpl(1.0, 0.2, "g1"), "g1"});
    ts.impostor.push_back({corr_tpl(0.1, 1.0, "x0"), "g0"}); // low correlation
    ts.impostor.push_back({corr_tpl(0.2, 1.0, "x1"), "g1"});

    const RocReport r = run_trials(ts, MatchMetric::NormalizedCorrelation, 1);
    CHECK(r.eer == 0.0);
    CHECK(r.auc == 1.0);
    // FAR falls as the similarity threshold rises
    for (std::size_t i = 1; i < r.rows.size(); ++i) CHECK(r.rows[i].far <= r.rows[i - 1].far);
}

TEST_CASE("error counts are exact multiples of the trial counts") {
    std::mt19937_64 rng(40);
    std::uniform_real_distribution<double> g(0.0, 4.0), im(2.0, 8.0);
    std::vector<double> genuine(17), impostor(23);
    for (auto& v : genuine) v = g(rng);
    for (auto& v : impostor) v = im(rng);
    const TrialSet ts = distance_trials(genuine, impostor);
    const RocReport r = run_trials(ts, MatchMetric::KnnEuclidean, 1);
    for (const RocRow& row : r.rows) {
        const double fa = row.far * static_cast<double>(impostor.size()) / 100.0;
        const double fr = row.frr * static_cast<double>(genuine.size()) / 100.0;
        CHECK(std::abs(fa - std::round(fa)) <= 1e-9);
        CHECK(std::abs(fr - std::round(fr)) <= 1e-9);
        CHECK(row.recognition_rate == 100.0 - row.frr);
    }
    CHECK(r.auc >= 0.0);
    CHECK(r.auc <= 1.0);
    CHECK(r.eer >= 0.0);
    CHECK(r.eer <= 100.0);
}

TEST_CASE("FAR and FRR are monotone along the sweep") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::vector<double> genuine(20), impostor(20);
    for (auto& v : genuine) v = u(rng);
    for (auto& v : impostor) v = u(rng);
    const TrialSet ts = distance_trials(genuine, impostor);
    const RocReport r = run_trials(ts, MatchMetric::KnnEuclidean, 1);
    for (std::size_t i = 1; i < r.rows.size(); ++i) {
        CHECK(r.rows[i].far >= r.rows[i - 1].far); // accepting more as t rises
        CHECK(r.rows[i].frr <= r.rows[i - 1].frr);
    }
}

TEST_CASE("a claimed subject with several templates scores its best") {
    TrialSet ts;
    ts.gallery.push_back(value_tpl(0.0, "dup"));
    ts.gallery.push_back(value_tpl(10.0, "dup"));
    ts.gallery.push_back(value_tpl(0.0, "other"));
    ts.genuine.push_back({value_tpl(1.0, "dup"), "dup"});   // min(1, 9) = 1
    ts.impostor.push_back({value_tpl(8.0, "other"), "dup"}); // min(8, 2) = 2
    const RocReport r = run_trials(ts, MatchMetric::KnnEuclidean, 1, {1.5});
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].frr == 0.0);
    CHECK(r.rows[0].far == 0.0);
}

TEST_CASE("degenerate single-threshold grids are allowed") {
    const TrialSet ts = distance_trials({1.0}, {3.0});
    const RocReport r = run_trials(ts, MatchMetric::KnnEuclidean, 1, {2.0});
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].far == 0.0);
    CHECK(r.rows[0].frr == 0.0);
}

TEST_CASE("trial preconditions are enforced") {
    TrialSet empty;
    CHECK_THROWS_AS(run_trials(empty, MatchMetric::KnnEuclidean, 1), EmptyTrials);

    TrialSet ts = distance_trials({1.0}, {2.0});
    CHECK_THROWS_AS(run_trials(ts, MatchMetric::KnnEuclidean, 1, {2.0, 1.0}), Error);

    TrialSet bad = distance_trials({1.0}, {2.0});
    bad.genuine[0].claimed_id = "somebody-else";
    CHECK_THROWS_AS(run_trials(bad, MatchMetric::KnnEuclidean, 1), Error);

    TrialSet unknown = distance_trials({1.0}, {2.0});
    unknown.impostor[0].claimed_id = "not-enrolled";
    CHECK_THROWS_AS(run_trials(unknown, MatchMetric::KnnEuclidean, 1), Error);
}

TEST_CASE("comparison flags no improvement for identical reports") {
    const TrialSet ts = distance_trials({1.0, 2.0}, {4.0, 5.0});
    const RocReport face = run_trials(ts, MatchMetric::KnnEuclidean, 1, {0.0, 3.0, 6.0});
    const RocReport palm = face;
    const RocReport fused = face;
    const ComparisonReport c = compare_modalities(face, palm, fused);
    REQUIRE(c.rows.size() == 3);
    CHECK_FALSE(c.fused_improves_over_face);
    CHECK_FALSE(c.fused_improves_over_palm);
}

TEST_CASE("mismatched grids cannot be compared") {
    const TrialSet ts = distance_trials({1.0, 2.0}, {4.0, 5.0});
    const RocReport a = run_trials(ts, MatchMetric::KnnEuclidean, 1, {0.0, 3.0});
    const RocReport b = run_trials(ts, MatchMetric::KnnEuclidean, 1, {0.0, 4.0});
    CHECK_THROWS_AS(compare_modalities(a, b, a), MismatchedGrids);
}

TEST_CASE("roc reports serialize with a summary line") {
    const TrialSet ts = distance_trials({1.0, 2.0}, {4.0, 5.0});
    const RocReport r = run_trials(ts, MatchMetric::KnnEuclidean, 1, {0.0, 3.0, 6.0});
    const auto path = std::filesystem::temp_directory_path() / "fpfuse_roc_test.roc";
    write_roc_report(r, path);
    std::ifstream in(path);
    std::string line, first, last;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
        if (lines == 0) first = line;
        last = line;
        ++lines;
    }
    CHECK(lines == 2 + r.rows.size());
    CHECK(first == "threshold far frr recognition_rate");
    CHECK(last.rfind("eer ", 0) == 0);
}
