#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fpfuse/keypoint.hpp"
#include "fpfuse/keypoint_io.hpp"
#include "fpfuse/synthetic.hpp"

using namespace fpfuse;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() / "fpfuse_kpt_tests";
    fs::create_directories(dir);
    return dir / (name + "_" + std::to_string(counter++));
}

KeypointSet random_set(std::mt19937_64& rng, std::size_t count, Modality modality = Modality::Face) {
    std::uniform_real_distribution<double> pos(0.0, 300.0), desc(0.0, 2.0), sc(0.5, 5.0),
        ori(0.0, 6.28);
    KeypointSet set;
    set.modality = modality;
    set.subject_id = "subj";
    set.capture_id = "cap";
    for (std::size_t i = 0; i < count; ++i) {
        Keypoint kp;
        kp.x = pos(rng);
        kp.y = pos(rng);
        kp.scale = sc(rng);
        kp.orientation = ori(rng);
        for (auto& d : kp.descriptor) d = desc(rng);
        set.points.push_back(kp);
    }
    return set;
}

} // namespace

TEST_CASE("minimal well-formed file loads to one keypoint") {
    const fs::path path = temp_file("minimal.kpt");
    std::ofstream out(path);
    out << "KPT1 face alice ref 1\n";
    out << "10 20 1.5 0.25 1";
    for (int i = 0; i < 127; ++i) out << " 0";
    out << "\n";
    out.close();

    const KeypointSet set = load_keypoints(path);
    REQUIRE(set.points.size() == 1);
    CHECK(set.modality == Modality::Face);
    CHECK(set.subject_id == "alice");
    CHECK(set.capture_id == "ref");
    CHECK(set.points[0].x == 10.0);
    CHECK(set.points[0].descriptor[0] == 1.0);
    CHECK(set.points[0].descriptor[127] == 0.0);
}

TEST_CASE("short descriptor is rejected with the line number") {
    const fs::path path = temp_file("short.kpt");
    std::ofstream out(path);
    out << "KPT1 face alice ref 1\n";
    out << "10 20 1.5 0.25";
    for (int i = 0; i < 127; ++i) out << " 0"; // 131 fields: one descriptor entry short
    out << "\n";
    out.close();

    try {
        load_keypoints(path);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.line == 2);
    }
}

TEST_CASE("negative descriptor entry is rejected") {
    const fs::path path = temp_file("negative.kpt");
    std::ofstream out(path);
    out << "KPT1 palm bob probe 1\n";
    out << "1 2 1 0 -0.5";
    for (int i = 0; i < 127; ++i) out << " 0";
    out << "\n";
    out.close();
    CHECK_THROWS_AS(load_keypoints(path), FormatError);
}

TEST_CASE("header violations are format errors") {
    const fs::path path = temp_file("badheader.kpt");
    std::ofstream out(path);
    out << "KPT2 face a b 1\n";
    out.close();
    CHECK_THROWS_AS(load_keypoints(path), FormatError);
    CHECK_THROWS_AS(load_keypoints(temp_file("does_not_exist.kpt")), IoError);
}

TEST_CASE("record count must match the header") {
    const fs::path path = temp_file("count.kpt");
    std::ofstream out(path);
    out << "KPT1 face a b 2\n";
    out << "1 2 1 0";
    for (int i = 0; i < 128; ++i) out << " 0.5";
    out << "\n"; // only one record
    out.close();
    CHECK_THROWS_AS(load_keypoints(path), FormatError);
}

TEST_CASE("save refuses an empty set") {
    KeypointSet set;
    set.subject_id = "a";
    set.capture_id = "b";
    CHECK_THROWS_AS(save_keypoints(set, temp_file("empty.kpt")), FormatError);
}

TEST_CASE("one-point set writes exactly one record") {
    std::mt19937_64 rng(7);
    const KeypointSet set = random_set(rng, 1);
    const fs::path path = temp_file("single.kpt");
    save_keypoints(set, path);

    std::ifstream in(path);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 2); // header + one record
}

TEST_CASE("round-trip reproduces bit-identical sets") {
    std::mt19937_64 rng(12345);
    for (int trial = 0; trial < 100; ++trial) {
        std::uniform_int_distribution<std::size_t> count(1, 50);
        const KeypointSet set =
            random_set(rng, count(rng), trial % 2 ? Modality::Palm : Modality::Face);
        const fs::path path = temp_file("roundtrip.kpt");
        save_keypoints(set, path);
        const KeypointSet back = load_keypoints(path);
        REQUIRE(back == set);
    }
}

TEST_CASE("synthetic generation is deterministic") {
    SynthProfile profile;
    profile.face_count = 40;
    profile.palm_count = 30;
    const SyntheticSubject a = generate_synthetic_subject(99, profile);
    const SyntheticSubject b = generate_synthetic_subject(99, profile);
    CHECK(a.face_ref == b.face_ref);
    CHECK(a.palm_ref == b.palm_ref);
    CHECK(a.face_probe == b.face_probe);
    CHECK(a.palm_probe == b.palm_probe);
}

TEST_CASE("zero-noise probes equal their references") {
    SynthProfile profile;
    profile.face_count = 30;
    profile.palm_count = 20;
    profile.sigma_d = 0.0;
    profile.sigma_s = 0.0;
    profile.drop_rate = 0.0;
    profile.gain_jitter = 0.0;
    profile.mode_gain_jitter = 0.0;
    profile.session_gain_jitter = 0.0;
    const SyntheticSubject s = generate_synthetic_subject(5, profile);
    CHECK(s.face_probe.points == s.face_ref.points);
    CHECK(s.palm_probe.points == s.palm_ref.points);
}

TEST_CASE("different seeds produce different descriptors") {
    SynthProfile profile;
    profile.face_count = 20;
    profile.palm_count = 10;
    const SyntheticSubject a = generate_synthetic_subject(1, profile);
    const SyntheticSubject b = generate_synthetic_subject(2, profile);
    CHECK(a.face_ref.points[0].descriptor != b.face_ref.points[0].descriptor);
}

TEST_CASE("generated subjects satisfy keypoint invariants") {
    SynthProfile profile;
    profile.face_count = 60;
    profile.palm_count = 40;
    const SyntheticSubject s = generate_synthetic_subject(31, profile);
    for (const KeypointSet* set : {&s.face_ref, &s.palm_ref, &s.face_probe, &s.palm_probe}) {
        REQUIRE(!set->points.empty());
        for (const Keypoint& kp : set->points) CHECK(validate_keypoint(kp).empty());
    }
    CHECK(s.face_ref.points.size() >= s.palm_ref.points.size());
}

TEST_CASE("invalid profiles are rejected") {
    SynthProfile p;
    p.face_count = 0;
    CHECK_THROWS_AS(validate_profile(p), InvalidProfile);
    p = SynthProfile{};
    p.palm_count = p.face_count + 1;
    CHECK_THROWS_AS(validate_profile(p), InvalidProfile);
    p = SynthProfile{};
    p.sigma_d = -0.1;
    CHECK_THROWS_AS(validate_profile(p), InvalidProfile);
    p = SynthProfile{};
    p.drop_rate = 1.0;
    CHECK_THROWS_AS(validate_profile(p), InvalidProfile);
}
