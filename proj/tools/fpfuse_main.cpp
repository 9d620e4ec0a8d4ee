// fpfuse command-line tool: synthesize keypoint datasets, enroll fused
// templates, verify probes against a template store and run ROC evaluations.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fpfuse/fpfuse.hpp"

namespace fs = std::filesystem;
using namespace fpfuse;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1; // pipeline/domain failures (a REJECT is not one)
constexpr int kExitUsage = 2;  // bad flags or malformed files

struct SubjectFiles {
    std::string id;
    fs::path face_ref, palm_ref, face_probe, palm_probe;
};

std::string fmt(double v) { return detail::format_double(v); }

SynthProfile load_profile(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open profile file: " + path.string());
    SynthProfile p;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::string joined;
        for (auto t : detail::split_ws(line)) joined += std::string(t);
        if (joined.empty()) continue;
        const auto eq = joined.find('=');
        if (eq == std::string::npos || eq == 0)
            throw FormatError(path.string() + ": expected key=value", line_no);
        const std::string key = joined.substr(0, eq), value = joined.substr(eq + 1);
        auto as_double = [&](double& out) {
            if (!detail::parse_double(value, out))
                throw FormatError(path.string() + ": malformed number for " + key, line_no);
        };
        auto as_size = [&](std::size_t& out) {
            if (!detail::parse_size(value, out))
                throw FormatError(path.string() + ": malformed integer for " + key, line_no);
        };
        if (key == "face_count") as_size(p.face_count);
        else if (key == "palm_count") as_size(p.palm_count);
        else if (key == "width") as_double(p.width);
        else if (key == "height") as_double(p.height);
        else if (key == "modes") as_size(p.modes);
        else if (key == "mode_support") as_size(p.mode_support);
        else if (key == "unique_support") as_size(p.unique_support);
        else if (key == "unique_scale") as_double(p.unique_scale);
        else if (key == "modality_jitter") as_double(p.modality_jitter);
        else if (key == "sigma_d") as_double(p.sigma_d);
        else if (key == "sigma_s") as_double(p.sigma_s);
        else if (key == "drop_rate") as_double(p.drop_rate);
        else if (key == "gain_jitter") as_double(p.gain_jitter);
        else throw FormatError(path.string() + ": unknown profile key '" + key + "'", line_no);
    }
    return p;
}

std::string subject_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "s%04zu", index);
    return buf;
}

int cmd_synth(std::size_t subjects, std::uint64_t seed, const std::string& profile_path,
              const fs::path& out_dir) {
    SynthProfile profile;
    if (!profile_path.empty()) profile = load_profile(profile_path);
    validate_profile(profile);

    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < subjects; ++i) {
        const std::string sid = subject_name(i);
        const std::uint64_t subject_seed = detail::splitmix64(seed ^ detail::splitmix64(i + 1));
        SyntheticSubject s = generate_synthetic_subject(subject_seed, profile, sid);
        const fs::path dir = out_dir / sid;
        fs::create_directories(dir);
        save_keypoints(s.face_ref, dir / "face_ref.kpt");
        save_keypoints(s.palm_ref, dir / "palm_ref.kpt");
        save_keypoints(s.face_probe, dir / "face_probe.kpt");
        save_keypoints(s.palm_probe, dir / "palm_probe.kpt");
    }
    std::cout << "wrote " << subjects << " subjects (seed=" << seed << ") to " << out_dir.string()
              << "\n";
    return kExitOk;
}

int cmd_enroll(const fs::path& face_path, const fs::path& palm_path, const PipelineConfig& cfg,
               const fs::path& store_dir, const fs::path& dump_dir) {
    const KeypointSet face = load_keypoints(face_path);
    const KeypointSet palm = load_keypoints(palm_path);
    if (face.subject_id != palm.subject_id)
        throw Error("face and palm files carry different subjects: '" + face.subject_id + "' vs '" +
                    palm.subject_id + "'");

    PipelineStats stats;
    const FusedTemplate t = build_template(face, palm, cfg, &stats);

    fs::create_directories(store_dir);
    const fs::path out = store_dir / (t.subject_id + ".ftv");
    const bool replaced = fs::exists(out);
    save_template(t, out);
    std::cout << "enrolled " << t.subject_id << ": length=" << t.size()
              << " padded_pairs=" << stats.padded_pairs << " -> " << out.string() << "\n";
    if (replaced) std::cout << "replaced previous template for " << t.subject_id << "\n";

    if (!dump_dir.empty()) {
        fs::create_directories(dump_dir);
        write_clustering_dump(stats.face_clustering, dump_dir / "face.clu");
        write_clustering_dump(stats.palm_clustering, dump_dir / "palm.clu");
        for (const ClusterPairing& pairing : stats.pairings)
            write_mapping_dump(pairing.mapping,
                               dump_dir / ("pairing_" + std::to_string(pairing.cluster_rank) + ".map"));
    }
    return kExitOk;
}

int cmd_verify(const fs::path& face_path, const fs::path& palm_path, const std::string& claim,
               const PipelineConfig& cfg, double threshold, const fs::path& store_dir) {
    const std::vector<FusedTemplate> store = load_template_store(store_dir);
    std::vector<FusedTemplate> claimed;
    for (const auto& t : store)
        if (t.subject_id == claim) claimed.push_back(t);
    if (claimed.empty()) throw Error("claimed subject '" + claim + "' is not enrolled");

    const KeypointSet face = load_keypoints(face_path);
    const KeypointSet palm = load_keypoints(palm_path);
    const FusedTemplate probe = build_template(face, palm, cfg);

    const std::size_t k = std::min<std::size_t>(cfg.knn_k, claimed.size());
    const MatchDecision d = cfg.match_metric == MatchMetric::KnnEuclidean
                                ? knn_verify(probe, claimed, k, threshold)
                                : correlation_verify(probe, claimed, k, threshold);

    std::cout << (d.accepted ? "ACCEPT" : "REJECT") << " score=" << fmt(d.score)
              << " metric=" << to_string(d.metric) << " threshold=" << fmt(d.threshold_used) << "\n";
    return kExitOk; // a rejection is still a successful decision
}

std::vector<SubjectFiles> scan_dataset(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error("dataset directory not found: " + dir.string());
    std::vector<SubjectFiles> subjects;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_directory()) continue;
        SubjectFiles s;
        s.id = entry.path().filename().string();
        s.face_ref = entry.path() / "face_ref.kpt";
        s.palm_ref = entry.path() / "palm_ref.kpt";
        s.face_probe = entry.path() / "face_probe.kpt";
        s.palm_probe = entry.path() / "palm_probe.kpt";
        for (const fs::path* p : {&s.face_ref, &s.palm_ref, &s.face_probe, &s.palm_probe})
            if (!fs::is_regular_file(*p)) throw Error("dataset layout: missing " + p->string());
        subjects.push_back(std::move(s));
    }
    std::sort(subjects.begin(), subjects.end(),
              [](const SubjectFiles& a, const SubjectFiles& b) { return a.id < b.id; });
    if (subjects.empty()) throw Error("dataset directory holds no subjects: " + dir.string());
    if (subjects.size() < 2)
        throw Error("evaluation needs at least 2 subjects (no impostor trials otherwise)");
    return subjects;
}

struct EvaluationTemplates {
    TrialSet face, palm, fused;
};

EvaluationTemplates build_evaluation_templates(const std::vector<SubjectFiles>& subjects,
                                               const PipelineConfig& cfg) {
    EvaluationTemplates out;
    std::vector<FusedTemplate> face_probes, palm_probes, fused_probes;
    for (const SubjectFiles& s : subjects) {
        const KeypointSet face_ref = load_keypoints(s.face_ref);
        const KeypointSet palm_ref = load_keypoints(s.palm_ref);
        const KeypointSet face_probe = load_keypoints(s.face_probe);
        const KeypointSet palm_probe = load_keypoints(s.palm_probe);

        out.fused.gallery.push_back(build_template(face_ref, palm_ref, cfg));
        out.face.gallery.push_back(build_unimodal_template(face_ref, cfg));
        out.palm.gallery.push_back(build_unimodal_template(palm_ref, cfg));
        fused_probes.push_back(build_template(face_probe, palm_probe, cfg));
        face_probes.push_back(build_unimodal_template(face_probe, cfg));
        palm_probes.push_back(build_unimodal_template(palm_probe, cfg));
    }
    auto fill = [&](TrialSet& ts, const std::vector<FusedTemplate>& probes) {
        for (std::size_t i = 0; i < subjects.size(); ++i) {
            ts.genuine.push_back({probes[i], subjects[i].id});
            for (std::size_t j = 0; j < subjects.size(); ++j)
                if (j != i) ts.impostor.push_back({probes[i], subjects[j].id});
        }
    };
    fill(out.face, face_probes);
    fill(out.palm, palm_probes);
    fill(out.fused, fused_probes);
    return out;
}

int cmd_evaluate(const fs::path& dataset_dir, const std::string& metric_choice, const fs::path& out_dir,
                 const PipelineConfig& cfg, std::size_t grid_size) {
    const auto subjects = scan_dataset(dataset_dir);
    const EvaluationTemplates t = build_evaluation_templates(subjects, cfg);
    fs::create_directories(out_dir);

    std::vector<MatchMetric> metrics;
    if (metric_choice == "both") metrics = {MatchMetric::KnnEuclidean, MatchMetric::NormalizedCorrelation};
    else if (metric_choice == "knn") metrics = {MatchMetric::KnnEuclidean};
    else if (metric_choice == "correlation") metrics = {MatchMetric::NormalizedCorrelation};
    else throw Error("metric must be both, knn or correlation");

    std::ostringstream summary;
    summary << "method eer auc\n";
    std::map<std::string, RocReport> reports;
    for (MatchMetric m : metrics) {
        const std::string suffix = m == MatchMetric::KnnEuclidean ? "knn" : "corr";
        struct Case {
            const char* name;
            const TrialSet* trials;
        };
        for (const Case c : {Case{"face", &t.face}, Case{"palm", &t.palm}, Case{"fused", &t.fused}}) {
            RocReport r = run_trials(*c.trials, m, cfg.knn_k,
                                     trial_threshold_grid(*c.trials, m, grid_size));
            r.config_snapshot = config_summary(cfg);
            const std::string name = std::string(c.name) + "_" + suffix;
            write_roc_report(r, out_dir / (name + ".roc"));
            summary << name << ' ' << fmt(r.eer) << ' ' << fmt(r.auc) << '\n';
            reports[name] = std::move(r);
        }
    }

    if (metric_choice == "both") {
        const auto& fc = reports.at("fused_corr");
        const auto& fk = reports.at("fused_knn");
        bool auc_ordering = fc.auc >= fk.auc;
        for (const char* name : {"face_knn", "face_corr", "palm_knn", "palm_corr"})
            auc_ordering = auc_ordering && fk.auc >= reports.at(name).auc;
        double min_eer = fc.eer;
        for (const auto& [name, r] : reports) min_eer = std::min(min_eer, r.eer);
        summary << "fused_correlation_auc_best " << (auc_ordering ? 1 : 0) << '\n';
        summary << "fused_correlation_eer_min " << (fc.eer <= min_eer ? 1 : 0) << '\n';
    }

    std::ofstream sum_file(out_dir / "comparison.txt");
    sum_file << summary.str();
    std::cout << summary.str();
    std::cout << "reports written to " << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_inspect(const fs::path& path) {
    if (path.extension() == ".kpt") {
        const KeypointSet set = load_keypoints(path);
        double mean_norm = 0.0;
        for (const Keypoint& kp : set.points) {
            double n = 0.0;
            for (double d : kp.descriptor) n += d * d;
            mean_norm += std::sqrt(n);
        }
        mean_norm /= static_cast<double>(set.size());
        std::cout << "keypoint set: modality=" << to_string(set.modality)
                  << " subject=" << set.subject_id << " capture=" << set.capture_id
                  << " points=" << set.size() << " mean_descriptor_norm=" << fmt(mean_norm) << "\n";
        return kExitOk;
    }
    if (path.extension() == ".ftv") {
        const FusedTemplate t = load_template(path);
        double norm = 0.0;
        std::size_t zero_blocks = 0;
        for (std::size_t b = 0; b < t.k * t.p; ++b) {
            double bn = 0.0;
            for (std::size_t i = 0; i < kDescriptorSize; ++i) {
                const double v = t.values[b * kDescriptorSize + i];
                bn += v * v;
            }
            if (bn == 0.0) ++zero_blocks;
            norm += bn;
        }
        std::cout << "template: subject=" << t.subject_id << " k=" << t.k << " p=" << t.p
                  << " length=" << t.size() << " norm=" << fmt(std::sqrt(norm))
                  << " zero_blocks=" << zero_blocks << "\n";
        return kExitOk;
    }
    throw Error("inspect understands .kpt and .ftv files, got " + path.string());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"feature-level fusion of face and palmprint keypoints"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic keypoint dataset");
    std::size_t subjects = 0;
    std::uint64_t seed = 42;
    std::string profile_path;
    std::string synth_out;
    synth->add_option("--subjects", subjects, "number of subjects")->required();
    synth->add_option("--seed", seed, "master seed (default 42, printed)");
    synth->add_option("--profile", profile_path, "profile file (key=value)");
    synth->add_option("--out-dir", synth_out, "output dataset directory")->required();

    // shared pipeline config handling
    std::string config_path;
    auto load_cfg = [&](CLI::App* sub) -> PipelineConfig {
        PipelineConfig cfg;
        if (sub->count("--config")) cfg = load_pipeline_config(config_path);
        return cfg;
    };

    // enroll
    auto* enroll = app.add_subcommand("enroll", "build and store a fused template");
    std::string face_file, palm_file, store_dir = "store", dump_dir;
    enroll->add_option("face", face_file, "face .kpt file")->required();
    enroll->add_option("palm", palm_file, "palm .kpt file")->required();
    enroll->add_option("--config", config_path, "pipeline config file");
    enroll->add_option("--store-dir", store_dir, "template store directory");
    enroll->add_option("--dump-dir", dump_dir, "write .clu/.map dumps here");

    // verify
    auto* verify = app.add_subcommand("verify", "verify a probe against a claimed identity");
    std::string claim, metric_flag;
    double threshold = 0.0;
    std::size_t knn_k_flag = 0;
    verify->add_option("face", face_file, "face .kpt file")->required();
    verify->add_option("palm", palm_file, "palm .kpt file")->required();
    verify->add_option("--claim", claim, "claimed subject id")->required();
    verify->add_option("--metric", metric_flag, "knn or correlation");
    verify->add_option("--threshold", threshold, "decision threshold");
    verify->add_option("--k", knn_k_flag, "K for the K-NN rule");
    verify->add_option("--config", config_path, "pipeline config file");
    verify->add_option("--store-dir", store_dir, "template store directory");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "run the six-way FAR/FRR/ROC comparison");
    std::string dataset_dir, eval_metric = "both", eval_out = ".";
    std::size_t grid_size = 200;
    evaluate->add_option("--dataset-dir", dataset_dir, "dataset directory")->required();
    evaluate->add_option("--metric", eval_metric, "both, knn or correlation");
    evaluate->add_option("--out", eval_out, "output directory for .roc reports");
    evaluate->add_option("--grid", grid_size, "threshold grid size (default 200)");
    evaluate->add_option("--config", config_path, "pipeline config file");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "summarize a .kpt or .ftv file");
    std::string inspect_file;
    inspect->add_option("file", inspect_file, "file to inspect")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*synth) {
            if (subjects == 0) {
                std::cerr << "error: --subjects must be positive\n";
                return kExitUsage;
            }
            return cmd_synth(subjects, seed, profile_path, synth_out);
        }
        if (*enroll) return cmd_enroll(face_file, palm_file, load_cfg(enroll), store_dir, dump_dir);
        if (*verify) {
            PipelineConfig cfg = load_cfg(verify);
            if (verify->count("--metric")) {
                if (metric_flag == "knn") cfg.match_metric = MatchMetric::KnnEuclidean;
                else if (metric_flag == "correlation") cfg.match_metric = MatchMetric::NormalizedCorrelation;
                else {
                    std::cerr << "error: --metric must be knn or correlation\n";
                    return kExitUsage;
                }
            }
            if (verify->count("--k")) cfg.knn_k = knn_k_flag;
            if (verify->count("--threshold")) cfg.verify_threshold = threshold;
            if (!cfg.verify_threshold) {
                std::cerr << "error: no --threshold given and none in the config file\n";
                return kExitUsage;
            }
            return cmd_verify(face_file, palm_file, claim, cfg, *cfg.verify_threshold, store_dir);
        }
        if (*evaluate)
            return cmd_evaluate(dataset_dir, eval_metric, eval_out, load_cfg(evaluate), grid_size);
        if (*inspect) return cmd_inspect(inspect_file);
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InvalidProfile& e) {
        std::cerr << "profile error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    }
    return kExitUsage;
}
