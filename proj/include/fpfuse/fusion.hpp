#ifndef FPFUSE_FUSION_HPP
#define FPFUSE_FUSION_HPP

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fpfuse/errors.hpp"
#include "fpfuse/graph_mapping.hpp"
#include "fpfuse/keypoint.hpp"
#include "fpfuse/keypoint_io.hpp"

namespace fpfuse {

/// One paired cluster's fused descriptors: p blocks of 128 values, block j
/// being the elementwise sum of face descriptor j and its mapped palm
/// descriptor.
struct FusedCluster {
    std::vector<double> values; // p * 128
    std::size_t cluster_rank = 0;
};

/// The enrollment/matching unit: all k fused clusters concatenated in
/// canonical rank order.
struct FusedTemplate {
    std::vector<double> values; // k * p * 128
    std::string subject_id;
    std::size_t k = 0;
    std::size_t p = 0;

    std::size_t size() const { return values.size(); }
};

/// Sum-rule fusion of one cluster pairing. Padded sentinel slots carry zero
/// descriptors on both sides and so contribute zero blocks.
inline FusedCluster fuse_cluster(const ClusterPairing& pairing) {
    const std::size_t p = pairing.face_graph.order();
    const auto& map = pairing.mapping.map;
    if (map.size() != p || pairing.palm_graph.order() != p)
        throw SizeMismatch("pairing must carry a bijection over equal-order graphs");

    FusedCluster out;
    out.cluster_rank = pairing.cluster_rank;
    out.values.resize(p * kDescriptorSize);
    for (std::size_t j = 0; j < p; ++j) {
        const Descriptor& f = pairing.face_graph.vertices[j].descriptor;
        const Descriptor& w = pairing.palm_graph.vertices[map[j]].descriptor;
        for (std::size_t t = 0; t < kDescriptorSize; ++t)
            out.values[j * kDescriptorSize + t] = f[t] + w[t];
    }
    return out;
}

/// Joins fused clusters into one template, ordered by ascending
/// cluster_rank.
inline FusedTemplate concatenate(const std::vector<FusedCluster>& fused, std::string subject_id = {}) {
    if (fused.empty()) throw RaggedClusters("nothing to concatenate");
    const std::size_t len = fused.front().values.size();
    for (const auto& fc : fused)
        if (fc.values.size() != len)
            throw RaggedClusters("fused clusters have unequal lengths: " + std::to_string(len) +
                                 " vs " + std::to_string(fc.values.size()));

    std::vector<const FusedCluster*> order;
    order.reserve(fused.size());
    for (const auto& fc : fused) order.push_back(&fc);
    std::stable_sort(order.begin(), order.end(),
                     [](const FusedCluster* a, const FusedCluster* b) { return a->cluster_rank < b->cluster_rank; });

    FusedTemplate t;
    t.subject_id = std::move(subject_id);
    t.k = fused.size();
    t.p = len / kDescriptorSize;
    t.values.reserve(t.k * len);
    for (const FusedCluster* fc : order)
        t.values.insert(t.values.end(), fc->values.begin(), fc->values.end());
    return t;
}

/// Writes a .ftv template file: `FTV1 <subject_id> <k> <p>` then k*p lines
/// of 128 values each, full round-trip precision.
inline void save_template(const FusedTemplate& t, const std::filesystem::path& path) {
    if (t.subject_id.empty() || !detail::plain_token(t.subject_id))
        throw FormatError("template subject id must be non-empty and contain no whitespace");
    if (t.k == 0 || t.p == 0 || t.values.size() != t.k * t.p * kDescriptorSize)
        throw FormatError("template dimensions do not match its value count");

    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "FTV1 " << t.subject_id << ' ' << t.k << ' ' << t.p << '\n';
    for (std::size_t row = 0; row < t.k * t.p; ++row) {
        for (std::size_t tth = 0; tth < kDescriptorSize; ++tth) {
            if (tth) out << ' ';
            out << detail::format_double(t.values[row * kDescriptorSize + tth]);
        }
        out << '\n';
    }
    if (!out.flush()) throw IoError("write failed: " + path.string());
}

inline FusedTemplate load_template(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open template file: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": missing FTV1 header", 1);
    auto header = detail::split_ws(line);
    if (header.size() != 4 || header[0] != "FTV1")
        throw FormatError(path.string() + ": header must be 'FTV1 <subject_id> <k> <p>'", 1);

    FusedTemplate t;
    t.subject_id = std::string(header[1]);
    if (!detail::parse_size(header[2], t.k) || !detail::parse_size(header[3], t.p) || t.k == 0 || t.p == 0)
        throw FormatError(path.string() + ": k and p must be positive integers", 1);

    t.values.reserve(t.k * t.p * kDescriptorSize);
    for (std::size_t row = 0; row < t.k * t.p; ++row) {
        const std::size_t line_no = row + 2;
        if (!std::getline(in, line))
            throw FormatError(path.string() + ": template data ends early", line_no);
        auto tokens = detail::split_ws(line);
        if (tokens.size() != kDescriptorSize)
            throw FormatError(path.string() + ": expected 128 values per line, got " +
                                  std::to_string(tokens.size()),
                              line_no);
        for (const auto& tok : tokens) {
            double v;
            if (!detail::parse_double(tok, v) || !std::isfinite(v))
                throw FormatError(path.string() + ": malformed value '" + std::string(tok) + "'", line_no);
            t.values.push_back(v);
        }
    }
    return t;
}

/// Loads every .ftv file of a template-store directory, ordered by
/// subject id.
inline std::vector<FusedTemplate> load_template_store(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw IoError("template store is not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".ftv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<FusedTemplate> store;
    store.reserve(files.size());
    for (const auto& f : files) store.push_back(load_template(f));
    std::sort(store.begin(), store.end(),
              [](const FusedTemplate& a, const FusedTemplate& b) { return a.subject_id < b.subject_id; });
    return store;
}

} // namespace fpfuse

#endif // FPFUSE_FUSION_HPP
