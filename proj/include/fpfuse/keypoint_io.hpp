#ifndef FPFUSE_KEYPOINT_IO_HPP
#define FPFUSE_KEYPOINT_IO_HPP

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "fpfuse/errors.hpp"
#include "fpfuse/keypoint.hpp"

namespace fpfuse {

namespace detail {

/// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view token, double& out) {
    auto res = std::from_chars(token.data(), token.data() + token.size(), out);
    return res.ec == std::errc{} && res.ptr == token.data() + token.size();
}

inline bool parse_size(std::string_view token, std::size_t& out) {
    auto res = std::from_chars(token.data(), token.data() + token.size(), out);
    return res.ec == std::errc{} && res.ptr == token.data() + token.size();
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) tokens.push_back(line.substr(start, i - start));
    }
    return tokens;
}

inline bool plain_token(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
    return true;
}

} // namespace detail

/// Reads a .kpt file. Every keypoint invariant is validated here; a set that
/// loads successfully is safe everywhere downstream.
inline KeypointSet load_keypoints(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open keypoint file: " + path.string());

    std::string line;
    if (!std::getline(in, line))
        throw FormatError(path.string() + ": missing KPT1 header", 1);

    auto header = detail::split_ws(line);
    if (header.size() != 5 || header[0] != "KPT1")
        throw FormatError(path.string() + ": header must be 'KPT1 <modality> <subject> <capture> <count>'", 1);

    KeypointSet set;
    if (header[1] == "face") set.modality = Modality::Face;
    else if (header[1] == "palm") set.modality = Modality::Palm;
    else throw FormatError(path.string() + ": unknown modality '" + std::string(header[1]) + "'", 1);
    set.subject_id = std::string(header[2]);
    set.capture_id = std::string(header[3]);

    std::size_t count = 0;
    if (!detail::parse_size(header[4], count) || count == 0)
        throw FormatError(path.string() + ": count must be a positive integer", 1);

    set.points.reserve(count);
    for (std::size_t rec = 0; rec < count; ++rec) {
        const std::size_t line_no = rec + 2;
        if (!std::getline(in, line))
            throw FormatError(path.string() + ": expected " + std::to_string(count) +
                                  " records, file ends after " + std::to_string(rec),
                              line_no);
        auto tokens = detail::split_ws(line);
        if (tokens.size() != 4 + kDescriptorSize)
            throw FormatError(path.string() + ": expected " + std::to_string(4 + kDescriptorSize) +
                                  " fields, got " + std::to_string(tokens.size()),
                              line_no);
        Keypoint kp;
        double fields[4];
        for (int f = 0; f < 4; ++f)
            if (!detail::parse_double(tokens[f], fields[f]))
                throw FormatError(path.string() + ": malformed number '" + std::string(tokens[f]) + "'", line_no);
        kp.x = fields[0];
        kp.y = fields[1];
        kp.scale = fields[2];
        kp.orientation = fields[3];
        for (std::size_t t = 0; t < kDescriptorSize; ++t)
            if (!detail::parse_double(tokens[4 + t], kp.descriptor[t]))
                throw FormatError(path.string() + ": malformed number '" + std::string(tokens[4 + t]) + "'", line_no);
        if (auto msg = validate_keypoint(kp); !msg.empty())
            throw FormatError(path.string() + ": " + msg, line_no);
        set.points.push_back(kp);
    }

    while (std::getline(in, line))
        if (!detail::split_ws(line).empty())
            throw FormatError(path.string() + ": trailing data after " + std::to_string(count) + " records",
                              count + 2);

    return set;
}

/// Writes a .kpt file with full round-trip precision; load_keypoints on the
/// result reproduces `set` bit for bit.
inline void save_keypoints(const KeypointSet& set, const std::filesystem::path& path) {
    if (set.points.empty())
        throw FormatError("refusing to write keypoint set with no points");
    if (!detail::plain_token(set.subject_id) || !detail::plain_token(set.capture_id))
        throw FormatError("subject and capture ids must be non-empty and contain no whitespace");
    for (std::size_t i = 0; i < set.points.size(); ++i)
        if (auto msg = validate_keypoint(set.points[i]); !msg.empty())
            throw FormatError("point " + std::to_string(i) + ": " + msg);

    std::ostringstream out;
    out << "KPT1 " << to_string(set.modality) << ' ' << set.subject_id << ' ' << set.capture_id << ' '
        << set.points.size() << '\n';
    for (const Keypoint& kp : set.points) {
        out << detail::format_double(kp.x) << ' ' << detail::format_double(kp.y) << ' '
            << detail::format_double(kp.scale) << ' ' << detail::format_double(kp.orientation);
        for (double d : kp.descriptor) out << ' ' << detail::format_double(d);
        out << '\n';
    }

    std::ofstream file(path);
    if (!file) throw IoError("cannot open for writing: " + path.string());
    file << out.str();
    if (!file.flush()) throw IoError("write failed: " + path.string());
}

} // namespace fpfuse

#endif // FPFUSE_KEYPOINT_IO_HPP
