#ifndef FPFUSE_KEYPOINT_HPP
#define FPFUSE_KEYPOINT_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "fpfuse/errors.hpp"

namespace fpfuse {

inline constexpr std::size_t kDescriptorSize = 128;

using Descriptor = std::array<double, kDescriptorSize>;

enum class Modality { Face, Palm };

inline const char* to_string(Modality m) {
    return m == Modality::Face ? "face" : "palm";
}

/// One invariant feature point: spatial location, scale, orientation and a
/// 128-element non-negative descriptor.
struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double scale = 1.0;
    double orientation = 0.0; // radians, [0, 2*pi)
    Descriptor descriptor{};

    bool operator==(const Keypoint&) const = default;
};

/// Returns an empty message if `kp` satisfies all invariants, otherwise a
/// description of the first violation.
inline std::string validate_keypoint(const Keypoint& kp) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (!std::isfinite(kp.x) || kp.x < 0.0) return "x must be a finite non-negative real";
    if (!std::isfinite(kp.y) || kp.y < 0.0) return "y must be a finite non-negative real";
    if (!std::isfinite(kp.scale) || kp.scale <= 0.0) return "scale must be positive";
    if (!std::isfinite(kp.orientation) || kp.orientation < 0.0 || kp.orientation >= two_pi)
        return "orientation must lie in [0, 2*pi)";
    for (std::size_t t = 0; t < kDescriptorSize; ++t) {
        if (!std::isfinite(kp.descriptor[t]) || kp.descriptor[t] < 0.0)
            return "descriptor entry " + std::to_string(t) + " must be a finite non-negative real";
    }
    return {};
}

/// All keypoints of one image (one modality, one capture). Point order is
/// stable: whatever order points were read or generated in is preserved.
struct KeypointSet {
    Modality modality = Modality::Face;
    std::string subject_id;
    std::string capture_id;
    std::vector<Keypoint> points;

    std::size_t size() const { return points.size(); }
    bool operator==(const KeypointSet&) const = default;
};

/// Euclidean distance between two descriptors.
inline double descriptor_distance(const Descriptor& a, const Descriptor& b) {
    double sum = 0.0;
    for (std::size_t t = 0; t < kDescriptorSize; ++t) {
        const double d = a[t] - b[t];
        sum += d * d;
    }
    return std::sqrt(sum);
}

/// Euclidean distance between two keypoints' image positions.
inline double spatial_distance(const Keypoint& a, const Keypoint& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

} // namespace fpfuse

#endif // FPFUSE_KEYPOINT_HPP
