#ifndef FPFUSE_SYNTHETIC_HPP
#define FPFUSE_SYNTHETIC_HPP

#include <algorithm>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fpfuse/errors.hpp"
#include "fpfuse/keypoint.hpp"

namespace fpfuse {

/// Controls for the synthetic subject generator.
///
/// Descriptor content is layered so that genuine/impostor separation is
/// controllable rather than degenerate:
///   - a population-wide archetype pool (per descriptor mode) from which
///     every subject samples its keypoint identities - distinct subjects
///     share archetypes the way a real population shares look-alike local
///     features, which raises impostor similarity off the floor;
///   - a subject-private multiplicative perturbation per identity (the
///     identity signal distinguishing subjects that share an archetype);
///   - a dense population-wide common component (baseline similarity).
///
/// Face and palm captures render the same identity pool, so cross-modal
/// correspondences exist by construction: palm point i pairs with face
/// point i and sits near its position (palm_geom_jitter), giving matched
/// cluster pairs near-congruent graphs. Probes re-render the references
/// under fresh capture conditions: a global descriptor gain, one gain per
/// mode (face and palm draw independently, which is what fusion averages
/// out), additive descriptor noise, spatial jitter and random point drops.
struct SynthProfile {
    std::size_t face_count = 128; // must be >= palm_count
    std::size_t palm_count = 32;
    double width = 256.0;  // spatial extent, pixels
    double height = 256.0;

    std::size_t modes = 4;           // descriptor modes (population-wide bases)
    std::size_t mode_support = 32;   // non-zero entries per mode basis
    double mode_scale = 1.0;         // mode basis magnitude
    double beacon_scale = 4.0;       // dominant signature entry per mode (0 disables)
    double common_scale = 1.2;       // dense population-wide component magnitude
    std::size_t pool_per_mode = 10;  // archetypes available per mode
    std::size_t unique_support = 12; // non-zero entries per archetype
    double unique_scale = 1.5;       // archetype distinctness within a mode
    double subject_distinct = 0.10;  // subject-private relative perturbation
    std::size_t detail_support = 8;  // non-zero entries per point detail component
    double detail_scale = 0.35;      // per-point detail magnitude (breaks near-ties)
    double modality_jitter = 0.02;   // relative face/palm divergence of an identity
    double palm_geom_jitter = 3.0;   // palm position offset from the face partner, pixels

    // Probe capture conditions: a session gain per mode shared by the
    // face/palm pair of that session, plus a smaller per-modality gain drawn
    // independently for each capture. Fusion can only average the latter.
    double session_gain_jitter = 0.12;
    double mode_gain_jitter = 0.12; // per-capture, per-mode, modality-specific
    double gain_jitter = 0.0;       // per-capture global descriptor gain range
    double sigma_d = 0.05;          // probe descriptor noise (additive, clamped at 0)
    double sigma_s = 0.5;           // probe spatial jitter, pixels
    double drop_rate = 0.001;       // probe point drop probability
};

inline void validate_profile(const SynthProfile& p) {
    if (p.face_count == 0 || p.palm_count == 0)
        throw InvalidProfile("point counts must be positive");
    if (p.face_count < p.palm_count)
        throw InvalidProfile("face count must be >= palm count");
    if (p.width <= 0.0 || p.height <= 0.0)
        throw InvalidProfile("spatial extent must be positive");
    if (p.modes == 0) throw InvalidProfile("modes must be positive");
    if (p.pool_per_mode == 0) throw InvalidProfile("archetype pool must be positive");
    if (p.palm_count > p.modes * p.pool_per_mode)
        throw InvalidProfile("palm count exceeds the archetype pool "
                             "(palm identities are sampled without replacement)");
    if (p.mode_support == 0 || p.mode_support > kDescriptorSize ||
        p.unique_support == 0 || p.unique_support > kDescriptorSize ||
        p.detail_support == 0 || p.detail_support > kDescriptorSize)
        throw InvalidProfile("descriptor supports must lie in [1, 128]");
    if (p.mode_scale < 0.0 || p.beacon_scale < 0.0 || p.common_scale < 0.0 ||
        p.unique_scale < 0.0 || p.subject_distinct < 0.0 || p.detail_scale < 0.0 ||
        p.modality_jitter < 0.0 || p.sigma_d < 0.0 || p.sigma_s < 0.0)
        throw InvalidProfile("scales and noise levels must be non-negative");
    if (p.mode_gain_jitter < 0.0 || p.session_gain_jitter < 0.0)
        throw InvalidProfile("gain jitters must be non-negative");
    if (p.palm_geom_jitter < 0.0) throw InvalidProfile("palm geometry jitter must be non-negative");
    if (p.drop_rate < 0.0 || p.drop_rate >= 1.0)
        throw InvalidProfile("drop rate must lie in [0, 1)");
    if (p.gain_jitter < 0.0 || p.gain_jitter >= 1.0)
        throw InvalidProfile("gain jitter must lie in [0, 1)");
}

struct SyntheticSubject {
    KeypointSet face_ref;
    KeypointSet palm_ref;
    KeypointSet face_probe;
    KeypointSet palm_probe;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(tag)));
}

/// Adds `count` uniform values onto distinct random descriptor indices.
inline void scatter(Descriptor& d, std::size_t count, double lo, double hi, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(kDescriptorSize);
    for (std::size_t i = 0; i < kDescriptorSize; ++i) idx[i] = i;
    std::uniform_real_distribution<double> val(lo, hi);
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, kDescriptorSize - 1);
        std::swap(idx[i], idx[pick(rng)]);
        d[idx[i]] += val(rng);
    }
}

/// Population-wide archetype pool, indexed [mode][slot]. Fixed for a given
/// profile, shared by all seeds.
inline std::vector<std::vector<Descriptor>> archetype_pool(const SynthProfile& p) {
    auto rng = stream(0x9c0117u, p.modes * 1009 + p.pool_per_mode * 131 + p.mode_support);
    Descriptor common{};
    std::uniform_real_distribution<double> cv(0.05, 0.35);
    for (auto& v : common) v = cv(rng) * p.common_scale;

    std::vector<std::size_t> beacon(kDescriptorSize);
    for (std::size_t t = 0; t < kDescriptorSize; ++t) beacon[t] = t;
    for (std::size_t m = 0; m < p.modes && m + 1 < kDescriptorSize; ++m) {
        std::uniform_int_distribution<std::size_t> pick(m, kDescriptorSize - 1);
        std::swap(beacon[m], beacon[pick(rng)]);
    }

    std::vector<std::vector<Descriptor>> pool(p.modes);
    for (std::size_t m = 0; m < p.modes; ++m) {
        Descriptor basis = common;
        Descriptor sparse{};
        scatter(sparse, p.mode_support, 0.3 * p.mode_scale, 1.0 * p.mode_scale, rng);
        for (std::size_t t = 0; t < kDescriptorSize; ++t) basis[t] += sparse[t];
        // each mode carries one dominant signature entry, the way a region's
        // gradient histogram peaks at its characteristic orientation
        basis[beacon[m % kDescriptorSize]] += p.beacon_scale;
        pool[m].resize(p.pool_per_mode);
        for (auto& archetype : pool[m]) {
            archetype = basis;
            scatter(archetype, p.unique_support, 0.8 * p.unique_scale, p.unique_scale, rng);
        }
    }
    return pool;
}

inline Keypoint render_point(const Descriptor& identity, double x, double y, const SynthProfile& p,
                             std::mt19937_64& rng) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    Keypoint kp;
    std::uniform_real_distribution<double> us(1.0, 4.0), uo(0.0, two_pi);
    kp.x = x;
    kp.y = y;
    kp.scale = us(rng);
    kp.orientation = std::min(uo(rng), std::nextafter(two_pi, 0.0));
    kp.descriptor = identity;
    if (p.modality_jitter > 0.0) {
        std::normal_distribution<double> eta(0.0, 1.0);
        for (double& v : kp.descriptor)
            if (v > 0.0) v = std::max(0.0, v * (1.0 + p.modality_jitter * eta(rng)));
    }
    return kp;
}

/// One probe capture: the reference points under fresh capture conditions.
/// `mode_of[i]` is the descriptor mode of reference point i; `session_gain`
/// holds the per-mode gains shared by both captures of the probe session.
inline KeypointSet perturb_capture(const KeypointSet& ref, const std::vector<std::size_t>& mode_of,
                                   const std::vector<double>& session_gain, const SynthProfile& p,
                                   std::mt19937_64& rng) {
    KeypointSet probe;
    probe.modality = ref.modality;
    probe.subject_id = ref.subject_id;
    probe.capture_id = "probe";

    double gain = 1.0;
    if (p.gain_jitter > 0.0) {
        std::uniform_real_distribution<double> g(-p.gain_jitter, p.gain_jitter);
        gain = 1.0 + g(rng);
    }
    std::vector<double> mode_gain(p.modes, 1.0);
    if (p.mode_gain_jitter > 0.0) {
        // truncated so the face/palm gain mismatch stays inside what the
        // cross-modal ratio test tolerates
        std::normal_distribution<double> eta(0.0, 1.0);
        for (auto& g : mode_gain)
            g = std::max(0.2, 1.0 + p.mode_gain_jitter * std::clamp(eta(rng), -1.5, 1.5));
    }
    for (std::size_t m = 0; m < p.modes; ++m) mode_gain[m] *= session_gain[m];

    std::vector<bool> keep(ref.points.size(), true);
    if (p.drop_rate > 0.0) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        bool any = false;
        for (std::size_t i = 0; i < ref.points.size(); ++i) {
            keep[i] = u(rng) >= p.drop_rate;
            any = any || keep[i];
        }
        if (!any) keep[0] = true; // a capture never loses every point
    }

    std::normal_distribution<double> eta(0.0, 1.0);
    for (std::size_t i = 0; i < ref.points.size(); ++i) {
        if (!keep[i]) continue;
        Keypoint kp = ref.points[i];
        if (p.sigma_s > 0.0) {
            kp.x = std::clamp(kp.x + p.sigma_s * eta(rng), 0.0, p.width);
            kp.y = std::clamp(kp.y + p.sigma_s * eta(rng), 0.0, p.height);
        }
        const double g = gain * mode_gain[mode_of[i]];
        if (p.sigma_d > 0.0 || g != 1.0) {
            for (double& v : kp.descriptor) {
                const double noisy = g * v + (p.sigma_d > 0.0 ? p.sigma_d * eta(rng) : 0.0);
                v = std::max(0.0, noisy);
            }
        }
        probe.points.push_back(kp);
    }
    return probe;
}

} // namespace detail

/// Builds one subject's reference and probe captures for both modalities.
/// Pure function of (seed, profile): the same arguments always produce
/// bit-identical output.
inline SyntheticSubject generate_synthetic_subject(std::uint64_t seed, const SynthProfile& profile,
                                                   std::string subject_id = {}) {
    validate_profile(profile);
    if (subject_id.empty()) subject_id = "s" + std::to_string(seed);

    const auto pool = detail::archetype_pool(profile);
    auto ref_rng = detail::stream(seed, 0xfacebeef);

    // Identity pool: palm points pair with the same-index face points. The
    // palm-shared identities draw distinct archetypes per mode; face-only
    // identities may reuse archetypes.
    const std::size_t modes = profile.modes;
    std::vector<std::vector<std::size_t>> draw_order(modes);
    for (std::size_t m = 0; m < modes; ++m) {
        draw_order[m].resize(profile.pool_per_mode);
        for (std::size_t j = 0; j < profile.pool_per_mode; ++j) draw_order[m][j] = j;
        for (std::size_t j = 0; j + 1 < profile.pool_per_mode; ++j) {
            std::uniform_int_distribution<std::size_t> pick(j, profile.pool_per_mode - 1);
            std::swap(draw_order[m][j], draw_order[m][pick(ref_rng)]);
        }
    }

    std::vector<Descriptor> identity(profile.face_count);
    std::vector<std::size_t> mode_of(profile.face_count);
    std::vector<std::size_t> drawn(modes, 0);
    std::normal_distribution<double> eta(0.0, 1.0);
    for (std::size_t i = 0; i < profile.face_count; ++i) {
        const std::size_t m = i % modes;
        mode_of[i] = m;
        std::size_t archetype;
        if (i < profile.palm_count) {
            archetype = draw_order[m][drawn[m]++ % profile.pool_per_mode];
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, profile.pool_per_mode - 1);
            archetype = pick(ref_rng);
        }
        identity[i] = pool[m][archetype];
        if (profile.subject_distinct > 0.0) {
            for (double& v : identity[i])
                if (v > 0.0) v = std::max(0.0, v * (1.0 + profile.subject_distinct * eta(ref_rng)));
        }
        // point-level detail keeps medoid and partition choices decisive
        // even when identities of one subject reuse an archetype
        detail::scatter(identity[i], profile.detail_support, 0.5 * profile.detail_scale,
                        profile.detail_scale, ref_rng);
    }

    std::vector<std::pair<double, double>> pos(profile.face_count);
    std::uniform_real_distribution<double> ux(0.0, profile.width), uy(0.0, profile.height);
    for (auto& xy : pos) xy = {ux(ref_rng), uy(ref_rng)};

    SyntheticSubject out;
    out.face_ref.modality = Modality::Face;
    out.face_ref.subject_id = subject_id;
    out.face_ref.capture_id = "ref";
    for (std::size_t i = 0; i < profile.face_count; ++i)
        out.face_ref.points.push_back(
            detail::render_point(identity[i], pos[i].first, pos[i].second, profile, ref_rng));

    out.palm_ref.modality = Modality::Palm;
    out.palm_ref.subject_id = subject_id;
    out.palm_ref.capture_id = "ref";
    for (std::size_t i = 0; i < profile.palm_count; ++i) {
        double px = pos[i].first, py = pos[i].second;
        if (profile.palm_geom_jitter > 0.0) {
            px = std::clamp(px + profile.palm_geom_jitter * eta(ref_rng), 0.0, profile.width);
            py = std::clamp(py + profile.palm_geom_jitter * eta(ref_rng), 0.0, profile.height);
        }
        out.palm_ref.points.push_back(detail::render_point(identity[i], px, py, profile, ref_rng));
    }

    auto session_rng = detail::stream(seed, 0x5e5510);
    std::vector<double> session_gain(profile.modes, 1.0);
    if (profile.session_gain_jitter > 0.0) {
        std::normal_distribution<double> etag(0.0, 1.0);
        for (auto& g : session_gain)
            g = std::max(0.2, 1.0 + profile.session_gain_jitter * std::clamp(etag(session_rng), -1.2, 1.2));
    }
    auto face_rng = detail::stream(seed, 0x1face);
    auto palm_rng = detail::stream(seed, 0x29a1e);
    out.face_probe = detail::perturb_capture(out.face_ref, mode_of, session_gain, profile, face_rng);
    out.palm_probe = detail::perturb_capture(out.palm_ref, mode_of, session_gain, profile, palm_rng);
    return out;
}

} // namespace fpfuse

#endif // FPFUSE_SYNTHETIC_HPP
