#ifndef FPFUSE_CORRESPONDENCE_HPP
#define FPFUSE_CORRESPONDENCE_HPP

#include <algorithm>
#include <limits>
#include <vector>

#include "fpfuse/errors.hpp"
#include "fpfuse/keypoint.hpp"

namespace fpfuse {

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

/// One matched keypoint pair, indexing into the face and palm cluster point
/// lists the match was computed over. Padded sentinels carry kNoIndex.
struct PointCorrespondence {
    std::size_t face_index = kNoIndex;
    std::size_t palm_index = kNoIndex;
    double pair_distance = 0.0; // descriptor-space distance
    bool padded = false;
};

struct CorrespondenceSet {
    std::vector<PointCorrespondence> pairs;
    std::size_t face_cluster_id = 0;
    std::size_t palm_cluster_id = 0;

    std::size_t padded_count() const {
        std::size_t n = 0;
        for (const auto& p : pairs) n += p.padded ? 1 : 0;
        return n;
    }
};

/// Matches the points of a face cluster against a palm cluster. Every point
/// of the larger cluster claims its nearest point on the other side; where
/// several claims land on one point, only the minimum-distance claim
/// survives and the losers are discarded. Surviving matches whose
/// nearest/second-nearest distance ratio exceeds `ratio_threshold` are
/// rejected as false matches. The result is one-to-one.
inline CorrespondenceSet match_clusters(const std::vector<Keypoint>& face_cluster,
                                        const std::vector<Keypoint>& palm_cluster,
                                        double ratio_threshold,
                                        std::size_t face_cluster_id = 0,
                                        std::size_t palm_cluster_id = 0) {
    if (face_cluster.empty() || palm_cluster.empty())
        throw EmptyCluster("match_clusters requires two non-empty clusters");

    const bool swapped = palm_cluster.size() > face_cluster.size();
    const auto& from = swapped ? palm_cluster : face_cluster;
    const auto& to = swapped ? face_cluster : palm_cluster;

    struct Claim {
        std::size_t from_idx, to_idx;
        double d1, d2; // nearest and second-nearest distances over `to`
    };
    std::vector<Claim> claims;
    claims.reserve(from.size());
    for (std::size_t i = 0; i < from.size(); ++i) {
        std::size_t best = 0;
        double d1 = std::numeric_limits<double>::infinity();
        double d2 = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < to.size(); ++j) {
            const double d = descriptor_distance(from[i].descriptor, to[j].descriptor);
            if (d < d1) {
                d2 = d1;
                d1 = d;
                best = j;
            } else if (d < d2) {
                d2 = d;
            }
        }
        claims.push_back({i, best, d1, d2});
    }

    // Many-to-one elimination: per claimed point, the minimum pair distance
    // wins (ties to the lowest claimant index); losers are discarded, not
    // rematched.
    std::vector<std::size_t> winner(to.size(), kNoIndex);
    for (std::size_t c = 0; c < claims.size(); ++c) {
        const std::size_t t = claims[c].to_idx;
        if (winner[t] == kNoIndex || claims[c].d1 < claims[winner[t]].d1)
            winner[t] = c;
    }

    CorrespondenceSet out;
    out.face_cluster_id = face_cluster_id;
    out.palm_cluster_id = palm_cluster_id;
    for (std::size_t t = 0; t < to.size(); ++t) {
        if (winner[t] == kNoIndex) continue;
        const Claim& c = claims[winner[t]];
        if (to.size() > 1 && c.d1 > ratio_threshold * c.d2) continue; // false match
        PointCorrespondence pc;
        pc.face_index = swapped ? c.to_idx : c.from_idx;
        pc.palm_index = swapped ? c.from_idx : c.to_idx;
        pc.pair_distance = c.d1;
        out.pairs.push_back(pc);
    }
    std::sort(out.pairs.begin(), out.pairs.end(),
              [](const PointCorrespondence& a, const PointCorrespondence& b) {
                  return a.face_index < b.face_index;
              });
    return out;
}

/// Forces a correspondence set to exactly p pairs: the p smallest-distance
/// pairs are kept (ties by face index, output in ascending face-index
/// order); a shortfall is made up with zero-descriptor sentinel pairs at
/// spatial position (0, 0), flagged padded and placed last.
inline CorrespondenceSet equalize(const CorrespondenceSet& cs, std::size_t p) {
    if (p < 3) throw Error("equalize requires p >= 3");

    CorrespondenceSet out;
    out.face_cluster_id = cs.face_cluster_id;
    out.palm_cluster_id = cs.palm_cluster_id;

    std::vector<PointCorrespondence> real;
    for (const auto& pc : cs.pairs)
        if (!pc.padded) real.push_back(pc);

    if (real.size() > p) {
        std::sort(real.begin(), real.end(), [](const PointCorrespondence& a, const PointCorrespondence& b) {
            if (a.pair_distance != b.pair_distance) return a.pair_distance < b.pair_distance;
            return a.face_index < b.face_index;
        });
        real.resize(p);
    }
    std::sort(real.begin(), real.end(), [](const PointCorrespondence& a, const PointCorrespondence& b) {
        return a.face_index < b.face_index;
    });

    out.pairs = std::move(real);
    while (out.pairs.size() < p) {
        PointCorrespondence pad;
        pad.padded = true;
        out.pairs.push_back(pad);
    }
    return out;
}

/// The zero-descriptor stand-in vertex used for padded pairs. Its descriptor
/// contributes nothing to fusion sums.
inline Keypoint sentinel_keypoint() {
    Keypoint kp;
    kp.x = 0.0;
    kp.y = 0.0;
    kp.scale = 1.0;
    kp.orientation = 0.0;
    kp.descriptor.fill(0.0);
    return kp;
}

/// Expands an equalized correspondence set into two aligned vertex lists
/// (slot j of each list holds the j-th pair), substituting sentinel vertices
/// for padded slots.
inline std::pair<std::vector<Keypoint>, std::vector<Keypoint>>
materialize_pairs(const std::vector<Keypoint>& face_cluster, const std::vector<Keypoint>& palm_cluster,
                  const CorrespondenceSet& eq) {
    std::vector<Keypoint> face_v, palm_v;
    face_v.reserve(eq.pairs.size());
    palm_v.reserve(eq.pairs.size());
    for (const auto& pc : eq.pairs) {
        if (pc.padded) {
            face_v.push_back(sentinel_keypoint());
            palm_v.push_back(sentinel_keypoint());
        } else {
            face_v.push_back(face_cluster.at(pc.face_index));
            palm_v.push_back(palm_cluster.at(pc.palm_index));
        }
    }
    return {std::move(face_v), std::move(palm_v)};
}

} // namespace fpfuse

#endif // FPFUSE_CORRESPONDENCE_HPP
