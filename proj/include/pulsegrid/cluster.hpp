#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pulsegrid/detect.hpp"

namespace pulsegrid {

/// Linking distances for candidate merging. Time separation is scaled by the
/// wider member's boxcar width: wide pulses legitimately spread further.
struct LinkRadii {
    std::uint64_t sep_time = 3;       // samples, times max(width of the pair)
    std::uint32_t sep_dm_trials = 9;  // trial ordinals
    std::uint32_t sep_width = 3;      // width-index difference
};

/// One merged group of candidates. The representative is the max-S/N member
/// (ties: smaller peak_sample, then smaller dm_trial), augmented with the
/// cluster's extent.
struct ClusterResult {
    Candidate representative;
    std::uint64_t members = 0;
    std::uint64_t begin_sample = 0;  // min begin over members
    std::uint64_t end_sample = 0;    // max end over members
    double dm_lo = 0.0;              // dm span over members
    double dm_hi = 0.0;
    std::vector<std::size_t> member_ids;  // indices into the input list, sorted
};

/// True when two candidates satisfy the pairwise linking predicate.
bool linked(const Candidate& a, const Candidate& b, const LinkRadii& radii);

/// Transitive closure of `linked` via an O(N^2) pair scan. The reference
/// algorithm the grid version is checked against.
std::vector<ClusterResult> link_reference(std::span<const Candidate> cands,
                                          const LinkRadii& radii);

/// Same clusters via 3-D spatial binning (cell edge = the maximal linking
/// distance per axis) with neighbor-cell comparisons and union-find; output
/// identical to link_reference up to cluster ordering.
std::vector<ClusterResult> link_grid(std::span<const Candidate> cands, const LinkRadii& radii);

}  // namespace pulsegrid
