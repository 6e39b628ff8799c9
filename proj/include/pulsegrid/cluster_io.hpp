#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pulsegrid/cluster.hpp"

namespace pulsegrid {

/// Writes one tab-separated line per cluster, sorted by representative
/// (peak_sample, then dm_trial):
///   snr(2dp) peak_sample time_s(9dp) width_index dm_trial dm(3dp) members
///   begin_sample end_sample
/// Returns the number of lines written. Bit-exact and deterministic.
std::size_t write_candidates(std::span<const ClusterResult> clusters, std::ostream& out);

/// Fields of one parsed .cand line (test support / downstream tooling).
struct CandLine {
    double snr = 0.0;
    std::uint64_t peak_sample = 0;
    double time_s = 0.0;
    std::uint32_t width_index = 0;
    std::uint32_t dm_trial = 0;
    double dm = 0.0;
    std::uint64_t members = 0;
    std::uint64_t begin_sample = 0;
    std::uint64_t end_sample = 0;
};

std::vector<CandLine> parse_candidates(std::istream& in);

}  // namespace pulsegrid
