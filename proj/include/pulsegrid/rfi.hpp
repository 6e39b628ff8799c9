#pragma once

#include <cstdint>
#include <vector>

#include "pulsegrid/filterbank.hpp"

namespace pulsegrid {

enum class MaskPolicy { zero, local_mean };

/// Cells to excise from a chunk: whole channels, whole time samples, and the
/// replacement policy. Sample indices are chunk-local.
struct RfiMask {
    std::vector<std::uint32_t> bad_channels;
    std::vector<std::uint64_t> bad_samples;
    MaskPolicy replacement = MaskPolicy::local_mean;
};

/// Channels whose mean or variance sits more than k_mad robust (MAD-scaled)
/// deviations from the cross-channel median. Needs nchans >= 4.
std::vector<std::uint32_t> flag_narrowband(const Chunk& chunk, double k_mad);

/// Time samples whose DM=0 value (per-sample sum across channels) has robust
/// |z| > k_sigma. Undispersed broadband interference concentrates here while
/// dispersed signals are diluted across many samples.
std::vector<std::uint64_t> flag_broadband(const Chunk& chunk, double k_sigma);

/// Replaces masked cells in place; unmasked cells are untouched. local_mean
/// uses the per-channel running mean of unmasked cells in a 64-sample window
/// (0 when the whole window is masked), computed from the original values so
/// the operation is idempotent.
void apply_mask(Chunk& chunk, const RfiMask& mask);

}  // namespace pulsegrid
