#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "pulsegrid/filterbank.hpp"

namespace pulsegrid {

/// Cold-plasma dispersion constant, seconds * MHz^2 / (pc cm^-3).
inline constexpr double k_dispersion = 4.148808e3;

/// Trial DMs plus per-trial per-channel integer sample delays, relative to
/// the highest-frequency channel.
struct DmTrialPlan {
    std::vector<double> dms;                          // strictly increasing
    std::vector<std::vector<std::int64_t>> delays;    // [trial][channel]
    std::int64_t max_delay = 0;

    std::size_t ntrials() const { return dms.size(); }
    /// Largest delay of one trial (its lowest-frequency channel).
    std::int64_t trial_max_delay(std::size_t trial) const;
};

/// One dedispersed time series: values[i] corresponds to absolute sample
/// start_sample + i of the underlying file.
struct DedispersedSeries {
    std::size_t trial_index = 0;
    double dm = 0.0;
    std::vector<float> values;
    std::uint64_t start_sample = 0;
};

struct LinearSpacing {
    double step;
};
/// Chooses the step so the worst-case extra smearing across the band stays
/// within (tol - 1) * tsamp; tol must be > 1.
struct AdaptiveSpacing {
    double tol;
};
using DmSpacing = std::variant<LinearSpacing, AdaptiveSpacing>;

/// Dispersion delay of `channel` relative to the highest-frequency channel,
/// rounded half-up to whole samples. Always >= 0.
std::int64_t delay_samples(double dm, const FilterbankHeader& header, std::uint32_t channel);

/// The adaptive step implied by (tol, band, tsamp); exposed for tests.
double adaptive_dm_step(double tol, const FilterbankHeader& header);

DmTrialPlan generate_dm_trials(double dm_lo, double dm_hi, const FilterbankHeader& header,
                               const DmSpacing& spacing);

std::int64_t max_delay(const DmTrialPlan& plan);

/// Brute-force dedispersion of one trial:
///   values[i] = sum_c chunk[i + delays[t][c]][c],  channels summed in order.
/// Output length = chunk.length - trial_max_delay(t).
DedispersedSeries dedisperse(const Chunk& chunk, const DmTrialPlan& plan, std::size_t trial_index);

/// Channel-major copy of a chunk (rows[c * length + i]); the cache-friendly
/// layout the blocked path runs on.
std::vector<float> transpose_chunk(const Chunk& chunk);

/// Dedisperses several trials in one pass over the channel rows, writing into
/// caller-provided output spans (each at least length - trial_max_delay(t)
/// long). Per-sample channel summation order matches dedisperse() exactly, so
/// results are bit-identical to the single-trial path.
void dedisperse_block(std::span<const float> channel_rows, std::uint64_t length,
                      std::uint32_t nchans, const DmTrialPlan& plan,
                      std::span<const std::size_t> trial_indices,
                      std::span<float* const> outputs);

}  // namespace pulsegrid
