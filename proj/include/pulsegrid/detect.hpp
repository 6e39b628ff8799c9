#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pulsegrid/errors.hpp"

namespace pulsegrid {

/// One single-pulse detection event.
struct Candidate {
    float snr = 0.0f;
    std::uint64_t peak_sample = 0;  // absolute sample index of the peak window start
    double time_s = 0.0;            // peak_sample * tsamp
    std::uint32_t width_index = 0;  // ordinal into the boxcar bank
    std::uint64_t width_samples = 1;  // 2^width_index
    std::uint32_t dm_trial = 0;
    double dm = 0.0;
    std::uint64_t begin_sample = 0;  // above-threshold run, inclusive bounds
    std::uint64_t end_sample = 0;
};

/// Subtracts the truncated centered moving average (window forced odd by
/// incrementing even inputs). Output length equals input length.
std::vector<float> remove_baseline(std::span<const float> series, std::uint64_t window);

/// In-place variant writing into `out` (out.size() == series.size()).
void remove_baseline_into(std::span<const float> series, std::uint64_t window,
                          std::span<float> out);

/// Robust RMS normalization: one pass excluding |x| > 3 * initial RMS, then
/// recompute and divide. Returns the normalized series and the rms. Throws
/// degenerate_series_error for constant-zero input.
std::pair<std::vector<float>, double> normalize(std::span<const float> series);

/// In-place variant; returns the rms.
double normalize_in_place(std::span<float> series);

struct SnrSeries {
    std::uint32_t width_index = 0;
    std::uint64_t width = 1;
    std::vector<double> values;  // length = series length - width + 1
};

/// Boxcar matched-filter bank over widths {1, 2, 4, ..., max_width}:
/// snr_w[i] = (sum of w samples from i) / sqrt(w), computed incrementally by
/// doubling running sums. Widths larger than the series are dropped.
/// `series` must already be normalized to unit noise.
std::vector<SnrSeries> boxcar_bank(std::span<const float> series, std::uint64_t max_width);

/// Context for peak extraction: where the series sits in the file and which
/// absolute samples this chunk is authoritative for.
struct PeakMeta {
    std::uint64_t start_sample = 0;  // absolute sample of series index 0
    double tsamp = 0.0;
    std::uint32_t dm_trial = 0;
    double dm = 0.0;
    std::uint64_t valid_begin = 0;
    std::uint64_t valid_end = 0;
    // Runs clipped by a chunk edge are continuations of runs another chunk
    // sees in full (the overlap covers every track and filter window); these
    // flags suppress them so chunked output matches whole-file output.
    bool drop_left_edge_run = false;
    bool drop_right_edge_run = false;
};

/// One candidate per maximal above-threshold run, at the run maximum
/// (earliest index on ties). Candidates whose peak falls outside
/// [valid_begin, valid_end) are dropped.
std::vector<Candidate> find_peaks(std::span<const double> snr_series, double threshold,
                                  std::uint32_t width_index, const PeakMeta& meta);

/// Core scanner used by both find_peaks and the engine's streaming path:
/// values are sums[i] * scale (double accumulation, like boxcar_bank),
/// appended to `out`. When `block_maxima` is non-null it must hold the max of
/// every scan_block_size-sample block of `sums`; blocks that cannot cross the
/// threshold are then skipped without touching them.
inline constexpr std::uint64_t scan_block_size = 64;
void scan_peaks(std::span<const double> sums, double scale, double threshold,
                std::uint32_t width_index, std::uint64_t width, const PeakMeta& meta,
                std::vector<Candidate>& out, const double* block_maxima = nullptr);

/// Streaming helpers for the engine's per-trial loop; all values match the
/// normalize / boxcar_bank compositions bit for bit.
///
/// Divides by the robust rms into the double sums buffer and records block
/// maxima (width-1 filter); returns the rms.
double normalize_to_sums(std::span<const float> series, std::span<double> sums,
                         std::span<double> block_maxima);

/// One doubling step (width half*2 from width half) over the first m outputs,
/// updating block maxima in the same pass.
void boxcar_double_step(std::span<double> sums, std::uint64_t m, std::uint64_t half,
                        std::span<double> block_maxima);

}  // namespace pulsegrid
