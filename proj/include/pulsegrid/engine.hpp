#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pulsegrid/buffer_pool.hpp"
#include "pulsegrid/cluster.hpp"
#include "pulsegrid/dedisp.hpp"
#include "pulsegrid/detect.hpp"

namespace pulsegrid {

/// Per-trial stage wall times, emitted when EngineConfig::timing_sink is set.
/// Dedispersion is amortized over the trial block it ran in.
struct TrialTiming {
    std::size_t trial = 0;
    double dedisperse_ms = 0.0;
    double baseline_ms = 0.0;
    double normalize_ms = 0.0;
    double boxcar_ms = 0.0;
    double peaks_ms = 0.0;
};

struct EngineConfig {
    std::uint32_t n_workers = 1;
    double tsamp = 0.0;  // seconds per sample, for candidate timestamps
    float detect_thresh = 6.0f;
    std::uint64_t boxcar_max = 4096;    // power of two
    std::uint64_t baseline_window = 0;  // samples, forced odd; 0 disables baseline removal
    LinkRadii radii;                    // used by the caller's clustering stage
    std::size_t memory_budget = std::size_t(2) << 30;
    std::size_t max_in_flight = 0;  // 0 = derive from the budget
    std::function<void(const TrialTiming&)> timing_sink;  // bench hook, normally empty
};

struct DmLoopResult {
    std::vector<Candidate> candidates;        // sorted by (peak_sample, dm_trial, width_index)
    std::vector<std::size_t> skipped_trials;  // degenerate or uncoverable trials, sorted
};

/// Static modulo partition: worker t gets trials {i : i mod T == t}.
std::vector<std::vector<std::size_t>> partition_trials(std::size_t ntrials, std::uint32_t n_workers);

/// Bytes of pooled working set one trial needs (dedispersed series plus
/// detect temporaries) for a chunk of this length.
std::size_t trial_working_set_bytes(const DmTrialPlan& plan, std::uint64_t chunk_len,
                                    const EngineConfig& cfg);

/// How many trials may be in flight under cfg.memory_budget. Throws
/// config_error when not even one fits.
std::size_t in_flight_limit(const DmTrialPlan& plan, std::uint64_t chunk_len,
                            const EngineConfig& cfg);

/// The per-chunk candidate search: T workers process modulo-partitioned DM
/// trials (dedisperse -> baseline -> normalize -> boxcar bank -> peaks) with
/// temporaries drawn from the shared pool, capped at the in-flight limit;
/// worker-local candidate buffers are aggregated and sorted afterwards. The
/// result is a deterministic function of (chunk, plan, thresholds) and does
/// not depend on n_workers, scheduling, or the in-flight limit.
DmLoopResult run_dm_loop(const Chunk& chunk, const DmTrialPlan& plan, const EngineConfig& cfg,
                         BufferPool& pool);

}  // namespace pulsegrid
