#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "pulsegrid/cluster_io.hpp"
#include "pulsegrid/engine.hpp"
#include "pulsegrid/rfi.hpp"

namespace pulsegrid {

/// Everything a search run needs besides the input file itself. Engine
/// fields that depend on the file (tsamp, baseline window) are resolved per
/// file by create_task.
struct SearchParams {
    double dm_lo = 0.0;
    double dm_hi = 1000.0;
    DmSpacing spacing = AdaptiveSpacing{1.25};

    EngineConfig engine;          // n_workers, thresholds, radii, budget
    double baseline_len_s = 2.0;  // moving-average length; <= 0 disables

    bool rfi_broadband = true;
    bool rfi_narrowband = true;
    double k_sigma = 6.0;
    double k_mad = 5.0;
    MaskPolicy replacement = MaskPolicy::local_mean;

    std::uint64_t nsamps_chunk = std::uint64_t(1) << 18;
    std::size_t lookahead = 1;

    // Artificial stage delays for the overlap measurements; zero in normal use.
    std::chrono::milliseconds read_delay{0};
    std::chrono::milliseconds create_delay{0};
    std::chrono::milliseconds execute_delay{0};
};

/// One file's resolved execution plan.
struct PipelineTask {
    std::size_t index = 0;  // position in the submitted batch
    std::string path;
    std::string output_path;
    FilterbankHeader header;
    EngineConfig engine;
    DmTrialPlan plan;
    std::vector<ChunkSpec> chunks;
    SearchParams params;
};

struct FileOutcome {
    std::string path;
    std::string output_path;
    bool ok = false;
    std::string error;
    std::size_t candidates = 0;  // clusters written
    double wall_ms = 0.0;
    std::vector<std::pair<std::size_t, std::size_t>> skipped_trials;  // (chunk, trial)
    double read_ms = 0.0;
    double rfi_ms = 0.0;
    double dm_loop_ms = 0.0;
    double cluster_ms = 0.0;
    double write_ms = 0.0;
};

struct RunSummary {
    std::vector<FileOutcome> files;  // in submission order
    double total_wall_ms = 0.0;
    std::size_t n_failed = 0;
};

/// Parses the header, generates the DM plan, and builds the chunk plan with
/// overlap = max_delay(plan) + boxcar_max so every dispersed track and filter
/// window fits inside one chunk.
PipelineTask create_task(const std::string& path, const SearchParams& params,
                         const std::string& output_path, std::size_t index = 0);

/// Runs one task to completion: stream chunks (prefetching reader), RFI,
/// per-chunk DM loop, file-level clustering, one .cand file. Temporaries come
/// from the shared pool.
FileOutcome execute_task(const PipelineTask& task, BufferPool& pool);

/// Two-stage multi-file pipeline: n_create setup workers feed n_exec
/// execution workers through bounded queues, so setup of file k+1 overlaps
/// compute of file k. Per-file failures are isolated into the summary.
/// Queue capacities default to twice the stage's worker count (0 = default).
RunSummary run_multi_file(const std::vector<std::string>& paths, const SearchParams& params,
                          const std::string& output_dir, std::uint32_t n_create,
                          std::uint32_t n_exec, std::size_t creation_capacity = 0,
                          std::size_t execution_capacity = 0);

/// Output path for the i-th input of a batch: <output_dir>/<stem>.cand, with
/// repeated stems numbered <stem>.2.cand, <stem>.3.cand, ...
std::vector<std::string> assign_output_paths(const std::vector<std::string>& paths,
                                             const std::string& output_dir);

/// One line per file: path, status, candidate count, wall ms.
void write_summary(const RunSummary& summary, std::ostream& out);

}  // namespace pulsegrid
