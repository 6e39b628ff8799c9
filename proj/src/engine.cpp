#include "pulsegrid/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <thread>

namespace pulsegrid {

namespace {

using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}

// Counting semaphore with all-or-nothing bulk acquire; a worker never waits
// while holding a partial allocation, so block acquisition cannot deadlock.
class BulkSemaphore {
  public:
    explicit BulkSemaphore(std::size_t permits) : available_(permits) {}
    void acquire(std::size_t k) {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return available_ >= k; });
        available_ -= k;
    }
    void release(std::size_t k) {
        {
            std::lock_guard lock(mutex_);
            available_ += k;
        }
        cv_.notify_all();
    }

  private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t available_;
};

struct WorkerOutput {
    std::vector<Candidate> candidates;
    std::vector<std::size_t> skipped;
    std::exception_ptr error;
    std::size_t error_trial = SIZE_MAX;
};

}  // namespace

std::vector<std::vector<std::size_t>> partition_trials(std::size_t ntrials,
                                                       std::uint32_t n_workers) {
    std::vector<std::vector<std::size_t>> parts(std::max<std::uint32_t>(1, n_workers));
    for (std::size_t i = 0; i < ntrials; ++i) parts[i % parts.size()].push_back(i);
    return parts;
}

std::size_t trial_working_set_bytes(const DmTrialPlan& plan, std::uint64_t chunk_len,
                                    const EngineConfig& cfg) {
    const std::int64_t min_delay = plan.trial_max_delay(0);
    const std::uint64_t longest =
        chunk_len > std::uint64_t(min_delay) ? chunk_len - std::uint64_t(min_delay) : 1;
    // dedispersed series (+ baseline output) in float, boxcar running sums
    // plus their block maxima in double
    const std::size_t series_bytes = BufferPool::aligned_size(longest * sizeof(float));
    const std::uint64_t n_blocks = (longest + scan_block_size - 1) / scan_block_size;
    const std::size_t sums_bytes =
        BufferPool::aligned_size((longest + n_blocks) * sizeof(double));
    const std::size_t buffers = cfg.baseline_window > 0 ? 2 : 1;
    return buffers * series_bytes + sums_bytes;
}

std::size_t in_flight_limit(const DmTrialPlan& plan, std::uint64_t chunk_len,
                            const EngineConfig& cfg) {
    const std::size_t ws = trial_working_set_bytes(plan, chunk_len, cfg);
    const std::size_t limit = cfg.memory_budget / ws;
    if (limit == 0)
        throw config_error("memory budget of " + std::to_string(cfg.memory_budget) +
                           " bytes is below one trial's working set (" + std::to_string(ws) + ")");
    return limit;
}

DmLoopResult run_dm_loop(const Chunk& chunk, const DmTrialPlan& plan, const EngineConfig& cfg,
                         BufferPool& pool) {
    if (cfg.n_workers < 1) throw config_error("n_workers must be >= 1");
    if (cfg.boxcar_max < 1 || (cfg.boxcar_max & (cfg.boxcar_max - 1)) != 0)
        throw config_error("boxcar_max must be a power of two");
    if (plan.ntrials() == 0) return {};

    const std::uint64_t length = chunk.spec.length;
    const std::size_t limit =
        cfg.max_in_flight > 0 ? cfg.max_in_flight : in_flight_limit(plan, length, cfg);
    const std::uint32_t T = cfg.n_workers;
    const std::size_t block_cap = 16;
    const std::size_t block_size = std::max<std::size_t>(1, std::min(block_cap, limit / T));

    const auto rows = transpose_chunk(chunk);
    const auto partitions = partition_trials(plan.ntrials(), T);

    BulkSemaphore in_flight(limit);
    std::vector<WorkerOutput> outputs(T);

    auto worker_body = [&](std::uint32_t worker_id) {
        WorkerOutput& out = outputs[worker_id];
        const auto& mine = partitions[worker_id];
        std::size_t current_trial = SIZE_MAX;
        try {
            for (std::size_t pos = 0; pos < mine.size(); pos += block_size) {
                std::vector<std::size_t> block;
                for (std::size_t k = pos; k < std::min(mine.size(), pos + block_size); ++k) {
                    const std::size_t trial = mine[k];
                    if (std::uint64_t(plan.trial_max_delay(trial)) >= length)
                        out.skipped.push_back(trial);  // chunk cannot cover this trial's span
                    else
                        block.push_back(trial);
                }
                if (block.empty()) continue;

                in_flight.acquire(block.size());
                std::vector<BufferPool::Lease> series_leases;
                series_leases.reserve(block.size());
                std::vector<float*> series_ptrs(block.size());
                std::vector<std::uint64_t> series_len(block.size());

                try {
                    for (std::size_t b = 0; b < block.size(); ++b) {
                        current_trial = block[b];
                        series_len[b] = length - std::uint64_t(plan.trial_max_delay(block[b]));
                        series_leases.push_back(pool.lease(series_len[b] * sizeof(float)));
                        series_ptrs[b] = series_leases.back().as_span<float>(series_len[b]).data();
                    }

                    // Work buffers sized for the block's longest trial and
                    // reused across its trials; fewer trips through the
                    // shared allocator when many workers run.
                    const std::uint64_t longest = series_len[0];
                    BufferPool::Lease work_lease;
                    if (cfg.baseline_window > 0)
                        work_lease = pool.lease(longest * sizeof(float));
                    const std::uint64_t max_blocks =
                        (longest + scan_block_size - 1) / scan_block_size;
                    BufferPool::Lease sums_lease =
                        pool.lease((longest + max_blocks) * sizeof(double));

                    const auto t_dedisp = clock_type::now();
                    dedisperse_block(rows, length, chunk.nchans, plan, block, series_ptrs);
                    const double dedisp_ms =
                        cfg.timing_sink ? ms_since(t_dedisp) / double(block.size()) : 0.0;

                    for (std::size_t b = 0; b < block.size(); ++b) {
                        const std::size_t trial = block[b];
                        current_trial = trial;
                        std::span<float> series(series_ptrs[b], series_len[b]);

                        TrialTiming timing;
                        timing.trial = trial;
                        timing.dedisperse_ms = dedisp_ms;

                        std::span<const float> work = series;
                        if (cfg.baseline_window > 0) {
                            const auto t0 = clock_type::now();
                            auto base = work_lease.as_span<float>(series.size());
                            remove_baseline_into(series, cfg.baseline_window, base);
                            work = base;
                            if (cfg.timing_sink) timing.baseline_ms = ms_since(t0);
                        }

                        PeakMeta meta;
                        meta.start_sample = chunk.spec.start_sample;
                        meta.tsamp = cfg.tsamp;
                        meta.dm_trial = std::uint32_t(trial);
                        meta.dm = plan.dms[trial];
                        meta.valid_begin = chunk.spec.valid_begin;
                        meta.valid_end = chunk.spec.valid_end;
                        meta.drop_left_edge_run = chunk.spec.start_sample > 0;
                        meta.drop_right_edge_run = chunk.spec.overlap > 0;

                        // Normalize into double running sums, then boxcar by
                        // in-place doubling; block maxima ride along in every
                        // pass so the scans skip quiet regions untouched.
                        const std::uint64_t n = work.size();
                        const std::uint64_t n_blocks = (n + scan_block_size - 1) / scan_block_size;
                        auto sums = sums_lease.as_span<double>(n);
                        std::span<double> maxima{sums.data() + n, n_blocks};

                        const auto t_norm = clock_type::now();
                        try {
                            normalize_to_sums(work, sums, maxima);
                        } catch (const degenerate_series_error&) {
                            out.skipped.push_back(trial);
                            continue;
                        }
                        if (cfg.timing_sink) timing.normalize_ms = ms_since(t_norm);

                        std::uint32_t width_index = 0;
                        for (std::uint64_t w = 1; w <= cfg.boxcar_max && w <= n;
                             w <<= 1, ++width_index) {
                            const std::uint64_t m = n - w + 1;
                            if (w > 1) {
                                const auto t0 = clock_type::now();
                                boxcar_double_step(sums, m, w / 2, maxima);
                                if (cfg.timing_sink) timing.boxcar_ms += ms_since(t0);
                            }
                            const auto t1 = clock_type::now();
                            const double inv_sqrt_w = 1.0 / std::sqrt(double(w));
                            scan_peaks(sums.subspan(0, m), inv_sqrt_w,
                                       double(cfg.detect_thresh), width_index, w, meta,
                                       out.candidates, maxima.data());
                            if (cfg.timing_sink) timing.peaks_ms += ms_since(t1);
                        }
                        if (cfg.timing_sink) cfg.timing_sink(timing);
                    }
                } catch (...) {
                    series_leases.clear();
                    in_flight.release(block.size());
                    throw;
                }
                series_leases.clear();
                in_flight.release(block.size());
            }
        } catch (const budget_exhausted_error& e) {
            out.error = std::make_exception_ptr(budget_exhausted_error(
                "trial " + std::to_string(current_trial) + ": " + e.what()));
            out.error_trial = current_trial;
        } catch (...) {
            out.error = std::current_exception();
            out.error_trial = current_trial;
        }
    };

    {
        std::vector<std::jthread> workers;
        workers.reserve(T);
        for (std::uint32_t t = 0; t < T; ++t) workers.emplace_back(worker_body, t);
    }

    // Surface the failure of the lowest trial index for a deterministic error.
    std::size_t worst = SIZE_MAX;
    std::exception_ptr first_error;
    for (const auto& out : outputs) {
        if (out.error && out.error_trial < worst) {
            worst = out.error_trial;
            first_error = out.error;
        }
    }
    if (first_error) std::rethrow_exception(first_error);

    DmLoopResult result;
    for (auto& out : outputs) {
        result.candidates.insert(result.candidates.end(), out.candidates.begin(),
                                 out.candidates.end());
        result.skipped_trials.insert(result.skipped_trials.end(), out.skipped.begin(),
                                     out.skipped.end());
    }
    std::sort(result.candidates.begin(), result.candidates.end(),
              [](const Candidate& a, const Candidate& b) {
                  if (a.peak_sample != b.peak_sample) return a.peak_sample < b.peak_sample;
                  if (a.dm_trial != b.dm_trial) return a.dm_trial < b.dm_trial;
                  return a.width_index < b.width_index;
              });
    std::sort(result.skipped_trials.begin(), result.skipped_trials.end());
    return result;
}

}  // namespace pulsegrid
