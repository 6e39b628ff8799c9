#include "pulsegrid/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include "pulsegrid/bounded_queue.hpp"

namespace pulsegrid {

namespace {

using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}

std::uint64_t baseline_window_samples(double baseline_len_s, double tsamp) {
    if (baseline_len_s <= 0.0) return 0;
    auto w = std::uint64_t(std::llround(baseline_len_s / tsamp));
    if (w < 1) w = 1;
    if (w % 2 == 0) ++w;
    return w;
}

}  // namespace

PipelineTask create_task(const std::string& path, const SearchParams& params,
                         const std::string& output_path, std::size_t index) {
    PipelineTask task;
    task.index = index;
    task.path = path;
    task.output_path = output_path;
    task.params = params;

    FilterbankReader reader(path);
    task.header = reader.header();
    if (task.header.nsamples == 0) throw malformed_file_error("'" + path + "' has no samples");

    task.plan = generate_dm_trials(params.dm_lo, params.dm_hi, task.header, params.spacing);

    task.engine = params.engine;
    task.engine.tsamp = task.header.tsamp;
    task.engine.baseline_window = baseline_window_samples(params.baseline_len_s, task.header.tsamp);

    // Overlap sized so no dispersed track or boxcar window straddles a chunk
    // boundary unseen.
    const std::uint64_t overlap = std::uint64_t(max_delay(task.plan)) + params.engine.boxcar_max;
    std::uint64_t chunk_len = params.nsamps_chunk;
    if (chunk_len <= overlap || task.header.nsamples <= overlap)
        chunk_len = task.header.nsamples;  // degenerate: single whole-file chunk
    task.chunks = plan_chunks(task.header.nsamples, chunk_len,
                              chunk_len >= task.header.nsamples ? 0 : overlap);
    return task;
}

FileOutcome execute_task(const PipelineTask& task, BufferPool& pool) {
    FileOutcome outcome;
    outcome.path = task.path;
    outcome.output_path = task.output_path;
    const auto t_start = clock_type::now();

    PrefetchOptions prefetch;
    prefetch.lookahead = task.params.lookahead;
    prefetch.read_delay = task.params.read_delay;
    PrefetchingReader reader(task.path, task.chunks, prefetch);

    std::vector<Candidate> all_candidates;
    for (;;) {
        const auto t_read = clock_type::now();
        auto chunk = reader.take();
        outcome.read_ms += ms_since(t_read);
        if (!chunk) break;

        const auto t_rfi = clock_type::now();
        RfiMask mask;
        mask.replacement = task.params.replacement;
        if (task.params.rfi_narrowband)
            mask.bad_channels = flag_narrowband(*chunk, task.params.k_mad);
        if (task.params.rfi_broadband)
            mask.bad_samples = flag_broadband(*chunk, task.params.k_sigma);
        if (!mask.bad_channels.empty() || !mask.bad_samples.empty()) apply_mask(*chunk, mask);
        outcome.rfi_ms += ms_since(t_rfi);

        const auto t_loop = clock_type::now();
        DmLoopResult result = run_dm_loop(*chunk, task.plan, task.engine, pool);
        outcome.dm_loop_ms += ms_since(t_loop);

        all_candidates.insert(all_candidates.end(), result.candidates.begin(),
                              result.candidates.end());
        for (std::size_t trial : result.skipped_trials)
            outcome.skipped_trials.emplace_back(chunk->spec.index, trial);
    }

    const auto t_cluster = clock_type::now();
    std::sort(all_candidates.begin(), all_candidates.end(),
              [](const Candidate& a, const Candidate& b) {
                  if (a.peak_sample != b.peak_sample) return a.peak_sample < b.peak_sample;
                  if (a.dm_trial != b.dm_trial) return a.dm_trial < b.dm_trial;
                  return a.width_index < b.width_index;
              });
    auto clusters = link_grid(all_candidates, task.engine.radii);
    outcome.cluster_ms = ms_since(t_cluster);

    const auto t_write = clock_type::now();
    std::ofstream out(task.output_path, std::ios::binary);
    if (!out) throw error("cannot open output '" + task.output_path + "'");
    outcome.candidates = write_candidates(clusters, out);
    out.close();
    outcome.write_ms = ms_since(t_write);

    outcome.wall_ms = ms_since(t_start);
    outcome.ok = true;
    return outcome;
}

std::vector<std::string> assign_output_paths(const std::vector<std::string>& paths,
                                             const std::string& output_dir) {
    std::vector<std::string> out;
    out.reserve(paths.size());
    std::map<std::string, std::size_t> seen;
    for (const auto& p : paths) {
        std::string stem = std::filesystem::path(p).stem().string();
        if (stem.empty()) stem = "output";
        const std::size_t n = ++seen[stem];
        std::string name = n == 1 ? stem + ".cand" : stem + "." + std::to_string(n) + ".cand";
        out.push_back((std::filesystem::path(output_dir) / name).string());
    }
    return out;
}

RunSummary run_multi_file(const std::vector<std::string>& paths, const SearchParams& params,
                          const std::string& output_dir, std::uint32_t n_create,
                          std::uint32_t n_exec, std::size_t creation_capacity,
                          std::size_t execution_capacity) {
    if (n_create < 1 || n_exec < 1) throw config_error("need at least one worker per stage");
    const auto t_start = clock_type::now();

    std::filesystem::create_directories(output_dir);
    const auto output_paths = assign_output_paths(paths, output_dir);

    RunSummary summary;
    summary.files.resize(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        summary.files[i].path = paths[i];
        summary.files[i].output_path = output_paths[i];
    }

    struct PathItem {
        std::size_t index;
    };
    BoundedQueue<PathItem> creation_queue(creation_capacity ? creation_capacity
                                                            : std::size_t(2) * n_create);
    BoundedQueue<PipelineTask> execution_queue(execution_capacity ? execution_capacity
                                                                  : std::size_t(2) * n_exec);

    // One pool shared by every execution worker; the global budget is split
    // across them for per-file in-flight throttling.
    BufferPool pool(params.engine.memory_budget);
    SearchParams worker_params = params;
    worker_params.engine.memory_budget =
        std::max<std::size_t>(1, params.engine.memory_budget / n_exec);

    auto creation_body = [&] {
        while (auto item = creation_queue.take()) {
            const std::size_t i = item->index;
            if (params.create_delay.count() > 0) std::this_thread::sleep_for(params.create_delay);
            try {
                PipelineTask task = create_task(paths[i], worker_params, output_paths[i], i);
                execution_queue.put(std::move(task));
            } catch (const std::exception& e) {
                summary.files[i].ok = false;
                summary.files[i].error = e.what();
            }
        }
    };

    auto execution_body = [&] {
        while (auto task = execution_queue.take()) {
            const std::size_t i = task->index;
            if (params.execute_delay.count() > 0)
                std::this_thread::sleep_for(params.execute_delay);
            try {
                summary.files[i] = execute_task(*task, pool);
            } catch (const std::exception& e) {
                summary.files[i].ok = false;
                summary.files[i].error = e.what();
            }
        }
    };

    std::vector<std::thread> creators, executors;
    for (std::uint32_t t = 0; t < n_create; ++t) creators.emplace_back(creation_body);
    for (std::uint32_t t = 0; t < n_exec; ++t) executors.emplace_back(execution_body);

    for (std::size_t i = 0; i < paths.size(); ++i) creation_queue.put({i});
    creation_queue.close();
    for (auto& t : creators) t.join();
    execution_queue.close();  // creators done: drain and stop the executors
    for (auto& t : executors) t.join();

    for (const auto& f : summary.files)
        if (!f.ok) ++summary.n_failed;
    summary.total_wall_ms = ms_since(t_start);
    return summary;
}

void write_summary(const RunSummary& summary, std::ostream& out) {
    for (const auto& f : summary.files) {
        out << f.path << '\t' << (f.ok ? "ok" : "error") << '\t' << f.candidates << '\t'
            << std::llround(f.wall_ms);
        if (!f.ok) out << '\t' << f.error;
        out << '\n';
    }
}

}  // namespace pulsegrid
