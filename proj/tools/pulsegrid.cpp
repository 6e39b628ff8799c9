// pulsegrid: portable single-pulse search over SIGPROC filterbank files.
//
// Subcommands:
//   search  one file: RFI excision, dedispersion over DM trials, boxcar
//           matched filtering, peak detection, clustering -> <stem>.cand
//   batch   many files through the two-stage pipeline (setup overlaps compute)
//   inject  synthesize a filterbank file with noise and dispersed pulses
//   bench   run a search and emit per-stage wall times as CSV

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include "pulsegrid/pipeline.hpp"
#include "pulsegrid/synth.hpp"

namespace pg = pulsegrid;

namespace {

struct CommonArgs {
    pg::SearchParams params;
    std::string output_dir = ".";
    double dm_lo = 0.0, dm_hi = 1000.0;
    double dm_step = 0.0;  // > 0 selects linear spacing
    double dm_tol = 1.25;
    std::uint64_t max_in_flight = 0;
    bool no_broadband = false, no_narrowband = false;
};

void add_search_options(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--dm", [&args](const CLI::results_t& res) {
           args.dm_lo = std::stod(res.at(0));
           args.dm_hi = std::stod(res.at(1));
           return true;
       },
       "DM range: LO HI (pc cm^-3)")
        ->expected(2);
    cmd->add_option("--dm_tol,--dm-tol", args.dm_tol,
                    "adaptive trial spacing tolerance (>1; smearing <= (tol-1)*tsamp)")
        ->default_val(1.25);
    cmd->add_option("--dm_step,--dm-step", args.dm_step,
                    "linear DM trial step; overrides the adaptive spacing");
    cmd->add_option("--detect_thresh,--detect-thresh", args.params.engine.detect_thresh,
                    "S/N detection threshold")
        ->default_val(6.0f);
    cmd->add_option("--boxcar_max,--boxcar-max", args.params.engine.boxcar_max,
                    "largest boxcar width in samples (power of two)")
        ->default_val(std::uint64_t(4096));
    cmd->add_option("--baseline_len,--baseline-len", args.params.baseline_len_s,
                    "baseline moving-average length in seconds (0 disables)")
        ->default_val(2.0);
    cmd->add_option("--nsamps_chunk,--nsamps-chunk", args.params.nsamps_chunk,
                    "samples per processing chunk")
        ->default_val(std::uint64_t(1) << 18);
    cmd->add_option("--n_workers,--n-workers", args.params.engine.n_workers,
                    "DM-trial worker threads")
        ->default_val(1u);
    cmd->add_flag("--no-rfi-broadband", args.no_broadband, "disable zero-DM broadband excision");
    cmd->add_flag("--no-rfi-narrowband", args.no_narrowband, "disable narrowband channel flagging");
    cmd->add_option("--k_sigma,--k-sigma", args.params.k_sigma,
                    "broadband flagging threshold (robust sigmas)")
        ->default_val(6.0);
    cmd->add_option("--k_mad,--k-mad", args.params.k_mad,
                    "narrowband flagging threshold (MAD-scaled deviations)")
        ->default_val(5.0);
    cmd->add_option("--sep_time,--sep-time", args.params.engine.radii.sep_time,
                    "cluster linking: time radius in samples, scaled by boxcar width")
        ->default_val(std::uint64_t(3));
    cmd->add_option("--sep_dm,--sep-dm", args.params.engine.radii.sep_dm_trials,
                    "cluster linking: DM trial radius")
        ->default_val(9u);
    cmd->add_option("--sep_width,--sep-width", args.params.engine.radii.sep_width,
                    "cluster linking: width-index radius")
        ->default_val(3u);
    cmd->add_option("--mem_budget,--memory-budget", args.params.engine.memory_budget,
                    "bytes of pooled working memory for in-flight trials")
        ->default_val(std::size_t(2) << 30);
    cmd->add_option("--max-in-flight", args.max_in_flight,
                    "cap concurrently processed trials (0 = derive from budget)");
    cmd->add_option("--lookahead", args.params.lookahead,
                    "chunks to read ahead of compute (0 = synchronous)")
        ->default_val(std::size_t(1));
    cmd->add_option("--output_dir,--output-dir", args.output_dir, "directory for .cand output")
        ->default_val(".");
}

void finalize_params(CommonArgs& args) {
    args.params.dm_lo = args.dm_lo;
    args.params.dm_hi = args.dm_hi;
    if (args.dm_step > 0.0)
        args.params.spacing = pg::LinearSpacing{args.dm_step};
    else
        args.params.spacing = pg::AdaptiveSpacing{args.dm_tol};
    args.params.engine.max_in_flight = args.max_in_flight;
    args.params.rfi_broadband = !args.no_broadband;
    args.params.rfi_narrowband = !args.no_narrowband;
}

int run_search(const std::string& path, CommonArgs& args) {
    finalize_params(args);
    std::filesystem::create_directories(args.output_dir);
    const auto output = pg::assign_output_paths({path}, args.output_dir).front();

    pg::PipelineTask task = pg::create_task(path, args.params, output);
    pg::BufferPool pool(args.params.engine.memory_budget);
    pg::FileOutcome outcome = pg::execute_task(task, pool);
    std::cout << outcome.candidates << " candidates, " << outcome.wall_ms / 1000.0 << " s -> "
              << outcome.output_path << "\n";
    return 0;
}

int run_batch(const std::vector<std::string>& paths, CommonArgs& args, std::uint32_t n_create,
              std::uint32_t n_exec, const std::string& summary_path) {
    finalize_params(args);
    pg::RunSummary summary =
        pg::run_multi_file(paths, args.params, args.output_dir, n_create, n_exec);

    std::ofstream sum_out(summary_path.empty()
                              ? (std::filesystem::path(args.output_dir) / "summary.txt").string()
                              : summary_path);
    pg::write_summary(summary, sum_out);

    std::size_t total = 0;
    for (const auto& f : summary.files) total += f.candidates;
    std::cout << summary.files.size() - summary.n_failed << "/" << summary.files.size()
              << " files ok, " << total << " candidates, " << summary.total_wall_ms / 1000.0
              << " s\n";
    return summary.n_failed == 0 ? 0 : 1;
}

int run_inject(const std::string& out_path, pg::FilterbankHeader header, std::uint64_t nsamples,
               float mean, float sigma, std::uint64_t seed,
               const std::vector<std::string>& pulse_specs, double quant_offset,
               double quant_scale) {
    auto grid = pg::generate_noise(header, nsamples, mean, sigma, seed);

    std::ofstream sidecar(out_path + ".truth");
    for (const auto& text : pulse_specs) {
        // dm,t0,width,snr  (snr converted to amplitude for this header/sigma)
        std::istringstream ss(text);
        std::string field;
        std::vector<double> v;
        while (std::getline(ss, field, ',')) v.push_back(std::stod(field));
        if (v.size() != 4) throw pg::config_error("--pulse expects dm,t0,width,snr");
        pg::PulseSpec pulse;
        pulse.dm = v[0];
        pulse.t0 = v[1];
        pulse.width = std::uint64_t(v[2]);
        const double snr = v[3];
        pulse.amplitude = float(pg::amplitude_for_snr(snr, sigma, header.nchans, pulse.width));
        pg::inject_pulse(grid, header, pulse);
        sidecar << pulse.dm << '\t' << pulse.t0 << '\t' << pulse.width << '\t' << pulse.amplitude
                << '\t' << pg::expected_snr(pulse.amplitude, sigma, header.nchans, pulse.width)
                << '\n';
    }

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw pg::error("cannot open '" + out_path + "'");
    const std::size_t bytes =
        pg::write_filterbank(header, grid, out, {quant_offset, quant_scale});
    std::cout << out_path << ": " << nsamples << " samples, " << bytes << " bytes\n";
    return 0;
}

int run_bench(const std::string& path, CommonArgs& args, const std::string& csv_path) {
    finalize_params(args);
    std::filesystem::create_directories(args.output_dir);
    const auto output = pg::assign_output_paths({path}, args.output_dir).front();

    std::ofstream csv(csv_path);
    if (!csv) throw pg::error("cannot open '" + csv_path + "'");
    csv << "stage,trial_or_file,ms\n";
    std::mutex csv_mutex;
    args.params.engine.timing_sink = [&](const pg::TrialTiming& t) {
        std::lock_guard lock(csv_mutex);
        csv << "dedisperse," << t.trial << ',' << t.dedisperse_ms << '\n'
            << "baseline," << t.trial << ',' << t.baseline_ms << '\n'
            << "normalize," << t.trial << ',' << t.normalize_ms << '\n'
            << "boxcar," << t.trial << ',' << t.boxcar_ms << '\n'
            << "peaks," << t.trial << ',' << t.peaks_ms << '\n';
    };

    pg::PipelineTask task = pg::create_task(path, args.params, output);
    pg::BufferPool pool(args.params.engine.memory_budget);
    pg::FileOutcome outcome = pg::execute_task(task, pool);

    csv << "read," << path << ',' << outcome.read_ms << '\n'
        << "rfi," << path << ',' << outcome.rfi_ms << '\n'
        << "dm_loop," << path << ',' << outcome.dm_loop_ms << '\n'
        << "cluster," << path << ',' << outcome.cluster_ms << '\n'
        << "write," << path << ',' << outcome.write_ms << '\n'
        << "total," << path << ',' << outcome.wall_ms << '\n';
    std::cout << outcome.candidates << " candidates, timings -> " << csv_path << "\n";
    return 0;
}

}  // namespace

// Heimdall-style single-dash long flags (-dm, -detect_thresh, ...) are
// rewritten to their --long spelling before CLI11 sees them. CLI11's
// vector-parse wants the arguments reversed.
std::vector<std::string> normalize_args(int argc, char** argv) {
    std::vector<std::string> out;
    for (int i = argc - 1; i >= 1; --i) {
        std::string a = argv[i];
        if (a.size() > 2 && a[0] == '-' && a[1] != '-' &&
            (std::isalpha(static_cast<unsigned char>(a[1])) != 0))
            a = "-" + a;
        out.push_back(std::move(a));
    }
    return out;
}

int main(int argc, char** argv) {
    CLI::App app{"pulsegrid: single-pulse search over SIGPROC filterbank files"};
    app.require_subcommand(1);

    CommonArgs args;

    // search
    auto* search = app.add_subcommand("search", "single-pulse search of one file");
    std::string search_input;
    search->add_option("file", search_input, "input filterbank file")->required();
    add_search_options(search, args);

    // batch
    auto* batch = app.add_subcommand("batch", "multi-file pipelined search");
    std::vector<std::string> batch_inputs;
    std::uint32_t n_create = 1, n_exec = 1;
    std::string summary_path;
    batch->add_option("files", batch_inputs, "input filterbank files")->required();
    add_search_options(batch, args);
    batch->add_option("--n_create,--n-create", n_create, "pipeline creation workers")
        ->default_val(1u);
    batch->add_option("--n_exec,--n-exec", n_exec, "pipeline execution workers")->default_val(1u);
    batch->add_option("--summary", summary_path, "run summary path (default <output_dir>/summary.txt)");

    // inject
    auto* inject = app.add_subcommand("inject", "write a synthetic filterbank file");
    std::string inject_output = "synthetic.fil";
    pg::FilterbankHeader header;
    header.source_name = "synthetic";
    header.fch1 = 1500.0;
    header.foff = -1.0;
    header.nchans = 64;
    header.nbits = 32;
    header.tsamp = 64e-6;
    header.tstart = 60000.0;
    std::uint64_t nsamples = 1 << 16;
    float noise_mean = 0.0f, noise_sigma = 1.0f;
    std::uint64_t seed = 1;
    double quant_offset = 0.0, quant_scale = 1.0;
    std::vector<std::string> pulse_specs;
    inject->add_option("-o,--output", inject_output, "output path")->default_val("synthetic.fil");
    inject->add_option("--nchans", header.nchans)->default_val(64u);
    inject->add_option("--fch1", header.fch1, "first channel frequency, MHz")->default_val(1500.0);
    inject->add_option("--foff", header.foff, "channel step, MHz")->default_val(-1.0);
    inject->add_option("--tsamp", header.tsamp, "seconds per sample")->default_val(64e-6);
    inject->add_option("--nbits", header.nbits, "8, 16 or 32")->default_val(32u);
    inject->add_option("--nsamples", nsamples)->default_val(std::uint64_t(1) << 16);
    inject->add_option("--mean", noise_mean, "noise mean")->default_val(0.0f);
    inject->add_option("--sigma", noise_sigma, "noise standard deviation")->default_val(1.0f);
    inject->add_option("--seed", seed)->default_val(std::uint64_t(1));
    inject->add_option("--quant-offset", quant_offset)->default_val(0.0);
    inject->add_option("--quant-scale", quant_scale)->default_val(1.0);
    inject->add_option("--pulse", pulse_specs, "dm,t0,width,snr (repeatable)");

    // bench
    auto* bench = app.add_subcommand("bench", "search one file and dump stage timings");
    std::string bench_input, bench_csv = "bench.csv";
    bench->add_option("file", bench_input, "input filterbank file")->required();
    add_search_options(bench, args);
    bench->add_option("--csv", bench_csv, "CSV output path")->default_val("bench.csv");

    try {
        app.parse(normalize_args(argc, argv));
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // 2 = usage error; 0 for --help
    }

    try {
        if (search->parsed()) return run_search(search_input, args);
        if (batch->parsed()) return run_batch(batch_inputs, args, n_create, n_exec, summary_path);
        if (inject->parsed())
            return run_inject(inject_output, header, nsamples, noise_mean, noise_sigma, seed,
                              pulse_specs, quant_offset, quant_scale);
        if (bench->parsed()) return run_bench(bench_input, args, bench_csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
