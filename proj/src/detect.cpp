#include "pulsegrid/detect.hpp"

#include <algorithm>
#include <cmath>

namespace pulsegrid {

void remove_baseline_into(std::span<const float> series, std::uint64_t window,
                          std::span<float> out) {
    const std::uint64_t n = series.size();
    if (n == 0) return;
    if (window < 1) window = 1;
    if (window % 2 == 0) ++window;
    const std::uint64_t h = window / 2;

    if (h >= n - 1) {
        // window covers the whole series at every position: one global mean
        double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
        std::uint64_t i = 0;
        for (; i + 4 <= n; i += 4) {
            a0 += series[i + 0];
            a1 += series[i + 1];
            a2 += series[i + 2];
            a3 += series[i + 3];
        }
        for (; i < n; ++i) a0 += series[i];
        const float mean = float(((a0 + a1) + (a2 + a3)) / double(n));
        const float* __restrict in = series.data();
        float* __restrict o = out.data();
        for (std::uint64_t j = 0; j < n; ++j) o[j] = in[j] - mean;
        return;
    }

    double sum = 0.0;
    std::uint64_t count = std::min(n, h + 1);
    for (std::uint64_t j = 0; j < count; ++j) sum += series[j];

    double inv = 1.0 / double(count);
    std::uint64_t prev_count = count;
    for (std::uint64_t i = 0; i < n; ++i) {
        if (count != prev_count) {
            inv = 1.0 / double(count);
            prev_count = count;
        }
        out[i] = float(double(series[i]) - sum * inv);
        if (i + 1 + h < n) {
            sum += series[i + 1 + h];
            ++count;
        }
        if (i >= h) {
            sum -= series[i - h];
            --count;
        }
    }
}

std::vector<float> remove_baseline(std::span<const float> series, std::uint64_t window) {
    std::vector<float> out(series.size());
    remove_baseline_into(series, window, out);
    return out;
}

namespace {

// Mean-square with four independent accumulator chains (lets the compiler
// vectorize; exact for integer-valued inputs regardless of grouping).
double sum_squares(const float* __restrict x, std::uint64_t n) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::uint64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        a0 += double(x[i + 0]) * double(x[i + 0]);
        a1 += double(x[i + 1]) * double(x[i + 1]);
        a2 += double(x[i + 2]) * double(x[i + 2]);
        a3 += double(x[i + 3]) * double(x[i + 3]);
    }
    for (; i < n; ++i) a0 += double(x[i]) * double(x[i]);
    return ((a0 + a1) + (a2 + a3));
}

// Same, restricted to |x| <= cut; returns the kept count.
double sum_squares_cut(const float* __restrict x, std::uint64_t n, float cut,
                       std::uint64_t& kept) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::uint64_t k0 = 0, k1 = 0, k2 = 0, k3 = 0;
    std::uint64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const bool in0 = std::abs(x[i + 0]) <= cut;
        const bool in1 = std::abs(x[i + 1]) <= cut;
        const bool in2 = std::abs(x[i + 2]) <= cut;
        const bool in3 = std::abs(x[i + 3]) <= cut;
        a0 += in0 ? double(x[i + 0]) * double(x[i + 0]) : 0.0;
        a1 += in1 ? double(x[i + 1]) * double(x[i + 1]) : 0.0;
        a2 += in2 ? double(x[i + 2]) * double(x[i + 2]) : 0.0;
        a3 += in3 ? double(x[i + 3]) * double(x[i + 3]) : 0.0;
        k0 += in0;
        k1 += in1;
        k2 += in2;
        k3 += in3;
    }
    for (; i < n; ++i) {
        if (std::abs(x[i]) <= cut) {
            a0 += double(x[i]) * double(x[i]);
            ++k0;
        }
    }
    kept = k0 + k1 + k2 + k3;
    return ((a0 + a1) + (a2 + a3));
}

}  // namespace

double normalize_in_place(std::span<float> series) {
    const std::uint64_t n = series.size();
    if (n < 2) throw degenerate_series_error("series too short to normalize");

    const double sumsq = sum_squares(series.data(), n);
    const double rms0 = std::sqrt(sumsq / double(n));
    if (rms0 == 0.0) throw degenerate_series_error("zero series");

    // one outlier-exclusion pass, then recompute
    const float cut = float(3.0 * rms0);
    std::uint64_t kept = 0;
    const double kept_sumsq = sum_squares_cut(series.data(), n, cut, kept);
    const double rms = kept ? std::sqrt(kept_sumsq / double(kept)) : rms0;
    if (rms == 0.0) throw degenerate_series_error("zero series after outlier cut");

    const float frms = float(rms);
    float* __restrict x = series.data();
    for (std::uint64_t i = 0; i < n; ++i) x[i] = x[i] / frms;
    return rms;
}

std::pair<std::vector<float>, double> normalize(std::span<const float> series) {
    std::vector<float> out(series.begin(), series.end());
    double rms = normalize_in_place(out);
    return {std::move(out), rms};
}

std::vector<SnrSeries> boxcar_bank(std::span<const float> series, std::uint64_t max_width) {
    if (max_width < 1 || (max_width & (max_width - 1)) != 0)
        throw config_error("max boxcar width must be a power of two >= 1");
    const std::uint64_t n = series.size();

    std::vector<SnrSeries> bank;
    std::vector<double> sums(series.begin(), series.end());
    std::uint32_t index = 0;
    for (std::uint64_t w = 1; w <= max_width && w <= n; w <<= 1, ++index) {
        if (w > 1) {
            // sums currently holds width w/2; double in place (ascending i
            // only reads not-yet-updated entries).
            const std::uint64_t half = w / 2;
            const std::uint64_t m = n - w + 1;
            for (std::uint64_t i = 0; i < m; ++i) sums[i] += sums[i + half];
        }
        SnrSeries s;
        s.width_index = index;
        s.width = w;
        const double inv_sqrt_w = 1.0 / std::sqrt(double(w));
        s.values.resize(n - w + 1);
        for (std::uint64_t i = 0; i < s.values.size(); ++i) s.values[i] = sums[i] * inv_sqrt_w;
        bank.push_back(std::move(s));
    }
    return bank;
}

namespace {

// Max of one full 64-sample block via eight independent compare chains.
double block_max64(const double* __restrict s) {
    double m[8];
    for (int k = 0; k < 8; ++k) m[k] = s[k];
    for (std::uint64_t i = 8; i < scan_block_size; i += 8)
        for (int k = 0; k < 8; ++k) m[k] = m[k] > s[i + k] ? m[k] : s[i + k];
    double r = m[0];
    for (int k = 1; k < 8; ++k) r = r > m[k] ? r : m[k];
    return r;
}

void fill_block_maxima(std::span<const double> values, std::span<double> block_maxima) {
    const std::uint64_t n = values.size();
    std::uint64_t i = 0, b = 0;
    for (; i + scan_block_size <= n; i += scan_block_size, ++b)
        block_maxima[b] = block_max64(values.data() + i);
    if (i < n) {
        double m = values[i];
        for (std::uint64_t j = i + 1; j < n; ++j) m = m > values[j] ? m : values[j];
        block_maxima[b] = m;
    }
}

}  // namespace

double normalize_to_sums(std::span<const float> series, std::span<double> sums,
                         std::span<double> block_maxima) {
    const std::uint64_t n = series.size();
    if (n < 2) throw degenerate_series_error("series too short to normalize");

    const double sumsq = sum_squares(series.data(), n);
    const double rms0 = std::sqrt(sumsq / double(n));
    if (rms0 == 0.0) throw degenerate_series_error("zero series");

    const float cut = float(3.0 * rms0);
    std::uint64_t kept = 0;
    const double kept_sumsq = sum_squares_cut(series.data(), n, cut, kept);
    const double rms = kept ? std::sqrt(kept_sumsq / double(kept)) : rms0;
    if (rms == 0.0) throw degenerate_series_error("zero series after outlier cut");

    const float frms = float(rms);
    const float* __restrict x = series.data();
    double* __restrict s = sums.data();
    for (std::uint64_t i = 0; i < n; ++i) s[i] = double(x[i] / frms);
    fill_block_maxima(sums.first(n), block_maxima);
    return rms;
}

void boxcar_double_step(std::span<double> sums, std::uint64_t m, std::uint64_t half,
                        std::span<double> block_maxima) {
    double* __restrict s = sums.data();
    for (std::uint64_t i = 0; i < m; ++i) s[i] += s[i + half];
    fill_block_maxima(sums.first(m), block_maxima);
}

void scan_peaks(std::span<const double> sums, double scale, double threshold,
                std::uint32_t width_index, std::uint64_t width, const PeakMeta& meta,
                std::vector<Candidate>& out, const double* block_maxima) {
    const std::uint64_t n = sums.size();
    if (n == 0) return;

    bool in_run = false;
    std::uint64_t run_begin = 0, peak_at = 0;
    double peak_val = 0.0;

    auto close_run = [&](std::uint64_t run_end) {
        in_run = false;
        if (meta.drop_left_edge_run && run_begin == 0) return;
        if (meta.drop_right_edge_run && run_end == n - 1) return;
        const std::uint64_t abs_peak = meta.start_sample + peak_at;
        if (abs_peak < meta.valid_begin || abs_peak >= meta.valid_end) return;
        Candidate c;
        c.snr = float(peak_val);
        c.peak_sample = abs_peak;
        c.time_s = double(abs_peak) * meta.tsamp;
        c.width_index = width_index;
        c.width_samples = width;
        c.dm_trial = meta.dm_trial;
        c.dm = meta.dm;
        c.begin_sample = meta.start_sample + run_begin;
        c.end_sample = meta.start_sample + run_end;
        out.push_back(c);
    };

    // Scaling by a positive factor is monotone under IEEE rounding, so a
    // block whose max sum scales to <= threshold holds no above-threshold
    // sample and can be skipped wholesale. The max runs eight independent
    // compare chains so it vectorizes.
    constexpr std::uint64_t block = scan_block_size;
    for (std::uint64_t b0 = 0; b0 < n; b0 += block) {
        const std::uint64_t b1 = std::min(n, b0 + block);
        if (!in_run) {
            double m;
            if (block_maxima) {
                m = block_maxima[b0 / block];
            } else if (b1 - b0 == block) {
                const double* __restrict s = sums.data() + b0;
                double lane[8];
                for (int k = 0; k < 8; ++k) lane[k] = s[k];
                for (std::uint64_t i = 8; i < block; i += 8)
                    for (int k = 0; k < 8; ++k)
                        lane[k] = lane[k] > s[i + k] ? lane[k] : s[i + k];
                m = lane[0];
                for (int k = 1; k < 8; ++k) m = m > lane[k] ? m : lane[k];
            } else {
                m = sums[b0];
                for (std::uint64_t i = b0 + 1; i < b1; ++i) m = std::max(m, sums[i]);
            }
            if (!(m * scale > threshold)) continue;
        }
        for (std::uint64_t i = b0; i < b1; ++i) {
            const double v = sums[i] * scale;
            if (v > threshold) {
                if (!in_run) {
                    in_run = true;
                    run_begin = i;
                    peak_at = i;
                    peak_val = v;
                } else if (v > peak_val) {
                    peak_at = i;
                    peak_val = v;
                }
            } else if (in_run) {
                close_run(i - 1);
            }
        }
    }
    if (in_run) close_run(n - 1);
}

std::vector<Candidate> find_peaks(std::span<const double> snr_series, double threshold,
                                  std::uint32_t width_index, const PeakMeta& meta) {
    std::vector<Candidate> out;
    scan_peaks(snr_series, 1.0, threshold, width_index, std::uint64_t(1) << width_index, meta,
               out);
    return out;
}

}  // namespace pulsegrid
