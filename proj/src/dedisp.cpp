#include "pulsegrid/dedisp.hpp"

#include <algorithm>
#include <cmath>

namespace pulsegrid {

std::int64_t DmTrialPlan::trial_max_delay(std::size_t trial) const {
    const auto& d = delays[trial];
    return *std::max_element(d.begin(), d.end());
}

std::int64_t delay_samples(double dm, const FilterbankHeader& header, std::uint32_t channel) {
    const double f_ref = header.max_freq();
    const double f_c = header.channel_freq(channel);
    const double delay_s = k_dispersion * dm * (1.0 / (f_c * f_c) - 1.0 / (f_ref * f_ref));
    return static_cast<std::int64_t>(std::floor(delay_s / header.tsamp + 0.5));
}

double adaptive_dm_step(double tol, const FilterbankHeader& header) {
    const double f_lo = header.min_freq();
    const double f_hi = header.max_freq();
    const double band = 1.0 / (f_lo * f_lo) - 1.0 / (f_hi * f_hi);
    if (band <= 0.0) return 0.0;  // single-channel band: any step works
    return (tol - 1.0) * header.tsamp / (k_dispersion * band);
}

DmTrialPlan generate_dm_trials(double dm_lo, double dm_hi, const FilterbankHeader& header,
                               const DmSpacing& spacing) {
    if (dm_lo < 0.0 || dm_hi < dm_lo)
        throw invalid_range_error("invalid DM range [" + std::to_string(dm_lo) + ", " +
                                  std::to_string(dm_hi) + "]");

    double step = 0.0;
    if (const auto* lin = std::get_if<LinearSpacing>(&spacing)) {
        if (lin->step <= 0.0) throw invalid_range_error("linear DM step must be positive");
        step = lin->step;
    } else {
        const auto& ad = std::get<AdaptiveSpacing>(spacing);
        if (ad.tol <= 1.0) throw invalid_range_error("adaptive tolerance must exceed 1");
        step = adaptive_dm_step(ad.tol, header);
    }

    DmTrialPlan plan;
    if (step <= 0.0 || dm_hi == dm_lo) {
        plan.dms.push_back(dm_lo);
        if (dm_hi != dm_lo) plan.dms.push_back(dm_hi);
    } else {
        // dm_lo + i*step up to and including dm_hi; the last step may be short.
        const double eps = step * 1e-9;
        for (std::size_t i = 0;; ++i) {
            double dm = dm_lo + double(i) * step;
            if (dm >= dm_hi - eps) {
                plan.dms.push_back(dm_hi);
                break;
            }
            plan.dms.push_back(dm);
        }
    }

    plan.delays.resize(plan.dms.size());
    for (std::size_t t = 0; t < plan.dms.size(); ++t) {
        auto& d = plan.delays[t];
        d.resize(header.nchans);
        for (std::uint32_t c = 0; c < header.nchans; ++c)
            d[c] = delay_samples(plan.dms[t], header, c);
        plan.max_delay = std::max(plan.max_delay, *std::max_element(d.begin(), d.end()));
    }
    return plan;
}

std::int64_t max_delay(const DmTrialPlan& plan) {
    return plan.max_delay;
}

namespace detail {

// Free functions with restrict-qualified parameters so the compiler
// vectorizes without runtime alias checks.
void dedisp_kernel_1x1(float* __restrict out, const float* __restrict src, std::uint64_t n) {
    for (std::uint64_t i = 0; i < n; ++i) out[i] += src[i];
}

// Two trials x four channels; each trial's adds stay in channel order.
void dedisp_kernel_2x4(float* __restrict o0, float* __restrict o1, const float* __restrict r0,
                       const float* __restrict r1, const float* __restrict r2,
                       const float* __restrict r3, std::int64_t d00, std::int64_t d01,
                       std::int64_t d02, std::int64_t d03, std::int64_t d10, std::int64_t d11,
                       std::int64_t d12, std::int64_t d13, std::uint64_t n) {
    for (std::uint64_t i = 0; i < n; ++i) {
        float a0 = o0[i];
        a0 += r0[i + d00];
        a0 += r1[i + d01];
        a0 += r2[i + d02];
        a0 += r3[i + d03];
        o0[i] = a0;
        float a1 = o1[i];
        a1 += r0[i + d10];
        a1 += r1[i + d11];
        a1 += r2[i + d12];
        a1 += r3[i + d13];
        o1[i] = a1;
    }
}

// One trial, all channels, starting at absolute output index i0.
void dedisp_sweep_1(float* __restrict out, const float* rows, std::uint64_t length,
                    const std::vector<std::int64_t>& delays, std::uint32_t nchans,
                    std::uint64_t i0, std::uint64_t n) {
    for (std::uint32_t c = 0; c < nchans; ++c)
        dedisp_kernel_1x1(out, rows + std::uint64_t(c) * length + i0 + delays[c], n);
}

}  // namespace detail

std::vector<float> transpose_chunk(const Chunk& chunk) {
    const std::uint64_t n = chunk.spec.length;
    const std::uint32_t nch = chunk.nchans;
    std::vector<float> rows(n * nch);
    // Block the transpose to keep both sides cache-resident.
    constexpr std::uint64_t tile = 128;
    for (std::uint64_t t0 = 0; t0 < n; t0 += tile) {
        const std::uint64_t t1 = std::min(n, t0 + tile);
        for (std::uint32_t c = 0; c < nch; ++c) {
            float* row = rows.data() + std::uint64_t(c) * n;
            const float* src = chunk.data.data() + t0 * nch + c;
            for (std::uint64_t i = t0; i < t1; ++i, src += nch) row[i] = *src;
        }
    }
    return rows;
}

void dedisperse_block(std::span<const float> channel_rows, std::uint64_t length,
                      std::uint32_t nchans, const DmTrialPlan& plan,
                      std::span<const std::size_t> trial_indices,
                      std::span<float* const> outputs) {
    std::vector<std::uint64_t> out_len(trial_indices.size());
    for (std::size_t b = 0; b < trial_indices.size(); ++b) {
        const std::int64_t d = plan.trial_max_delay(trial_indices[b]);
        if (static_cast<std::uint64_t>(d) >= length)
            throw chunk_too_short_error(trial_indices[b],
                                        "chunk of " + std::to_string(length) +
                                            " samples cannot cover delay span " +
                                            std::to_string(d));
        out_len[b] = length - static_cast<std::uint64_t>(d);
        std::fill(outputs[b], outputs[b] + out_len[b], 0.0f);
    }

    // Register-blocked sweep: 2 trials x 4 channels per pass over a time
    // tile, cutting both row and accumulator cache traffic. Within each trial
    // the channels are still accumulated strictly in ascending order (the
    // adds chain through one register), so every output sample carries the
    // exact rounding sequence of the naive definition.
    constexpr std::uint64_t tile = 4096;
    const float* rows = channel_rows.data();
    const std::size_t ntr = trial_indices.size();

    for (std::uint64_t i0 = 0; i0 < length; i0 += tile) {
        for (std::size_t g = 0; g < ntr; g += 2) {
            const std::size_t gn = std::min<std::size_t>(2, ntr - g);
            std::uint64_t i1 = i0 + tile;
            for (std::size_t k = 0; k < gn; ++k) i1 = std::min(i1, out_len[g + k]);

            if (gn == 2 && i1 > i0) {
                const auto& d0 = plan.delays[trial_indices[g + 0]];
                const auto& d1 = plan.delays[trial_indices[g + 1]];
                std::uint32_t c = 0;
                for (; c + 4 <= nchans; c += 4) {
                    detail::dedisp_kernel_2x4(
                        outputs[g + 0] + i0, outputs[g + 1] + i0,
                        rows + std::uint64_t(c + 0) * length + i0,
                        rows + std::uint64_t(c + 1) * length + i0,
                        rows + std::uint64_t(c + 2) * length + i0,
                        rows + std::uint64_t(c + 3) * length + i0, d0[c + 0], d0[c + 1],
                        d0[c + 2], d0[c + 3], d1[c + 0], d1[c + 1], d1[c + 2], d1[c + 3],
                        i1 - i0);
                }
                for (; c < nchans; ++c) {
                    const float* row = rows + std::uint64_t(c) * length + i0;
                    detail::dedisp_kernel_1x1(outputs[g + 0] + i0, row + d0[c], i1 - i0);
                    detail::dedisp_kernel_1x1(outputs[g + 1] + i0, row + d1[c], i1 - i0);
                }
            } else if (i1 > i0) {
                detail::dedisp_sweep_1(outputs[g] + i0, rows, length,
                                       plan.delays[trial_indices[g]], nchans, i0, i1 - i0);
            }

            // per-trial straggler samples past the group's common range
            for (std::size_t k = 0; k < gn; ++k) {
                const std::uint64_t e1 = std::min(i0 + tile, out_len[g + k]);
                if (e1 > i1)
                    detail::dedisp_sweep_1(outputs[g + k] + i1, rows, length,
                                           plan.delays[trial_indices[g + k]], nchans, i1,
                                           e1 - i1);
            }
        }
    }
}

DedispersedSeries dedisperse(const Chunk& chunk, const DmTrialPlan& plan,
                             std::size_t trial_index) {
    const std::int64_t span = plan.trial_max_delay(trial_index);
    if (static_cast<std::uint64_t>(span) >= chunk.spec.length)
        throw chunk_too_short_error(trial_index, "chunk of " + std::to_string(chunk.spec.length) +
                                                     " samples cannot cover delay span " +
                                                     std::to_string(span));
    DedispersedSeries series;
    series.trial_index = trial_index;
    series.dm = plan.dms[trial_index];
    series.start_sample = chunk.spec.start_sample;
    series.values.resize(chunk.spec.length - static_cast<std::uint64_t>(span));

    auto rows = transpose_chunk(chunk);
    const std::size_t trials[1] = {trial_index};
    float* outs[1] = {series.values.data()};
    dedisperse_block(rows, chunk.spec.length, chunk.nchans, plan, trials, outs);
    return series;
}

}  // namespace pulsegrid
