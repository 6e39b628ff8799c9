#include "pulsegrid/rfi.hpp"

#include <algorithm>
#include <cmath>

namespace pulsegrid {

namespace {

double median_of(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

// 1.4826 * MAD estimates sigma for Gaussian data.
constexpr double mad_to_sigma = 1.4826;

double robust_sigma(const std::vector<double>& v, double center) {
    std::vector<double> dev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - center);
    return median_of(std::move(dev)) * mad_to_sigma;
}

}  // namespace

std::vector<std::uint32_t> flag_narrowband(const Chunk& chunk, double k_mad) {
    if (chunk.nchans < 4)
        throw insufficient_statistics_error("narrowband flagging needs at least 4 channels");
    if (chunk.spec.length == 0)
        throw insufficient_statistics_error("empty chunk");

    const std::uint64_t n = chunk.spec.length;
    const std::uint32_t nch = chunk.nchans;
    std::vector<double> mean(nch, 0.0), var(nch, 0.0);

    for (std::uint64_t i = 0; i < n; ++i) {
        const float* row = chunk.data.data() + i * nch;
        for (std::uint32_t c = 0; c < nch; ++c) mean[c] += row[c];
    }
    for (std::uint32_t c = 0; c < nch; ++c) mean[c] /= double(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const float* row = chunk.data.data() + i * nch;
        for (std::uint32_t c = 0; c < nch; ++c) {
            const double d = row[c] - mean[c];
            var[c] += d * d;
        }
    }
    for (std::uint32_t c = 0; c < nch; ++c) var[c] /= double(n);

    const double med_mean = median_of(mean);
    const double sig_mean = robust_sigma(mean, med_mean);
    const double med_var = median_of(var);
    const double sig_var = robust_sigma(var, med_var);

    std::vector<std::uint32_t> flagged;
    for (std::uint32_t c = 0; c < nch; ++c) {
        const bool bad_mean = std::abs(mean[c] - med_mean) > k_mad * sig_mean;
        const bool bad_var = std::abs(var[c] - med_var) > k_mad * sig_var;
        if (bad_mean || bad_var) flagged.push_back(c);
    }
    return flagged;
}

std::vector<std::uint64_t> flag_broadband(const Chunk& chunk, double k_sigma) {
    const std::uint64_t n = chunk.spec.length;
    const std::uint32_t nch = chunk.nchans;

    std::vector<double> zero_dm(n, 0.0);
    for (std::uint64_t i = 0; i < n; ++i) {
        const float* row = chunk.data.data() + i * nch;
        double s = 0.0;
        for (std::uint32_t c = 0; c < nch; ++c) s += row[c];
        zero_dm[i] = s;
    }

    const double center = median_of(zero_dm);
    const double sigma = robust_sigma(zero_dm, center);
    if (sigma == 0.0) return {};

    std::vector<std::uint64_t> flagged;
    for (std::uint64_t i = 0; i < n; ++i) {
        if (std::abs(zero_dm[i] - center) > k_sigma * sigma) flagged.push_back(i);
    }
    return flagged;
}

void apply_mask(Chunk& chunk, const RfiMask& mask) {
    const std::uint64_t n = chunk.spec.length;
    const std::uint32_t nch = chunk.nchans;
    for (auto c : mask.bad_channels)
        if (c >= nch) throw invalid_range_error("masked channel out of range");
    for (auto s : mask.bad_samples)
        if (s >= n) throw invalid_range_error("masked sample out of range");
    if (mask.bad_channels.empty() && mask.bad_samples.empty()) return;

    std::vector<std::uint8_t> chan_bad(nch, 0), samp_bad(n, 0);
    for (auto c : mask.bad_channels) chan_bad[c] = 1;
    for (auto s : mask.bad_samples) samp_bad[s] = 1;

    if (mask.replacement == MaskPolicy::zero) {
        for (std::uint64_t i = 0; i < n; ++i) {
            float* row = chunk.data.data() + i * nch;
            for (std::uint32_t c = 0; c < nch; ++c)
                if (chan_bad[c] || samp_bad[i]) row[c] = 0.0f;
        }
        return;
    }

    // local_mean: replacements are computed from the original unmasked cells
    // only, then written in a second pass, so re-applying the same mask is a
    // no-op on the already-replaced values.
    constexpr std::uint64_t window = 64;
    const std::uint64_t half = window / 2;
    std::vector<float> replacement;
    std::vector<std::pair<std::uint64_t, float>> writes;
    for (std::uint64_t i = 0; i < n; ++i) {
        const bool row_masked = samp_bad[i];
        for (std::uint32_t c = 0; c < nch; ++c) {
            if (!(chan_bad[c] || row_masked)) continue;
            const std::uint64_t lo = i > half ? i - half : 0;
            const std::uint64_t hi = std::min(n, i + half + 1);
            double sum = 0.0;
            std::uint64_t count = 0;
            for (std::uint64_t j = lo; j < hi; ++j) {
                if (chan_bad[c] || samp_bad[j]) continue;
                sum += chunk.data[j * nch + c];
                ++count;
            }
            writes.emplace_back(i * nch + c, count ? float(sum / double(count)) : 0.0f);
        }
    }
    for (const auto& [idx, value] : writes) chunk.data[idx] = value;
}

}  // namespace pulsegrid
