#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pulsegrid/detect.hpp"
#include "pulsegrid/synth.hpp"

using namespace pulsegrid;

namespace {

PeakMeta open_meta(std::uint64_t n) {
    PeakMeta meta;
    meta.tsamp = 64e-6;
    meta.valid_begin = 0;
    meta.valid_end = n;
    return meta;
}

std::vector<float> random_series(std::size_t n, std::uint32_t seed, float scale = 1.0f) {
    std::mt19937 rng(seed);
    std::normal_distribution<float> dist(0.0f, scale);
    std::vector<float> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

std::vector<double> random_snr(std::size_t n, std::uint32_t seed, double scale = 1.0) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> dist(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

}  // namespace

TEST_CASE("baseline removal of a constant series is zero") {
    std::vector<float> series(200, 4.5f);
    for (std::uint64_t window : {1u, 5u, 32u, 999u}) {
        auto out = remove_baseline(series, window);
        for (auto v : out) CHECK(v == doctest::Approx(0.0).epsilon(1e-7));
    }
}

TEST_CASE("window=1 subtracts each sample from itself") {
    auto series = random_series(300, 1);
    auto out = remove_baseline(series, 1);
    for (auto v : out) CHECK(v == 0.0f);
}

TEST_CASE("a linear ramp is flat in the interior for a symmetric window") {
    std::vector<float> ramp(100);
    for (std::size_t i = 0; i < 100; ++i) ramp[i] = 0.5f * float(i);
    auto out = remove_baseline(ramp, 5);
    for (std::size_t i = 2; i < 98; ++i) CHECK(out[i] == doctest::Approx(0.0).epsilon(1e-5));
}

TEST_CASE("baseline removal matches the direct windowed-mean oracle") {
    auto series = random_series(500, 2);
    for (std::uint64_t window : {3u, 7u, 64u, 129u, 501u, 2000u}) {
        auto fast = remove_baseline(series, window);
        auto slow = oracle::windowed_mean_subtract(series, window);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t i = 0; i < fast.size(); ++i)
            CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-5));
    }
    // even windows are forced odd
    auto even = remove_baseline(series, 10);
    auto odd = remove_baseline(series, 11);
    CHECK(even == odd);
}

TEST_CASE("empty series stays empty") {
    CHECK(remove_baseline({}, 5).empty());
}

TEST_CASE("normalize leaves a unit-amplitude alternating series unchanged") {
    std::vector<float> series = {1.0f, -1.0f, 1.0f, -1.0f};
    auto [out, rms] = normalize(series);
    CHECK(rms == doctest::Approx(1.0));
    CHECK(out == series);
}

TEST_CASE("normalization is scale invariant") {
    auto series = random_series(1000, 3);
    auto [base, rms_base] = normalize(series);
    for (float c : {0.25f, 3.0f, 1000.0f}) {
        auto scaled = series;
        for (auto& x : scaled) x *= c;
        auto [out, rms] = normalize(scaled);
        CHECK(rms == doctest::Approx(double(c) * rms_base).epsilon(1e-5));
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(out[i] == doctest::Approx(base[i]).epsilon(1e-4));
    }
}

TEST_CASE("robust rms estimates sigma within 2% on 1e5 Gaussian samples") {
    for (float sigma : {0.5f, 2.0f, 17.0f}) {
        auto series = random_series(100000, 4, sigma);
        auto [out, rms] = normalize(series);
        // the 3-sigma cut trims the tails: the robust rms sits slightly below
        // sigma but well within the 2% band
        CHECK(rms == doctest::Approx(double(sigma)).epsilon(0.02));
    }
}

TEST_CASE("constant-zero series is degenerate") {
    std::vector<float> zeros(100, 0.0f);
    CHECK_THROWS_AS(normalize(zeros), degenerate_series_error);
    std::vector<float> one = {1.0f};
    CHECK_THROWS_AS(normalize(one), degenerate_series_error);
}

TEST_CASE("a single spike gives peak S/N equal to its height at width 1") {
    std::vector<float> series(128, 0.0f);
    series[40] = 8.0f;
    auto bank = boxcar_bank(series, 1);
    REQUIRE(bank.size() == 1);
    CHECK(bank[0].values[40] == 8.0);
    double best = 0.0;
    for (auto v : bank[0].values) best = std::max(best, v);
    CHECK(best == 8.0);
}

TEST_CASE("a matched boxcar integrates a top-hat to height*sqrt(width)") {
    std::vector<float> series(64, 0.0f);
    for (int i = 20; i < 24; ++i) series[i] = 2.0f;
    auto bank = boxcar_bank(series, 4);
    REQUIRE(bank.size() == 3);
    CHECK(bank[2].width == 4);
    CHECK(bank[2].values[20] == doctest::Approx(4.0));  // 8/sqrt(4)
}

TEST_CASE("boxcar bank matches the naive windowed-sum oracle") {
    auto series = random_series(2048, 5);
    auto bank = boxcar_bank(series, 64);
    REQUIRE(bank.size() == 7);
    for (const auto& s : bank) {
        auto expect = oracle::naive_boxcar_snr(series, s.width);
        REQUIRE(s.values.size() == expect.size());
        CHECK(s.values.size() == series.size() - s.width + 1);
        for (std::size_t i = 0; i < expect.size(); ++i)
            CHECK(double(s.values[i]) ==
                  doctest::Approx(double(expect[i])).epsilon(1e-9).scale(std::abs(expect[i]) + 1));
    }
}

TEST_CASE("bank truncates at the largest width that fits") {
    std::vector<float> series(10, 1.0f);
    auto bank = boxcar_bank(series, 4096);
    REQUIRE(bank.size() == 4);  // widths 1,2,4,8
    CHECK(bank.back().width == 8);
}

TEST_CASE("boxcar widths must be a power of two") {
    std::vector<float> series(16, 0.0f);
    CHECK_THROWS_AS(boxcar_bank(series, 48), config_error);
}

TEST_CASE("all-below-threshold series yields no candidates") {
    std::vector<double> snr(256, 1.0);
    CHECK(find_peaks(snr, 6.0, 0, open_meta(256)).empty());
}

TEST_CASE("one run yields one candidate at the run maximum") {
    std::vector<double> snr(32, 0.0);
    snr[10] = 7.0;
    snr[11] = 9.0;
    snr[12] = 8.0;
    auto cands = find_peaks(snr, 6.0, 2, open_meta(32));
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].snr == 9.0f);
    CHECK(cands[0].peak_sample == 11);
    CHECK(cands[0].begin_sample == 10);
    CHECK(cands[0].end_sample == 12);
    CHECK(cands[0].width_index == 2);
    CHECK(cands[0].width_samples == 4);
    CHECK(cands[0].time_s == doctest::Approx(11 * 64e-6));
}

TEST_CASE("ties resolve to the earliest index") {
    std::vector<double> snr(16, 0.0);
    snr[5] = 7.0;
    snr[6] = 7.0;
    auto cands = find_peaks(snr, 6.0, 0, open_meta(16));
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].peak_sample == 5);
}

TEST_CASE("candidates outside the valid range are dropped") {
    std::vector<double> snr(100, 0.0);
    snr[10] = 9.0;  // inside
    snr[80] = 9.0;  // outside
    auto meta = open_meta(100);
    meta.start_sample = 1000;
    meta.valid_begin = 1000;
    meta.valid_end = 1050;
    auto cands = find_peaks(snr, 6.0, 0, meta);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].peak_sample == 1010);
}

TEST_CASE("edge-clipped runs are suppressed when requested") {
    std::vector<double> snr(64, 0.0);
    for (int i = 0; i < 5; ++i) snr[i] = 8.0;       // touches the left edge
    for (int i = 60; i < 64; ++i) snr[i] = 8.0;     // touches the right edge
    snr[30] = 9.0;                                  // interior

    auto meta = open_meta(64);
    auto all = find_peaks(snr, 6.0, 0, meta);
    CHECK(all.size() == 3);

    meta.drop_left_edge_run = true;
    meta.drop_right_edge_run = true;
    auto interior = find_peaks(snr, 6.0, 0, meta);
    REQUIRE(interior.size() == 1);
    CHECK(interior[0].peak_sample == 30);
}

TEST_CASE("find_peaks agrees with a naive run scanner on noisy series") {
    for (std::uint32_t seed = 0; seed < 20; ++seed) {
        auto snr = random_snr(4096, 100 + seed, 2.5);
        const double thresh = 6.0;
        auto cands = find_peaks(snr, thresh, 0, open_meta(snr.size()));
        auto runs = oracle::naive_runs(snr, thresh);
        REQUIRE(cands.size() == runs.size());
        for (std::size_t i = 0; i < runs.size(); ++i) {
            CHECK(cands[i].peak_sample == runs[i].peak);
            CHECK(double(cands[i].snr) == doctest::Approx(runs[i].peak_val));
            CHECK(cands[i].begin_sample == runs[i].begin);
            CHECK(cands[i].end_sample == runs[i].end);
        }
    }
}

TEST_CASE("pipeline is shift equivariant away from boundaries") {
    auto h = oracle::test_header(1);
    std::vector<float> noise = random_series(4096, 6);
    const std::size_t shift = 257;

    auto run = [&](std::size_t offset) {
        auto series = noise;
        for (std::size_t i = 0; i < 32; ++i) series[1000 + offset + i] += 4.0f;
        auto base = remove_baseline(series, 513);
        normalize_in_place(base);
        auto bank = boxcar_bank(base, 64);
        return find_peaks(bank[5].values, 6.0, 5, open_meta(bank[5].values.size()));
    };

    // shifting the injected feature shifts the candidate, same S/N modulo the
    // noise under it
    auto a = run(0);
    auto b = run(shift);
    REQUIRE(!a.empty());
    REQUIRE(!b.empty());
    CHECK(b[0].peak_sample - a[0].peak_sample == shift);
}

TEST_CASE("argmax over widths identifies the true top-hat width") {
    for (std::uint64_t w : {1u, 2u, 4u, 8u, 16u, 32u}) {
        std::vector<float> series(512, 0.0f);
        for (std::uint64_t i = 0; i < w; ++i) series[200 + i] = 3.0f;
        auto bank = boxcar_bank(series, 64);
        double best = -1.0;
        std::uint64_t best_w = 0;
        for (const auto& s : bank) {
            for (auto v : s.values) {
                if (v > best) {
                    best = v;
                    best_w = s.width;
                }
            }
        }
        CHECK(best_w == w);
    }
}

TEST_CASE("streaming normalize/boxcar helpers match the public ops bit for bit") {
    auto series = random_series(5000, 7);
    auto [normalized, rms] = normalize(series);
    auto bank = boxcar_bank(normalized, 64);

    const std::uint64_t n = series.size();
    const std::uint64_t n_blocks = (n + scan_block_size - 1) / scan_block_size;
    std::vector<double> sums(n);
    std::vector<double> maxima(n_blocks);
    const double rms2 = normalize_to_sums(series, sums, maxima);
    CHECK(rms2 == rms);

    for (std::uint64_t i = 0; i < n; ++i) CHECK(sums[i] == double(normalized[i]));
    // maxima really are the block maxima
    for (std::uint64_t b = 0; b < n_blocks; ++b) {
        double m = sums[b * scan_block_size];
        for (std::uint64_t i = b * scan_block_size; i < std::min(n, (b + 1) * scan_block_size); ++i)
            m = std::max(m, sums[i]);
        CHECK(maxima[b] == m);
    }

    std::uint32_t index = 0;
    for (std::uint64_t w = 1; w <= 64; w <<= 1, ++index) {
        const std::uint64_t m = n - w + 1;
        if (w > 1) boxcar_double_step(sums, m, w / 2, maxima);
        const double inv = 1.0 / std::sqrt(double(w));
        for (std::uint64_t i = 0; i < m; ++i) CHECK(sums[i] * inv == bank[index].values[i]);
        for (std::uint64_t b = 0; b * scan_block_size < m; ++b) {
            double mx = sums[b * scan_block_size];
            for (std::uint64_t i = b * scan_block_size; i < std::min(m, (b + 1) * scan_block_size);
                 ++i)
                mx = std::max(mx, sums[i]);
            CHECK(maxima[b] == mx);
        }
    }
}
