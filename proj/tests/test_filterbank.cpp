#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "pulsegrid/filterbank.hpp"

using namespace pulsegrid;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / ("pg_fbio_" + name)).string();
}

void write_file(const std::string& path, const FilterbankHeader& h,
                const std::vector<float>& samples, const QuantSpec& q = {}) {
    std::ofstream out(path, std::ios::binary);
    write_filterbank(h, samples, out, q);
}

}  // namespace

TEST_CASE("header round trip preserves fields and derives nsamples") {
    auto h = oracle::test_header(64, 1500.0, -1.0, 6.4e-5, 8);
    std::vector<float> samples(64 * 100, 0.0f);
    std::stringstream buf;
    write_filterbank(h, samples, buf);

    auto parsed = parse_header(buf);
    CHECK(parsed.nchans == 64);
    CHECK(parsed.nbits == 8);
    CHECK(parsed.tsamp == doctest::Approx(6.4e-5));
    CHECK(parsed.fch1 == doctest::Approx(1500.0));
    CHECK(parsed.foff == doctest::Approx(-1.0));
    CHECK(parsed.nifs == 1);
    CHECK(parsed.source_name == "test");
    // payload bytes / nchans for 8-bit data
    CHECK(parsed.nsamples == 100);
    // stream is left at the first data byte
    std::vector<char> payload(64);
    buf.read(payload.data(), 64);
    CHECK(buf.gcount() == 64);
}

TEST_CASE("missing sentinel is a malformed file") {
    std::stringstream buf;
    buf << "this is not a filterbank";
    CHECK_THROWS_AS(parse_header(buf), malformed_file_error);
}

TEST_CASE("nbits=4 is unsupported") {
    auto h = oracle::test_header();
    h.nbits = 4;
    std::stringstream buf;
    CHECK_THROWS_AS(write_filterbank(h, {}, buf), unsupported_format_error);

    // hand-build a header declaring nbits=4
    auto good = oracle::test_header(64, 1500.0, -1.0, 6.4e-5, 8);
    std::stringstream raw;
    write_filterbank(good, std::vector<float>(64, 0.0f), raw);
    std::string bytes = raw.str();
    // patch the nbits value in place: the value follows the keyword bytes
    auto pos = bytes.find("nbits");
    REQUIRE(pos != std::string::npos);
    std::int32_t four = 4;
    bytes.replace(pos + 5, 4, reinterpret_cast<const char*>(&four), 4);
    std::stringstream patched(bytes);
    CHECK_THROWS_AS(parse_header(patched), unsupported_format_error);
}

TEST_CASE("truncated header reports truncation") {
    auto h = oracle::test_header(64, 1500.0, -1.0, 6.4e-5, 8);
    std::stringstream raw;
    write_filterbank(h, std::vector<float>(64, 0.0f), raw);
    std::string bytes = raw.str().substr(0, 40);  // cut mid-keyword
    std::stringstream cut(bytes);
    CHECK_THROWS_AS(parse_header(cut), truncation_error);
}

TEST_CASE("zero grid writes the zero-offset code") {
    auto h = oracle::test_header(64, 1500.0, -1.0, 6.4e-5, 8);
    std::vector<float> samples(64 * 100, 0.0f);
    std::stringstream buf;
    write_filterbank(h, samples, buf);
    auto parsed = parse_header(buf);
    CHECK(parsed.nsamples == 100);
    std::string payload((std::istreambuf_iterator<char>(buf)), std::istreambuf_iterator<char>());
    CHECK(payload.size() == 6400);
    for (char b : payload) CHECK(b == 0);
}

TEST_CASE("write then read round-trips the payload bit-identically") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<float> dist(0.0f, 255.0f);
    for (std::uint32_t nbits : {8u, 16u, 32u}) {
        auto h = oracle::test_header(8, 1500.0, -1.0, 6.4e-5, nbits);
        std::vector<float> samples(8 * 50);
        for (auto& s : samples) s = dist(rng);

        std::stringstream buf;
        write_filterbank(h, samples, buf);
        std::string once = buf.str();

        // quantize(s) reproduced exactly: parse + read, write again, compare
        const std::string path = temp_path("roundtrip.fil");
        std::ofstream(path, std::ios::binary) << once;
        FilterbankReader reader(path);
        auto data = reader.read_all();
        std::stringstream buf2;
        write_filterbank(reader.header(), data, buf2);
        CHECK(buf2.str() == once);
        fs::remove(path);
    }
}

TEST_CASE("out-of-range values clip to the max code") {
    auto h = oracle::test_header(4, 1500.0, -1.0, 6.4e-5, 8);
    std::vector<float> samples = {300.0f, -5.0f, 128.2f, 254.7f};
    std::stringstream buf;
    write_filterbank(h, samples, buf);
    parse_header(buf);
    std::string payload((std::istreambuf_iterator<char>(buf)), std::istreambuf_iterator<char>());
    REQUIRE(payload.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        auto expect = oracle::quantize(samples[i], 0.0, 1.0, 8);
        CHECK(std::uint8_t(payload[i]) == expect);
    }
    CHECK(std::uint8_t(payload[0]) == 255);  // clipped, no error
    CHECK(std::uint8_t(payload[1]) == 0);
    CHECK(std::uint8_t(payload[3]) == 255);  // round half up then clip
}

TEST_CASE("plan_chunks matches the worked example") {
    auto plan = plan_chunks(1000, 400, 100);
    REQUIRE(plan.size() == 3);
    CHECK(plan[0].start_sample == 0);
    CHECK(plan[1].start_sample == 300);
    CHECK(plan[2].start_sample == 600);
    CHECK(plan[0].valid_begin == 0);
    CHECK(plan[0].valid_end == 300);
    CHECK(plan[1].valid_end == 600);
    CHECK(plan[2].valid_end == 1000);
    CHECK(plan[0].length == 400);
    CHECK(plan[1].length == 400);
    CHECK(plan[2].length == 400);
    CHECK(plan[0].overlap == 100);
    CHECK(plan[2].overlap == 0);
}

TEST_CASE("plan_chunks degenerates to one chunk when the file is short") {
    auto plan = plan_chunks(500, 800, 100);
    REQUIRE(plan.size() == 1);
    CHECK(plan[0].start_sample == 0);
    CHECK(plan[0].length == 500);
    CHECK(plan[0].overlap == 0);
    CHECK(plan[0].valid_end == 500);
}

TEST_CASE("plan_chunks rejects overlap >= chunk_len") {
    CHECK_THROWS_AS(plan_chunks(1000, 100, 100), invalid_plan_error);
    CHECK_THROWS_AS(plan_chunks(1000, 100, 200), invalid_plan_error);
}

TEST_CASE("valid ranges tile the file exactly") {
    auto check_tiling = [](std::uint64_t nsamples, std::uint64_t chunk_len, std::uint64_t overlap) {
        auto plan = plan_chunks(nsamples, chunk_len, overlap);
        std::uint64_t cursor = 0;
        for (std::size_t i = 0; i < plan.size(); ++i) {
            CHECK(plan[i].index == i);
            CHECK(plan[i].valid_begin == cursor);
            CHECK(plan[i].valid_end > plan[i].valid_begin);
            CHECK(plan[i].valid_begin >= plan[i].start_sample);
            CHECK(plan[i].valid_end <= plan[i].start_sample + plan[i].length);
            CHECK(plan[i].overlap < plan[i].length);
            if (i + 1 < plan.size()) {
                // consecutive chunks share exactly `overlap` samples
                CHECK(plan[i].start_sample + plan[i].length - plan[i + 1].start_sample ==
                      plan[i].overlap);
                CHECK(plan[i].length == chunk_len);
            }
            cursor = plan[i].valid_end;
        }
        CHECK(cursor == nsamples);
    };

    check_tiling(10000, 1024, 200);  // exhaustive interval check from the worked example

    std::mt19937 rng(11);
    for (int it = 0; it < 200; ++it) {
        std::uint64_t chunk_len = 2 + rng() % 1000;
        std::uint64_t overlap = rng() % chunk_len;
        std::uint64_t nsamples = 1 + rng() % 20000;
        check_tiling(nsamples, chunk_len, overlap);
    }
}

TEST_CASE("prefetching reader yields the same chunks at any lookahead") {
    auto h = oracle::test_header(16, 1500.0, -1.0, 6.4e-5, 8);
    std::vector<float> samples(16 * 3000);
    std::mt19937 rng(3);
    for (auto& s : samples) s = float(rng() % 256);

    const std::string path = temp_path("prefetch.fil");
    write_file(path, h, samples);
    auto plan = plan_chunks(3000, 700, 150);

    std::vector<std::vector<float>> reference;
    {
        FilterbankReader reader(path);
        for (const auto& spec : plan) reference.push_back(reader.read_chunk(spec).data);
    }

    for (std::size_t lookahead : {0u, 1u, 2u, 5u}) {
        PrefetchingReader reader(path, plan, {lookahead, {}});
        std::size_t i = 0;
        std::vector<float> concat;
        while (auto chunk = reader.take()) {
            CHECK(chunk->data == reference[i]);
            CHECK(chunk->spec.index == i);
            auto begin = chunk->spec.valid_begin - chunk->spec.start_sample;
            auto end = chunk->spec.valid_end - chunk->spec.start_sample;
            concat.insert(concat.end(), chunk->data.begin() + begin * 16,
                          chunk->data.begin() + end * 16);
            ++i;
        }
        CHECK(i == plan.size());
        // valid-range slices reproduce the full payload
        FilterbankReader whole(path);
        CHECK(concat == whole.read_all());
    }
    fs::remove(path);
}

TEST_CASE("prefetch overlaps read latency with consumer work") {
    auto h = oracle::test_header(8, 1500.0, -1.0, 6.4e-5, 8);
    const std::uint64_t nsamples = 800;
    std::vector<float> samples(8 * nsamples, 1.0f);
    const std::string path = temp_path("prefetch_timing.fil");
    write_file(path, h, samples);
    auto plan = plan_chunks(nsamples, 100, 0);
    const std::size_t n_chunks = plan.size();

    const auto read_delay = std::chrono::milliseconds(20);
    const auto work = std::chrono::milliseconds(45);  // W >> R

    auto run = [&](std::size_t lookahead) {
        auto t0 = std::chrono::steady_clock::now();
        PrefetchingReader reader(path, plan, {lookahead, read_delay});
        while (auto chunk = reader.take()) std::this_thread::sleep_for(work);
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    };

    const double serial_model = double(n_chunks) * double((read_delay + work).count());
    const double overlapped_model =
        double(read_delay.count()) + double(n_chunks) * double(work.count());

    const double buffered = run(1);
    CHECK(buffered <= overlapped_model * 1.10 + 30.0);
    CHECK(buffered < serial_model);
    fs::remove(path);
}

TEST_CASE("mid-stream I/O failure surfaces as read_error with the chunk index") {
    auto h = oracle::test_header(8, 1500.0, -1.0, 6.4e-5, 8);
    std::vector<float> samples(8 * 1000, 7.0f);
    const std::string path = temp_path("truncated.fil");
    write_file(path, h, samples);
    auto plan = plan_chunks(1000, 250, 0);

    PrefetchingReader reader(path, plan, {0, {}});
    auto first = reader.take();
    REQUIRE(first.has_value());

    // Chop the file mid-payload: later chunks cannot be read in full.
    fs::resize_file(path, fs::file_size(path) - 3000);
    bool threw = false;
    try {
        while (reader.take()) {
        }
    } catch (const read_error& e) {
        threw = true;
        CHECK(e.chunk_index >= 1);
        CHECK(e.chunk_index < plan.size());
    }
    CHECK(threw);
    fs::remove(path);
}
