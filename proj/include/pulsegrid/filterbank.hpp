#pragma once

#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "pulsegrid/errors.hpp"

namespace pulsegrid {

/// Observation metadata of a SIGPROC filterbank file.
///
/// Frequencies are in MHz; `foff` is negative when channel 0 is the highest
/// channel (the usual convention). `nsamples` is derived from the payload
/// size when the file does not carry it explicitly.
struct FilterbankHeader {
    std::string source_name;
    int telescope_id = 0;
    int machine_id = 0;
    double fch1 = 0.0;      // MHz, first channel
    double foff = 0.0;      // MHz per channel step
    std::uint32_t nchans = 0;
    std::uint32_t nbits = 0;  // 8, 16 or 32 (32 = IEEE float)
    double tsamp = 0.0;     // seconds
    double tstart = 0.0;    // MJD
    std::uint32_t nifs = 1;
    std::uint64_t nsamples = 0;

    double channel_freq(std::uint32_t channel) const { return fch1 + foff * channel; }
    double max_freq() const;
    double min_freq() const;
    std::size_t bytes_per_sample() const { return std::size_t(nchans) * (nbits / 8); }

    /// Throws unsupported_format_error / malformed_file_error when the header
    /// violates its invariants (nbits, nifs, positive frequencies, ...).
    void validate() const;
};

/// One processing block of a chunked file. `valid_range` is the half-open
/// absolute-sample interval in which this chunk is the authoritative source
/// of candidates; valid ranges of a plan tile [0, nsamples) exactly.
struct ChunkSpec {
    std::size_t index = 0;
    std::uint64_t start_sample = 0;
    std::uint64_t length = 0;
    std::uint64_t overlap = 0;  // samples shared with the next chunk
    std::uint64_t valid_begin = 0;
    std::uint64_t valid_end = 0;
};

/// A dense time-major sample block: data[t * nchans + c], already widened to
/// float regardless of the on-disk nbits.
struct Chunk {
    ChunkSpec spec;
    std::uint32_t nchans = 0;
    std::vector<float> data;

    float at(std::uint64_t sample, std::uint32_t channel) const {
        return data[sample * nchans + channel];
    }
};

/// Affine quantization used when writing samples narrower than 32 bits:
/// code = clip(round_half_up((value - offset) / scale), [0, 2^nbits - 1]).
/// For nbits = 32 the scaled value is stored as float, unrounded and unclipped.
struct QuantSpec {
    double offset = 0.0;
    double scale = 1.0;
};

/// Reference scalar quantizer (also used by tests as the oracle).
std::uint32_t quantize_code(float value, const QuantSpec& q, std::uint32_t nbits);

/// Parses a SIGPROC header from the stream. On return the stream is
/// positioned at the first data byte. If the stream is seekable, nsamples is
/// derived from the payload size (and the payload must divide evenly into
/// whole samples).
FilterbankHeader parse_header(std::istream& in);

/// Writes header + quantized payload; returns total bytes written.
/// `samples` is time-major, length nsamples_out * header.nchans.
std::size_t write_filterbank(const FilterbankHeader& header, std::span<const float> samples,
                             std::ostream& out, const QuantSpec& q = {});

/// Splits [0, nsamples) into overlapping chunks. Every chunk except possibly
/// the last has length `chunk_len`; consecutive chunks share exactly
/// `overlap` samples; valid ranges tile [0, nsamples). chunk_len > nsamples
/// degenerates to a single full-file chunk with overlap 0.
std::vector<ChunkSpec> plan_chunks(std::uint64_t nsamples, std::uint64_t chunk_len,
                                   std::uint64_t overlap);

/// Synchronous whole-file access to a filterbank file.
class FilterbankReader {
  public:
    explicit FilterbankReader(const std::string& path);

    const FilterbankHeader& header() const { return header_; }
    const std::string& path() const { return path_; }

    /// Reads one chunk; samples widened to float.
    Chunk read_chunk(const ChunkSpec& spec);

    /// Reads the whole payload (mostly for tests and small files).
    std::vector<float> read_all();

  private:
    std::string path_;
    std::ifstream file_;
    FilterbankHeader header_;
    std::uint64_t data_offset_ = 0;
};

struct PrefetchOptions {
    std::size_t lookahead = 1;  // 0 = fully synchronous
    // Artificial per-chunk read latency, used by benchmarks and the I/O
    // overlap tests; 0 for normal operation.
    std::chrono::milliseconds read_delay{0};
};

/// Streams the chunks of a plan in order. With lookahead > 0 an internal
/// producer thread keeps up to `lookahead` chunks read ahead of the consumer
/// (lookahead 1 = classic double buffering). Chunk contents are identical to
/// synchronous reads. Single-consumer.
class PrefetchingReader {
  public:
    PrefetchingReader(const std::string& path, std::vector<ChunkSpec> plan,
                      const PrefetchOptions& options = {});
    ~PrefetchingReader();

    PrefetchingReader(const PrefetchingReader&) = delete;
    PrefetchingReader& operator=(const PrefetchingReader&) = delete;

    const FilterbankHeader& header() const { return reader_.header(); }

    /// Next chunk in plan order, or nullopt after the last one. A failed read
    /// surfaces here as read_error carrying the chunk index.
    std::optional<Chunk> take();

  private:
    void producer_loop();
    Chunk read_one(std::size_t plan_index);

    FilterbankReader reader_;
    std::vector<ChunkSpec> plan_;
    PrefetchOptions options_;
    std::size_t next_take_ = 0;

    // producer state (lookahead > 0)
    std::mutex mutex_;
    std::condition_variable slot_free_;
    std::condition_variable item_ready_;
    std::vector<Chunk> buffered_;
    std::exception_ptr producer_error_;
    std::size_t error_index_ = 0;
    bool done_ = false;
    bool stop_ = false;
    std::thread producer_;
};

}  // namespace pulsegrid
