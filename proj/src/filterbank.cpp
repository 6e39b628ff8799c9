#include "pulsegrid/filterbank.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

namespace pulsegrid {

double FilterbankHeader::max_freq() const {
    return foff >= 0 ? channel_freq(nchans - 1) : fch1;
}

double FilterbankHeader::min_freq() const {
    return foff >= 0 ? fch1 : channel_freq(nchans - 1);
}

void FilterbankHeader::validate() const {
    if (nchans < 1) throw malformed_file_error("nchans must be >= 1");
    if (tsamp <= 0.0) throw malformed_file_error("tsamp must be positive");
    if (nbits != 8 && nbits != 16 && nbits != 32)
        throw unsupported_format_error("unsupported nbits=" + std::to_string(nbits) +
                                       " (expected 8, 16 or 32)");
    if (nifs != 1)
        throw unsupported_format_error("nifs=" + std::to_string(nifs) + " not supported");
    for (std::uint32_t c = 0; c < nchans; ++c) {
        if (channel_freq(c) <= 0.0)
            throw malformed_file_error("channel " + std::to_string(c) +
                                       " has non-positive frequency");
    }
}

namespace {

// SIGPROC header items are little-endian; every keyword is a 4-byte length
// followed by that many bytes of name, then the raw value.
enum class FieldType { Int32, Double, String, Char };

const std::map<std::string, FieldType>& keyword_table() {
    static const std::map<std::string, FieldType> table = {
        {"source_name", FieldType::String}, {"rawdatafile", FieldType::String},
        {"telescope_id", FieldType::Int32}, {"machine_id", FieldType::Int32},
        {"data_type", FieldType::Int32},    {"nchans", FieldType::Int32},
        {"nbits", FieldType::Int32},        {"nifs", FieldType::Int32},
        {"nsamples", FieldType::Int32},     {"barycentric", FieldType::Int32},
        {"pulsarcentric", FieldType::Int32},{"nbeams", FieldType::Int32},
        {"ibeam", FieldType::Int32},        {"fch1", FieldType::Double},
        {"foff", FieldType::Double},        {"tsamp", FieldType::Double},
        {"tstart", FieldType::Double},      {"az_start", FieldType::Double},
        {"za_start", FieldType::Double},    {"src_raj", FieldType::Double},
        {"src_dej", FieldType::Double},     {"refdm", FieldType::Double},
        {"period", FieldType::Double},      {"signed", FieldType::Char},
    };
    return table;
}

std::string offset_msg(const std::istream& in) {
    auto pos = const_cast<std::istream&>(in).tellg();
    return " (byte offset " + std::to_string(static_cast<long long>(pos)) + ")";
}

template <typename T>
T read_raw(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(value));
    if (!in) throw truncation_error("header ended mid-value" + offset_msg(in));
    return value;
}

std::string read_string(std::istream& in, std::size_t max_len = 256) {
    auto len = read_raw<std::int32_t>(in);
    if (len < 0 || static_cast<std::size_t>(len) > max_len)
        throw malformed_file_error("implausible string length " + std::to_string(len) +
                                   offset_msg(in));
    std::string s(static_cast<std::size_t>(len), '\0');
    in.read(s.data(), len);
    if (!in) throw truncation_error("header ended mid-string" + offset_msg(in));
    return s;
}

template <typename T>
void write_raw(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

void write_string(std::ostream& out, const std::string& s) {
    write_raw<std::int32_t>(out, static_cast<std::int32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

}  // namespace

std::uint32_t quantize_code(float value, const QuantSpec& q, std::uint32_t nbits) {
    const double max_code = (nbits >= 32) ? 0.0 : double((1u << nbits) - 1);
    double scaled = (double(value) - q.offset) / q.scale;
    double code = std::floor(scaled + 0.5);  // round half up
    if (code < 0.0) code = 0.0;
    if (code > max_code) code = max_code;
    return static_cast<std::uint32_t>(code);
}

FilterbankHeader parse_header(std::istream& in) {
    std::string sentinel;
    try {
        sentinel = read_string(in, 64);
    } catch (const error&) {
        throw malformed_file_error("stream does not start with a SIGPROC header");
    }
    if (sentinel != "HEADER_START")
        throw malformed_file_error("missing HEADER_START sentinel" + offset_msg(in));

    FilterbankHeader h;
    bool have_nsamples = false;
    std::int32_t explicit_nsamples = 0;

    for (;;) {
        std::string key = read_string(in, 64);
        if (key == "HEADER_END") break;

        auto it = keyword_table().find(key);
        if (it == keyword_table().end())
            throw malformed_file_error("unknown header keyword '" + key + "'" + offset_msg(in));

        switch (it->second) {
            case FieldType::Int32: {
                auto v = read_raw<std::int32_t>(in);
                if (key == "telescope_id") h.telescope_id = v;
                else if (key == "machine_id") h.machine_id = v;
                else if (key == "nchans") h.nchans = static_cast<std::uint32_t>(v);
                else if (key == "nbits") h.nbits = static_cast<std::uint32_t>(v);
                else if (key == "nifs") h.nifs = static_cast<std::uint32_t>(v);
                else if (key == "nsamples") { explicit_nsamples = v; have_nsamples = true; }
                break;  // other known int keywords are skipped
            }
            case FieldType::Double: {
                auto v = read_raw<double>(in);
                if (key == "fch1") h.fch1 = v;
                else if (key == "foff") h.foff = v;
                else if (key == "tsamp") h.tsamp = v;
                else if (key == "tstart") h.tstart = v;
                break;
            }
            case FieldType::String:
                if (key == "source_name") h.source_name = read_string(in);
                else read_string(in);
                break;
            case FieldType::Char:
                read_raw<char>(in);
                break;
        }
    }

    h.validate();

    // Derive nsamples from the payload size when the stream is seekable.
    auto data_pos = in.tellg();
    if (data_pos != std::istream::pos_type(-1)) {
        in.seekg(0, std::ios::end);
        auto end_pos = in.tellg();
        in.seekg(data_pos);
        if (end_pos > data_pos) {
            std::uint64_t payload = static_cast<std::uint64_t>(end_pos - data_pos);
            std::size_t row = h.bytes_per_sample();
            if (payload % row != 0)
                throw malformed_file_error("payload of " + std::to_string(payload) +
                                           " bytes is not a whole number of samples");
            h.nsamples = payload / row;
        } else if (have_nsamples) {
            h.nsamples = static_cast<std::uint64_t>(std::max(0, explicit_nsamples));
        }
    } else if (have_nsamples) {
        h.nsamples = static_cast<std::uint64_t>(std::max(0, explicit_nsamples));
    }
    return h;
}

std::size_t write_filterbank(const FilterbankHeader& header, std::span<const float> samples,
                             std::ostream& out, const QuantSpec& q) {
    header.validate();
    if (samples.size() % header.nchans != 0)
        throw invalid_plan_error("sample grid extent is not a multiple of nchans");

    auto start = out.tellp();
    write_string(out, "HEADER_START");
    write_string(out, "source_name");
    write_string(out, header.source_name);
    write_string(out, "telescope_id");
    write_raw<std::int32_t>(out, header.telescope_id);
    write_string(out, "machine_id");
    write_raw<std::int32_t>(out, header.machine_id);
    write_string(out, "data_type");
    write_raw<std::int32_t>(out, 1);
    write_string(out, "fch1");
    write_raw<double>(out, header.fch1);
    write_string(out, "foff");
    write_raw<double>(out, header.foff);
    write_string(out, "nchans");
    write_raw<std::int32_t>(out, static_cast<std::int32_t>(header.nchans));
    write_string(out, "nbits");
    write_raw<std::int32_t>(out, static_cast<std::int32_t>(header.nbits));
    write_string(out, "tstart");
    write_raw<double>(out, header.tstart);
    write_string(out, "tsamp");
    write_raw<double>(out, header.tsamp);
    write_string(out, "nifs");
    write_raw<std::int32_t>(out, static_cast<std::int32_t>(header.nifs));
    write_string(out, "HEADER_END");

    switch (header.nbits) {
        case 8: {
            std::vector<std::uint8_t> row(samples.size());
            for (std::size_t i = 0; i < samples.size(); ++i)
                row[i] = static_cast<std::uint8_t>(quantize_code(samples[i], q, 8));
            out.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(row.size()));
            break;
        }
        case 16: {
            std::vector<std::uint16_t> row(samples.size());
            for (std::size_t i = 0; i < samples.size(); ++i)
                row[i] = static_cast<std::uint16_t>(quantize_code(samples[i], q, 16));
            out.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(row.size() * 2));
            break;
        }
        case 32: {
            std::vector<float> row(samples.size());
            for (std::size_t i = 0; i < samples.size(); ++i)
                row[i] = static_cast<float>((double(samples[i]) - q.offset) / q.scale);
            out.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(row.size() * 4));
            break;
        }
    }
    if (!out) throw error("write failed");
    return static_cast<std::size_t>(out.tellp() - start);
}

std::vector<ChunkSpec> plan_chunks(std::uint64_t nsamples, std::uint64_t chunk_len,
                                   std::uint64_t overlap) {
    if (nsamples == 0) throw invalid_plan_error("empty file");
    if (chunk_len == 0) throw invalid_plan_error("chunk_len must be positive");
    if (overlap >= chunk_len)
        throw invalid_plan_error("overlap " + std::to_string(overlap) +
                                 " must be smaller than chunk_len " + std::to_string(chunk_len));

    std::vector<ChunkSpec> plan;
    if (chunk_len >= nsamples) {
        plan.push_back({0, 0, nsamples, 0, 0, nsamples});
        return plan;
    }

    const std::uint64_t stride = chunk_len - overlap;
    for (std::uint64_t start = 0;; start += stride) {
        ChunkSpec spec;
        spec.index = plan.size();
        spec.start_sample = start;
        spec.valid_begin = start;
        if (start + chunk_len >= nsamples) {
            spec.length = nsamples - start;
            spec.overlap = 0;
            spec.valid_end = nsamples;
            plan.push_back(spec);
            break;
        }
        spec.length = chunk_len;
        spec.overlap = overlap;
        spec.valid_end = start + stride;
        plan.push_back(spec);
    }
    return plan;
}

FilterbankReader::FilterbankReader(const std::string& path) : path_(path) {
    file_.open(path, std::ios::binary);
    if (!file_) throw error("cannot open '" + path + "'");
    header_ = parse_header(file_);
    data_offset_ = static_cast<std::uint64_t>(file_.tellg());
}

Chunk FilterbankReader::read_chunk(const ChunkSpec& spec) {
    if (spec.start_sample + spec.length > header_.nsamples)
        throw invalid_plan_error("chunk " + std::to_string(spec.index) +
                                 " extends past the end of '" + path_ + "'");
    Chunk chunk;
    chunk.spec = spec;
    chunk.nchans = header_.nchans;
    const std::size_t ncells = spec.length * header_.nchans;
    chunk.data.resize(ncells);

    const std::size_t row = header_.bytes_per_sample();
    file_.clear();
    file_.seekg(static_cast<std::streamoff>(data_offset_ + spec.start_sample * row));

    std::vector<char> raw(spec.length * row);
    file_.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(file_.gcount()) != raw.size())
        throw truncation_error(
            "short read in '" + path_ + "' at sample " + std::to_string(spec.start_sample) +
            " (byte offset " + std::to_string(data_offset_ + spec.start_sample * row) + ", got " +
            std::to_string(file_.gcount()) + " of " + std::to_string(raw.size()) + " bytes)");

    switch (header_.nbits) {
        case 8: {
            auto* p = reinterpret_cast<const std::uint8_t*>(raw.data());
            for (std::size_t i = 0; i < ncells; ++i) chunk.data[i] = float(p[i]);
            break;
        }
        case 16: {
            auto* p = reinterpret_cast<const std::uint16_t*>(raw.data());
            for (std::size_t i = 0; i < ncells; ++i) chunk.data[i] = float(p[i]);
            break;
        }
        case 32:
            std::memcpy(chunk.data.data(), raw.data(), ncells * 4);
            break;
    }
    return chunk;
}

std::vector<float> FilterbankReader::read_all() {
    ChunkSpec whole{0, 0, header_.nsamples, 0, 0, header_.nsamples};
    return read_chunk(whole).data;
}

PrefetchingReader::PrefetchingReader(const std::string& path, std::vector<ChunkSpec> plan,
                                     const PrefetchOptions& options)
    : reader_(path), plan_(std::move(plan)), options_(options) {
    for (const auto& spec : plan_) {
        if (spec.start_sample + spec.length > reader_.header().nsamples)
            throw invalid_plan_error("plan inconsistent with header of '" + path + "'");
    }
    if (options_.lookahead > 0 && !plan_.empty())
        producer_ = std::thread([this] { producer_loop(); });
}

PrefetchingReader::~PrefetchingReader() {
    if (producer_.joinable()) {
        {
            std::lock_guard lock(mutex_);
            stop_ = true;
        }
        slot_free_.notify_all();
        producer_.join();
    }
}

Chunk PrefetchingReader::read_one(std::size_t plan_index) {
    if (options_.read_delay.count() > 0) std::this_thread::sleep_for(options_.read_delay);
    return reader_.read_chunk(plan_[plan_index]);
}

void PrefetchingReader::producer_loop() {
    for (std::size_t i = 0; i < plan_.size(); ++i) {
        {
            // Reserve a slot before reading so at most `lookahead` chunks sit
            // fully read ahead of the consumer.
            std::unique_lock lock(mutex_);
            slot_free_.wait(lock, [&] { return stop_ || buffered_.size() < options_.lookahead; });
            if (stop_) return;
        }
        Chunk chunk;
        try {
            chunk = read_one(i);
        } catch (...) {
            std::lock_guard lock(mutex_);
            producer_error_ = std::current_exception();
            error_index_ = i;
            done_ = true;
            item_ready_.notify_all();
            return;
        }
        {
            std::lock_guard lock(mutex_);
            buffered_.push_back(std::move(chunk));
        }
        item_ready_.notify_all();
    }
    std::lock_guard lock(mutex_);
    done_ = true;
    item_ready_.notify_all();
}

std::optional<Chunk> PrefetchingReader::take() {
    if (next_take_ >= plan_.size()) return std::nullopt;

    if (options_.lookahead == 0) {
        try {
            Chunk chunk = read_one(next_take_);
            ++next_take_;
            return chunk;
        } catch (const error& e) {
            throw read_error(next_take_, e.what());
        }
    }

    std::unique_lock lock(mutex_);
    item_ready_.wait(lock, [&] { return !buffered_.empty() || done_; });
    if (buffered_.empty()) {
        if (producer_error_) {
            auto err = producer_error_;
            std::size_t index = error_index_;
            producer_error_ = nullptr;
            next_take_ = plan_.size();
            try {
                std::rethrow_exception(err);
            } catch (const std::exception& e) {
                throw read_error(index, e.what());
            }
        }
        return std::nullopt;
    }
    Chunk chunk = std::move(buffered_.front());
    buffered_.erase(buffered_.begin());
    ++next_take_;
    lock.unlock();
    slot_free_.notify_one();
    return chunk;
}

}  // namespace pulsegrid
