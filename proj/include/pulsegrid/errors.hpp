#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pulsegrid {

// Base class for everything this library throws on purpose.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- filterbank I/O ---
struct malformed_file_error : error {
    using error::error;
};
struct unsupported_format_error : error {
    using error::error;
};
struct truncation_error : error {
    using error::error;
};
struct invalid_plan_error : error {
    using error::error;
};
// Raised by the prefetching reader on the take() that would have yielded the
// failing chunk; carries which chunk broke.
struct read_error : error {
    std::size_t chunk_index;
    read_error(std::size_t index, const std::string& what)
        : error("chunk " + std::to_string(index) + ": " + what), chunk_index(index) {}
};

// --- synth ---
struct out_of_range_error : error {
    using error::error;
};

// --- rfi / detect ---
struct insufficient_statistics_error : error {
    using error::error;
};
struct degenerate_series_error : error {
    using error::error;
};

// --- dedisp ---
struct invalid_range_error : error {
    using error::error;
};
struct chunk_too_short_error : error {
    std::size_t trial_index;
    chunk_too_short_error(std::size_t trial, const std::string& what)
        : error("trial " + std::to_string(trial) + ": " + what), trial_index(trial) {}
};

// --- engine / pool ---
struct budget_exhausted_error : error {
    using error::error;
};
struct invalid_handle_error : error {
    using error::error;
};
struct config_error : error {
    using error::error;
};

}  // namespace pulsegrid
