#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pulsegrid/filterbank.hpp"

namespace pulsegrid {

/// A dispersed top-hat pulse to inject into a synthetic sample grid.
struct PulseSpec {
    double dm = 0.0;           // pc cm^-3
    double t0 = 0.0;           // arrival time at the reference (highest) frequency, seconds
    std::uint64_t width = 1;   // samples per channel
    float amplitude = 1.0f;    // added per cell
};

/// i.i.d. Gaussian noise grid, time-major, nsamples x header.nchans.
/// Deterministic for a fixed seed on every platform (explicit Box-Muller over
/// mt19937_64, not the library's normal_distribution).
std::vector<float> generate_noise(const FilterbankHeader& header, std::uint64_t nsamples,
                                  float mean, float sigma, std::uint64_t seed);

/// Adds `amplitude` to `width` consecutive samples per channel, starting at
/// round(t0/tsamp) + delay_samples(dm, channel). Throws out_of_range_error if
/// the dispersed track would leave the grid.
void inject_pulse(std::span<float> grid, const FilterbankHeader& header, const PulseSpec& pulse);

/// Matched-filter S/N of a top-hat pulse recovered at its true DM and width:
/// amplitude * sqrt(nchans * width) / sigma.
double expected_snr(double amplitude, double sigma, std::uint32_t nchans,
                    std::uint64_t width_samples);

/// Amplitude that yields `snr` under expected_snr; convenience for tests and
/// the inject CLI.
double amplitude_for_snr(double snr, double sigma, std::uint32_t nchans,
                         std::uint64_t width_samples);

}  // namespace pulsegrid
