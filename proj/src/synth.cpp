#include "pulsegrid/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "pulsegrid/dedisp.hpp"

namespace pulsegrid {

namespace {

// Box-Muller over mt19937_64. std::normal_distribution is not pinned across
// standard libraries; this is, so fixed seeds give identical files everywhere.
class GaussianStream {
  public:
    explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform_open();
        double u2 = uniform_open();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

  private:
    double uniform_open() {
        // (0, 1]: avoids log(0).
        return (double(rng_() >> 11) + 1.0) * 0x1.0p-53;
    }

    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace

std::vector<float> generate_noise(const FilterbankHeader& header, std::uint64_t nsamples,
                                  float mean, float sigma, std::uint64_t seed) {
    if (sigma <= 0.0f) throw invalid_range_error("sigma must be positive");
    std::vector<float> grid(nsamples * header.nchans);
    GaussianStream gauss(seed);
    for (auto& cell : grid) cell = mean + sigma * float(gauss.next());
    return grid;
}

void inject_pulse(std::span<float> grid, const FilterbankHeader& header, const PulseSpec& pulse) {
    if (pulse.dm < 0.0) throw invalid_range_error("dm must be non-negative");
    if (pulse.width < 1) throw invalid_range_error("width must be at least 1");
    const std::uint64_t nsamples = grid.size() / header.nchans;
    const std::int64_t base = static_cast<std::int64_t>(std::floor(pulse.t0 / header.tsamp + 0.5));
    if (base < 0) throw out_of_range_error("pulse starts before the grid");

    for (std::uint32_t c = 0; c < header.nchans; ++c) {
        const std::int64_t start = base + delay_samples(pulse.dm, header, c);
        if (static_cast<std::uint64_t>(start) + pulse.width > nsamples)
            throw out_of_range_error("pulse track leaves the grid in channel " +
                                     std::to_string(c));
        for (std::uint64_t i = 0; i < pulse.width; ++i)
            grid[(static_cast<std::uint64_t>(start) + i) * header.nchans + c] += pulse.amplitude;
    }
}

double expected_snr(double amplitude, double sigma, std::uint32_t nchans,
                    std::uint64_t width_samples) {
    return amplitude * std::sqrt(double(nchans) * double(width_samples)) / sigma;
}

double amplitude_for_snr(double snr, double sigma, std::uint32_t nchans,
                         std::uint64_t width_samples) {
    return snr * sigma / std::sqrt(double(nchans) * double(width_samples));
}

}  // namespace pulsegrid
