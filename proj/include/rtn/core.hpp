#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rtn {

struct InvalidSigma : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DegenerateSignal : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct LengthMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NoPairs : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Uniformly sampled trace, values in arbitrary signal units.
struct Signal {
    std::vector<double> values;
    double sample_period = 1.0;  // time units per sample, > 0

    std::size_t size() const { return values.size(); }
    double duration() const { return static_cast<double>(values.size()) * sample_period; }
};

/// One two-state fluctuator: step amplitude plus mean dwell time in each state.
struct RtnSource {
    double amplitude = 0.0;  // > 0, signal units
    double mean_on = 0.0;    // > 0, time units
    double mean_off = 0.0;   // > 0, time units
};

/// Per-sample on/off state of a single source, aligned with a Signal.
struct ActivityTrace {
    std::vector<std::uint8_t> states;  // 0 = off, 1 = on

    std::size_t size() const { return states.size(); }
};

/// One discrete signal level, as estimated from data.
struct Level {
    double mu = 0.0;
    double sigma = 0.0;  // > 0
    std::int64_t count = 0;
};

/// One of the 2^N on/off combinations of N sources.
///
/// total_amplitude is always computed as baseline plus the amplitudes of the
/// set bits added in ascending bit order; reconstruction checks rely on that
/// summation order being reproducible bit for bit.
struct StateConfiguration {
    std::uint32_t on_mask = 0;
    double total_amplitude = 0.0;
};

/// All 2^N configurations for the given baseline and amplitudes, in mask order.
std::vector<StateConfiguration> make_configurations(double baseline,
                                                    std::span<const double> amplitudes);

/// Standard normal CDF. Absolute error below 1e-12 over the full double range.
double gaussian_cdf(double z);

/// Two-sided tail mass of d under N(mu, sigma^2): 2*(1 - Phi(|d-mu|/sigma)).
/// Equals 1 when d == mu and decays monotonically with |d - mu|.
/// Throws InvalidSigma when sigma <= 0.
double proximity(double d, double mu, double sigma);

// --- deterministic PRNG ----------------------------------------------------
//
// The project-wide generator is splitmix64: a 64-bit splittable PRNG whose
// output depends only on the seed, never on platform or standard library.
// derive_seed gives independent, reproducible streams keyed by (base, stream).

std::uint64_t splitmix64_next(std::uint64_t& state);

/// Deterministic stream derivation: same inputs, same stream, everywhere.
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t stream_id);

/// Seeded generator with hand-rolled samplers so that sequences are
/// platform-independent (std:: distributions are not).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    Rng(std::uint64_t base_seed, std::uint64_t stream_id)
        : state_(derive_seed(base_seed, stream_id)) {}

    std::uint64_t next_u64() { return splitmix64_next(state_); }

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Standard normal via Box-Muller (no cached spare; one draw, two uniforms).
    double normal();

    /// Exponential with the given mean (> 0).
    double exponential(double mean);

    /// Poisson via Knuth's product method; intended for moderate means.
    std::int64_t poisson(double mean);

    double lognormal(double log_mean, double log_sd);

    /// exp(Uniform(log lo, log hi)); lo, hi > 0.
    double log_uniform(double lo, double hi);

  private:
    std::uint64_t state_;
};

// --- run-length encoding ---------------------------------------------------

/// (value, run length) pairs, in order. Empty input encodes to empty output.
std::vector<std::pair<std::uint8_t, std::int64_t>> rle_encode(
    const std::vector<std::uint8_t>& states);

std::vector<std::uint8_t> rle_decode(
    const std::vector<std::pair<std::uint8_t, std::int64_t>>& runs);

// --- order statistics ------------------------------------------------------

/// Quantile with linear interpolation on an ascending-sorted sample.
/// q in [0, 1]; throws EmptyInput on empty data.
double quantile_sorted(std::span<const double> sorted, double q);

inline double median_sorted(std::span<const double> sorted) {
    return quantile_sorted(sorted, 0.5);
}

}  // namespace rtn
