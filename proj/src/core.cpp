#include "rtn/core.hpp"

#include <cmath>

namespace rtn {

std::vector<StateConfiguration> make_configurations(double baseline,
                                                    std::span<const double> amplitudes) {
    const std::size_t n = amplitudes.size();
    if (n > 31) throw std::invalid_argument("make_configurations: too many sources");
    std::vector<StateConfiguration> configs(std::size_t(1) << n);
    for (std::uint32_t mask = 0; mask < configs.size(); ++mask) {
        double total = baseline;
        for (std::size_t k = 0; k < n; ++k) {
            if (mask & (std::uint32_t(1) << k)) total += amplitudes[k];
        }
        configs[mask] = {mask, total};
    }
    return configs;
}

double gaussian_cdf(double z) {
    // Evaluate through erfc on the side that keeps full precision in the tail.
    static constexpr double inv_sqrt2 = 0.70710678118654752440;
    if (z < 0.0) return 0.5 * std::erfc(-z * inv_sqrt2);
    return 1.0 - 0.5 * std::erfc(z * inv_sqrt2);
}

double proximity(double d, double mu, double sigma) {
    if (!(sigma > 0.0)) throw InvalidSigma("proximity: sigma must be > 0");
    static constexpr double inv_sqrt2 = 0.70710678118654752440;
    // 2*(1 - Phi(x)) == erfc(x/sqrt(2)) for x >= 0.
    return std::erfc(std::abs(d - mu) / sigma * inv_sqrt2);
}

std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t stream_id) {
    std::uint64_t a = base_seed;
    std::uint64_t b = stream_id + 0x9E3779B97F4A7C15ull;
    std::uint64_t mixed = splitmix64_next(a) ^ splitmix64_next(b);
    return splitmix64_next(mixed);
}

double Rng::normal() {
    // u1 in (0, 1] keeps the log finite.
    double u1 = 1.0 - uniform01();
    double u2 = uniform01();
    static constexpr double two_pi = 6.28318530717958647692;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

double Rng::exponential(double mean) {
    if (!(mean > 0.0)) throw std::invalid_argument("exponential: mean must be > 0");
    return -mean * std::log(1.0 - uniform01());
}

std::int64_t Rng::poisson(double mean) {
    if (!(mean > 0.0)) throw std::invalid_argument("poisson: mean must be > 0");
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double product = 1.0;
    do {
        ++k;
        product *= uniform01();
    } while (product > limit);
    return k - 1;
}

double Rng::lognormal(double log_mean, double log_sd) {
    return std::exp(log_mean + log_sd * normal());
}

double Rng::log_uniform(double lo, double hi) {
    if (!(lo > 0.0) || !(hi > 0.0)) throw std::invalid_argument("log_uniform: bounds must be > 0");
    return std::exp(uniform(std::log(lo), std::log(hi)));
}

std::vector<std::pair<std::uint8_t, std::int64_t>> rle_encode(
    const std::vector<std::uint8_t>& states) {
    std::vector<std::pair<std::uint8_t, std::int64_t>> runs;
    for (std::uint8_t s : states) {
        if (runs.empty() || runs.back().first != s) {
            runs.emplace_back(s, 1);
        } else {
            ++runs.back().second;
        }
    }
    return runs;
}

std::vector<std::uint8_t> rle_decode(
    const std::vector<std::pair<std::uint8_t, std::int64_t>>& runs) {
    std::vector<std::uint8_t> states;
    for (const auto& [value, len] : runs) {
        if (len < 0) throw std::invalid_argument("rle_decode: negative run length");
        states.insert(states.end(), static_cast<std::size_t>(len), value);
    }
    return states;
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw EmptyInput("quantile_sorted: empty data");
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0 || lo + 1 >= sorted.size()) return sorted[lo];
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace rtn
