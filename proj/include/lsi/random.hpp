#pragma once

#include <cstdint>
#include <random>

namespace lsi {

/// Seeded engine plus a standard-normal source. Not thread-safe; one per trial.
class Rng {
public:
    using result_type = std::mt19937_64::result_type;

    explicit Rng(std::uint64_t seed = 0) : _engine(seed) {}

    double gaussian() { return _normal(_engine); }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return _engine(); }

private:
    std::mt19937_64 _engine;
    std::normal_distribution<double> _normal{0.0, 1.0};
};

} // namespace lsi
