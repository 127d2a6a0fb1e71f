#pragma once

#include <cstdint>
#include <random>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dtrade {

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

/// Deterministic PRNG. The standard library's distributions are
/// implementation-defined, so every draw used for seeded output goes
/// through these helpers instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed);
    std::uint64_t next();
    /// Uniform on [0, 1).
    double uniform();
    double normal();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Stable seed derivation for independent streams (per fold, trial, feature).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Runs body(i) for i in [0, n) on up to `jobs` threads. Callers write
/// results into slot i so assembly order never depends on scheduling.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

double mean(std::span<const double> v);
/// Sample standard deviation (n - 1 denominator).
double sample_sd(std::span<const double> v);
double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace dtrade
