#pragma once

#include <cstdint>
#include <vector>

#include "dtrade/data_model.hpp"

namespace dtrade {

struct SynthOptions {
    std::uint64_t seed = 1;
    int n_countries = 30;
    int n_firms = 30;
    int n_brands = 100;
    int n_sectors = 6;
    double zero_rate = 0.5;
    /// Distance exponent of the consumption gravity kernel.
    double alpha = 1.0;
    std::vector<Year> years = {2020, 2021};
    /// Fraction of countries (lowest codes first) whose consumption is observed.
    double observed_share = 1.0;
    int n_hs4 = 40;
    bool physical_trade = true;
    bool reference_exports = true;
};

/// Gravity-consistent synthetic world: consumption proportional to
/// dest GDP x brand world revenue / distance^alpha with log-normal noise,
/// then the lowest-scoring pairs zeroed at `zero_rate`. The zero score penalizes
/// markets beyond 4000 km of the brand origin. Deterministic in the seed.
Dataset synth_world(const SynthOptions& options);

inline Dataset synth_world(std::uint64_t seed, int n_countries, int n_firms, int n_brands, int n_sectors,
                           double zero_rate) {
    SynthOptions o;
    o.seed = seed;
    o.n_countries = n_countries;
    o.n_firms = n_firms;
    o.n_brands = n_brands;
    o.n_sectors = n_sectors;
    o.zero_rate = zero_rate;
    return synth_world(o);
}

}  // namespace dtrade
