#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dtrade/data_model.hpp"

namespace testing {

inline std::string fixture(const std::string& name) { return std::string(DTRADE_FIXTURES) + "/" + name; }

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("dtrade_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
}

/// Copy of a fixture directory that a test may edit.
inline std::filesystem::path copy_fixture(const std::string& name, const std::string& tag) {
    auto dir = scratch(tag);
    std::filesystem::copy(fixture(name), dir, std::filesystem::copy_options::recursive);
    return dir;
}

inline dtrade::Dataset load(const std::string& name) {
    return dtrade::load_dataset(dtrade::DatasetPaths::in_directory(fixture(name)));
}

/// A world of `codes` countries (all in Europe, 1000 km apart) for hand-built tests.
/// Covariates are identical across countries unless a test edits them.
inline dtrade::DatasetTables small_world(const std::vector<std::string>& codes, const std::vector<dtrade::Year>& years) {
    dtrade::DatasetTables t;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        dtrade::CountryRecord c{codes[i], "Europe", {}};
        for (auto y : years) {
            dtrade::CountryYear cy;
            cy.gdp_ppp = 1e11 * static_cast<double>(i + 1);
            cy.population = 1e6 * static_cast<double>(i + 1);
            cy.internet_share = 0.8;
            cy.fixed_bb_share = 0.3;
            cy.mobile_bb_share = 0.6;
            cy.emissions_prod = 1e5;
            cy.emissions_cons = 1e5;
            c.years[y] = cy;
        }
        t.countries.push_back(c);
    }
    for (const auto& o : codes) {
        for (const auto& d : codes) {
            if (o != d) {
                dtrade::DyadRecord r;
                r.origin = o;
                r.dest = d;
                r.dist_km = 1000.0;
                t.dyads.push_back(r);
            }
        }
    }
    return t;
}

}  // namespace testing
