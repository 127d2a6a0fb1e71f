#include "dtrade/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtrade/util.hpp"

namespace dtrade {

namespace {

constexpr double kReachKm = 4000.0;

std::string country_code(int i) {
    std::string s(3, 'A');
    s[0] = static_cast<char>('A' + (i / 676) % 26);
    s[1] = static_cast<char>('A' + (i / 26) % 26);
    s[2] = static_cast<char>('A' + i % 26);
    return s;
}

std::string padded(const char* prefix, int i, int width) {
    std::string digits = std::to_string(i);
    return prefix + std::string(std::max(0, width - static_cast<int>(digits.size())), '0') + digits;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::size_t weighted_pick(Rng& rng, const std::vector<double>& w) {
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < w.size(); ++i) {
        u -= w[i];
        if (u < 0.0) return i;
    }
    return w.size() - 1;
}

struct CountryState {
    double x, y;
    double gdp;
    double gdppc;
    double growth;
    double emission_intensity;
    double emission_trend;
    double consumption_tilt;
    double internet, fixed_bb, mobile_bb;
    int language;
    int colonizer;  // -1 when never colonized
};

}  // namespace

Dataset synth_world(const SynthOptions& o) {
    if (o.n_countries < 2 || o.n_firms < 2 || o.n_brands < 2 || o.n_sectors < 2) {
        throw Error("synth_world: counts must be >= 2");
    }
    if (o.n_sectors > static_cast<int>(default_sectors().size())) {
        throw Error("synth_world: at most " + std::to_string(default_sectors().size()) + " sectors");
    }
    if (!(o.zero_rate >= 0.0 && o.zero_rate < 1.0)) throw Error("synth_world: zero_rate must be in [0, 1)");
    if (o.years.empty()) throw Error("synth_world: year range is empty");

    Rng rng(derive_seed(o.seed, 0x5EED));
    const int nc = o.n_countries;
    const Year base_year = o.years.front();

    DatasetTables t;
    std::vector<CountryState> cs(nc);
    const auto& regions = region_table();
    for (int i = 0; i < nc; ++i) {
        auto& c = cs[i];
        c.x = rng.uniform() * 15000.0;
        c.y = rng.uniform() * 8000.0;
        c.gdp = std::exp(std::log(3e11) + 1.3 * rng.normal());
        c.gdppc = std::exp(std::log(15000.0) + 0.9 * rng.normal());
        c.growth = 0.025 + 0.02 * rng.normal();
        c.emission_intensity = std::exp(std::log(3e-4) + 0.4 * rng.normal());
        c.emission_trend = -0.005 + 0.03 * rng.normal();
        c.consumption_tilt = 0.1 * rng.normal();
        double z = std::log(c.gdppc / 15000.0);
        c.internet = logistic(0.8 + 1.2 * z + 0.4 * rng.normal());
        c.fixed_bb = logistic(-1.5 + 1.2 * z + 0.4 * rng.normal());
        c.mobile_bb = logistic(0.2 + 1.0 * z + 0.4 * rng.normal());
        c.language = static_cast<int>(rng.below(6));
        c.colonizer = -1;
    }
    for (int i = 5; i < nc; ++i) {
        if (rng.uniform() < 0.4) cs[i].colonizer = static_cast<int>(rng.below(std::min(5, nc)));
    }

    for (int i = 0; i < nc; ++i) {
        CountryRecord rec{country_code(i), regions[static_cast<std::size_t>(cs[i].x / 3000.0) % regions.size()], {}};
        for (Year y : o.years) {
            double dt = y - base_year;
            double gdp = cs[i].gdp * std::exp(cs[i].growth * dt);
            double pop = cs[i].gdp / cs[i].gdppc;
            double em = pop * std::pow(cs[i].gdppc, 0.6) * cs[i].emission_intensity * std::exp(cs[i].emission_trend * dt);
            double em_cons = em * std::exp(cs[i].consumption_tilt + 0.01 * dt * cs[i].consumption_tilt);
            rec.years[y] = CountryYear{gdp, pop, cs[i].internet, cs[i].fixed_bb, cs[i].mobile_bb, em, em_cons};
        }
        t.countries.push_back(std::move(rec));
    }

    auto dist = [&](int a, int b) {
        return std::max(100.0, std::hypot(cs[a].x - cs[b].x, cs[a].y - cs[b].y));
    };
    for (int a = 0; a < nc; ++a) {
        for (int b = a + 1; b < nc; ++b) {
            DyadRecord d;
            d.dist_km = std::round(dist(a, b));
            d.contiguity = d.dist_km < 1200.0;
            d.comlang_official = cs[a].language == cs[b].language;
            d.comlang_ethno = d.comlang_official || rng.uniform() < 0.1;
            d.colony_ever = cs[a].colonizer == b || cs[b].colonizer == a;
            d.comcol_post45 = cs[a].colonizer >= 0 && cs[a].colonizer == cs[b].colonizer;
            d.curcol = d.colony_ever && rng.uniform() < 0.1;
            d.col_post45 = d.colony_ever && rng.uniform() < 0.5;
            d.same_country_ever = rng.uniform() < 0.03;
            d.origin = country_code(a);
            d.dest = country_code(b);
            t.dyads.push_back(d);
            std::swap(d.origin, d.dest);
            t.dyads.push_back(d);
        }
    }

    // Parents cluster in large economies; subsidiaries spread out.
    const int n_parents = std::max(1, static_cast<int>(std::lround(o.n_firms * 0.3)));
    std::vector<double> parent_weight(nc), sub_weight(nc);
    for (int i = 0; i < nc; ++i) {
        parent_weight[i] = std::pow(cs[i].gdp / 3e11, 1.5);
        sub_weight[i] = cs[i].gdp / 3e11;
    }
    std::vector<int> firm_country(o.n_firms);
    std::vector<int> firm_parent(o.n_firms);
    for (int f = 0; f < o.n_firms; ++f) {
        if (f < n_parents) {
            firm_country[f] = static_cast<int>(weighted_pick(rng, parent_weight));
            firm_parent[f] = f;
        } else {
            firm_parent[f] = static_cast<int>(rng.below(n_parents));
            firm_country[f] = static_cast<int>(weighted_pick(rng, sub_weight));
        }
        t.firms.push_back({padded("F", f, 4), padded("F", firm_parent[f], 4), country_code(firm_country[f])});
    }
    std::vector<std::vector<int>> group(n_parents);
    for (int f = 0; f < o.n_firms; ++f) group[firm_parent[f]].push_back(f);

    const auto& sectors = default_sectors();
    struct BrandState {
        int parent;
        double revenue;
        double growth;
        std::vector<double> firm_share;
    };
    std::vector<BrandState> bs(o.n_brands);
    for (int b = 0; b < o.n_brands; ++b) {
        auto& s = bs[b];
        s.parent = static_cast<int>(rng.below(n_parents));
        int sector = static_cast<int>(rng.below(o.n_sectors));
        s.revenue = std::exp(std::log(2e8) + 1.2 * rng.normal());
        s.growth = 0.15 + 0.1 * rng.normal();
        double total = 0.0;
        for (int f : group[s.parent]) {
            double w = f == s.parent ? 1.0 + rng.uniform() : 0.8 * rng.uniform() + 0.05;
            s.firm_share.push_back(w);
            total += w;
        }
        for (double& w : s.firm_share) w /= total;
        t.brands.push_back({padded("B", b, 4), padded("F", s.parent, 4), sectors[sector], ""});
    }

    const int n_observed = std::clamp(static_cast<int>(std::ceil(o.observed_share * nc)), 0, nc);
    for (Year y : o.years) {
        double dt = y - base_year;
        struct Pair {
            int brand, dest;
            double value, score;
        };
        std::vector<Pair> pairs;
        pairs.reserve(static_cast<std::size_t>(o.n_brands) * nc);
        for (int b = 0; b < o.n_brands; ++b) {
            const auto& s = bs[b];
            double revenue = s.revenue * std::exp(s.growth * dt);
            const auto& g = group[s.parent];
            for (std::size_t k = 0; k < g.size(); ++k) {
                t.revenues.push_back({padded("F", g[k], 4), padded("B", b, 4), y, revenue * s.firm_share[k]});
            }
            int origin = firm_country[s.parent];
            std::vector<double> w(nc);
            double wsum = 0.0;
            for (int d = 0; d < nc; ++d) {
                double km = d == origin ? 300.0 : dist(origin, d);
                double gdp = cs[d].gdp * std::exp(cs[d].growth * dt);
                w[d] = gdp * cs[d].internet / std::pow(km, o.alpha);
                wsum += w[d];
            }
            for (int d = 0; d < nc; ++d) {
                double expected = revenue * w[d] / wsum;
                double value = expected * std::exp(0.5 * rng.normal() - 0.125);
                // Zeros hit small markets first, and markets beyond the brand's reach before any within it.
                double reach = d == origin || dist(origin, d) < kReachKm ? 4.0 : -4.0;
                double score = std::log(expected) + 0.3 * rng.normal() + reach;
                pairs.push_back({b, d, value, score});
            }
        }
        std::size_t n_zero = static_cast<std::size_t>(std::llround(o.zero_rate * static_cast<double>(pairs.size())));
        if (n_zero > 0) {
            std::vector<std::size_t> order(pairs.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return pairs[a].score < pairs[b].score; });
            for (std::size_t i = 0; i < n_zero; ++i) pairs[order[i]].value = 0.0;
        }
        for (const auto& p : pairs) {
            if (p.dest >= n_observed) continue;
            t.consumption.push_back({padded("B", p.brand, 4), country_code(p.dest), y, p.value, Provenance::observed});
        }

        if (o.physical_trade) {
            for (int h = 0; h < o.n_hs4; ++h) {
                std::string hs4 = padded("", 100 + h * 7, 4);
                for (int org = 0; org < nc; ++org) {
                    if (rng.uniform() > 0.7) continue;
                    double total = cs[org].gdp * 1e-3 * std::exp(1.2 * rng.normal() + 0.06 * dt);
                    std::vector<std::pair<double, int>> dests;
                    for (int d = 0; d < nc; ++d) {
                        if (d != org) dests.emplace_back(cs[d].gdp / dist(org, d), d);
                    }
                    std::sort(dests.begin(), dests.end(), std::greater<>());
                    dests.resize(std::min<std::size_t>(4, dests.size()));
                    double wsum = 0.0;
                    for (const auto& [w, d] : dests) wsum += w;
                    for (const auto& [w, d] : dests) {
                        t.physical_trade.push_back({country_code(org), country_code(d), hs4, y, total * w / wsum});
                    }
                }
            }
        }
        if (o.reference_exports) {
            std::vector<double> booked(nc, 0.0);
            for (int b = 0; b < o.n_brands; ++b) {
                const auto& g = group[bs[b].parent];
                for (std::size_t k = 0; k < g.size(); ++k) {
                    booked[firm_country[g[k]]] += bs[b].revenue * std::exp(bs[b].growth * dt) * bs[b].firm_share[k];
                }
            }
            for (int c = 0; c < nc; ++c) {
                double v = 0.6 * booked[c] * std::exp(0.3 * rng.normal()) + cs[c].gdp * 1e-4;
                t.reference_exports.push_back({country_code(c), y, v});
            }
        }
    }
    return Dataset(std::move(t));
}

}  // namespace dtrade
