#include "dtrade/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dtrade/csv.hpp"
#include "dtrade/util.hpp"

namespace dtrade {

const std::vector<std::string>& default_sectors() {
    static const std::vector<std::string> sectors = {
        "Cybersecurity",
        "Mobile Application",
        "Cloud Computing",
        "File Hosting Service",
        "Web Hosting",
        "Data Licensing",
        "Digital Advertising",
        "Digital Music Streaming & Downloads",
        "Video on Demand",
        "eBooks",
        "Gaming Networks",
        "PC and Console Games",
        "Mobile Games",
        "Online Dating",
        "Online Education",
        "Online Food Ordering",
        "Online Gambling",
        "Online Marketplace",
        "Operating System",
        "Payment Service",
        "Business Intelligence Software",
        "Customer Relationship Management Software",
        "Enterprise Resource Planning Software",
        "Other Enterprise Software",
        "Supply Chain Management Software",
        "Administrative Software",
        "Collaboration Software",
        "Creative Software",
        "Office Software",
    };
    return sectors;
}

const std::vector<std::string>& region_table() {
    static const std::vector<std::string> regions = {"Africa", "Americas", "Asia", "Europe", "Oceania"};
    return regions;
}

int region_code(const std::string& region) {
    const auto& t = region_table();
    auto it = std::find(t.begin(), t.end(), region);
    return it == t.end() ? 0 : static_cast<int>(it - t.begin()) + 1;
}

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::observed: return "observed";
        case Provenance::predicted: return "predicted";
        case Provenance::harmonized: return "harmonized";
    }
    return "observed";
}

Provenance parse_provenance(const std::string& s) {
    if (s == "observed") return Provenance::observed;
    if (s == "predicted") return Provenance::predicted;
    if (s == "harmonized") return Provenance::harmonized;
    throw Error("unknown provenance '" + s + "'");
}

// ---------------------------------------------------------------------------
// RevenueLedger / ConsumptionMatrix

RevenueLedger::RevenueLedger(std::vector<RevenueEntry> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(), [](const RevenueEntry& a, const RevenueEntry& b) {
        return std::tie(a.brand_id, a.year, a.firm_id) < std::tie(b.brand_id, b.year, b.firm_id);
    });
}

std::vector<const RevenueEntry*> RevenueLedger::entries_for(const std::string& brand, Year year) const {
    auto lo = std::lower_bound(entries_.begin(), entries_.end(), std::tie(brand, year),
                               [](const RevenueEntry& e, const auto& key) {
                                   return std::tie(e.brand_id, e.year) < key;
                               });
    std::vector<const RevenueEntry*> out;
    for (auto it = lo; it != entries_.end() && it->brand_id == brand && it->year == year; ++it) {
        out.push_back(&*it);
    }
    return out;
}

double RevenueLedger::world_revenue(const std::string& brand, Year year) const {
    double s = 0.0;
    for (const auto* e : entries_for(brand, year)) s += e->revenue_usd;
    return s;
}

double RevenueLedger::world_total(Year year) const {
    double total = 0.0;
    std::size_t i = 0;
    while (i < entries_.size()) {
        std::size_t j = i;
        double brand_sum = 0.0;
        while (j < entries_.size() && entries_[j].brand_id == entries_[i].brand_id) {
            if (entries_[j].year == year) brand_sum += entries_[j].revenue_usd;
            ++j;
        }
        total += brand_sum;
        i = j;
    }
    return total;
}

ConsumptionMatrix::ConsumptionMatrix(std::vector<ConsumptionEntry> entries) : entries_(std::move(entries)) {
    reindex();
}

void ConsumptionMatrix::reindex() {
    std::sort(entries_.begin(), entries_.end(), [](const ConsumptionEntry& a, const ConsumptionEntry& b) {
        return std::tie(a.brand_id, a.country, a.year) < std::tie(b.brand_id, b.country, b.year);
    });
    index_.clear();
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (!index_.emplace(std::make_tuple(e.brand_id, e.country, e.year), i).second) {
            throw Error("duplicate consumption entry for brand " + e.brand_id + ", country " + e.country +
                        ", year " + std::to_string(e.year));
        }
    }
}

std::optional<double> ConsumptionMatrix::find(const std::string& brand, const std::string& country,
                                              Year year) const {
    auto it = index_.find(std::make_tuple(brand, country, year));
    if (it == index_.end()) return std::nullopt;
    return entries_[it->second].consumption_usd;
}

// ---------------------------------------------------------------------------
// Dataset

namespace {

template <typename T, typename Key>
std::map<std::string, std::size_t> build_index(const std::vector<T>& v, Key key, const char* what) {
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!idx.emplace(key(v[i]), i).second) {
            throw Error(std::string("duplicate ") + what + " '" + key(v[i]) + "'");
        }
    }
    return idx;
}

}  // namespace

Dataset::Dataset(DatasetTables t)
    : countries_(std::move(t.countries)),
      dyads_(std::move(t.dyads)),
      firms_(std::move(t.firms)),
      brands_(std::move(t.brands)),
      physical_(std::move(t.physical_trade)),
      reference_(std::move(t.reference_exports)),
      sectors_(std::move(t.sectors)) {
    std::sort(countries_.begin(), countries_.end(),
              [](const auto& a, const auto& b) { return a.code < b.code; });
    std::sort(firms_.begin(), firms_.end(), [](const auto& a, const auto& b) { return a.firm_id < b.firm_id; });
    std::sort(brands_.begin(), brands_.end(), [](const auto& a, const auto& b) { return a.brand_id < b.brand_id; });
    std::sort(dyads_.begin(), dyads_.end(),
              [](const auto& a, const auto& b) { return std::tie(a.origin, a.dest) < std::tie(b.origin, b.dest); });
    std::sort(physical_.begin(), physical_.end(), [](const auto& a, const auto& b) {
        return std::tie(a.year, a.hs4, a.origin, a.dest) < std::tie(b.year, b.hs4, b.origin, b.dest);
    });
    std::sort(reference_.begin(), reference_.end(),
              [](const auto& a, const auto& b) { return std::tie(a.country, a.year) < std::tie(b.country, b.year); });

    country_idx_ = build_index(countries_, [](const CountryRecord& c) { return c.code; }, "country");
    firm_idx_ = build_index(firms_, [](const FirmRecord& f) { return f.firm_id; }, "firm");
    brand_idx_ = build_index(brands_, [](const BrandRecord& b) { return b.brand_id; }, "brand");

    auto need_country = [&](const std::string& code, const std::string& where) {
        if (!country_idx_.count(code)) {
            throw Error("referential integrity: " + where + " references unknown country '" + code + "'");
        }
    };

    for (std::size_t i = 0; i < dyads_.size(); ++i) {
        const auto& d = dyads_[i];
        need_country(d.origin, "dyad " + d.origin + "->" + d.dest);
        need_country(d.dest, "dyad " + d.origin + "->" + d.dest);
        if (!dyad_idx_.emplace(std::make_pair(d.origin, d.dest), i).second) {
            throw Error("duplicate dyad " + d.origin + "->" + d.dest);
        }
    }
    for (const auto& f : firms_) {
        need_country(f.country, "firm " + f.firm_id);
        if (!firm_idx_.count(f.parent_id)) {
            throw Error("referential integrity: firm '" + f.firm_id + "' references unknown parent '" +
                        f.parent_id + "'");
        }
    }
    for (auto& b : brands_) {
        auto it = firm_idx_.find(b.parent_firm_id);
        if (it == firm_idx_.end()) {
            throw Error("referential integrity: brand '" + b.brand_id + "' references unknown firm_id '" +
                        b.parent_firm_id + "'");
        }
        b.origin_country = firms_[it->second].country;
    }

    // Resolve firm-level totals: subsidiaries inherit the parent's brand shares.
    std::map<std::tuple<std::string, std::string, Year>, double> resolved;
    std::vector<const RevenueEntry*> firm_level;
    for (const auto& e : t.revenues) {
        if (!firm_idx_.count(e.firm_id)) {
            throw Error("referential integrity: revenue row references unknown firm_id '" + e.firm_id + "'");
        }
        if (e.brand_id.empty()) {
            firm_level.push_back(&e);
            continue;
        }
        if (!brand_idx_.count(e.brand_id)) {
            throw Error("referential integrity: revenue row references unknown brand_id '" + e.brand_id + "'");
        }
        if (!resolved.emplace(std::make_tuple(e.brand_id, e.firm_id, e.year), e.revenue_usd).second) {
            throw Error("duplicate revenue row for firm " + e.firm_id + ", brand " + e.brand_id + ", year " +
                        std::to_string(e.year));
        }
    }
    std::map<std::tuple<std::string, std::string, Year>, double> parent_rows = resolved;
    for (const RevenueEntry* e : firm_level) {
        const FirmRecord& f = firm(e->firm_id);
        if (f.is_parent()) {
            throw Error("revenue row for parent firm '" + f.firm_id + "' has no brand_id");
        }
        std::vector<std::pair<std::string, double>> shares;
        double total = 0.0;
        for (const auto& b : brands_) {
            if (b.parent_firm_id != f.parent_id) continue;
            auto it = parent_rows.find(std::make_tuple(b.brand_id, f.parent_id, e->year));
            if (it == parent_rows.end() || it->second <= 0.0) continue;
            shares.emplace_back(b.brand_id, it->second);
            total += it->second;
        }
        if (total <= 0.0) {
            throw Error("referential integrity: cannot split revenue of firm '" + f.firm_id +
                        "': parent has no brand revenue in " + std::to_string(e->year));
        }
        for (const auto& [brand_id, value] : shares) {
            resolved[std::make_tuple(brand_id, f.firm_id, e->year)] += e->revenue_usd * (value / total);
        }
    }
    std::vector<RevenueEntry> ledger;
    ledger.reserve(resolved.size());
    for (const auto& [key, value] : resolved) {
        ledger.push_back({std::get<1>(key), std::get<0>(key), std::get<2>(key), value});
    }
    revenue_ = RevenueLedger(std::move(ledger));

    for (const auto& c : t.consumption) {
        if (!brand_idx_.count(c.brand_id)) {
            throw Error("referential integrity: consumption row references unknown brand_id '" + c.brand_id + "'");
        }
        need_country(c.country, "consumption row");
    }
    consumption_ = ConsumptionMatrix(std::move(t.consumption));

    for (const auto& p : physical_) {
        need_country(p.origin, "physical trade row");
        need_country(p.dest, "physical trade row");
    }
    for (const auto& r : reference_) need_country(r.country, "reference export row");

    std::set<Year> years;
    for (const auto& e : revenue_.entries()) years.insert(e.year);
    for (const auto& e : consumption_.entries()) years.insert(e.year);
    years_.assign(years.begin(), years.end());

    std::set<std::string> observed;
    for (const auto& e : consumption_.entries()) {
        if (e.provenance == Provenance::observed) observed.insert(e.country);
    }
    observed_countries_.assign(observed.begin(), observed.end());

    for (const auto& e : revenue_.entries()) {
        country_revenue_[{firm(e.firm_id).country, e.year}] += e.revenue_usd;
        sector_revenue_[{brand(e.brand_id).sector, e.year}] += e.revenue_usd;
    }
}

bool Dataset::has_emissions() const {
    for (const auto& c : countries_) {
        for (const auto& [y, cy] : c.years) {
            if (!cy.emissions_prod && !cy.emissions_cons) return false;
        }
    }
    return !countries_.empty();
}

const CountryRecord* Dataset::find_country(const std::string& code) const {
    auto it = country_idx_.find(code);
    return it == country_idx_.end() ? nullptr : &countries_[it->second];
}

const CountryRecord& Dataset::country(const std::string& code) const {
    const auto* c = find_country(code);
    if (!c) throw Error("unknown country '" + code + "'");
    return *c;
}

std::size_t Dataset::country_index(const std::string& code) const {
    auto it = country_idx_.find(code);
    if (it == country_idx_.end()) throw Error("unknown country '" + code + "'");
    return it->second;
}

const CountryYear& Dataset::country_year(const std::string& code, Year year) const {
    const auto& c = country(code);
    auto it = c.years.find(year);
    if (it == c.years.end()) {
        throw Error("missing covariates for country " + code + " in year " + std::to_string(year));
    }
    return it->second;
}

const DyadRecord* Dataset::find_dyad(const std::string& origin, const std::string& dest) const {
    auto it = dyad_idx_.find({origin, dest});
    return it == dyad_idx_.end() ? nullptr : &dyads_[it->second];
}

const FirmRecord& Dataset::firm(const std::string& id) const {
    auto it = firm_idx_.find(id);
    if (it == firm_idx_.end()) throw Error("unknown firm '" + id + "'");
    return firms_[it->second];
}

const BrandRecord& Dataset::brand(const std::string& id) const {
    auto it = brand_idx_.find(id);
    if (it == brand_idx_.end()) throw Error("unknown brand '" + id + "'");
    return brands_[it->second];
}

std::map<std::string, double> Dataset::revenue_by_origin(const std::string& brand, Year year) const {
    return revenue_by_origin(revenue_, brand, year);
}

std::map<std::string, double> Dataset::revenue_by_origin(const RevenueLedger& ledger, const std::string& brand,
                                                         Year year) const {
    std::map<std::string, double> out;
    for (const auto* e : ledger.entries_for(brand, year)) out[firm(e->firm_id).country] += e->revenue_usd;
    return out;
}

DatasetTables to_tables(const Dataset& ds) {
    DatasetTables t;
    t.countries = ds.countries();
    t.dyads = ds.dyads();
    t.firms = ds.firms();
    t.brands = ds.brands();
    t.revenues = ds.revenue().entries();
    t.consumption = ds.consumption().entries();
    t.physical_trade = ds.physical_trade();
    t.reference_exports = ds.reference_exports();
    t.sectors = ds.sectors();
    return t;
}

double Dataset::country_digital_revenue(const std::string& country, Year year) const {
    auto it = country_revenue_.find({country, year});
    return it == country_revenue_.end() ? 0.0 : it->second;
}

double Dataset::sector_world_revenue(const std::string& sector, Year year) const {
    auto it = sector_revenue_.find({sector, year});
    return it == sector_revenue_.end() ? 0.0 : it->second;
}

// ---------------------------------------------------------------------------
// validate

ValidationReport validate(const Dataset& ds) {
    ValidationReport report;
    auto issue = [&](std::string loc, std::string msg) { report.push_back({std::move(loc), std::move(msg)}); };

    if (ds.years().empty()) issue("dataset", "year range is empty");

    for (const auto& c : ds.countries()) {
        if (region_code(c.region) == 0) issue("countries.csv:" + c.code, "unknown region '" + c.region + "'");
        for (const auto& [year, cy] : c.years) {
            std::string loc = "countries.csv:" + c.code + ":" + std::to_string(year);
            if (!(cy.gdp_ppp > 0.0)) issue(loc, "gdp_ppp must be > 0");
            if (!(cy.population > 0.0)) issue(loc, "population must be > 0");
            const std::pair<const char*, double> shares[] = {{"internet_share", cy.internet_share},
                                                             {"fixed_bb_share", cy.fixed_bb_share},
                                                             {"mobile_bb_share", cy.mobile_bb_share}};
            for (const auto& [name, v] : shares) {
                if (v < 0.0 || v > 1.0) issue(loc + ":" + name, "share out of [0,1]");
            }
            if ((cy.emissions_prod && *cy.emissions_prod < 0.0) || (cy.emissions_cons && *cy.emissions_cons < 0.0)) {
                issue(loc, "negative emissions");
            }
        }
        for (Year y : ds.years()) {
            if (!c.years.count(y)) issue("countries.csv:" + c.code, "missing covariates for year " + std::to_string(y));
        }
    }

    for (const auto& o : ds.countries()) {
        for (const auto& d : ds.countries()) {
            if (o.code == d.code) continue;
            const auto* dy = ds.find_dyad(o.code, d.code);
            if (!dy) {
                issue("dyads.csv", "missing dyad for ordered pair " + o.code + "->" + d.code);
            } else if (!(dy->dist_km > 0.0)) {
                issue("dyads.csv:" + o.code + "->" + d.code, "dist_km must be > 0");
            }
        }
    }

    for (const auto& f : ds.firms()) {
        const auto& p = ds.firm(f.parent_id);
        if (!p.is_parent()) {
            issue("firms.csv:" + f.firm_id, "parent '" + p.firm_id + "' is itself a subsidiary (chain depth > 1)");
        }
    }

    std::set<std::string> sectors(ds.sectors().begin(), ds.sectors().end());
    for (const auto& b : ds.brands()) {
        if (!sectors.count(b.sector)) issue("brands.csv:" + b.brand_id, "unknown sector '" + b.sector + "'");
        if (!ds.firm(b.parent_firm_id).is_parent()) {
            issue("brands.csv:" + b.brand_id, "parent_firm_id '" + b.parent_firm_id + "' is not a parent firm");
        }
    }

    // The per-origin view must add back up to the brand's world revenue.
    for (const auto& b : ds.brands()) {
        for (Year y : ds.years()) {
            double world = ds.revenue().world_revenue(b.brand_id, y);
            double by_origin = 0.0;
            for (const auto& [o, v] : ds.revenue_by_origin(b.brand_id, y)) by_origin += v;
            if (std::abs(world - by_origin) > 1e-6 * std::max(std::abs(world), 1.0)) {
                issue("revenues.csv:" + b.brand_id + ":" + std::to_string(y),
                      "firm revenues do not sum to brand world revenue");
            }
        }
    }

    std::set<std::string> observed(ds.observed_countries().begin(), ds.observed_countries().end());
    for (const auto& e : ds.consumption().entries()) {
        if (e.provenance == Provenance::observed && !observed.count(e.country)) {
            issue("consumption.csv:" + e.brand_id + ":" + e.country, "observed entry outside coverage set");
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// IO

DatasetPaths DatasetPaths::in_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    auto p = [&](const char* name) { return (fs::path(dir) / name).string(); };
    DatasetPaths paths{p("countries.csv"), p("dyads.csv"), p("firms.csv"), p("brands.csv"),
                       p("revenues.csv"), p("consumption.csv"), std::nullopt, std::nullopt};
    if (fs::exists(p("physical_trade.csv"))) paths.physical_trade = p("physical_trade.csv");
    if (fs::exists(p("reference_exports.csv"))) paths.reference_exports = p("reference_exports.csv");
    return paths;
}

namespace {

std::optional<double> optional_number(const csv::Table& t, std::size_t row, const char* column) {
    if (!t.has_column(column) || t.at(row, column).empty()) return std::nullopt;
    return t.number(row, column);
}

}  // namespace

DatasetTables read_tables(const DatasetPaths& paths) {
    DatasetTables out;

    {
        auto t = csv::read_file(paths.countries);
        t.require({"code", "year", "region", "gdp_ppp", "population", "internet_share", "fixed_bb_share",
                   "mobile_bb_share"});
        std::map<std::string, std::size_t> idx;
        for (std::size_t r = 0; r < t.size(); ++r) {
            const std::string& code = t.at(r, "code");
            if (code.empty()) throw SchemaError(t.source(), r + 2, "code", "empty country code");
            auto [it, inserted] = idx.emplace(code, out.countries.size());
            if (inserted) out.countries.push_back({code, t.at(r, "region"), {}});
            auto& c = out.countries[it->second];
            if (c.region != t.at(r, "region")) {
                throw SchemaError(t.source(), r + 2, "region", "region differs across years for " + code);
            }
            CountryYear cy{t.number(r, "gdp_ppp"),
                           t.number(r, "population"),
                           t.number(r, "internet_share"),
                           t.number(r, "fixed_bb_share"),
                           t.number(r, "mobile_bb_share"),
                           optional_number(t, r, "emissions_prod"),
                           optional_number(t, r, "emissions_cons")};
            if (!c.years.emplace(t.integer(r, "year"), cy).second) {
                throw SchemaError(t.source(), r + 2, "year", "duplicate country-year for " + code);
            }
        }
    }
    {
        auto t = csv::read_file(paths.dyads);
        t.require({"origin", "dest", "dist_km", "contiguity", "comlang_official", "comlang_ethno", "colony_ever",
                   "comcol_post45", "curcol", "col_post45", "same_country_ever"});
        for (std::size_t r = 0; r < t.size(); ++r) {
            out.dyads.push_back({t.at(r, "origin"), t.at(r, "dest"), t.number(r, "dist_km"), t.flag(r, "contiguity"),
                                 t.flag(r, "comlang_official"), t.flag(r, "comlang_ethno"), t.flag(r, "colony_ever"),
                                 t.flag(r, "comcol_post45"), t.flag(r, "curcol"), t.flag(r, "col_post45"),
                                 t.flag(r, "same_country_ever")});
        }
    }
    {
        auto t = csv::read_file(paths.firms);
        t.require({"firm_id", "parent_id", "country"});
        for (std::size_t r = 0; r < t.size(); ++r) {
            std::string parent = t.at(r, "parent_id");
            if (parent.empty()) parent = t.at(r, "firm_id");
            out.firms.push_back({t.at(r, "firm_id"), parent, t.at(r, "country")});
        }
    }
    {
        auto t = csv::read_file(paths.brands);
        t.require({"brand_id", "parent_firm_id", "sector"});
        for (std::size_t r = 0; r < t.size(); ++r) {
            out.brands.push_back({t.at(r, "brand_id"), t.at(r, "parent_firm_id"), t.at(r, "sector"), ""});
        }
    }
    {
        auto t = csv::read_file(paths.revenues);
        t.require({"firm_id", "brand_id", "year", "revenue_usd"});
        for (std::size_t r = 0; r < t.size(); ++r) {
            out.revenues.push_back(
                {t.at(r, "firm_id"), t.at(r, "brand_id"), t.integer(r, "year"), t.non_negative(r, "revenue_usd")});
        }
    }
    {
        auto t = csv::read_file(paths.consumption);
        t.require({"brand_id", "country", "year", "consumption_usd"});
        bool prov = t.has_column("provenance");
        for (std::size_t r = 0; r < t.size(); ++r) {
            out.consumption.push_back({t.at(r, "brand_id"), t.at(r, "country"), t.integer(r, "year"),
                                       t.non_negative(r, "consumption_usd"),
                                       prov ? parse_provenance(t.at(r, "provenance")) : Provenance::observed});
        }
    }
    if (paths.physical_trade) {
        auto t = csv::read_file(*paths.physical_trade);
        t.require({"origin", "dest", "hs4", "year", "value_usd"});
        for (std::size_t r = 0; r < t.size(); ++r) {
            out.physical_trade.push_back({t.at(r, "origin"), t.at(r, "dest"), t.at(r, "hs4"), t.integer(r, "year"),
                                          t.non_negative(r, "value_usd")});
        }
    }
    if (paths.reference_exports) {
        auto t = csv::read_file(*paths.reference_exports);
        t.require({"country", "year", "value_usd"});
        for (std::size_t r = 0; r < t.size(); ++r) {
            out.reference_exports.push_back(
                {t.at(r, "country"), t.integer(r, "year"), t.non_negative(r, "value_usd")});
        }
    }
    return out;
}

Dataset load_dataset(const DatasetPaths& paths) {
    Dataset ds(read_tables(paths));
    auto report = validate(ds);
    if (!report.empty()) {
        std::string msg = "dataset failed validation (" + std::to_string(report.size()) + " issue(s)):";
        for (std::size_t i = 0; i < std::min<std::size_t>(report.size(), 5); ++i) {
            msg += "\n  " + report[i].location + ": " + report[i].message;
        }
        throw Error(msg);
    }
    return ds;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }
std::string b01(bool b) { return b ? "1" : "0"; }

struct NamedTable {
    std::string name;
    std::string text;
};

std::vector<NamedTable> render(const Dataset& ds) {
    std::vector<NamedTable> out;
    auto emit = [&](std::string name, auto fill) {
        std::ostringstream ss;
        csv::Writer w(ss);
        fill(w);
        out.push_back({std::move(name), ss.str()});
    };
    emit("countries.csv", [&](csv::Writer& w) {
        w.row({"code", "year", "region", "gdp_ppp", "population", "internet_share", "fixed_bb_share",
               "mobile_bb_share", "emissions_prod", "emissions_cons"});
        for (const auto& c : ds.countries()) {
            for (const auto& [y, cy] : c.years) {
                w.row({c.code, std::to_string(y), c.region, format_number(cy.gdp_ppp), format_number(cy.population),
                       format_number(cy.internet_share), format_number(cy.fixed_bb_share),
                       format_number(cy.mobile_bb_share), opt(cy.emissions_prod), opt(cy.emissions_cons)});
            }
        }
    });
    emit("dyads.csv", [&](csv::Writer& w) {
        w.row({"origin", "dest", "dist_km", "contiguity", "comlang_official", "comlang_ethno", "colony_ever",
               "comcol_post45", "curcol", "col_post45", "same_country_ever"});
        for (const auto& d : ds.dyads()) {
            w.row({d.origin, d.dest, format_number(d.dist_km), b01(d.contiguity), b01(d.comlang_official),
                   b01(d.comlang_ethno), b01(d.colony_ever), b01(d.comcol_post45), b01(d.curcol), b01(d.col_post45),
                   b01(d.same_country_ever)});
        }
    });
    emit("firms.csv", [&](csv::Writer& w) {
        w.row({"firm_id", "parent_id", "country"});
        for (const auto& f : ds.firms()) w.row({f.firm_id, f.parent_id, f.country});
    });
    emit("brands.csv", [&](csv::Writer& w) {
        w.row({"brand_id", "parent_firm_id", "sector"});
        for (const auto& b : ds.brands()) w.row({b.brand_id, b.parent_firm_id, b.sector});
    });
    emit("revenues.csv", [&](csv::Writer& w) {
        w.row({"firm_id", "brand_id", "year", "revenue_usd"});
        for (const auto& e : ds.revenue().entries()) {
            w.row({e.firm_id, e.brand_id, std::to_string(e.year), format_number(e.revenue_usd)});
        }
    });
    emit("consumption.csv", [&](csv::Writer& w) {
        w.row({"brand_id", "country", "year", "consumption_usd"});
        for (const auto& e : ds.consumption().entries()) {
            w.row({e.brand_id, e.country, std::to_string(e.year), format_number(e.consumption_usd)});
        }
    });
    if (ds.has_physical_trade()) {
        emit("physical_trade.csv", [&](csv::Writer& w) {
            w.row({"origin", "dest", "hs4", "year", "value_usd"});
            for (const auto& p : ds.physical_trade()) {
                w.row({p.origin, p.dest, p.hs4, std::to_string(p.year), format_number(p.value_usd)});
            }
        });
    }
    if (!ds.reference_exports().empty()) {
        emit("reference_exports.csv", [&](csv::Writer& w) {
            w.row({"country", "year", "value_usd"});
            for (const auto& r : ds.reference_exports()) {
                w.row({r.country, std::to_string(r.year), format_number(r.value_usd)});
            }
        });
    }
    return out;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& t : render(ds)) {
        std::ofstream f(std::filesystem::path(dir) / t.name, std::ios::binary);
        if (!f) throw Error("cannot write " + t.name + " in " + dir);
        f << t.text;
    }
}

std::string serialize(const Dataset& ds) {
    std::string out;
    for (const auto& t : render(ds)) {
        out += "## " + t.name + "\n";
        out += t.text;
    }
    return out;
}

std::string dataset_digest(const Dataset& ds) { return sha256_hex(serialize(ds)); }

void write_consumption_csv(const ConsumptionMatrix& m, const std::string& path, bool with_provenance) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    csv::Writer w(f);
    if (with_provenance) w.row({"brand_id", "country", "year", "consumption_usd", "provenance"});
    else w.row({"brand_id", "country", "year", "consumption_usd"});
    for (const auto& e : m.entries()) {
        std::vector<std::string> row{e.brand_id, e.country, std::to_string(e.year), format_number(e.consumption_usd)};
        if (with_provenance) row.push_back(to_string(e.provenance));
        w.row(row);
    }
}

ConsumptionMatrix read_consumption_csv(const std::string& path) {
    auto t = csv::read_file(path);
    t.require({"brand_id", "country", "year", "consumption_usd"});
    bool prov = t.has_column("provenance");
    std::vector<ConsumptionEntry> entries;
    for (std::size_t r = 0; r < t.size(); ++r) {
        entries.push_back({t.at(r, "brand_id"), t.at(r, "country"), t.integer(r, "year"),
                           t.non_negative(r, "consumption_usd"),
                           prov ? parse_provenance(t.at(r, "provenance")) : Provenance::observed});
    }
    return ConsumptionMatrix(std::move(entries));
}

}  // namespace dtrade
