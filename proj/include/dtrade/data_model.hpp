#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dtrade/common.hpp"

namespace dtrade {

/// The 29 digital product and service sectors, in their canonical order.
const std::vector<std::string>& default_sectors();

/// UN geoscheme regions with their fixed ordinal codes (1-based; 0 = unknown).
const std::vector<std::string>& region_table();
int region_code(const std::string& region);

struct CountryYear {
    double gdp_ppp = 0.0;
    double population = 0.0;
    double internet_share = 0.0;
    double fixed_bb_share = 0.0;
    double mobile_bb_share = 0.0;
    std::optional<double> emissions_prod;
    std::optional<double> emissions_cons;
};

struct CountryRecord {
    std::string code;
    std::string region;
    std::map<Year, CountryYear> years;
};

struct DyadRecord {
    std::string origin;
    std::string dest;
    double dist_km = 0.0;
    bool contiguity = false;
    bool comlang_official = false;
    bool comlang_ethno = false;
    bool colony_ever = false;
    bool comcol_post45 = false;
    bool curcol = false;
    bool col_post45 = false;
    bool same_country_ever = false;
};

struct FirmRecord {
    std::string firm_id;
    std::string parent_id;
    std::string country;
    bool is_parent() const { return parent_id == firm_id; }
};

struct BrandRecord {
    std::string brand_id;
    std::string parent_firm_id;
    std::string sector;
    std::string origin_country;  // country of the parent firm, filled on construction
};

/// Revenue keyed (firm, brand, year). An empty brand_id in the input marks a
/// firm-level total that is split over brands with the parent's shares.
struct RevenueEntry {
    std::string firm_id;
    std::string brand_id;
    Year year = 0;
    double revenue_usd = 0.0;
};

enum class Provenance { observed, predicted, harmonized };
std::string to_string(Provenance p);
Provenance parse_provenance(const std::string& s);

struct ConsumptionEntry {
    std::string brand_id;
    std::string country;
    Year year = 0;
    double consumption_usd = 0.0;
    Provenance provenance = Provenance::observed;
};

struct PhysicalTradeEntry {
    std::string origin;
    std::string dest;
    std::string hs4;
    Year year = 0;
    double value_usd = 0.0;
};

/// Optional external export totals used by the reference-based upper bound.
struct ReferenceExport {
    std::string country;
    Year year = 0;
    double value_usd = 0.0;
};

/// Firm-level revenue ledger with the per-origin view R_op.
class RevenueLedger {
public:
    RevenueLedger() = default;
    explicit RevenueLedger(std::vector<RevenueEntry> entries);

    const std::vector<RevenueEntry>& entries() const { return entries_; }

    /// Sum over firms; zero when the brand has no entry for that year.
    double world_revenue(const std::string& brand, Year year) const;
    /// World total summed brand by brand in key order.
    double world_total(Year year) const;

    /// Entries of one (brand, year), in firm order.
    std::vector<const RevenueEntry*> entries_for(const std::string& brand, Year year) const;

private:
    std::vector<RevenueEntry> entries_;  // sorted by (brand, year, firm)
};

/// Matrix of consumption entries keyed (brand, country, year).
class ConsumptionMatrix {
public:
    ConsumptionMatrix() = default;
    explicit ConsumptionMatrix(std::vector<ConsumptionEntry> entries);

    const std::vector<ConsumptionEntry>& entries() const { return entries_; }
    std::vector<ConsumptionEntry>& mutable_entries() { return entries_; }
    std::optional<double> find(const std::string& brand, const std::string& country, Year year) const;
    /// Re-sorts entries into key order and rebuilds the lookup index.
    void reindex();

private:
    std::vector<ConsumptionEntry> entries_;
    std::map<std::tuple<std::string, std::string, Year>, std::size_t> index_;
};

/// Parsed inputs before referential checks.
struct DatasetTables {
    std::vector<CountryRecord> countries;
    std::vector<DyadRecord> dyads;
    std::vector<FirmRecord> firms;
    std::vector<BrandRecord> brands;
    std::vector<RevenueEntry> revenues;
    std::vector<ConsumptionEntry> consumption;
    std::vector<PhysicalTradeEntry> physical_trade;
    std::vector<ReferenceExport> reference_exports;
    std::vector<std::string> sectors = default_sectors();
};

struct DatasetPaths {
    std::string countries, dyads, firms, brands, revenues, consumption;
    std::optional<std::string> physical_trade;
    std::optional<std::string> reference_exports;

    /// Conventional file names inside one directory; optional files are used if present.
    static DatasetPaths in_directory(const std::string& dir);
};

/// Immutable, indexed dataset. Construction enforces referential integrity and
/// resolves firm-level revenue splits; softer invariants are left to validate().
class Dataset {
public:
    explicit Dataset(DatasetTables tables);

    const std::vector<CountryRecord>& countries() const { return countries_; }
    const std::vector<DyadRecord>& dyads() const { return dyads_; }
    const std::vector<FirmRecord>& firms() const { return firms_; }
    const std::vector<BrandRecord>& brands() const { return brands_; }
    const RevenueLedger& revenue() const { return revenue_; }
    const ConsumptionMatrix& consumption() const { return consumption_; }
    const std::vector<PhysicalTradeEntry>& physical_trade() const { return physical_; }
    const std::vector<ReferenceExport>& reference_exports() const { return reference_; }
    const std::vector<std::string>& sectors() const { return sectors_; }

    bool has_physical_trade() const { return !physical_.empty(); }
    bool has_emissions() const;

    const CountryRecord& country(const std::string& code) const;
    const CountryRecord* find_country(const std::string& code) const;
    std::size_t country_index(const std::string& code) const;
    const CountryYear& country_year(const std::string& code, Year year) const;
    const DyadRecord* find_dyad(const std::string& origin, const std::string& dest) const;
    const FirmRecord& firm(const std::string& id) const;
    const BrandRecord& brand(const std::string& id) const;

    /// Years present anywhere in revenues or consumption, ascending.
    const std::vector<Year>& years() const { return years_; }
    /// Countries with at least one observed consumption entry.
    const std::vector<std::string>& observed_countries() const { return observed_countries_; }

    /// R_op: revenue of brand by firm country for a year.
    std::map<std::string, double> revenue_by_origin(const std::string& brand, Year year) const;
    /// Same view over an alternative ledger (e.g. parent-HQ attribution).
    std::map<std::string, double> revenue_by_origin(const RevenueLedger& ledger, const std::string& brand,
                                                    Year year) const;
    /// Total digital revenue booked by firms located in a country.
    double country_digital_revenue(const std::string& country, Year year) const;
    double sector_world_revenue(const std::string& sector, Year year) const;

private:
    std::vector<CountryRecord> countries_;
    std::vector<DyadRecord> dyads_;
    std::vector<FirmRecord> firms_;
    std::vector<BrandRecord> brands_;
    RevenueLedger revenue_;
    ConsumptionMatrix consumption_;
    std::vector<PhysicalTradeEntry> physical_;
    std::vector<ReferenceExport> reference_;
    std::vector<std::string> sectors_;

    std::map<std::string, std::size_t> country_idx_, firm_idx_, brand_idx_;
    std::map<std::pair<std::string, std::string>, std::size_t> dyad_idx_;
    std::map<std::pair<std::string, Year>, double> country_revenue_, sector_revenue_;
    std::vector<Year> years_;
    std::vector<std::string> observed_countries_;
};

struct ValidationIssue {
    std::string location;
    std::string message;
};
using ValidationReport = std::vector<ValidationIssue>;

ValidationReport validate(const Dataset& dataset);

/// Inverse of construction: the resolved tables, ready to edit and rebuild.
DatasetTables to_tables(const Dataset& dataset);

DatasetTables read_tables(const DatasetPaths& paths);
/// Reads, indexes and validates; throws Error listing the first violations.
Dataset load_dataset(const DatasetPaths& paths);

/// Writes the dataset in the input schemas (optional files only when non-empty).
void write_dataset(const Dataset& dataset, const std::string& dir);
/// Canonical serialization of every table, in a fixed order.
std::string serialize(const Dataset& dataset);
std::string dataset_digest(const Dataset& dataset);

void write_consumption_csv(const ConsumptionMatrix& m, const std::string& path, bool with_provenance);
ConsumptionMatrix read_consumption_csv(const std::string& path);

}  // namespace dtrade
