#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dtrade/data_model.hpp"

namespace dtrade {

/// Brand and sector world totals per year. Sector totals must equal the sum of
/// their brands' totals (1e-6 relative) or construction fails.
class HarmonizationTargets {
public:
    using BrandKey = std::pair<std::string, Year>;
    using SectorKey = std::pair<std::string, Year>;

    HarmonizationTargets() = default;
    HarmonizationTargets(std::map<BrandKey, double> brand_totals, std::map<SectorKey, double> sector_totals,
                         std::map<std::string, std::string> brand_sector);

    /// Brand totals from world revenue; sector totals summed from them.
    static HarmonizationTargets from_dataset(const Dataset& dataset);

    const std::map<BrandKey, double>& brand_totals() const { return brand_; }
    const std::map<SectorKey, double>& sector_totals() const { return sector_; }
    double brand_total(const std::string& brand, Year year) const;

    /// Optional per-(destination, year) totals. Turns on alternating scaling.
    void set_destination_totals(std::map<std::pair<std::string, Year>, double> totals);
    const std::map<std::pair<std::string, Year>, double>& destination_totals() const { return dest_; }

private:
    std::map<BrandKey, double> brand_;
    std::map<SectorKey, double> sector_;
    std::map<std::pair<std::string, Year>, double> dest_;
};

struct HarmonizeOptions {
    double tol = 1e-9;
    int max_iter = 1000;
    /// Keep observed entries fixed and scale only the rest.
    bool freeze_observed = false;
};

struct HarmonizeStats {
    int iterations = 0;
    double max_violation = 0.0;
};

/// Scales each (brand, year) row to its target. With destination totals the
/// row and column scalings alternate until the largest relative violation
/// drops below tol. Entries of brands without a target are left untouched.
ConsumptionMatrix harmonize(const ConsumptionMatrix& predicted, const HarmonizationTargets& targets,
                            const HarmonizeOptions& options = {}, HarmonizeStats* stats = nullptr);

}  // namespace dtrade
