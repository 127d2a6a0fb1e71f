#include "dtrade/harmonizer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace dtrade {

namespace {

double relative_gap(double value, double target) {
    double scale = std::max(std::abs(target), 1e-300);
    if (target == 0.0) return value == 0.0 ? 0.0 : std::abs(value);
    return std::abs(value - target) / scale;
}

std::string year_key(const std::string& id, Year y) { return id + " (" + std::to_string(y) + ")"; }

}  // namespace

HarmonizationTargets::HarmonizationTargets(std::map<BrandKey, double> brand_totals,
                                           std::map<SectorKey, double> sector_totals,
                                           std::map<std::string, std::string> brand_sector)
    : brand_(std::move(brand_totals)), sector_(std::move(sector_totals)) {
    std::map<SectorKey, double> summed;
    for (const auto& [key, total] : brand_) {
        if (!(total >= 0.0) || !std::isfinite(total)) throw Error("negative brand target for " + year_key(key.first, key.second));
        auto it = brand_sector.find(key.first);
        if (it == brand_sector.end()) throw Error("brand " + key.first + " has no sector");
        summed[{it->second, key.second}] += total;
    }
    for (const auto& [key, total] : sector_) {
        if (!(total >= 0.0)) throw Error("negative sector target for " + year_key(key.first, key.second));
        double s = summed.count(key) ? summed.at(key) : 0.0;
        if (std::abs(s - total) > 1e-6 * std::max(std::abs(total), std::abs(s))) {
            throw Error("sector total for " + year_key(key.first, key.second) + " does not equal the sum of its brands");
        }
    }
    for (const auto& [key, s] : summed) {
        if (!sector_.count(key) && s > 0.0) {
            throw Error("missing sector total for " + year_key(key.first, key.second));
        }
    }
}

HarmonizationTargets HarmonizationTargets::from_dataset(const Dataset& ds) {
    std::map<BrandKey, double> brands;
    std::map<SectorKey, double> sectors;
    std::map<std::string, std::string> brand_sector;
    for (const auto& b : ds.brands()) brand_sector[b.brand_id] = b.sector;
    for (const auto& e : ds.revenue().entries()) brands[{e.brand_id, e.year}] += e.revenue_usd;
    for (const auto& [key, total] : brands) sectors[{brand_sector.at(key.first), key.second}] += total;
    return HarmonizationTargets(std::move(brands), std::move(sectors), std::move(brand_sector));
}

double HarmonizationTargets::brand_total(const std::string& brand, Year year) const {
    auto it = brand_.find({brand, year});
    return it == brand_.end() ? 0.0 : it->second;
}

void HarmonizationTargets::set_destination_totals(std::map<std::pair<std::string, Year>, double> totals) {
    for (const auto& [key, v] : totals) {
        if (!(v >= 0.0)) throw Error("negative destination target for " + year_key(key.first, key.second));
    }
    dest_ = std::move(totals);
}

namespace {

struct Group {
    double target = 0.0;
    std::vector<std::size_t> members;
};

// Scales the free members of a group so that the group sums to its target.
// Returns the factor applied (1 when nothing to do).
double scale_group(std::vector<ConsumptionEntry>& e, const std::vector<char>& frozen, const Group& g,
                   const std::string& label) {
    double fixed = 0.0, free = 0.0;
    for (std::size_t i : g.members) (frozen[i] ? fixed : free) += e[i].consumption_usd;
    double remaining = g.target - fixed;
    if (remaining < -1e-12 * std::max(g.target, fixed)) {
        throw Error("observed consumption of " + label + " exceeds its target");
    }
    remaining = std::max(remaining, 0.0);
    if (free == 0.0) {
        if (remaining > 1e-12 * std::max(g.target, 1.0)) {
            throw Error("cannot scale " + label + ": positive target but all predictions are zero");
        }
        return 1.0;
    }
    double factor = remaining / free;
    for (std::size_t i : g.members) {
        if (!frozen[i]) e[i].consumption_usd *= factor;
    }
    return factor;
}

double group_violation(const std::vector<ConsumptionEntry>& e, const Group& g) {
    double s = 0.0;
    for (std::size_t i : g.members) s += e[i].consumption_usd;
    return relative_gap(s, g.target);
}

}  // namespace

ConsumptionMatrix harmonize(const ConsumptionMatrix& predicted, const HarmonizationTargets& targets,
                            const HarmonizeOptions& options, HarmonizeStats* stats) {
    if (!(options.tol > 0.0) || options.max_iter < 1) throw Error("harmonize: tol must be > 0 and max_iter >= 1");
    std::vector<ConsumptionEntry> entries = predicted.entries();
    std::vector<double> before(entries.size());
    std::vector<char> frozen(entries.size(), 0);
    std::map<std::pair<std::string, Year>, Group> rows;
    std::map<std::pair<std::string, Year>, Group> cols;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& x = entries[i];
        if (!(x.consumption_usd >= 0.0)) throw Error("harmonize: negative consumption for brand " + x.brand_id);
        before[i] = x.consumption_usd;
        frozen[i] = options.freeze_observed && x.provenance == Provenance::observed;
        auto t = targets.brand_totals().find({x.brand_id, x.year});
        if (t != targets.brand_totals().end()) {
            auto& g = rows[t->first];
            g.target = t->second;
            g.members.push_back(i);
        }
        auto d = targets.destination_totals().find({x.country, x.year});
        if (d != targets.destination_totals().end()) {
            auto& g = cols[d->first];
            g.target = d->second;
            g.members.push_back(i);
        }
    }
    for (const auto& [key, total] : targets.brand_totals()) {
        if (total > 0.0 && !rows.count(key)) {
            throw Error("cannot scale brand " + year_key(key.first, key.second) + ": no predictions");
        }
    }

    HarmonizeStats local;
    const bool alternating = !cols.empty();
    for (int it = 1;; ++it) {
        for (const auto& [key, g] : rows) scale_group(entries, frozen, g, "brand " + year_key(key.first, key.second));
        if (alternating) {
            for (const auto& [key, g] : cols) {
                scale_group(entries, frozen, g, "destination " + year_key(key.first, key.second));
            }
        }
        double worst = 0.0;
        for (const auto& [key, g] : rows) worst = std::max(worst, group_violation(entries, g));
        for (const auto& [key, g] : cols) worst = std::max(worst, group_violation(entries, g));
        local.iterations = it;
        local.max_violation = worst;
        if (worst <= options.tol) break;
        if (!alternating && worst <= 1e3 * options.tol) break;  // rounding only
        if (it >= options.max_iter) {
            throw Error("harmonize did not converge in " + std::to_string(options.max_iter) +
                        " iterations (max violation " + std::to_string(worst) + ")");
        }
    }

    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].consumption_usd != before[i]) entries[i].provenance = Provenance::harmonized;
    }
    if (stats) *stats = local;
    return ConsumptionMatrix(std::move(entries));
}

}  // namespace dtrade
