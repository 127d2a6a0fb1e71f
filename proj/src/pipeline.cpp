#include "dtrade/pipeline.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "dtrade/complexity.hpp"
#include "dtrade/csv.hpp"
#include "dtrade/util.hpp"

namespace fs = std::filesystem;

namespace dtrade {

std::string to_string(AllocationMode m) { return m == AllocationMode::subsidiary ? "subsidiary" : "parent_hq"; }

AllocationMode parse_mode(const std::string& s) {
    if (s == "subsidiary") return AllocationMode::subsidiary;
    if (s == "parent_hq") return AllocationMode::parent_hq;
    throw UsageError("unknown allocation mode '" + s + "' (expected subsidiary or parent_hq)");
}

// ---------------------------------------------------------------------------
// Config

namespace {

std::string trim(std::string s) {
    auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), issp));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), issp).base(), s.end());
    return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos == v.size() && std::isfinite(d)) return d;
    } catch (const std::exception&) {
    }
    throw UsageError("config key '" + key + "': expected a number, got '" + v + "'");
}

long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long long i = std::stoll(v, &pos);
        if (pos == v.size()) return i;
    } catch (const std::exception&) {
    }
    throw UsageError("config key '" + key + "': expected an integer, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const auto& item : split(v, ',')) out.push_back(static_cast<int>(to_int(key, item)));
    if (out.empty()) throw UsageError("config key '" + key + "': empty list");
    return out;
}

std::vector<Year> to_years(const std::string& key, const std::string& v) {
    std::vector<Year> out;
    for (const auto& item : split(v, ',')) {
        auto dash = item.find('-', 1);
        if (dash == std::string::npos) {
            out.push_back(static_cast<Year>(to_int(key, item)));
        } else {
            auto a = static_cast<Year>(to_int(key, trim(item.substr(0, dash))));
            auto b = static_cast<Year>(to_int(key, trim(item.substr(dash + 1))));
            if (b < a) throw UsageError("config key '" + key + "': empty year range " + item);
            for (Year y = a; y <= b; ++y) out.push_back(y);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

}  // namespace

PipelineConfig PipelineConfig::load(const std::string& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw UsageError("cannot read config: " + std::string(e.what()));
    }
    PipelineConfig c;
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).lexically_normal().string(); };

    using Handler = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Handler> handlers = {
        {"input.dir", [&](auto&, auto& v) { c.input_dir = resolve(v); }},
        {"output.dir", [&](auto&, auto& v) { c.out_dir = resolve(v); }},
        {"run.seed", [&](auto& k, auto& v) { c.seed = static_cast<std::uint64_t>(to_int(k, v)); }},
        {"run.jobs", [&](auto& k, auto& v) { c.jobs = static_cast<int>(to_int(k, v)); }},
        {"run.years", [&](auto& k, auto& v) { c.years = to_years(k, v); }},
        {"run.reference_year", [&](auto& k, auto& v) { c.reference_year = static_cast<Year>(to_int(k, v)); }},
        {"model.learn_rate", [&](auto& k, auto& v) { c.params.learn_rate = to_double(k, v); }},
        {"model.n_cycles", [&](auto& k, auto& v) { c.params.n_cycles = static_cast<int>(to_int(k, v)); }},
        {"model.max_splits", [&](auto& k, auto& v) { c.params.max_splits = static_cast<int>(to_int(k, v)); }},
        {"model.min_parent_size", [&](auto& k, auto& v) { c.params.min_parent_size = static_cast<int>(to_int(k, v)); }},
        {"model.grid_max_splits", [&](auto& k, auto& v) { c.grid.max_splits = to_int_list(k, v); }},
        {"model.grid_min_parent_size", [&](auto& k, auto& v) { c.grid.min_parent_size = to_int_list(k, v); }},
        {"model.tune", [&](auto& k, auto& v) { c.tune = to_bool(k, v); }},
        {"model.top_k", [&](auto& k, auto& v) { c.top_k = static_cast<std::size_t>(to_int(k, v)); }},
        {"model.importance_shuffles", [&](auto& k, auto& v) { c.importance_shuffles = static_cast<int>(to_int(k, v)); }},
        {"model.zero_threshold", [&](auto& k, auto& v) { c.zero_threshold = to_double(k, v); }},
        {"cleaning.min_revenue_usd", [&](auto& k, auto& v) { c.cleaning.min_revenue_usd = to_double(k, v); }},
        {"cleaning.min_peer_correlation", [&](auto& k, auto& v) { c.cleaning.min_peer_correlation = to_double(k, v); }},
        {"harmonize.tol", [&](auto& k, auto& v) { c.harmonize.tol = to_double(k, v); }},
        {"harmonize.max_iter", [&](auto& k, auto& v) { c.harmonize.max_iter = static_cast<int>(to_int(k, v)); }},
        {"harmonize.freeze_observed", [&](auto& k, auto& v) { c.harmonize.freeze_observed = to_bool(k, v); }},
        {"allocation.mode", [&](auto&, auto& v) { c.mode = parse_mode(v); }},
        {"allocation.domestic_floor_km", [&](auto& k, auto& v) { c.domestic_floor_km = to_double(k, v); }},
        {"allocation.solver",
         [&](auto&, auto& v) {
             if (v == "lp") c.solver = Solver::lp;
             else if (v == "greedy") c.solver = Solver::greedy;
             else throw UsageError("config key 'allocation.solver': expected lp or greedy");
         }},
        {"bounds.level", [&](auto& k, auto& v) { c.bounds.level = to_double(k, v); }},
        {"bounds.per_origin", [&](auto& k, auto& v) { c.bounds.per_origin = to_bool(k, v); }},
        {"analytics.top_mass", [&](auto& k, auto& v) { c.top_mass = to_double(k, v); }},
        {"analytics.basket_trials", [&](auto& k, auto& v) { c.basket_trials = static_cast<int>(to_int(k, v)); }},
        {"analytics.centrality_teleport", [&](auto& k, auto& v) { c.centrality_teleport = to_double(k, v); }},
        {"analytics.emission_basis",
         [&](auto&, auto& v) {
             if (v == "production") c.emission_basis = EmissionBasis::production;
             else if (v == "consumption") c.emission_basis = EmissionBasis::consumption;
             else throw UsageError("config key 'analytics.emission_basis': expected production or consumption");
         }},
        {"analytics.high_income_only", [&](auto& k, auto& v) { c.high_income_only = to_bool(k, v); }},
        {"analytics.complexity", [&](auto& k, auto& v) { c.complexity = to_bool(k, v); }},
    };

    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) throw UsageError("config: key '" + section + "' outside a section");
        for (const auto& [key, node] : body) {
            const std::string full = section + "." + key;
            auto h = handlers.find(full);
            if (h == handlers.end()) throw UsageError("config: unknown key '" + full + "'");
            h->second(full, trim(node.get_value<std::string>()));
        }
    }
    if (c.input_dir.empty()) throw UsageError("config: [input] dir is required");
    if (c.jobs < 1) throw UsageError("config: run.jobs must be >= 1");
    if (c.top_k < 1 || c.top_k > kFeatureCount) throw UsageError("config: model.top_k must be in [1, 22]");
    if (c.params.n_cycles < 0 || !(c.params.learn_rate >= 0.0)) throw UsageError("config: invalid boosting parameters");
    if (!(c.bounds.level > 0.0 && c.bounds.level < 1.0)) throw UsageError("config: bounds.level must be in (0, 1)");
    if (!(c.domestic_floor_km > 0.0)) throw UsageError("config: allocation.domestic_floor_km must be > 0");
    if (c.basket_trials < 1) throw UsageError("config: analytics.basket_trials must be >= 1");
    return c;
}

std::string PipelineConfig::canonical() const {
    std::ostringstream s;
    s << "years=" << join(years) << '\n';
    s << "reference_year=" << (reference_year ? std::to_string(*reference_year) : "") << '\n';
    s << "seed=" << seed << '\n';
    s << "learn_rate=" << format_number(params.learn_rate) << '\n';
    s << "n_cycles=" << params.n_cycles << '\n';
    s << "max_splits=" << params.max_splits << '\n';
    s << "min_parent_size=" << params.min_parent_size << '\n';
    s << "grid_max_splits=" << join(grid.max_splits) << '\n';
    s << "grid_min_parent_size=" << join(grid.min_parent_size) << '\n';
    s << "tune=" << tune << '\n';
    s << "top_k=" << top_k << '\n';
    s << "importance_shuffles=" << importance_shuffles << '\n';
    s << "zero_threshold=" << format_number(zero_threshold) << '\n';
    s << "min_revenue_usd=" << format_number(cleaning.min_revenue_usd) << '\n';
    s << "min_peer_correlation=" << format_number(cleaning.min_peer_correlation) << '\n';
    s << "harmonize_tol=" << format_number(harmonize.tol) << '\n';
    s << "harmonize_max_iter=" << harmonize.max_iter << '\n';
    s << "freeze_observed=" << harmonize.freeze_observed << '\n';
    s << "mode=" << to_string(mode) << '\n';
    s << "domestic_floor_km=" << format_number(domestic_floor_km) << '\n';
    s << "solver=" << (solver == Solver::lp ? "lp" : "greedy") << '\n';
    s << "level=" << format_number(bounds.level) << '\n';
    s << "per_origin=" << bounds.per_origin << '\n';
    s << "top_mass=" << format_number(top_mass) << '\n';
    s << "basket_trials=" << basket_trials << '\n';
    s << "centrality_teleport=" << format_number(centrality_teleport) << '\n';
    s << "emission_basis=" << to_string(emission_basis) << '\n';
    s << "high_income_only=" << high_income_only << '\n';
    s << "complexity=" << complexity << '\n';
    return s.str();
}

std::string PipelineConfig::digest() const { return sha256_hex(canonical()); }

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {"validate", "features", "train",  "cv",         "predict", "harmonize",
                                                   "allocate", "bounds",   "analyze", "complexity", "report"};
    return names;
}

// ---------------------------------------------------------------------------
// Stage helpers

namespace {

class CsvOut {
public:
    explicit CsvOut(const std::string& path) : file_(path, std::ios::binary), writer_(file_) {
        if (!file_) throw Error("cannot write " + path);
    }
    CsvOut& row(const std::vector<std::string>& fields) {
        writer_.row(fields);
        return *this;
    }

private:
    std::ofstream file_;
    csv::Writer writer_;
};

std::string num(double v) { return std::isnan(v) ? std::string() : format_number(v); }

struct Context {
    const PipelineConfig& cfg;
    fs::path out;

    std::string path(const std::string& name) const { return (out / name).string(); }

    std::string require(const std::string& name, const std::string& stage) const {
        std::string p = path(name);
        if (!fs::exists(p)) throw Error(name + " not found: run " + stage + " first");
        return p;
    }

    Dataset dataset() const { return load_dataset(DatasetPaths::in_directory(cfg.input_dir)); }

    std::vector<Year> years(const Dataset& ds) const {
        if (cfg.years.empty()) return ds.years();
        for (Year y : cfg.years) {
            if (!std::binary_search(ds.years().begin(), ds.years().end(), y)) {
                throw Error("configured year " + std::to_string(y) + " is not in the dataset");
            }
        }
        return cfg.years;
    }

    Year reference_year(const Dataset& ds) const {
        if (cfg.reference_year) return *cfg.reference_year;
        std::set<Year> observed;
        for (const auto& e : ds.consumption().entries()) {
            if (e.provenance == Provenance::observed) observed.insert(e.year);
        }
        if (observed.empty()) throw Error("no observed consumption to train on");
        return *observed.rbegin();
    }
};

std::size_t distinct(const std::vector<SampleKey>& keys, bool by_brand) {
    std::set<std::string> s;
    for (const auto& k : keys) s.insert(by_brand ? k.brand : k.country);
    return s.size();
}

// ---- validate

void stage_validate(const Context& ctx) {
    Dataset ds(read_tables(DatasetPaths::in_directory(ctx.cfg.input_dir)));
    auto report = validate(ds);
    CsvOut out(ctx.path("validation.csv"));
    out.row({"location", "message"});
    for (const auto& issue : report) out.row({issue.location, issue.message});
    if (!report.empty()) {
        throw Error("dataset failed validation with " + std::to_string(report.size()) + " issue(s): " +
                    report.front().location + ": " + report.front().message);
    }
    spdlog::info("dataset valid: {} countries, {} brands, {} years", ds.countries().size(), ds.brands().size(),
                 ds.years().size());
}

// ---- features

void stage_features(const Context& ctx) {
    Dataset ds = ctx.dataset();
    SampleSet all;
    for (Year y : ctx.years(ds)) {
        SampleSet s = observed_samples(ds, y);
        if (all.size() == 0) {
            all = std::move(s);
            continue;
        }
        Eigen::MatrixXd stacked(all.features.rows() + s.features.rows(), all.features.cols());
        stacked << all.features.values, s.features.values;
        Eigen::VectorXd target(all.target_usd.size() + s.target_usd.size());
        target << all.target_usd, s.target_usd;
        all.features.values = std::move(stacked);
        all.target_usd = std::move(target);
        all.keys.insert(all.keys.end(), s.keys.begin(), s.keys.end());
    }
    write_features_csv(all, ctx.path("features.csv"));
}

// ---- train

SampleSet cleaned_training(const Context& ctx, const Dataset& ds, CleaningResult* cleaning = nullptr) {
    Year ry = ctx.reference_year(ds);
    CleaningResult c = clean_training_set(ds, ry, ctx.cfg.cleaning);
    SampleSet s = observed_samples(ds, ry, c.kept);
    if (cleaning) *cleaning = std::move(c);
    return s;
}

void stage_train(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    Dataset ds = ctx.dataset();
    CleaningResult cleaning;
    SampleSet train = cleaned_training(ctx, ds, &cleaning);
    {
        CsvOut out(ctx.path("cleaning.csv"));
        out.row({"brand_id", "status", "reason"});
        std::vector<std::pair<std::string, std::string>> rows;
        for (const auto& b : cleaning.kept) rows.emplace_back(b, "");
        for (const auto& r : cleaning.removed) rows.push_back(r);
        std::sort(rows.begin(), rows.end());
        for (const auto& [b, reason] : rows) out.row({b, reason.empty() ? "kept" : "removed", reason});
    }

    ModelSpec spec{cfg.params, {}, cfg.zero_threshold};
    {
        CsvOut out(ctx.path("tuning.csv"));
        out.row({"max_splits", "min_parent_size", "lopo_mse"});
        if (cfg.tune && distinct(train.keys, true) >= 2) {
            TuneResult tr = tune(train, cfg.grid, spec, cfg.jobs);
            for (const auto& c : tr.cells) {
                out.row({std::to_string(c.max_splits), std::to_string(c.min_parent_size), num(c.mse)});
            }
            spec.params = tr.best;
        } else if (cfg.tune) {
            spdlog::warn("tuning needs at least 2 brands; using max_splits={} min_parent_size={}",
                         spec.params.max_splits, spec.params.min_parent_size);
        }
    }

    const auto& names = feature_names();
    std::vector<std::string> selected(names.begin(), names.end());
    std::map<std::string, double> scores;
    if (cfg.top_k < kFeatureCount) {
        FittedModel full = fit_model(train, spec);
        Eigen::VectorXd y = train.target_usd.array().log1p().matrix();
        Predictor predict = [&](const Eigen::MatrixXd& X) {
            return full.predict_log(FeatureMatrix{train.features.names, X});
        };
        try {
            for (std::size_t f = 0; f < kFeatureCount; ++f) {
                scores[names[f]] = permutation_importance(predict, train.features.values, y,
                                                          static_cast<Eigen::Index>(f),
                                                          derive_seed(cfg.seed, 0x1A7, f), cfg.importance_shuffles);
            }
            selected = select_top(scores, cfg.top_k).names;
        } catch (const Error& e) {
            spdlog::warn("feature selection skipped ({}); keeping all {} features", e.what(), kFeatureCount);
            scores.clear();
        }
    }
    {
        CsvOut out(ctx.path("importance.csv"));
        out.row({"feature", "importance_pct", "selected"});
        for (const auto& n : names) {
            bool sel = std::find(selected.begin(), selected.end(), n) != selected.end();
            out.row({n, scores.count(n) ? num(scores.at(n)) : "", sel ? "1" : "0"});
        }
    }
    // Keep the canonical column order for the selected subset.
    std::vector<std::string> ordered;
    for (const auto& n : names) {
        if (std::find(selected.begin(), selected.end(), n) != selected.end()) ordered.push_back(n);
    }
    spec.features = ordered;
    FittedModel model = fit_model(train, spec);
    save_model(model, ctx.path("model.txt"));
}

// ---- cv

void stage_cv(const Context& ctx) {
    Dataset ds = ctx.dataset();
    FittedModel model = load_model(ctx.require("model.txt", "train"));
    ModelSpec spec{model.ensemble.params, model.features, model.zero_threshold};
    SampleSet train = cleaned_training(ctx, ds);
    std::vector<FoldResult> folds;
    CsvOut summary(ctx.path("cv_summary.csv"));
    summary.row({"scheme", "folds", "mean_r2", "mean_restricted_r2", "mean_accuracy", "mean_f1", "mean_baseline_r2"});
    auto run = [&](const char* scheme, bool by_brand) {
        if (distinct(train.keys, by_brand) < 2) {
            spdlog::warn("{} cross-validation skipped: fewer than 2 {}", scheme, by_brand ? "brands" : "countries");
            return;
        }
        auto f = by_brand ? lopo_cv(train, spec, ctx.cfg.jobs) : loco_cv(train, spec, ctx.cfg.jobs);
        CvSummary s = summarize(f);
        summary.row({scheme, std::to_string(s.folds), num(s.mean_r2), num(s.mean_restricted_r2), num(s.mean_accuracy),
                     num(s.mean_f1), num(s.mean_baseline_r2)});
        folds.insert(folds.end(), f.begin(), f.end());
    };
    run("loco", false);
    run("lopo", true);
    write_cv_report(folds, ctx.path("cv_report.csv"), false);
    write_cv_report(folds, ctx.path("cv_baseline.csv"), true);
}

// ---- predict / harmonize

void stage_predict(const Context& ctx) {
    Dataset ds = ctx.dataset();
    FittedModel model = load_model(ctx.require("model.txt", "train"));
    ConsumptionMatrix m = merge_observed(predict_all(model, ds, ctx.years(ds)), ds);
    write_consumption_csv(m, ctx.path("predicted_consumption.csv"), true);
}

HarmonizationTargets targets_for(const Dataset& ds, const std::vector<Year>& years) {
    std::map<HarmonizationTargets::BrandKey, double> brands;
    std::map<HarmonizationTargets::SectorKey, double> sectors;
    std::map<std::string, std::string> brand_sector;
    for (const auto& b : ds.brands()) brand_sector[b.brand_id] = b.sector;
    for (const auto& e : ds.revenue().entries()) {
        if (std::binary_search(years.begin(), years.end(), e.year)) brands[{e.brand_id, e.year}] += e.revenue_usd;
    }
    for (const auto& [key, total] : brands) sectors[{brand_sector.at(key.first), key.second}] += total;
    return HarmonizationTargets(std::move(brands), std::move(sectors), std::move(brand_sector));
}

void stage_harmonize(const Context& ctx) {
    Dataset ds = ctx.dataset();
    ConsumptionMatrix predicted = read_consumption_csv(ctx.require("predicted_consumption.csv", "predict"));
    HarmonizeStats stats;
    ConsumptionMatrix h = harmonize(predicted, targets_for(ds, ctx.years(ds)), ctx.cfg.harmonize, &stats);
    spdlog::info("harmonized in {} iteration(s), max violation {}", stats.iterations, stats.max_violation);
    write_consumption_csv(h, ctx.path("harmonized_consumption.csv"), true);
}

// ---- allocate / bounds

std::string allocation_file(Year y) { return "allocation_" + std::to_string(y) + ".csv"; }

void stage_allocate(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    Dataset ds = ctx.dataset();
    ConsumptionMatrix consumption = read_consumption_csv(ctx.require("harmonized_consumption.csv", "harmonize"));
    RevenueLedger ledger = cfg.mode == AllocationMode::parent_hq ? reassign_to_parent(ds) : ds.revenue();
    std::vector<FlowRow> flows;
    CsvOut summary(ctx.path("allocation_summary.csv"));
    summary.row({"year", "brand_id", "origins", "destinations", "balance_factor", "objective"});
    for (Year y : ctx.years(ds)) {
        auto problems = build_problems(ds, ledger, consumption, y, cfg.domestic_floor_km);
        auto allocations = allocate(problems, cfg.solver, cfg.jobs);
        write_allocations(allocations, ctx.path(allocation_file(y)));
        for (std::size_t i = 0; i < problems.size(); ++i) {
            summary.row({std::to_string(y), problems[i].product, std::to_string(problems[i].origins.size()),
                         std::to_string(problems[i].dests.size()), num(problems[i].balance_factor),
                         num(allocations[i].objective)});
        }
        auto f = extract_flows(allocations, ds, y);
        flows.insert(flows.end(), f.begin(), f.end());
    }
    write_flows(flows, ctx.path("flows.csv"));
}

void stage_bounds(const Context& ctx) {
    Dataset ds = ctx.dataset();
    std::vector<FlowRow> flows;
    CsvOut intervals(ctx.path("bounds_intervals.csv"));
    intervals.row({"year", "group", "n", "mean_share", "lower_share", "upper_share"});
    for (Year y : ctx.years(ds)) {
        auto allocations = read_allocations(ctx.require(allocation_file(y), "allocate"));
        BoundsResult r = confidence_bounds(allocations, ds, y, ctx.cfg.bounds);
        for (const auto& [g, ci] : r.intervals) {
            intervals.row({std::to_string(y), g, std::to_string(ci.n), num(ci.mean), num(ci.lower), num(ci.upper)});
        }
        flows.insert(flows.end(), r.flows.begin(), r.flows.end());
    }
    write_flows(flows, ctx.path("flows.csv"));
}

// ---- analyze

std::vector<double> by_country(const Dataset& ds, const std::map<std::string, CountryTrade>& trade) {
    std::vector<double> v;
    for (const auto& c : ds.countries()) {
        auto it = trade.find(c.code);
        v.push_back(it == trade.end() ? 0.0 : it->second.exports);
    }
    return v;
}

double total_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

void stage_analyze(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    Dataset ds = ctx.dataset();
    auto flows = read_flows(ctx.require("flows.csv", "allocate"));
    const auto years = ctx.years(ds);
    std::vector<std::string> codes;
    for (const auto& c : ds.countries()) codes.push_back(c.code);

    std::map<Year, std::vector<double>> dig, phys;
    std::map<Year, std::map<std::string, CountryTrade>> dig_trade, phys_trade;
    for (Year y : years) {
        dig_trade[y] = digital_trade(flows, y);
        phys_trade[y] = physical_trade(ds.physical_trade(), y);
        dig[y] = by_country(ds, dig_trade[y]);
        phys[y] = by_country(ds, phys_trade[y]);
    }
    const bool has_phys = ds.has_physical_trade();

    {
        CsvOut volume(ctx.path("trade_volume.csv"));
        volume.row({"year", "digital_usd", "physical_usd"});
        for (Year y : years) volume.row({std::to_string(y), num(total_of(dig[y])), has_phys ? num(total_of(phys[y])) : ""});
        CsvOut growth(ctx.path("growth.csv"));
        growth.row({"series", "year_from", "year_to", "value_from", "value_to", "cagr"});
        auto emit = [&](const char* series, const std::map<Year, std::vector<double>>& m, Year a, Year b) {
            double v0 = total_of(m.at(a)), v1 = total_of(m.at(b));
            if (v0 > 0.0) {
                growth.row({series, std::to_string(a), std::to_string(b), num(v0), num(v1), num(cagr(v0, v1, b - a))});
            }
        };
        for (std::size_t i = 1; i < years.size(); ++i) {
            emit("digital", dig, years[i - 1], years[i]);
            if (has_phys) emit("physical", phys, years[i - 1], years[i]);
        }
        if (years.size() > 2) {
            emit("digital", dig, years.front(), years.back());
            if (has_phys) emit("physical", phys, years.front(), years.back());
        }
    }

    {
        CsvOut out(ctx.path("balances.csv"));
        out.row({"year", "country", "digital_exports", "digital_imports", "digital_net", "physical_exports",
                 "physical_imports", "physical_net", "combined_net", "combined_net_per_capita"});
        for (Year y : years) {
            for (const auto& c : ds.countries()) {
                CountryTrade d = dig_trade[y].count(c.code) ? dig_trade[y].at(c.code) : CountryTrade{};
                CountryTrade p = phys_trade[y].count(c.code) ? phys_trade[y].at(c.code) : CountryTrade{};
                double dn = trade_balance(d.exports, d.imports), pn = trade_balance(p.exports, p.imports);
                double comb = combined_balance(pn, dn);
                auto cy = c.years.find(y);
                std::string pc = cy == c.years.end() ? "" : num(comb / cy->second.population);
                out.row({std::to_string(y), c.code, num(d.exports), num(d.imports), num(dn), num(p.exports),
                         num(p.imports), num(pn), num(comb), pc});
            }
        }
    }

    {
        CsvOut conc(ctx.path("concentration.csv"));
        conc.row({"year", "scope", "mass", "count", "fraction", "countries"});
        CsvOut lor(ctx.path("lorenz.csv"));
        lor.row({"year", "scope", "x", "y"});
        for (Year y : years) {
            for (const auto& [scope, values] : {std::pair{"digital", dig[y]}, std::pair{"physical", phys[y]}}) {
                if (!(total_of(values) > 0.0)) continue;
                TopShare t = top_share(values, cfg.top_mass);
                conc.row({std::to_string(y), scope, num(cfg.top_mass), std::to_string(t.count), num(t.fraction),
                          std::to_string(values.size())});
                for (const auto& p : lorenz(values)) lor.row({std::to_string(y), scope, num(p.x), num(p.y)});
            }
        }
    }

    {
        CsvOut out(ctx.path("entropy.csv"));
        out.row({"year", "scope", "entropy", "detail"});
        for (Year y : years) {
            double total = total_of(dig[y]);
            if (!(total > 0.0)) continue;
            out.row({std::to_string(y), "digital", num(shannon_entropy(dig[y])), ""});
            if (has_phys) {
                std::vector<PhysicalTradeEntry> py;
                for (const auto& p : ds.physical_trade()) {
                    if (p.year == y && p.origin != p.dest) py.push_back(p);
                }
                double ptotal = 0.0;
                for (const auto& p : py) ptotal += p.value_usd;
                if (total <= ptotal) {
                    auto b = random_basket_entropy(py, total, cfg.basket_trials, derive_seed(cfg.seed, 0xE7, y), cfg.jobs);
                    out.row({std::to_string(y), "random_basket", num(b.mean_entropy), num(b.mean_products)});
                } else {
                    spdlog::warn("{}: digital exports exceed physical trade; random-basket entropy skipped", y);
                }
            }
            std::map<std::string, std::map<std::string, double>> per_brand;
            for (const auto& f : flows) {
                if (f.year == y) per_brand[f.brand_id][f.origin] += f.value_usd;
            }
            for (const auto& [brand, m] : per_brand) {
                std::vector<double> v;
                for (const auto& [o, x] : m) v.push_back(x);
                out.row({std::to_string(y), "brand:" + brand, num(shannon_entropy(v)), std::to_string(v.size())});
            }
        }
    }

    {
        CsvOut out(ctx.path("centrality.csv"));
        out.row({"year", "country", "score"});
        CentralityOptions opt;
        opt.teleport = cfg.centrality_teleport;
        for (Year y : years) {
            Eigen::MatrixXd F = flow_matrix(flows, y, codes);
            if (!(F.sum() > 0.0)) continue;
            Eigen::VectorXd s = eigenvector_centrality(F, opt);
            for (std::size_t i = 0; i < codes.size(); ++i) {
                out.row({std::to_string(y), codes[i], num(s(static_cast<Eigen::Index>(i)))});
            }
        }
    }

    {
        CsvOut sec(ctx.path("sector_shares.csv"));
        sec.row({"year", "sector", "share"});
        for (Year y : years) {
            if (!(total_of(dig[y]) > 0.0)) continue;
            for (const auto& [s, share] : sector_shares(flows, y)) sec.row({std::to_string(y), s, num(share)});
        }
    }

    if (ds.has_emissions() && years.size() >= 2) {
        CsvOut out(ctx.path("decoupling.csv"));
        out.row({"country", "basis", "d_gdp_pc", "d_em_pc", "di", "decoupled"});
        for (const auto& r : classify_decoupling(ds, years.front(), years.back(), cfg.emission_basis)) {
            out.row({r.country, to_string(r.basis), num(r.d_gdp), num(r.d_em), num(r.di), r.decoupled ? "1" : "0"});
        }
        try {
            auto rows = group_trends(ds, flows, cfg.emission_basis, cfg.high_income_only);
            CsvOut gt(ctx.path("group_trends.csv"));
            gt.row({"year", "group", "n", "digital_mean_pc", "digital_se_pc", "physical_mean_pc", "physical_se_pc"});
            for (const auto& r : rows) {
                gt.row({std::to_string(r.year), r.decoupled ? "decoupled" : "not_decoupled", std::to_string(r.n),
                        num(r.digital_mean), num(r.digital_se), has_phys ? num(r.physical_mean) : "",
                        has_phys ? num(r.physical_se) : ""});
            }
        } catch (const Error& e) {
            spdlog::warn("group trends skipped: {}", e.what());
        }
    } else {
        spdlog::warn("decoupling skipped: needs emissions and at least two years");
    }

    if (!ds.reference_exports().empty()) {
        Year y = years.back();
        std::map<std::string, double> own, ref;
        for (const auto& [c, t] : dig_trade[y]) own[c] = t.exports;
        for (const auto& r : ds.reference_exports()) {
            if (r.year == y) ref[r.country] += r.value_usd;
        }
        try {
            UpperBoundResult ub = reference_upper_bound(own, ref);
            CsvOut out(ctx.path("upper_bound.csv"));
            out.row({"year", "country", "own_usd", "reference_usd", "adjusted_usd"});
            for (const auto& [c, adj] : ub.adjusted) {
                out.row({std::to_string(y), c, num(own.count(c) ? own.at(c) : 0.0), num(ref.count(c) ? ref.at(c) : 0.0),
                         num(adj)});
            }
            CsvOut fit(ctx.path("upper_bound_fit.csv"));
            fit.row({"year", "intercept", "slope", "n"});
            fit.row({std::to_string(y), num(ub.intercept), num(ub.slope), std::to_string(ub.n)});
        } catch (const Error& e) {
            spdlog::warn("reference upper bound skipped: {}", e.what());
        }
    }
}

// ---- complexity

std::optional<ComplexityScores> scores_for(const OutputMatrix& X, const char* label) {
    if (X.values.size() == 0 || !(X.values.sum() > 0.0)) {
        spdlog::warn("{} complexity skipped: no exports", label);
        return std::nullopt;
    }
    LabelledMatrix M = binarize(rca(X));
    if (M.countries.size() < 3) {
        spdlog::warn("{} complexity skipped: {} exporting countries, at least 3 needed", label, M.countries.size());
        return std::nullopt;
    }
    return eci_pci(M);
}

void write_eci(const std::optional<ComplexityScores>& s, const std::string& path) {
    CsvOut out(path);
    out.row({"country", "eci", "eci_minmax"});
    if (!s) return;
    for (std::size_t i = 0; i < s->countries.size(); ++i) {
        auto k = static_cast<Eigen::Index>(i);
        out.row({s->countries[i], num(s->eci(k)), num(s->eci_minmax(k))});
    }
}

void stage_complexity(const Context& ctx) {
    Dataset ds = ctx.dataset();
    auto flows = read_flows(ctx.require("flows.csv", "allocate"));
    const auto years = ctx.years(ds);
    const Year y = years.back();
    OutputMatrix digital = digital_output(flows, y);
    const bool has_phys = ds.has_physical_trade();
    OutputMatrix physical = has_phys ? physical_output(ds.physical_trade(), y) : OutputMatrix{};
    OutputMatrix merged = has_phys ? merge_digital(physical, digital) : digital;
    write_output_triplets(merged, ctx.path("merged_matrix.csv"));

    std::optional<ComplexityScores> merged_scores, physical_scores;
    if (ctx.cfg.complexity) {
        merged_scores = scores_for(merged, "merged");
        if (has_phys) physical_scores = scores_for(physical, "physical");
    }
    write_eci(merged_scores, ctx.path("eci.csv"));
    if (has_phys) write_eci(physical_scores, ctx.path("eci_physical.csv"));
    {
        CsvOut out(ctx.path("pci.csv"));
        out.row({"activity", "pci", "is_digital"});
        if (merged_scores) {
            for (std::size_t j = 0; j < merged_scores->activities.size(); ++j) {
                const auto& a = merged_scores->activities[j];
                out.row({a, num(merged_scores->pci(static_cast<Eigen::Index>(j))), is_digital_activity(a) ? "1" : "0"});
            }
        }
    }

    CsvOut reg(ctx.path("complexity_regression.csv"));
    reg.row({"model", "dependent", "term", "coefficient", "robust_se", "r2", "adj_r2", "n"});
    auto regress = [&](const std::string& model, const std::optional<ComplexityScores>& s) {
        if (!s) return;
        for (const std::string dependent : {"gdp_pc_growth", "log_emission_intensity"}) {
            std::vector<double> yv, lg, eci;
            for (std::size_t i = 0; i < s->countries.size(); ++i) {
                const auto& c = ds.country(s->countries[i]);
                auto a = c.years.find(years.front()), b = c.years.find(y);
                if (a == c.years.end() || b == c.years.end()) continue;
                double g0 = a->second.gdp_ppp / a->second.population;
                double g1 = b->second.gdp_ppp / b->second.population;
                if (dependent == "gdp_pc_growth") {
                    if (y == years.front()) return;
                    yv.push_back(cagr(g0, g1, y - years.front()));
                    lg.push_back(std::log(g0));
                } else {
                    double em = 0.0, gdp = 0.0, gpc = 0.0;
                    int n = 0;
                    bool ok = true;
                    for (Year t : years) {
                        auto it = c.years.find(t);
                        if (it == c.years.end() || !it->second.emissions_prod) {
                            ok = false;
                            break;
                        }
                        em += *it->second.emissions_prod;
                        gdp += it->second.gdp_ppp;
                        gpc += it->second.gdp_ppp / it->second.population;
                        ++n;
                    }
                    if (!ok || !(em > 0.0)) continue;
                    yv.push_back(std::log(em / gdp));
                    lg.push_back(std::log(gpc / n));
                }
                eci.push_back(s->eci(static_cast<Eigen::Index>(i)));
            }
            const auto n = static_cast<Eigen::Index>(yv.size());
            Eigen::MatrixXd X(n, 3);
            Eigen::VectorXd Y(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                X(i, 0) = 1.0;
                X(i, 1) = lg[static_cast<std::size_t>(i)];
                X(i, 2) = eci[static_cast<std::size_t>(i)];
                Y(i) = yv[static_cast<std::size_t>(i)];
            }
            try {
                auto r = ols_robust(Y, X, {"intercept", "log_gdp_pc", "eci"});
                for (std::size_t k = 0; k < r.names.size(); ++k) {
                    auto kk = static_cast<Eigen::Index>(k);
                    reg.row({model, dependent, r.names[k], num(r.coefficients(kk)), num(r.robust_se(kk)), num(r.r2),
                             num(r.adj_r2), std::to_string(r.n)});
                }
            } catch (const Error& e) {
                spdlog::warn("{} regression on {} skipped: {}", dependent, model, e.what());
            }
        }
    };
    regress("physical", physical_scores);
    regress("physical_and_digital", merged_scores);
}

// ---- report

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                   "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return colors[i % 10];
}

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

constexpr double kW = 640, kH = 400, kL = 70, kR = 170, kT = 40, kB = 50;

void svg_header(std::ostream& o, const std::string& title) {
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    o << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\"" << kH - kB << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB << "\" stroke=\"black\"/>\n";
}

void line_chart(const std::string& path, const std::string& title, const std::vector<Series>& series, bool integer_x) {
    double x0 = 1e300, x1 = -1e300, y1 = 0.0;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    }
    if (x0 > x1) x0 = x1 = 0.0;
    if (x1 == x0) x1 = x0 + 1.0;
    if (!(y1 > 0.0)) y1 = 1.0;
    auto px = [&](double x) { return kL + (x - x0) / (x1 - x0) * (kW - kL - kR); };
    auto py = [&](double y) { return kH - kB - y / y1 * (kH - kT - kB); };
    std::ofstream o(path, std::ios::binary);
    if (!o) throw Error("cannot write " + path);
    svg_header(o, title);
    for (int t = 0; t <= 4; ++t) {
        double v = y1 * t / 4.0;
        o << "<text x=\"" << kL - 6 << "\" y=\"" << fixed(py(v) + 4) << "\" text-anchor=\"end\">" << fixed(v / (y1 >= 1e9 ? 1e9 : 1.0))
          << "</text>\n";
    }
    if (y1 >= 1e9) o << "<text x=\"" << kL << "\" y=\"" << kT - 6 << "\">USD bn</text>\n";
    std::set<double> xs;
    for (const auto& s : series) {
        for (const auto& p : s.points) xs.insert(p.first);
    }
    if (integer_x) {
        for (double x : xs) {
            o << "<text x=\"" << fixed(px(x)) << "\" y=\"" << kH - kB + 16 << "\" text-anchor=\"middle\">"
              << static_cast<long>(x) << "</text>\n";
        }
    } else {
        for (int t = 0; t <= 4; ++t) {
            double x = x0 + (x1 - x0) * t / 4.0;
            o << "<text x=\"" << fixed(px(x)) << "\" y=\"" << kH - kB + 16 << "\" text-anchor=\"middle\">" << fixed(x) << "</text>\n";
        }
    }
    for (std::size_t i = 0; i < series.size(); ++i) {
        o << "<polyline fill=\"none\" stroke=\"" << palette(i) << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : series[i].points) o << fixed(px(x)) << ',' << fixed(py(y)) << ' ';
        o << "\"/>\n";
        o << "<text x=\"" << kW - kR + 10 << "\" y=\"" << kT + 16 * i + 10 << "\" fill=\"" << palette(i) << "\">"
          << series[i].name << "</text>\n";
    }
    o << "</svg>\n";
}

void stacked_bars(const std::string& path, const std::string& title,
                  const std::map<Year, std::vector<std::pair<std::string, double>>>& data) {
    std::vector<std::string> keys;
    for (const auto& [y, v] : data) {
        for (const auto& [k, s] : v) {
            if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
        }
    }
    std::sort(keys.begin(), keys.end());
    std::ofstream o(path, std::ios::binary);
    if (!o) throw Error("cannot write " + path);
    svg_header(o, title);
    const double plot_w = kW - kL - kR, plot_h = kH - kT - kB;
    const double slot = data.empty() ? plot_w : plot_w / static_cast<double>(data.size());
    std::size_t col = 0;
    for (const auto& [y, v] : data) {
        double base = kH - kB;
        for (std::size_t k = 0; k < keys.size(); ++k) {
            auto it = std::find_if(v.begin(), v.end(), [&](const auto& p) { return p.first == keys[k]; });
            if (it == v.end()) continue;
            double h = it->second * plot_h;
            o << "<rect x=\"" << fixed(kL + slot * col + slot * 0.15) << "\" y=\"" << fixed(base - h) << "\" width=\""
              << fixed(slot * 0.7) << "\" height=\"" << fixed(h) << "\" fill=\"" << palette(k) << "\"/>\n";
            base -= h;
        }
        o << "<text x=\"" << fixed(kL + slot * (col + 0.5)) << "\" y=\"" << kH - kB + 16 << "\" text-anchor=\"middle\">" << y
          << "</text>\n";
        ++col;
    }
    for (std::size_t k = 0; k < keys.size(); ++k) {
        o << "<text x=\"" << kW - kR + 10 << "\" y=\"" << kT + 14 * k + 10 << "\" fill=\"" << palette(k) << "\">" << keys[k]
          << "</text>\n";
    }
    o << "</svg>\n";
}

void stage_report(const Context& ctx) {
    csv::Table volume = csv::read_file(ctx.require("trade_volume.csv", "analyze"));
    csv::Table shares = csv::read_file(ctx.require("sector_shares.csv", "analyze"));
    csv::Table lor = csv::read_file(ctx.require("lorenz.csv", "analyze"));

    std::vector<Series> vol{{"digital", {}}, {"physical", {}}};
    for (std::size_t r = 0; r < volume.size(); ++r) {
        double y = volume.integer(r, "year");
        vol[0].points.emplace_back(y, volume.number(r, "digital_usd"));
        if (!volume.at(r, "physical_usd").empty()) vol[1].points.emplace_back(y, volume.number(r, "physical_usd"));
    }
    if (vol[1].points.empty()) vol.pop_back();
    line_chart(ctx.path("trade_volume.svg"), "Trade volume", vol, true);

    std::map<Year, std::vector<std::pair<std::string, double>>> bars;
    for (std::size_t r = 0; r < shares.size(); ++r) {
        bars[shares.integer(r, "year")].emplace_back(shares.at(r, "sector"), shares.number(r, "share"));
    }
    stacked_bars(ctx.path("sector_shares.svg"), "Sector shares of digital exports", bars);

    Year last = 0;
    for (std::size_t r = 0; r < lor.size(); ++r) last = std::max(last, lor.integer(r, "year"));
    std::map<std::string, Series> curves;
    for (std::size_t r = 0; r < lor.size(); ++r) {
        if (lor.integer(r, "year") != last) continue;
        auto& s = curves[lor.at(r, "scope")];
        s.name = lor.at(r, "scope");
        s.points.emplace_back(lor.number(r, "x"), lor.number(r, "y"));
    }
    std::vector<Series> lines{{"equality", {{0.0, 0.0}, {1.0, 1.0}}}};
    for (auto& [k, s] : curves) lines.push_back(std::move(s));
    line_chart(ctx.path("lorenz.svg"), "Export concentration " + std::to_string(last), lines, false);
}

using StageFn = void (*)(const Context&);

const std::map<std::string, StageFn>& stage_table() {
    static const std::map<std::string, StageFn> t = {
        {"validate", stage_validate},   {"features", stage_features}, {"train", stage_train},
        {"cv", stage_cv},               {"predict", stage_predict},   {"harmonize", stage_harmonize},
        {"allocate", stage_allocate},   {"bounds", stage_bounds},     {"analyze", stage_analyze},
        {"complexity", stage_complexity}, {"report", stage_report},
    };
    return t;
}

}  // namespace

void run_stage(const std::string& stage, const PipelineConfig& config) {
    auto it = stage_table().find(stage);
    if (it == stage_table().end()) throw UsageError("unknown stage '" + stage + "'");
    fs::create_directories(config.out_dir);
    Context ctx{config, fs::path(config.out_dir)};
    it->second(ctx);
}

RunManifest run_pipeline(const PipelineConfig& config, const std::vector<std::string>& stages) {
    std::vector<std::string> todo = stages.empty() ? stage_names() : stages;
    for (const auto& s : todo) {
        if (!stage_table().count(s)) throw UsageError("unknown stage '" + s + "'");
    }
    fs::create_directories(config.out_dir);
    RunManifest m;
    m.config_digest = config.digest();
    m.seed = config.seed;
    try {
        m.dataset_digest = dataset_digest(Dataset(read_tables(DatasetPaths::in_directory(config.input_dir))));
    } catch (const Error& e) {
        throw Error("stage 'validate' failed: " + std::string(e.what()));
    }
    for (const auto& s : todo) {
        spdlog::info("stage {}", s);
        auto t0 = std::chrono::steady_clock::now();
        try {
            run_stage(s, config);
        } catch (const Error& e) {
            throw Error("stage '" + s + "' failed: " + std::string(e.what()));
        }
        std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        m.stages.push_back({s, dt.count()});
    }
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(config.out_dir)) {
        if (entry.is_regular_file() && entry.path().filename() != "manifest.json") {
            files.push_back(entry.path().filename().string());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) m.outputs.push_back({f, sha256_file((fs::path(config.out_dir) / f).string())});
    write_manifest(m, (fs::path(config.out_dir) / "manifest.json").string());
    return m;
}

void write_manifest(const RunManifest& m, const std::string& path) {
    nlohmann::ordered_json j;
    j["artifact_version"] = m.version;
    j["config_digest"] = m.config_digest;
    j["dataset_digest"] = m.dataset_digest;
    j["seed"] = m.seed;
    j["stages"] = nlohmann::ordered_json::array();
    for (const auto& s : m.stages) j["stages"].push_back({{"stage", s.stage}, {"seconds", s.seconds}});
    j["outputs"] = nlohmann::ordered_json::array();
    for (const auto& o : m.outputs) j["outputs"].push_back({{"file", o.file}, {"sha256", o.sha256}});
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
        RunManifest m;
        m.version = j.at("artifact_version").get<std::string>();
        m.config_digest = j.at("config_digest").get<std::string>();
        m.dataset_digest = j.at("dataset_digest").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& s : j.at("stages")) m.stages.push_back({s.at("stage").get<std::string>(), s.at("seconds").get<double>()});
        for (const auto& o : j.at("outputs")) m.outputs.push_back({o.at("file").get<std::string>(), o.at("sha256").get<std::string>()});
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed manifest " + path + ": " + e.what());
    }
}

}  // namespace dtrade
