#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dtrade/analytics.hpp"
#include "dtrade/boosted.hpp"
#include "dtrade/complexity.hpp"
#include "dtrade/features.hpp"
#include "dtrade/harmonizer.hpp"
#include "dtrade/pipeline.hpp"
#include "dtrade/synth.hpp"
#include "dtrade/transport.hpp"

namespace py = pybind11;
using namespace dtrade;

namespace {

TransportProblem make_problem(const Eigen::VectorXd& revenue, const Eigen::VectorXd& consumption,
                              const Eigen::MatrixXd& weights) {
    TransportProblem p;
    p.product = "P";
    for (Eigen::Index i = 0; i < revenue.size(); ++i) p.origins.push_back("O" + std::to_string(i));
    for (Eigen::Index j = 0; j < consumption.size(); ++j) p.dests.push_back("D" + std::to_string(j));
    p.revenue = revenue;
    p.consumption = consumption;
    p.weights = weights;
    return p;
}

py::dict manifest_dict(const RunManifest& m) {
    py::dict d;
    d["version"] = m.version;
    d["config_digest"] = m.config_digest;
    d["dataset_digest"] = m.dataset_digest;
    d["seed"] = m.seed;
    py::dict outputs;
    for (const auto& o : m.outputs) outputs[py::str(o.file)] = o.sha256;
    d["outputs"] = outputs;
    py::list stages;
    for (const auto& s : m.stages) stages.append(s.stage);
    d["stages"] = stages;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Digital trade estimation: transport allocation, boosted consumption model, analytics.";
    m.attr("__version__") = kVersion;

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("years", &Dataset::years)
        .def_property_readonly("countries",
                               [](const Dataset& d) {
                                   std::vector<std::string> out;
                                   for (const auto& c : d.countries()) out.push_back(c.code);
                                   return out;
                               })
        .def_property_readonly("brands", [](const Dataset& d) {
            std::vector<std::string> out;
            for (const auto& b : d.brands()) out.push_back(b.brand_id);
            return out;
        });

    m.def("load_dataset", [](const std::string& dir) { return load_dataset(DatasetPaths::in_directory(dir)); },
          py::arg("directory"));
    m.def("write_dataset", &write_dataset, py::arg("dataset"), py::arg("directory"));
    m.def(
        "validate",
        [](const Dataset& d) {
            std::vector<std::pair<std::string, std::string>> out;
            for (const auto& i : validate(d)) out.emplace_back(i.location, i.message);
            return out;
        },
        py::arg("dataset"));
    m.def(
        "synth_world",
        [](std::uint64_t seed, int countries, int firms, int brands, int sectors, double zero_rate) {
            return synth_world(seed, countries, firms, brands, sectors, zero_rate);
        },
        py::arg("seed") = 1, py::arg("countries") = 30, py::arg("firms") = 30, py::arg("brands") = 100,
        py::arg("sectors") = 6, py::arg("zero_rate") = 0.5);

    // transport
    m.def(
        "solve_transport",
        [](const Eigen::VectorXd& r, const Eigen::VectorXd& c, const Eigen::MatrixXd& w) {
            Allocation a = solve_transport(make_problem(r, c, w));
            return py::make_tuple(a.X, a.objective);
        },
        py::arg("revenue"), py::arg("consumption"), py::arg("weights"),
        "Exact maximizer of sum(W * X) with row sums = revenue and column sums = consumption.");
    m.def(
        "greedy_allocate",
        [](const Eigen::VectorXd& r, const Eigen::VectorXd& c, const Eigen::MatrixXd& w) {
            Allocation a = greedy_allocate(make_problem(r, c, w));
            return py::make_tuple(a.X, a.objective);
        },
        py::arg("revenue"), py::arg("consumption"), py::arg("weights"));
    m.def(
        "share_interval",
        [](const std::vector<double>& shares, double level) {
            ShareInterval s = share_interval(shares, level);
            return py::make_tuple(s.mean, s.lower, s.upper);
        },
        py::arg("shares"), py::arg("level") = 0.95);

    // boosted model
    py::class_<HyperParams>(m, "HyperParams")
        .def(py::init([](int max_splits, int min_parent_size, double learn_rate, int n_cycles) {
                 return HyperParams{max_splits, min_parent_size, learn_rate, n_cycles};
             }),
             py::arg("max_splits") = 5, py::arg("min_parent_size") = 10, py::arg("learn_rate") = 0.1,
             py::arg("n_cycles") = 150)
        .def_readwrite("max_splits", &HyperParams::max_splits)
        .def_readwrite("min_parent_size", &HyperParams::min_parent_size)
        .def_readwrite("learn_rate", &HyperParams::learn_rate)
        .def_readwrite("n_cycles", &HyperParams::n_cycles);
    py::class_<BoostedEnsemble>(m, "BoostedEnsemble")
        .def("predict", &BoostedEnsemble::predict, py::arg("X"))
        .def_readonly("training_mse", &BoostedEnsemble::training_mse)
        .def_property_readonly("n_trees", [](const BoostedEnsemble& e) { return e.trees.size(); });
    m.def("fit_ensemble", &fit_ensemble, py::arg("X"), py::arg("y"), py::arg("params") = HyperParams{});
    m.def(
        "permutation_importance",
        [](const BoostedEnsemble& e, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Eigen::Index feature,
           std::uint64_t seed, int shuffles) {
            Predictor model = [&](const Eigen::MatrixXd& M) { return e.predict(M); };
            return permutation_importance(model, X, y, feature, seed, shuffles);
        },
        py::arg("model"), py::arg("X"), py::arg("y"), py::arg("feature"), py::arg("seed") = 1,
        py::arg("shuffles") = 5);
    m.def("feature_names", [] {
        const auto& n = feature_names();
        return std::vector<std::string>(n.begin(), n.end());
    });

    // harmonization
    m.def(
        "harmonize",
        [](const std::vector<std::tuple<std::string, std::string, Year, double>>& rows,
           const std::map<std::string, double>& brand_totals, Year year) {
            std::vector<ConsumptionEntry> entries;
            for (const auto& [b, c, y, v] : rows) entries.push_back({b, c, y, v, Provenance::predicted});
            std::map<HarmonizationTargets::BrandKey, double> brands;
            std::map<HarmonizationTargets::SectorKey, double> sectors;
            std::map<std::string, std::string> sector_of;
            for (const auto& [b, v] : brand_totals) {
                brands[{b, year}] = v;
                sectors[{"all", year}] += v;
                sector_of[b] = "all";
            }
            ConsumptionMatrix out = harmonize(ConsumptionMatrix(entries), HarmonizationTargets(brands, sectors, sector_of));
            std::vector<std::tuple<std::string, std::string, Year, double>> result;
            for (const auto& e : out.entries()) result.emplace_back(e.brand_id, e.country, e.year, e.consumption_usd);
            return result;
        },
        py::arg("rows"), py::arg("brand_totals"), py::arg("year"),
        "Scales (brand, country, year, value) rows so each brand sums to its total.");

    // analytics
    m.def("cagr", &cagr, py::arg("v0"), py::arg("v1"), py::arg("years"));
    m.def("shannon_entropy", &shannon_entropy, py::arg("values"));
    m.def(
        "top_share",
        [](const std::vector<double>& v, double mass) {
            TopShare t = top_share(v, mass);
            return py::make_tuple(t.count, t.fraction);
        },
        py::arg("values"), py::arg("mass") = 0.8);
    m.def(
        "lorenz",
        [](const std::vector<double>& v) {
            std::vector<std::pair<double, double>> out;
            for (const auto& p : lorenz(v)) out.emplace_back(p.x, p.y);
            return out;
        },
        py::arg("values"));
    m.def(
        "eigenvector_centrality",
        [](const Eigen::MatrixXd& flows, double teleport) {
            CentralityOptions o;
            o.teleport = teleport;
            return eigenvector_centrality(flows, o);
        },
        py::arg("flows"), py::arg("teleport") = 0.0);
    m.def(
        "decoupling_index", [](double g0, double g1, double e0, double e1) { return decoupling(g0, g1, e0, e1).di; },
        py::arg("gdp0"), py::arg("gdp1"), py::arg("em0"), py::arg("em1"));
    m.def(
        "ols_robust",
        [](const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
            RegressionResult r = ols_robust(y, X);
            py::dict d;
            d["coefficients"] = r.coefficients;
            d["robust_se"] = r.robust_se;
            d["r2"] = r.r2;
            d["adj_r2"] = r.adj_r2;
            d["n"] = r.n;
            return d;
        },
        py::arg("y"), py::arg("X"), "OLS with HC1 errors; X must include the intercept column.");

    // complexity
    m.def(
        "eci_pci",
        [](const Eigen::MatrixXd& values, std::vector<std::string> countries, std::vector<std::string> activities) {
            if (countries.empty()) {
                for (Eigen::Index i = 0; i < values.rows(); ++i) countries.push_back("C" + std::to_string(i));
            }
            if (activities.empty()) {
                for (Eigen::Index j = 0; j < values.cols(); ++j) activities.push_back("P" + std::to_string(j));
            }
            ComplexityScores s = eci_pci(binarize(rca(OutputMatrix{countries, activities, values})));
            py::dict d;
            d["countries"] = s.countries;
            d["eci"] = s.eci;
            d["activities"] = s.activities;
            d["pci"] = s.pci;
            d["map_gap"] = s.map_gap;
            return d;
        },
        py::arg("output"), py::arg("countries") = std::vector<std::string>{},
        py::arg("activities") = std::vector<std::string>{},
        "RCA, binarize and score a country-by-activity output matrix.");
    m.def("mtilde", &mtilde, py::arg("M"));

    // pipeline
    m.def(
        "run_pipeline",
        [](const std::string& config, const std::vector<std::string>& stages, std::optional<std::string> out,
           std::optional<std::uint64_t> seed) {
            PipelineConfig cfg = PipelineConfig::load(config);
            if (out) cfg.out_dir = *out;
            if (seed) cfg.seed = *seed;
            RunManifest m;
            {
                py::gil_scoped_release release;
                m = run_pipeline(cfg, stages);
            }
            return manifest_dict(m);
        },
        py::arg("config"), py::arg("stages") = std::vector<std::string>{}, py::arg("out") = py::none(),
        py::arg("seed") = py::none());
    m.def("stage_names", &stage_names);
}
