#include "doctest.h"

#include <cmath>
#include <set>
#include <sstream>

#include "dtrade/boosted.hpp"
#include "dtrade/synth.hpp"
#include "dtrade/util.hpp"
#include "helpers.hpp"

using namespace dtrade;

namespace {

double sse(const RegressionTree& t, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) s += std::pow(y(i) - t.predict(X.row(i)), 2);
    return s;
}

// Oracle: best single split by exhaustive search over midpoints.
double best_single_split_sse(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    std::vector<double> xs(x.data(), x.data() + x.size());
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    double best = (y.array() - y.mean()).square().sum();
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
        double thr = 0.5 * (xs[k] + xs[k + 1]);
        double sl = 0, sr = 0, nl = 0, nr = 0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (x(i) <= thr) sl += y(i), nl += 1;
            else sr += y(i), nr += 1;
        }
        double s = 0;
        for (Eigen::Index i = 0; i < x.size(); ++i) s += std::pow(y(i) - (x(i) <= thr ? sl / nl : sr / nr), 2);
        best = std::min(best, s);
    }
    return best;
}

SampleSet make_samples(const Eigen::MatrixXd& X, const Eigen::VectorXd& y_usd, int n_brands, int n_countries) {
    SampleSet s;
    const auto& names = feature_names();
    s.features.names.assign(names.begin(), names.end());
    s.features.values = X;
    s.target_usd = y_usd;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        s.keys.push_back({"B" + std::to_string(i % n_brands), "C" + std::to_string((i / n_brands) % n_countries), 2021});
    }
    return s;
}

}  // namespace

TEST_CASE("regression tree") {
    SUBCASE("constant target") {
        Eigen::MatrixXd X = Eigen::MatrixXd::Random(20, 3);
        RegressionTree t = fit_tree(X, Eigen::VectorXd::Constant(20, 4.5), 10, 2);
        CHECK(t.split_count() == 0);
        CHECK(t.predict(X.row(3)) == 4.5);
    }
    SUBCASE("step function") {
        Eigen::MatrixXd X(6, 1);
        X << -3, -2, -1, 1, 2, 3;
        Eigen::VectorXd y(6);
        y << 0, 0, 0, 1, 1, 1;
        RegressionTree t = fit_tree(X, y, 1, 2);
        REQUIRE(t.split_count() == 1);
        CHECK(t.nodes[0].threshold == 0.0);
        CHECK(sse(t, X, y) == 0.0);
        CHECK(t.predict(X.row(0)) == 0.0);
        CHECK(t.predict(X.row(5)) == 1.0);
    }
    SUBCASE("max_splits 0 is the mean") {
        Eigen::MatrixXd X = Eigen::MatrixXd::Random(9, 2);
        Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(9, 0, 8);
        RegressionTree t = fit_tree(X, y, 0, 2);
        CHECK(t.nodes.size() == 1);
        CHECK(t.predict(X.row(0)) == doctest::Approx(4.0));
    }
    SUBCASE("one split matches exhaustive search") {
        Rng rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            Eigen::MatrixXd X(15, 1);
            Eigen::VectorXd y(15);
            for (int i = 0; i < 15; ++i) {
                X(i, 0) = std::floor(rng.uniform() * 8);
                y(i) = rng.normal();
            }
            RegressionTree t = fit_tree(X, y, 1, 2);
            CHECK(sse(t, X, y) == doctest::Approx(best_single_split_sse(X.col(0), y)).epsilon(1e-12));
        }
    }
    SUBCASE("min_parent blocks splits") {
        Eigen::MatrixXd X(4, 1);
        X << 1, 2, 3, 4;
        CHECK(fit_tree(X, Eigen::VectorXd::LinSpaced(4, 0, 3), 5, 5).split_count() == 0);
        CHECK_THROWS_AS(fit_tree(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), 1, 2), Error);
    }
}

TEST_CASE("boosted ensemble") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(50, 3);
    SUBCASE("constant target") {
        BoostedEnsemble e = fit_ensemble(X, Eigen::VectorXd::Constant(50, 2.0), HyperParams{});
        CHECK(e.predict(X).isApproxToConstant(2.0));
        for (const auto& t : e.trees) CHECK(t.predict(X.row(0)) == 0.0);
    }
    SUBCASE("training mse is non-increasing") {
        Eigen::VectorXd y = (X.col(0).array() * 3 + X.col(1).array().square()).matrix();
        BoostedEnsemble e = fit_ensemble(X, y, HyperParams{5, 3, 0.1, 150});
        REQUIRE(e.training_mse.size() == 151);
        for (std::size_t i = 1; i < e.training_mse.size(); ++i) CHECK(e.training_mse[i] <= e.training_mse[i - 1]);
        CHECK(e.training_mse.back() <= e.training_mse[1]);
    }
}

TEST_CASE("metrics") {
    Eigen::VectorXd y(3), yhat(3);
    y << 0, 2000, 3000;
    SUBCASE("perfect") {
        Metrics m = metrics(y, y);
        CHECK(m.r2 == 1.0);
        CHECK(m.restricted_r2 == 1.0);
        CHECK(m.accuracy == 1.0);
        CHECK(m.f1 == 1.0);
    }
    SUBCASE("swapped zeros") {
        Eigen::VectorXd a(2), b(2);
        a << 0, 5000;
        b << 5000, 0;
        Metrics m = metrics(a, b);
        CHECK(m.accuracy == 0.0);
        CHECK(m.f1 == 0.0);
    }
    SUBCASE("hand confusion matrix") {
        yhat << 0, 2000, 0;
        Metrics m = metrics(y, yhat);
        CHECK(m.accuracy == doctest::Approx(2.0 / 3.0));
        CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
    }
    SUBCASE("zero variance") { CHECK_THROWS_AS(metrics(Eigen::VectorXd::Constant(3, 7.0), y), Error); }
}

TEST_CASE("to_usd applies the zero threshold") {
    CHECK(to_usd(0.0) == 0.0);
    CHECK(to_usd(std::log(1001.0)) == doctest::Approx(1000.0));
    CHECK(to_usd(std::log(1001.0)) > 0.0);
    CHECK(to_usd(std::log(501.0)) == 0.0);
    CHECK(to_usd(-4.0) == 0.0);
}

TEST_CASE("training-set cleaning") {
    auto t = testing::small_world({"AAA", "BBB", "CCC", "DDD"}, {2021});
    t.firms = {{"F1", "F1", "AAA"}, {"F2", "F2", "BBB"}};
    t.brands = {{"B1", "F1", "Cloud Computing", ""}, {"B2", "F1", "Cloud Computing", ""},
                {"B3", "F1", "Cloud Computing", ""}, {"B4", "F2", "Cloud Computing", ""}};
    t.revenues = {{"F1", "B1", 2021, 5e7}, {"F1", "B2", 2021, 5e7}, {"F1", "B3", 2021, 5e7}, {"F2", "B4", 2021, 9.9e6}};
    const std::vector<std::string> codes = {"AAA", "BBB", "CCC", "DDD"};
    const std::map<std::string, std::vector<double>> vec = {
        {"B1", {1, 2, 3, 4}}, {"B2", {2, 4, 6, 8}}, {"B3", {4, 1, 1, 4}}, {"B4", {1, 1, 1, 1}}};
    for (const auto& [b, v] : vec) {
        for (std::size_t i = 0; i < 4; ++i) t.consumption.push_back({b, codes[i], 2021, v[i] * 1e6, Provenance::observed});
    }
    Dataset ds(t);
    CleaningResult r = clean_training_set(ds, 2021);
    CHECK(r.kept == std::vector<std::string>{"B1", "B2"});
    std::map<std::string, std::string> removed(r.removed.begin(), r.removed.end());
    CHECK(removed.at("B3") == "low correlation with co-national peers");
    CHECK(removed.at("B4") == "revenue below threshold");
}

TEST_CASE("cross-validation fold counts") {
    Dataset ds = testing::load("two_country");
    SampleSet s = observed_samples(ds, 2021);
    ModelSpec spec;
    spec.params.n_cycles = 10;
    auto folds = loco_cv(s, spec);
    CHECK(folds.size() == 2);
    CHECK_THROWS_AS(lopo_cv(s, spec), Error);  // one brand

    Dataset two = synth_world(2, 5, 3, 2, 2, 0.2);
    auto lopo = lopo_cv(observed_samples(two, two.years().back()), spec);
    CHECK(lopo.size() == 2);
}

TEST_CASE("duplicated groups perform like in-sample") {
    Dataset ds = synth_world(1, 12, 10, 40, 4, 0.5);
    SampleSet base = observed_samples(ds, ds.years().back());
    ModelSpec spec;
    spec.params = HyperParams{5, 10, 0.1, 150};

    auto duplicate = [&](bool by_brand, const std::string& key, const std::string& twin) {
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < base.size(); ++i) {
            if ((by_brand ? base.keys[i].brand : base.keys[i].country) == key) rows.push_back(static_cast<Eigen::Index>(i));
        }
        SampleSet extra = base.subset(rows);
        for (auto& k : extra.keys) (by_brand ? k.brand : k.country) = twin;
        SampleSet all = base;
        Eigen::MatrixXd X(all.features.rows() + extra.features.rows(), all.features.cols());
        X << all.features.values, extra.features.values;
        Eigen::VectorXd y(all.target_usd.size() + extra.target_usd.size());
        y << all.target_usd, extra.target_usd;
        all.features.values = X;
        all.target_usd = y;
        all.keys.insert(all.keys.end(), extra.keys.begin(), extra.keys.end());
        return std::pair{all, extra};
    };

    for (bool by_brand : {false, true}) {
        const std::string key = by_brand ? base.keys[0].brand : base.keys[0].country;
        auto [all, twin] = duplicate(by_brand, key, "ZZZ");
        auto folds = by_brand ? lopo_cv(all, spec, 1, false) : loco_cv(all, spec, 1, false);
        const std::string fold_key = std::string(by_brand ? "lopo:" : "loco:") + "ZZZ";
        auto it = std::find_if(folds.begin(), folds.end(), [&](const FoldResult& f) { return f.fold_key == fold_key; });
        REQUIRE(it != folds.end());
        // The fold trains on everything but the twin, which still contains the original rows.
        FittedModel fold_model = fit_model(base, spec);
        Eigen::VectorXd pred = fold_model.predict_log(twin.features);
        Eigen::VectorXd usd(pred.size());
        for (Eigen::Index i = 0; i < pred.size(); ++i) usd(i) = to_usd(pred(i));
        double in_sample = metrics(twin.target_usd, usd).r2;
        INFO(fold_key << " held-out " << it->boosted.r2 << " in-sample " << in_sample);
        CHECK(std::abs(it->boosted.r2 - in_sample) <= 0.05);
    }
}

TEST_CASE("tuning") {
    Rng rng(21);
    const int n = 240;
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(kFeatureCount));
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = rng.normal();
        y(i) = std::exp(12.0 + rng.normal());  // noise, always above the zero threshold
    }
    SampleSet noise = make_samples(X, y, 8, 6);
    ModelSpec spec;
    spec.params.n_cycles = 40;

    SUBCASE("single cell") {
        TuneResult r = tune(noise, HyperGrid{{3}, {7}}, spec);
        CHECK(r.best.max_splits == 3);
        CHECK(r.best.min_parent_size == 7);
        CHECK(r.cells.size() == 1);
    }
    SUBCASE("deep trees overfit noise") {
        TuneResult r = tune(noise, HyperGrid{{1, 50}, {3}}, spec);
        CHECK(r.best.max_splits == 1);
        CHECK(r.cells[0].mse < r.cells[1].mse);
    }
    SUBCASE("ties prefer fewer splits") {
        SampleSet flat = make_samples(X, Eigen::VectorXd::Constant(n, 5e5), 8, 6);
        TuneResult r = tune(flat, HyperGrid{{10, 3}, {3, 10}}, spec);
        for (const auto& c : r.cells) CHECK(c.mse == r.cells[0].mse);
        CHECK(r.best.max_splits == 3);
        CHECK(r.best.min_parent_size == 10);
    }
}

TEST_CASE("model files round-trip exactly") {
    Dataset ds = synth_world(3, 8, 6, 15, 3, 0.5);
    SampleSet s = observed_samples(ds, ds.years().back());
    ModelSpec spec;
    spec.params.n_cycles = 30;
    spec.features = {"product_revenue", "dest_gdp", "distance"};
    FittedModel m = fit_model(s, spec);
    std::stringstream buf;
    save_model(m, buf);
    FittedModel back = load_model(buf);
    CHECK(back.features == m.features);
    CHECK(back.predict_log(s.features) == m.predict_log(s.features));
    std::stringstream again;
    save_model(back, again);
    CHECK(again.str() == buf.str());
}

TEST_CASE("predictions merge with observations") {
    Dataset ds = synth_world(3, 8, 6, 15, 3, 0.5);
    SampleSet s = observed_samples(ds, ds.years().back());
    ModelSpec spec;
    spec.params.n_cycles = 20;
    FittedModel m = fit_model(s, spec);
    ConsumptionMatrix merged = merge_observed(predict_all(m, ds, ds.years()), ds);
    for (const auto& e : ds.consumption().entries()) {
        auto v = merged.find(e.brand_id, e.country, e.year);
        REQUIRE(v.has_value());
        CHECK(*v == e.consumption_usd);
    }
    for (const auto& e : merged.entries()) {
        CHECK(e.consumption_usd >= 0.0);
        if (e.provenance == Provenance::predicted) CHECK((e.consumption_usd == 0.0 || e.consumption_usd >= 1000.0));
    }
}
