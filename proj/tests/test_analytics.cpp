#include "doctest.h"

#include <cmath>

#include "dtrade/analytics.hpp"
#include "dtrade/util.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dtrade;

TEST_CASE("growth and balances") {
    CHECK(cagr(411e9, 1.02e12, 5) == doctest::Approx(std::pow(1.02e12 / 411e9, 0.2) - 1));
    CHECK(cagr(411e9, 1.02e12, 5) >= 0.195);
    CHECK(cagr(411e9, 1.02e12, 5) <= 0.204);
    CHECK(cagr(17.3e12, 16.1e12, 1) == doctest::Approx(-0.0694).epsilon(1e-4 / 0.0694));
    CHECK(cagr(5, 5, 3) == 0.0);
    CHECK_THROWS(cagr(0, 5, 3));
    CHECK(trade_balance(1.63e12, 2.73e12) == -1.10e12);
    CHECK(trade_balance(7, 7) == 0.0);
    CHECK(combined_balance(-1.10e12, 0.315e12) == doctest::Approx(-0.785e12));
}

TEST_CASE("lorenz and top share") {
    auto t = top_share({80, 10, 5, 5}, 0.8);
    CHECK(t.count == 1);
    CHECK(t.fraction == 0.25);
    for (std::size_t n : {1, 4, 7, 10, 33}) {
        auto u = top_share(std::vector<double>(n, 2.0), 0.8);
        CHECK(u.count == static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(n) - 1e-9)));
    }
    auto curve = lorenz({3, 0, 9, 1, 5});
    REQUIRE(curve.size() == 6);
    CHECK(curve.front().x == 0.0);
    CHECK(curve.front().y == 0.0);
    CHECK(curve.back().x == doctest::Approx(1.0));
    CHECK(curve.back().y == doctest::Approx(1.0));
    // descending order makes the curve concave: slopes never increase
    for (std::size_t i = 2; i < curve.size(); ++i) {
        double s1 = (curve[i - 1].y - curve[i - 2].y) / (curve[i - 1].x - curve[i - 2].x);
        double s2 = (curve[i].y - curve[i - 1].y) / (curve[i].x - curve[i - 1].x);
        CHECK(s2 <= s1 + 1e-12);
    }
    CHECK_THROWS(lorenz({0, 0}));
}

TEST_CASE("a concentrated digital world has a smaller top share than physical trade") {
    std::vector<double> digital = {90, 4, 3, 2, 1, 0, 0, 0, 0, 0};
    std::vector<double> physical = {20, 15, 12, 10, 10, 9, 8, 7, 5, 4};
    CHECK(top_share(digital).fraction < top_share(physical).fraction);
}

TEST_CASE("shannon entropy") {
    CHECK(shannon_entropy({5, 0, 0}) == 0.0);
    CHECK(shannon_entropy({1, 1, 1, 1}) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
    CHECK(std::abs(shannon_entropy({2, 2, 2, 2}) - std::log(4.0)) <= 1e-12);
    CHECK(shannon_entropy({0.5, 0.5, 0}) == doctest::Approx(std::log(2.0)));
    CHECK_THROWS(shannon_entropy({0, 0}));
}

TEST_CASE("random basket entropy") {
    std::vector<PhysicalTradeEntry> single = {{"AAA", "BBB", "0101", 2021, 30}, {"BBB", "AAA", "0101", 2021, 10}};
    auto one = random_basket_entropy(single, 20, 50, 1);
    CHECK(one.mean_entropy == doctest::Approx(shannon_entropy({30, 10})));
    CHECK(one.mean_products == 1.0);

    std::vector<PhysicalTradeEntry> spread;
    const std::vector<std::string> codes = {"AAA", "BBB", "CCC", "DDD", "EEE"};
    for (int h = 0; h < 30; ++h) {
        for (std::size_t o = 0; o < codes.size(); ++o) {
            spread.push_back({codes[o], codes[(o + 1) % codes.size()], std::to_string(1000 + h), 2021,
                              10.0 + static_cast<double>((h * 7 + static_cast<int>(o) * 3) % 11)});
        }
    }
    auto a = random_basket_entropy(spread, 500, 300, 9);
    auto b = random_basket_entropy(spread, 500, 300, 9, 3);
    CHECK(a.mean_entropy == b.mean_entropy);
    CHECK(shannon_entropy({450, 30, 20}) < a.mean_entropy);
    CHECK_THROWS_WITH(random_basket_entropy(spread, 1e9, 10, 1), doctest::Contains("exceeds"));
}

TEST_CASE("eigenvector centrality") {
    Eigen::Matrix2d two;
    two << 0, 3, 3, 0;
    Eigen::VectorXd s2 = eigenvector_centrality(two);
    CHECK(s2(0) == doctest::Approx(0.5));
    CHECK(s2(1) == doctest::Approx(0.5));

    Eigen::Matrix4d star = Eigen::Matrix4d::Zero();
    for (int k = 1; k < 4; ++k) star(0, k) = star(k, 0) = 2.0;
    Eigen::VectorXd s = eigenvector_centrality(star);
    // oracle: a reversible walk on a symmetric graph is stationary at strength / total strength
    Eigen::MatrixXd A = star + star.transpose();
    Eigen::VectorXd strength = A.colwise().sum().transpose();
    for (int i = 0; i < 4; ++i) CHECK(s(i) == doctest::Approx(strength(i) / strength.sum()).epsilon(1e-10));
    CHECK(s(0) == doctest::Approx(0.5));
    CHECK(s(1) == doctest::Approx(1.0 / 6.0));

    Eigen::MatrixXd scaled = 10.0 * star;
    CHECK((eigenvector_centrality(scaled) - s).cwiseAbs().maxCoeff() <= 1e-12);

    Eigen::Matrix4d split = Eigen::Matrix4d::Zero();
    split(0, 1) = 1;
    split(2, 3) = 1;
    CHECK_THROWS_WITH(eigenvector_centrality(split), doctest::Contains("reducible flow graph"));
    CentralityOptions opt;
    opt.teleport = 1e-3;
    Eigen::VectorXd t = eigenvector_centrality(split, opt);
    CHECK(t.sum() == doctest::Approx(1.0));
    CHECK(t.minCoeff() > 0.0);
}

TEST_CASE("decoupling") {
    auto r = decoupling(100, 110, 10, 9.5);
    CHECK(r.d_gdp == doctest::Approx(0.10));
    CHECK(r.d_em == doctest::Approx(-0.05));
    CHECK(r.di == doctest::Approx(1.5));
    CHECK(r.decoupled);
    auto flat = decoupling(100, 110, 10, 10);
    CHECK(flat.di == 1.0);
    CHECK_FALSE(flat.decoupled);
    auto up = decoupling(100, 110, 10, 11);
    CHECK(up.di == doctest::Approx(0.0));
    CHECK_FALSE(up.decoupled);
    CHECK_THROWS(decoupling(100, 100, 10, 9));
}

TEST_CASE("group trends") {
    auto series = [](const std::string& c, bool dec, double dig) {
        CountrySeries s;
        s.country = c;
        s.decoupled = dec;
        s.digital_pc = {{2020, dig}, {2021, dig * 1.1}};
        s.physical_pc = {{2020, 5.0}, {2021, 5.5}};
        return s;
    };
    std::vector<CountrySeries> same = {series("A", true, 3.0), series("B", false, 3.0)};
    auto d = group_trends(same, true), n = group_trends(same, false);
    REQUIRE(d.size() == n.size());
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i].digital_mean == n[i].digital_mean);

    std::vector<CountrySeries> planted = {series("A", true, 4.0), series("B", true, 8.0), series("C", false, 2.0),
                                          series("D", false, 4.0)};
    auto pd = group_trends(planted, true), pn = group_trends(planted, false);
    for (std::size_t i = 0; i < pd.size(); ++i) CHECK(std::abs(pd[i].digital_mean / pn[i].digital_mean - 2.0) <= 1e-9);

    std::vector<CountrySeries> one_side = {series("A", true, 1.0)};
    CHECK_THROWS_WITH(group_trends(one_side, false), doctest::Contains("empty group"));
}

TEST_CASE("robust OLS") {
    const std::vector<double> x = {0, 1, 2, 3, 4}, y = {1, 2, 2, 4, 4};
    Eigen::MatrixXd X(5, 2);
    Eigen::VectorXd Y(5);
    for (int i = 0; i < 5; ++i) X(i, 0) = 1.0, X(i, 1) = x[i], Y(i) = y[i];
    auto r = ols_robust(Y, X, {"intercept", "x"});
    auto o = oracle::simple_hc1(x, y);
    CHECK(r.coefficients(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.coefficients(1) == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(std::abs(r.robust_se(0) - o.se_intercept) <= 1e-10);
    CHECK(std::abs(r.robust_se(1) - o.se_slope) <= 1e-10);

    Eigen::VectorXd exact = X * Eigen::Vector2d(2.0, -0.5);
    auto e = ols_robust(exact, X);
    CHECK(e.r2 == doctest::Approx(1.0));
    CHECK(e.robust_se.cwiseAbs().maxCoeff() <= 1e-10);

    Eigen::MatrixXd X2(10, 2);
    Eigen::VectorXd Y2(10);
    X2 << X, X;
    Y2 << Y, Y;
    auto d = ols_robust(Y2, X2);
    CHECK((d.coefficients - r.coefficients).cwiseAbs().maxCoeff() <= 1e-12);

    Eigen::MatrixXd rank(5, 3);
    rank << X, X.col(1) * 2.0;
    CHECK_THROWS_WITH(ols_robust(Y, rank), doctest::Contains("rank"));
}

TEST_CASE("reference upper bound") {
    std::map<std::string, double> ref = {{"A", 10}, {"B", 100}, {"C", 1000}, {"D", 50}};
    std::map<std::string, double> own;
    for (const auto& [c, v] : ref) own[c] = 3.0 * std::pow(v, 0.7);
    auto exact = reference_upper_bound(own, ref);
    for (const auto& [c, v] : own) CHECK(exact.adjusted.at(c) == doctest::Approx(v).epsilon(1e-9));
    CHECK(exact.slope == doctest::Approx(0.7));

    own["E"] = 0.0;
    ref["E"] = 5000.0;
    auto held = reference_upper_bound(own, ref);
    CHECK(held.adjusted.at("E") == doctest::Approx(3.0 * std::pow(5000.0, 0.7)).epsilon(1e-9));
    CHECK(held.adjusted.at("E") > 0.0);

    std::map<std::string, double> zeros = {{"A", 0}, {"B", 0}, {"C", 0}};
    auto z = reference_upper_bound(own, zeros);
    for (const auto& [c, v] : own) CHECK(z.adjusted.at(c) == v);

    CHECK_THROWS(reference_upper_bound({{"A", 1}, {"B", 2}}, {{"A", 1}, {"B", 3}}));
}

TEST_CASE("fixture decoupling and trade helpers") {
    Dataset ds = testing::load("subsidiary");
    auto recs = classify_decoupling(ds, 2020, 2021, EmissionBasis::production);
    CHECK(recs.size() == 5);
    for (const auto& r : recs) CHECK(r.decoupled == (r.d_gdp > 0.0 && r.di > 1.0));
    auto pt = physical_trade(ds.physical_trade(), 2021);
    double ex = 0, im = 0;
    for (const auto& [c, t] : pt) ex += t.exports, im += t.imports;
    CHECK(ex == doctest::Approx(im));
}
