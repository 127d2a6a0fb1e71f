#include "doctest.h"

#include <cmath>

#include "dtrade/transport.hpp"
#include "dtrade/util.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dtrade;

namespace {

TransportProblem problem(std::vector<std::string> o, std::vector<std::string> d, Eigen::VectorXd r, Eigen::VectorXd c,
                         Eigen::MatrixXd w) {
    TransportProblem p;
    p.product = "P";
    p.origins = std::move(o);
    p.dests = std::move(d);
    p.revenue = std::move(r);
    p.consumption = std::move(c);
    p.weights = std::move(w);
    return p;
}

TransportProblem two_by_two() {
    Eigen::MatrixXd w(2, 2);
    w << 1.0, 0.01, 0.01, 1.0;
    return problem({"AAA", "BBB"}, {"AAA", "BBB"}, Eigen::Vector2d(10, 5), Eigen::Vector2d(12, 3), w);
}

// Two countries and one product "P" made by a firm in AAA.
Dataset tiny_dataset() {
    auto t = testing::small_world({"AAA", "BBB"}, {2021});
    t.firms = {{"F1", "F1", "AAA"}};
    t.brands = {{"P", "F1", "Cloud Computing", ""}};
    t.revenues = {{"F1", "P", 2021, 15.0}};
    return Dataset(t);
}

}  // namespace

TEST_CASE("cost weights") {
    auto t = testing::small_world({"AAA", "BBB", "CCC"}, {2021});
    for (auto& d : t.dyads) {
        if (d.origin == "AAA") d.dist_km = d.dest == "BBB" ? 100.0 : 200.0;
    }
    Dataset ds(t);
    Eigen::MatrixXd w = cost_weights(ds, {"AAA"}, {"AAA", "BBB", "CCC"}, 1.0);
    CHECK(w(0, 0) == 1.0);
    CHECK(w(0, 1) == 0.01);
    CHECK(w(0, 1) / w(0, 2) == 2.0);
    CHECK(w(0, 0) > w.rightCols(2).maxCoeff());
    CHECK_THROWS_AS(cost_weights(ds, {"AAA"}, {"BBB"}, 0.0), Error);
}

TEST_CASE("balance") {
    auto p = balance(problem({"A"}, {"A", "B"}, Eigen::VectorXd::Constant(1, 100), Eigen::Vector2d(50, 30),
                             Eigen::MatrixXd::Ones(1, 2)));
    CHECK(p.balance_factor == 1.25);
    CHECK(p.consumption.sum() == doctest::Approx(100.0));
    auto same = balance(problem({"A"}, {"A"}, Eigen::VectorXd::Constant(1, 7), Eigen::VectorXd::Constant(1, 7),
                                Eigen::MatrixXd::Ones(1, 1)));
    CHECK(same.balance_factor == 1.0);
    CHECK(same.consumption(0) == 7.0);
    auto empty = balance(problem({"A"}, {"A"}, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1)));
    CHECK(solve_transport(empty).X.sum() == 0.0);
    CHECK_THROWS_AS(balance(problem({"A"}, {"A"}, Eigen::VectorXd::Constant(1, 1), Eigen::VectorXd::Zero(1),
                                    Eigen::MatrixXd::Ones(1, 1))),
                    Error);
}

TEST_CASE("solve_transport small instances") {
    auto one = solve_transport(problem({"A"}, {"A"}, Eigen::VectorXd::Constant(1, 50), Eigen::VectorXd::Constant(1, 50),
                                       Eigen::MatrixXd::Ones(1, 1)));
    CHECK(one.X(0, 0) == 50.0);

    Allocation a = solve_transport(two_by_two());
    CHECK(a.X(0, 0) == 10.0);
    CHECK(a.X(0, 1) == 0.0);
    CHECK(a.X(1, 0) == 2.0);
    CHECK(a.X(1, 1) == 3.0);
    Allocation g = greedy_allocate(two_by_two());
    CHECK(g.X == a.X);

    auto row = greedy_allocate(problem({"A"}, {"A", "B", "C"}, Eigen::VectorXd::Constant(1, 6), Eigen::Vector3d(1, 2, 3),
                                       Eigen::MatrixXd::Ones(1, 3)));
    CHECK(row.X.row(0).transpose() == Eigen::Vector3d(1, 2, 3));
}

TEST_CASE("solve_transport matches vertex enumeration") {
    Rng rng(2024);
    for (int t = 0; t < 200; ++t) {
        TransportProblem p = oracle::random_instance(rng);
        Allocation a = solve_transport(p);
        CHECK(a.objective == doctest::Approx(oracle::vertex_enumeration(p.revenue, p.consumption, p.weights)).epsilon(1e-12));
        CHECK((a.X.rowwise().sum() - p.revenue).cwiseAbs().maxCoeff() <= 1e-9 * p.revenue.sum());
        CHECK((a.X.colwise().sum().transpose() - p.consumption).cwiseAbs().maxCoeff() <= 1e-9 * p.revenue.sum());
        CHECK(a.X.minCoeff() >= 0.0);
        CHECK(greedy_allocate(p).objective <= a.objective + 1e-9);
    }
}

TEST_CASE("greedy is strictly worse on the triangle instance") {
    Eigen::MatrixXd w(3, 3);
    w << 10, 5, 9, 2, 10, 5, 2, 1, 10;
    auto p = problem({"A", "B", "C"}, {"A", "B", "C"}, Eigen::Vector3d(10, 10, 10), Eigen::Vector3d(15, 10, 5), w);
    CHECK(greedy_allocate(p).objective == doctest::Approx(215.0));
    CHECK(solve_transport(p).objective == doctest::Approx(260.0));
    CHECK(oracle::vertex_enumeration(p.revenue, p.consumption, w) == doctest::Approx(260.0));
}

TEST_CASE("extract_flows") {
    Dataset ds = tiny_dataset();
    Allocation a = solve_transport(two_by_two());
    auto flows = extract_flows({a}, ds, 2021);
    flows.erase(std::remove_if(flows.begin(), flows.end(), [](const FlowRow& f) { return f.value_usd == 0.0; }), flows.end());
    REQUIRE(flows.size() == 1);
    CHECK(flows[0].origin == "BBB");
    CHECK(flows[0].dest == "AAA");
    CHECK(flows[0].value_usd == 2.0);
    CHECK(flows[0].sector == "Cloud Computing");

    Allocation diag = a;
    diag.X << 10, 0, 0, 5;
    CHECK(extract_flows({diag}, ds, 2021).empty());

    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        Allocation r;
        r.product = "P";
        r.origins = r.dests = {"AAA", "BBB"};
        r.X = Eigen::MatrixXd::Random(2, 2).cwiseAbs();
        double total = 0.0;
        for (const auto& f : extract_flows({r}, ds, 2021)) total += f.value_usd;
        CHECK(total == doctest::Approx(r.X.sum() - r.X.trace()).epsilon(1e-15));
    }
}

TEST_CASE("reassign_to_parent") {
    Dataset ds = testing::load("two_country");
    RevenueLedger ledger = reassign_to_parent(ds);
    for (Year y : ds.years()) {
        auto by_origin = ds.revenue_by_origin(ledger, "B1", y);
        CHECK(by_origin.size() == 1);
        CHECK(by_origin.at("USA") == ds.revenue().world_revenue("B1", y));
        CHECK(ledger.world_total(y) == ds.revenue().world_total(y));
    }
    Dataset parents_only = tiny_dataset();
    CHECK(reassign_to_parent(parents_only).entries().size() == parents_only.revenue().entries().size());
    CHECK(reassign_to_parent(parents_only).world_revenue("P", 2021) == 15.0);
}

TEST_CASE("share intervals") {
    ShareInterval ci = share_interval({0.5, 0.6, 0.7});
    CHECK(ci.lower == doctest::Approx(0.4868).epsilon(5e-4 / 0.4868));
    CHECK(ci.upper == doctest::Approx(0.7132).epsilon(5e-4 / 0.7132));
    double half = oracle::inverse_normal(0.975) * 0.1 / std::sqrt(3.0);
    CHECK(ci.lower == doctest::Approx(0.6 - half).epsilon(1e-8));
    CHECK(ci.upper == doctest::Approx(0.6 + half).epsilon(1e-8));

    ShareInterval same = share_interval({0.4, 0.4, 0.4});
    CHECK(same.lower == same.mean);
    CHECK(same.upper == same.mean);
    CHECK(share_interval({0.3}).degenerate);
}

TEST_CASE("confidence bounds bracket the point flows and stay within revenue") {
    Dataset ds = testing::load("subsidiary");
    for (bool per_origin : {false, true}) {
        for (Year y : ds.years()) {
            ConsumptionMatrix cons = ds.consumption();
            auto problems = build_problems(ds, ds.revenue(), cons, y);
            auto allocs = allocate(problems);
            BoundsOptions opt;
            opt.per_origin = per_origin;
            BoundsResult r = confidence_bounds(allocs, ds, y, opt);
            REQUIRE(!r.flows.empty());
            std::map<std::pair<std::string, std::string>, double> upper_by_origin;
            for (const auto& f : r.flows) {
                CHECK(f.lower_usd >= 0.0);
                CHECK(f.lower_usd <= f.value_usd);
                CHECK(f.value_usd <= f.upper_usd);
                upper_by_origin[{f.brand_id, f.origin}] += f.upper_usd;
            }
            for (const auto& [key, up] : upper_by_origin) {
                double rev = ds.revenue_by_origin(key.first, y).at(key.second);
                CHECK(up <= rev * (1 + 1e-12));
            }
        }
    }
}

TEST_CASE("allocation and flow files round-trip") {
    Dataset ds = testing::load("subsidiary");
    auto allocs = allocate(build_problems(ds, ds.revenue(), ds.consumption(), 2021), Solver::lp, 2);
    auto dir = testing::scratch("alloc_io");
    write_allocations(allocs, (dir / "a.csv").string());
    auto back = read_allocations((dir / "a.csv").string());
    REQUIRE(back.size() == allocs.size());
    auto flows = extract_flows(allocs, ds, 2021);
    auto flows_back = extract_flows(back, ds, 2021);
    REQUIRE(flows.size() == flows_back.size());
    for (std::size_t i = 0; i < flows.size(); ++i) CHECK(flows[i].value_usd == flows_back[i].value_usd);
    write_flows(flows, (dir / "f.csv").string());
    auto fb = read_flows((dir / "f.csv").string());
    REQUIRE(fb.size() == flows.size());
    CHECK(fb.back().value_usd == flows.back().value_usd);
}

TEST_CASE("parallel allocation is order-stable") {
    Dataset ds = testing::load("subsidiary");
    auto problems = build_problems(ds, ds.revenue(), ds.consumption(), 2020);
    auto a = allocate(problems, Solver::lp, 1), b = allocate(problems, Solver::lp, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].X == b[i].X);
}
