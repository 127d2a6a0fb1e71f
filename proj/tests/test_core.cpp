#include "doctest.h"

#include <cmath>
#include <set>

#include "dtrade/csv.hpp"
#include "dtrade/data_model.hpp"
#include "dtrade/synth.hpp"
#include "dtrade/util.hpp"
#include "helpers.hpp"

using namespace dtrade;

TEST_CASE("csv parsing handles quotes and reports schema errors") {
    auto t = csv::parse("a,b\n\"x,1\",\"say \"\"hi\"\"\"\n2,3\n", "t.csv");
    REQUIRE(t.size() == 2);
    CHECK(t.at(0, "a") == "x,1");
    CHECK(t.at(0, "b") == "say \"hi\"");
    CHECK(t.number(1, "b") == 3.0);
    CHECK_THROWS_AS(t.number(0, "a"), SchemaError);
    try {
        csv::parse("v\n-5\n", "r.csv").non_negative(0, "v");
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        CHECK(e.file() == "r.csv");
        CHECK(e.row() == 2);
        CHECK(e.column() == "v");
        CHECK(std::string(e.what()).find("negative monetary value") != std::string::npos);
    }
    CHECK(csv::quote("plain") == "plain");
    CHECK(csv::quote("a,b") == "\"a,b\"");
}

TEST_CASE("format_number round-trips") {
    for (double v : {0.0, 1.0, 0.1, 1.0 / 3.0, 1e300, -2.5e-12, 123456789.125}) {
        CHECK(std::stod(format_number(v)) == v);
    }
    CHECK(format_number(0.5) == "0.5");
}

TEST_CASE("sha256 matches the standard test vector") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("rng streams are reproducible") {
    Rng a(5), b(5), c(6);
    for (int i = 0; i < 10; ++i) {
        auto x = a.next();
        CHECK(x == b.next());
        (void)c;
    }
    Rng u(9);
    for (int i = 0; i < 1000; ++i) {
        double v = u.uniform();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        CHECK(u.below(7) < 7);
    }
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
}

TEST_CASE("parallel_for fills every slot regardless of job count") {
    for (int jobs : {1, 3}) {
        std::vector<int> v(100, 0);
        parallel_for(v.size(), jobs, [&](std::size_t i) { v[i] = static_cast<int>(i * i); });
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == static_cast<int>(i * i));
    }
}

TEST_CASE("two-country fixture loads") {
    Dataset ds = testing::load("two_country");
    CHECK(ds.countries().size() == 2);
    CHECK(ds.brands().size() == 1);
    std::size_t cross = 0;
    for (const auto& d : ds.dyads()) cross += d.origin != d.dest;
    CHECK(cross == 2);
    CHECK(ds.years() == std::vector<Year>{2020, 2021});
    CHECK(validate(ds).empty());
    CHECK(ds.brand("B1").origin_country == "USA");
    auto by_origin = ds.revenue_by_origin("B1", 2020);
    CHECK(by_origin.at("USA") == doctest::Approx(60e6));
    CHECK(by_origin.at("IRL") == doctest::Approx(40e6));
    CHECK(ds.revenue().world_revenue("B1", 2021) == doctest::Approx(120e6));
}

TEST_CASE("load rejects negative money and dangling references") {
    SUBCASE("negative revenue") {
        auto dir = testing::copy_fixture("two_country", "neg");
        auto text = testing::slurp(dir / "revenues.csv");
        text.replace(text.find("60000000"), 8, "-5");
        testing::spit(dir / "revenues.csv", text);
        CHECK_THROWS_WITH_AS(load_dataset(DatasetPaths::in_directory(dir.string())),
                             doctest::Contains("negative monetary value"), SchemaError);
    }
    SUBCASE("unknown firm") {
        auto dir = testing::copy_fixture("two_country", "dangling");
        testing::spit(dir / "brands.csv", "brand_id,parent_firm_id,sector\nB1,F9,Cloud Computing\n");
        CHECK_THROWS_WITH_AS(load_dataset(DatasetPaths::in_directory(dir.string())),
                             doctest::Contains("referential integrity"), Error);
    }
}

TEST_CASE("validate reports each violation with its location") {
    DatasetTables t = to_tables(testing::load("two_country"));
    SUBCASE("share above one") {
        t.countries[0].years.begin()->second.internet_share = 1.2;
        auto report = validate(Dataset(t));
        REQUIRE(report.size() == 1);
        CHECK(report[0].message == "share out of [0,1]");
    }
    SUBCASE("missing dyads") {
        std::erase_if(t.dyads, [](const DyadRecord& d) { return d.origin != d.dest; });
        auto report = validate(Dataset(t));
        CHECK(report.size() == 2);
        for (const auto& r : report) CHECK(r.message.find("missing dyad") == 0);
    }
}

TEST_CASE("serialization round-trips") {
    Dataset ds = testing::load("subsidiary");
    auto dir = testing::scratch("roundtrip");
    write_dataset(ds, dir.string());
    Dataset back = load_dataset(DatasetPaths::in_directory(dir.string()));
    CHECK(serialize(back) == serialize(ds));
    CHECK(dataset_digest(back) == dataset_digest(ds));
}

TEST_CASE("synthetic worlds are deterministic and valid") {
    Dataset a = synth_world(7, 6, 5, 10, 3, 0.5);
    Dataset b = synth_world(7, 6, 5, 10, 3, 0.5);
    CHECK(dataset_digest(a) == dataset_digest(b));
    CHECK(dataset_digest(a) != dataset_digest(synth_world(8, 6, 5, 10, 3, 0.5)));
    CHECK(validate(a).empty());
    CHECK_THROWS_AS(synth_world(1, 1, 5, 10, 3, 0.5), Error);

    auto zero_fraction = [](const Dataset& ds) {
        double zeros = 0, n = 0;
        for (const auto& e : ds.consumption().entries()) {
            zeros += e.consumption_usd == 0.0;
            n += 1;
        }
        return zeros / n;
    };
    Dataset big = synth_world(3, 40, 30, 120, 6, 0.5);
    CHECK(validate(big).empty());
    double z = zero_fraction(big);
    CHECK(z >= 0.45);
    CHECK(z <= 0.55);
    CHECK(zero_fraction(synth_world(3, 10, 10, 20, 4, 0.0)) == 0.0);
}
