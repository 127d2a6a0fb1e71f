#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <set>

#include "dtrade/csv.hpp"
#include "dtrade/pipeline.hpp"
#include "dtrade/util.hpp"
#include "helpers.hpp"

using namespace dtrade;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string err;
};

CliResult cli(const std::string& args, const std::string& tag) {
    auto log = fs::temp_directory_path() / ("dtrade_cli_" + tag + ".log");
    std::string cmd = std::string(DTRADE_CLI) + " " + args + " 2> " + log.string() + " > /dev/null";
    int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testing::slurp(log)};
}

PipelineConfig fixture_config(const std::string& name, const std::string& out) {
    PipelineConfig c = PipelineConfig::load(testing::fixture(name + ".ini"));
    c.out_dir = out;
    return c;
}

std::map<std::string, std::string> digests(const RunManifest& m) {
    std::map<std::string, std::string> d;
    for (const auto& o : m.outputs) d[o.file] = o.sha256;
    return d;
}

}  // namespace

TEST_CASE("config loading") {
    auto dir = testing::scratch("config");
    testing::spit(dir / "ok.ini",
                  "[input]\ndir = data\n[run]\nseed = 9\nyears = 2019-2021\n[model]\ngrid_max_splits = 1, 3\n"
                  "[allocation]\nmode = parent_hq\n");
    PipelineConfig c = PipelineConfig::load((dir / "ok.ini").string());
    CHECK(c.input_dir == (dir / "data").string());
    CHECK(c.seed == 9);
    CHECK(c.years == std::vector<Year>{2019, 2020, 2021});
    CHECK(c.grid.max_splits == std::vector<int>{1, 3});
    CHECK(c.mode == AllocationMode::parent_hq);
    CHECK(c.params.learn_rate == 0.1);
    CHECK(c.params.n_cycles == 150);
    CHECK(c.top_k == 11);
    CHECK(c.bounds.level == 0.95);
    CHECK(c.cleaning.min_revenue_usd == 1e7);
    CHECK(c.cleaning.min_peer_correlation == 0.3);
    CHECK(c.zero_threshold == 1000.0);

    PipelineConfig other = c;
    other.jobs = 4;
    other.out_dir = "elsewhere";
    CHECK(other.digest() == c.digest());
    other.seed = 10;
    CHECK(other.digest() != c.digest());

    testing::spit(dir / "bad.ini", "[input]\ndir = data\n[model]\nlearning_rate = 0.2\n");
    CHECK_THROWS_WITH_AS(PipelineConfig::load((dir / "bad.ini").string()), doctest::Contains("unknown key"), UsageError);
    testing::spit(dir / "bad2.ini", "[input]\ndir = data\n[run]\nseed = abc\n");
    CHECK_THROWS_AS(PipelineConfig::load((dir / "bad2.ini").string()), UsageError);
    testing::spit(dir / "bad3.ini", "[run]\nseed = 1\n");
    CHECK_THROWS_AS(PipelineConfig::load((dir / "bad3.ini").string()), UsageError);
}

TEST_CASE("full run on the two-country fixture") {
    auto out = testing::scratch("two_full");
    RunManifest m = run_pipeline(fixture_config("two_country", out.string()));
    auto d = digests(m);
    for (const char* f : {"flows.csv", "eci.csv", "trade_volume.csv", "concentration.csv", "entropy.csv",
                          "centrality.csv", "lorenz.csv", "sector_shares.csv", "cv_report.csv", "model.txt",
                          "lorenz.svg", "sector_shares.svg", "trade_volume.svg"}) {
        CHECK_MESSAGE(d.count(f) == 1, f);
    }
    CHECK(m.stages.size() == stage_names().size());
    RunManifest back = read_manifest((out / "manifest.json").string());
    CHECK(back.config_digest == m.config_digest);
    CHECK(back.dataset_digest == m.dataset_digest);
    CHECK(digests(back) == d);

    auto flows = read_flows((out / "flows.csv").string());
    REQUIRE(flows.size() == 2);
    CHECK(flows[0].origin == "IRL");
    CHECK(flows[0].dest == "USA");
    CHECK(flows[0].value_usd == doctest::Approx(10e6));
    for (const auto& f : flows) CHECK((f.lower_usd <= f.value_usd && f.value_usd <= f.upper_usd));

    auto cv = csv::read_file((out / "cv_report.csv").string());
    CHECK(cv.size() == 2);  // one LOCO fold per country, no LOPO with one brand
}

TEST_CASE("determinism and stage isolation") {
    auto a = testing::scratch("det_a"), b = testing::scratch("det_b");
    auto da = digests(run_pipeline(fixture_config("subsidiary", a.string())));
    auto db = digests(run_pipeline(fixture_config("subsidiary", b.string())));
    CHECK(da == db);

    auto cfg = fixture_config("subsidiary", a.string());
    cfg.jobs = 3;
    CHECK(digests(run_pipeline(cfg, {"allocate", "bounds", "analyze"})) == da);

    for (const char* f : {"flows.csv", "centrality.csv", "eci.csv", "lorenz.svg"}) fs::remove(a / f);
    auto again = digests(run_pipeline(fixture_config("subsidiary", a.string()),
                                      {"allocate", "bounds", "analyze", "complexity", "report"}));
    CHECK(again == da);
}

TEST_CASE("parent_hq restricts origins to parent countries") {
    auto out = testing::scratch("hq");
    auto cfg = fixture_config("subsidiary", out.string());
    cfg.mode = AllocationMode::parent_hq;
    run_pipeline(cfg);
    Dataset ds = testing::load("subsidiary");
    RevenueLedger manual = reassign_to_parent(ds);
    std::set<std::string> allowed;
    for (const auto& e : manual.entries()) {
        if (e.revenue_usd > 0.0) allowed.insert(ds.firm(e.firm_id).country);
    }
    for (const auto& f : read_flows((out / "flows.csv").string())) CHECK(allowed.count(f.origin) == 1);
}

TEST_CASE("cli exit codes and messages") {
    const std::string cfg = testing::fixture("two_country.ini");
    auto out = testing::scratch("cli");

    auto r = cli("analyze --config " + cfg + " --out " + out.string(), "analyze");
    CHECK(r.code == 1);
    CHECK(r.err.find("run allocate first") != std::string::npos);

    CHECK(cli("frobnicate", "unknown").code == 2);
    CHECK(cli("run --config " + cfg + " --mode sideways", "mode").code == 2);
    auto dir = testing::scratch("cli_cfg");
    testing::spit(dir / "c.ini", "[input]\ndir = x\n[nope]\nk = 1\n");
    CHECK(cli("validate --config " + (dir / "c.ini").string(), "badcfg").code == 2);

    for (const char* stage : {"validate", "features", "train", "cv", "predict", "harmonize", "allocate", "bounds",
                              "analyze", "complexity", "report"}) {
        auto s = cli(std::string(stage) + " --config " + cfg + " --out " + out.string() + " --seed 5 --jobs 2", stage);
        CHECK_MESSAGE(s.code == 0, stage << ": " << s.err);
    }
    auto cv = csv::read_file((out / "cv_report.csv").string());
    CHECK(cv.size() == 2);
    for (const char* svg : {"sector_shares.svg", "lorenz.svg", "trade_volume.svg"}) {
        CHECK(testing::slurp(out / svg).find("<svg") == 0);
    }
    auto first = testing::slurp(out / "lorenz.svg");
    CHECK(cli("report --config " + cfg + " --out " + out.string(), "report2").code == 0);
    CHECK(testing::slurp(out / "lorenz.svg") == first);

    auto synth = testing::scratch("cli_synth");
    CHECK(cli("synth --out " + synth.string() + " --countries 4 --brands 5 --firms 3 --sectors 2", "synth").code == 0);
    CHECK(validate(load_dataset(DatasetPaths::in_directory(synth.string()))).empty());
}
