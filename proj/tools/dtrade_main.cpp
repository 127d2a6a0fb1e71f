#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dtrade/pipeline.hpp"
#include "dtrade/synth.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> mode;
    std::optional<int> jobs;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "INI config file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "override run.seed");
    cmd->add_option("--out", o.out, "override output directory");
    cmd->add_option("--mode", o.mode, "allocation mode")->check(CLI::IsMember({"subsidiary", "parent_hq"}));
    cmd->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
}

dtrade::PipelineConfig resolve(const Overrides& o) {
    auto cfg = dtrade::PipelineConfig::load(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.out) cfg.out_dir = *o.out;
    if (o.mode) cfg.mode = dtrade::parse_mode(*o.mode);
    if (o.jobs) cfg.jobs = *o.jobs;
    return cfg;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("dtrade");
    logger->set_pattern("%^%l%$: %v");
    spdlog::set_default_logger(logger);
    const char* level = std::getenv("DTRADE_LOG_LEVEL");
    spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Digital trade estimation pipeline"};
    app.set_version_flag("--version", std::string(dtrade::kVersion));
    app.require_subcommand(1);

    Overrides o;
    std::vector<std::string> only;
    auto* run = app.add_subcommand("run", "run every stage (or those given by --stage) and write manifest.json");
    add_common(run, o);
    run->add_option("--stage", only, "stage to run; repeatable")->check(CLI::IsMember(dtrade::stage_names()));

    std::vector<CLI::App*> stage_cmds;
    for (const auto& s : dtrade::stage_names()) {
        auto* cmd = app.add_subcommand(s, "run the " + s + " stage");
        add_common(cmd, o);
        stage_cmds.push_back(cmd);
    }

    dtrade::SynthOptions so;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--seed", so.seed);
    synth->add_option("--countries", so.n_countries)->check(CLI::Range(2, 10000));
    synth->add_option("--firms", so.n_firms)->check(CLI::PositiveNumber);
    synth->add_option("--brands", so.n_brands)->check(CLI::PositiveNumber);
    synth->add_option("--sectors", so.n_sectors)->check(CLI::PositiveNumber);
    synth->add_option("--zero-rate", so.zero_rate)->check(CLI::Range(0.0, 1.0));
    synth->add_option("--alpha", so.alpha);
    synth->add_option("--years", so.years)->delimiter(',');
    synth->add_option("--observed-share", so.observed_share)->check(CLI::Range(0.0, 1.0));
    synth->add_option("--hs4", so.n_hs4)->check(CLI::PositiveNumber);
    bool no_physical = false, no_reference = false;
    synth->add_flag("--no-physical", no_physical);
    synth->add_flag("--no-reference", no_reference);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            so.physical_trade = !no_physical;
            so.reference_exports = !no_reference;
            dtrade::write_dataset(dtrade::synth_world(so), synth_out);
            return 0;
        }
        if (run->parsed()) {
            auto m = dtrade::run_pipeline(resolve(o), only);
            std::cout << "wrote " << m.outputs.size() << " outputs\n";
            return 0;
        }
        for (auto* cmd : stage_cmds) {
            if (cmd->parsed()) dtrade::run_pipeline(resolve(o), {cmd->get_name()});
        }
        return 0;
    } catch (const dtrade::UsageError& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
}
