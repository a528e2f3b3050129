// rsaas: plan, run and report simulated 2oo2 stress campaigns.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rsaas/rsaas.hpp"

namespace fs = std::filesystem;
using namespace rsaas;

namespace {

enum Exit { kOk = 0, kConfig = 2, kSimulation = 3, kAnalysis = 4 };

int exit_code_for(Errc e) {
    switch (e) {
        case Errc::ConfigParse:
        case Errc::InvalidPlatform:
        case Errc::InvalidExperiment:
        case Errc::IncompatiblePlatform:
        case Errc::EmptyFactorList:
        case Errc::EmptyLevels:
        case Errc::DuplicateLevel: return kConfig;
        case Errc::MissingArm:
        case Errc::BadSampleFile:
        case Errc::TooFewSamples:
        case Errc::ZeroVariance:
        case Errc::NonPositiveBase:
        case Errc::InvalidDf: return kAnalysis;
        default: return kSimulation;
    }
}

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint32_t> repetitions;
    std::optional<unsigned> threads;
    bool welch = false;
    bool pooled = false;
    bool merged = false;
    bool trace = false;
};

report::CampaignFile load(const Options& o) {
    report::CampaignFile cf = o.config.empty() ? report::parse_config("") : report::load_config(o.config);
    auto& x = cf.experiment;
    if (o.seed) x.seed = *o.seed;
    if (o.repetitions) {
        if (*o.repetitions < 1) throw Error(Errc::ConfigParse, "--repetitions must be >= 1");
        x.repetitions = *o.repetitions;
    }
    if (o.threads) x.threads = *o.threads;
    if (!o.out.empty()) cf.output.dir = o.out;
    if (o.merged) cf.output.merged = true;
    if (o.welch) cf.output.test = stats::TTestVariant::Welch;
    if (o.pooled) cf.output.test = stats::TTestVariant::Pooled;
    return cf;
}

int cmd_plan(const Options& o) {
    const auto cf = load(o);
    const auto& x = cf.experiment;
    const auto plan = doe::full_factorial(x.factors);
    std::cout << plan.runs.size() << " runs x " << x.repetitions << " repetitions x 2 arms (seed " << x.seed << ")\n";
    for (std::size_t i = 0; i < plan.runs.size(); ++i) {
        const auto& run = plan.runs[i];
        std::cout << run.id << '\n';
        for (const auto& [f, l] : run.assignment) std::cout << "  " << f << " = " << l << '\n';
        const auto with = doe::build_cell(x, plan, i, doe::Arm::With, 0);
        const auto without = doe::build_cell(x, plan, i, doe::Arm::Without, 0);
        for (const auto& line : doe::describe(with))
            if (line.rfind("repetition=", 0) != 0 && line.rfind("seed=", 0) != 0) std::cout << "    " << line << '\n';
        std::cout << "  with-arm only:\n";
        for (const auto& line : doe::diff(with, without)) std::cout << "    " << line << '\n';
    }
    return kOk;
}

int cmd_run(const Options& o) {
    const auto cf = load(o);
    const fs::path dir = cf.output.dir;
    doe::TraceSink sink;
    if (o.trace) {
        fs::create_directories(dir / "trace");
        sink = [dir](const doe::CellSpec& c) -> std::unique_ptr<std::ostream> {
            auto name = report::cell_file_name(c);
            name.replace(name.size() - 4, 4, ".trace");
            auto f = std::make_unique<std::ofstream>(dir / "trace" / name, std::ios::binary);
            *f << "time_ns,seq,kind,subject,aux\n";
            return f;
        };
    }
    const auto data = doe::run_campaign(cf.experiment, sink);
    const auto files = report::write_raw(data, dir, cf.output.merged);
    std::size_t samples = 0;
    for (const auto& c : data.cells) samples += c.result.samples.size();
    std::cout << "wrote " << samples << " samples in " << files.size() << " file(s) under " << (dir / "raw").string()
              << '\n';
    if (o.trace) std::cout << "traces under " << (dir / "trace").string() << '\n';
    return kOk;
}

int cmd_report(const Options& o) {
    const auto cf = load(o);
    const fs::path dir = cf.output.dir;
    const auto samples = report::read_raw_dir(dir / "raw");
    const auto sum = report::summarize(samples, cf.output.test, cf.output.alpha, cf.output.band);
    {
        std::ofstream csv(dir / "summary.csv", std::ios::binary);
        report::write_csv(csv, sum);
        std::ofstream txt(dir / "summary.txt", std::ios::binary);
        report::write_text(txt, sum);
    }
    report::write_text(std::cout, sum);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulated RTDS/2oo2 stress campaigns"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config, "campaign file (YAML)");
    app.add_option("--out", o.out, "output directory (overrides output.dir)");
    app.add_option("--seed", o.seed, "master seed");
    app.add_option("--repetitions", o.repetitions, "seeds per run");
    app.add_option("--threads", o.threads, "worker threads, 0 = all cores");
    auto* welch = app.add_flag("--welch", o.welch, "Welch t-test (default)");
    auto* pooled = app.add_flag("--pooled", o.pooled, "pooled-variance t-test");
    welch->excludes(pooled);
    app.add_flag("--merged", o.merged, "one merged raw CSV instead of one per cell");
    app.add_flag("--trace", o.trace, "dump the event trace of every cell");

    auto* plan = app.add_subcommand("plan", "print the design and every run's parameters");
    auto* run = app.add_subcommand("run", "simulate the campaign and write raw sample CSVs");
    auto* rep = app.add_subcommand("report", "summarize raw CSVs into the results table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    const bool analysing = rep->parsed();
    try {
        if (plan->parsed()) return cmd_plan(o);
        if (run->parsed()) return cmd_run(o);
        return cmd_report(o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return analysing ? kAnalysis : kSimulation;
    }
}
