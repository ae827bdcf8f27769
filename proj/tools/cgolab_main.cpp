// Command line front end. Every subcommand is a thin wrapper over the named
// pipeline stages in harness.cpp; `run` chains all of them. Exit codes:
// 0 all checks passed, 1 a check failed or a solve aborted, 2 bad usage or
// bad configuration.
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cgolab/harness.hpp"

namespace {

cgolab::Config build_config(const std::string& config_path,
                            const std::vector<std::string>& defines,
                            const std::string& out_dir) {
    std::string text;
    if (!config_path.empty())
        text += "include " + std::filesystem::absolute(config_path).string() + "\n";
    for (const std::string& d : defines) {
        if (d.find('=') == std::string::npos)
            throw cgolab::ConfigError("--define needs key=value, got '" + d + "'");
        text += d + "\n";
    }
    if (!out_dir.empty()) text += "out_dir = " + out_dir + "\n";
    return cgolab::Config::from_string(text, "<command line>");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cgolab: desk-scale laboratory for glued boundary Green functions,\n"
                 "boundary-adapted CGO solutions, and the Fourier identity check"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> defines;
    std::string out_dir;

    const struct {
        const char* name;
        const char* help;
    } kStages[] = {
        {"validate", "structural checks of the configured domain"},
        {"certify", "ellipticity and branch certificates per chart and h"},
        {"operators", "factorization, causal inverse, and pivot contracts"},
        {"greens", "glued Green function interior and trace defects"},
        {"cgo", "CGO assembly, cascade contracts, and remainder solve"},
        {"identity", "nine-term pairing sweep against refined Fourier data"},
        {"run", "all stages in order"},
    };
    for (const auto& s : kStages) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        sub->add_option("-c,--config", config_path, "configuration file (key = value)")
            ->check(CLI::ExistingFile);
        sub->add_option("-D,--define", defines,
                        "override or add one key=value entry (repeatable)");
        sub->add_option("-o,--out-dir", out_dir, "report directory (default: reports)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::vector<std::string> stages;
    for (const auto& s : kStages) {
        if (std::string(s.name) == "run") continue;
        if (app.got_subcommand(s.name)) stages.push_back(s.name);
    }
    if (app.got_subcommand("run"))
        stages = {"validate", "certify", "operators", "greens", "cgo", "identity"};

    try {
        const cgolab::Config cfg = build_config(config_path, defines, out_dir);
        return cgolab::run_stages(cfg, stages);
    } catch (const cgolab::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
