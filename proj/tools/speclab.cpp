#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>

#include "speclab/harness.hpp"

namespace {

struct Args {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
};

int run(const std::string& experiment, const Args& args) {
    using namespace speclab;
    try {
        json config;
        if (!args.config_path.empty()) {
            config = json::parse(read_text_file(args.config_path));
            if (!config.is_object()) throw ConfigError("config must be a JSON object");
        }
        RunOverrides o;
        o.seed = args.seed;
        o.out_dir = args.out_dir;
        o.threads = args.threads;
        const Manifest m = run_experiment(experiment, std::move(config), o);
        std::printf("%s: wrote %zu output file(s) + manifest (config %s)\n", experiment.c_str(),
                    m.outputs.size(), m.config_hash.substr(0, 12).c_str());
        return 0;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const ResourceError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"speclab: spectral statistics of sparse random Hamiltonians"};
    app.require_subcommand(1);

    Args args;
    static const char* kSubcommands[] = {"sample", "spectrum",     "pnorm",   "resolvent", "dos",
                                         "universality", "qpe", "witness", "bound"};
    static const char* kDescriptions[] = {
        "draw and serialize ensemble instances",
        "full spectrum of an instance (CSV + JSON summary)",
        "normalized Schatten p-norms",
        "Pauli-vs-GUE resolvent moment comparison sweep",
        "density-of-states histogram, resolvent filter curves, low-energy proxy",
        "universality experiments (moment_comparison, norm_tail, telescope, concentration, moment_matching)",
        "phase-estimation sampling from the maximally mixed state",
        "Chebyshev classical witness construction",
        "bound calculators (circuit lower bound, universality formulas)"};

    for (size_t i = 0; i < std::size(kSubcommands); ++i) {
        CLI::App* sub = app.add_subcommand(kSubcommands[i], kDescriptions[i]);
        sub->add_option("--config", args.config_path, "JSON config file");
        sub->add_option("--seed", [&args](const CLI::results_t& r) {
            try {
                args.seed = std::stoull(r[0]);
                return true;
            } catch (...) {
                return false;
            }
        }, "master seed (overrides config)");
        sub->add_option("--out", [&args](const CLI::results_t& r) {
            args.out_dir = r[0];
            return true;
        }, "output directory (overrides config; default $SPECLAB_OUT_ROOT/<cmd>)");
        sub->add_option("--threads", [&args](const CLI::results_t& r) {
            try {
                args.threads = std::stoi(r[0]);
                return true;
            } catch (...) {
                return false;
            }
        }, "worker count (never changes payloads)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return run(app.get_subcommands().front()->get_name(), args);
}
