#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crv/scenario.hpp"

namespace {

// Exit codes: 0 ok, 2 config error, 3 run error, 4 invariant violation.
constexpr int kExitConfig = 2;
constexpr int kExitRun = 3;
constexpr int kExitInvariant = 4;

std::vector<std::uint64_t> parse_seed_list(const std::string& arg) {
    std::vector<std::uint64_t> seeds;
    std::istringstream in(arg);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (tok.empty()) continue;
        seeds.push_back(std::stoull(tok));
    }
    if (seeds.empty()) throw crv::ConfigError("empty seed list");
    return seeds;
}

void check_output_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw crv::ConfigError("cannot create output directory " + dir + ": " + ec.message());
    const std::string probe = dir + "/.writable";
    {
        std::ofstream f(probe);
        if (!f) throw crv::ConfigError("output directory is not writable: " + dir);
    }
    fs::remove(probe, ec);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"CR-VANET routing simulator: runs scenario sweeps and emits CSV/plot data"};

    std::string scenario_path;
    std::string out_dir = "out";
    std::vector<std::string> protocol_names;
    std::string seed_list;
    bool trace = false;
    bool verbose = false;

    app.add_option("-s,--scenario", scenario_path, "Scenario file (JSON)")->required();
    app.add_option("-o,--out", out_dir, "Output directory (default: out)");
    app.add_option("-p,--protocol", protocol_names,
                   "Only run these protocols (nhdf, greedy); repeatable");
    app.add_option("--seeds", seed_list, "Override the seed list, e.g. 1,2,3");
    app.add_flag("--trace", trace, "Write one JSONL event trace per run cell");
    app.add_flag("-v,--verbose", verbose, "Print per-cell progress");

    CLI11_PARSE(app, argc, argv);

    try {
        crv::ScenarioFile sc = crv::parse_scenario(scenario_path);
        check_output_dir(out_dir); // fail fast before any run starts

        crv::SweepOptions opts;
        if (!protocol_names.empty()) {
            std::vector<crv::ProtocolKind> filter;
            for (const auto& name : protocol_names) {
                if (name == "nhdf") {
                    filter.push_back(crv::ProtocolKind::nhdf);
                } else if (name == "greedy") {
                    filter.push_back(crv::ProtocolKind::greedy_baseline);
                } else {
                    throw crv::ConfigError("unknown protocol filter: " + name);
                }
            }
            opts.protocol_filter = filter;
        }
        if (!seed_list.empty()) opts.seed_override = parse_seed_list(seed_list);
        if (trace) opts.trace_dir = out_dir;

        if (verbose) {
            std::cerr << "scenario: " << scenario_path << "\n"
                      << "cells: " << (opts.protocol_filter ? opts.protocol_filter->size()
                                                            : sc.protocols.size())
                      << " protocol(s) x " << sc.node_counts.size() << " node count(s) x "
                      << (opts.seed_override ? opts.seed_override->size() : sc.seeds.size())
                      << " seed(s)\n";
        }

        std::vector<crv::ResultRow> rows = crv::run_sweep(sc, opts);
        crv::emit_outputs(rows, out_dir);
        std::cout << crv::console_summary(rows);
        if (verbose) {
            std::cerr << "wrote " << rows.size() << " rows to " << out_dir << "/results.csv\n";
        }
        return 0;
    } catch (const crv::InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return kExitInvariant;
    } catch (const crv::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "run error: " << e.what() << "\n";
        return kExitRun;
    }
}
