#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crv/sim.hpp"

namespace crv {

/// Parsed scenario: a SimConfig template plus the sweep axes. The JSON file
/// is strict: unknown keys and duplicate keys are rejected, absent fields
/// fall back to the stock evaluation defaults.
struct ScenarioFile {
    SimConfig base;
    std::vector<int> node_counts{120, 140, 160, 180, 200};
    std::vector<ProtocolKind> protocols{ProtocolKind::nhdf, ProtocolKind::greedy_baseline};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

    bool flows_explicit = false;
    std::vector<FlowSpec> explicit_flows;
    int flow_count = 10;
    double flow_rate_pps = 4.0;
    double flow_start_s = 0.0;
    bool allow_zero_flows = false;
};

/// Parse and validate a scenario from file. Throws ConfigError with the
/// offending line/field in the message.
ScenarioFile parse_scenario(const std::string& path);

/// Same, from an in-memory document (empty text means "all defaults").
ScenarioFile parse_scenario_text(const std::string& text);

/// Concrete flow list for one sweep cell. Random flows are a deterministic
/// function of (scenario, node_count, seed).
std::vector<FlowSpec> resolve_flows(const ScenarioFile& sc, int node_count, std::uint64_t seed);

/// Full SimConfig for one sweep cell.
SimConfig cell_config(const ScenarioFile& sc, int node_count, std::uint64_t seed);

struct ResultRow {
    std::string protocol;
    int node_count = 0;
    std::uint64_t seed = 0;
    MetricsReport report;
};

struct SweepOptions {
    std::optional<std::vector<ProtocolKind>> protocol_filter;
    std::optional<std::vector<std::uint64_t>> seed_override;
    std::string trace_dir; // when non-empty, one JSONL trace file per cell
};

/// Execute every (protocol x node_count x seed) cell in deterministic order.
/// An invariant violation inside any run aborts the sweep naming the cell.
std::vector<ResultRow> run_sweep(const ScenarioFile& sc, const SweepOptions& opts = {});

/// Fixed-header CSV of all rows; %.17g doubles, empty cells for null metrics.
std::string rows_to_csv(const std::vector<ResultRow>& rows);

/// Inverse of rows_to_csv (round-trip exact).
std::vector<ResultRow> parse_csv(const std::string& csv);

/// Write results.csv plus one plot-data file per metric into out_dir.
void emit_outputs(const std::vector<ResultRow>& rows, const std::string& out_dir);

/// Mean +/- std table over seeds, ordered by protocol then node count.
std::string console_summary(const std::vector<ResultRow>& rows);

} // namespace crv
