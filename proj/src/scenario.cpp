#include "crv/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace crv {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Parse rejecting duplicate object keys (the default parser keeps the last).
json parse_strict_json(const std::string& text) {
    std::vector<std::set<std::string>> stack;
    auto cb = [&](int /*depth*/, json::parse_event_t event, json& parsed) {
        if (event == json::parse_event_t::object_start) {
            stack.emplace_back();
        } else if (event == json::parse_event_t::object_end) {
            stack.pop_back();
        } else if (event == json::parse_event_t::key) {
            const auto key = parsed.get<std::string>();
            if (!stack.back().insert(key).second) {
                throw ConfigError("duplicate key '" + key + "' in scenario file");
            }
        }
        return true;
    };
    try {
        return json::parse(text, cb);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("scenario parse error: ") + e.what());
    }
}

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!known.count(it.key())) {
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
        }
    }
}

double get_num(const json& obj, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

int get_int(const json& obj, const char* key, int fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
        throw ConfigError(std::string("field '") + key + "' must be an integer");
    }
    return v.get<int>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) throw ConfigError(std::string("field '") + key + "' must be a boolean");
    return v.get<bool>();
}

ProtocolKind parse_protocol(const std::string& name) {
    if (name == "nhdf") return ProtocolKind::nhdf;
    if (name == "greedy") return ProtocolKind::greedy_baseline;
    throw ConfigError("unknown protocol '" + name + "' (expected nhdf or greedy)");
}

} // namespace

ScenarioFile parse_scenario_text(const std::string& text) {
    std::string trimmed = text;
    trimmed.erase(0, trimmed.find_first_not_of(" \t\r\n"));
    json doc = trimmed.empty() ? json::object() : parse_strict_json(text);
    if (!doc.is_object()) throw ConfigError("scenario file must contain a JSON object");

    static const std::set<std::string> top_keys{
        "node_count", "area_side_m", "tx_range_m", "max_speed_mps", "mobility",
        "mobility_step_s", "channel_count", "run_time_s", "packet_size_bytes",
        "data_rate_bps", "queue_capacity", "pu", "ranging", "metric", "discovery",
        "suspicion", "protocols", "seeds", "flows", "allow_zero_flows", "malicious",
        "scripted_nodes", "scripted_freezes"};
    reject_unknown(doc, top_keys, "scenario");

    ScenarioFile sc;
    SimConfig& c = sc.base;

    if (doc.contains("node_count")) {
        const json& nc = doc.at("node_count");
        sc.node_counts.clear();
        if (nc.is_array()) {
            for (const auto& v : nc) sc.node_counts.push_back(v.get<int>());
        } else if (nc.is_number_integer()) {
            sc.node_counts.push_back(nc.get<int>());
        } else {
            throw ConfigError("field 'node_count' must be an integer or integer array");
        }
        if (sc.node_counts.empty()) throw ConfigError("field 'node_count' must not be empty");
        for (int n : sc.node_counts) {
            if (n <= 0) throw ConfigError("field 'node_count' must be positive");
        }
    }

    c.area_side_m = get_num(doc, "area_side_m", c.area_side_m);
    c.tx_range_m = get_num(doc, "tx_range_m", c.tx_range_m);
    c.max_speed_mps = get_num(doc, "max_speed_mps", c.max_speed_mps);
    c.mobility_step_s = get_num(doc, "mobility_step_s", c.mobility_step_s);
    c.channel_count = get_int(doc, "channel_count", c.channel_count);
    c.run_time_s = get_num(doc, "run_time_s", c.run_time_s);
    c.packet_size_bytes = get_int(doc, "packet_size_bytes", c.packet_size_bytes);
    c.data_rate_bps = get_num(doc, "data_rate_bps", c.data_rate_bps);
    c.queue_capacity = get_int(doc, "queue_capacity", c.queue_capacity);

    if (doc.contains("mobility")) {
        std::string m = doc.at("mobility").get<std::string>();
        if (m == "straight_road") {
            c.mobility = HeadingPolicy::straight_road_bidirectional;
        } else if (m == "random_waypoint") {
            c.mobility = HeadingPolicy::random_waypoint;
        } else {
            throw ConfigError("field 'mobility' must be straight_road or random_waypoint");
        }
    }

    if (doc.contains("pu")) {
        const json& p = doc.at("pu");
        reject_unknown(p, {"mean_on_s", "mean_off_s", "grid_cells", "p_miss", "p_false_alarm"},
                       "pu");
        c.pu.mean_on_s = get_num(p, "mean_on_s", c.pu.mean_on_s);
        c.pu.mean_off_s = get_num(p, "mean_off_s", c.pu.mean_off_s);
        c.pu.grid_cells = get_int(p, "grid_cells", c.pu.grid_cells);
        c.pu.p_miss = get_num(p, "p_miss", c.pu.p_miss);
        c.pu.p_false_alarm = get_num(p, "p_false_alarm", c.pu.p_false_alarm);
    }

    if (doc.contains("ranging")) {
        const json& r = doc.at("ranging");
        reject_unknown(r, {"loss_exponent", "wavelength_m", "reference_distance_m", "noise_db"},
                       "ranging");
        c.ranging.loss_exponent = get_num(r, "loss_exponent", c.ranging.loss_exponent);
        c.ranging.wavelength_m = get_num(r, "wavelength_m", c.ranging.wavelength_m);
        c.ranging.reference_distance_m =
            get_num(r, "reference_distance_m", c.ranging.reference_distance_m);
        c.ranging_noise_db = get_num(r, "noise_db", c.ranging_noise_db);
    }

    if (doc.contains("metric")) {
        const json& m = doc.at("metric");
        reject_unknown(m,
                       {"collision_prob", "window_s", "channel_step_delay_s", "theta_floor_rad",
                        "speed_floor_mps", "tau_floor_m", "control_bytes"},
                       "metric");
        c.metric.collision_prob = get_num(m, "collision_prob", c.metric.collision_prob);
        c.metric.window_s = get_num(m, "window_s", c.metric.window_s);
        c.metric.channel_step_delay_s =
            get_num(m, "channel_step_delay_s", c.metric.channel_step_delay_s);
        c.metric.floors.theta_rad = get_num(m, "theta_floor_rad", c.metric.floors.theta_rad);
        c.metric.floors.speed_mps = get_num(m, "speed_floor_mps", c.metric.floors.speed_mps);
        c.metric.floors.tau_m = get_num(m, "tau_floor_m", c.metric.floors.tau_m);
        c.metric.control_bytes = get_int(m, "control_bytes", c.metric.control_bytes);
    }

    if (doc.contains("discovery")) {
        const json& d = doc.at("discovery");
        reject_unknown(d,
                       {"timeout_s", "hop_limit", "retry_backoff_s", "reply_backoff_max_s",
                        "rreq_suppression"},
                       "discovery");
        c.discovery.timeout_s = get_num(d, "timeout_s", c.discovery.timeout_s);
        c.discovery.hop_limit = get_int(d, "hop_limit", c.discovery.hop_limit);
        c.discovery.retry_backoff_s = get_num(d, "retry_backoff_s", c.discovery.retry_backoff_s);
        c.discovery.reply_backoff_max_s =
            get_num(d, "reply_backoff_max_s", c.discovery.reply_backoff_max_s);
        if (d.contains("rreq_suppression")) {
            std::string s = d.at("rreq_suppression").get<std::string>();
            if (s == "per_request") {
                c.discovery.suppression = RreqSuppression::per_request;
            } else if (s == "per_path") {
                c.discovery.suppression = RreqSuppression::per_path;
            } else {
                throw ConfigError("field 'rreq_suppression' must be per_request or per_path");
            }
        }
    }

    if (doc.contains("suspicion")) {
        const json& s = doc.at("suspicion");
        reject_unknown(s, {"window", "drop_threshold", "vote_min_obs", "collect_s", "cooldown_s"},
                       "suspicion");
        c.suspicion.window = get_int(s, "window", c.suspicion.window);
        c.suspicion.drop_threshold = get_num(s, "drop_threshold", c.suspicion.drop_threshold);
        c.suspicion.vote_min_obs = get_int(s, "vote_min_obs", c.suspicion.vote_min_obs);
        c.suspicion.collect_s = get_num(s, "collect_s", c.suspicion.collect_s);
        c.suspicion.cooldown_s = get_num(s, "cooldown_s", c.suspicion.cooldown_s);
    }

    if (doc.contains("protocols")) {
        const json& p = doc.at("protocols");
        if (!p.is_array() || p.empty()) {
            throw ConfigError("field 'protocols' must be a non-empty array");
        }
        sc.protocols.clear();
        for (const auto& v : p) sc.protocols.push_back(parse_protocol(v.get<std::string>()));
    }

    if (doc.contains("seeds")) {
        const json& s = doc.at("seeds");
        if (!s.is_array() || s.empty()) throw ConfigError("field 'seeds' must be a non-empty array");
        sc.seeds.clear();
        for (const auto& v : s) sc.seeds.push_back(v.get<std::uint64_t>());
    }

    sc.allow_zero_flows = get_bool(doc, "allow_zero_flows", false);
    if (doc.contains("flows")) {
        const json& f = doc.at("flows");
        if (f.is_object()) {
            reject_unknown(f, {"count", "rate_pps", "start_s"}, "flows");
            sc.flow_count = get_int(f, "count", sc.flow_count);
            sc.flow_rate_pps = get_num(f, "rate_pps", sc.flow_rate_pps);
            sc.flow_start_s = get_num(f, "start_s", sc.flow_start_s);
            if (sc.flow_count < 0) throw ConfigError("field 'flows.count' must be >= 0");
            if (sc.flow_count == 0 && !sc.allow_zero_flows) {
                throw ConfigError("zero flows requires allow_zero_flows=true");
            }
        } else if (f.is_array()) {
            sc.flows_explicit = true;
            for (const auto& v : f) {
                reject_unknown(v, {"source", "dest", "rate_pps", "start_s"}, "flows[]");
                FlowSpec fs;
                fs.source = v.at("source").get<NodeId>();
                fs.dest = v.at("dest").get<NodeId>();
                fs.rate_pps = get_num(v, "rate_pps", 4.0);
                fs.start_s = get_num(v, "start_s", 0.0);
                sc.explicit_flows.push_back(fs);
            }
            if (sc.explicit_flows.empty() && !sc.allow_zero_flows) {
                throw ConfigError("empty flow list requires allow_zero_flows=true");
            }
        } else {
            throw ConfigError("field 'flows' must be an object or an array");
        }
    } else if (!sc.allow_zero_flows) {
        throw ConfigError(
            "scenario defines no traffic: add a 'flows' entry or set allow_zero_flows=true");
    } else {
        sc.flows_explicit = true; // zero flows, explicitly allowed
    }

    if (doc.contains("malicious")) {
        for (const auto& v : doc.at("malicious")) {
            c.malicious.push_back(v.get<NodeId>());
        }
    }

    if (doc.contains("scripted_nodes")) {
        for (const auto& v : doc.at("scripted_nodes")) {
            reject_unknown(v, {"id", "x", "y", "vx", "vy"}, "scripted_nodes[]");
            ScriptedNode s;
            s.id = v.at("id").get<NodeId>();
            s.pos = {get_num(v, "x", 0.0), get_num(v, "y", 0.0)};
            s.vel = {get_num(v, "vx", 0.0), get_num(v, "vy", 0.0)};
            c.scripted_nodes.push_back(s);
        }
    }

    if (doc.contains("scripted_freezes")) {
        for (const auto& v : doc.at("scripted_freezes")) {
            reject_unknown(v, {"observer", "subject", "time"}, "scripted_freezes[]");
            ScriptedFreeze f;
            f.observer = v.at("observer").get<NodeId>();
            f.subject = v.at("subject").get<NodeId>();
            f.time = get_num(v, "time", 0.0);
            c.scripted_freezes.push_back(f);
        }
    }

    // Validate the template against the smallest swept population so bad
    // fields surface before any run starts.
    SimConfig probe = c;
    probe.node_count = *std::min_element(sc.node_counts.begin(), sc.node_counts.end());
    probe.flows = resolve_flows(sc, probe.node_count, sc.seeds.front());
    probe.validate();
    return sc;
}

ScenarioFile parse_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read scenario file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario_text(ss.str());
}

std::vector<FlowSpec> resolve_flows(const ScenarioFile& sc, int node_count, std::uint64_t seed) {
    if (sc.flows_explicit) {
        for (const auto& f : sc.explicit_flows) {
            if (f.source >= static_cast<NodeId>(node_count) ||
                f.dest >= static_cast<NodeId>(node_count)) {
                throw ConfigError("flow endpoint is not a known node id");
            }
        }
        return sc.explicit_flows;
    }
    // Endpoint draws are independent of the protocol under test, so both
    // protocols face identical workloads per (node_count, seed).
    Rng rng(mix_seed(seed, 0x666c6f7773ULL + static_cast<std::uint64_t>(node_count)));
    std::vector<FlowSpec> flows;
    flows.reserve(sc.flow_count);
    for (int i = 0; i < sc.flow_count; ++i) {
        FlowSpec f;
        f.source = static_cast<NodeId>(rng.uniform_index(node_count));
        do {
            f.dest = static_cast<NodeId>(rng.uniform_index(node_count));
        } while (f.dest == f.source);
        f.rate_pps = sc.flow_rate_pps;
        f.start_s = sc.flow_start_s;
        flows.push_back(f);
    }
    return flows;
}

SimConfig cell_config(const ScenarioFile& sc, int node_count, std::uint64_t seed) {
    SimConfig c = sc.base;
    c.node_count = node_count;
    c.seed = seed;
    c.flows = resolve_flows(sc, node_count, seed);
    return c;
}

std::vector<ResultRow> run_sweep(const ScenarioFile& sc, const SweepOptions& opts) {
    std::vector<ProtocolKind> protocols =
        opts.protocol_filter ? *opts.protocol_filter : sc.protocols;
    std::vector<std::uint64_t> seeds = opts.seed_override ? *opts.seed_override : sc.seeds;

    std::vector<ResultRow> rows;
    for (ProtocolKind proto : protocols) {
        for (int n : sc.node_counts) {
            for (std::uint64_t seed : seeds) {
                SimConfig cfg = cell_config(sc, n, seed);
                std::ofstream trace_file;
                TraceSink sink;
                if (!opts.trace_dir.empty()) {
                    std::ostringstream name;
                    name << opts.trace_dir << "/trace_" << protocol_name(proto) << "_" << n
                         << "_" << seed << ".jsonl";
                    trace_file.open(name.str());
                    if (!trace_file) throw ConfigError("cannot write trace file " + name.str());
                    sink = TraceSink(trace_file);
                }
                try {
                    ResultRow row;
                    row.protocol = protocol_name(proto);
                    row.node_count = n;
                    row.seed = seed;
                    row.report = run_simulation(cfg, proto, sink);
                    rows.push_back(std::move(row));
                } catch (const InvariantViolation& e) {
                    std::ostringstream msg;
                    msg << "invariant violation in cell (" << protocol_name(proto) << ", " << n
                        << " nodes, seed " << seed << "): " << e.what();
                    throw InvariantViolation(msg.str());
                }
            }
        }
    }
    return rows;
}

static const char* kCsvHeader =
    "protocol,node_count,seed,sent,delivered,dropped_queue_overflow,dropped_no_route,"
    "dropped_local_maximum,dropped_link_failure,dropped_hop_limit,dropped_blackhole,"
    "in_flight_at_end,pdr,throughput_pps,throughput_bps,mean_e2e_delay_s";

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream out;
    out << kCsvHeader << "\n";
    for (const auto& r : rows) {
        const MetricsReport& m = r.report;
        out << r.protocol << ',' << r.node_count << ',' << r.seed << ',' << m.sent << ','
            << m.delivered << ',' << m.dropped_queue_overflow << ',' << m.dropped_no_route << ','
            << m.dropped_local_maximum << ',' << m.dropped_link_failure << ','
            << m.dropped_hop_limit << ',' << m.dropped_blackhole << ',' << m.in_flight_at_end
            << ',' << (m.pdr ? fmt_double(*m.pdr) : "") << ',' << fmt_double(m.throughput_pps)
            << ',' << fmt_double(m.throughput_bps) << ','
            << (m.mean_e2e_delay_s ? fmt_double(*m.mean_e2e_delay_s) : "") << "\n";
    }
    return out.str();
}

std::vector<ResultRow> parse_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty CSV");
    if (line != kCsvHeader) throw ConfigError("unexpected CSV header");
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.push_back("");
        if (cells.size() != 16) throw ConfigError("malformed CSV row: " + line);
        ResultRow r;
        r.protocol = cells[0];
        r.node_count = std::stoi(cells[1]);
        r.seed = std::stoull(cells[2]);
        MetricsReport& m = r.report;
        m.sent = std::stoull(cells[3]);
        m.delivered = std::stoull(cells[4]);
        m.dropped_queue_overflow = std::stoull(cells[5]);
        m.dropped_no_route = std::stoull(cells[6]);
        m.dropped_local_maximum = std::stoull(cells[7]);
        m.dropped_link_failure = std::stoull(cells[8]);
        m.dropped_hop_limit = std::stoull(cells[9]);
        m.dropped_blackhole = std::stoull(cells[10]);
        m.in_flight_at_end = std::stoull(cells[11]);
        if (!cells[12].empty()) m.pdr = std::stod(cells[12]);
        m.throughput_pps = std::stod(cells[13]);
        m.throughput_bps = std::stod(cells[14]);
        if (!cells[15].empty()) m.mean_e2e_delay_s = std::stod(cells[15]);
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

struct Agg {
    double mean = 0.0;
    double stddev = 0.0;
    int n = 0;
};

Agg aggregate(const std::vector<double>& xs) {
    Agg a;
    a.n = static_cast<int>(xs.size());
    if (a.n == 0) return a;
    double sum = 0.0;
    for (double x : xs) sum += x;
    a.mean = sum / a.n;
    if (a.n > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - a.mean) * (x - a.mean);
        a.stddev = std::sqrt(ss / (a.n - 1));
    }
    return a;
}

std::vector<std::string> protocols_in(const std::vector<ResultRow>& rows) {
    std::vector<std::string> out;
    for (const auto& r : rows) {
        if (std::find(out.begin(), out.end(), r.protocol) == out.end()) out.push_back(r.protocol);
    }
    return out;
}

std::vector<int> node_counts_in(const std::vector<ResultRow>& rows) {
    std::vector<int> out;
    for (const auto& r : rows) {
        if (std::find(out.begin(), out.end(), r.node_count) == out.end()) {
            out.push_back(r.node_count);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

Agg cell_agg(const std::vector<ResultRow>& rows, const std::string& proto, int n,
             double (*pick)(const MetricsReport&)) {
    std::vector<double> xs;
    for (const auto& r : rows) {
        if (r.protocol != proto || r.node_count != n) continue;
        double v = pick(r.report);
        if (std::isfinite(v)) xs.push_back(v);
    }
    return aggregate(xs);
}

double pick_pdr(const MetricsReport& m) {
    return m.pdr ? *m.pdr : std::numeric_limits<double>::quiet_NaN();
}
double pick_delay(const MetricsReport& m) {
    return m.mean_e2e_delay_s ? *m.mean_e2e_delay_s : std::numeric_limits<double>::quiet_NaN();
}
double pick_throughput(const MetricsReport& m) { return m.throughput_pps; }

void write_plot_file(const std::vector<ResultRow>& rows, const std::string& path,
                     const char* metric, double (*pick)(const MetricsReport&)) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write plot file " + path);
    auto protos = protocols_in(rows);
    out << "# " << metric << " vs node_count; columns: node_count";
    for (const auto& p : protos) out << ' ' << p << "_mean " << p << "_std";
    out << "\n";
    for (int n : node_counts_in(rows)) {
        out << n;
        for (const auto& p : protos) {
            Agg a = cell_agg(rows, p, n, pick);
            out << ' ' << fmt_double(a.mean) << ' ' << fmt_double(a.stddev);
        }
        out << "\n";
    }
}

} // namespace

void emit_outputs(const std::vector<ResultRow>& rows, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream csv(out_dir + "/results.csv", std::ios::binary);
        if (!csv) throw ConfigError("cannot write " + out_dir + "/results.csv");
        csv << rows_to_csv(rows);
    }
    write_plot_file(rows, out_dir + "/pdr.dat", "packet delivery ratio", pick_pdr);
    write_plot_file(rows, out_dir + "/delay.dat", "mean end-to-end delay (s)", pick_delay);
    write_plot_file(rows, out_dir + "/throughput.dat", "throughput (pkts/s)", pick_throughput);
}

std::string console_summary(const std::vector<ResultRow>& rows) {
    std::ostringstream out;
    out << "protocol   nodes  pdr(mean+/-std)      delay_s(mean+/-std)   thr_pps(mean+/-std)\n";
    for (const auto& proto : protocols_in(rows)) {
        for (int n : node_counts_in(rows)) {
            Agg pdr = cell_agg(rows, proto, n, pick_pdr);
            Agg delay = cell_agg(rows, proto, n, pick_delay);
            Agg thr = cell_agg(rows, proto, n, pick_throughput);
            char line[160];
            std::snprintf(line, sizeof(line),
                          "%-10s %5d  %8.4f +/- %-7.4f  %8.4f +/- %-7.4f  %8.3f +/- %-7.3f\n",
                          proto.c_str(), n, pdr.mean, pdr.stddev, delay.mean, delay.stddev,
                          thr.mean, thr.stddev);
            out << line;
        }
    }
    return out.str();
}

} // namespace crv
