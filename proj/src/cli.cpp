// Copyright 2026 The d1ht Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "d1ht/cli.hpp"

#include <CLI11.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "d1ht/models.hpp"
#include "d1ht/sim.hpp"
#include "d1ht/wire.hpp"

namespace d1ht::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep))
        out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep)
        out.emplace_back();
    return out;
}

double to_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("not a number: '" + s + "'");
    }
    if (used != s.size() || !std::isfinite(v))
        throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

std::uint64_t to_u64(const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw std::invalid_argument("not an unsigned integer: '" + s + "'");
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw std::invalid_argument("not an unsigned integer: '" + s + "'");
    }
}

bool to_bool(const std::string& s) {
    if (s == "1" || s == "true" || s == "yes" || s == "on")
        return true;
    if (s == "0" || s == "false" || s == "no" || s == "off")
        return false;
    throw std::invalid_argument("not a boolean: '" + s + "'");
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

/// Option values as text, in flag order. Flags and the config file write the same slots.
struct Options {
    std::map<std::string, std::string> values;
    std::map<std::string, bool> given;

    void add(CLI::App& app, const std::string& name, const std::string& help, const std::string& def = "") {
        values[name] = def;
        given[name] = false;
        app.add_option("--" + name, values[name], help);
    }

    void load_config(const std::string& path) {
        std::ifstream in(path);
        if (!in)
            throw std::invalid_argument("cannot read config file " + path);
        std::string line;
        unsigned lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            line = trim(line);
            if (line.empty() || line[0] == '#')
                continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key=value");
            auto key = trim(line.substr(0, eq));
            if (key.rfind("--", 0) == 0)
                key = key.substr(2);
            if (values.count(key) == 0 || key == "config")
                throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
            values[key] = trim(line.substr(eq + 1));
            given[key] = true;
        }
    }

    const std::string& operator[](const std::string& k) const { return values.at(k); }
    bool has(const std::string& k) const { return given.at(k) || !values.at(k).empty(); }
};

void finish_parse(CLI::App& sub, Options& o) {
    for (auto& [name, g] : o.given)
        g = sub.count("--" + name) > 0;
    if (!o["config"].empty())
        o.load_config(o["config"]);
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::invalid_argument("cannot write " + path);
    f << text;
    if (!f)
        throw std::invalid_argument("cannot write " + path);
}

std::vector<std::size_t> to_sizes(const std::vector<double>& xs) {
    std::vector<std::size_t> out;
    for (double x : xs) {
        const double r = std::round(x);
        if (r < 2 || r > 1e9)
            throw std::invalid_argument("simulated n must lie in [2, 1e9]");
        out.push_back(static_cast<std::size_t>(r));
    }
    return out;
}

std::string model_csv(const Options& o) {
    const auto ns = parse_grid(o["n"]);
    const auto savg_min = parse_grid(o["savg-min"]);
    const double f = to_double(o["f"]);
    const double delta = to_double(o["delta-ms"]) / 1000.0;
    std::ostringstream os;
    if (!o["phi"].empty()) {
        const auto phis = parse_grid(o["phi"]);
        os << "n,s_avg,phi,gain\n";
        for (double s : savg_min)
            for (double phi : phis)
                for (double n : ns) {
                    models::ModelParams p{n, s * 60.0, f, delta};
                    if (delta > 0)
                        p.rule = models::ThetaRule::explicit_delay;
                    os << fmt(n) << ',' << fmt(s * 60.0) << ',' << fmt(phi) << ','
                       << fmt(models::quarantine_gain(p, phi)) << '\n';
                }
        return os.str();
    }
    std::vector<double> s_sec;
    for (double s : savg_min)
        s_sec.push_back(s * 60.0);
    models::write_csv(os, models::bandwidth_curves(ns, s_sec, f, delta));
    return os.str();
}

const char* kSimHeader =
    "n,s_avg_min,f,delta_ms,protocol,quarantine_tq,reuse_ids,lookup_rate,kill_fraction,duration,seed,"
    "one_hop_fraction,mean_hops,lookups,routing_failures,bootstrap_fallbacks,mean_bps,p50_bps,p99_bps,"
    "maintenance_bps,model_bps,mean_msgs_per_interval,mean_theta,stale_fraction,event_rate,events_generated,"
    "events_complete,missing_acks_carrier,missing_acks_broken_chain,missing_acks_unattributed,broken_chain_loss_rate,duplicate_acks,mean_detect,mean_ack_latency,"
    "mean_last_ack,p95_last_ack,mean_total_time,mean_live,joins,leaves,gateway_lookups,gateway_mean_hops,"
    "member_session_fraction\n";

sim::SimConfig base_sim_config(const Options& o) {
    sim::SimConfig c;
    c.f = to_double(o["f"]);
    c.delta_avg = to_double(o["delta-ms"]) / 1000.0;
    c.duration = to_double(o["duration"]);
    const auto& dm = o["delay-model"];
    if (dm == "constant")
        c.delay_model = sim::DelayModel::constant;
    else if (dm == "exponential")
        c.delay_model = sim::DelayModel::exponential;
    else
        throw std::invalid_argument("delay-model must be constant or exponential");
    const auto& proto = o["protocol"];
    if (proto == "d1ht")
        c.protocol = sim::Protocol::d1ht;
    else if (proto == "calot")
        c.protocol = sim::Protocol::calot;
    else
        throw std::invalid_argument("protocol must be d1ht or calot");
    c.quarantine.t_q = to_double(o["quarantine-tq"]);
    c.quarantine.gateways = static_cast<std::size_t>(to_u64(o["gateways"]));
    c.reuse_ids = to_bool(o["reuse-ids"]);
    c.lookup_rate = to_double(o["lookup-rate"]);
    c.kill_fraction = to_double(o["kill-fraction"]);
    c.rejoin_delay = to_double(o["rejoin-delay"]);
    c.warmup_start = static_cast<std::size_t>(to_u64(o["warmup-start"]));
    c.warmup_join_rate = to_double(o["warmup-rate"]);
    const auto& churn = o["churn"];
    if (churn == "poisson")
        c.churn = sim::ChurnModel::poisson;
    else if (churn == "sessions")
        c.churn = sim::ChurnModel::sessions;
    else
        throw std::invalid_argument("churn must be poisson or sessions");
    c.phi = to_double(o["session-phi"]);
    return c;
}

std::string sim_row(const sim::SimConfig& c, const sim::Metrics& m) {
    models::ModelParams p{static_cast<double>(c.n_target), c.s_avg, c.f, c.delta_avg};
    const double model = c.protocol == sim::Protocol::d1ht ? models::d1ht_bandwidth(p) : models::calot_bandwidth(p);
    std::ostringstream os;
    os << c.n_target << ',' << fmt(c.s_avg / 60.0) << ',' << fmt(c.f) << ',' << fmt(c.delta_avg * 1000.0) << ','
       << sim::to_string(c.protocol) << ',' << fmt(c.quarantine.t_q) << ',' << (c.reuse_ids ? 1 : 0) << ','
       << fmt(c.lookup_rate) << ',' << fmt(c.kill_fraction) << ',' << fmt(c.duration) << ',' << c.seed << ','
       << fmt(m.one_hop_fraction) << ',' << fmt(m.mean_hops) << ',' << m.lookups << ',' << m.routing_failures << ','
       << m.bootstrap_fallbacks << ',' << fmt(m.mean_bps) << ',' << fmt(m.p50_bps) << ',' << fmt(m.p99_bps) << ','
       << fmt(m.maintenance_bps) << ',' << fmt(model) << ',' << fmt(m.mean_msgs_per_interval) << ','
       << fmt(m.mean_theta) << ',' << fmt(m.stale_fraction) << ',' << fmt(m.event_rate) << ','
       << m.events_generated << ',' << m.events_complete << ',' << m.missing_acks_carrier << ','
       << m.missing_acks_broken_chain << ',' << m.missing_acks_unattributed << ',' << fmt(m.broken_chain_loss_rate) << ',' << m.duplicate_acks << ',' << fmt(m.mean_detect) << ','
       << fmt(m.mean_ack_latency) << ',' << fmt(m.mean_last_ack) << ',' << fmt(m.p95_last_ack) << ','
       << fmt(m.mean_total_time) << ',' << fmt(m.mean_live) << ',' << m.joins << ',' << m.leaves << ','
       << m.gateway_lookups << ',' << fmt(m.gateway_mean_hops) << ',' << fmt(m.member_session_fraction) << '\n';
    return os.str();
}

std::string sim_csv(const Options& o, std::ostream* trace) {
    const auto ns = to_sizes(parse_grid(o["n"]));
    const auto savg_min = parse_grid(o["savg-min"]);
    std::vector<std::uint64_t> seeds;
    if (!o["seed"].empty()) {
        seeds = parse_seeds(o["seed"]);
    } else if (const char* env = std::getenv("D1HT_SEED"); env != nullptr && *env != '\0') {
        seeds = parse_seeds(env);
    } else {
        seeds = {1};
    }
    const auto base = base_sim_config(o);
    std::string csv = kSimHeader;
    for (double s : savg_min)
        for (auto n : ns)
            for (auto seed : seeds) {
                auto c = base;
                c.n_target = n;
                c.s_avg = s * 60.0;
                c.seed = seed;
                c.validate();
                csv += sim_row(c, sim::run(c, trace));
            }
    return csv;
}

}  // namespace

std::vector<double> parse_grid(const std::string& spec) {
    std::vector<double> out;
    if (trim(spec).empty())
        throw std::invalid_argument("empty grid");
    for (const auto& tok : split(spec, ',')) {
        if (tok.empty())
            throw std::invalid_argument("empty grid element in '" + spec + "'");
        const auto dots = tok.find("..");
        if (dots == std::string::npos) {
            out.push_back(to_double(tok));
            continue;
        }
        std::string hi_s = tok.substr(dots + 2);
        unsigned per_decade = 1;
        if (const auto colon = hi_s.find(':'); colon != std::string::npos) {
            const auto k = to_u64(hi_s.substr(colon + 1));
            if (k == 0 || k > 1000)
                throw std::invalid_argument("points per decade must lie in [1, 1000]");
            per_decade = static_cast<unsigned>(k);
            hi_s = hi_s.substr(0, colon);
        }
        const double lo = to_double(tok.substr(0, dots));
        const double hi = to_double(hi_s);
        if (!(lo > 0) || hi < lo)
            throw std::invalid_argument("range must satisfy 0 < lo <= hi: '" + tok + "'");
        for (unsigned i = 0;; ++i) {
            const double x = lo * std::pow(10.0, static_cast<double>(i) / per_decade);
            if (x > hi * (1 + 1e-12))
                break;
            out.push_back(x);
        }
    }
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
    std::vector<std::uint64_t> out;
    if (trim(spec).empty())
        throw std::invalid_argument("empty seed list");
    for (const auto& tok : split(spec, ',')) {
        const auto dots = tok.find("..");
        if (dots == std::string::npos) {
            out.push_back(to_u64(tok));
            continue;
        }
        const auto lo = to_u64(tok.substr(0, dots));
        const auto hi = to_u64(tok.substr(dots + 2));
        if (hi < lo || hi - lo > 100000)
            throw std::invalid_argument("bad seed range '" + tok + "'");
        for (auto s = lo; s <= hi; ++s)
            out.push_back(s);
    }
    return out;
}

std::string summarize(std::istream& csv) {
    std::string line;
    if (!std::getline(csv, line))
        throw std::invalid_argument("empty CSV");
    const auto header = split(trim(line), ',');
    std::size_t seed_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == "seed")
            seed_col = i;
    if (seed_col == header.size())
        throw std::invalid_argument("CSV has no seed column");

    std::vector<std::string> order;
    std::map<std::string, std::vector<std::vector<double>>> groups;
    unsigned lineno = 1;
    while (std::getline(csv, line)) {
        ++lineno;
        if (trim(line).empty())
            continue;
        const auto cells = split(trim(line), ',');
        if (cells.size() != header.size())
            throw std::invalid_argument("line " + std::to_string(lineno) + ": expected " +
                                        std::to_string(header.size()) + " columns");
        std::string key;
        for (std::size_t i = 0; i < seed_col; ++i)
            key += header[i] + "=" + cells[i] + " ";
        std::vector<double> vals;
        for (std::size_t i = seed_col + 1; i < cells.size(); ++i)
            vals.push_back(to_double(cells[i]));
        if (groups.count(key) == 0)
            order.push_back(key);
        groups[key].push_back(std::move(vals));
    }
    if (order.empty())
        throw std::invalid_argument("CSV has no data rows");

    std::ostringstream os;
    for (const auto& key : order) {
        const auto& rows = groups[key];
        os << trim(key) << " seeds=" << rows.size() << '\n';
        for (std::size_t c = 0; c + seed_col + 1 < header.size(); ++c) {
            double sum = 0;
            for (const auto& r : rows)
                sum += r[c];
            const double mean = sum / static_cast<double>(rows.size());
            char buf[160];
            if (rows.size() < 2) {
                std::snprintf(buf, sizeof buf, "  %-26s %.6g\n", header[seed_col + 1 + c].c_str(), mean);
            } else {
                double ss = 0;
                for (const auto& r : rows)
                    ss += (r[c] - mean) * (r[c] - mean);
                const double k = static_cast<double>(rows.size());
                const double sd = std::sqrt(ss / (k - 1));
                const boost::math::students_t t(k - 1);
                const double half = boost::math::quantile(boost::math::complement(t, 0.025)) * sd / std::sqrt(k);
                std::snprintf(buf, sizeof buf, "  %-26s %.6g ± %.3g\n", header[seed_col + 1 + c].c_str(), mean,
                              half);
            }
            os << buf;
        }
    }
    return os.str();
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"d1ht: single-hop DHT models, simulator and wire tools"};
    app.require_subcommand(1);

    Options model_opts;
    auto* model = app.add_subcommand("model", "Analytical bandwidth sweep; CSV n,s_avg,model,variant,bandwidth_bps");
    model_opts.add(*model, "n", "System sizes: list or a..b[:k] decade range", "1e4..1e7");
    model_opts.add(*model, "savg-min", "Average session lengths in minutes", "60,169,174,780");
    model_opts.add(*model, "f", "Target stale-entry fraction", "0.01");
    model_opts.add(*model, "delta-ms", "Mean one-way delay; > 0 selects the explicit-delay interval rule", "0");
    model_opts.add(*model, "phi", "Quarantine gain mode: short-session fractions; CSV n,s_avg,phi,gain");
    model_opts.add(*model, "out", "Output path (default stdout)");
    model_opts.add(*model, "config", "key=value file; its values override flags");

    Options sim_opts;
    auto* simc = app.add_subcommand(
        "sim", "Churn simulation; one CSV row per (n, s_avg, seed). Columns: configuration up to seed, then Metrics");
    sim_opts.add(*simc, "n", "Logical peers: list or decade range", "1024");
    sim_opts.add(*simc, "savg-min", "Average session lengths in minutes", "174");
    sim_opts.add(*simc, "f", "Target stale-entry fraction", "0.01");
    sim_opts.add(*simc, "delta-ms", "Mean one-way delay in milliseconds", "0");
    sim_opts.add(*simc, "delay-model", "constant | exponential", "exponential");
    sim_opts.add(*simc, "duration", "Measurement phase in seconds", "1800");
    sim_opts.add(*simc, "seed", "Seeds: list or inclusive a..b (default D1HT_SEED, else 1)");
    sim_opts.add(*simc, "protocol", "d1ht | calot", "d1ht");
    sim_opts.add(*simc, "quarantine-tq", "Quarantine period in seconds; 0 disables", "0");
    sim_opts.add(*simc, "gateways", "Gateways per quarantined peer", "1");
    sim_opts.add(*simc, "reuse-ids", "Rejoin with the same address", "true");
    sim_opts.add(*simc, "lookup-rate", "Lookups per second per peer", "1");
    sim_opts.add(*simc, "kill-fraction", "Fraction of abrupt leaves", "0.5");
    sim_opts.add(*simc, "rejoin-delay", "Seconds offline before rejoining", "180");
    sim_opts.add(*simc, "warmup-start", "Initial peers", "8");
    sim_opts.add(*simc, "warmup-rate", "Joins per second while growing", "1");
    sim_opts.add(*simc, "churn", "poisson | sessions", "poisson");
    sim_opts.add(*simc, "session-phi", "sessions churn: fraction of short sessions", "0");
    sim_opts.add(*simc, "trace", "Per-event trace output path");
    sim_opts.add(*simc, "out", "Output path (default stdout)");
    sim_opts.add(*simc, "config", "key=value file; its values override flags");

    std::string hexfile;
    std::uint16_t port = 7700;
    auto* wirec = app.add_subcommand("wire", "Decode one datagram");
    wirec->add_option("--decode", hexfile, "File holding the datagram as hex")->required();
    wirec->add_option("--port", port, "Default port of the system");

    std::string csv_in;
    auto* summ = app.add_subcommand("summarize", "Per-configuration means and 95% intervals of a sim CSV");
    summ->add_option("csv", csv_in, "CSV file produced by sim")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (model->parsed()) {
            finish_parse(*model, model_opts);
            emit(model_csv(model_opts), model_opts["out"], out);
        } else if (simc->parsed()) {
            finish_parse(*simc, sim_opts);
            std::ofstream trace_file;
            if (!sim_opts["trace"].empty()) {
                trace_file.open(sim_opts["trace"]);
                if (!trace_file)
                    throw std::invalid_argument("cannot write " + sim_opts["trace"]);
            }
            emit(sim_csv(sim_opts, trace_file.is_open() ? &trace_file : nullptr), sim_opts["out"], out);
        } else if (wirec->parsed()) {
            std::ifstream in(hexfile);
            if (!in)
                throw std::invalid_argument("cannot read " + hexfile);
            std::stringstream buf;
            buf << in.rdbuf();
            const auto bytes = wire::from_hex(buf.str());
            out << wire::describe(wire::decode(bytes, port), port);
        } else if (summ->parsed()) {
            std::ifstream in(csv_in);
            if (!in)
                throw std::invalid_argument("cannot read " + csv_in);
            out << summarize(in);
        }
    } catch (const sim::SimAbort& e) {
        err << "simulation aborted: " << e.what() << '\n';
        return kExitAbort;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitOk;
}

}  // namespace d1ht::cli
