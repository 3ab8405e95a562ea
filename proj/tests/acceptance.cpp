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


// Acceptance suite. Prints one PASS/FAIL line per criterion; arguments select
// criteria by number (default: all). Exit status is nonzero if any selected
// criterion fails.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "d1ht/cli.hpp"
#include "d1ht/models.hpp"
#include "d1ht/sim.hpp"
#include "d1ht/single_event.hpp"
#include "d1ht/wire.hpp"
#include "wire_fuzz.hpp"

using namespace d1ht;

namespace {

// Tolerances and grids, fixed here so every verdict is reproducible.
constexpr double kBandwidthTolerance = 0.10;       // criterion 1, relative
constexpr double kGainTolerance = 0.03;            // criterion 2, absolute
constexpr int kGainGridPerDecade = 200;            // criterion 2, monotonicity grid
constexpr double kMinCalotRatio = 2.0;             // criterion 3
constexpr int kRatioGridPerDecade = 20;            // criterion 3
constexpr double kMinOneHop = 0.99;                // criterion 6
constexpr double kMaxReuseDrop = 0.001;            // criterion 6, fraction (0.1 percentage points)
constexpr double kModelAgreement = 0.25;           // criterion 7, relative
constexpr std::size_t kFuzzCases = 100000;         // criterion 8
constexpr double kTiny = 1e-12;

struct Verdict {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

models::ModelParams params(double n, double s_avg) { return {n, s_avg, 0.01, 0.0}; }

std::vector<double> log_grid(double lo, double hi, int per_decade) {
    std::vector<double> out;
    const int steps = static_cast<int>(std::lround(std::log10(hi / lo) * per_decade));
    for (int i = 0; i <= steps; ++i)
        out.push_back(lo * std::pow(10.0, static_cast<double>(i) / per_decade));
    return out;
}

constexpr double kSessionsMin[] = {60, 169, 174, 780};

Verdict criterion1() {
    constexpr double expected_kbps[] = {20.7, 7.3, 7.1, 1.6};
    bool pass = true;
    std::string detail;
    for (int i = 0; i < 4; ++i) {
        const double kbps = models::d1ht_bandwidth(params(1e6, kSessionsMin[i] * 60)) / 1000;
        const double err = std::abs(kbps / expected_kbps[i] - 1);
        pass = pass && err <= kBandwidthTolerance;
        detail += fmt("%s%g min: %.2f kbps vs %.1f (%.1f%%)", i ? "; " : "", kSessionsMin[i], kbps, expected_kbps[i],
                      100 * err);
    }
    return {pass, detail};
}

Verdict criterion2() {
    struct Case {
        double phi;
        double s_avg_min;
        double expected;
    };
    constexpr Case cases[] = {{0.24, 169, 0.24}, {0.31, 174, 0.31}};
    bool at_top = true, monotone = true;
    std::string detail;
    for (const auto& c : cases) {
        const double gain = models::quarantine_gain(params(1e7, c.s_avg_min * 60), c.phi);
        at_top = at_top && std::abs(gain - c.expected) <= kGainTolerance;
        detail += fmt("phi=%.2f: gain(1e7)=%.4f vs %.2f; ", c.phi, gain, c.expected);
        double prev = -1, prev_n = 0;
        std::size_t drops = 0;
        double worst = 0, worst_n = 0;
        for (double n : log_grid(1e4, 1e7, kGainGridPerDecade)) {
            const double g = models::quarantine_gain(params(n, c.s_avg_min * 60), c.phi);
            if (g < prev - kTiny) {
                ++drops;
                if (prev - g > worst) {
                    worst = prev - g;
                    worst_n = prev_n;
                }
            }
            prev = g;
            prev_n = n;
        }
        monotone = monotone && drops == 0;
        detail += drops == 0 ? std::string("monotone; ")
                             : fmt("%zu decreases, largest %.4f after n=%.0f; ", drops, worst, worst_n);
    }
    detail += at_top ? "values within tolerance" : "values outside tolerance";
    return {at_top && monotone, detail};
}

Verdict criterion3() {
    double worst = 1e300, worst_n = 0, worst_s = 0;
    std::size_t points = 0;
    for (double s : kSessionsMin)
        for (double n : log_grid(1e4, 1e7, kRatioGridPerDecade)) {
            const auto p = params(n, s * 60);
            const double ratio = models::calot_bandwidth(p, models::CalotVariant::per_peer_heartbeat) /
                                 models::d1ht_bandwidth(p);
            ++points;
            if (ratio < worst)
                std::tie(worst, worst_n, worst_s) = std::tuple{ratio, n, s};
        }
    return {worst >= kMinCalotRatio,
            fmt("%zu grid points; minimum ratio %.2f at n=%.0f, S_avg=%g min", points, worst, worst_n, worst_s)};
}

Verdict criterion4() {
    using single_event::Hop;
    bool pass = true;
    std::string detail;
    for (std::size_t n : {11u, 16u, 64u, 256u, 1024u}) {
        single_event::Harness h(n);
        std::size_t bad_once = 0, bad_mean = 0;
        double worst_mean = 0;
        for (std::size_t origin = 0; origin < n; ++origin) {
            const auto r = h.run(origin);
            bad_once += !r.exactly_once();
            bad_mean += r.mean_ack_time > r.rho * r.theta / 2 + kTiny;
            worst_mean = std::max(worst_mean, r.mean_ack_time / (r.rho * r.theta / 2));
        }
        pass = pass && bad_once == 0 && bad_mean == 0;
        detail += fmt("n=%zu: %zu/%zu origins off, mean/(rho*theta/2) <= %.3f; ", n, bad_once + bad_mean, n,
                      worst_mean);
    }
    // Eleven peers before the crash, so ten remain; offsets count from the detector.
    single_event::Harness fig(10);
    const auto r = fig.run(0);
    std::vector<Hop> expected = {{0, 1, 0}, {0, 2, 1}, {0, 4, 2}, {0, 8, 3}, {2, 3, 0},
                                 {4, 5, 0}, {4, 6, 1}, {6, 7, 0}, {8, 9, 0}};
    auto got = r.hops;
    auto key = [](const Hop& a, const Hop& b) { return std::tie(a.from, a.to, a.ttl) < std::tie(b.from, b.to, b.ttl); };
    std::sort(got.begin(), got.end(), key);
    std::sort(expected.begin(), expected.end(), key);
    const bool pattern = got == expected && r.exactly_once();
    detail += pattern ? "eleven-peer pattern reproduced" : "eleven-peer pattern differs";
    return {pass && pattern, detail};
}

Verdict criterion5() {
    std::vector<std::size_t> failing;
    for (std::size_t n = 4; n <= 256; ++n) {
        const auto cov = single_event::ttl_coverage(n);
        const unsigned rho = edra::compute_rho(n);
        bool ok = true;
        for (std::size_t q = 0; q < n && ok; ++q)
            for (unsigned l = 0; l <= rho && ok; ++l)
                ok = cov[q][l] == (std::size_t{1} << (rho - l));
        if (!ok)
            failing.push_back(n);
    }
    std::string detail = fmt("%zu of 253 sizes disagree", failing.size());
    if (!failing.empty()) {
        detail += " (";
        for (std::size_t i = 0; i < std::min<std::size_t>(failing.size(), 6); ++i)
            detail += fmt("%s%zu", i ? "," : "", failing[i]);
        detail += failing.size() > 6 ? ",...)" : ")";
        std::size_t powers = 0;
        for (std::size_t n = 4; n <= 256; ++n)
            powers += std::has_single_bit(n);
        detail += fmt("; all %zu powers of two agree", powers);
        for (std::size_t n : failing)
            if (std::has_single_bit(n))
                detail += fmt("; power of two %zu disagrees", n);
    }
    return {failing.empty(), detail};
}

struct GridRun {
    std::size_t n;
    double s_avg_min;
    sim::Metrics reuse;
    sim::Metrics fresh;
    double model_bps;
};

std::vector<GridRun> churn_grid() {
    static std::vector<GridRun> runs;
    if (!runs.empty())
        return runs;
    for (std::size_t n : {1024u, 2048u, 4096u})
        for (double s : {60.0, 174.0}) {
            sim::SimConfig c;
            c.n_target = n;
            c.s_avg = s * 60;
            c.kill_fraction = 0.5;
            c.rejoin_delay = 180;
            c.duration = 1800;
            c.seed = 1;
            GridRun g{n, s, {}, {}, models::d1ht_bandwidth(params(static_cast<double>(n), c.s_avg))};
            c.reuse_ids = true;
            g.reuse = sim::run(c);
            c.reuse_ids = false;
            g.fresh = sim::run(c);
            std::cerr << fmt("  n=%zu S_avg=%g min: one-hop %.5f (fresh ids %.5f), maintenance %.1f bps, model %.1f bps\n",
                             n, s, g.reuse.one_hop_fraction, g.fresh.one_hop_fraction, g.reuse.maintenance_bps,
                             g.model_bps);
            runs.push_back(g);
        }
    return runs;
}

Verdict criterion6() {
    bool pass = true;
    std::string detail;
    for (const auto& g : churn_grid()) {
        const double drop = g.reuse.one_hop_fraction - g.fresh.one_hop_fraction;
        const bool ok = g.reuse.one_hop_fraction >= kMinOneHop && g.fresh.one_hop_fraction >= kMinOneHop &&
                        drop < kMaxReuseDrop;
        pass = pass && ok;
        detail += fmt("%zu/%g: %.4f, drop %+.3f pp%s; ", g.n, g.s_avg_min, g.reuse.one_hop_fraction, 100 * drop,
                      ok ? "" : " (fails)");
    }
    detail.resize(detail.size() - 2);
    return {pass, detail};
}

Verdict criterion7() {
    bool pass = true;
    std::string detail;
    for (const auto& g : churn_grid()) {
        const double err = g.reuse.maintenance_bps / g.model_bps - 1;
        const bool ok = std::abs(err) <= kModelAgreement;
        pass = pass && ok;
        detail += fmt("%zu/%g: %.0f vs %.0f bps (%+.1f%%)%s; ", g.n, g.s_avg_min, g.reuse.maintenance_bps, g.model_bps,
                      100 * err, ok ? "" : " (fails)");
    }
    detail.resize(detail.size() - 2);
    return {pass, detail};
}

std::vector<std::uint8_t> golden(const std::string& name) {
    std::ifstream in(std::string(D1HT_GOLDEN_DIR) + "/" + name);
    if (!in)
        throw std::runtime_error("missing golden file " + name);
    std::stringstream ss;
    ss << in.rdbuf();
    return wire::from_hex(ss.str());
}

Verdict criterion8() {
    using testing::kPort;
    using testing::kSource;
    const Header h{PeerAddr{kSource, kPort}, 1, 0x1234};
    std::size_t golden_failures = 0;
    auto check = [&](const wire::EncodedDatagram& e, const std::string& file, std::size_t bytes) {
        golden_failures += e.bytes != golden(file);
        golden_failures += e.accounted_bits != bytes * 8;
        golden_failures += wire::decode(e.bytes, kPort, kSource) != wire::decode(golden(file), kPort, kSource);
    };
    const auto empty = wire::encode_maintenance(MaintenanceMsg{h, 0, 0, {}}, kPort, 4);
    golden_failures += empty.size() != 1;
    check(empty.front(), "maintenance_empty.hex", 40);
    check(wire::encode_ack(AckMsg{h}), "ack.hex", 36);
    check(wire::encode_heartbeat(HeartbeatMsg{h}), "heartbeat.hex", 36);
    check(wire::encode_calot(CalotMsg{h, {EventKind::leave, PeerAddr::from_u32(0x0A000005u, kPort)}, 7}), "calot.hex",
          48);
    const auto roundtrip = testing::roundtrip_failures(8, kFuzzCases);
    const auto truncation = testing::truncation_failures(9, kFuzzCases);
    const auto random_bytes = testing::random_bytes_failures(10, kFuzzCases);
    return {golden_failures + roundtrip + truncation + random_bytes == 0,
            fmt("golden mismatches %zu; roundtrip failures %zu/%zu; truncation failures %zu/%zu; random-bytes "
                "failures %zu/%zu",
                golden_failures, roundtrip, kFuzzCases, truncation, kFuzzCases, random_bytes, kFuzzCases)};
}

std::string run_cli(std::vector<std::string> args, int& code) {
    args.insert(args.begin(), "d1ht");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return out.str();
}

Verdict criterion9() {
    const std::vector<std::vector<std::string>> configs = {
        {"sim", "--n", "256", "--savg-min", "60", "--duration", "900", "--seed", "1..3"},
        {"sim", "--n", "256", "--savg-min", "60", "--duration", "900", "--protocol", "calot", "--seed", "4"},
        {"sim", "--n", "256", "--savg-min", "15", "--duration", "900", "--churn", "sessions", "--session-phi", "0.31",
         "--quarantine-tq", "150", "--delta-ms", "40", "--seed", "5"},
    };
    std::size_t differing = 0, errors = 0, rows = 0;
    for (const auto& args : configs) {
        int c1 = 0, c2 = 0;
        const auto a = run_cli(args, c1);
        const auto b = run_cli(args, c2);
        errors += c1 != 0 || c2 != 0;
        differing += a != b;
        rows += static_cast<std::size_t>(std::count(a.begin(), a.end(), '\n')) - 1;
    }
    return {differing == 0 && errors == 0,
            fmt("%zu configurations, %zu rows; %zu differ, %zu errored", configs.size(), rows, differing, errors)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::map<int, std::function<Verdict()>> criteria = {
        {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
        {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        const int k = std::atoi(argv[i]);
        if (criteria.count(k) == 0) {
            std::cerr << "unknown criterion " << argv[i] << '\n';
            return 2;
        }
        selected.insert(k);
    }
    if (selected.empty())
        for (const auto& [k, _] : criteria)
            selected.insert(k);
    bool all = true;
    for (int k : selected) {
        Verdict v{false, ""};
        try {
            v = criteria.at(k)();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        all = all && v.pass;
        std::cout << "criterion " << k << ": " << (v.pass ? "PASS" : "FAIL") << " - " << v.detail << std::endl;
    }
    return all ? 0 : 1;
}
