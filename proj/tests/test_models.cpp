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


#include <doctest.h>

#include <cmath>
#include <sstream>

#include "d1ht/models.hpp"

using namespace d1ht::models;

namespace {

// Independent transcription of the closed forms, evaluated in long double.
struct Oracle {
    static long double rho(long double n) { return std::ceil(std::log2(std::ceil(n))); }
    static long double rate(long double n, long double s) { return 2 * n / s; }
    static long double theta(long double n, long double s, long double f) { return 4 * f * s / (16 + 3 * rho(n)); }
    static long double p(long double n, long double s, long double f, int l) {
        const long double q = 2 * rate(n, s) * theta(n, s, f) / n;
        return 1 - std::pow(1 - q, std::ldexp(1.0L, static_cast<int>(rho(n)) - l - 1));
    }
    static long double msgs(long double n, long double s, long double f) {
        long double m = 1;
        for (int l = 1; l < rho(n); ++l)
            m += p(n, s, f, l);
        return m;
    }
    static long double bw(long double n, long double s, long double f) {
        const long double th = theta(n, s, f);
        return (msgs(n, s, f) * (320 + 288) + rate(n, s) * 32 * th) / th;
    }
};

ModelParams params(double n, double s, double f = 0.01, double delta = 0) { return ModelParams{n, s, f, delta}; }

}  // namespace

TEST_CASE("event rate") {
    CHECK(event_rate(params(1e6, 10440)) == doctest::Approx(191.57).epsilon(1e-4));
    CHECK(event_rate(params(40000, 9000)) == doctest::Approx(8.89).epsilon(1e-3));
    CHECK(event_rate(params(2e6, 10440)) == doctest::Approx(2 * event_rate(params(1e6, 10440))));
}

TEST_CASE("mean acknowledgment time") {
    CHECK(t_avg(5.495, 20, 0.25) == doctest::Approx(40.96).epsilon(1e-3));
    CHECK(t_avg(3.0, 0, 0.0) == doctest::Approx(6.0));
    CHECK(t_avg(3.1, 5, 0.1) > t_avg(3.0, 5, 0.1));
    CHECK(t_avg(3.0, 6, 0.1) > t_avg(3.0, 5, 0.1));
    CHECK(t_avg(3.0, 5, 0.2) > t_avg(3.0, 5, 0.1));
}

TEST_CASE("interval length") {
    CHECK(theta(params(1e6, 10440)) == doctest::Approx(5.495).epsilon(1e-3));
    CHECK(theta(params(1e6, 10440)) == doctest::Approx(static_cast<double>(Oracle::theta(1e6, 10440, 0.01))));
    CHECK(theta(params(1e4, 10140)) == doctest::Approx(6.993).epsilon(1e-3));
    CHECK(theta(params(1e6, 10440, 1e-9)) < 1e-5);
    SUBCASE("explicit-delay rule with delta = theta/4 reproduces the assumed-delay rule") {
        for (double n : {1e4, 1e5, 1e6, 1e7})
            for (double s : {3600.0, 10140.0, 10440.0, 46800.0}) {
                auto p = params(n, s);
                const double th = theta(p);
                p.delta_avg = th / 4;
                CHECK(theta_with_delay(p) == doctest::Approx(th).epsilon(1e-12));
            }
    }
}

TEST_CASE("message probabilities and counts") {
    const auto p = params(1e6, 10440);
    CHECK(p_msg(p, 19) == doctest::Approx(0.00211).epsilon(5e-3));
    CHECK(p_msg(p, 19) == doctest::Approx(2 * event_rate(p) * theta(p) / p.n));
    for (unsigned l = 1; l < 20; ++l) {
        CHECK(p_msg(p, l) <= p_msg(p, l - 1));
        CHECK(p_msg(p, l) == doctest::Approx(static_cast<double>(Oracle::p(1e6, 10440, 0.01, static_cast<int>(l)))));
    }
    CHECK(n_msgs(p) == doctest::Approx(11.4).epsilon(5e-3));
    CHECK(n_msgs(p) == doctest::Approx(static_cast<double>(Oracle::msgs(1e6, 10440, 0.01))));
    // The interval scales with S_avg, so the per-interval event count and n_msgs do not depend on it.
    CHECK(n_msgs(params(1e6, 1e15)) == doctest::Approx(n_msgs(p)));
    CHECK(p_msg(p, 19) < p_msg(p, 18));
}

TEST_CASE("D1HT bandwidth") {
    // Oracle values at n = 10^6, f = 0.01 for 60, 169, 174 and 780 minute sessions.
    const double frozen[] = {21449.0, 7615.0, 7396.0, 1650.0};
    const double sessions[] = {3600, 10140, 10440, 46800};
    for (int i = 0; i < 4; ++i) {
        const double b = d1ht_bandwidth(params(1e6, sessions[i]));
        CHECK(b == doctest::Approx(static_cast<double>(Oracle::bw(1e6, sessions[i], 0.01))).epsilon(1e-12));
        CHECK(std::round(b) == frozen[i]);
    }
    // Without churn only M(0) and its ack remain.
    const auto quiet = params(1e6, 1e15);
    CHECK(d1ht_bandwidth(quiet) == doctest::Approx((320.0 + 288.0) / theta(quiet)).epsilon(1e-6));
    SUBCASE("explicit-delay rule with a 0.25 s delay") {
        const double frozen_delay[] = {20981.0, 7354.0, 7142.0, 1586.0};
        for (int i = 0; i < 4; ++i) {
            auto p = params(1e6, sessions[i], 0.01, 0.25);
            p.rule = ThetaRule::explicit_delay;
            CHECK(std::round(d1ht_bandwidth(p)) == frozen_delay[i]);
        }
    }
    CHECK_THROWS_AS(d1ht_bandwidth(params(1, 3600)), std::invalid_argument);
    CHECK_THROWS_AS(d1ht_bandwidth(params(1e6, 3600, 0)), std::invalid_argument);
}

TEST_CASE("1h-Calot bandwidth") {
    CHECK(calot_bandwidth(params(1e6, 10140)) == doctest::Approx(132564).epsilon(1e-5));
    CHECK(calot_bandwidth(params(1e6, 1e18)) == doctest::Approx(19.2).epsilon(1e-6));
    CHECK(calot_bandwidth(params(1e6, 1e18), CalotVariant::as_printed) == doctest::Approx(19.2e6).epsilon(1e-6));
    for (double n = 1e4; n <= 1e7 * 1.0001; n *= std::pow(10.0, 0.25))
        for (double s : {3600.0, 10140.0, 10440.0, 46800.0})
            CHECK(calot_bandwidth(params(n, s)) >= 2 * d1ht_bandwidth(params(n, s)));
}

TEST_CASE("quarantine gain") {
    CHECK(quarantine_gain(params(1e6, 10440), 0.0) == doctest::Approx(0.0));
    CHECK(quarantine_gain(params(1e7, 10140), 0.24) == doctest::Approx(0.2355).epsilon(1e-3));
    CHECK(quarantine_gain(params(1e7, 10440), 0.31) == doctest::Approx(0.3033).epsilon(1e-3));
    const auto p = params(1e6, 10440);
    const double phi = 0.24;
    CHECK(quarantine_gain(p, phi) ==
          doctest::Approx(static_cast<double>(1 - Oracle::bw((1 - phi) * 1e6, 10440, 0.01) / Oracle::bw(1e6, 10440, 0.01))));
    CHECK_THROWS_AS(quarantine_gain(p, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(quarantine_gain(p, -0.1), std::invalid_argument);
}

TEST_CASE("evaluate and curves") {
    const auto out = evaluate(params(1e6, 10440));
    CHECK(out.rho == 20);
    CHECK(out.e_cap == 1052);
    CHECK(out.p_l.size() == 20);
    CHECK(out.bandwidth > 0);
    CHECK(out.t_avg == doctest::Approx(t_avg(out.theta, 20, 0)));
    const auto rows = bandwidth_curves({1e4, 1e5}, {3600, 10440}, 0.01, 0);
    CHECK(rows.size() == 2 * 2 * 3);
    std::ostringstream os;
    write_csv(os, rows);
    CHECK(os.str().rfind("n,s_avg,model,variant,bandwidth_bps\n", 0) == 0);
}
