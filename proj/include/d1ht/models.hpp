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

#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

namespace d1ht::models {

enum class ThetaRule {
    assumed_delay,  // Θ = 4fS/(16+3ρ): delay taken as Θ/4
    explicit_delay, // Θ = (2fS − 2ρδ)/(8+ρ)
};

struct ModelParams {
    double n = 0;
    double s_avg = 0;      // seconds
    double f = 0.01;
    double delta_avg = 0;  // seconds
    double m_avg = 32;     // bits per event
    ThetaRule rule = ThetaRule::assumed_delay;

    /// Throws std::invalid_argument unless n >= 2 and all rates positive.
    void validate() const;
};

enum class CalotVariant { as_printed, per_peer_heartbeat };

struct ModelOutput {
    double r = 0;
    unsigned rho = 0;
    double theta = 0;
    double t_avg = 0;
    std::size_t e_cap = 0;
    std::vector<double> p_l;  // index l in [0, ρ)
    double n_msgs = 0;
    double bandwidth = 0;  // bits/s per peer
};

unsigned rho_of(double n);
/// System-wide events per second.
double event_rate(const ModelParams& p);
/// Mean time for an event to reach a peer, detection included.
double t_avg(double theta, unsigned rho, double delta_avg);
double theta(const ModelParams& p);
double theta_with_delay(const ModelParams& p);
/// Θ under the rule selected in `p`.
double theta_for(const ModelParams& p);
std::size_t e_cap(const ModelParams& p);
/// Probability a peer sends M(l) in an interval.
double p_msg(const ModelParams& p, unsigned l);
/// Expected maintenance messages per interval; at least 1.
double n_msgs(const ModelParams& p);
double d1ht_bandwidth(const ModelParams& p);
double calot_bandwidth(const ModelParams& p, CalotVariant variant = CalotVariant::per_peer_heartbeat);
/// Fractional bandwidth saved when a fraction `phi` of sessions never leaves quarantine.
double quarantine_gain(const ModelParams& p, double phi);
ModelOutput evaluate(const ModelParams& p);

struct CurveRow {
    double n;
    double s_avg;
    std::string model;
    std::string variant;
    double bandwidth_bps;
};

/// D1HT and both 1h-Calot readings for every (n, s_avg) pair, in grid order.
std::vector<CurveRow> bandwidth_curves(const std::vector<double>& ns, const std::vector<double>& s_avgs, double f,
                                       double delta_avg);
void write_csv(std::ostream& os, const std::vector<CurveRow>& rows);

const char* to_string(CalotVariant v);

}  // namespace d1ht::models
