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

#include "d1ht/models.hpp"

#include <cmath>
#include <iomanip>
#include <stdexcept>

#include "d1ht/edra.hpp"
#include "d1ht/wire.hpp"

namespace d1ht::models {

using wire::WireCosts;

void ModelParams::validate() const {
    if (!(n >= 2))
        throw std::invalid_argument("model n must be at least 2");
    if (!(s_avg > 0))
        throw std::invalid_argument("model s_avg must be positive");
    if (!(f > 0 && f < 1))
        throw std::invalid_argument("model f must lie in (0, 1)");
    if (delta_avg < 0)
        throw std::invalid_argument("model delta_avg must be non-negative");
    if (!(m_avg > 0))
        throw std::invalid_argument("model m_avg must be positive");
}

unsigned rho_of(double n) {
    if (n < 1)
        throw std::invalid_argument("rho_of: n must be at least 1");
    return edra::compute_rho(static_cast<std::size_t>(std::ceil(n)));
}

double event_rate(const ModelParams& p) { return 2.0 * p.n / p.s_avg; }

double t_avg(double theta, unsigned rho, double delta_avg) {
    return 2.0 * theta + static_cast<double>(rho) * (theta + 2.0 * delta_avg) / 4.0;
}

double theta(const ModelParams& p) { return 4.0 * p.f * p.s_avg / (16.0 + 3.0 * rho_of(p.n)); }

double theta_with_delay(const ModelParams& p) {
    const double rho = rho_of(p.n);
    return (2.0 * p.f * p.s_avg - 2.0 * rho * p.delta_avg) / (8.0 + rho);
}

double theta_for(const ModelParams& p) {
    return p.rule == ThetaRule::explicit_delay ? theta_with_delay(p) : theta(p);
}

std::size_t e_cap(const ModelParams& p) {
    EdraConfig cfg;
    cfg.f = p.f;
    return edra::event_cap(cfg, static_cast<std::size_t>(std::ceil(p.n)));
}

double p_msg(const ModelParams& p, unsigned l) {
    const unsigned rho = rho_of(p.n);
    if (l >= rho)
        return 0.0;
    const double q = 2.0 * event_rate(p) * theta_for(p) / p.n;
    const double k = std::ldexp(1.0, static_cast<int>(rho - l - 1));
    return 1.0 - std::pow(1.0 - std::min(q, 1.0), k);
}

double n_msgs(const ModelParams& p) {
    double n = 1.0;
    for (unsigned l = 1; l < rho_of(p.n); ++l)
        n += p_msg(p, l);
    return n;
}

double d1ht_bandwidth(const ModelParams& p) {
    p.validate();
    const double th = theta_for(p);
    if (!(th > 0))
        throw std::invalid_argument("non-positive interval: delay too large for this session length");
    return (n_msgs(p) * (WireCosts::v_m + WireCosts::v_a) + event_rate(p) * p.m_avg * th) / th;
}

double calot_bandwidth(const ModelParams& p, CalotVariant variant) {
    p.validate();
    const double heartbeats = variant == CalotVariant::as_printed ? 4.0 * p.n * WireCosts::v_h / 60.0
                                                                  : 4.0 * WireCosts::v_h / 60.0;
    return event_rate(p) * (WireCosts::v_c + WireCosts::v_a) + heartbeats;
}

double quarantine_gain(const ModelParams& p, double phi) {
    if (!(phi >= 0 && phi < 1))
        throw std::invalid_argument("phi must lie in [0, 1)");
    ModelParams q = p;
    q.n = (1.0 - phi) * p.n;  // event rate 2n/S scales with n at fixed S
    return 1.0 - d1ht_bandwidth(q) / d1ht_bandwidth(p);
}

ModelOutput evaluate(const ModelParams& p) {
    p.validate();
    ModelOutput out;
    out.r = event_rate(p);
    out.rho = rho_of(p.n);
    out.theta = theta_for(p);
    out.t_avg = t_avg(out.theta, out.rho, p.delta_avg);
    out.e_cap = e_cap(p);
    for (unsigned l = 0; l < out.rho; ++l)
        out.p_l.push_back(p_msg(p, l));
    out.n_msgs = n_msgs(p);
    out.bandwidth = d1ht_bandwidth(p);
    return out;
}

const char* to_string(CalotVariant v) {
    return v == CalotVariant::as_printed ? "as_printed" : "per_peer_heartbeat";
}

std::vector<CurveRow> bandwidth_curves(const std::vector<double>& ns, const std::vector<double>& s_avgs, double f,
                                       double delta_avg) {
    std::vector<CurveRow> rows;
    for (double s : s_avgs) {
        for (double n : ns) {
            ModelParams p{n, s, f, delta_avg};
            if (delta_avg > 0)
                p.rule = ThetaRule::explicit_delay;
            rows.push_back({n, s, "d1ht", delta_avg > 0 ? "explicit_delay" : "assumed_delay", d1ht_bandwidth(p)});
            for (auto v : {CalotVariant::per_peer_heartbeat, CalotVariant::as_printed})
                rows.push_back({n, s, "calot", to_string(v), calot_bandwidth(p, v)});
        }
    }
    return rows;
}

void write_csv(std::ostream& os, const std::vector<CurveRow>& rows) {
    os << "n,s_avg,model,variant,bandwidth_bps\n";
    const auto old = os.flags();
    for (const auto& r : rows)
        os << std::setprecision(10) << r.n << ',' << r.s_avg << ',' << r.model << ',' << r.variant << ','
           << std::fixed << std::setprecision(3) << r.bandwidth_bps << std::defaultfloat << '\n';
    os.flags(old);
}

}  // namespace d1ht::models
