// SPDX-License-Identifier: Apache-2.0
//
// cfisac - cell-free massive MIMO ISAC analysis and power allocation
// Copyright (C) 2026 The cfisac authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------


#pragma once

#include "common.hpp"

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfisac
{

/// What to do with an AP-UE pair closer than the reference distance.
enum class DistancePolicy
{
    reject, ///< resample UE positions until every pair is at least r_h apart
    clamp   ///< keep the draw, evaluate path loss at max(r, r_h)
};

/// Index origin of the ULA phase progression.
enum class ArrayIndexing
{
    zero_based, ///< entry n carries phase -pi*n*sin(angle), n = 0..N-1
    one_based   ///< entry n carries phase -pi*n*sin(angle), n = 1..N
};

/// How the equal/heuristic allocations normalize the communication share.
enum class XiNormalization
{
    total, ///< divide by sum over k and l of xi_kl
    per_ap ///< divide by sum over k of xi_kl for each AP l
};

/// Scalar system parameters. Powers and variances are linear (mW).
struct SystemConfig
{
    int aps = 8;
    int ues = 4;
    int tx_antennas = 4;
    int rx_antennas = 4;
    int frame_length = 30;
    int coherence_length = 200;
    int pilot_length = 4;
    double pilot_power = 1.0;
    double power_budget = 1.0;
    double comm_noise = 1e-3;
    double sensing_noise = 1e-3;
    double pathloss_exponent = 3.2;
    double shadowing_db = 7.0;
    double reference_distance = 100.0;
    double area_side = 250.0;
    double sensing_gain = 1e-2;

    DistancePolicy distance_policy = DistancePolicy::reject;
    long max_placement_attempts = 1000000;
    ArrayIndexing array_indexing = ArrayIndexing::zero_based;
    XiNormalization xi_normalization = XiNormalization::total;

    /// Fraction of the coherence block left for data.
    double prelog() const
    {
        return double(coherence_length - pilot_length) / double(coherence_length);
    }

    /// Throws std::invalid_argument naming the first violated invariant.
    void validate() const
    {
        auto need = [](bool ok, const char *what) {
            if (!ok)
                throw std::invalid_argument(std::string("SystemConfig: ") + what);
        };
        need(aps >= 1, "aps must be >= 1");
        need(ues >= 1, "ues must be >= 1");
        need(tx_antennas >= 1, "tx_antennas must be >= 1");
        need(rx_antennas >= 1, "rx_antennas must be >= 1");
        need(frame_length >= 1, "frame_length must be >= 1");
        need(pilot_length >= 1, "pilot_length must be >= 1");
        need(pilot_length <= coherence_length, "pilot_length must not exceed coherence_length");
        need(pilot_power > 0.0, "pilot_power must be positive");
        need(power_budget > 0.0, "power_budget must be positive");
        need(comm_noise > 0.0, "comm_noise must be positive");
        need(sensing_noise > 0.0, "sensing_noise must be positive");
        need(pathloss_exponent > 0.0, "pathloss_exponent must be positive");
        need(shadowing_db >= 0.0, "shadowing_db must be nonnegative");
        need(reference_distance > 0.0, "reference_distance must be positive");
        need(area_side > 0.0, "area_side must be positive");
        need(sensing_gain > 0.0, "sensing_gain must be positive");
        need(max_placement_attempts >= 1, "max_placement_attempts must be >= 1");
    }
};

struct Point
{
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const Point &a, const Point &b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// One realized network. beta, xi, eps are K x L; alpha is L x L with entry
/// (l, p) the gain from transmit AP l to receive AP p.
struct Scenario
{
    SystemConfig config;
    std::vector<Point> ap_positions;
    std::vector<Point> ue_positions;
    Point target;
    RealMatrix beta;
    RealMatrix xi;
    RealMatrix eps;
    RealVector theta; // AoA at each AP
    RealVector phi;   // AoD at each AP
    ComplexMatrix alpha;

    int L() const { return config.aps; }
    int K() const { return config.ues; }
};

/// Large-scale coefficient for distance r and linear shadowing factor z.
inline double large_scale_gain(double r, double z, double reference_distance, double exponent)
{
    return z / std::pow(r / reference_distance, exponent);
}

/// Draws AP, UE and target positions plus beta, angles and sensing gains.
/// xi and eps are left empty; see make_scenario in channel.hpp.
inline Scenario generate_topology(const SystemConfig &cfg, std::uint64_t seed)
{
    cfg.validate();
    const int L = cfg.aps;
    const int K = cfg.ues;

    Scenario sc;
    sc.config = cfg;

    Rng ap_rng = make_stream(seed, 1);
    Rng ue_rng = make_stream(seed, 2);
    Rng shadow_rng = make_stream(seed, 3);
    Rng target_rng = make_stream(seed, 4);
    std::uniform_real_distribution<double> coord(0.0, cfg.area_side);

    sc.ap_positions.resize(L);
    for (auto &p : sc.ap_positions)
    {
        p.x = coord(ap_rng);
        p.y = coord(ap_rng);
    }

    sc.ue_positions.resize(K);
    for (auto &u : sc.ue_positions)
    {
        long attempts = 0;
        while (true)
        {
            u.x = coord(ue_rng);
            u.y = coord(ue_rng);
            if (cfg.distance_policy == DistancePolicy::clamp)
                break;
            bool ok = true;
            for (const auto &a : sc.ap_positions)
                if (distance(a, u) < cfg.reference_distance)
                {
                    ok = false;
                    break;
                }
            if (ok)
                break;
            if (++attempts >= cfg.max_placement_attempts)
                throw InfeasibleGeometryError("generate_topology: no UE position at least " +
                                              std::to_string(cfg.reference_distance) + " m from all " +
                                              std::to_string(L) + " APs after " + std::to_string(attempts) +
                                              " attempts");
        }
    }

    std::normal_distribution<double> n01(0.0, 1.0);
    sc.beta.resize(K, L);
    for (int k = 0; k < K; ++k)
        for (int l = 0; l < L; ++l)
        {
            double r = distance(sc.ap_positions[l], sc.ue_positions[k]);
            if (cfg.distance_policy == DistancePolicy::clamp)
                r = std::max(r, cfg.reference_distance);
            const double z = db_to_linear(cfg.shadowing_db * n01(shadow_rng));
            sc.beta(k, l) = large_scale_gain(r, z, cfg.reference_distance, cfg.pathloss_exponent);
        }

    // The target must not sit on top of an AP, where the angle is undefined.
    sc.target = Point{coord(target_rng), coord(target_rng)};
    for (int guard = 0; guard < 1000; ++guard)
    {
        bool ok = true;
        for (const auto &a : sc.ap_positions)
            if (distance(a, sc.target) < 1.0)
                ok = false;
        if (ok)
            break;
        sc.target = Point{coord(target_rng), coord(target_rng)};
    }

    sc.theta.resize(L);
    for (int l = 0; l < L; ++l)
    {
        const double dx = sc.target.x - sc.ap_positions[l].x;
        const double r = distance(sc.ap_positions[l], sc.target);
        sc.theta[l] = std::asin(std::clamp(dx / r, -1.0, 1.0));
    }
    sc.phi = sc.theta;

    const double g = cfg.sensing_gain / std::sqrt(2.0);
    sc.alpha = ComplexMatrix::Constant(L, L, cplx(g, g));
    return sc;
}

} // namespace cfisac
