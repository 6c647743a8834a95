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


#include "cfisac/channel.hpp"
#include "cfisac/scenario.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace cfisac;
using Catch::Approx;

TEST_CASE("large-scale gain at reference and doubled distance")
{
    CHECK(large_scale_gain(100.0, 1.0, 100.0, 3.2) == Approx(1.0).epsilon(1e-15));
    CHECK(large_scale_gain(200.0, 1.0, 100.0, 3.2) == Approx(std::pow(2.0, -3.2)).epsilon(1e-14));
    CHECK(large_scale_gain(200.0, 1.0, 100.0, 3.2) == Approx(0.1088).margin(5e-5));
}

TEST_CASE("large-scale gain decreases with distance")
{
    double prev = large_scale_gain(1.0, 1.0, 100.0, 3.2);
    for (double r = 2.0; r < 1000.0; r += 7.5)
    {
        const double g = large_scale_gain(r, 1.0, 100.0, 3.2);
        CHECK(g < prev);
        prev = g;
    }
}

TEST_CASE("unit conversions")
{
    CHECK(db_to_linear(0.0) == 1.0);
    CHECK(db_to_linear(30.0) == Approx(1000.0).epsilon(1e-14));
    CHECK(linear_to_db(1000.0) == Approx(30.0).epsilon(1e-14));
    CHECK(power_from_snr(30.0, db_to_linear(-30.0)) == Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(linear_to_db(0.0), std::domain_error);
    CHECK_THROWS_AS(linear_to_db(-1.0), std::domain_error);
}

TEST_CASE("config validation names the broken field")
{
    SystemConfig cfg;
    cfg.pilot_length = cfg.coherence_length + 1;
    CHECK_THROWS_WITH(cfg.validate(), Catch::Matchers::ContainsSubstring("pilot_length"));
    cfg = SystemConfig{};
    cfg.comm_noise = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SystemConfig{};
    CHECK(cfg.prelog() == Approx(196.0 / 200.0));
}

TEST_CASE("topology is deterministic per seed")
{
    SystemConfig cfg;
    cfg.aps = 4;
    const Scenario a = generate_topology(cfg, 42);
    const Scenario b = generate_topology(cfg, 42);
    const Scenario c = generate_topology(cfg, 43);
    CHECK(a.beta == b.beta);
    CHECK(a.theta == b.theta);
    for (int l = 0; l < cfg.aps; ++l)
    {
        CHECK(a.ap_positions[l].x == b.ap_positions[l].x);
        CHECK(a.ap_positions[l].y == b.ap_positions[l].y);
    }
    CHECK(a.beta != c.beta);
}

TEST_CASE("rejection placement keeps every UE at least r_h from every AP")
{
    SystemConfig cfg;
    cfg.aps = 4;
    cfg.ues = 6;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
    {
        const Scenario sc = generate_topology(cfg, seed);
        for (const auto &u : sc.ue_positions)
            for (const auto &a : sc.ap_positions)
                CHECK(distance(a, u) >= cfg.reference_distance);
    }
}

TEST_CASE("placement gives up after the attempt cap")
{
    SystemConfig cfg;
    cfg.aps = 16;
    cfg.area_side = 100.0;
    cfg.max_placement_attempts = 1000;
    CHECK_THROWS_AS(generate_topology(cfg, 1), InfeasibleGeometryError);
    cfg.distance_policy = DistancePolicy::clamp;
    CHECK_NOTHROW(generate_topology(cfg, 1));
}

TEST_CASE("shadowing is log-normal with the configured spread")
{
    SystemConfig cfg;
    cfg.aps = 100;
    cfg.ues = 100;
    cfg.distance_policy = DistancePolicy::clamp;
    const Scenario sc = generate_topology(cfg, 7);
    // Undo the path loss to recover 10 log10 z for each of the 10^4 pairs.
    double s1 = 0.0, s2 = 0.0;
    int n = 0;
    for (int k = 0; k < cfg.ues; ++k)
        for (int l = 0; l < cfg.aps; ++l)
        {
            const double r = std::max(distance(sc.ap_positions[l], sc.ue_positions[k]), cfg.reference_distance);
            const double z = sc.beta(k, l) * std::pow(r / cfg.reference_distance, cfg.pathloss_exponent);
            const double zdb = 10.0 * std::log10(z);
            s1 += zdb;
            s2 += zdb * zdb;
            ++n;
        }
    const double mean = s1 / n;
    const double sd = std::sqrt(s2 / n - mean * mean);
    CHECK(std::abs(mean) < 0.3);
    CHECK(std::abs(sd / cfg.shadowing_db - 1.0) < 0.05);
}

TEST_CASE("scenario invariants")
{
    SystemConfig cfg;
    cfg.distance_policy = DistancePolicy::clamp;
    cfg.aps = 16;
    const Scenario sc = make_scenario(cfg, 3);
    CHECK(sc.beta.rows() == cfg.ues);
    CHECK(sc.beta.cols() == cfg.aps);
    for (int k = 0; k < cfg.ues; ++k)
        for (int l = 0; l < cfg.aps; ++l)
        {
            CHECK(sc.xi(k, l) + sc.eps(k, l) == Approx(sc.beta(k, l)).epsilon(1e-12));
            CHECK(sc.xi(k, l) >= 0.0);
            CHECK(sc.xi(k, l) <= sc.beta(k, l));
        }
    for (int l = 0; l < cfg.aps; ++l)
    {
        CHECK(std::abs(sc.theta[l]) <= pi / 2);
        CHECK(std::abs(sc.phi[l]) <= pi / 2);
    }
    const double g = cfg.sensing_gain / std::sqrt(2.0);
    CHECK(sc.alpha.rows() == cfg.aps);
    CHECK(sc.alpha(2, 5) == cplx(g, g));
}
