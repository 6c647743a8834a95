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


#include "cfisac/comm_rate.hpp"

#include <catch_amalgamated.hpp>

using namespace cfisac;
using Catch::Approx;

namespace
{

Scenario random_scenario(int L, int K, int tau_p, std::uint64_t seed)
{
    SystemConfig cfg;
    cfg.aps = L;
    cfg.ues = K;
    cfg.pilot_length = tau_p;
    cfg.distance_policy = DistancePolicy::clamp;
    return make_scenario(cfg, seed);
}

// Single-link scenario with hand-set statistics.
Scenario single_link(double xi, double beta, double noise)
{
    Scenario sc;
    sc.config.aps = 1;
    sc.config.ues = 1;
    sc.config.pilot_length = 1;
    sc.config.comm_noise = noise;
    sc.beta = RealMatrix::Constant(1, 1, beta);
    sc.xi = RealMatrix::Constant(1, 1, xi);
    sc.eps = RealMatrix::Constant(1, 1, beta - xi);
    sc.theta = sc.phi = RealVector::Zero(1);
    sc.alpha = ComplexMatrix::Zero(1, 1);
    return sc;
}

} // namespace

TEST_CASE("zero allocation has zero rate")
{
    const Scenario sc = random_scenario(4, 3, 3, 1);
    for (int k = 0; k < 3; ++k)
    {
        const SinrBreakdown b = closed_form_breakdown(sc, PowerAllocation::zeros(3, 4), k);
        CHECK(b.sinr == 0.0);
        CHECK(b.rate == 0.0);
    }
}

TEST_CASE("single-link perfect CSI rate")
{
    const Scenario sc = single_link(1.0, 1.0, 1.0);
    PowerAllocation a = PowerAllocation::zeros(1, 1);
    a.gamma(0, 0) = 1.0;
    const SinrBreakdown b = closed_form_breakdown(sc, a, 0);
    CHECK(b.ds == Approx(16.0));
    CHECK(b.bu == Approx(4.0));
    CHECK(b.sinr == Approx(3.2).epsilon(1e-14));
    CHECK(b.rate == Approx(sc.config.prelog() * std::log2(4.2)).epsilon(1e-14));
}

TEST_CASE("sensing power lowers every rate")
{
    const Scenario sc = random_scenario(6, 4, 4, 2);
    const PowerAllocation base = split_allocation(sc, 0.3);
    const RealVector r0 = closed_form_rates(sc, base);
    for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 6; ++l)
        {
            PowerAllocation more = base;
            more.eta(k, l) *= 2.0;
            const RealVector r1 = closed_form_rates(sc, more);
            CHECK((r1.array() < r0.array()).all());
        }
}

TEST_CASE("every breakdown term is linear in the allocation")
{
    const Scenario sc = random_scenario(5, 4, 2, 3);
    const PowerAllocation a = split_allocation(sc, 0.4);
    for (int k = 0; k < 4; ++k)
    {
        const SinrBreakdown b1 = closed_form_breakdown(sc, a, k);
        const SinrBreakdown b2 = closed_form_breakdown(sc, a.scaled(2.0), k);
        CHECK(b2.ds == Approx(2.0 * b1.ds).epsilon(1e-14));
        CHECK(b2.bu == Approx(2.0 * b1.bu).epsilon(1e-14));
        for (int j = 0; j < 4; ++j)
            CHECK(b2.ui[j] == Approx(2.0 * b1.ui[j]).epsilon(1e-14));
        CHECK(b1.ui[k] == 0.0);
        CHECK(b1.sinr == Approx(b1.ds / (b1.bu + b1.ui.sum() + b1.noise)));
    }
}

TEST_CASE("monte carlo agrees with the closed form on a single link")
{
    Scenario sc = single_link(0.7, 0.7, 0.5);
    sc.config.tx_antennas = 4;
    PowerAllocation a = PowerAllocation::zeros(1, 1);
    a.gamma(0, 0) = 1.0;
    const MonteCarloRate mc = monte_carlo_rate(sc, a, 0, 4000, 17);
    const double cf = closed_form_breakdown(sc, a, 0).rate;
    CHECK(mc.standard_error > 0.0);
    CHECK(std::abs(mc.rate - cf) < 3.0 * mc.standard_error);
}

TEST_CASE("monte carlo agrees with the closed form on random scenarios")
{
    Rng arng(8);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    int worse_than_3se = 0, total = 0;
    for (std::uint64_t s = 0; s < 20; ++s)
    {
        const int L = 2 + int(s % 4);
        const int K = 2 + int(s % 3);
        const int tau_p = 1 + int(s % K);
        const Scenario sc = random_scenario(L, K, tau_p, 100 + s);
        PowerAllocation a = split_allocation(sc, 0.3);
        for (int i = 0; i < a.gamma.size(); ++i)
        {
            a.gamma.data()[i] *= u(arng);
            a.eta.data()[i] *= u(arng);
        }
        const auto mc = monte_carlo_rates(sc, a, 2000, 200 + s);
        for (int k = 0; k < K; ++k)
        {
            const double cf = closed_form_breakdown(sc, a, k).rate;
            ++total;
            if (std::abs(mc[k].rate - cf) > 3.0 * mc[k].standard_error)
                ++worse_than_3se;
        }
    }
    INFO(worse_than_3se << " of " << total << " UEs outside 3 standard errors");
    CHECK(worse_than_3se == 0);
}

TEST_CASE("sinr grows with the array aperture at fixed total power")
{
    // Symmetric synthetic network: every beta = 1, orthogonal pilots.
    double prev = 0.0;
    for (auto [L, N] : {std::pair{4, 4}, std::pair{8, 8}, std::pair{16, 16}})
    {
        Scenario sc;
        sc.config.aps = L;
        sc.config.ues = 4;
        sc.config.tx_antennas = N;
        sc.config.pilot_length = 4;
        sc.beta = RealMatrix::Ones(4, L);
        const MmseStats st =
            mmse_stats(sc.beta, assign_pilots(4, 4), 4, sc.config.pilot_power, sc.config.comm_noise);
        sc.xi = st.xi;
        sc.eps = st.eps;
        const double sinr = closed_form_breakdown(sc, equal_power_allocation(sc), 0).sinr;
        CHECK(sinr > prev);
        prev = sinr;
    }
}

TEST_CASE("pilot contamination costs rate on matched scenarios")
{
    for (std::uint64_t s = 0; s < 10; ++s)
    {
        const Scenario full = random_scenario(8, 4, 4, s);
        const Scenario half = random_scenario(8, 4, 2, s);
        CHECK(full.beta == half.beta);
        CHECK(sum_rate(half, equal_power_allocation(half)) <= sum_rate(full, equal_power_allocation(full)));
    }
}

TEST_CASE("monte carlo is reproducible")
{
    const Scenario sc = random_scenario(3, 2, 2, 4);
    const PowerAllocation a = equal_power_allocation(sc);
    const auto r1 = monte_carlo_rates(sc, a, 50, 9);
    const auto r2 = monte_carlo_rates(sc, a, 50, 9);
    for (int k = 0; k < 2; ++k)
    {
        CHECK(r1[k].rate == r2[k].rate);
        CHECK(r1[k].standard_error == r2[k].standard_error);
    }
    CHECK_THROWS_AS(monte_carlo_rates(sc, a, 1, 9), std::invalid_argument);
}
