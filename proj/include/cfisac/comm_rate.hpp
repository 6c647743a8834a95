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

#include "channel.hpp"
#include "common.hpp"
#include "precoding.hpp"

#include <cmath>
#include <vector>

namespace cfisac
{

/// Received-power decomposition for one UE. ui[k] is zero; the other
/// entries are the interference powers from the remaining streams.
struct SinrBreakdown
{
    double ds = 0.0;
    double bu = 0.0;
    RealVector ui;
    double noise = 0.0;
    double sinr = 0.0;
    double rate = 0.0;
};

inline void finish_breakdown(SinrBreakdown &b, double prelog)
{
    const double denom = b.bu + b.ui.sum() + b.noise;
    b.sinr = b.ds > 0.0 ? b.ds / denom : 0.0;
    b.rate = prelog * std::log2(1.0 + b.sinr);
}

/// Closed-form statistics of UE k's effective channel under MRT plus
/// sensing beams with MMSE estimates.
inline SinrBreakdown closed_form_breakdown(const Scenario &sc, const PowerAllocation &alloc, int k)
{
    const int K = sc.K();
    const double N = sc.config.tx_antennas;
    SinrBreakdown b;
    const double coherent = (sc.xi.row(k).array() * alloc.gamma.row(k).array().sqrt()).sum();
    b.ds = N * N * coherent * coherent;
    b.ui = RealVector::Zero(K);
    for (int j = 0; j < K; ++j)
    {
        const double v = N * ((sc.beta.row(k).array() * sc.xi.row(j).array() * alloc.gamma.row(j).array()).sum() +
                              (sc.beta.row(k).array() * alloc.eta.row(j).array()).sum());
        if (j == k)
            b.bu = v;
        else
            b.ui[j] = v;
    }
    b.noise = sc.config.comm_noise;
    finish_breakdown(b, sc.config.prelog());
    return b;
}

inline RealVector closed_form_rates(const Scenario &sc, const PowerAllocation &alloc)
{
    RealVector r(sc.K());
    for (int k = 0; k < sc.K(); ++k)
        r[k] = closed_form_breakdown(sc, alloc, k).rate;
    return r;
}

inline double sum_rate(const Scenario &sc, const PowerAllocation &alloc)
{
    return closed_form_rates(sc, alloc).sum();
}

/// Per-UE Monte Carlo estimate with a delete-one jackknife standard error.
struct MonteCarloRate
{
    double rate = 0.0;
    double standard_error = 0.0;
    SinrBreakdown breakdown;
};

/// Effective channel gains g(k, j) = sum_l h_kl^H f_jl for one draw.
inline ComplexMatrix effective_gains(const Scenario &sc, const PowerAllocation &alloc, const ChannelRealization &r,
                                     const SteeringSet &steer)
{
    const int K = sc.K();
    ComplexMatrix g = ComplexMatrix::Zero(K, K);
    for (int l = 0; l < sc.L(); ++l)
    {
        const ComplexMatrix F =
            build_precoder(r.h_hat[l], alloc.gamma.col(l), alloc.eta.col(l), steer.a[l]);
        g.noalias() += r.h[l].adjoint() * F;
    }
    return g;
}

/// Estimates every UE's rate from `trials` independent small-scale draws.
inline std::vector<MonteCarloRate> monte_carlo_rates(const Scenario &sc, const PowerAllocation &alloc, int trials,
                                                     std::uint64_t seed)
{
    if (trials < 2)
        throw std::invalid_argument("monte_carlo_rates: need at least 2 trials");
    const int K = sc.K();
    const SteeringSet steer = make_steering(sc);
    const double noise = sc.config.comm_noise;
    const double prelog = sc.config.prelog();

    std::vector<ComplexMatrix> gains(trials);
    for (int t = 0; t < trials; ++t)
    {
        Rng rng = make_stream(seed, 300, std::uint64_t(t));
        gains[t] = effective_gains(sc, alloc, sample_channels(sc, rng), steer);
    }

    std::vector<MonteCarloRate> out(K);
    for (int k = 0; k < K; ++k)
    {
        cplx s1 = 0.0;
        double s2 = 0.0;
        RealVector u = RealVector::Zero(K);
        for (int t = 0; t < trials; ++t)
        {
            s1 += gains[t](k, k);
            s2 += std::norm(gains[t](k, k));
            for (int j = 0; j < K; ++j)
                if (j != k)
                    u[j] += std::norm(gains[t](k, j));
        }

        auto assemble = [&](cplx sum1, double sum2, const RealVector &usum, double n) {
            SinrBreakdown b;
            const cplx mean = sum1 / n;
            b.ds = std::norm(mean);
            b.bu = (sum2 - n * std::norm(mean)) / (n - 1.0);
            b.ui = usum / n;
            b.noise = noise;
            finish_breakdown(b, prelog);
            return b;
        };

        const double n = trials;
        out[k].breakdown = assemble(s1, s2, u, n);
        out[k].rate = out[k].breakdown.rate;

        // Jackknife over trials.
        std::vector<double> loo(trials);
        double loo_mean = 0.0;
        RealVector ut(K);
        for (int t = 0; t < trials; ++t)
        {
            for (int j = 0; j < K; ++j)
                ut[j] = j == k ? 0.0 : u[j] - std::norm(gains[t](k, j));
            loo[t] = assemble(s1 - gains[t](k, k), s2 - std::norm(gains[t](k, k)), ut, n - 1.0).rate;
            loo_mean += loo[t];
        }
        loo_mean /= n;
        double ss = 0.0;
        for (double v : loo)
            ss += (v - loo_mean) * (v - loo_mean);
        out[k].standard_error = std::sqrt((n - 1.0) / n * ss);
    }
    return out;
}

inline MonteCarloRate monte_carlo_rate(const Scenario &sc, const PowerAllocation &alloc, int k, int trials,
                                       std::uint64_t seed)
{
    return monte_carlo_rates(sc, alloc, trials, seed).at(k);
}

} // namespace cfisac
