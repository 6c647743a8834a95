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
#include "scenario.hpp"

#include <vector>

namespace cfisac
{

/// Communication (gamma) and sensing (eta) power factors, both K x L.
struct PowerAllocation
{
    RealMatrix gamma;
    RealMatrix eta;

    static PowerAllocation zeros(int K, int L)
    {
        return {RealMatrix::Zero(K, L), RealMatrix::Zero(K, L)};
    }

    PowerAllocation scaled(double c) const
    {
        return {gamma * c, eta * c};
    }
};

inline double array_offset(ArrayIndexing indexing)
{
    return indexing == ArrayIndexing::one_based ? 1.0 : 0.0;
}

/// Half-wavelength ULA response, entry n = exp(-j*pi*m_n*sin(angle)).
inline ComplexVector steering_vector(int N, double angle, ArrayIndexing indexing = ArrayIndexing::zero_based)
{
    const double off = array_offset(indexing);
    const double s = std::sin(angle);
    ComplexVector v(N);
    for (int n = 0; n < N; ++n)
        v[n] = std::polar(1.0, -pi * (n + off) * s);
    return v;
}

/// d/d(angle) of steering_vector.
inline ComplexVector steering_derivative(int N, double angle, ArrayIndexing indexing = ArrayIndexing::zero_based)
{
    const double off = array_offset(indexing);
    const double c = std::cos(angle);
    ComplexVector v = steering_vector(N, angle, indexing);
    for (int n = 0; n < N; ++n)
        v[n] *= cplx(0.0, -pi * (n + off) * c);
    return v;
}

/// Transmit (a, length N_t) and receive (b, length N_r) responses per AP.
struct SteeringSet
{
    std::vector<ComplexVector> a, b, a_dot, b_dot;
};

inline SteeringSet make_steering(const Scenario &sc)
{
    const auto &cfg = sc.config;
    SteeringSet s;
    for (int l = 0; l < sc.L(); ++l)
    {
        s.a.push_back(steering_vector(cfg.tx_antennas, sc.phi[l], cfg.array_indexing));
        s.a_dot.push_back(steering_derivative(cfg.tx_antennas, sc.phi[l], cfg.array_indexing));
        s.b.push_back(steering_vector(cfg.rx_antennas, sc.theta[l], cfg.array_indexing));
        s.b_dot.push_back(steering_derivative(cfg.rx_antennas, sc.theta[l], cfg.array_indexing));
    }
    return s;
}

/// Precoder of one AP: column k is sqrt(gamma_k) h_hat_k + sqrt(eta_k) a.
inline ComplexMatrix build_precoder(const ComplexMatrix &h_hat, const RealVector &gamma, const RealVector &eta,
                                    const ComplexVector &a)
{
    ComplexMatrix F(h_hat.rows(), h_hat.cols());
    for (Eigen::Index k = 0; k < h_hat.cols(); ++k)
        F.col(k) = std::sqrt(gamma[k]) * h_hat.col(k) + std::sqrt(eta[k]) * a;
    return F;
}

/// Sum over APs of E{tr(F_l F_l^H)}.
inline double expected_total_power(const Scenario &sc, const PowerAllocation &alloc)
{
    return sc.config.tx_antennas * ((sc.xi.array() * alloc.gamma.array()).sum() + alloc.eta.sum());
}

/// Shares the budget between sensing (fraction `sensing_share`, spread evenly
/// over all streams) and MRT (scaled by the estimate variances).
inline PowerAllocation split_allocation(const Scenario &sc, double sensing_share)
{
    const auto &cfg = sc.config;
    const int K = sc.K();
    const int L = sc.L();
    const double P = cfg.power_budget;
    const double N = cfg.tx_antennas;
    PowerAllocation alloc;
    alloc.eta = RealMatrix::Constant(K, L, sensing_share * P / (N * L * K));
    alloc.gamma.resize(K, L);
    if (cfg.xi_normalization == XiNormalization::total)
        alloc.gamma.setConstant((1.0 - sensing_share) * P / (N * sc.xi.sum()));
    else
        for (int l = 0; l < L; ++l)
            alloc.gamma.col(l).setConstant((1.0 - sensing_share) * P / (N * L * sc.xi.col(l).sum()));
    return alloc;
}

/// Half of the budget to each function.
inline PowerAllocation equal_power_allocation(const Scenario &sc)
{
    return split_allocation(sc, 0.5);
}

} // namespace cfisac
