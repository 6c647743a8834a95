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

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace cfisac
{

/// Pilot sequences shared by every AP. Column k of `pilots` is UE k's pilot;
/// gram(j, k) = |psi_j^H psi_k|^2.
struct PilotBook
{
    ComplexMatrix pilots;
    RealMatrix gram;
};

/// UE k gets basis vector k mod pilot_length of the standard basis.
inline PilotBook assign_pilots(int ues, int pilot_length)
{
    if (ues < 1 || pilot_length < 1)
        throw std::invalid_argument("assign_pilots: ues and pilot_length must be >= 1");
    PilotBook book;
    book.pilots = ComplexMatrix::Zero(pilot_length, ues);
    for (int k = 0; k < ues; ++k)
        book.pilots(k % pilot_length, k) = 1.0;
    book.gram = (book.pilots.adjoint() * book.pilots).cwiseAbs2();
    return book;
}

struct MmseStats
{
    RealMatrix xi;
    RealMatrix eps;
};

/// MMSE estimate and error variances for every (UE, AP) pair.
inline MmseStats mmse_stats(const RealMatrix &beta, const PilotBook &book, int pilot_length, double pilot_power,
                            double noise)
{
    const int K = int(beta.rows());
    const int L = int(beta.cols());
    if (book.gram.rows() != K)
        throw std::invalid_argument("mmse_stats: pilot book does not match the UE count");
    const double tp = pilot_length * pilot_power;
    MmseStats st;
    st.xi.resize(K, L);
    st.eps.resize(K, L);
    for (int l = 0; l < L; ++l)
        for (int k = 0; k < K; ++k)
        {
            double interference = 0.0;
            for (int j = 0; j < K; ++j)
                interference += beta(j, l) * book.gram(j, k);
            const double b = beta(k, l);
            st.xi(k, l) = tp * b * b / (tp * interference + noise);
            st.eps(k, l) = b - st.xi(k, l);
        }
    return st;
}

/// Topology plus pilot assignment and MMSE statistics.
inline Scenario make_scenario(const SystemConfig &cfg, std::uint64_t seed)
{
    Scenario sc = generate_topology(cfg, seed);
    const PilotBook book = assign_pilots(cfg.ues, cfg.pilot_length);
    MmseStats st = mmse_stats(sc.beta, book, cfg.pilot_length, cfg.pilot_power, cfg.comm_noise);
    sc.xi = std::move(st.xi);
    sc.eps = std::move(st.eps);
    return sc;
}

enum class SymbolAlphabet
{
    qpsk,
    gaussian
};

/// One draw of small-scale quantities. h_hat[l] and e[l] are N_t x K with
/// column k belonging to UE k; s is K x T; noise is K x T.
struct ChannelRealization
{
    std::vector<ComplexMatrix> h;
    std::vector<ComplexMatrix> h_hat;
    std::vector<ComplexMatrix> e;
    ComplexMatrix s;
    ComplexMatrix noise;
};

/// Draws estimates and errors directly from their MMSE distributions.
/// Symbols and noise are only drawn when `frame_length` > 0.
inline ChannelRealization sample_channels(const Scenario &sc, Rng &rng, int frame_length = 0,
                                          SymbolAlphabet alphabet = SymbolAlphabet::qpsk)
{
    const int L = sc.L();
    const int K = sc.K();
    const int N = sc.config.tx_antennas;
    ChannelRealization r;
    r.h.resize(L);
    r.h_hat.resize(L);
    r.e.resize(L);
    for (int l = 0; l < L; ++l)
    {
        r.h_hat[l].resize(N, K);
        r.e[l].resize(N, K);
        for (int k = 0; k < K; ++k)
            for (int n = 0; n < N; ++n)
            {
                r.h_hat[l](n, k) = complex_normal(rng, sc.xi(k, l));
                r.e[l](n, k) = complex_normal(rng, sc.eps(k, l));
            }
        r.h[l] = r.h_hat[l] + r.e[l];
    }
    if (frame_length > 0)
    {
        r.s.resize(K, frame_length);
        r.noise.resize(K, frame_length);
        std::bernoulli_distribution coin(0.5);
        const double q = 1.0 / std::sqrt(2.0);
        for (int t = 0; t < frame_length; ++t)
            for (int k = 0; k < K; ++k)
            {
                if (alphabet == SymbolAlphabet::qpsk)
                    r.s(k, t) = cplx(coin(rng) ? q : -q, coin(rng) ? q : -q);
                else
                    r.s(k, t) = complex_normal(rng, 1.0);
                r.noise(k, t) = complex_normal(rng, sc.config.comm_noise);
            }
    }
    return r;
}

/// Seeded variant; trial `trial` of `seed` is a fixed stream.
inline ChannelRealization sample_realization(const Scenario &sc, std::uint64_t seed, std::uint64_t trial = 0,
                                             SymbolAlphabet alphabet = SymbolAlphabet::qpsk)
{
    Rng rng = make_stream(seed, 100, trial);
    return sample_channels(sc, rng, sc.config.frame_length, alphabet);
}

/// Runs uplink training with true Rayleigh channels and AWGN, applies the
/// MMSE estimator, and returns the empirical per-entry variances of the
/// estimate and of the error.
inline MmseStats simulate_pilot_training(const Scenario &sc, const PilotBook &book, std::uint64_t seed, int trials,
                                         double noise_override = -1.0)
{
    const int L = sc.L();
    const int K = sc.K();
    const int N = sc.config.tx_antennas;
    const double tp = sc.config.pilot_length * sc.config.pilot_power;
    const double noise = noise_override >= 0.0 ? noise_override : sc.config.comm_noise;
    const ComplexMatrix cross = book.pilots.transpose() * book.pilots.conjugate(); // (j,k): psi_j^T psi_k^*

    RealMatrix gain(K, L);
    for (int l = 0; l < L; ++l)
        for (int k = 0; k < K; ++k)
        {
            double denom = noise;
            for (int j = 0; j < K; ++j)
                denom += tp * sc.beta(j, l) * book.gram(j, k);
            gain(k, l) = std::sqrt(tp) * sc.beta(k, l) / denom;
        }

    MmseStats acc{RealMatrix::Zero(K, L), RealMatrix::Zero(K, L)};
    Rng rng = make_stream(seed, 200);
    ComplexMatrix h(N, K);
    for (int t = 0; t < trials; ++t)
        for (int l = 0; l < L; ++l)
        {
            for (int k = 0; k < K; ++k)
                for (int n = 0; n < N; ++n)
                    h(n, k) = complex_normal(rng, sc.beta(k, l));
            for (int k = 0; k < K; ++k)
                for (int n = 0; n < N; ++n)
                {
                    cplx y = complex_normal(rng, noise);
                    for (int j = 0; j < K; ++j)
                        y += std::sqrt(tp) * h(n, j) * cross(j, k);
                    const cplx est = gain(k, l) * y;
                    acc.xi(k, l) += std::norm(est);
                    acc.eps(k, l) += std::norm(h(n, k) - est);
                }
        }
    acc.xi /= double(trials) * N;
    acc.eps /= double(trials) * N;
    return acc;
}

// Realization record file, little-endian:
//   8 bytes  magic "CFISACR1"
//   4 x int32  L, K, N_t, T
//   for l, for k, for n: h_hat (re, im) as float64
//   for l, for k, for n: e (re, im)
//   for t, for k: s (re, im)
inline void write_realization(const std::string &path, const ChannelRealization &r)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("write_realization: cannot open " + path);
    const std::int32_t dims[4] = {std::int32_t(r.h_hat.size()),
                                  std::int32_t(r.h_hat.empty() ? 0 : r.h_hat[0].cols()),
                                  std::int32_t(r.h_hat.empty() ? 0 : r.h_hat[0].rows()), std::int32_t(r.s.cols())};
    out.write("CFISACR1", 8);
    out.write(reinterpret_cast<const char *>(dims), sizeof(dims));
    auto put = [&](cplx v) {
        const double d[2] = {v.real(), v.imag()};
        out.write(reinterpret_cast<const char *>(d), sizeof(d));
    };
    for (const auto *set : {&r.h_hat, &r.e})
        for (const auto &m : *set)
            for (Eigen::Index k = 0; k < m.cols(); ++k)
                for (Eigen::Index n = 0; n < m.rows(); ++n)
                    put(m(n, k));
    for (Eigen::Index t = 0; t < r.s.cols(); ++t)
        for (Eigen::Index k = 0; k < r.s.rows(); ++k)
            put(r.s(k, t));
}

inline ChannelRealization read_realization(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    char magic[8];
    std::int32_t dims[4];
    if (!in.read(magic, 8) || std::string(magic, 8) != "CFISACR1" ||
        !in.read(reinterpret_cast<char *>(dims), sizeof(dims)))
        throw std::runtime_error("read_realization: not a realization record: " + path);
    const int L = dims[0], K = dims[1], N = dims[2], T = dims[3];
    auto get = [&]() {
        double d[2];
        if (!in.read(reinterpret_cast<char *>(d), sizeof(d)))
            throw std::runtime_error("read_realization: truncated record: " + path);
        return cplx(d[0], d[1]);
    };
    ChannelRealization r;
    for (auto *set : {&r.h_hat, &r.e})
    {
        set->assign(L, ComplexMatrix(N, K));
        for (auto &m : *set)
            for (int k = 0; k < K; ++k)
                for (int n = 0; n < N; ++n)
                    m(n, k) = get();
    }
    r.h.resize(L);
    for (int l = 0; l < L; ++l)
        r.h[l] = r.h_hat[l] + r.e[l];
    r.s.resize(K, T);
    for (int t = 0; t < T; ++t)
        for (int k = 0; k < K; ++k)
            r.s(k, t) = get();
    return r;
}

} // namespace cfisac
