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

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace cfisac
{

using cplx = std::complex<double>;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

inline constexpr double pi = std::numbers::pi;

// Error types. All derive from std::runtime_error so callers that do not care
// about the distinction can catch one type.

/// Rejection sampling could not place a UE at least r_h away from every AP.
struct InfeasibleGeometryError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// The Fisher information about the target angle is (numerically) singular.
struct SingularFimError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// No allocation within the power budget meets every CRLB threshold.
struct InfeasibleThresholdError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

/// The conic solver did not return an optimal point.
struct SolverError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

// ---- random streams -----------------------------------------------------

using Rng = std::mt19937_64;

/// SplitMix64 finalizer, used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Deterministic sub-stream of an experiment seed. Trial `i` of experiment
/// seed `s` always sees the same numbers regardless of how trials are
/// scheduled.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0)
{
    std::seed_seq seq{mix64(seed), mix64(seed ^ mix64(stream + 1)), mix64(stream ^ mix64(substream + 0x51ED))};
    return Rng(seq);
}

/// Topology seed of large-scale draw `draw` in an experiment with `seed`.
constexpr std::uint64_t draw_seed(std::uint64_t seed, std::uint64_t draw)
{
    return mix64(seed ^ mix64(draw + 0xD1B54A32D192ED03ULL));
}

/// Circularly-symmetric complex Gaussian sample with E|x|^2 = variance.
inline cplx complex_normal(Rng &rng, double variance)
{
    std::normal_distribution<double> n01(0.0, 1.0);
    const double s = std::sqrt(variance / 2.0);
    const double re = n01(rng);
    const double im = n01(rng);
    return {s * re, s * im};
}

// ---- unit conversions ---------------------------------------------------

inline double db_to_linear(double x_db)
{
    return std::pow(10.0, x_db / 10.0);
}

inline double linear_to_db(double x)
{
    if (!(x > 0.0))
        throw std::domain_error("linear_to_db: argument must be positive, got " + std::to_string(x));
    return 10.0 * std::log10(x);
}

/// Power budget implied by an SNR (dB) over a noise floor (linear, mW).
inline double power_from_snr(double snr_db, double noise_mw)
{
    return db_to_linear(snr_db) * noise_mw;
}

/// Shortest round-trip-ish text for diagnostics.
inline std::string format_g(double v, int digits = 6)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

} // namespace cfisac
