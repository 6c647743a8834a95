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

#include "comm_rate.hpp"
#include "common.hpp"
#include "conic_solver.hpp"
#include "precoding.hpp"
#include "sensing_crlb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace cfisac
{

struct ScaOptions
{
    RealVector crlb_thresholds; // rad^2 per receive AP; +inf disables the constraint
    double rho = 0.3;
    double convergence_tol = 1e-4;
    int max_outer_iter = 50;
    SolverOptions solver;
    EchoModel echo_model = EchoModel::multistatic;
    double heuristic_step = 1.1;
    /// A subproblem that stops at max_iter is still used when all KKT
    /// residuals are below this level.
    double accept_residual = 1e-6;
    int heuristic_max_steps = 2000;

    void validate(int L) const
    {
        if (crlb_thresholds.size() != L)
            throw std::invalid_argument("ScaOptions: need one CRLB threshold per AP");
        for (int p = 0; p < L; ++p)
            if (!(crlb_thresholds[p] > 0.0))
                throw std::invalid_argument("ScaOptions: CRLB thresholds must be positive");
        if (!(rho > 0.0 && rho < 1.0))
            throw std::invalid_argument("ScaOptions: rho must lie in (0, 1)");
    }
};

inline RealVector uniform_thresholds(int L, double threshold)
{
    return RealVector::Constant(L, threshold);
}

/// Constants of the concave rate bound at an expansion point.
struct SurrogateConstants
{
    RealVector zeta; // SINR at the expansion point
    RealVector iota; // optimal auxiliary weight
};

inline SurrogateConstants surrogate_constants(const Scenario &sc, const PowerAllocation &alloc)
{
    const int K = sc.K();
    const double N = sc.config.tx_antennas;
    SurrogateConstants c{RealVector::Zero(K), RealVector::Zero(K)};
    for (int k = 0; k < K; ++k)
    {
        const SinrBreakdown b = closed_form_breakdown(sc, alloc, k);
        const double amp = N * sc.xi.row(k).dot(alloc.gamma.row(k).cwiseSqrt());
        const double interference = b.bu + b.ui.sum() + b.noise;
        c.zeta[k] = b.sinr;
        c.iota[k] = std::sqrt(1.0 + b.sinr) * amp / (amp * amp + interference);
    }
    return c;
}

/// Concave lower bound of log2(1 + SINR_k) at allocation `alloc` for fixed
/// constants (no prelog).
inline double surrogate_rate(const Scenario &sc, const SurrogateConstants &c, const PowerAllocation &alloc, int k)
{
    const double N = sc.config.tx_antennas;
    const SinrBreakdown b = closed_form_breakdown(sc, alloc, k);
    const double amp = N * sc.xi.row(k).dot(alloc.gamma.row(k).cwiseSqrt());
    const double interference = b.bu + b.ui.sum() + b.noise;
    const double z = c.zeta[k], i = c.iota[k];
    return (std::log1p(z) - z + 2.0 * i * std::sqrt(1.0 + z) * amp - i * i * (amp * amp + interference)) /
           std::log(2.0);
}

inline double surrogate_sum(const Scenario &sc, const SurrogateConstants &c, const PowerAllocation &alloc)
{
    double s = 0.0;
    for (int k = 0; k < sc.K(); ++k)
        s += surrogate_rate(sc, c, alloc, k);
    return s;
}

/// Largest CRLB_p / threshold_p - 1 over APs with a finite threshold
/// (negative when every constraint holds with margin).
inline double max_crlb_slack(const CrlbEvaluator &ev, const PowerAllocation &alloc, const RealVector &thresholds)
{
    double worst = -std::numeric_limits<double>::infinity();
    for (int p = 0; p < ev.aps(); ++p)
    {
        if (!std::isfinite(thresholds[p]))
            continue;
        double c;
        try
        {
            c = ev.crlb(alloc, p);
        }
        catch (const SingularFimError &)
        {
            c = std::numeric_limits<double>::infinity();
        }
        worst = std::max(worst, c / thresholds[p] - 1.0);
    }
    return worst;
}

/// Budget split with factor rho, then sensing power of every AP that misses
/// its threshold is raised by `heuristic_step` per round, renormalizing the
/// whole allocation to the budget whenever it is exceeded.
inline PowerAllocation heuristic_init(const Scenario &sc, const ScaOptions &opt, const CrlbEvaluator &ev)
{
    opt.validate(sc.L());
    const double P = sc.config.power_budget;
    PowerAllocation alloc = split_allocation(sc, opt.rho);
    const double comm0 = sc.config.tx_antennas * (sc.xi.array() * alloc.gamma.array()).sum();
    for (int step = 0; step < opt.heuristic_max_steps; ++step)
    {
        bool all_ok = true;
        for (int p = 0; p < sc.L(); ++p)
        {
            if (!std::isfinite(opt.crlb_thresholds[p]))
                continue;
            double c;
            try
            {
                c = ev.crlb(alloc, p);
            }
            catch (const SingularFimError &)
            {
                c = std::numeric_limits<double>::infinity();
            }
            if (c > opt.crlb_thresholds[p])
            {
                all_ok = false;
                alloc.eta.col(p) *= opt.heuristic_step;
            }
        }
        if (all_ok)
            return alloc;
        const double used = expected_total_power(sc, alloc);
        if (used > P)
            alloc = alloc.scaled(P / used);
        const double comm = sc.config.tx_antennas * (sc.xi.array() * alloc.gamma.array()).sum();
        if (comm < 1e-9 * comm0)
            break;
    }
    throw InfeasibleThresholdError("heuristic_init: CRLB thresholds cannot be met within the power budget");
}

inline PowerAllocation heuristic_init(const Scenario &sc, const ScaOptions &opt)
{
    return heuristic_init(sc, opt, CrlbEvaluator(sc, opt.echo_model));
}

/// Variable layout of one convex subproblem. Amplitudes are normalized by
/// sqrt(P_t): gamma = P_t * u^2, eta = P_t * v^2.
struct SubproblemLayout
{
    int K = 0, L = 0;
    int u0 = 0, v0 = 0, theta0 = 0, slack = 0;

    int u(int k, int l) const { return u0 + k * L + l; }
    int v(int k, int l) const { return v0 + k * L + l; }
    int theta(int p) const { return theta0 + p; }
};

struct Subproblem
{
    ConicProgram program;
    SubproblemLayout layout;
    RealVector theta_ref; // sqrt(tau * tau_tilde) at the expansion point
};

/// Convex inner approximation of the sum-rate problem at `alloc`.
inline Subproblem build_subproblem(const Scenario &sc, const PowerAllocation &alloc, const SurrogateConstants &sc_c,
                                   const CrlbEvaluator &ev, const ScaOptions &opt)
{
    using E = AffineExpr;
    const int K = sc.K(), L = sc.L();
    const double N = sc.config.tx_antennas;
    const double P = sc.config.power_budget;
    const double sqP = std::sqrt(P);
    const RealMatrix u_ref = (alloc.gamma / P).cwiseSqrt();
    const RealMatrix v_ref = (alloc.eta / P).cwiseSqrt();

    Subproblem sp;
    auto &prog = sp.program;
    auto &ly = sp.layout;
    ly.K = K;
    ly.L = L;
    ly.u0 = prog.add_variables(K * L, 0.0);
    ly.v0 = prog.add_variables(K * L, 0.0);
    ly.theta0 = prog.add_variables(L, 0.0);
    ly.slack = prog.add_variable();

    // Objective: -sum_k 2 iota_k sqrt(1+zeta_k) A_k + (quadratic part), with
    // A_k = N sqrt(P) xi_k^T u_k.
    E obj = E::var(ly.slack);
    std::vector<E> squares;
    for (int k = 0; k < K; ++k)
    {
        const double w = 2.0 * sc_c.iota[k] * std::sqrt(1.0 + sc_c.zeta[k]) * N * sqP;
        E amp;
        for (int l = 0; l < L; ++l)
        {
            obj -= w * sc.xi(k, l) * E::var(ly.u(k, l));
            amp += sc_c.iota[k] * N * sqP * sc.xi(k, l) * E::var(ly.u(k, l));
        }
        squares.push_back(amp);
    }
    for (int j = 0; j < K; ++j)
        for (int l = 0; l < L; ++l)
        {
            double weight = 0.0;
            for (int k = 0; k < K; ++k)
                weight += sc_c.iota[k] * sc_c.iota[k] * sc.beta(k, l);
            weight *= N * P;
            if (weight > 0.0)
            {
                squares.push_back(std::sqrt(weight * sc.xi(j, l)) * E::var(ly.u(j, l)));
                squares.push_back(std::sqrt(weight) * E::var(ly.v(j, l)));
            }
        }
    prog.set_objective(obj);
    prog.add_sum_of_squares_epigraph(squares, E::var(ly.slack));

    // Total transmit power.
    std::vector<E> power;
    for (int k = 0; k < K; ++k)
        for (int l = 0; l < L; ++l)
        {
            power.push_back(std::sqrt(N * sc.xi(k, l)) * E::var(ly.u(k, l)));
            power.push_back(std::sqrt(N) * E::var(ly.v(k, l)));
        }
    prog.add_soc(power, E(1.0));

    // CRLB constraints from the tangent of the 2x2 information matrix.
    sp.theta_ref = RealVector::Zero(L);
    const double noise = ev.noise_scale();
    for (int p = 0; p < L; ++p)
    {
        const double t = opt.crlb_thresholds[p];
        if (!std::isfinite(t))
            continue;
        const CrlbCoefficients &c = ev.coefficients(p);
        const CrlbTerms ref = ev.terms(alloc, p);
        const double S = std::sqrt(ref.tau * ref.tau_tilde);
        if (!(S > 0.0))
            throw SingularFimError("build_subproblem: no angle information at AP " + std::to_string(p));
        sp.theta_ref[p] = S;

        // Tangent of P * sum_k xi_kl u_kl^2 per transmit AP.
        auto comm_lin = [&](int l, double coef) {
            E e;
            for (int k = 0; k < K; ++k)
            {
                e += coef * 2.0 * P * sc.xi(k, l) * u_ref(k, l) * E::var(ly.u(k, l));
                e.constant -= coef * P * sc.xi(k, l) * u_ref(k, l) * u_ref(k, l);
            }
            return e;
        };

        E tau = comm_lin(p, c.c1);
        for (int k = 0; k < K; ++k)
        {
            tau += c.c2 * 2.0 * P * v_ref(k, p) * E::var(ly.v(k, p));
            tau.constant -= c.c2 * P * v_ref(k, p) * v_ref(k, p);
        }

        E tau_tilde;
        for (int l = 0; l < L; ++l)
            if (c.c1_tilde_all[l] != 0.0)
                tau_tilde += comm_lin(l, c.c1_tilde_all[l]);
        const RealMatrix Rt = c.c2_tilde_all.real();
        for (int k = 0; k < K; ++k)
        {
            const RealVector g = Rt * v_ref.row(k).transpose();
            for (int l = 0; l < L; ++l)
                if (g[l] != 0.0)
                    tau_tilde += 2.0 * P * g[l] * E::var(ly.v(k, l));
            tau_tilde.constant -= P * v_ref.row(k).dot(g);
        }

        E hat_re = comm_lin(p, c.c1_hat.real());
        E hat_im = comm_lin(p, c.c1_hat.imag());
        for (int k = 0; k < K; ++k)
        {
            cplx inner = 0.0;
            for (int l = 0; l < L; ++l)
            {
                const cplx w = P * c.c2_hat_all[l] * v_ref(k, p);
                hat_re += w.real() * E::var(ly.v(k, l));
                hat_im += w.imag() * E::var(ly.v(k, l));
                inner += c.c2_hat_all[l] * v_ref(k, l);
            }
            hat_re += P * inner.real() * E::var(ly.v(k, p));
            hat_im += P * inner.imag() * E::var(ly.v(k, p));
            hat_re.constant -= P * v_ref(k, p) * inner.real();
            hat_im.constant -= P * v_ref(k, p) * inner.imag();
        }

        // Normalized by S so the reference point is theta = 1.
        const E th = E::var(ly.theta(p));
        prog.add_sum_of_squares_epigraph({hat_re * (1.0 / S), hat_im * (1.0 / S)},
                                         2.0 * th - 1.0 - tau * (noise / (t * S * S)));
        prog.add_soc({th, (tau - tau_tilde) * (0.5 / S)}, (tau + tau_tilde) * (0.5 / S));
    }
    return sp;
}

/// Point of the subproblem corresponding to the expansion allocation.
inline RealVector subproblem_point(const Subproblem &sp, const PowerAllocation &alloc, double power_budget,
                                   const SurrogateConstants &c, const Scenario &sc)
{
    const auto &ly = sp.layout;
    RealVector x = RealVector::Zero(sp.program.variable_count());
    for (int k = 0; k < ly.K; ++k)
        for (int l = 0; l < ly.L; ++l)
        {
            x[ly.u(k, l)] = std::sqrt(alloc.gamma(k, l) / power_budget);
            x[ly.v(k, l)] = std::sqrt(alloc.eta(k, l) / power_budget);
        }
    for (int p = 0; p < ly.L; ++p)
        x[ly.theta(p)] = sp.theta_ref[p] > 0.0 ? 1.0 : 0.0;
    // Tight slack: quadratic part of the bound at the expansion point.
    const double N = sc.config.tx_antennas;
    double q = 0.0;
    for (int k = 0; k < sc.K(); ++k)
    {
        const SinrBreakdown b = closed_form_breakdown(sc, alloc, k);
        const double amp = N * sc.xi.row(k).dot(alloc.gamma.row(k).cwiseSqrt());
        q += c.iota[k] * c.iota[k] * (amp * amp + b.bu + b.ui.sum());
    }
    x[ly.slack] = q;
    return x;
}

inline PowerAllocation allocation_from_point(const Subproblem &sp, const RealVector &x, double power_budget)
{
    const auto &ly = sp.layout;
    PowerAllocation a = PowerAllocation::zeros(ly.K, ly.L);
    for (int k = 0; k < ly.K; ++k)
        for (int l = 0; l < ly.L; ++l)
        {
            a.gamma(k, l) = power_budget * std::pow(std::max(0.0, x[ly.u(k, l)]), 2);
            a.eta(k, l) = power_budget * std::pow(std::max(0.0, x[ly.v(k, l)]), 2);
        }
    return a;
}

/// One row of the optimization trace.
struct ScaIterate
{
    int iter = 0;
    double surrogate = 0.0; // sum of bounds at the new point, without prelog
    double sum_rate = 0.0;  // with prelog
    double max_crlb_slack = 0.0;
    double power = 0.0;
    int solver_iterations = 0;
};

struct ScaResult
{
    PowerAllocation alloc;
    PowerAllocation initial;
    std::vector<ScaIterate> trace;
    int iterations = 0;
    bool converged = false;
};

inline ScaResult sca_solve(const Scenario &sc, const ScaOptions &opt)
{
    opt.validate(sc.L());
    const CrlbEvaluator ev(sc, opt.echo_model);
    const double P = sc.config.power_budget;
    ScaResult res;
    res.initial = heuristic_init(sc, opt, ev);
    res.alloc = res.initial;

    auto record = [&](int it, const PowerAllocation &a, double surrogate, int solver_iters) {
        ScaIterate r;
        r.iter = it;
        r.surrogate = surrogate;
        r.sum_rate = sum_rate(sc, a);
        r.max_crlb_slack = max_crlb_slack(ev, a, opt.crlb_thresholds);
        r.power = expected_total_power(sc, a);
        r.solver_iterations = solver_iters;
        res.trace.push_back(r);
    };
    {
        double s = 0.0;
        for (int k = 0; k < sc.K(); ++k)
            s += std::log2(1.0 + closed_form_breakdown(sc, res.alloc, k).sinr);
        record(0, res.alloc, s, 0);
    }

    for (int it = 1; it <= opt.max_outer_iter; ++it)
    {
        const SurrogateConstants c = surrogate_constants(sc, res.alloc);
        const Subproblem sp = build_subproblem(sc, res.alloc, c, ev, opt);
        const SolveResult sol = solve(sp.program, opt.solver);
        const bool near_optimal =
            sol.status == SolveStatus::max_iter &&
            std::max({sol.kkt.primal, sol.kkt.dual, sol.kkt.gap}) <= opt.accept_residual;
        if (sol.status != SolveStatus::optimal && !near_optimal)
            throw SolverError(std::string("sca_solve: subproblem at iteration ") + std::to_string(it) + " returned " +
                              to_string(sol.status) + " (primal " + format_g(sol.kkt.primal) + ", dual " +
                              format_g(sol.kkt.dual) + ", gap " + format_g(sol.kkt.gap) + ")");
        PowerAllocation next = allocation_from_point(sp, sol.x, P);
        const double used = expected_total_power(sc, next);
        if (used > P)
            next = next.scaled(P / used);

        const double old_rate = res.trace.back().sum_rate;
        const double new_rate = sum_rate(sc, next);
        if (new_rate < old_rate)
        {
            // Solver noise at a stationary point; keep the previous iterate.
            res.converged = true;
            break;
        }
        res.alloc = next;
        res.iterations = it;
        record(it, next, surrogate_sum(sc, c, next), sol.iterations);
        if (std::abs(new_rate - old_rate) <= opt.convergence_tol * std::max(std::abs(old_rate), 1e-12))
        {
            res.converged = true;
            break;
        }
    }
    return res;
}

} // namespace cfisac
