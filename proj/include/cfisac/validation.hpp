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
#include "comm_rate.hpp"
#include "conic_solver.hpp"
#include "sca_powalloc.hpp"
#include "sensing_crlb.hpp"

#include <chrono>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace cfisac
{

/// Outcome of one oracle check. `residual` is the worst observed value of the
/// quantity bounded by `tolerance` (a ratio for multi-part checks).
struct CheckResult
{
    std::string id;
    std::string name;
    bool passed = false;
    double residual = 0.0;
    double tolerance = 0.0;
    std::string detail;
    std::string timing; // wall-clock breakdown, kept out of reproducible output
    double seconds = 0.0;
};

/// Shared inputs. `base` supplies every system parameter not swept by a check.
struct ValidationSettings
{
    SystemConfig base;
    std::uint64_t seed = 1;
    int large_scale = 5;
    double crlb_threshold_db = -5.0;
    EchoModel echo_model = EchoModel::multistatic;
    int max_outer_iter = 50;
    double convergence_tol = 1e-4;
};

namespace detail
{

inline PowerAllocation random_feasible_allocation(const Scenario &sc, Rng &rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PowerAllocation a = split_allocation(sc, 0.05 + 0.9 * u(rng));
    for (int i = 0; i < a.gamma.size(); ++i)
    {
        a.gamma.data()[i] *= 0.05 + u(rng);
        a.eta.data()[i] *= 0.05 + u(rng);
    }
    return a.scaled(u(rng) * sc.config.power_budget / expected_total_power(sc, a));
}

template <class F> CheckResult timed(std::string id, std::string name, F body)
{
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r = body();
    r.id = std::move(id);
    r.name = std::move(name);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline double rel(double a, double b)
{
    return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

} // namespace detail

/// Closed-form rate against the Monte Carlo estimate at equal power: every UE
/// within 3 standard errors and 3% relative.
inline CheckResult check_rate_closed_form(const ValidationSettings &vs, const std::vector<int> &aps = {8, 16},
                                          int trials = 2000)
{
    return detail::timed("AC1", "closed-form rate vs Monte Carlo", [&] {
        CheckResult r;
        r.tolerance = 1.0;
        double worst_z = 0.0, worst_rel = 0.0, worst_seconds = 0.0;
        std::ostringstream d, tm;
        for (int L : aps)
        {
            const auto t0 = std::chrono::steady_clock::now();
            double lz = 0.0, lr = 0.0;
            for (int draw = 0; draw < vs.large_scale; ++draw)
            {
                SystemConfig cfg = vs.base;
                cfg.aps = L;
                const std::uint64_t s = draw_seed(vs.seed, std::uint64_t(draw));
                const Scenario sc = make_scenario(cfg, s);
                const PowerAllocation a = equal_power_allocation(sc);
                const auto mc = monte_carlo_rates(sc, a, trials, s);
                for (int k = 0; k < sc.K(); ++k)
                {
                    const double cf = closed_form_breakdown(sc, a, k).rate;
                    lz = std::max(lz, std::abs(mc[k].rate - cf) / mc[k].standard_error);
                    lr = std::max(lr, detail::rel(mc[k].rate, cf));
                }
            }
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            d << "L=" << L << ": max |diff|/SE " << format_g(lz, 3) << ", max rel " << format_g(lr, 3) << "; ";
            tm << "L=" << L << " " << format_g(secs, 3) << " s; ";
            worst_z = std::max(worst_z, lz);
            worst_rel = std::max(worst_rel, lr);
            worst_seconds = std::max(worst_seconds, secs);
        }
        r.residual = std::max(worst_z / 3.0, worst_rel / 0.03);
        r.passed = worst_z <= 3.0 && worst_rel <= 0.03 && worst_seconds < 60.0;
        d << vs.large_scale << " large-scale draws x " << trials << " trials";
        r.detail = d.str();
        r.timing = tm.str();
        return r;
    });
}

/// Closed-form CRLB against [J^-1]_11 of the dense Fisher information.
inline CheckResult check_crlb_fim(const ValidationSettings &vs, int pairs = 100)
{
    return detail::timed("AC2", "closed-form CRLB vs dense FIM inverse", [&] {
        CheckResult r;
        r.tolerance = 1e-8;
        Rng rng = make_stream(vs.seed, 900);
        int compared = 0;
        for (int i = 0; i < pairs; ++i)
        {
            SystemConfig cfg = vs.base;
            cfg.aps = 2 + i % 9;
            const Scenario sc = make_scenario(cfg, draw_seed(vs.seed, 1000 + i));
            const SteeringSet st = make_steering(sc);
            const SensingStructure s = build_structure(sc, st, vs.echo_model);
            const CrlbEvaluator ev(sc, vs.echo_model);
            const PowerAllocation a = detail::random_feasible_allocation(sc, rng);
            for (int p = 0; p < sc.L(); ++p)
            {
                const double dense = crlb_from_fim(fim(sc, a, p, s, st));
                r.residual = std::max(r.residual, detail::rel(ev.crlb(a, p), dense));
                ++compared;
            }
        }
        r.passed = r.residual <= r.tolerance;
        r.detail = std::to_string(pairs) + " (scenario, allocation) pairs, " + std::to_string(compared) +
                   " receive APs, max rel diff " + format_g(r.residual, 3);
        return r;
    });
}

/// Closed-form transmit covariance against the sample covariance.
inline CheckResult check_covariance(const ValidationSettings &vs, int allocations = 10, int draws = 5000)
{
    return detail::timed("AC3", "transmit covariance vs sample covariance", [&] {
        CheckResult r;
        r.tolerance = 0.02;
        Rng rng = make_stream(vs.seed, 901);
        SystemConfig cfg = vs.base;
        cfg.aps = 4;
        for (int i = 0; i < allocations; ++i)
        {
            const std::uint64_t s = draw_seed(vs.seed, 2000 + i);
            const Scenario sc = make_scenario(cfg, s);
            const SteeringSet st = make_steering(sc);
            const PowerAllocation a = detail::random_feasible_allocation(sc, rng);
            const ComplexMatrix R = covariance_rx(sc, a, st);
            ComplexMatrix acc = ComplexMatrix::Zero(R.rows(), R.cols());
            for (int t = 0; t < draws; ++t)
            {
                const ComplexMatrix X = stacked_transmit(sc, a, st, sample_realization(sc, s, std::uint64_t(t)));
                acc.noalias() += X * X.adjoint() / double(X.cols());
            }
            acc /= double(draws);
            r.residual = std::max(r.residual, (acc - R).norm() / R.norm());
        }
        r.passed = r.residual <= r.tolerance;
        r.detail = std::to_string(allocations) + " allocations x " + std::to_string(draws) +
                   " draws, max Frobenius rel diff " + format_g(r.residual, 3);
        return r;
    });
}

/// Angle derivative of the echo map against central differences of the echo.
inline CheckResult check_echo_derivative(const ValidationSettings &vs, int angles = 50)
{
    return detail::timed("AC4", "echo derivative vs finite differences", [&] {
        CheckResult r;
        r.tolerance = 1e-5;
        Rng rng = make_stream(vs.seed, 902);
        std::uniform_real_distribution<double> ang(-1.5, 1.5);
        SystemConfig cfg = vs.base;
        cfg.aps = 4;
        Scenario sc = make_scenario(cfg, draw_seed(vs.seed, 3000));
        const PowerAllocation a = detail::random_feasible_allocation(sc, rng);
        for (int i = 0; i < angles; ++i)
        {
            const int p = i % sc.L();
            sc.theta[p] = sc.phi[p] = ang(rng);
            const SteeringSet st = make_steering(sc);
            const SensingStructure s = build_structure(sc, st, vs.echo_model);
            const ComplexMatrix X = stacked_transmit(sc, a, st, sample_realization(sc, vs.seed, std::uint64_t(i)));
            const double h = 1e-6;
            const ComplexMatrix fd = (echo_signal(sc, p, X, sc.theta[p] + h, vs.echo_model) -
                                      echo_signal(sc, p, X, sc.theta[p] - h, vs.echo_model)) /
                                     (2.0 * h);
            const ComplexMatrix an = s.B_dot[p] * X;
            r.residual = std::max(r.residual, (an - fd).norm() / an.norm());
        }
        r.passed = r.residual <= r.tolerance;
        r.detail = std::to_string(angles) + " random angles, max rel diff " + format_g(r.residual, 3);
        return r;
    });
}

/// Tightness of the rate bound at its expansion point and the lower-bound
/// property at random feasible points.
inline CheckResult check_surrogate(const ValidationSettings &vs, int points = 10000)
{
    return detail::timed("AC5", "rate surrogate tightness and lower bound", [&] {
        CheckResult r;
        r.tolerance = 1e-9;
        Rng rng = make_stream(vs.seed, 903);
        SystemConfig cfg = vs.base;
        cfg.aps = 8;
        const Scenario sc = make_scenario(cfg, draw_seed(vs.seed, 4000));
        double tight = 0.0;
        int violations = 0;
        double worst_excess = 0.0;
        const int expansions = 20;
        for (int e = 0; e < expansions; ++e)
        {
            const PowerAllocation x0 = detail::random_feasible_allocation(sc, rng);
            const SurrogateConstants c = surrogate_constants(sc, x0);
            for (int k = 0; k < sc.K(); ++k)
                tight = std::max(tight, std::abs(surrogate_rate(sc, c, x0, k) - std::log2(1.0 + c.zeta[k])));
            for (int t = 0; t < points / expansions; ++t)
            {
                const PowerAllocation a = detail::random_feasible_allocation(sc, rng);
                for (int k = 0; k < sc.K(); ++k)
                {
                    const double excess =
                        surrogate_rate(sc, c, a, k) - std::log2(1.0 + closed_form_breakdown(sc, a, k).sinr);
                    worst_excess = std::max(worst_excess, excess);
                    if (excess > 1e-9)
                        ++violations;
                }
            }
        }
        r.residual = std::max(tight, worst_excess);
        r.passed = tight <= 1e-9 && violations == 0;
        r.detail = "max |f - log2(1+zeta)| at expansion " + format_g(tight, 3) + "; " + std::to_string(points) +
                   " random points, " + std::to_string(violations) + " bound violations (max excess " +
                   format_g(worst_excess, 3) + ")";
        return r;
    });
}

/// Per-L outcome of one optimization run.
struct ScaRunSummary
{
    int L = 0;
    int iterations = 0;
    int iteration_limit = 0;
    bool converged = false;
    bool monotone = true;
    bool feasible = true;
    bool beats_heuristic = true;
    double initial_rate = 0.0;
    double final_rate = 0.0;
    double seconds = 0.0;
    std::string error;
};

inline ScaRunSummary summarize_sca_run(const ValidationSettings &vs, int L, int iteration_limit)
{
    ScaRunSummary out;
    out.L = L;
    out.iteration_limit = iteration_limit;
    const auto t0 = std::chrono::steady_clock::now();
    SystemConfig cfg = vs.base;
    cfg.aps = L;
    const Scenario sc = make_scenario(cfg, draw_seed(vs.seed, 0));
    ScaOptions opt;
    opt.crlb_thresholds = uniform_thresholds(L, db_to_linear(vs.crlb_threshold_db));
    opt.echo_model = vs.echo_model;
    opt.max_outer_iter = vs.max_outer_iter;
    opt.convergence_tol = vs.convergence_tol;
    try
    {
        const ScaResult res = sca_solve(sc, opt);
        const CrlbEvaluator ev(sc, vs.echo_model);
        out.iterations = res.iterations;
        out.converged = res.converged;
        for (std::size_t i = 1; i < res.trace.size(); ++i)
            if (res.trace[i].sum_rate < res.trace[i - 1].sum_rate - 1e-6)
                out.monotone = false;
        const RealVector crlb = ev.crlb_all(res.alloc);
        for (int p = 0; p < L; ++p)
            if (crlb[p] > opt.crlb_thresholds[p] * (1.0 + 1e-6))
                out.feasible = false;
        if (expected_total_power(sc, res.alloc) > cfg.power_budget * (1.0 + 1e-9))
            out.feasible = false;
        out.initial_rate = sum_rate(sc, res.initial);
        out.final_rate = sum_rate(sc, res.alloc);
        out.beats_heuristic = out.final_rate >= out.initial_rate;
    }
    catch (const std::exception &e)
    {
        out.error = e.what();
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

/// Ascent, feasibility, iteration counts within twice the reference counts,
/// and improvement over the heuristic start.
inline CheckResult check_sca(const ValidationSettings &vs, const std::vector<int> &aps = {8, 16, 32},
                             const std::vector<int> &reference_iterations = {8, 10, 15},
                             std::vector<ScaRunSummary> *runs = nullptr)
{
    return detail::timed("AC6", "SCA ascent, feasibility and iteration count", [&] {
        CheckResult r;
        r.tolerance = 1.0;
        bool ok = true;
        std::ostringstream d, tm;
        for (std::size_t i = 0; i < aps.size(); ++i)
        {
            const ScaRunSummary s = summarize_sca_run(vs, aps[i], 2 * reference_iterations[i]);
            if (runs)
                runs->push_back(s);
            const bool within = s.converged && s.iterations <= s.iteration_limit;
            const bool good = s.error.empty() && s.monotone && s.feasible && s.beats_heuristic && within &&
                              (aps[i] != 32 || s.seconds < 300.0);
            ok = ok && good;
            r.residual = std::max(r.residual, double(s.iterations) / s.iteration_limit);
            d << "L=" << s.L << ": ";
            if (!s.error.empty())
                d << "error (" << s.error << "); ";
            else
                d << s.iterations << " iterations (limit " << s.iteration_limit << ", "
                  << (s.converged ? "converged" : "not converged") << "), monotone " << (s.monotone ? "yes" : "no")
                  << ", feasible " << (s.feasible ? "yes" : "no") << ", rate " << format_g(s.initial_rate, 5)
                  << " -> " << format_g(s.final_rate, 5) << "; ";
            tm << "L=" << s.L << " " << format_g(s.seconds, 3) << " s; ";
        }
        d << "threshold " << format_g(vs.crlb_threshold_db, 3) << " dB";
        r.passed = ok;
        r.detail = d.str();
        r.timing = tm.str();
        return r;
    });
}

/// One reference conic program with its known optimum.
struct SolverCase
{
    std::string name;
    ConicProgram program;
    RealVector x;
};

inline std::vector<SolverCase> analytic_solver_cases()
{
    using E = AffineExpr;
    std::vector<SolverCase> cases;
    auto vec = [](std::initializer_list<double> v) {
        RealVector x(int(v.size()));
        int i = 0;
        for (double e : v)
            x[i++] = e;
        return x;
    };
    {
        SolverCase c{"x >= 1", {}, vec({1.0})};
        const int x = c.program.add_variable();
        c.program.set_objective(E::var(x));
        c.program.add_inequality(E(1.0) - E::var(x));
        cases.push_back(std::move(c));
    }
    {
        SolverCase c{"||(3,4)|| <= t", {}, vec({5.0})};
        const int t = c.program.add_variable();
        c.program.set_objective(E::var(t));
        c.program.add_soc({E(3.0), E(4.0)}, E::var(t));
        cases.push_back(std::move(c));
    }
    {
        SolverCase c{"simplex LP", {}, vec({0.0, 1.0})};
        const int x = c.program.add_variable(0.0), y = c.program.add_variable(0.0);
        c.program.set_objective(-E::var(x) - 2.0 * E::var(y));
        c.program.add_equality(E::var(x) + E::var(y) - 1.0);
        cases.push_back(std::move(c));
    }
    {
        SolverCase c{"distance to unit disk", {}, vec({0.6, 0.8, 4.0})};
        const int x = c.program.add_variable(), y = c.program.add_variable(), t = c.program.add_variable();
        c.program.set_objective(E::var(t));
        c.program.add_soc({E::var(x) - 3.0, E::var(y) - 4.0}, E::var(t));
        c.program.add_soc({E::var(x), E::var(y)}, E(1.0));
        cases.push_back(std::move(c));
    }
    {
        const double w = 1.0 + std::sqrt(0.75);
        SolverCase c{"square below a line", {}, vec({w, 2.0 * w - 0.25})};
        const int om = c.program.add_variable(), ga = c.program.add_variable();
        c.program.set_objective(-E::var(ga));
        c.program.add_soc({E::var(om), (E::var(ga) - 1.0) * 0.5}, (E::var(ga) + 1.0) * 0.5);
        c.program.add_inequality(E::var(ga) - 2.0 * E::var(om) + 0.25);
        cases.push_back(std::move(c));
    }
    {
        // min 2x + y s.t. ||(x, y)|| <= 1 -> -(2, 1)/sqrt(5)
        const double n = std::sqrt(5.0);
        SolverCase c{"linear over the unit disk", {}, vec({-2.0 / n, -1.0 / n})};
        const int x = c.program.add_variable(), y = c.program.add_variable();
        c.program.set_objective(2.0 * E::var(x) + E::var(y));
        c.program.add_soc({E::var(x), E::var(y)}, E(1.0));
        cases.push_back(std::move(c));
    }
    return cases;
}

/// Random feasible program in `n` variables over the box [-2, 2]^n with one
/// cone and one half-space, as used by the grid oracle.
struct RandomSolverInstance
{
    ConicProgram program;
    RealVector c;
    RealMatrix P;
    RealVector q, rvec, a;
    double d = 0.0, e = 0.0;

    bool feasible(const RealVector &x) const
    {
        return (P * x + q).norm() <= rvec.dot(x) + d && a.dot(x) <= e && x.cwiseAbs().maxCoeff() <= 2.0;
    }
};

inline RandomSolverInstance random_solver_instance(Rng &rng, int n)
{
    using E = AffineExpr;
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    RandomSolverInstance in;
    RealVector x0(n);
    for (int i = 0; i < n; ++i)
        x0[i] = 0.8 * U(rng);
    in.P.resize(n, n);
    in.q.resize(n);
    in.rvec.resize(n);
    in.a.resize(n);
    in.c.resize(n);
    for (int i = 0; i < n; ++i)
    {
        for (int j = 0; j < n; ++j)
            in.P(i, j) = U(rng);
        in.q[i] = U(rng);
        in.rvec[i] = 0.3 * U(rng);
        in.a[i] = U(rng);
    }
    in.d = (in.P * x0 + in.q).norm() - in.rvec.dot(x0) + 0.3 + 0.5 * (U(rng) + 1.0);
    in.e = in.a.dot(x0) + 0.2 + 0.5 * (U(rng) + 1.0);
    for (int i = 0; i < n; ++i)
        in.c[i] = U(rng);

    auto &p = in.program;
    const int v0 = p.add_variables(n);
    auto lin = [&](const RealVector &w, double c0) {
        E ex(c0);
        for (int i = 0; i < n; ++i)
            ex += w[i] * E::var(v0 + i);
        return ex;
    };
    p.set_objective(lin(in.c, 0.0));
    std::vector<E> u;
    for (int i = 0; i < n; ++i)
        u.push_back(lin(in.P.row(i).transpose(), in.q[i]));
    p.add_soc(u, lin(in.rvec, in.d));
    p.add_inequality(lin(in.a, -in.e));
    for (int i = 0; i < n; ++i)
    {
        p.add_inequality(E::var(v0 + i) - 2.0);
        p.add_inequality(-E::var(v0 + i) - 2.0);
    }
    return in;
}

/// Brute-force minimum of c^T x over the feasible points of a 2-D grid.
inline double grid_minimum(const RandomSolverInstance &in, double step)
{
    const int m = int(std::lround(4.0 / step));
    double best = std::numeric_limits<double>::infinity();
    RealVector x(2);
    for (int i = 0; i <= m; ++i)
        for (int j = 0; j <= m; ++j)
        {
            x << -2.0 + i * step, -2.0 + j * step;
            const double v = in.c.dot(x);
            if (v < best && in.feasible(x))
                best = v;
        }
    return best;
}

/// Analytic programs to 1e-8 KKT residuals and random programs against a
/// 1e-3 grid. The solver may beat the grid by at most 2 * step * ||c||_2 and
/// may not lose to it.
inline CheckResult check_solver(const ValidationSettings &vs, int random_instances = 20, double step = 1e-3)
{
    return detail::timed("AC7", "conic solver on analytic and grid-verified programs", [&] {
        CheckResult r;
        r.tolerance = 1e-8;
        bool ok = true;
        std::ostringstream d;
        double worst_kkt = 0.0, worst_x = 0.0;
        for (const auto &c : analytic_solver_cases())
        {
            const SolveResult s = solve(c.program);
            const double kkt = std::max({s.kkt.primal, s.kkt.dual, s.kkt.gap});
            worst_kkt = std::max(worst_kkt, kkt);
            if (s.status != SolveStatus::optimal || kkt > 1e-8)
            {
                ok = false;
                d << c.name << ": " << to_string(s.status) << " kkt " << format_g(kkt, 3) << "; ";
                continue;
            }
            worst_x = std::max(worst_x, (s.x - c.x).cwiseAbs().maxCoeff());
        }
        if (worst_x > 1e-6)
            ok = false;
        d << "analytic: max KKT residual " << format_g(worst_kkt, 3) << ", max |x - x*| " << format_g(worst_x, 3)
          << "; ";

        Rng rng = make_stream(vs.seed, 904);
        double worst_gap = 0.0;
        int misses = 0;
        for (int i = 0; i < random_instances; ++i)
        {
            const RandomSolverInstance in = random_solver_instance(rng, 2);
            const SolveResult s = solve(in.program);
            const double grid = grid_minimum(in, step);
            const double slack = 2.0 * step * in.c.norm();
            const double lost = s.objective_value - grid;
            worst_gap = std::max(worst_gap, std::abs(lost) / slack);
            if (s.status != SolveStatus::optimal || lost > 1e-7 || -lost > slack ||
                in.program.max_violation(s.x) > 1e-7)
                ++misses;
        }
        if (misses > 0)
            ok = false;
        d << random_instances << " random instances: " << misses
          << " outside grid resolution (max |obj - grid| / (2 step ||c||_2) " << format_g(worst_gap, 3) << ")";
        r.residual = worst_kkt;
        r.passed = ok;
        r.detail = d.str();
        return r;
    });
}

/// Mean closed-form equal-power sum rate over `draws` large-scale draws.
inline double mean_equal_power_sum_rate(const SystemConfig &cfg, std::uint64_t seed, int draws)
{
    double s = 0.0;
    for (int d = 0; d < draws; ++d)
    {
        const Scenario sc = make_scenario(cfg, draw_seed(seed, std::uint64_t(d)));
        s += sum_rate(sc, equal_power_allocation(sc));
    }
    return s / draws;
}

/// Sum rate strictly increasing in L and N_t (draw-averaged), and pilot
/// contamination never helping on a matched draw.
inline CheckResult check_trends(const ValidationSettings &vs, int draws = 10)
{
    return detail::timed("AC8", "sum-rate trends in L, N_t and pilot length", [&] {
        CheckResult r;
        bool ok = true;
        std::ostringstream d;
        const int K = vs.base.ues;
        const std::vector<int> aps{8, 16, 32}, tx{4, 8};
        for (int nt : tx)
        {
            d << "N_t=" << nt << ":";
            double prev = -1.0;
            for (int L : aps)
            {
                SystemConfig cfg = vs.base;
                cfg.aps = L;
                cfg.tx_antennas = nt;
                cfg.pilot_length = K;
                const double v = mean_equal_power_sum_rate(cfg, vs.seed, draws);
                d << " L=" << L << " " << format_g(v, 5);
                if (v <= prev)
                    ok = false;
                prev = v;
            }
            d << "; ";
        }
        for (int L : aps)
        {
            SystemConfig cfg = vs.base;
            cfg.aps = L;
            cfg.pilot_length = K;
            cfg.tx_antennas = tx[0];
            const double a = mean_equal_power_sum_rate(cfg, vs.seed, draws);
            cfg.tx_antennas = tx[1];
            const double b = mean_equal_power_sum_rate(cfg, vs.seed, draws);
            if (b <= a)
                ok = false;
        }
        int contamination_violations = 0;
        for (int L : aps)
            for (int nt : tx)
                for (int dr = 0; dr < draws; ++dr)
                {
                    SystemConfig cfg = vs.base;
                    cfg.aps = L;
                    cfg.tx_antennas = nt;
                    cfg.pilot_length = K;
                    const Scenario full = make_scenario(cfg, draw_seed(vs.seed, std::uint64_t(dr)));
                    cfg.pilot_length = std::max(1, K / 2);
                    const Scenario half = make_scenario(cfg, draw_seed(vs.seed, std::uint64_t(dr)));
                    if (sum_rate(half, equal_power_allocation(half)) > sum_rate(full, equal_power_allocation(full)))
                        ++contamination_violations;
                }
        if (contamination_violations > 0)
            ok = false;
        d << "tau_p=K/2 above tau_p=K on " << contamination_violations << " of " << aps.size() * tx.size() * draws
          << " matched draws";
        r.residual = contamination_violations;
        r.passed = ok;
        r.detail = d.str();
        return r;
    });
}

/// Every check in criterion order.
inline std::vector<CheckResult> run_all_checks(const ValidationSettings &vs,
                                               const std::function<void(const CheckResult &)> &on_result = {})
{
    std::vector<CheckResult> out;
    auto add = [&](CheckResult r) {
        if (on_result)
            on_result(r);
        out.push_back(std::move(r));
    };
    add(check_rate_closed_form(vs));
    add(check_crlb_fim(vs));
    add(check_covariance(vs));
    add(check_echo_derivative(vs));
    add(check_surrogate(vs));
    add(check_sca(vs));
    add(check_solver(vs));
    add(check_trends(vs));
    return out;
}

} // namespace cfisac
