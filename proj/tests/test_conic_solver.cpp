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


#include "cfisac/conic_solver.hpp"

#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

using namespace cfisac;
using Catch::Approx;
using E = AffineExpr;

namespace
{

// Brute-force minimum of c^T x over a 2-D grid, constrained by `feasible`.
template <class F>
std::pair<double, Eigen::Vector2d> grid_minimum(const Eigen::Vector2d &c, double lo0, double hi0, double lo1,
                                                double hi1, double step, F feasible)
{
    double best = std::numeric_limits<double>::infinity();
    Eigen::Vector2d arg(0, 0);
    const int n0 = int(std::lround((hi0 - lo0) / step));
    const int n1 = int(std::lround((hi1 - lo1) / step));
    for (int i = 0; i <= n0; ++i)
    {
        const double x0 = lo0 + i * step;
        for (int j = 0; j <= n1; ++j)
        {
            const double x1 = lo1 + j * step;
            const double v = c[0] * x0 + c[1] * x1;
            if (v < best && feasible(x0, x1))
            {
                best = v;
                arg = {x0, x1};
            }
        }
    }
    return {best, arg};
}

} // namespace

TEST_CASE("linear lower bound")
{
    ConicProgram p;
    const int x = p.add_variable();
    p.set_objective(E::var(x));
    p.add_inequality(E(1.0) - E::var(x));
    const auto r = solve(p);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.x[x] == Approx(1.0).margin(1e-8));
    CHECK(r.kkt.primal <= 1e-8);
    CHECK(r.kkt.dual <= 1e-8);
    CHECK(r.kkt.gap <= 1e-8);
}

TEST_CASE("second-order cone with constant vector")
{
    ConicProgram p;
    const int t = p.add_variable();
    p.set_objective(E::var(t));
    p.add_soc({E(3.0), E(4.0)}, E::var(t));
    const auto r = solve(p);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.x[t] == Approx(5.0).margin(1e-7));
}

TEST_CASE("small LP with equality")
{
    // min -x - 2y s.t. x + y = 1, x, y >= 0 -> (0, 1)
    ConicProgram p;
    const int x = p.add_variable(0.0);
    const int y = p.add_variable(0.0);
    p.set_objective(-E::var(x) - 2.0 * E::var(y));
    p.add_equality(E::var(x) + E::var(y) - 1.0);
    const auto r = solve(p);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.x[x] == Approx(0.0).margin(1e-7));
    CHECK(r.x[y] == Approx(1.0).margin(1e-7));
    CHECK(r.objective_value == Approx(-2.0).margin(1e-7));
}

TEST_CASE("nearest point on the unit disk")
{
    // min t s.t. ||(x - 3, y - 4)|| <= t, ||(x, y)|| <= 1 -> distance 4
    ConicProgram p;
    const int x = p.add_variable(), y = p.add_variable(), t = p.add_variable();
    p.set_objective(E::var(t));
    p.add_soc({E::var(x) - 3.0, E::var(y) - 4.0}, E::var(t));
    p.add_soc({E::var(x), E::var(y)}, E(1.0));
    const auto r = solve(p);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.x[t] == Approx(4.0).margin(1e-7));
    CHECK(r.x[x] == Approx(0.6).margin(1e-6));
    CHECK(r.x[y] == Approx(0.8).margin(1e-6));
}

TEST_CASE("infeasible and unbounded programs are certified")
{
    ConicProgram inf;
    const int x = inf.add_variable();
    inf.set_objective(E::var(x));
    inf.add_inequality(E::var(x) - 1.0);
    inf.add_inequality(E(2.0) - E::var(x));
    CHECK(solve(inf).status == SolveStatus::infeasible);

    ConicProgram unb;
    const int a = unb.add_variable(), b = unb.add_variable();
    unb.set_objective(-E::var(a));
    unb.add_soc({E::var(b)}, E::var(a));
    CHECK(solve(unb).status == SolveStatus::unbounded);

    ConicProgram soc_inf;
    const int u = soc_inf.add_variable(), v = soc_inf.add_variable();
    soc_inf.set_objective(E::var(u));
    soc_inf.add_soc({E::var(u), E::var(v)}, E(1.0));
    soc_inf.add_inequality(E(2.0) - E::var(u));
    CHECK(solve(soc_inf).status == SolveStatus::infeasible);
}

TEST_CASE("presolve fixes singleton equalities and drops empty rows")
{
    ConicProgram p;
    const int x = p.add_variable(), y = p.add_variable();
    p.set_objective(E::var(x) + E::var(y));
    p.add_equality(2.0 * E::var(x) - 3.0);
    p.add_inequality(E(1.0) - E::var(y));
    p.add_inequality(E::var(x) - E::var(x) - 1.0);
    const auto r = solve(p);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.x[x] == Approx(1.5).margin(1e-12));
    CHECK(r.x[y] == Approx(1.0).margin(1e-7));
}

TEST_CASE("rotated cone: square bounded by a line")
{
    // min -gamma s.t. omega^2 <= gamma, gamma <= 2 omega - 0.25
    ConicProgram p;
    const int w = p.add_variable(), g = p.add_variable();
    p.set_objective(-E::var(g));
    p.add_soc({E::var(w), (E::var(g) - 1.0) * 0.5}, (E::var(g) + 1.0) * 0.5);
    p.add_inequality(E::var(g) - 2.0 * E::var(w) + 0.25);
    const auto r = solve(p);
    REQUIRE(r.status == SolveStatus::optimal);

    const auto [best, arg] = grid_minimum(Eigen::Vector2d(0.0, -1.0), -1.0, 3.0, -1.0, 5.0, 1e-3,
                                          [](double om, double ga) { return om * om <= ga && ga <= 2 * om - 0.25; });
    CHECK(r.objective_value <= best + 1e-7);
    CHECK(best - r.objective_value <= 5e-3);
    CHECK(std::abs(r.x[w] - arg[0]) <= 5e-3);
    // Analytic optimum of this literal instance.
    CHECK(r.x[w] == Approx(1.0 + std::sqrt(0.75)).margin(1e-6));
    CHECK(r.x[g] == Approx(2.0 * (1.0 + std::sqrt(0.75)) - 0.25).margin(1e-6));
}

TEST_CASE("tangent upper bound pins the square to the expansion point")
{
    // omega^2 <= gamma <= 2*w0*omega - w0^2 with w0 = 0.5 admits only (0.5, 0.25).
    // With no interior point the iteration stalls short of 1e-8 but must land
    // on the single feasible point.
    ConicProgram p;
    const int w = p.add_variable(), g = p.add_variable();
    p.set_objective(-E::var(g));
    p.add_rotated_soc({E::var(w)}, E::var(g), E(1.0));
    p.add_inequality(E::var(g) - 1.0 * E::var(w) + 0.25);
    const auto r = solve(p);
    CHECK(r.status != SolveStatus::infeasible);
    CHECK(r.status != SolveStatus::unbounded);
    CHECK(r.x[w] == Approx(0.5).margin(1e-3));
    CHECK(r.x[g] == Approx(0.25).margin(1e-3));
}

TEST_CASE("randomized two-variable instances match a 1e-3 grid")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int inst = 0; inst < 20; ++inst)
    {
        // A strictly feasible anchor point makes every instance feasible.
        const Eigen::Vector2d x0(0.8 * U(rng), 0.8 * U(rng));
        Eigen::Matrix2d P;
        P << U(rng), U(rng), U(rng), U(rng);
        const Eigen::Vector2d q(U(rng), U(rng)), r(0.3 * U(rng), 0.3 * U(rng)), a(U(rng), U(rng));
        const double d = (P * x0 + q).norm() - r.dot(x0) + 0.3 + 0.5 * (U(rng) + 1.0);
        const double e = a.dot(x0) + 0.2 + 0.5 * (U(rng) + 1.0);
        const Eigen::Vector2d c(U(rng), U(rng));

        ConicProgram p;
        const int v0 = p.add_variable(), v1 = p.add_variable();
        auto X = [&](int i) { return E::var(i == 0 ? v0 : v1); };
        p.set_objective(c[0] * X(0) + c[1] * X(1));
        p.add_soc({P(0, 0) * X(0) + P(0, 1) * X(1) + q[0], P(1, 0) * X(0) + P(1, 1) * X(1) + q[1]},
                  r[0] * X(0) + r[1] * X(1) + d);
        p.add_inequality(a[0] * X(0) + a[1] * X(1) - e);
        for (int i = 0; i < 2; ++i)
        {
            p.add_inequality(X(i) - 2.0);
            p.add_inequality(-X(i) - 2.0);
        }
        const auto res = solve(p);
        REQUIRE(res.status == SolveStatus::optimal);
        CHECK(p.max_violation(res.x) <= 1e-7);

        const auto [best, arg] = grid_minimum(c, -2.0, 2.0, -2.0, 2.0, 1e-3, [&](double u, double w) {
            const Eigen::Vector2d x(u, w);
            return (P * x + q).norm() <= r.dot(x) + d && a.dot(x) <= e;
        });
        INFO("instance " << inst);
        CHECK(res.objective_value <= best + 1e-7);
        CHECK(best - res.objective_value <= 2e-3 * c.norm() * 2.0);
    }
}

TEST_CASE("quadratic epigraph")
{
    SECTION("x^2 <= s membership")
    {
        ConicProgram p;
        const int x = p.add_variable(), s = p.add_variable();
        quadratic_epigraph(p, RealMatrix::Identity(1, 1), {E::var(x)}, RealVector::Zero(1), E::var(s));
        RealVector pt(2);
        pt << 2.0, 4.0;
        CHECK(p.max_violation(pt) <= 1e-12);
        pt << 2.0, 3.9;
        CHECK(p.max_violation(pt) > 0.0);
    }
    SECTION("zero form emits no cone rows")
    {
        ConicProgram p;
        const int x = p.add_variable(), s = p.add_variable();
        quadratic_epigraph(p, RealMatrix::Zero(2, 2), {E::var(x), E::var(s)}, RealVector::Zero(2), E::var(s));
        CHECK(p.socs().empty());
    }
    SECTION("indefinite form is rejected")
    {
        ConicProgram p;
        const int x = p.add_variable(), y = p.add_variable(), s = p.add_variable();
        RealMatrix Q(2, 2);
        Q << 1, 0, 0, -1;
        CHECK_THROWS_AS(quadratic_epigraph(p, Q, {E::var(x), E::var(y)}, RealVector::Zero(2), E::var(s)),
                        std::invalid_argument);
    }
    SECTION("random PSD form minimum matches the dense solution")
    {
        std::mt19937_64 rng(11);
        std::normal_distribution<double> N(0.0, 1.0);
        for (int rep = 0; rep < 5; ++rep)
        {
            RealMatrix F(3, 3);
            for (int i = 0; i < 9; ++i)
                F(i / 3, i % 3) = N(rng);
            const RealMatrix Q = F.transpose() * F + 0.1 * RealMatrix::Identity(3, 3);
            RealVector g(3);
            g << N(rng), N(rng), N(rng);
            // min x^T Q x + g^T x has value -g^T Q^{-1} g / 4.
            const double exact = -0.25 * g.dot(Q.ldlt().solve(g));

            ConicProgram p;
            const int x0 = p.add_variables(3);
            const int s = p.add_variable();
            p.set_objective(E::var(s));
            quadratic_epigraph(p, Q, {E::var(x0), E::var(x0 + 1), E::var(x0 + 2)}, g, E::var(s));
            const auto r = solve(p);
            REQUIRE(r.status == SolveStatus::optimal);
            CHECK(r.objective_value == Approx(exact).margin(1e-6));
        }
    }
}

TEST_CASE("scaling the data leaves the argmin unchanged")
{
    auto build = [](double k) {
        ConicProgram p;
        const int x = p.add_variable(), y = p.add_variable(), t = p.add_variable();
        p.set_objective(k * (E::var(t) + 0.3 * E::var(x)));
        p.add_soc({k * (E::var(x) - 1.0), k * (E::var(y) + 2.0)}, k * E::var(t));
        p.add_inequality(k * (E::var(x) + E::var(y) - 0.5));
        p.add_inequality(k * (-E::var(y) - 1.5));
        return p;
    };
    const auto a = solve(build(1.0));
    const auto b = solve(build(1e3));
    REQUIRE(a.status == SolveStatus::optimal);
    REQUIRE(b.status == SolveStatus::optimal);
    CHECK((a.x - b.x).norm() <= 1e-6 * std::max(1.0, a.x.norm()));
}

TEST_CASE("Nesterov-Todd scaling maps s and z to the same point")
{
    detail::ConeOps ops{1, {3, 4}};
    RealVector s(8), z(8);
    s << 0.7, 2.0, 0.3, -1.1, 1.5, 0.2, 0.4, -0.9;
    z << 1.3, 1.1, -0.5, 0.2, 2.0, -0.3, 1.0, 0.5;
    detail::NtScaling W;
    W.compute(ops, s, z);
    CHECK((W.apply(z) - W.apply_inverse(s)).norm() <= 1e-12);
    CHECK((W.apply(W.apply_inverse(s)) - s).norm() <= 1e-12);
}

TEST_CASE("program text dump lists every row")
{
    ConicProgram p;
    const int x = p.add_variable(0.0);
    p.set_objective(E::var(x));
    p.add_soc({E::var(x)}, E(1.0));
    std::ostringstream os;
    p.write_text(os);
    const std::string txt = os.str();
    CHECK(txt.find("variables 1") != std::string::npos);
    CHECK(txt.find("le 0 0:-1") != std::string::npos);
    CHECK(txt.find("soc 2") != std::string::npos);
}
