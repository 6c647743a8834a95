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
#include <cstdio>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cfisac
{

/// Sparse affine function of the program variables: sum coef * x[var] + constant.
struct AffineExpr
{
    std::vector<std::pair<int, double>> terms;
    double constant = 0.0;

    AffineExpr() = default;
    AffineExpr(double c) : constant(c) {}

    static AffineExpr var(int index, double coef = 1.0)
    {
        AffineExpr e;
        e.terms.emplace_back(index, coef);
        return e;
    }

    AffineExpr &operator+=(const AffineExpr &o)
    {
        terms.insert(terms.end(), o.terms.begin(), o.terms.end());
        constant += o.constant;
        return *this;
    }
    AffineExpr &operator-=(const AffineExpr &o)
    {
        for (const auto &[i, a] : o.terms)
            terms.emplace_back(i, -a);
        constant -= o.constant;
        return *this;
    }
    AffineExpr &operator*=(double s)
    {
        for (auto &t : terms)
            t.second *= s;
        constant *= s;
        return *this;
    }

    friend AffineExpr operator+(AffineExpr a, const AffineExpr &b) { return a += b; }
    friend AffineExpr operator-(AffineExpr a, const AffineExpr &b) { return a -= b; }
    friend AffineExpr operator-(AffineExpr a) { return a *= -1.0; }
    friend AffineExpr operator*(AffineExpr a, double s) { return a *= s; }
    friend AffineExpr operator*(double s, AffineExpr a) { return a *= s; }

    /// Merges duplicate indices and drops zero coefficients.
    AffineExpr compact() const
    {
        std::map<int, double> acc;
        for (const auto &[i, a] : terms)
            acc[i] += a;
        AffineExpr e(constant);
        for (const auto &[i, a] : acc)
            if (a != 0.0)
                e.terms.emplace_back(i, a);
        return e;
    }

    double evaluate(const RealVector &x) const
    {
        double v = constant;
        for (const auto &[i, a] : terms)
            v += a * x[i];
        return v;
    }
};

/// Minimize objective(x) subject to equality rows (expr == 0), inequality
/// rows (expr <= 0) and second-order cones ||u(x)|| <= t(x).
class ConicProgram
{
  public:
    struct SocBlock
    {
        std::vector<AffineExpr> u;
        AffineExpr t;
    };

    int add_variable(std::optional<double> lower = std::nullopt)
    {
        const int i = n_++;
        if (lower)
            add_lower_bound(i, *lower);
        return i;
    }

    int add_variables(int count, std::optional<double> lower = std::nullopt)
    {
        const int first = n_;
        for (int i = 0; i < count; ++i)
            add_variable(lower);
        return first;
    }

    int variable_count() const { return n_; }

    void set_objective(const AffineExpr &e) { objective_ = e.compact(); }
    void add_equality(const AffineExpr &e) { eq_.push_back(e.compact()); }
    void add_inequality(const AffineExpr &e) { le_.push_back(e.compact()); }
    void add_lower_bound(int var, double lb) { add_inequality(AffineExpr(lb) - AffineExpr::var(var)); }

    void add_soc(const std::vector<AffineExpr> &u, const AffineExpr &t)
    {
        if (u.empty())
        {
            add_inequality(-t);
            return;
        }
        SocBlock blk;
        for (const auto &e : u)
            blk.u.push_back(e.compact());
        blk.t = t.compact();
        soc_.push_back(std::move(blk));
    }

    /// ||u||^2 <= a * b with a, b >= 0.
    void add_rotated_soc(const std::vector<AffineExpr> &u, const AffineExpr &a, const AffineExpr &b)
    {
        std::vector<AffineExpr> w;
        for (const auto &e : u)
            w.push_back(2.0 * e);
        w.push_back(a - b);
        add_soc(w, a + b);
    }

    /// sum of terms^2 <= bound.
    void add_sum_of_squares_epigraph(const std::vector<AffineExpr> &terms, const AffineExpr &bound)
    {
        if (terms.empty())
        {
            add_inequality(-bound);
            return;
        }
        add_rotated_soc(terms, bound, AffineExpr(1.0));
    }

    const AffineExpr &objective() const { return objective_; }
    const std::vector<AffineExpr> &equalities() const { return eq_; }
    const std::vector<AffineExpr> &inequalities() const { return le_; }
    const std::vector<SocBlock> &socs() const { return soc_; }

    int soc_row_count() const
    {
        int m = 0;
        for (const auto &b : soc_)
            m += 1 + int(b.u.size());
        return m;
    }

    /// Largest constraint violation of x (0 when feasible).
    double max_violation(const RealVector &x) const
    {
        double v = 0.0;
        for (const auto &e : eq_)
            v = std::max(v, std::abs(e.evaluate(x)));
        for (const auto &e : le_)
            v = std::max(v, e.evaluate(x));
        for (const auto &b : soc_)
        {
            double s = 0.0;
            for (const auto &e : b.u)
                s += std::pow(e.evaluate(x), 2);
            v = std::max(v, std::sqrt(s) - b.t.evaluate(x));
        }
        return v;
    }

    /// Plain-text dump, one constraint per line:
    ///   variables <n>
    ///   objective <constant> <i>:<coef> ...
    ///   eq <constant> <i>:<coef> ...        (expression == 0)
    ///   le <constant> <i>:<coef> ...        (expression <= 0)
    ///   soc <rows>                           followed by the t row, then u rows,
    ///     row <constant> <i>:<coef> ...     each as "row"
    void write_text(std::ostream &out) const
    {
        auto row = [&](const char *tag, const AffineExpr &e) {
            out << tag << ' ' << fmt(e.constant);
            for (const auto &[i, a] : e.terms)
                out << ' ' << i << ':' << fmt(a);
            out << '\n';
        };
        out << "variables " << n_ << '\n';
        row("objective", objective_);
        for (const auto &e : eq_)
            row("eq", e);
        for (const auto &e : le_)
            row("le", e);
        for (const auto &b : soc_)
        {
            out << "soc " << 1 + b.u.size() << '\n';
            row("  row", b.t);
            for (const auto &e : b.u)
                row("  row", e);
        }
    }

  private:
    static std::string fmt(double v)
    {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }

    int n_ = 0;
    AffineExpr objective_;
    std::vector<AffineExpr> eq_;
    std::vector<AffineExpr> le_;
    std::vector<SocBlock> soc_;
};

/// Adds rows enforcing x^T Q x + linear^T x <= bound for PSD Q. A zero Q
/// becomes a single linear inequality.
inline void quadratic_epigraph(ConicProgram &prog, const RealMatrix &Q, const std::vector<AffineExpr> &x,
                               const RealVector &linear, const AffineExpr &bound)
{
    const int m = int(x.size());
    if (Q.rows() != m || Q.cols() != m || linear.size() != m)
        throw std::invalid_argument("quadratic_epigraph: dimension mismatch");
    AffineExpr slack = bound;
    for (int i = 0; i < m; ++i)
        slack -= linear[i] * x[i];
    const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(0.5 * (Q + Q.transpose()));
    if (m > 0 && es.eigenvalues().minCoeff() < -1e-10 * scale)
        throw std::invalid_argument("quadratic_epigraph: quadratic form is not positive semidefinite (eigenvalue " +
                                    std::to_string(es.eigenvalues().minCoeff()) + ")");
    std::vector<AffineExpr> factors;
    for (int j = 0; j < m; ++j)
    {
        const double lam = es.eigenvalues()[j];
        if (lam <= 1e-14 * scale)
            continue;
        AffineExpr f;
        for (int i = 0; i < m; ++i)
            f += std::sqrt(lam) * es.eigenvectors()(i, j) * x[i];
        factors.push_back(f);
    }
    if (factors.empty())
        prog.add_inequality(-slack);
    else
        prog.add_sum_of_squares_epigraph(factors, slack);
}

enum class SolveStatus
{
    optimal,
    infeasible,
    unbounded,
    max_iter
};

inline const char *to_string(SolveStatus s)
{
    switch (s)
    {
    case SolveStatus::optimal:
        return "optimal";
    case SolveStatus::infeasible:
        return "infeasible";
    case SolveStatus::unbounded:
        return "unbounded";
    case SolveStatus::max_iter:
        return "max_iter";
    }
    return "?";
}

struct KktResiduals
{
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
};

struct SolveResult
{
    SolveStatus status = SolveStatus::max_iter;
    RealVector x;
    double objective_value = 0.0;
    KktResiduals kkt;
    int iterations = 0;
};

struct SolverOptions
{
    double tol = 1e-8;
    int max_iter = 200;
    bool presolve = true;
    bool verbose = false; // per-iteration log on stderr
};

namespace detail
{

/// Dense standard form: min c^T x  s.t.  A x = b,  G x + s = h,  s in K, with
/// K = R_+^lp x SOC(dims[0]) x ...
struct StandardForm
{
    RealVector c;
    RealMatrix A;
    RealVector b;
    RealMatrix G;
    RealVector h;
    int lp = 0;
    std::vector<int> soc;

    int m() const { return int(G.rows()); }
    int degree() const { return lp + int(soc.size()); }
};

struct ConeOps
{
    int lp;
    std::vector<int> soc;

    template <class F> void for_soc(F f) const
    {
        int off = lp;
        for (int d : soc)
        {
            f(off, d);
            off += d;
        }
    }

    RealVector identity(int m) const
    {
        RealVector e = RealVector::Zero(m);
        e.head(lp).setOnes();
        for_soc([&](int off, int) { e[off] = 1.0; });
        return e;
    }

    RealVector product(const RealVector &u, const RealVector &v) const
    {
        RealVector w(u.size());
        w.head(lp) = u.head(lp).cwiseProduct(v.head(lp));
        for_soc([&](int off, int d) {
            w[off] = u.segment(off, d).dot(v.segment(off, d));
            w.segment(off + 1, d - 1) = u[off] * v.segment(off + 1, d - 1) + v[off] * u.segment(off + 1, d - 1);
        });
        return w;
    }

    /// Solves lambda o u = r for u.
    RealVector divide(const RealVector &lambda, const RealVector &r) const
    {
        RealVector u(r.size());
        u.head(lp) = r.head(lp).cwiseQuotient(lambda.head(lp));
        for_soc([&](int off, int d) {
            const double l0 = lambda[off];
            const auto l1 = lambda.segment(off + 1, d - 1);
            const double det = l0 * l0 - l1.squaredNorm();
            const double u0 = (l0 * r[off] - l1.dot(r.segment(off + 1, d - 1))) / det;
            u[off] = u0;
            u.segment(off + 1, d - 1) = (r.segment(off + 1, d - 1) - u0 * l1) / l0;
        });
        return u;
    }

    /// Largest alpha in [0, cap] keeping x + alpha*dx in the cone.
    double max_step(const RealVector &x, const RealVector &dx, double cap) const
    {
        double a = cap;
        for (int i = 0; i < lp; ++i)
            if (dx[i] < 0.0)
                a = std::min(a, -x[i] / dx[i]);
        for_soc([&](int off, int d) {
            const double x0 = x[off], d0 = dx[off];
            const auto x1 = x.segment(off + 1, d - 1);
            const auto d1 = dx.segment(off + 1, d - 1);
            const double qa = d0 * d0 - d1.squaredNorm();
            const double qb = 2.0 * (x0 * d0 - x1.dot(d1));
            const double qc = std::max(0.0, x0 * x0 - x1.squaredNorm());
            a = std::min(a, smallest_positive_root(qa, qb, qc));
            if (d0 < 0.0)
                a = std::min(a, -x0 / d0);
        });
        return std::max(a, 0.0);
    }

    static double smallest_positive_root(double a, double b, double c)
    {
        const double inf = std::numeric_limits<double>::infinity();
        if (a == 0.0)
            return b < 0.0 ? -c / b : inf;
        const double disc = b * b - 4.0 * a * c;
        if (disc < 0.0)
            return inf;
        const double sq = std::sqrt(disc);
        const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
        double r1 = q / a;
        double r2 = q != 0.0 ? c / q : inf;
        double best = inf;
        for (double r : {r1, r2})
            if (r > 0.0)
                best = std::min(best, r);
        return best;
    }

    /// Smallest t such that x + t*e is in the closed cone.
    double boundary_shift(const RealVector &x) const
    {
        double t = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < lp; ++i)
            t = std::max(t, -x[i]);
        for_soc([&](int off, int d) { t = std::max(t, x.segment(off + 1, d - 1).norm() - x[off]); });
        return t;
    }
};

/// Nesterov-Todd scaling W (symmetric) with W z = W^{-1} s = lambda.
struct NtScaling
{
    const ConeOps *ops = nullptr;
    RealVector lp_d; // W = diag(lp_d) on the LP part
    std::vector<double> beta;
    std::vector<RealVector> v;
    RealVector lambda;

    void compute(const ConeOps &o, const RealVector &s, const RealVector &z)
    {
        ops = &o;
        lp_d = (s.head(o.lp).array() / z.head(o.lp).array()).sqrt();
        beta.clear();
        v.clear();
        o.for_soc([&](int off, int d) {
            const auto s_ = s.segment(off, d);
            const auto z_ = z.segment(off, d);
            const double sn = s_.tail(d - 1).norm(), zn = z_.tail(d - 1).norm();
            const double sjs = (s_[0] - sn) * (s_[0] + sn);
            const double zjz = (z_[0] - zn) * (z_[0] + zn);
            const RealVector sb = s_ / std::sqrt(sjs);
            const RealVector zb = z_ / std::sqrt(zjz);
            const double g = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
            RealVector w(d);
            w[0] = (sb[0] + zb[0]) / (2.0 * g);
            w.tail(d - 1) = (sb.tail(d - 1) - zb.tail(d - 1)) / (2.0 * g);
            RealVector vv = w;
            vv[0] += 1.0;
            vv /= std::sqrt(2.0 * (w[0] + 1.0));
            beta.push_back(std::pow(sjs / zjz, 0.25));
            v.push_back(std::move(vv));
        });
        lambda = apply(z);
    }

    /// W x (inverse = false) or W^{-1} x, applied to each column of x.
    template <class Mat> void apply_inplace(Mat &x, bool inverse) const
    {
        for (int i = 0; i < ops->lp; ++i)
            x.row(i) *= inverse ? 1.0 / lp_d[i] : lp_d[i];
        int blk = 0;
        ops->for_soc([&](int off, int d) {
            auto X = x.middleRows(off, d);
            const double bt = inverse ? 1.0 / beta[blk] : beta[blk];
            RealVector u = v[blk];
            if (inverse)
                u.tail(d - 1) *= -1.0; // J v
            // W = beta (2 v v^T - J);  W^{-1} = (1/beta)(2 Jv (Jv)^T - J)
            const Eigen::RowVectorXd proj = u.transpose() * X;
            X.row(0) *= -1.0; // -J x
            X.noalias() += 2.0 * u * proj;
            X *= bt;
            ++blk;
        });
    }

    RealVector apply(const RealVector &x) const
    {
        RealVector y = x;
        apply_inplace(y, false);
        return y;
    }
    RealVector apply_inverse(const RealVector &x) const
    {
        RealVector y = x;
        apply_inplace(y, true);
        return y;
    }
};

/// Solves [[0, A^T, G^T], [A, 0, 0], [G, 0, -W^2]] (x; y; z) = (r1; r2; r3).
class KktSolver
{
  public:
    KktSolver(const StandardForm &sf, const NtScaling &w) : sf_(sf), w_(w)
    {
        const int n = int(sf.c.size());
        const int p = int(sf.A.rows());
        M_ = sf.G;
        w.apply_inplace(M_, true);
        K_ = RealMatrix::Zero(n + p, n + p);
        K_.topLeftCorner(n, n).noalias() = M_.transpose() * M_;
        K_.topRightCorner(n, p) = sf.A.transpose();
        K_.bottomLeftCorner(p, n) = sf.A;

        // Symmetric diagonal equilibration: unit diagonal on the H block,
        // unit row norms on the A block.
        D_.resize(n + p);
        for (int i = 0; i < n; ++i)
            D_[i] = 1.0 / std::sqrt(std::max(K_(i, i), 1e-300));
        for (int i = 0; i < p; ++i)
        {
            const double rn = (sf.A.row(i).transpose().array() * D_.head(n).array()).matrix().norm();
            D_[n + i] = rn > 0.0 ? 1.0 / rn : 1.0;
        }
        RealMatrix Ks = D_.asDiagonal() * K_ * D_.asDiagonal();
        if (p == 0)
        {
            for (double reg = 0.0; reg < 1.0; reg = reg == 0.0 ? 1e-14 : reg * 100.0)
            {
                RealMatrix H = Ks;
                H.diagonal().array() += reg;
                llt_.compute(H);
                if (llt_.info() == Eigen::Success)
                {
                    use_llt_ = true;
                    break;
                }
            }
        }
        if (!use_llt_)
        {
            Ks.diagonal().head(n).array() += 1e-13;
            Ks.diagonal().tail(p).array() -= 1e-13;
            lu_.compute(Ks);
        }
    }

    /// Solution with iterative refinement against the full (unreduced) system.
    void solve(const RealVector &r1, const RealVector &r2, const RealVector &r3, RealVector &x, RealVector &y,
               RealVector &z) const
    {
        solve_reduced(r1, r2, r3, x, y, z);
        const double scale = 1.0 + std::max({r1.norm(), r2.norm(), r3.norm()});
        double last = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 8; ++it)
        {
            const RealVector e1 = r1 - sf_.A.transpose() * y - sf_.G.transpose() * z;
            const RealVector e2 = r2 - sf_.A * x;
            const RealVector e3 = r3 - sf_.G * x + w_.apply(w_.apply(z));
            const double err = std::max({e1.norm(), e2.norm(), e3.norm()});
            if (err <= 1e-15 * scale || err >= 0.5 * last)
                break;
            last = err;
            RealVector dx, dy, dz;
            solve_reduced(e1, e2, e3, dx, dy, dz);
            x += dx;
            y += dy;
            z += dz;
        }
    }

  private:
    void solve_reduced(const RealVector &r1, const RealVector &r2, const RealVector &r3, RealVector &x,
                       RealVector &y, RealVector &z) const
    {
        const int n = int(sf_.c.size());
        const int p = int(sf_.A.rows());
        const RealVector w3 = w_.apply_inverse(r3);
        RealVector rhs(n + p);
        rhs.head(n) = r1 + M_.transpose() * w3;
        rhs.tail(p) = r2;
        RealVector sol = factor_solve(rhs);
        for (int it = 0; it < 2; ++it)
            sol += factor_solve(rhs - K_ * sol);
        x = sol.head(n);
        y = sol.tail(p);
        z = w_.apply_inverse(M_ * x - w3);
    }

    RealVector factor_solve(const RealVector &rhs) const
    {
        const RealVector r = D_.cwiseProduct(rhs);
        return D_.cwiseProduct(use_llt_ ? RealVector(llt_.solve(r)) : RealVector(lu_.solve(r)));
    }

    const StandardForm &sf_;
    const NtScaling &w_;
    RealMatrix M_;
    RealMatrix K_;
    RealVector D_;
    bool use_llt_ = false;
    Eigen::LLT<RealMatrix> llt_;
    Eigen::PartialPivLU<RealMatrix> lu_;
};

struct HsdResult
{
    SolveStatus status = SolveStatus::max_iter;
    RealVector x;
    KktResiduals kkt;
    int iterations = 0;
};

/// Homogeneous self-dual interior-point method with Mehrotra correction.
inline HsdResult solve_standard(const StandardForm &sf, const SolverOptions &opt)
{
    const int n = int(sf.c.size());
    const int p = int(sf.A.rows());
    const int m = sf.m();
    const ConeOps ops{sf.lp, sf.soc};
    const RealVector e = ops.identity(m);
    const double deg = sf.degree();

    const double resx0 = std::max(1.0, sf.c.norm());
    const double resy0 = std::max(1.0, sf.b.norm());
    const double resz0 = std::max(1.0, sf.h.norm());

    RealVector x(n), y(p), z(m), s(m);
    double tau = 1.0, kappa = 1.0;
    {
        NtScaling id;
        id.compute(ops, e, e);
        KktSolver kkt(sf, id);
        RealVector zz;
        kkt.solve(RealVector::Zero(n), sf.b, sf.h, x, y, zz);
        s = -zz;
        RealVector xd, yd;
        kkt.solve(-sf.c, RealVector::Zero(p), RealVector::Zero(m), xd, yd, z);
        y = yd;
        const double ts = ops.boundary_shift(s);
        if (ts >= -1e-8)
            s += (1.0 + ts) * e;
        const double tz = ops.boundary_shift(z);
        if (tz >= -1e-8)
            z += (1.0 + tz) * e;
    }

    HsdResult out;
    HsdResult best;
    double best_merit = std::numeric_limits<double>::infinity();
    for (int it = 0; it <= opt.max_iter; ++it)
    {
        out.iterations = it;
        const RealVector rx = sf.A.transpose() * y + sf.G.transpose() * z + sf.c * tau;
        const RealVector ry = sf.A * x - sf.b * tau;
        const RealVector rz = sf.G * x + s - sf.h * tau;
        const double cx = sf.c.dot(x), by = sf.b.dot(y), hz = sf.h.dot(z);
        const double rt = kappa + cx + by + hz;

        const double pcost = cx / tau;
        const double dcost = -(by + hz) / tau;
        const double gap = s.dot(z) / (tau * tau);
        out.kkt.primal = std::max(ry.norm() / tau / resy0, rz.norm() / tau / resz0);
        out.kkt.dual = rx.norm() / tau / resx0;
        out.kkt.gap = gap / std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));
        out.x = x / tau;
        const double merit = std::max({out.kkt.primal, out.kkt.dual, out.kkt.gap});
        if (opt.verbose)
            std::fprintf(stderr, "%3d  pcost %+.9e  dcost %+.9e  pres %.2e  dres %.2e  gap %.2e  tau %.2e  kappa %.2e\n",
                         it, pcost, dcost, out.kkt.primal, out.kkt.dual, out.kkt.gap, tau, kappa);
        if (!std::isfinite(merit) || !out.x.allFinite())
            break;
        if (merit < best_merit)
        {
            best_merit = merit;
            best = out;
        }

        if (out.kkt.primal <= opt.tol && out.kkt.dual <= opt.tol && out.kkt.gap <= opt.tol)
        {
            out.status = SolveStatus::optimal;
            return out;
        }
        if (by + hz < 0.0)
        {
            const double pinf = (sf.A.transpose() * y + sf.G.transpose() * z).norm() / resx0 / -(by + hz);
            if (pinf <= opt.tol)
            {
                out.status = SolveStatus::infeasible;
                return out;
            }
        }
        if (cx < 0.0)
        {
            const double dinf =
                std::max((sf.A * x).norm() / resy0, (sf.G * x + s).norm() / resz0) / -cx;
            if (dinf <= opt.tol)
            {
                out.status = SolveStatus::unbounded;
                out.x = x / -cx;
                return out;
            }
        }
        if (it == opt.max_iter)
            break;

        NtScaling W;
        W.compute(ops, s, z);
        const RealVector &lam = W.lambda;
        const double mu = (s.dot(z) + tau * kappa) / (deg + 1.0);

        KktSolver kkt(sf, W);
        RealVector x1, y1, z1;
        kkt.solve(-sf.c, sf.b, sf.h, x1, y1, z1);
        const double den1 = sf.c.dot(x1) + sf.b.dot(y1) + sf.h.dot(z1) - kappa / tau;

        struct Dir
        {
            RealVector dx, dy, dz, ds, u;
            double dtau, dkappa;
        };
        auto direction = [&](double eta, const RealVector &rs, double rk) {
            Dir d;
            d.u = ops.divide(lam, rs);
            const RealVector Wu = W.apply(d.u);
            RealVector x0, y0, z0;
            kkt.solve(-eta * rx, -eta * ry, -eta * rz - Wu, x0, y0, z0);
            const double dt = -eta * rt;
            d.dtau = (dt - rk / tau - (sf.c.dot(x0) + sf.b.dot(y0) + sf.h.dot(z0))) / den1;
            d.dx = x0 + d.dtau * x1;
            d.dy = y0 + d.dtau * y1;
            d.dz = z0 + d.dtau * z1;
            d.ds = W.apply(d.u - W.apply(d.dz));
            d.dkappa = (rk - kappa * d.dtau) / tau;
            return d;
        };
        auto step_length = [&](const Dir &d) {
            double a = ops.max_step(s, d.ds, 1e300);
            a = std::min(a, ops.max_step(z, d.dz, 1e300));
            if (d.dtau < 0.0)
                a = std::min(a, -tau / d.dtau);
            if (d.dkappa < 0.0)
                a = std::min(a, -kappa / d.dkappa);
            return a;
        };

        const RealVector ll = ops.product(lam, lam);
        const Dir aff = direction(1.0, -ll, -tau * kappa);
        const double a_aff = std::min(1.0, step_length(aff));
        const double sigma = std::pow(1.0 - a_aff, 3);

        const RealVector ds_scaled = aff.u - W.apply(aff.dz); // W^{-1} ds
        const RealVector dz_scaled = W.apply(aff.dz);
        const RealVector rs = -ll - ops.product(ds_scaled, dz_scaled) + sigma * mu * e;
        const double rk = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
        const Dir d = direction(1.0 - sigma, rs, rk);
        const double a = std::min(1.0, 0.99 * step_length(d));
        if (!(a > 1e-14) || !std::isfinite(a) || !d.dx.allFinite() || !d.dz.allFinite() || !d.ds.allFinite() ||
            !std::isfinite(d.dtau) || !std::isfinite(d.dkappa))
            break;

        x += a * d.dx;
        y += a * d.dy;
        z += a * d.dz;
        s += a * d.ds;
        tau += a * d.dtau;
        kappa += a * d.dkappa;
    }
    if (!std::isfinite(best_merit))
        best = out;
    best.status = SolveStatus::max_iter;
    best.iterations = out.iterations;
    return best;
}

} // namespace detail

/// Interior-point solve of a ConicProgram. Presolve removes variables fixed
/// by single-variable equalities, unused variables, and empty rows.
inline SolveResult solve(const ConicProgram &prog, const SolverOptions &opt = {})
{
    const int n_full = prog.variable_count();
    std::vector<std::optional<double>> fixed(n_full);

    std::vector<AffineExpr> eq = prog.equalities();
    std::vector<AffineExpr> le = prog.inequalities();
    std::vector<ConicProgram::SocBlock> soc = prog.socs();
    AffineExpr obj = prog.objective();

    SolveResult res;
    auto substitute = [&](AffineExpr &e) {
        AffineExpr o(e.constant);
        for (const auto &[i, a] : e.terms)
            if (fixed[i])
                o.constant += a * *fixed[i];
            else
                o.terms.emplace_back(i, a);
        e = std::move(o);
    };

    if (opt.presolve)
    {
        bool changed = true;
        while (changed)
        {
            changed = false;
            for (auto &r : eq)
                if (r.terms.size() == 1)
                {
                    const auto [i, a] = r.terms[0];
                    fixed[i] = -r.constant / a;
                    changed = true;
                    break;
                }
            if (changed)
            {
                for (auto &r : eq)
                    substitute(r);
                for (auto &r : le)
                    substitute(r);
            }
        }
        for (auto &b : soc)
        {
            substitute(b.t);
            for (auto &u : b.u)
                substitute(u);
        }
        substitute(obj);

        const double feas = 1e-12;
        std::vector<AffineExpr> eq2, le2;
        for (auto &r : eq)
        {
            if (!r.terms.empty())
                eq2.push_back(r);
            else if (std::abs(r.constant) > feas * std::max(1.0, std::abs(r.constant)) && std::abs(r.constant) > feas)
                res.status = SolveStatus::infeasible;
        }
        for (auto &r : le)
        {
            if (!r.terms.empty())
                le2.push_back(r);
            else if (r.constant > feas)
                res.status = SolveStatus::infeasible;
        }
        eq.swap(eq2);
        le.swap(le2);
        if (res.status == SolveStatus::infeasible)
        {
            res.x = RealVector::Zero(n_full);
            return res;
        }
    }

    // Compact the remaining variables.
    std::vector<char> used(n_full, 0);
    auto mark = [&](const AffineExpr &e) {
        for (const auto &[i, a] : e.terms)
            used[i] = 1;
    };
    for (const auto &r : eq)
        mark(r);
    for (const auto &r : le)
        mark(r);
    for (const auto &b : soc)
    {
        mark(b.t);
        for (const auto &u : b.u)
            mark(u);
    }
    std::vector<int> index(n_full, -1);
    int n = 0;
    for (int i = 0; i < n_full; ++i)
    {
        if (fixed[i])
            continue;
        if (used[i] || !opt.presolve)
        {
            index[i] = n++;
            continue;
        }
        // Appears only in the objective.
        fixed[i] = 0.0;
        for (const auto &[j, a] : obj.terms)
            if (j == i && a != 0.0)
            {
                res.status = SolveStatus::unbounded;
                res.x = RealVector::Zero(n_full);
                return res;
            }
    }

    detail::StandardForm sf;
    sf.c = RealVector::Zero(n);
    for (const auto &[i, a] : obj.terms)
        if (index[i] >= 0)
            sf.c[index[i]] += a;
    sf.A = RealMatrix::Zero(int(eq.size()), n);
    sf.b.resize(int(eq.size()));
    for (int r = 0; r < int(eq.size()); ++r)
    {
        for (const auto &[i, a] : eq[r].terms)
            sf.A(r, index[i]) += a;
        sf.b[r] = -eq[r].constant;
    }
    sf.lp = int(le.size());
    int m = sf.lp;
    for (const auto &b : soc)
    {
        sf.soc.push_back(1 + int(b.u.size()));
        m += sf.soc.back();
    }
    sf.G = RealMatrix::Zero(m, n);
    sf.h.resize(m);
    int row = 0;
    // Inequality e(x) <= 0 means a^T x + s = -constant, s >= 0.
    for (const auto &r : le)
    {
        for (const auto &[i, a] : r.terms)
            sf.G(row, index[i]) += a;
        sf.h[row] = -r.constant;
        ++row;
    }
    // Cone row value t(x) = g^T x + c becomes s = h - G x with G = -g, h = c.
    auto cone_row = [&](const AffineExpr &e) {
        for (const auto &[i, a] : e.terms)
            sf.G(row, index[i]) -= a;
        sf.h[row] = e.constant;
        ++row;
    };
    for (const auto &b : soc)
    {
        cone_row(b.t);
        for (const auto &u : b.u)
            cone_row(u);
    }

    RealVector x_full = RealVector::Zero(n_full);
    if (n == 0)
    {
        res.status = SolveStatus::optimal;
        for (int i = 0; i < n_full; ++i)
            if (fixed[i])
                x_full[i] = *fixed[i];
        res.x = x_full;
        if (prog.max_violation(x_full) > 1e-9)
            res.status = SolveStatus::infeasible;
        res.objective_value = prog.objective().evaluate(x_full);
        return res;
    }

    const detail::HsdResult h = detail::solve_standard(sf, opt);
    for (int i = 0; i < n_full; ++i)
        x_full[i] = index[i] >= 0 ? h.x[index[i]] : (fixed[i] ? *fixed[i] : 0.0);
    res.status = h.status;
    res.x = x_full;
    res.kkt = h.kkt;
    res.iterations = h.iterations;
    res.objective_value = prog.objective().evaluate(x_full);
    return res;
}

} // namespace cfisac
