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

#include <vector>

namespace cfisac
{

/// Which echoes carry information about the receive angle at AP p.
enum class EchoModel
{
    /// Echoes from every transmit AP; the derivative of the receive response
    /// acts on every block and the transmit response of AP p adds a term in
    /// block p.
    multistatic,
    /// Only AP p's own echo enters the derivative (both responses in block p).
    own_link
};

/// Dense echo matrices. B[l][p] = b_p abar_l^H D_l (N_r x L*N_t) and
/// B_dot[p] is the angle derivative of the echo map at AP p, gains included.
struct SensingStructure
{
    int L = 0;
    int tx = 0;
    int rx = 0;
    EchoModel model = EchoModel::multistatic;
    std::vector<std::vector<ComplexMatrix>> B;
    std::vector<ComplexMatrix> B_dot;
    std::vector<ComplexMatrix> A_tilde;
};

inline SensingStructure build_structure(const Scenario &sc, const SteeringSet &st,
                                        EchoModel model = EchoModel::multistatic)
{
    const int L = sc.L();
    const int Nt = sc.config.tx_antennas;
    const int Nr = sc.config.rx_antennas;
    SensingStructure s;
    s.L = L;
    s.tx = Nt;
    s.rx = Nr;
    s.model = model;
    s.B.assign(L, std::vector<ComplexMatrix>(L));
    for (int l = 0; l < L; ++l)
        for (int p = 0; p < L; ++p)
        {
            s.B[l][p] = ComplexMatrix::Zero(Nr, L * Nt);
            s.B[l][p].middleCols(l * Nt, Nt) = st.b[p] * st.a[l].adjoint();
        }
    for (int p = 0; p < L; ++p)
    {
        ComplexMatrix d = ComplexMatrix::Zero(Nr, L * Nt);
        const cplx app = sc.alpha(p, p);
        if (model == EchoModel::multistatic)
            for (int l = 0; l < L; ++l)
                d.middleCols(l * Nt, Nt) = sc.alpha(l, p) * st.b_dot[p] * st.a[l].adjoint();
        else
            d.middleCols(p * Nt, Nt) = app * st.b_dot[p] * st.a[p].adjoint();
        d.middleCols(p * Nt, Nt) += app * st.b[p] * st.a_dot[p].adjoint();
        s.B_dot.push_back(std::move(d));
        s.A_tilde.push_back(st.a[p] * st.a[p].adjoint());
    }
    return s;
}

/// Noise-free echo at AP p for stacked transmit signal X (L*N_t x T), with the
/// angle at AP p (receive and transmit side) replaced by `theta_p`.
inline ComplexMatrix echo_signal(const Scenario &sc, int p, const ComplexMatrix &X, double theta_p,
                                 EchoModel model = EchoModel::multistatic)
{
    const auto &cfg = sc.config;
    const int Nt = cfg.tx_antennas;
    const ComplexVector b = steering_vector(cfg.rx_antennas, theta_p, cfg.array_indexing);
    ComplexMatrix y = ComplexMatrix::Zero(cfg.rx_antennas, X.cols());
    for (int l = 0; l < sc.L(); ++l)
    {
        if (model == EchoModel::own_link && l != p)
            continue;
        const double angle = l == p ? theta_p : sc.phi[l];
        const ComplexVector a = steering_vector(Nt, angle, cfg.array_indexing);
        y += sc.alpha(l, p) * b * (a.adjoint() * X.middleRows(l * Nt, Nt));
    }
    return y;
}

/// Stacked transmit signal of one realization: block l is F_l S.
inline ComplexMatrix stacked_transmit(const Scenario &sc, const PowerAllocation &alloc, const SteeringSet &st,
                                      const ChannelRealization &r)
{
    const int Nt = sc.config.tx_antennas;
    ComplexMatrix X(sc.L() * Nt, r.s.cols());
    for (int l = 0; l < sc.L(); ++l)
        X.middleRows(l * Nt, Nt) = build_precoder(r.h_hat[l], alloc.gamma.col(l), alloc.eta.col(l), st.a[l]) * r.s;
    return X;
}

/// Inner products of the per-AP sensing amplitude vectors:
/// (l, q) -> sum_k sqrt(eta_kl * eta_kq).
inline RealMatrix sensing_overlap(const PowerAllocation &alloc)
{
    const RealMatrix root = alloc.eta.cwiseSqrt();
    return root.transpose() * root;
}

/// Transmit covariance E{X X^H}/T in closed form.
inline ComplexMatrix covariance_rx(const Scenario &sc, const PowerAllocation &alloc, const SteeringSet &st)
{
    const int L = sc.L();
    const int Nt = sc.config.tx_antennas;
    const RealMatrix overlap = sensing_overlap(alloc);
    ComplexMatrix R(L * Nt, L * Nt);
    for (int l = 0; l < L; ++l)
        for (int p = 0; p < L; ++p)
        {
            auto blk = R.block(l * Nt, p * Nt, Nt, Nt);
            blk = overlap(l, p) * st.a[l] * st.a[p].adjoint();
            if (l == p)
                blk.diagonal().array() += sc.xi.col(p).dot(alloc.gamma.col(p));
        }
    return R;
}

/// sigma_s^2 / (2T).
inline double scaled_sensing_noise(const SystemConfig &cfg)
{
    return cfg.sensing_noise / (2.0 * cfg.frame_length);
}

/// Fisher information of (theta_p, Re alpha_pp, Im alpha_pp) given the
/// transmit covariance R.
inline Eigen::Matrix3d fim_from_covariance(const SensingStructure &s, const ComplexMatrix &R, int p,
                                           double noise_scale)
{
    const ComplexMatrix &Bd = s.B_dot[p];
    const ComplexMatrix &B = s.B[p][p];
    const double jtt = (Bd * R * Bd.adjoint()).trace().real() / noise_scale;
    const cplx cross = (B * R * Bd.adjoint()).trace();
    const double jaa = (B * R * B.adjoint()).trace().real() / noise_scale;
    Eigen::Matrix3d J;
    J << jtt, cross.real() / noise_scale, -cross.imag() / noise_scale, cross.real() / noise_scale, jaa, 0.0,
        -cross.imag() / noise_scale, 0.0, jaa;
    return J;
}

inline Eigen::Matrix3d fim(const Scenario &sc, const PowerAllocation &alloc, int p, const SensingStructure &s,
                           const SteeringSet &st)
{
    return fim_from_covariance(s, covariance_rx(sc, alloc, st), p, scaled_sensing_noise(sc.config));
}

/// [J^{-1}]_{11} by explicit inversion.
inline double crlb_from_fim(const Eigen::Matrix3d &J)
{
    Eigen::FullPivLU<Eigen::Matrix3d> lu(J);
    if (!lu.isInvertible() || J.norm() == 0.0)
        throw SingularFimError("crlb_from_fim: Fisher information matrix is singular");
    return lu.inverse()(0, 0);
}

/// Coefficients that make the CRLB terms polynomial in the allocation.
/// Per-AP vectors are indexed by transmit AP; in the own-link model only
/// entry p is nonzero and the scalars c1_tilde(), c2_tilde(), c2_hat_p()
/// coincide with the single-link coefficients.
struct CrlbCoefficients
{
    int p = 0;
    double c1 = 0.0;
    double c2 = 0.0;
    RealVector c1_tilde_all;      // ||Bdot block l||_F^2
    ComplexMatrix c2_tilde_all;   // (l, q): w_q^H w_l, w_l = Bdot block l * a_l
    cplx c1_hat = 0.0;            // tr(B_p^H Bdot block p)
    ComplexVector c2_hat_all;     // (B_p a_p)^H w_l

    double c1_tilde() const { return c1_tilde_all[p]; }
    double c2_tilde() const { return c2_tilde_all(p, p).real(); }
    cplx c2_hat() const { return c2_hat_all[p]; }
};

inline CrlbCoefficients crlb_coefficients(const SensingStructure &s, const SteeringSet &st, int p)
{
    const int L = s.L;
    const int Nt = s.tx;
    CrlbCoefficients c;
    c.p = p;
    const ComplexMatrix Bp = s.B[p][p].middleCols(p * Nt, Nt);
    c.c1 = (Bp.adjoint() * Bp).trace().real();
    c.c2 = (s.A_tilde[p] * Bp.adjoint() * Bp).trace().real();
    c.c1_tilde_all.resize(L);
    ComplexMatrix W(s.rx, L);
    for (int l = 0; l < L; ++l)
    {
        const auto blk = s.B_dot[p].middleCols(l * Nt, Nt);
        c.c1_tilde_all[l] = blk.squaredNorm();
        W.col(l) = blk * st.a[l];
    }
    c.c2_tilde_all = W.transpose() * W.conjugate(); // (l, q) = w_q^H w_l
    c.c1_hat = (Bp.adjoint() * s.B_dot[p].middleCols(p * Nt, Nt)).trace();
    const ComplexVector bpa = Bp * st.a[p];
    c.c2_hat_all = W.transpose() * bpa.conjugate();
    return c;
}

/// The three scalar functions of the allocation entering the CRLB.
struct CrlbTerms
{
    double tau = 0.0;
    double tau_tilde = 0.0;
    cplx tau_hat = 0.0;

    double denominator() const { return tau_tilde * tau - std::norm(tau_hat); }
};

inline CrlbTerms crlb_terms(const CrlbCoefficients &c, const RealMatrix &xi, const PowerAllocation &alloc)
{
    const int L = int(xi.cols());
    const int p = c.p;
    const RealMatrix overlap = sensing_overlap(alloc);
    RealVector comm(L);
    for (int l = 0; l < L; ++l)
        comm[l] = xi.col(l).dot(alloc.gamma.col(l));
    CrlbTerms t;
    t.tau = c.c1 * comm[p] + c.c2 * overlap(p, p);
    t.tau_tilde = c.c1_tilde_all.dot(comm);
    for (int l = 0; l < L; ++l)
        for (int q = 0; q < L; ++q)
            t.tau_tilde += c.c2_tilde_all(l, q).real() * overlap(l, q);
    t.tau_hat = c.c1_hat * comm[p];
    for (int l = 0; l < L; ++l)
        t.tau_hat += c.c2_hat_all[l] * overlap(p, l);
    return t;
}

inline double crlb_from_terms(const CrlbTerms &t, double noise_scale)
{
    const double den = t.denominator();
    if (!(t.tau > 0.0) || !(den > 1e-12 * t.tau_tilde * t.tau))
        throw SingularFimError("crlb: no information about the target angle (denominator " + std::to_string(den) +
                               ")");
    return noise_scale * t.tau / den;
}

/// Precomputed coefficients for every receive AP of one scenario.
class CrlbEvaluator
{
  public:
    CrlbEvaluator(const Scenario &sc, EchoModel model = EchoModel::multistatic)
        : xi_(sc.xi), noise_scale_(scaled_sensing_noise(sc.config)), cos_theta_(sc.theta.array().cos().abs())
    {
        const SteeringSet st = make_steering(sc);
        const SensingStructure s = build_structure(sc, st, model);
        for (int p = 0; p < sc.L(); ++p)
            coeffs_.push_back(crlb_coefficients(s, st, p));
    }

    int aps() const { return int(coeffs_.size()); }
    double noise_scale() const { return noise_scale_; }
    const CrlbCoefficients &coefficients(int p) const { return coeffs_.at(p); }
    const RealMatrix &xi() const { return xi_; }

    CrlbTerms terms(const PowerAllocation &alloc, int p) const
    {
        return crlb_terms(coeffs_.at(p), xi_, alloc);
    }

    double crlb(const PowerAllocation &alloc, int p) const
    {
        // Every derivative term carries cos(theta_p).
        if (cos_theta_[p] < 1e-9)
            throw SingularFimError("crlb: target at endfire of AP " + std::to_string(p));
        return crlb_from_terms(terms(alloc, p), noise_scale_);
    }

    RealVector crlb_all(const PowerAllocation &alloc) const
    {
        RealVector v(aps());
        for (int p = 0; p < aps(); ++p)
            v[p] = crlb(alloc, p);
        return v;
    }

  private:
    RealMatrix xi_;
    double noise_scale_;
    RealVector cos_theta_;
    std::vector<CrlbCoefficients> coeffs_;
};

inline double crlb_closed_form(const Scenario &sc, const PowerAllocation &alloc, int p,
                               EchoModel model = EchoModel::multistatic)
{
    return CrlbEvaluator(sc, model).crlb(alloc, p);
}

} // namespace cfisac
