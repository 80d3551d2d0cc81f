#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>

#include "nitsche_flow/boundary_operators.hpp"
#include "oracles.hpp"

using namespace nitsche_flow;
using namespace oracle;

TEST(LambdaPm, SymmetricCase) {
    const auto [lp, lm] = lambda_pm(1.0, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(lp, 1.0);
    EXPECT_DOUBLE_EQ(lm, -1.0);
}

TEST(LambdaPm, MatchesNumericEigenvalues) {
    const auto [lp, lm] = lambda_pm(1.0, 1.0, 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(flux_jacobian(1.0, 1.0, {1.0, 0.0}));
    EXPECT_NEAR(lp, es.eigenvalues().maxCoeff(), 1e-12);
    EXPECT_NEAR(lm, es.eigenvalues().minCoeff(), 1e-12);
    EXPECT_NEAR(lp, 1.6180339887, 1e-10);
    EXPECT_NEAR(lm, -0.6180339887, 1e-10);
}

TEST(LambdaPm, ProductIsMinusThetaSquared) {
    const auto [lp, lm] = lambda_pm(2.0, -3.0, 1.0);
    EXPECT_NEAR(lp * lm, -1.0, 1e-12);
}

TEST(LambdaPm, RejectsNonFiniteAndNonPositive) {
    EXPECT_THROW(lambda_pm(1.0, std::numeric_limits<double>::quiet_NaN(), 1.0), DomainError);
    EXPECT_THROW(lambda_pm(1.0, std::numeric_limits<double>::infinity(), 1.0), DomainError);
    EXPECT_THROW(lambda_pm(1.0, 1.0, 0.0), DomainError);
    EXPECT_THROW(lambda_pm(0.0, 1.0, 1.0), DomainError);
}

TEST(AlphaBeta, AtZeroNormalVelocity) {
    const auto [alpha, beta] = alpha_beta(1.0, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(alpha, 0.5);
    EXPECT_DOUBLE_EQ(beta, 0.5);
}

TEST(AlphaBeta, BetaFromEigenvalueQuotient) {
    const auto [alpha, beta] = alpha_beta(1.0, 1.0, 1.0);
    const auto [lp, lm] = lambda_pm(1.0, 1.0, 1.0);
    EXPECT_NEAR(beta, -lm / (lp - lm), 1e-14);
    EXPECT_NEAR(beta, 0.6180339887498949 / 2.23606797749979, 1e-12);
    EXPECT_GT(alpha, 0.0);
}

TEST(AlphaBeta, TwoExpressionsForAlphaAgree) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 10000; ++i) {
        const auto d = random_draw(rng);
        const auto s = spectral_bundle(d.rho, d.vn, d.theta);
        const double lm = s.lambda_m;
        const double other = d.rho * std::min(d.vn, 0.0) - lm * lm * lm / (d.theta * d.theta + lm * lm);
        EXPECT_NEAR(s.alpha, other, 1e-12 * std::max(1.0, std::abs(other)));
        EXPECT_GT(s.alpha, 0.0);
        EXPECT_GT(s.beta, 0.0);
        EXPECT_LT(s.beta, 1.0);
    }
}

TEST(SpectralBundle, Invariants) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 10000; ++i) {
        const auto d = random_draw(rng);
        const auto s = spectral_bundle(d.rho, d.vn, d.theta);
        const double t2 = d.theta * d.theta;
        EXPECT_GT(s.lambda_p, 0.0);
        EXPECT_LT(s.lambda_m, 0.0);
        EXPECT_GE(std::max(s.lambda_p, -s.lambda_m), d.theta * (1 - 1e-15));
        EXPECT_EQ(s.lambda_p >= d.theta * (1 - 1e-15), d.vn >= 0.0);
        EXPECT_NEAR(s.lambda_p * s.lambda_m, -t2, 1e-12 * t2);
        EXPECT_NEAR(s.lambda_p + s.lambda_m, d.rho * d.vn, 1e-12 * std::max(1.0, s.root));
        EXPECT_NEAR(s.lambda_p * s.lambda_p + s.lambda_m * s.lambda_m, 2 * t2 + d.rho * d.rho * d.vn * d.vn,
                    1e-12 * (2 * t2 + d.rho * d.rho * d.vn * d.vn));
        EXPECT_LE(s.vn_minus, 0.0);
        EXPECT_GE(s.vn_plus, 0.0);
        EXPECT_DOUBLE_EQ(s.vn_minus + s.vn_plus, d.vn);
    }
}

TEST(AbsThetaBilinear, ZeroNormalVelocity) {
    const auto bp = BoundaryPoint::make({0.6, 0.8}, 1.0, 2.0);
    const StateSample psi{{0.3, -0.7}, 0.4};
    const double phin = dot(psi.v, bp.n);
    EXPECT_NEAR(abs_theta_bilinear(bp, 0.0, psi, psi), 2.0 * phin * phin + 0.4 * 0.4 / 2.0, 1e-14);
}

TEST(AbsThetaBilinear, TangentialOnly) {
    const auto bp = BoundaryPoint::make({1.0, 0.0}, 2.0, 1.5);
    const StateSample psi{{0.0, 0.7}, 0.0};
    EXPECT_NEAR(abs_theta_bilinear(bp, -1.3, psi, psi), 2.0 * 1.3 * 0.49, 1e-14);
}

TEST(NegThetaBilinear, KernelOfNegativePart) {
    const auto bp = BoundaryPoint::make({0.0, 1.0}, 1.0, 1.0);
    const double vn = 0.8;
    const auto s = spectral_bundle(1.0, vn, 1.0);
    const StateSample psi{{0.4, 0.5}, -s.lambda_m * 0.5};
    const StateSample other{{-0.2, 0.9}, 0.3};
    EXPECT_NEAR(neg_theta_bilinear(bp, vn, psi, other), 0.0, 1e-15);
}

TEST(BoundaryPoint, Validation) {
    EXPECT_THROW(BoundaryPoint::make({1.0, 1.0}, 1.0, 1.0), DomainError);
    EXPECT_THROW(BoundaryPoint::make({1.0, 0.0}, 0.0, 1.0), DomainError);
    EXPECT_THROW(BoundaryPoint::make({1.0, 0.0}, 1.0, -1.0), DomainError);
}

TEST(ThetaForms, HalfAbsPlusNegIsHalfJacobian) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 10000; ++i) {
        const auto d = random_draw(rng);
        const auto bp = BoundaryPoint::make(d.n, d.rho, d.theta);
        const double lhs = 0.5 * abs_theta_bilinear(bp, d.vn, d.a, d.b) + neg_theta_bilinear(bp, d.vn, d.a, d.b);
        const double rhs = 0.5 * full_jacobian_form(d.rho, d.vn, d.n, d.a, d.b);
        const double scale = d.rho * std::abs(d.vn) + d.theta + 1.0 / d.theta + 1.0;
        EXPECT_NEAR(lhs, rhs, 1e-12 * scale);
    }
}

TEST(ThetaForms, MatchNumericEigendecomposition) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 2000; ++i) {
        const auto d = random_draw(rng);
        const auto bp = BoundaryPoint::make(d.n, d.rho, d.theta);
        const Eigen::Matrix3d Aabs = weighted_function_numeric(d.rho, d.vn, d.theta, d.n, absf);
        const Eigen::Matrix3d Aneg = weighted_function_numeric(d.rho, d.vn, d.theta, d.n, negf);
        const double oa = vec(d.a).dot(Aabs * vec(d.b));
        const double on = vec(d.a).dot(Aneg * vec(d.b));
        const double scale = Aabs.norm() * vec(d.a).norm() * vec(d.b).norm();
        EXPECT_NEAR(abs_theta_bilinear(bp, d.vn, d.a, d.b), oa, 1e-10 * scale);
        EXPECT_NEAR(neg_theta_bilinear(bp, d.vn, d.a, d.b), on, 1e-10 * scale);
    }
}

TEST(ThetaForms, MatchExplicitEigenvectors) {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 2000; ++i) {
        const auto d = random_draw(rng);
        const auto bp = BoundaryPoint::make(d.n, d.rho, d.theta);
        const Eigen::Matrix3d Aabs = weighted_function_explicit(d.rho, d.vn, d.theta, d.n, absf);
        const Eigen::Matrix3d Aneg = weighted_function_explicit(d.rho, d.vn, d.theta, d.n, negf);
        const double scale = Aabs.norm() * vec(d.a).norm() * vec(d.b).norm();
        EXPECT_NEAR(abs_theta_bilinear(bp, d.vn, d.a, d.b), vec(d.a).dot(Aabs * vec(d.b)), 1e-10 * scale);
        EXPECT_NEAR(neg_theta_bilinear(bp, d.vn, d.a, d.b), vec(d.a).dot(Aneg * vec(d.b)), 1e-10 * scale);
    }
}

TEST(ThetaForms, SymmetryAndSign) {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 10000; ++i) {
        const auto d = random_draw(rng);
        const auto bp = BoundaryPoint::make(d.n, d.rho, d.theta);
        const double scale = d.rho * std::abs(d.vn) + d.theta + 1.0 / d.theta + 1.0;
        EXPECT_NEAR(abs_theta_bilinear(bp, d.vn, d.a, d.b), abs_theta_bilinear(bp, d.vn, d.b, d.a), 1e-13 * scale);
        EXPECT_NEAR(neg_theta_bilinear(bp, d.vn, d.a, d.b), neg_theta_bilinear(bp, d.vn, d.b, d.a), 1e-13 * scale);
        EXPECT_GE(abs_theta_bilinear(bp, d.vn, d.a, d.a), 0.0);
        EXPECT_LE(neg_theta_bilinear(bp, d.vn, d.a, d.a), 0.0);
    }
}

// With theta >= rho |v_n| (theta from theta_local with mu = 0), |A|_Theta(psi, psi) is equivalent to
// rho |v_n| |phi|^2 + theta phi_n^2 + chi^2 / theta. Empirical bounds over random input: [0.36, 3.0].
TEST(ThetaForms, NormEquivalenceWithLocalTheta) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::uniform_real_distribution<double> pos(1e-3, 10.0);
    double lo = 1e300, hi = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double rho = pos(rng), dK = pos(rng), dt = pos(rng);
        const Point vel{5 * U(rng), 5 * U(rng)};
        const double ang = 3.2 * U(rng);
        const Point n{std::cos(ang), std::sin(ang)};
        const double theta = theta_local(rho, norm(vel), 0.0, dK, dt);
        const double vn = dot(vel, n);
        const StateSample psi{{U(rng), U(rng)}, U(rng) * theta};
        const auto bp = BoundaryPoint::make(n, rho, theta);
        const double phin = dot(psi.v, n);
        const double ref = rho * std::abs(vn) * dot(psi.v, psi.v) + theta * phin * phin + psi.p * psi.p / theta;
        if (ref < 1e-12) continue;
        const double ratio = abs_theta_bilinear(bp, vn, psi, psi) / ref;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    EXPECT_GE(lo, 0.36);
    EXPECT_LE(hi, 3.0);
    EXPECT_GE(lo, 1.0 / 8.0);
    EXPECT_LE(hi, 8.0);
}

TEST(ThetaForms, BalancedScalingIsExact) {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 1000; ++i) {
        const auto d = random_draw(rng);
        const double s = 10.0;
        const StateSample u{d.a.v, d.a.p};
        const StateSample us{s * d.a.v, s * s * d.a.p};
        const auto bp = BoundaryPoint::make(d.n, d.rho, d.theta);
        const auto bps = BoundaryPoint::make(d.n, d.rho, s * d.theta);
        const double vn = d.vn, vns = s * d.vn;
        const auto [lp, lm] = lambda_pm(d.rho, vn, d.theta);
        const auto [lps, lms] = lambda_pm(d.rho, vns, s * d.theta);
        EXPECT_NEAR(lps, s * lp, 1e-12 * std::abs(s * lp));
        EXPECT_NEAR(lms, s * lm, 1e-12 * std::abs(s * lm));
        const double base = neg_theta_bilinear(bp, vn, u, u);
        EXPECT_NEAR(neg_theta_bilinear(bps, vns, us, us), s * s * s * base, 1e-12 * std::abs(s * s * s * base) + 1e-300);
    }
}

TEST(ThetaForms, UnitThetaBreaksScaling) {
    std::mt19937_64 rng(19);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto d = random_draw(rng);
        const double s = 10.0;
        const StateSample u{d.a.v, d.a.p};
        const StateSample us{s * d.a.v, s * s * d.a.p};
        const auto bp = BoundaryPoint::make(d.n, d.rho, 1.0);
        const double base = neg_theta_bilinear(bp, d.vn, u, u);
        const double scaled = neg_theta_bilinear(bp, s * d.vn, us, us);
        if (base != 0.0) worst = std::max(worst, std::abs(scaled - s * s * s * base) / std::abs(s * s * s * base));
    }
    EXPECT_GT(worst, 0.01);
}

TEST(ThetaLocal, Examples) {
    EXPECT_NEAR(theta_local(1.0, 0.0, 0.0, 1.0, 1.0, {0.1, 4.0}), 0.1, 1e-15);
    EXPECT_NEAR(theta_local(1.0, 3.0, 0.0, 1.0, std::numeric_limits<double>::infinity()), 3.0, 1e-15);
    const ThetaConstants c;
    EXPECT_DOUBLE_EQ(c.c_dt, 0.1);
    EXPECT_DOUBLE_EQ(c.c_st, 4.0);
    EXPECT_NEAR(theta_local(2.0, 1.0, 0.5, 0.25, 0.1), std::sqrt(4.0 + 0.01 * 25.0 + 16.0 * 4.0), 1e-13);
}

TEST(ThetaLocal, Errors) {
    EXPECT_THROW(theta_local(1.0, 1.0, 0.0, 0.0, 1.0), DomainError);
    EXPECT_THROW(theta_local(1.0, 1.0, 0.0, -1.0, 1.0), DomainError);
    EXPECT_THROW(theta_local(1.0, 1.0, 0.0, 1.0, 0.0), DomainError);
    EXPECT_THROW(theta_local(1.0, 0.0, 0.0, 1.0, std::numeric_limits<double>::infinity()), DomainError);
    EXPECT_THROW(theta_local(1.0, 1.0, 0.0, 1.0, 1.0, {0.0, 0.0}), DomainError);
}

TEST(ThetaLocal, HomogeneousOfDegreeOne) {
    // (v, d_K, d_t, mu) -> (s v, s d_K, d_t, s^2 mu) is the Navier-Stokes scaling with s_t = 1.
    const double s = 7.0;
    const double a = theta_local(1.3, 0.7, 0.02, 0.3, 0.05);
    const double b = theta_local(1.3, s * 0.7, s * s * 0.02, s * 0.3, 0.05);
    EXPECT_NEAR(b, s * a, 1e-13 * s * a);
}

TEST(QQuadratic, OutgoingBranch) {
    EXPECT_NEAR(q_quadratic(2.0, 0.5, 3.0, 0.7, 1.0), 2.0 * 0.125 / 2 + 0.49 / 3.0, 1e-15);
}

TEST(QQuadratic, RearrangedFormAgrees) {
    const double rho = 1, vn = -1, theta = 1, p = 1;
    const double q = q_quadratic(rho, vn, theta, p, 1.0);
    const double rearranged =
        (2 * p * p + 2 * p * rho * std::min(vn, 0.0) * vn + theta * rho * std::abs(vn) * vn * vn) / (2 * theta);
    EXPECT_NEAR(q, 2.5, 1e-15);
    EXPECT_NEAR(q, rearranged, 1e-15);
}

// For delta = 1 and theta >= rho |v_n|: Q >= c (p^2/theta + rho |v_n| v_n^2) with c = 1/2 - 1/(4 eps)
// style constants; the sharpest uniform constant for this quadratic form is (3 - sqrt(5)) / 4.
TEST(QQuadratic, CoercivityForUnitDelta) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::uniform_real_distribution<double> pos(0.01, 10.0);
    const double c = (3.0 - std::sqrt(5.0)) / 4.0;
    for (int i = 0; i < 100000; ++i) {
        const double rho = pos(rng), vn = 5 * U(rng), p = 5 * U(rng);
        const double theta = rho * std::abs(vn) * (1.0 + pos(rng));
        if (!(theta > 0)) continue;
        const double q = q_quadratic(rho, vn, theta, p, 1.0);
        const double ref = p * p / theta + rho * std::abs(vn) * vn * vn;
        EXPECT_GE(q, c * ref * (1 - 1e-12));
    }
}
