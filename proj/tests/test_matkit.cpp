#include <gtest/gtest.h>

#include "oracles.hpp"
#include "projae/error.hpp"
#include "projae/matkit.hpp"

using namespace projae;

TEST(QrThin, OrthonormalBlockIsReturned) {
    const Mat m = Mat::Identity(3, 2);
    const QrResult qr = qr_thin(m);
    EXPECT_LT((qr.Q - m).norm(), 1e-15);
    EXPECT_LT((qr.R - Mat::Identity(2, 2)).norm(), 1e-15);
}

TEST(QrThin, DuplicatedColumnsReportRank) {
    Mat m(4, 2);
    m.col(0) << 1, 2, 3, 4;
    m.col(1) = m.col(0);
    try {
        qr_thin(m);
        FAIL() << "expected RankDeficientError";
    } catch (const RankDeficientError& e) {
        EXPECT_EQ(e.rank(), 1);
    }
}

TEST(QrThin, MatchesGramSchmidt) {
    const Mat m = oracle::gaussian(5, 3, 11);
    const QrResult qr = qr_thin(m);
    EXPECT_LT((qr.Q.transpose() * qr.Q - Mat::Identity(3, 3)).norm(), 1e-12);
    EXPECT_LT((qr.Q * qr.R - m).norm() / m.norm(), 1e-10);
    EXPECT_LT((qr.Q - oracle::gram_schmidt(m)).norm(), 1e-10);
    for (long i = 0; i < 3; ++i) {
        EXPECT_GT(qr.R(i, i), 0.0);
        for (long j = 0; j < i; ++j) EXPECT_EQ(qr.R(i, j), 0.0);
    }
}

TEST(Svd, DiagonalAndRankOne) {
    Mat d = Mat::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = 3.0;
    const SvdResult s = svd(d);
    EXPECT_NEAR(s.S(0), 3.0, 1e-14);
    EXPECT_NEAR(s.S(1), 1.0, 1e-14);

    Vec u(3), v(2);
    u << 1, -2, 2;
    v << 3, 4;
    const SvdResult r1 = svd(u * v.transpose());
    EXPECT_NEAR(r1.S(0), 15.0, 1e-12);
    EXPECT_NEAR(r1.S(1), 0.0, 1e-12);
}

TEST(Svd, SingularValuesMatchJacobi) {
    const Mat m = oracle::gaussian(4, 4, 5);
    const SvdResult s = svd(m);
    EXPECT_LT((s.U * s.S.asDiagonal() * s.V.transpose() - m).norm() / m.norm(), 1e-10);
    const Vec ev = oracle::jacobi_eigenvalues(m.transpose() * m);
    for (long i = 0; i < 4; ++i) EXPECT_NEAR(s.S(i), std::sqrt(ev(3 - i)), 1e-10);
    for (long i = 1; i < 4; ++i) EXPECT_GE(s.S(i - 1), s.S(i));
}

TEST(Solve, SimpleCases) {
    Vec b(3);
    b << 1, -2, 5;
    EXPECT_LT((solve_vec(Mat::Identity(3, 3), b) - b).norm(), 1e-15);
    Mat a = Mat::Zero(2, 2);
    a(0, 0) = 2;
    a(1, 1) = 4;
    Vec b2(2);
    b2 << 2, 4;
    EXPECT_LT((solve_vec(a, b2) - Vec::Ones(2)).norm(), 1e-15);
}

TEST(Solve, ResidualBound) {
    const Mat a = oracle::gaussian(6, 6, 3) + 6.0 * Mat::Identity(6, 6);
    const Mat b = oracle::gaussian(6, 2, 4);
    const Mat x = solve(a, b);
    EXPECT_LE((a * x - b).norm(), 1e-10 * (a.norm() * x.norm() + b.norm()));
}

TEST(Solve, SingularThrows) {
    Mat a(2, 2);
    a << 1, 2, 2, 4;
    EXPECT_THROW(solve_vec(a, Vec::Ones(2)), SingularMatrixError);
}

TEST(Sylvester, ClosedForms) {
    const Mat rhs = oracle::gaussian(3, 3, 1);
    EXPECT_LT((solve_sylvester(Mat::Identity(3, 3), Mat::Identity(3, 3), rhs) - rhs / 2).norm(), 1e-14);
    Mat p = Mat::Zero(2, 2), q = Mat::Zero(2, 2);
    p.diagonal() << 1, 2;
    q.diagonal() << 3, 4;
    const Mat a = solve_sylvester(p, q, Mat::Ones(2, 2));
    for (long i = 0; i < 2; ++i)
        for (long j = 0; j < 2; ++j) EXPECT_NEAR(a(i, j), 1.0 / (p(j, j) + q(i, i)), 1e-14);
}

TEST(Sylvester, MatchesKroneckerOracleUpToDimensionSix) {
    for (long r = 1; r <= 6; ++r)
        for (long k = 1; k <= 6; k += 2) {
            const Mat p = oracle::random_spd(r, 10 * r + k), q = oracle::random_spd(k, 100 + r + k);
            const Mat rhs = oracle::gaussian(k, r, 7 * r + k);
            const Mat a = solve_sylvester(p, q, rhs);
            EXPECT_LT((a - oracle::kron_sylvester(p, q, rhs)).norm() / a.norm(), 1e-10) << r << "x" << k;
            EXPECT_LT((a * p + q * a - rhs).norm() / rhs.norm(), 1e-10);
        }
}

TEST(Sylvester, RejectsNonSpd) {
    Mat p = Mat::Identity(2, 2);
    p(1, 1) = -1.0;
    EXPECT_THROW(solve_sylvester(p, Mat::Identity(2, 2), Mat::Ones(2, 2)), NotSpdError);
}

TEST(Lyapunov, ClosedForms) {
    EXPECT_LT((solve_lyapunov(-Mat::Identity(3, 3), 2 * Mat::Identity(3, 3)) - Mat::Identity(3, 3)).norm(), 1e-13);
    Mat a = Mat::Zero(2, 2);
    a.diagonal() << -1, -2;
    const Mat w = solve_lyapunov(a, Mat::Identity(2, 2));
    EXPECT_NEAR(w(0, 0), 0.5, 1e-14);
    EXPECT_NEAR(w(1, 1), 0.25, 1e-14);
    EXPECT_NEAR(w(0, 1), 0.0, 1e-14);
}

TEST(Lyapunov, NonnormalSystemMatchesQuadrature) {
    Mat a(3, 3);
    a << -1, 0, 100, 0, -2, 100, 0, 0, -5;
    const Mat b = Mat::Ones(3, 1);
    const Mat q = b * b.transpose();
    const Mat w = solve_lyapunov(a, q);
    EXPECT_LT((a * w + w * a.transpose() + q).norm() / w.norm(), 1e-9);
    EXPECT_LT((w - w.transpose()).norm(), 1e-12 * w.norm());
    const Mat quad = oracle::lyapunov_quadrature(a, q, 40.0, 40000);
    EXPECT_LT((w - quad).norm() / w.norm(), 1e-6);
}

TEST(Lyapunov, RejectsUnstable) {
    EXPECT_THROW(solve_lyapunov(Mat::Identity(2, 2), Mat::Identity(2, 2)), NotHurwitzError);
}

TEST(RandomOrthonormal, Properties) {
    const Mat one = random_orthonormal(1, 1, 3);
    EXPECT_NEAR(std::abs(one(0, 0)), 1.0, 1e-15);
    const Mat a = random_orthonormal(8, 3, 42), b = random_orthonormal(8, 3, 42);
    EXPECT_EQ(a, b);
    EXPECT_LT((a.transpose() * a - Mat::Identity(3, 3)).norm(), 1e-12);
    for (long j = 0; j < 3; ++j) EXPECT_NEAR(a.col(j).norm(), 1.0, 1e-12);
    EXPECT_NE(a, random_orthonormal(8, 3, 43));
}

TEST(PrincipalAngles, KnownAngle) {
    Mat a = Mat::Zero(3, 1), b = Mat::Zero(3, 1);
    a(0, 0) = 1.0;
    b(0, 0) = std::cos(0.3);
    b(1, 0) = std::sin(0.3);
    EXPECT_NEAR(principal_angles(a, b)(0), 0.3, 1e-12);
    EXPECT_NEAR(principal_angles(a, 5.0 * a).maxCoeff(), 0.0, 1e-7);
}

TEST(NullSpace, SpansKernel) {
    Mat l(1, 3);
    l << 1, 1, 1;
    const Mat n = null_space(l);
    EXPECT_EQ(n.cols(), 2);
    EXPECT_LT((l * n).norm(), 1e-14);
    EXPECT_LT((n.transpose() * n - Mat::Identity(2, 2)).norm(), 1e-13);
}
