#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "projae/biortho.hpp"
#include "projae/error.hpp"

using namespace projae;

namespace {

PairRep random_rep(long n, long r, unsigned seed) {
    PairRep rep{oracle::gaussian(n, r, seed), oracle::gaussian(n, r, seed + 1)};
    if ((rep.psi_t.transpose() * rep.phi_t).determinant() < 0) rep.phi_t.col(0) *= -1.0;
    return rep;
}

bool is_biorthogonal(const BiorthogonalPair& p, double tol) {
    return (p.psi.transpose() * p.phi - Mat::Identity(p.phi.cols(), p.phi.cols())).norm() < tol;
}

}  // namespace

TEST(ProjectPair, FixesBiorthogonalPairs) {
    const BiorthogonalPair p = project_pair(random_rep(5, 2, 1));
    const BiorthogonalPair q = project_pair({p.phi, p.psi});
    EXPECT_LT((q.phi - p.phi).norm(), 1e-12);
    EXPECT_LT((q.psi - p.psi).norm(), 1e-15);
}

TEST(ProjectPair, DiagonalScaling) {
    const Mat e = Mat::Identity(3, 2);
    const BiorthogonalPair p = project_pair({2.0 * e, e});
    EXPECT_LT((p.phi - e).norm(), 1e-15);
}

TEST(ProjectPair, RandomMembersBecomeBiorthogonal) {
    for (unsigned s = 0; s < 20; ++s) {
        const BiorthogonalPair p = project_pair(random_rep(7, 3, 10 * s));
        EXPECT_TRUE(is_biorthogonal(p, 1e-12));
    }
}

TEST(ProjectPair, RejectsNegativeDeterminant) {
    PairRep rep{Mat::Identity(3, 2), Mat::Identity(3, 2)};
    rep.phi_t(0, 0) = -1.0;
    EXPECT_THROW(project_pair(rep), DomainError);
    rep.phi_t(0, 0) = 0.0;
    EXPECT_THROW(project_pair(rep), DomainError);
}

TEST(PairRegularizer, ZeroOnManifoldAndClosedForm) {
    const BiorthogonalPair p = project_pair(random_rep(4, 2, 3));
    EXPECT_LT(pair_regularizer({p.phi, p.psi}).value, 1e-20);

    const double d = 0.3;
    PairRep rep{Mat::Identity(3, 2), Mat::Identity(3, 2)};
    rep.phi_t(1, 1) = 1.0 + d;
    EXPECT_NEAR(pair_regularizer(rep).value, d * d * (1.0 + 1.0 / ((1 + d) * (1 + d))), 1e-14);

    PairRep off{p.phi, p.psi};
    off.phi_t(0, 0) += 1e-3;
    EXPECT_GT(pair_regularizer(off).value, 0.0);
}

TEST(PairRegularizer, GradientMatchesFiniteDifferences) {
    const PairRep rep = random_rep(4, 2, 8);
    const RegularizerValue rv = pair_regularizer(rep);
    const double h = 1e-6;
    for (int which = 0; which < 2; ++which)
        for (long i = 0; i < 4; ++i)
            for (long j = 0; j < 2; ++j) {
                PairRep a = rep, b = rep;
                (which ? a.psi_t : a.phi_t)(i, j) += h;
                (which ? b.psi_t : b.phi_t)(i, j) -= h;
                const double fd = (pair_regularizer(a).value - pair_regularizer(b).value) / (2 * h);
                const double an = (which ? rv.grad_psi_t : rv.grad_phi_t)(i, j);
                EXPECT_NEAR(an, fd, 1e-5 * std::max(1.0, std::abs(fd)));
            }
}

TEST(PairRegularizer, BlowsUpNearSingularGram) {
    PairRep rep{Mat::Identity(3, 2), Mat::Identity(3, 2)};
    rep.phi_t(1, 1) = 5e-5;
    EXPECT_GT(pair_regularizer(rep).value, 1e6);
}

TEST(TangentProject, TangentInputUnchangedNormalInputRemoved) {
    const BiorthogonalPair p = project_pair(random_rep(5, 2, 21));
    const Mat a = oracle::gaussian(2, 2, 4);
    const TangentPair normal = tangent_project(p, p.psi * a, p.phi * a.transpose());
    EXPECT_LT(normal.dphi.norm() + normal.dpsi.norm(), 1e-10);

    const TangentPair t = tangent_project(p, oracle::gaussian(5, 2, 5), oracle::gaussian(5, 2, 6));
    const TangentPair t2 = tangent_project(p, t.dphi, t.dpsi);
    EXPECT_LT((t2.dphi - t.dphi).norm() + (t2.dpsi - t.dpsi).norm(), 1e-10);
}

TEST(TangentProject, IsOrthogonalAndMatchesKroneckerOracle) {
    const BiorthogonalPair p = project_pair(random_rep(6, 3, 31));
    const Mat x = oracle::gaussian(6, 3, 7), y = oracle::gaussian(6, 3, 8);
    const TangentPair t = tangent_project(p, x, y);
    EXPECT_LT((t.dpsi.transpose() * p.phi + p.psi.transpose() * t.dphi).norm(), 1e-10);
    const double inner = ((x - t.dphi).cwiseProduct(t.dphi)).sum() + ((y - t.dpsi).cwiseProduct(t.dpsi)).sum();
    EXPECT_NEAR(inner, 0.0, 1e-9);

    // Normal component (psi A, phi A^T) with A from the tangent condition:
    // A (phi^T phi) + (psi^T psi) A = y^T phi + psi^T x.
    const Mat rhs = y.transpose() * p.phi + p.psi.transpose() * x;
    const Mat a = oracle::kron_sylvester(p.phi.transpose() * p.phi, p.psi.transpose() * p.psi, rhs);
    EXPECT_LT((t.dphi - (x - p.psi * a)).norm(), 1e-10);
    EXPECT_LT((t.dpsi - (y - p.phi * a.transpose())).norm(), 1e-10);
}

TEST(TangentProject, LossIsFirstOrderInvariantAlongFibers) {
    const PairRep rep = random_rep(5, 2, 41);
    const Mat target = oracle::gaussian(5, 5, 9);
    auto loss = [&](const PairRep& r) {
        const BiorthogonalPair p = project_pair(r);
        return (p.phi * p.psi.transpose() - target).squaredNorm();
    };
    const Mat a = oracle::gaussian(2, 2, 10);
    const double h = 1e-6;
    PairRep fwd = rep, bwd = rep;
    fwd.phi_t += h * rep.phi_t * a;
    bwd.phi_t -= h * rep.phi_t * a;
    EXPECT_NEAR((loss(fwd) - loss(bwd)) / (2 * h), 0.0, 1e-6);
}

TEST(Orthogonality, MinimumAndScaling) {
    const Mat e = Mat::Identity(4, 2);
    EXPECT_NEAR(frob_orthogonality_penalty({e, e}), 4.0, 1e-12);
    const double c = 1.7;
    EXPECT_NEAR(frob_orthogonality_penalty({c * e, e / c}), 2.0 * (c * c + 1 / (c * c)), 1e-12);
}

TEST(Orthogonality, GrowsWithPrincipalAngle) {
    double last = 0.0;
    for (int k = 0; k < 20; ++k) {
        const double th = 0.07 * k;
        Mat phi = Mat::Zero(2, 1), psi = Mat::Zero(2, 1);
        psi(0, 0) = 1.0;
        phi(0, 0) = std::cos(th);
        phi(1, 0) = std::sin(th);
        const BiorthogonalPair p = project_pair({phi, psi});
        const double v = frob_orthogonality_penalty(p);
        if (k > 0) EXPECT_GT(v, last);
        last = v;
    }
}

TEST(RowSparsity, ZeroForExactlyRNonzeroRows) {
    Mat psi = Mat::Zero(5, 2);
    psi(0, 0) = 3.0;
    psi(1, 1) = -5.0;
    EXPECT_NEAR(grassmann_row_sparsity(psi).value, 0.0, 1e-14);
}

TEST(RowSparsity, BasisInvariantAndMatchesGramSchmidt) {
    const Mat psi = oracle::gaussian(6, 2, 12);
    const Mat a = oracle::gaussian(2, 2, 13) + 2.0 * Mat::Identity(2, 2);
    const double v = grassmann_row_sparsity(psi).value;
    EXPECT_NEAR(grassmann_row_sparsity(psi * a).value, v, 1e-10);
    const Mat u = oracle::gram_schmidt(psi);
    EXPECT_NEAR(v, u.rowwise().norm().sum() - 2.0, 1e-10);
    EXPECT_GT(v, 0.0);
}

TEST(RowSparsity, GrowsLinearlyAwayFromSparseMinimizer) {
    Mat u = Mat::Zero(6, 2);
    u(0, 0) = 1.0;
    u(3, 1) = 1.0;
    const Mat xi = (Mat::Identity(6, 6) - u * u.transpose()) * oracle::gaussian(6, 2, 14);
    for (double t : {1e-4, 1e-3, 1e-2}) {
        const Mat moved = u + t * xi / xi.norm();
        EXPECT_GE(grassmann_row_sparsity(moved).value, 0.5 * t);
    }
}

TEST(RowSparsity, SubgradientMatchesFiniteDifferences) {
    const Mat psi = oracle::gaussian(5, 2, 15);
    const SparsityValue sv = grassmann_row_sparsity(psi);
    const double h = 1e-6;
    for (long i = 0; i < 5; ++i)
        for (long j = 0; j < 2; ++j) {
            Mat a = psi, b = psi;
            a(i, j) += h;
            b(i, j) -= h;
            const double fd = (grassmann_row_sparsity(a).value - grassmann_row_sparsity(b).value) / (2 * h);
            EXPECT_NEAR(sv.grad(i, j), fd, 1e-6);
        }
}

TEST(InitPair, OrthonormalAndDeterministic) {
    const PairRep a = init_pair(6, 3, 5), b = init_pair(6, 3, 5);
    EXPECT_EQ(a.phi_t, b.phi_t);
    EXPECT_EQ(a.phi_t, a.psi_t);
    EXPECT_LT((a.psi_t.transpose() * a.phi_t - Mat::Identity(3, 3)).norm(), 1e-12);
    EXPECT_NEAR(svd(a.phi_t).S(0), 1.0, 1e-10);
}

TEST(Domain, TwoMembersJoinInsidePositiveDomain) {
    // Split phi~ into its part along psi~ and the rest. The Gram matrix
    // M = psi~^T phi~ moves through GL+(2) as a rotation times an upper
    // triangular factor with positive diagonal, so det stays positive.
    const PairRep p0 = random_rep(4, 2, 50);
    PairRep p1 = random_rep(4, 2, 60);
    p1.psi_t = p0.psi_t;
    if ((p1.psi_t.transpose() * p1.phi_t).determinant() < 0) p1.phi_t.col(0) *= -1.0;
    const Mat& psi = p0.psi_t;
    const Mat lift = psi * (psi.transpose() * psi).inverse();
    const Mat away = Mat::Identity(4, 4) - lift * psi.transpose();
    auto factor = [](const Mat& m, double& angle, Mat& r) {
        const QrResult qr = qr_thin(m);
        angle = std::atan2(qr.Q(1, 0), qr.Q(0, 0));
        r = qr.R;
        EXPECT_GT(qr.Q.determinant(), 0.0);
    };
    double a0, a1;
    Mat r0, r1;
    factor(psi.transpose() * p0.phi_t, a0, r0);
    factor(psi.transpose() * p1.phi_t, a1, r1);
    const int steps = 200;
    for (int k = 0; k <= steps; ++k) {
        const double s = static_cast<double>(k) / steps;
        const double a = (1 - s) * a0 + s * a1;
        Mat rot(2, 2);
        rot << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
        const Mat m = rot * ((1 - s) * r0 + s * r1);
        const Mat phi = away * ((1 - s) * p0.phi_t + s * p1.phi_t) + lift * m;
        EXPECT_GT((psi.transpose() * phi).determinant(), 0.0) << "s = " << s;
        if (k == 0) EXPECT_LT((phi - p0.phi_t).norm(), 1e-10);
        if (k == steps) EXPECT_LT((phi - p1.phi_t).norm(), 1e-10);
    }
}
