#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "projae/error.hpp"
#include "projae/experiments.hpp"
#include "projae/rom.hpp"

using namespace projae;

namespace {

ProjAE noisy(const std::vector<long>& widths, unsigned seed, ProjAEOptions opt = {}, double scale = 0.2) {
    ProjAE net = ProjAE::init(widths, seed, {}, opt);
    std::vector<Mat> p = net.parameters();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += scale * oracle::gaussian(p[i].rows(), p[i].cols(), 300 + i);
    net.set_parameters(p);
    return net;
}

LinearMap identity_map(long n) { return LinearMap({Mat::Identity(n, n), Mat::Identity(n, n)}); }

}  // namespace

TEST(RomRhs, IdentityMapReproducesTheFullModel) {
    const NoackSystem sys;
    const LinearMap id = identity_map(3);
    const Mat z = oracle::gaussian(3, 7, 1);
    const Mat u(0, 7);
    EXPECT_LT((enc_rom_rhs(id, sys, z, u) - sys.f_batch(z, u)).norm(), 1e-14);
    EXPECT_LT((dec_rom_rhs(id, sys, z, u) - sys.f_batch(z, u)).norm(), 1e-12);
}

TEST(RomRhs, OrthogonalLinearMapsAgree) {
    const NoackSystem sys;
    const Mat q = oracle::gram_schmidt(oracle::gaussian(3, 2, 2));
    const LinearMap map({q, q});
    const Mat z = oracle::gaussian(2, 5, 3);
    const Mat u(0, 5);
    EXPECT_LT((enc_rom_rhs(map, sys, z, u) - dec_rom_rhs(map, sys, z, u)).norm(), 1e-12);
}

TEST(RomRhs, ObliqueMapsDifferAndDecoderUsesLeastSquares) {
    const NoackSystem sys;
    const ProjAE net = noisy({2, 3, 3}, 4);
    const AutoencoderMap map(net);
    const Mat z = oracle::gaussian(2, 4, 5);
    const Mat u(0, 4);
    const Mat dec = dec_rom_rhs(map, sys, z, u);
    const Mat x = net.decode(z);
    const Mat fx = sys.f_batch(x, u);
    for (long c = 0; c < 4; ++c) {
        Mat jac(3, 2);
        for (long j = 0; j < 2; ++j) jac.col(j) = net.jvp_decode(z.col(c), Vec::Unit(2, j));
        const Vec ls = jac.colPivHouseholderQr().solve(fx.col(c));
        EXPECT_LT((dec.col(c) - ls).norm(), 1e-10);
    }
    EXPECT_GT((enc_rom_rhs(map, sys, z, u) - dec).norm(), 1e-6);
}

TEST(RomRhs, DegenerateDecoderIsIllConditioned) {
    const NoackSystem sys;
    const GraphMap flat([](double) { return 0.0; }, [](double) { return 0.0; });
    const PitchforkSystem pf = pitchfork_system();
    EXPECT_NO_THROW(dec_rom_rhs(flat, pf, Mat::Ones(1, 1), Mat(0, 1)));
    Mat phi = Mat::Zero(3, 2);
    phi(0, 0) = 1.0;
    phi(0, 1) = 1.0;
    const LinearMap bad({phi, phi});
    EXPECT_THROW(dec_rom_rhs(bad, sys, Mat::Ones(2, 1), Mat(0, 1)), IllConditionedError);
}

TEST(ManifoldError, IdentityIsZeroAndPlaneMatchesGridSum) {
    const NoackSystem sys;
    EXPECT_EQ(manifold_recon_error(identity_map(3), sys), 0.0);
    Mat e = Mat::Zero(3, 2);
    e(0, 0) = 1.0;
    e(1, 1) = 1.0;
    const LinearMap plane({e, e});
    double acc = 0.0;
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j) {
            const double a = -1.0 + 2.0 * i / 19.0, b = -1.0 + 2.0 * j / 19.0;
            const double h = noack_slow_manifold_rho(a * a + b * b, sys.eps(), 4, sys);
            acc += h * h;
        }
    EXPECT_NEAR(manifold_recon_error(plane, sys), acc / 400.0, 1e-13);
}

TEST(Simulation, IdentityRomMatchesFullModel) {
    const NoackSystem sys;
    const auto trajs = simulate_set(sys, uniform_cube(4, 3), 5.0, 0.1);
    const PredError err = rom_pred_error(identity_map(3), sys, RomKind::Enc, pointers(trajs));
    EXPECT_LT(err.mean, 1e-24);
    EXPECT_EQ(err.blown, 0);
    EXPECT_EQ(err.per_traj.size(), 4u);
}

TEST(Simulation, BlownColumnsAreFrozenAndReported) {
    LatentRhs rhs = [](const Mat& z, const Mat&) {
        Mat out = z;
        out.row(0) = z.row(0).array().square();
        return out;
    };
    LatentLift lift = [](const Mat& z) { return z; };
    Mat z0(1, 2);
    z0 << 2.0, -0.5;
    const RomRun run = integrate_latent(rhs, lift, z0, 0.0, 1.0, 0.01);
    EXPECT_TRUE(run.blown[0]);
    EXPECT_FALSE(run.blown[1]);
    EXPECT_LT(run.blow_time[0], 0.6);
    EXPECT_NEAR(run.latent.back()(0, 1), -0.5 / (1.0 + 0.5), 1e-8);
    EXPECT_TRUE(run.any_blown());
}

TEST(Rbf, ReproducesLinearFunctionsAndInterpolates) {
    const Mat c = 2.0 * oracle::gaussian(2, 40, 6);
    Mat vals(2, 40);
    vals.row(0) = 3.0 * c.row(0) - c.row(1);
    vals.row(1).setConstant(0.7);
    vals.row(1) += 0.5 * c.row(1);
    const RbfInterpolant f = fit_rbf(c, vals);
    const Mat probe = oracle::gaussian(2, 25, 7);
    Mat expect(2, 25);
    expect.row(0) = 3.0 * probe.row(0) - probe.row(1);
    expect.row(1) = (0.5 * probe.row(1)).array() + 0.7;
    EXPECT_LT((f.eval(probe) - expect).lpNorm<Eigen::Infinity>(), 1e-8);

    Mat wavy(1, 40);
    for (long k = 0; k < 40; ++k) wavy(0, k) = std::sin(c(0, k)) * std::cos(c(1, k));
    const RbfInterpolant g = fit_rbf(c, wavy);
    EXPECT_LT((g.eval(c) - wavy).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(Tensor, ContractionMatchesDirectEvaluation) {
    const NoackSystem sys;
    const ProjAE net = noisy({2, 3, 3, 3}, 8);
    const OuterLayerSplit split(net);
    const BilinearForm h2 = noack_bilinear(sys);
    const BilinearTensors t = assemble_bilinear_tensors(split, h2);
    const Mat y = oracle::gaussian(split.width(), 9, 9);
    const Mat fast = tensor_rom_f2(t, y);
    for (long c = 0; c < 9; ++c) {
        const Vec x = split.bias() + split.phi() * y.col(c);
        EXPECT_LT((fast.col(c) - split.psi().transpose() * h2(x, x)).norm(), 1e-10);
    }
    // f = A x + h2(x, x) reproduces the Noack field
    const Vec x = oracle::gaussian(3, 1, 10);
    EXPECT_LT((noack_linear_part(sys) * x + h2(x, x) - sys.f(x, Vec())).norm(), 1e-13);
    const TensorRom rom(net, noack_linear_part(sys), h2);
    const Mat z = oracle::gaussian(2, 6, 11);
    EXPECT_LT((rom.rhs(z) - enc_rom_rhs(AutoencoderMap(net), sys, z, Mat(0, 6))).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Tensor, SymmetryOfQuadraticTerm) {
    const NoackSystem sys;
    const ProjAE net = noisy({2, 3, 3}, 12);
    const BilinearTensors t = assemble_bilinear_tensors(OuterLayerSplit(net), noack_bilinear(sys));
    for (const Mat& c : t.c) EXPECT_LT((c - c.transpose()).norm(), 1e-14);
    EXPECT_TRUE(t.to_json().contains("c"));
}

TEST(Sparse, MaskedRowsGiveAnExactCheapEncoder) {
    const LtiSystem sys = banded_lti(6);
    ProjAEOptions opt;
    Vec mask = Vec::Zero(6);
    mask(1) = mask(3) = mask(4) = 1.0;
    opt.psi_row_mask = mask;
    const ProjAE net = noisy({2, 3, 6}, 13, opt, 0.02);
    const Vec norms = orthonormal_row_norms(net.pair(1).psi);
    EXPECT_EQ((norms.array() > 1e-12).count(), 3);
    EXPECT_NEAR(norms.squaredNorm(), 3.0, 1e-12);
    const SparseEncoderPlan plan = build_sparse_plan(net, sys);
    EXPECT_EQ(plan.rows, (std::vector<long>{1, 3, 4}));
    EXPECT_EQ(plan.nbrs, (std::vector<long>{0, 1, 2, 3, 4, 5}));
    const Mat z = oracle::gaussian(2, 8, 14);
    const Mat u = Mat::Zero(1, 8);
    const Mat dense = enc_rom_rhs(AutoencoderMap(net), sys, z, u);
    EXPECT_LT((sparse_rom_rhs(plan, sys, z, u) - dense).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(Sparse, TooFewRowsIsAnError) {
    const LtiSystem sys = banded_lti(5);
    ProjAEOptions opt;
    Vec mask = Vec::Zero(5);
    mask(0) = mask(2) = 1.0;
    opt.psi_row_mask = mask;
    // the psi rows can no longer have rank 3, so the representative leaves D+
    EXPECT_ANY_THROW(build_sparse_plan(noisy({2, 3, 5}, 15, opt), sys));
}

TEST(Graph, VerticalProjectionOfPitchfork) {
    const PitchforkSystem sys(0.1, 0.1);
    const GraphMap g([](double s) { return s * s; }, [](double s) { return 2.0 * s; });
    Mat z(1, 3);
    z << -0.5, 0.2, 0.9;
    const Mat rhs = enc_rom_rhs(g, sys, z, Mat(0, 3));
    for (long c = 0; c < 3; ++c) EXPECT_NEAR(rhs(0, c), 0.1 * z(0, c) * (1 - z(0, c) * z(0, c)), 1e-15);
}
