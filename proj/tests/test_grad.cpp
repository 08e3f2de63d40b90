#include <gtest/gtest.h>

#include "oracles.hpp"
#include "projae/ad.hpp"
#include "projae/experiments.hpp"
#include "projae/grad.hpp"

using namespace projae;

namespace {

ProjAE noisy_net(const std::vector<long>& widths, unsigned seed, Activation act = {}) {
    ProjAE net = ProjAE::init(widths, seed, act);
    std::vector<Mat> p = net.parameters();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += 0.2 * oracle::gaussian(p[i].rows(), p[i].cols(), 40 + i);
    net.set_parameters(p);
    return net;
}

}  // namespace

TEST(Tape, QuadraticToyGradient) {
    ad::Tape tape;
    const Mat a = oracle::gaussian(3, 2, 1), x0 = oracle::gaussian(2, 1, 2);
    ad::Var x = tape.variable(x0);
    ad::Var y = ad::sum_squares(ad::matmul(tape.constant(a), x));
    tape.backward(y);
    EXPECT_NEAR(y.scalar(), (a * x0).squaredNorm(), 1e-14);
    EXPECT_LT((tape.grad(x) - 2.0 * a.transpose() * a * x0).norm(), 1e-13);
}

TEST(Tape, InverseNodeMatchesFiniteDifferences) {
    const Mat m0 = oracle::gaussian(3, 3, 3) + 3.0 * Mat::Identity(3, 3);
    const Mat w = oracle::gaussian(3, 3, 4);
    auto f = [&](const Mat& m) { return (w.cwiseProduct(m.inverse())).sum(); };
    ad::Tape tape;
    ad::Var m = tape.variable(m0);
    ad::Var inv = ad::inverse(m);
    ad::Var s = ad::matmul_tn(tape.constant(Mat::Ones(3, 1)), ad::matmul(ad::hadamard(tape.constant(w), inv),
                                                                        tape.constant(Mat::Ones(3, 1))));
    tape.backward(s);
    EXPECT_NEAR(s.scalar(), f(m0), 1e-13);
    const double h = 1e-6;
    for (long i = 0; i < 3; ++i)
        for (long j = 0; j < 3; ++j) {
            Mat e = Mat::Zero(3, 3);
            e(i, j) = h;
            const double fd = (f(m0 + e) - f(m0 - e)) / (2 * h);
            EXPECT_NEAR(tape.grad(m)(i, j), fd, 1e-7);
        }
}

TEST(Tape, NonRecordingTapeOnlyComputesValues) {
    ad::Tape tape(false);
    ad::Var x = tape.variable(Mat::Ones(2, 2));
    ad::Var y = ad::sum_squares(x + x);
    EXPECT_EQ(y.scalar(), 16.0);
}

TEST(VjpLoss, ValueMatchesForwardEvaluation) {
    const ProjAE net = noisy_net({2, 3, 3}, 1);
    const Mat x = oracle::gaussian(3, 20, 2);
    LossSpec spec;
    const LossGradient lg = vjp_loss(spec, net, rec_batch(x));
    EXPECT_EQ(lg.value, total_cost(spec, net, rec_batch(x)));
    EXPECT_TRUE(lg.grad.all_finite());
    EXPECT_EQ(lg.grad.names, net.block_names());
}

TEST(VjpLoss, ZeroDataGivesZeroGradient) {
    const ProjAE net = ProjAE::init({2, 3, 3}, 3);
    LossSpec spec;
    spec.beta = 0.0;
    const LossGradient lg = vjp_loss(spec, net, rec_batch(Mat::Zero(3, 5)));
    EXPECT_LT(lg.value, 1e-30);
    EXPECT_LT(lg.grad.max_abs(), 1e-14);
}

TEST(VjpLoss, OneLayerLinearClosedForm) {
    Activation id;
    id.kind = ActKind::Identity;
    const ProjAE net = noisy_net({1, 2}, 5, id);
    const Vec x = oracle::gaussian(2, 1, 6);
    LossSpec spec;
    spec.beta = 0.0;
    const LossGradient lg = vjp_loss(spec, net, rec_batch(x));

    const Vec pt = net.layer(0).rep.phi_t.col(0), qt = net.layer(0).rep.psi_t.col(0);
    const Vec b = net.layer(0).bias;
    const double m = qt.dot(pt);
    const Vec y = x - b;
    const double s = qt.dot(y);
    const Vec e = y - pt * s / m;
    const double ep = e.dot(pt);
    const Vec g_phi = -2.0 * s * e / m + 2.0 * ep * s * qt / (m * m);
    const Vec g_psi = -2.0 * ep * y / m + 2.0 * ep * s * pt / (m * m);
    const Mat proj = pt * qt.transpose() / m;
    const Vec g_b = -2.0 * (Mat::Identity(2, 2) - proj).transpose() * e;
    EXPECT_NEAR(lg.value, e.squaredNorm(), 1e-14);
    EXPECT_LT((lg.grad.blocks[0] - g_phi).norm(), 1e-12);
    EXPECT_LT((lg.grad.blocks[1] - g_psi).norm(), 1e-12);
    EXPECT_LT((lg.grad.blocks[2] - g_b).norm(), 1e-12);
}

TEST(VjpLoss, GradientIsOrthogonalToTheFiber) {
    const ProjAE net = noisy_net({2, 3, 3}, 7);
    const Mat x = oracle::gaussian(3, 30, 8);
    LossSpec spec;
    spec.beta = 0.0;
    const LossGradient lg = vjp_loss(spec, net, rec_batch(x));
    const double gnorm = lg.grad.max_abs();
    ASSERT_GT(gnorm, 1e-6);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const Mat a = Mat::Identity(net.widths()[l], net.widths()[l]) +
                      1e-4 * oracle::gaussian(net.widths()[l], net.widths()[l], 9 + l);
        ProjAE moved = net;
        moved.layer(l).rep.phi_t = net.layer(l).rep.phi_t * a;
        const double d0 = rec_loss(net, x), d1 = rec_loss(moved, x);
        EXPECT_NEAR(d1, d0, 1e-12 * d0);
        // directional derivative along phi~ (A - I)
        const Mat dir = net.layer(l).rep.phi_t * (a - Mat::Identity(a.rows(), a.cols()));
        const double inner = lg.grad.blocks[3 * l].cwiseProduct(dir).sum();
        EXPECT_LT(std::abs(inner), 1e-10 * gnorm * dir.norm());
    }
}

TEST(FdCheck, RecGapRvpOnNoackShapedNet) {
    const NoackSystem sys;
    const auto net = noack_net(true, 11);
    std::vector<Mat> p = net->parameters();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += 0.2 * oracle::gaussian(p[i].rows(), p[i].cols(), 70 + i);
    net->set_parameters(p);
    const auto trajs = simulate_set(sys, uniform_cube(3, 12), 2.0, 0.1);
    const Mat states = stack_states(trajs);
    LossSpec rec;
    EXPECT_LT(fd_check(rec, *net, rec_batch(states)).max_rel_err(), 1e-5);
    LossSpec gap;
    gap.kind = LossKind::Gap;
    EXPECT_LT(fd_check(gap, *net, gap_batch(gradient_set(sys, trajs, 5, 10, 1))).max_rel_err(), 1e-5);
    LossSpec rvp;
    rvp.kind = LossKind::Rvp;
    rvp.rvp.horizon = 2.0;
    const FdReport r = fd_check(rvp, *net, rvp_batch(sys, pointers(trajs)));
    EXPECT_LT(r.max_rel_err(), 1e-4);
    int probes = 0;
    for (const FdRow& row : r.rows) probes += row.probes;
    EXPECT_EQ(probes, 32);
}

TEST(FdCheck, DeterministicAndStandAE) {
    const auto net = noack_net(false, 4);
    const Mat x = oracle::gaussian(3, 12, 1);
    LossSpec spec;
    const FdReport a = fd_check(spec, *net, rec_batch(x), 16, 1e-5, 3);
    const FdReport b = fd_check(spec, *net, rec_batch(x), 16, 1e-5, 3);
    EXPECT_EQ(a.to_text(), b.to_text());
    EXPECT_LT(a.max_rel_err(), 1e-5);
}

TEST(FdCheck, SparsityPenaltyAwayFromKinks) {
    const ProjAE net = noisy_net({2, 3, 5}, 13);
    const Mat x = oracle::gaussian(5, 10, 14);
    LossSpec spec;
    spec.sparsity_gamma = 0.3;
    EXPECT_LT(fd_check(spec, net, rec_batch(x)).max_rel_err(), 1e-5);
}
