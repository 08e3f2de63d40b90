#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "oracles.hpp"
#include "projae/error.hpp"
#include "projae/experiments.hpp"
#include "projae/train.hpp"

using namespace projae;

TEST(Adam, MatchesScalarLoop) {
    // f(t) = (t - 3)^2 starting at t = 0
    std::vector<Mat> p{Mat::Zero(1, 1)};
    Adam adam(AdamConfig{}, p);
    double t = 0.0, m = 0.0, v = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double g = 2.0 * (t - 3.0);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1.0 - std::pow(0.9, k)), vh = v / (1.0 - std::pow(0.999, k));
        t -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
        adam.step(p, {Mat::Constant(1, 1, 2.0 * (p[0](0, 0) - 3.0))}, 0.05);
        ASSERT_NEAR(p[0](0, 0), t, 1e-14) << "step " << k;
    }
    EXPECT_EQ(adam.steps(), 200);
}

TEST(Adam, FirstStepMovesByTheRate) {
    std::vector<Mat> p{Mat::Zero(2, 1)};
    Adam adam(AdamConfig{}, p);
    Mat g(2, 1);
    g << 5.0, -1e-3;
    adam.step(p, {g}, 0.01);
    EXPECT_NEAR(p[0](0, 0), -0.01, 1e-9);
    EXPECT_NEAR(p[0](1, 0), 0.01, 1e-7);
    EXPECT_THROW(adam.step(p, {}, 0.01), ShapeError);
}

TEST(Plateau, ReducesAfterPatience) {
    PlateauScheduler s(1.0, PlateauConfig{2, 0.1, 1e-3});
    EXPECT_EQ(s.step(5.0), 1.0);
    EXPECT_EQ(s.step(5.0), 1.0);
    EXPECT_EQ(s.step(6.0), 1.0);
    EXPECT_NEAR(s.step(5.0), 0.1, 1e-15);  // third non-improvement exceeds patience 2
    EXPECT_EQ(s.bad_steps(), 0);
    EXPECT_NEAR(s.step(4.0), 0.1, 1e-15);
    for (int i = 0; i < 20; ++i) s.step(4.0);
    EXPECT_NEAR(s.lr(), 1e-3, 1e-15);
    EXPECT_THROW(PlateauScheduler(1.0, PlateauConfig{2, 1.5, 0.0}), ConfigError);
}

namespace {

TrainData line_data() {
    // points on the line spanned by (1, 2, 2) plus a small offset
    const Mat dir = (Mat(3, 1) << 1, 2, 2).finished() / 3.0;
    const Mat x = dir * oracle::gaussian(1, 200, 1) + 0.01 * oracle::gaussian(3, 200, 2);
    TrainData d;
    d.train = rec_batch(x.leftCols(150));
    d.valid = rec_batch(x.rightCols(50));
    return d;
}

}  // namespace

TEST(TrainSession, ReducesLossAndTracksBest) {
    const ProjAE net = linear_projae(3, 1, 4);
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.lr0 = 1e-2;
    cfg.batch_size = 50;
    const TrainData data = line_data();
    const SessionResult r = train_session(net, LossSpec{}, data, cfg);
    ASSERT_FALSE(r.diverged) << r.diagnostic;
    EXPECT_EQ(r.curve.size(), 61u);
    EXPECT_LT(r.best_valid, 0.2 * r.curve.front().valid);
    double best = r.curve.front().valid;
    for (const auto& e : r.curve) best = std::min(best, e.valid);
    EXPECT_EQ(r.best_valid, best);
    EXPECT_EQ(rec_loss(*r.best, data.valid.states), r.best_valid);
    EXPECT_GT(r.min_det, 0.0);
}

TEST(TrainSession, DeterministicPerSeed) {
    const ProjAE net = linear_projae(3, 1, 4);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 40;
    cfg.seed = 9;
    const TrainData data = line_data();
    const SessionResult a = train_session(net, LossSpec{}, data, cfg), b = train_session(net, LossSpec{}, data, cfg);
    EXPECT_EQ(a.best_valid, b.best_valid);
    EXPECT_EQ(curve_csv(a.curve), curve_csv(b.curve));
}

TEST(TrainSession, DivergenceIsReportedNotThrown) {
    const ProjAE net = linear_projae(3, 1, 4);
    TrainData data = line_data();
    data.train.states(0, 3) = std::numeric_limits<double>::infinity();
    TrainConfig cfg;
    cfg.epochs = 3;
    const SessionResult r = train_session(net, LossSpec{}, data, cfg);
    EXPECT_TRUE(r.diverged);
    EXPECT_FALSE(r.diagnostic.empty());
    ASSERT_TRUE(r.best);
}

TEST(TrainSession, WritesCurveAndCheckpoint) {
    const auto dir = std::filesystem::temp_directory_path() / "projae_train_test";
    std::filesystem::remove_all(dir);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.out_dir = dir.string();
    cfg.tag = "t";
    const SessionResult r = train_session(linear_projae(3, 1, 1), LossSpec{}, line_data(), cfg);
    EXPECT_TRUE(std::filesystem::exists(r.curve_path));
    const auto back = load_checkpoint(r.checkpoint_path);
    EXPECT_EQ(back->parameters()[0], r.best->parameters()[0]);
    std::filesystem::remove_all(dir);
}

TEST(MultiSeed, PicksSmallestMetricAndRanksNonFiniteLast) {
    TrainConfig cfg;
    cfg.epochs = 3;
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    auto factory = [](std::uint64_t s) { return std::make_unique<ProjAE>(linear_projae(3, 1, s)); };
    int calls = 0;
    auto metric = [&calls](const Autoencoder&) {
        ++calls;
        return calls == 1 ? std::numeric_limits<double>::quiet_NaN() : (calls == 2 ? 0.5 : 0.7);
    };
    const MultiSeedResult r = multi_seed(seeds, factory, LossSpec{}, line_data(), cfg, metric);
    EXPECT_EQ(r.best().seed, 2u);
    EXPECT_THROW(multi_seed({}, factory, LossSpec{}, line_data(), cfg, metric), ConfigError);
}
