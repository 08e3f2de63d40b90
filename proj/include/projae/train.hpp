#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "projae/loss.hpp"

namespace projae {

struct AdamConfig {
    double b1 = 0.9;
    double b2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(AdamConfig cfg, const std::vector<Mat>& shapes);
    void step(std::vector<Mat>& params, const std::vector<Mat>& grads, double lr);
    long steps() const { return t_; }

private:
    AdamConfig cfg_;
    std::vector<Mat> m_, v_;
    long t_ = 0;
};

struct PlateauConfig {
    int patience = 50;
    double factor = 0.1;
    double min_lr = 1e-8;
};

// Reduces the rate by `factor` once the monitored value has failed to improve
// strictly for more than `patience` consecutive steps.
class PlateauScheduler {
public:
    PlateauScheduler(double lr0, PlateauConfig cfg);
    double step(double metric);
    double lr() const { return lr_; }
    int bad_steps() const { return bad_; }

private:
    double lr_;
    PlateauConfig cfg_;
    double best_;
    int bad_ = 0;
};

struct TrainConfig {
    int epochs = 900;
    double lr0 = 1e-3;
    PlateauConfig plateau{};
    int batch_size = 400;
    int traj_batch = 2;
    double beta = 1e-5;
    std::uint64_t seed = 0;
    AdamConfig adam{};
    bool validation_includes_beta = false;
    // When positive, the rate decays geometrically from lr0 to lr_final over the
    // run instead of following the plateau schedule.
    double lr_final = 0.0;
    // Return the final parameters instead of the best-by-validation ones.
    bool keep_last = false;
    // Written when non-empty: curve CSV and best checkpoint.
    std::string out_dir;
    std::string tag = "session";
};

struct EpochRecord {
    int epoch = 0;
    double train = 0.0;
    double valid = 0.0;
    double lr = 0.0;
};

struct SessionResult {
    std::unique_ptr<Autoencoder> best;
    double best_valid = 0.0;
    int best_epoch = 0;
    std::vector<EpochRecord> curve;
    bool diverged = false;
    std::string diagnostic;
    double min_det = 0.0;  // smallest det(psi~^T phi~) seen at epoch ends (ProjAE only)
    std::string checkpoint_path;
    std::string curve_path;
};

struct TrainData {
    LossBatch train;
    LossBatch valid;
};

// Algorithm: shuffled minibatches, total cost with beta-regularizer, Adam,
// per-epoch validation, plateau schedule, best-by-validation checkpoint.
SessionResult train_session(const Autoencoder& net0, const LossSpec& spec, const TrainData& data,
                            const TrainConfig& cfg);

std::string curve_csv(const std::vector<EpochRecord>& curve);

struct SeedRun {
    std::uint64_t seed = 0;
    SessionResult session;
    double metric = 0.0;
};

struct MultiSeedResult {
    std::vector<SeedRun> runs;
    std::size_t best_index = 0;
    const SeedRun& best() const { return runs[best_index]; }
};

using NetFactory = std::function<std::unique_ptr<Autoencoder>(std::uint64_t seed)>;
using SelectionMetric = std::function<double(const Autoencoder&)>;

// Trains one session per seed and keeps the one with the smallest metric
// (non-finite metrics rank last).
MultiSeedResult multi_seed(const std::vector<std::uint64_t>& seeds, const NetFactory& factory, const LossSpec& spec,
                           const TrainData& data, const TrainConfig& cfg, const SelectionMetric& metric);

}  // namespace projae
