#pragma once

#include <vector>

#include "projae/ad.hpp"
#include "projae/dyn.hpp"
#include "projae/net.hpp"

namespace projae {

struct RvpConfig {
    double gamma = 1.0;
    // Negative means "use 1/horizon".
    double lipschitz = -1.0;
    double horizon = 20.0;
    // Divide the output and velocity terms by the batch-mean of ||y||^2 and ||x'||^2.
    bool normalize = false;

    double effective_lipschitz() const { return lipschitz < 0.0 ? 1.0 / horizon : lipschitz; }
};

// [(e^{2 L tf} - 2 L tf) - (e^{2 L t} - 2 L t)] / (4 L^2), series for L tf < 1e-4.
double weight_fn(double t, double lipschitz, double tf);

enum class LossKind { Rec, Rvp, Gap };

const char* loss_name(LossKind kind);
LossKind loss_from_name(const std::string& name);

struct LossSpec {
    LossKind kind = LossKind::Rec;
    RvpConfig rvp{};
    double beta = 1e-5;
    double sparsity_gamma = 0.0;  // weight of the row-sparsity penalty on psi_L
};

// Rec: states (n x B). Gap: states are the base points and grads the gradient
// samples (both n x s). Rvp: trajectories carrying derivs.
struct LossBatch {
    Mat states;
    Mat grads;
    std::vector<const Trajectory*> trajectories;
    const FomSystem* system = nullptr;

    long count() const;
};

LossBatch rec_batch(Mat states);
LossBatch gap_batch(const std::vector<GradientSample>& samples);
LossBatch rvp_batch(const FomSystem& sys, std::vector<const Trajectory*> trajs);

// Objective J only (no regularizers).
ad::Var build_objective(const LossSpec& spec, BoundNet& net, ad::Tape& tape, const LossBatch& batch);
// J + beta * sum_l R_l + gamma * R_{1,2}(psi_L)
ad::Var build_total_cost(const LossSpec& spec, BoundNet& net, ad::Tape& tape, const LossBatch& batch);

double evaluate_objective(const LossSpec& spec, const Autoencoder& net, const LossBatch& batch);
double total_cost(const LossSpec& spec, const Autoencoder& net, const LossBatch& batch);

double rec_loss(const Autoencoder& net, const Mat& states);
double gap_loss(const Autoencoder& net, const Mat& bases, const Mat& grads);
double rvp_loss(const Autoencoder& net, const FomSystem& sys, const std::vector<const Trajectory*>& trajs,
                const RvpConfig& cfg);

}  // namespace projae
