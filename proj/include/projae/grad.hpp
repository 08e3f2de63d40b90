#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "projae/loss.hpp"

namespace projae {

struct ParamGrad {
    std::vector<std::string> names;
    std::vector<Mat> blocks;

    double max_abs() const;
    bool all_finite() const;
};

struct LossGradient {
    double value = 0.0;
    ParamGrad grad;
};

// Total cost and its gradient with respect to every parameter block of net.
LossGradient vjp_loss(const LossSpec& spec, const Autoencoder& net, const LossBatch& batch);

struct FdRow {
    std::string block;
    double max_rel_err = 0.0;
    int probes = 0;
};

struct FdReport {
    std::vector<FdRow> rows;
    double max_rel_err() const;
    std::string to_text() const;
};

// Central differences on `probes` coordinates spread round-robin over the
// parameter blocks; step h * max(1, |theta_i|). Errors are relative to
// max(|fd|, |analytic|, 1e-3 max|grad|).
FdReport fd_check(const LossSpec& spec, const Autoencoder& net, const LossBatch& batch, int probes = 32,
                  double h = 1e-5, std::uint64_t seed = 0);

}  // namespace projae
