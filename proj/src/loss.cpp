#include "projae/loss.hpp"

#include <cmath>

#include "projae/error.hpp"

namespace projae {

using ad::Tape;
using ad::Var;

double weight_fn(double t, double lipschitz, double tf) {
    if (t > tf * (1.0 + 1e-12) + 1e-14) throw Error("weight_fn: t exceeds the horizon");
    if (t < 0.0) throw Error("weight_fn: negative time");
    const double a = 2.0 * lipschitz;
    if (lipschitz * tf < 1e-4) {
        const double t2 = tf * tf - t * t;
        const double t3 = tf * tf * tf - t * t * t;
        const double t4 = tf * tf * tf * tf - t * t * t * t;
        const double t5 = std::pow(tf, 5) - std::pow(t, 5);
        return t2 / 2.0 + a * t3 / 6.0 + a * a * t4 / 24.0 + a * a * a * t5 / 120.0;
    }
    const double xf = a * tf, xt = a * t;
    const double num = (std::expm1(xf) - xf) - (std::expm1(xt) - xt);
    return std::max(0.0, num / (a * a));
}

const char* loss_name(LossKind kind) {
    switch (kind) {
        case LossKind::Rec: return "rec";
        case LossKind::Rvp: return "rvp";
        case LossKind::Gap: return "gap";
    }
    return "rec";
}

LossKind loss_from_name(const std::string& name) {
    if (name == "rec" || name == "Rec") return LossKind::Rec;
    if (name == "rvp" || name == "RVP") return LossKind::Rvp;
    if (name == "gap" || name == "GAP") return LossKind::Gap;
    throw ConfigError("unknown loss: " + name);
}

long LossBatch::count() const {
    if (!trajectories.empty()) return static_cast<long>(trajectories.size());
    return states.cols();
}

LossBatch rec_batch(Mat states) {
    LossBatch b;
    b.states = std::move(states);
    return b;
}

LossBatch gap_batch(const std::vector<GradientSample>& samples) {
    LossBatch b;
    if (samples.empty()) return b;
    const long n = samples.front().base.size();
    b.states.resize(n, static_cast<long>(samples.size()));
    b.grads.resize(n, static_cast<long>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        b.states.col(static_cast<long>(i)) = samples[i].base;
        b.grads.col(static_cast<long>(i)) = samples[i].grad;
    }
    return b;
}

LossBatch rvp_batch(const FomSystem& sys, std::vector<const Trajectory*> trajs) {
    LossBatch b;
    b.system = &sys;
    b.trajectories = std::move(trajs);
    return b;
}

namespace {

Var rec_objective(BoundNet& net, Tape& tape, const Mat& states) {
    if (states.cols() == 0) throw Error("rec loss on an empty batch");
    Var x = tape.constant(states);
    Var e = x - net.decode(net.encode(x));
    return ad::weighted_sum_squares(e, Vec::Constant(states.cols(), 1.0 / static_cast<double>(states.cols())));
}

Var gap_objective(BoundNet& net, Tape& tape, const Mat& bases, const Mat& grads) {
    if (bases.cols() == 0) throw Error("gap loss on an empty batch");
    if (grads.rows() != bases.rows() || grads.cols() != bases.cols()) throw ShapeError("gap batch shape mismatch");
    Var x = tape.constant(bases);
    Var e = x - net.decode(net.encode(x));
    Var d = ad::col_dots(tape.constant(grads), e);
    return ad::weighted_sum_squares(d, Vec::Constant(bases.cols(), 1.0 / static_cast<double>(bases.cols())));
}

Var rvp_objective(BoundNet& net, Tape& tape, const LossBatch& batch, const RvpConfig& cfg) {
    if (batch.trajectories.empty()) throw Error("rvp loss on an empty batch");
    if (batch.system == nullptr) throw Error("rvp loss needs the full-order system");
    const FomSystem& sys = *batch.system;
    const double tf = cfg.horizon;
    const double lip = cfg.effective_lipschitz();

    // Stack the time samples of every trajectory inside the horizon.
    long total = 0;
    std::vector<long> counts;
    for (const Trajectory* tr : batch.trajectories) {
        if (tr->derivs.rows() != tr->size()) throw Error("rvp loss needs trajectories with stored derivatives");
        long c = 0;
        while (c < tr->size() && tr->times(c) - tr->times(0) <= tf * (1.0 + 1e-12)) ++c;
        if (c < 2) throw Error("rvp loss: trajectory shorter than two samples");
        counts.push_back(c);
        total += c;
    }
    const long n = sys.state_dim();
    const long du = sys.input_dim();
    Mat x(n, total), xdot(n, total), u(du, total);
    Vec c_out(total), c_vel(total);
    const double ntraj = static_cast<double>(batch.trajectories.size());
    long col = 0;
    for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
        const Trajectory& tr = *batch.trajectories[i];
        const long c = counts[i];
        x.middleCols(col, c) = tr.states.topRows(c).transpose();
        xdot.middleCols(col, c) = tr.derivs.topRows(c).transpose();
        if (du > 0) u.middleCols(col, c) = tr.inputs.topRows(c).transpose();
        for (long k = 0; k < c; ++k) {
            const double dt_left = k > 0 ? tr.times(k) - tr.times(k - 1) : 0.0;
            const double dt_right = k + 1 < c ? tr.times(k + 1) - tr.times(k) : 0.0;
            const double tau = 0.5 * (dt_left + dt_right);
            const double s = std::min(tr.times(k) - tr.times(0), tf);
            c_out(col + k) = tau / (tf * ntraj);
            c_vel(col + k) = cfg.gamma * weight_fn(s, lip, tf) * tau / (tf * ntraj);
        }
        col += c;
    }
    const Mat y = sys.g_batch(x);
    if (cfg.normalize) {
        c_out /= std::max(1e-300, y.colwise().squaredNorm().mean());
        c_vel /= std::max(1e-300, xdot.colwise().squaredNorm().mean());
    }

    Var xv = tape.constant(x);
    auto [z, dz] = net.encode_jvp(xv, tape.constant(xdot));
    auto [xp, dp_xdot] = net.decode_jvp(z, dz);

    Var fx = ad::external(xp, sys.f_batch(xp.value(), u), "fom_rhs",
                          [&sys, u](const Mat& xx, const Mat& g) { return sys.vjp_f_batch(xx, u, g); });
    auto [z2, dz2] = net.encode_jvp(xp, fx);
    Var dp_f = net.decode_jvp(z2, dz2).second;

    Var yp = ad::external(xp, sys.g_batch(xp.value()), "fom_output",
                          [&sys](const Mat& xx, const Mat& g) { return sys.vjp_g_batch(xx, g); });
    Var out_err = tape.constant(y) - yp;
    Var vel_err = dp_xdot - dp_f;
    return ad::weighted_sum_squares(out_err, c_out) + ad::weighted_sum_squares(vel_err, c_vel);
}

}  // namespace

Var build_objective(const LossSpec& spec, BoundNet& net, Tape& tape, const LossBatch& batch) {
    switch (spec.kind) {
        case LossKind::Rec: return rec_objective(net, tape, batch.states);
        case LossKind::Gap: return gap_objective(net, tape, batch.states, batch.grads);
        case LossKind::Rvp: return rvp_objective(net, tape, batch, spec.rvp);
    }
    throw Error("unknown loss kind");
}

Var build_total_cost(const LossSpec& spec, BoundNet& net, Tape& tape, const LossBatch& batch) {
    Var cost = build_objective(spec, net, tape, batch);
    if (spec.beta != 0.0) {
        if (auto reg = net.regularizer()) cost = cost + spec.beta * *reg;
    }
    if (spec.sparsity_gamma != 0.0) {
        auto psi = net.last_psi();
        if (!psi) throw Error("row-sparsity penalty needs a constrained network");
        SparsityValue sv = grassmann_row_sparsity(psi->value());
        cost = cost + spec.sparsity_gamma * ad::custom_scalar(*psi, sv.value, std::move(sv.grad), "row_sparsity");
    }
    return cost;
}

double evaluate_objective(const LossSpec& spec, const Autoencoder& net, const LossBatch& batch) {
    Tape tape(false);
    auto bound = net.bind(tape);
    return build_objective(spec, *bound, tape, batch).scalar();
}

double total_cost(const LossSpec& spec, const Autoencoder& net, const LossBatch& batch) {
    Tape tape(false);
    auto bound = net.bind(tape);
    return build_total_cost(spec, *bound, tape, batch).scalar();
}

double rec_loss(const Autoencoder& net, const Mat& states) {
    return evaluate_objective(LossSpec{LossKind::Rec}, net, rec_batch(states));
}

double gap_loss(const Autoencoder& net, const Mat& bases, const Mat& grads) {
    LossBatch b;
    b.states = bases;
    b.grads = grads;
    return evaluate_objective(LossSpec{LossKind::Gap}, net, b);
}

double rvp_loss(const Autoencoder& net, const FomSystem& sys, const std::vector<const Trajectory*>& trajs,
                const RvpConfig& cfg) {
    LossSpec spec;
    spec.kind = LossKind::Rvp;
    spec.rvp = cfg;
    return evaluate_objective(spec, net, rvp_batch(sys, trajs));
}

}  // namespace projae
