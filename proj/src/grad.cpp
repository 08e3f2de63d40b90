#include "projae/grad.hpp"

#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "projae/error.hpp"

namespace projae {

double ParamGrad::max_abs() const {
    double m = 0.0;
    for (const Mat& b : blocks)
        if (b.size()) m = std::max(m, b.cwiseAbs().maxCoeff());
    return m;
}

bool ParamGrad::all_finite() const {
    for (const Mat& b : blocks)
        if (!b.allFinite()) return false;
    return true;
}

LossGradient vjp_loss(const LossSpec& spec, const Autoencoder& net, const LossBatch& batch) {
    ad::Tape tape(true);
    auto bound = net.bind(tape);
    ad::Var cost = build_total_cost(spec, *bound, tape, batch);
    tape.backward(cost);
    LossGradient out;
    out.value = cost.scalar();
    out.grad.names = net.block_names();
    const auto& leaves = bound->leaves();
    if (leaves.size() != out.grad.names.size()) throw Error("bound network leaves do not match parameter blocks");
    for (const ad::Var& leaf : leaves) {
        const Mat& g = tape.grad(leaf);
        out.grad.blocks.push_back(g.size() ? g : Mat::Zero(leaf.rows(), leaf.cols()));
    }
    return out;
}

double FdReport::max_rel_err() const {
    double m = 0.0;
    for (const FdRow& r : rows) m = std::max(m, r.max_rel_err);
    return m;
}

std::string FdReport::to_text() const {
    std::ostringstream os;
    os << "block,max_rel_err,probes\n";
    for (const FdRow& r : rows) os << r.block << ',' << std::setprecision(6) << std::scientific << r.max_rel_err << ','
                                   << r.probes << '\n';
    return os.str();
}

FdReport fd_check(const LossSpec& spec, const Autoencoder& net, const LossBatch& batch, int probes, double h,
                  std::uint64_t seed) {
    const LossGradient lg = vjp_loss(spec, net, batch);
    const double floor = 1e-3 * lg.grad.max_abs();
    auto work = net.clone();
    std::vector<Mat> base = work->parameters();
    const std::size_t nb = base.size();

    FdReport report;
    for (std::size_t b = 0; b < nb; ++b) report.rows.push_back({lg.grad.names[b], 0.0, 0});

    std::mt19937_64 rng(seed);
    for (int p = 0; p < probes; ++p) {
        const std::size_t b = static_cast<std::size_t>(p) % nb;
        const Mat& blk = base[b];
        if (blk.size() == 0) continue;
        std::uniform_int_distribution<long> pick(0, static_cast<long>(blk.size()) - 1);
        const long idx = pick(rng);
        const double theta = blk.data()[idx];
        const double step = h * std::max(1.0, std::abs(theta));

        std::vector<Mat> plus = base, minus = base;
        plus[b].data()[idx] = theta + step;
        minus[b].data()[idx] = theta - step;
        work->set_parameters(plus);
        const double jp = total_cost(spec, *work, batch);
        work->set_parameters(minus);
        const double jm = total_cost(spec, *work, batch);
        const double fd = (jp - jm) / (2.0 * step);
        const double an = lg.grad.blocks[b].data()[idx];
        const double denom = std::max({std::abs(fd), std::abs(an), floor, 1e-300});
        FdRow& row = report.rows[b];
        row.max_rel_err = std::max(row.max_rel_err, std::abs(fd - an) / denom);
        row.probes += 1;
    }
    return report;
}

}  // namespace projae
