#include "projae/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "projae/error.hpp"
#include "projae/grad.hpp"

namespace projae {

Adam::Adam(AdamConfig cfg, const std::vector<Mat>& shapes) : cfg_(cfg) {
    for (const Mat& s : shapes) {
        m_.push_back(Mat::Zero(s.rows(), s.cols()));
        v_.push_back(Mat::Zero(s.rows(), s.cols()));
    }
}

void Adam::step(std::vector<Mat>& params, const std::vector<Mat>& grads, double lr) {
    if (params.size() != m_.size() || grads.size() != m_.size()) throw ShapeError("Adam: block count mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = cfg_.b1 * m_[i] + (1.0 - cfg_.b1) * grads[i];
        v_[i] = cfg_.b2 * v_[i] + (1.0 - cfg_.b2) * grads[i].cwiseProduct(grads[i]);
        params[i].array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
    }
}

PlateauScheduler::PlateauScheduler(double lr0, PlateauConfig cfg)
    : lr_(lr0), cfg_(cfg), best_(std::numeric_limits<double>::infinity()) {
    if (!(cfg.factor > 0.0 && cfg.factor < 1.0)) throw ConfigError("plateau factor must lie in (0, 1)");
}

double PlateauScheduler::step(double metric) {
    if (metric < best_) {
        best_ = metric;
        bad_ = 0;
    } else if (++bad_ > cfg_.patience) {
        lr_ = std::max(cfg_.min_lr, lr_ * cfg_.factor);
        bad_ = 0;
    }
    return lr_;
}

namespace {

std::vector<LossBatch> make_minibatches(const LossSpec& spec, const LossBatch& full, const TrainConfig& cfg,
                                        std::mt19937_64& rng) {
    std::vector<LossBatch> out;
    if (spec.kind == LossKind::Rvp) {
        std::vector<std::size_t> idx(full.trajectories.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t s = 0; s < idx.size(); s += static_cast<std::size_t>(cfg.traj_batch)) {
            LossBatch b;
            b.system = full.system;
            for (std::size_t k = s; k < std::min(idx.size(), s + static_cast<std::size_t>(cfg.traj_batch)); ++k)
                b.trajectories.push_back(full.trajectories[idx[k]]);
            out.push_back(std::move(b));
        }
        return out;
    }
    const long count = full.states.cols();
    std::vector<long> idx(static_cast<std::size_t>(count));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (long s = 0; s < count; s += cfg.batch_size) {
        const long e = std::min(count, s + cfg.batch_size);
        LossBatch b;
        b.system = full.system;
        b.states.resize(full.states.rows(), e - s);
        if (spec.kind == LossKind::Gap) b.grads.resize(full.grads.rows(), e - s);
        for (long k = s; k < e; ++k) {
            b.states.col(k - s) = full.states.col(idx[static_cast<std::size_t>(k)]);
            if (spec.kind == LossKind::Gap) b.grads.col(k - s) = full.grads.col(idx[static_cast<std::size_t>(k)]);
        }
        out.push_back(std::move(b));
    }
    return out;
}

double min_rep_det(const Autoencoder& net) {
    const auto* p = dynamic_cast<const ProjAE*>(&net);
    if (p == nullptr) return std::numeric_limits<double>::quiet_NaN();
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < p->num_layers(); ++l) {
        const PairRep rep = p->effective_rep(l);
        m = std::min(m, (rep.psi_t.transpose() * rep.phi_t).determinant());
    }
    return m;
}

}  // namespace

std::string curve_csv(const std::vector<EpochRecord>& curve) {
    std::ostringstream os;
    os << "epoch,train,valid,lr\n" << std::setprecision(17);
    for (const EpochRecord& r : curve) os << r.epoch << ',' << r.train << ',' << r.valid << ',' << r.lr << '\n';
    return os.str();
}

SessionResult train_session(const Autoencoder& net0, const LossSpec& spec, const TrainData& data,
                            const TrainConfig& cfg) {
    if (cfg.epochs < 0) throw ConfigError("epochs must be nonnegative");
    if (data.train.count() == 0) throw Error("empty training set");
    LossSpec tspec = spec;
    tspec.beta = cfg.beta;
    LossSpec vspec = tspec;
    if (!cfg.validation_includes_beta) {
        vspec.beta = 0.0;
        vspec.sparsity_gamma = 0.0;
    }
    const LossBatch& valid = data.valid.count() > 0 ? data.valid : data.train;

    auto net = net0.clone();
    std::vector<Mat> params = net->parameters();
    Adam adam(cfg.adam, params);
    PlateauScheduler sched(cfg.lr0, cfg.plateau);
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    SessionResult res;
    res.min_det = min_rep_det(*net);
    try {
        EpochRecord e0;
        e0.epoch = 0;
        e0.train = total_cost(tspec, *net, data.train);
        e0.valid = total_cost(vspec, *net, valid);
        e0.lr = sched.lr();
        if (!std::isfinite(e0.valid)) throw DivergedError("non-finite validation loss at initialization");
        res.curve.push_back(e0);
        res.best = net->clone();
        res.best_valid = e0.valid;
        res.best_epoch = 0;

        for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
            double lr = sched.lr();
            if (cfg.lr_final > 0.0) {
                const double frac = cfg.epochs > 1 ? static_cast<double>(epoch - 1) / (cfg.epochs - 1) : 1.0;
                lr = cfg.lr0 * std::pow(cfg.lr_final / cfg.lr0, frac);
            }
            double acc = 0.0;
            long weight = 0;
            for (const LossBatch& mb : make_minibatches(tspec, data.train, cfg, rng)) {
                LossGradient lg = vjp_loss(tspec, *net, mb);
                if (!std::isfinite(lg.value) || !lg.grad.all_finite())
                    throw DivergedError("non-finite loss or gradient in epoch " + std::to_string(epoch));
                adam.step(params, lg.grad.blocks, lr);
                net->set_parameters(params);
                acc += lg.value * static_cast<double>(mb.count());
                weight += mb.count();
            }
            EpochRecord rec;
            rec.epoch = epoch;
            rec.train = acc / static_cast<double>(weight);
            rec.valid = total_cost(vspec, *net, valid);
            rec.lr = lr;
            if (!std::isfinite(rec.valid)) throw DivergedError("non-finite validation loss in epoch " + std::to_string(epoch));
            res.curve.push_back(rec);
            res.min_det = std::min(res.min_det, min_rep_det(*net));
            if (rec.valid < res.best_valid) {
                res.best_valid = rec.valid;
                res.best_epoch = epoch;
                res.best = net->clone();
            }
            sched.step(rec.valid);
        }
        if (cfg.keep_last) {
            res.best = net->clone();
            res.best_valid = res.curve.back().valid;
            res.best_epoch = res.curve.back().epoch;
        }
    } catch (const Error& err) {
        res.diverged = true;
        res.diagnostic = err.what();
        if (!res.best) res.best = net0.clone();
    }

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        res.curve_path = (std::filesystem::path(cfg.out_dir) / (cfg.tag + "_curve.csv")).string();
        res.checkpoint_path = (std::filesystem::path(cfg.out_dir) / (cfg.tag + "_best.json")).string();
        std::ofstream(res.curve_path) << curve_csv(res.curve);
        save_checkpoint(*res.best, res.checkpoint_path);
    }
    return res;
}

MultiSeedResult multi_seed(const std::vector<std::uint64_t>& seeds, const NetFactory& factory, const LossSpec& spec,
                           const TrainData& data, const TrainConfig& cfg, const SelectionMetric& metric) {
    if (seeds.empty()) throw ConfigError("multi_seed needs at least one seed");
    MultiSeedResult out;
    out.runs.resize(seeds.size());
    auto run_one = [&](std::size_t i) {
        TrainConfig c = cfg;
        c.seed = seeds[i];
        c.tag = cfg.tag + "_seed" + std::to_string(seeds[i]);
        auto net0 = factory(seeds[i]);
        SeedRun run;
        run.seed = seeds[i];
        run.session = train_session(*net0, spec, data, c);
        run.metric = metric ? metric(*run.session.best) : run.session.best_valid;
        out.runs[i] = std::move(run);
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (hw == 1 || seeds.size() == 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i) run_one(i);
    } else {
        for (std::size_t start = 0; start < seeds.size(); start += hw) {
            std::vector<std::future<void>> jobs;
            for (std::size_t i = start; i < std::min(seeds.size(), start + hw); ++i)
                jobs.push_back(std::async(std::launch::async, run_one, i));
            for (auto& j : jobs) j.get();
        }
    }
    auto rank = [](double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); };
    for (std::size_t i = 1; i < out.runs.size(); ++i)
        if (rank(out.runs[i].metric) < rank(out.runs[out.best_index].metric)) out.best_index = i;
    return out;
}

}  // namespace projae
