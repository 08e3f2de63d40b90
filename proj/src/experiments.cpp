#include "projae/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include <unsupported/Eigen/LevenbergMarquardt>
#include <unsupported/Eigen/MatrixFunctions>
#include <unsupported/Eigen/NumericalDiff>

#include "projae/error.hpp"

namespace projae {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double rank_value(double v) { return std::isfinite(v) ? v : kInf; }

// Least-squares slope of log(err) against t on [ta, tb].
double fitted_decay_rate(const Vec& t, const Vec& err, double ta, double tb) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long n = 0;
    for (Eigen::Index k = 0; k < t.size(); ++k) {
        if (t(k) < ta || t(k) > tb || !(err(k) > 0.0)) continue;
        const double y = std::log(err(k));
        sx += t(k);
        sy += y;
        sxx += t(k) * t(k);
        sxy += t(k) * y;
        ++n;
    }
    if (n < 2) throw Error("too few points to fit a decay rate");
    return -(n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double trapezoid_l2(const Vec& diff, double dt) {
    const Vec sq = diff.array().square();
    return std::sqrt(dt * (sq.sum() - 0.5 * (sq(0) + sq(sq.size() - 1))));
}

}  // namespace

Mat noack_initial_grid(GridKind kind) {
    std::vector<double> axis;
    if (kind == GridKind::Fine) {
        const Vec a = Vec::LinSpaced(10, -1.0, 1.0);
        axis.assign(a.data(), a.data() + a.size());
    } else {
        axis = {-1.0, -1.0 / 3.0, -1.0 / 9.0, 1.0 / 9.0, 1.0 / 3.0, 1.0};
    }
    const auto m = static_cast<Eigen::Index>(axis.size());
    Mat ics(3, m * m * m);
    Eigen::Index k = 0;
    for (double a : axis)
        for (double b : axis)
            for (double c : axis) ics.col(k++) << a, b, c;
    return ics;
}

Mat uniform_cube(long count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Mat ics(3, count);
    for (long j = 0; j < count; ++j)
        for (long i = 0; i < 3; ++i) ics(i, j) = unif(rng);
    return ics;
}

std::vector<Trajectory> simulate_set(const FomSystem& sys, const Mat& ics, double tf, double dt) {
    std::vector<Trajectory> out;
    out.reserve(static_cast<std::size_t>(ics.cols()));
    for (Eigen::Index j = 0; j < ics.cols(); ++j) out.push_back(rk4(sys, ics.col(j), 0.0, tf, dt));
    return out;
}

Mat stack_states(const std::vector<Trajectory>& trajs) {
    long total = 0;
    for (const Trajectory& t : trajs) total += t.size();
    if (trajs.empty()) return Mat();
    Mat out(trajs.front().states.cols(), total);
    long k = 0;
    for (const Trajectory& t : trajs) {
        out.middleCols(k, t.size()) = t.states.transpose();
        k += t.size();
    }
    return out;
}

std::vector<const Trajectory*> pointers(const std::vector<Trajectory>& trajs) {
    std::vector<const Trajectory*> out;
    for (const Trajectory& t : trajs) out.push_back(&t);
    return out;
}

std::vector<GradientSample> gradient_set(const FomSystem& sys, const std::vector<Trajectory>& trajs, int sg,
                                         int horizon_steps, std::uint64_t seed) {
    std::vector<GradientSample> out;
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        auto s = sample_gradients(sys, trajs[i], sg, horizon_steps, mix_seed(seed, i));
        out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    }
    return out;
}

NoackData make_noack_data(const NoackSystem& sys, const NoackDataSpec& spec) {
    NoackData d;
    const Mat train_ics = noack_initial_grid(spec.grid);
    const long nvalid = spec.valid_count < 0 ? train_ics.cols() : spec.valid_count;
    d.train = simulate_set(sys, train_ics, spec.tf, spec.dt);
    d.valid = simulate_set(sys, uniform_cube(nvalid, mix_seed(spec.seed, 1)), spec.tf, spec.dt);
    d.test = simulate_set(sys, uniform_cube(spec.test_count, mix_seed(spec.seed, 2)), spec.tf, spec.dt);
    d.train_grads = gradient_set(sys, d.train, spec.sg, spec.horizon_steps, mix_seed(spec.seed, 3));
    d.valid_grads = gradient_set(sys, d.valid, spec.sg, spec.horizon_steps, mix_seed(spec.seed, 4));
    return d;
}

TrainData make_train_data(const NoackData& data, const FomSystem& sys, LossKind kind) {
    TrainData td;
    switch (kind) {
        case LossKind::Rec:
            td.train = rec_batch(stack_states(data.train));
            td.valid = rec_batch(stack_states(data.valid));
            break;
        case LossKind::Gap:
            td.train = gap_batch(data.train_grads);
            td.valid = gap_batch(data.valid_grads);
            break;
        case LossKind::Rvp:
            td.train = rvp_batch(sys, pointers(data.train));
            td.valid = rvp_batch(sys, pointers(data.valid));
            break;
    }
    return td;
}

std::unique_ptr<Autoencoder> noack_net(bool projae, std::uint64_t seed) {
    if (projae) return std::make_unique<ProjAE>(ProjAE::init({2, 3, 3, 3, 3, 3}, seed));
    return std::make_unique<StandAE>(StandAE::init({3, 3, 3, 3, 3, 2}, {2, 3, 3, 3, 3, 3}, seed));
}

StudySession run_study_session(const NoackSystem& sys, const NoackData& data, bool projae, LossKind loss,
                               const StudyConfig& cfg) {
    StudySession s;
    s.arch = projae ? "ProjAE" : "StandAE";
    s.loss = loss;
    const TrainData td = make_train_data(data, sys, loss);
    LossSpec spec;
    spec.kind = loss;
    spec.rvp.horizon = data.train.front().times(data.train.front().size() - 1);
    TrainConfig tc = cfg.train;
    if (!projae) tc.beta = 0.0;
    tc.tag = s.arch + "_" + loss_name(loss);
    const auto valid = pointers(data.valid);
    const auto test = pointers(data.test);
    auto enc_metric = [&](const Autoencoder& net) {
        return rom_pred_error(AutoencoderMap(net), sys, RomKind::Enc, valid, cfg.rom_substeps).mean;
    };
    MultiSeedResult ms = multi_seed(
        cfg.seeds, [&](std::uint64_t seed) { return noack_net(projae, seed); }, spec, td, tc, enc_metric);
    s.runs = std::move(ms.runs);
    std::size_t best_dec = 0;
    for (std::size_t i = 0; i < s.runs.size(); ++i) {
        const Autoencoder& net = *s.runs[i].session.best;
        if (s.runs[i].session.diverged) ++s.diverged_sessions;
        s.enc_valid.push_back(s.runs[i].metric);
        s.dec_valid.push_back(rom_pred_error(AutoencoderMap(net), sys, RomKind::Dec, valid, cfg.rom_substeps).mean);
        if (rank_value(s.dec_valid[i]) < rank_value(s.dec_valid[best_dec])) best_dec = i;
        if (cfg.verbose)
            std::fprintf(stderr, "%s %s seed %llu: valid loss %.4g, EncROM %.4g, DecROM %.4g%s\n", s.arch.c_str(),
                         loss_name(loss), static_cast<unsigned long long>(s.runs[i].seed), s.runs[i].session.best_valid,
                         s.enc_valid[i], s.dec_valid[i], s.runs[i].session.diverged ? " (diverged)" : "");
    }
    auto score = [&](std::size_t idx, RomKind kind, double valid_pred) {
        const Autoencoder& net = *s.runs[idx].session.best;
        const AutoencoderMap map(net);
        StudyEntry e;
        e.arch = s.arch;
        e.loss = loss;
        e.rom = kind;
        e.seed = s.runs[idx].seed;
        e.valid_pred = valid_pred;
        const PredError pe = rom_pred_error(map, sys, kind, test, cfg.rom_substeps);
        e.test_pred = pe.mean;
        e.test_per_traj = pe.per_traj;
        e.manifold = manifold_recon_error(map, sys);
        return e;
    };
    s.best_enc = score(ms.best_index, RomKind::Enc, s.enc_valid[ms.best_index]);
    s.best_dec = score(best_dec, RomKind::Dec, s.dec_valid[best_dec]);
    return s;
}

std::string format_value(double v) {
    if (!std::isfinite(v)) return "∞";
    std::ostringstream os;
    if (v != 0.0 && (std::abs(v) < 1e-4 || std::abs(v) >= 1e3))
        os << std::scientific << std::setprecision(3) << v;
    else
        os << std::fixed << std::setprecision(5) << v;
    return os.str();
}

std::string format_table(const std::vector<StudySession>& sessions) {
    const LossKind cols[] = {LossKind::Rec, LossKind::Gap, LossKind::Rvp};
    const std::pair<const char*, RomKind> rows[] = {{"ProjAE", RomKind::Enc},
                                                    {"StandAE", RomKind::Enc},
                                                    {"ProjAE", RomKind::Dec},
                                                    {"StandAE", RomKind::Dec}};
    std::ostringstream os;
    os << std::left << std::setw(18) << "";
    for (LossKind c : cols) os << std::setw(24) << loss_name(c);
    os << "\n" << std::setw(18) << "";
    for (int i = 0; i < 3; ++i) os << std::setw(12) << "Manif." << std::setw(12) << "Pred.";
    os << "\n";
    for (const auto& [arch, kind] : rows) {
        std::ostringstream label;
        label << arch << ", " << rom_name(kind);
        os << std::setw(18) << label.str();
        for (LossKind c : cols) {
            const StudySession* found = nullptr;
            for (const StudySession& s : sessions)
                if (s.arch == arch && s.loss == c) found = &s;
            if (found == nullptr) {
                os << std::setw(12) << "-" << std::setw(12) << "-";
                continue;
            }
            const StudyEntry& e = kind == RomKind::Enc ? found->best_enc : found->best_dec;
            // setw counts bytes; pad the multibyte infinity sign by hand
            for (double v : {e.manifold, e.test_pred}) {
                const std::string txt = format_value(v);
                const std::size_t width = std::isfinite(v) ? txt.size() : 1;
                os << txt << std::string(width < 12 ? 12 - width : 1, ' ');
            }
        }
        os << "\n";
    }
    return os.str();
}

double orthogonal_graph_foot(const Vec& x, const std::function<double(double)>& h,
                             const std::function<double(double)>& dh, const std::function<double(double)>& d2h) {
    double s = x(0);
    for (int it = 0; it < 100; ++it) {
        const double r = h(s) - x(1);
        const double g = (s - x(0)) + r * dh(s);
        const double hess = 1.0 + dh(s) * dh(s) + r * d2h(s);
        const double step = g / hess;
        s -= step;
        if (std::abs(step) < 1e-15 * (1.0 + std::abs(s))) return s;
    }
    throw ConvergenceError("orthogonal projection onto the graph did not converge");
}

Example1Rates example1_rates(const PitchforkSystem& sys, const Vec& x0) {
    const int order = 6;
    const auto series = pitchfork_slow_manifold_series(sys.lambda(), order);
    Vec poly = Vec::Zero(1);
    double e = 1.0;
    for (const Vec& c : series) {
        if (c.size() > poly.size()) poly.conservativeResizeLike(Vec::Zero(c.size()));
        poly.head(c.size()) += e * c;
        e *= sys.eps();
    }
    const Vec d1 = poly_derivative(poly), d2 = poly_derivative(d1);
    auto h = [&](double s) { return poly_eval(poly, s); };
    auto dh = [&](double s) { return poly_eval(d1, s); };
    auto d2h = [&](double s) { return poly_eval(d2, s); };

    Vec xv(2), xo(2);
    xv << x0(0), h(x0(0));
    const double s = orthogonal_graph_foot(x0, h, dh, d2h);
    xo << s, h(s);
    const double dt = 1e-3, tf = 60.0;
    const Trajectory ref = rk4(sys, x0, 0.0, tf, dt, nullptr, false);
    const Trajectory tv = rk4(sys, xv, 0.0, tf, dt, nullptr, false);
    const Trajectory to = rk4(sys, xo, 0.0, tf, dt, nullptr, false);
    Example1Rates out;
    out.times = ref.times;
    out.err_vertical = (ref.states - tv.states).rowwise().norm();
    out.err_orthogonal = (ref.states - to.states).rowwise().norm();
    out.vertical_rate = fitted_decay_rate(out.times, out.err_vertical, 0.1, 1.0);
    out.orthogonal_rate = fitted_decay_rate(out.times, out.err_orthogonal, 30.0, 60.0);
    return out;
}

Example1Flip example1_flip(const PitchforkSystem& sys, const std::vector<double>& points) {
    const GraphMap graph([](double s) { return 0.95 * s * s + 0.05; }, [](double s) { return 1.9 * s; });
    Example1Flip out;
    out.points = points;
    const Mat none(0, 1);
    for (double p : points) {
        Mat z(1, 1);
        z(0, 0) = p;
        out.truth.push_back(sys.lambda() * p * (1.0 - p * p));
        out.vertical.push_back(enc_rom_rhs(graph, sys, z, none)(0, 0));
        out.orthogonal.push_back(dec_rom_rhs(graph, sys, z, none)(0, 0));
    }
    return out;
}

Vec linear_impulse_response(const LtiSystem& sys, const BiorthogonalPair& pair, double tf, double dt) {
    const Mat ar = pair.psi.transpose() * sys.a() * pair.phi;
    const Mat br = pair.psi.transpose() * sys.b();
    const Mat cr = sys.c() * pair.phi;
    const Mat step = (ar * dt).exp();
    const long steps = std::lround(tf / dt);
    Vec y(steps + 1);
    Vec z = br.col(0);
    for (long k = 0; k <= steps; ++k) {
        y(k) = (cr * z)(0);
        z = step * z;
    }
    return y;
}

BiorthogonalPair pair_of_linear_net(const ProjAE& net) { return net.pair(0); }

ProjAE linear_projae(long n, long r, std::uint64_t seed) {
    Activation act;
    act.kind = ActKind::Identity;
    ProjAEOptions opt;
    opt.pin_equilibrium = Vec::Zero(n);
    return ProjAE::init({r, n}, seed, act, opt);
}

ImpulseComparison example2_compare(const LtiSystem& sys, const Example2Config& cfg) {
    const long n = sys.state_dim(), r = 2;
    ImpulseComparison out;
    const long steps = std::lround(cfg.tf / cfg.dt);
    out.times = Vec::LinSpaced(steps + 1, 0.0, steps * cfg.dt);
    out.y_fom = linear_impulse_response(sys, {Mat::Identity(n, n), Mat::Identity(n, n)}, cfg.tf, cfg.dt);

    const Trajectory imp = rk4(sys, sys.b().col(0), 0.0, cfg.tf, cfg.dt);
    const BiorthogonalPair pod = pod_projection(imp.states.transpose(), r);
    out.y_pod = linear_impulse_response(sys, pod, cfg.tf, cfg.dt);
    const BalancedTruncation bt = balanced_truncation(sys.a(), sys.b(), sys.c(), r);
    out.y_bt = linear_impulse_response(sys, bt.pair, cfg.tf, cfg.dt);

    LossSpec spec;
    spec.kind = LossKind::Rvp;
    spec.rvp.gamma = 1.0;
    spec.rvp.horizon = cfg.tf;
    TrainData data;
    data.train = rvp_batch(sys, {&imp});
    data.valid = data.train;
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.lr0 = cfg.lr0;
    tc.traj_batch = 1;
    tc.beta = 1e-5;
    tc.plateau.patience = cfg.patience;
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed : cfg.seeds) {
        tc.seed = seed;
        const SessionResult res = train_session(linear_projae(n, r, seed), spec, data, tc);
        if (res.diverged || !res.best || !(res.best_valid < best_loss)) continue;
        best_loss = res.best_valid;
        out.rvp_pair = pair_of_linear_net(dynamic_cast<const ProjAE&>(*res.best));
        out.rvp_loss = res.best_valid;
    }
    if (!std::isfinite(best_loss)) throw DivergedError("every RVP start diverged");
    out.y_rvp = linear_impulse_response(sys, out.rvp_pair, cfg.tf, cfg.dt);

    out.err_pod = trapezoid_l2(out.y_pod - out.y_fom, cfg.dt);
    out.err_bt = trapezoid_l2(out.y_bt - out.y_fom, cfg.dt);
    out.err_rvp = trapezoid_l2(out.y_rvp - out.y_fom, cfg.dt);
    return out;
}

Vec frequency_response(const Mat& a, const Mat& b, const Mat& c, const Vec& omegas) {
    using Cmat = Eigen::MatrixXcd;
    Vec mag(omegas.size());
    for (Eigen::Index k = 0; k < omegas.size(); ++k) {
        Cmat m = -a.cast<std::complex<double>>();
        m.diagonal().array() += std::complex<double>(0.0, omegas(k));
        const Cmat x = m.partialPivLu().solve(b.cast<std::complex<double>>());
        mag(k) = std::abs((c.cast<std::complex<double>>() * x)(0, 0));
    }
    return mag;
}

namespace {

// Residuals g_i^T (I - P) x_i / sqrt(N) of the linear GAP objective, with
// P = phi (psi^T phi)^{-1} psi^T over the unconstrained pair.
struct LinearGapResidual : Eigen::DenseFunctor<double> {
    const Mat& x;
    const Mat& g;
    long n, r;
    LinearGapResidual(const Mat& x_, const Mat& g_, long r_)
        : DenseFunctor<double>(static_cast<int>(2 * x_.rows() * r_), static_cast<int>(x_.cols())),
          x(x_), g(g_), n(x_.rows()), r(r_) {}

    int operator()(const InputType& p, ValueType& res) const {
        const Eigen::Map<const Mat> phi(p.data(), n, r);
        const Eigen::Map<const Mat> psi(p.data() + n * r, n, r);
        const Mat psi_b = psi * (phi.transpose() * psi).inverse();
        const Mat gp = g.transpose() * phi;
        const Mat zx = psi_b.transpose() * x;
        const double w = 1.0 / std::sqrt(static_cast<double>(x.cols()));
        for (long i = 0; i < x.cols(); ++i) res(i) = w * (g.col(i).dot(x.col(i)) - gp.row(i).dot(zx.col(i)));
        return 0;
    }
};

}  // namespace

BiorthogonalPair polish_linear_gap(const BiorthogonalPair& start, const Mat& states, const Mat& grads) {
    const long n = start.phi.rows(), r = start.phi.cols();
    Vec p(2 * n * r);
    p.head(n * r) = Eigen::Map<const Vec>(start.phi.data(), n * r);
    p.tail(n * r) = Eigen::Map<const Vec>(start.psi.data(), n * r);
    LinearGapResidual f(states, grads, r);
    Eigen::NumericalDiff<LinearGapResidual, Eigen::Central> fd(f);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<LinearGapResidual, Eigen::Central>> lm(fd);
    lm.setMaxfev(4000);
    lm.minimize(p);
    const Mat phi = Eigen::Map<const Mat>(p.data(), n, r);
    const Mat psi = Eigen::Map<const Mat>(p.data() + n * r, n, r);
    return {phi, psi * (phi.transpose() * psi).inverse()};
}

GapBtResult gap_bt_limit(const LtiSystem& sys, long r, const GapBtConfig& cfg) {
    const long n = sys.state_dim();
    const long du = sys.input_dim();
    const long horizon = std::lround(cfg.tf / cfg.dt);
    std::vector<Trajectory> trajs;
    for (long j = 0; j < du; ++j) trajs.push_back(rk4(sys, sys.b().col(j), 0.0, 2.0 * cfg.tf, cfg.dt, nullptr, false));
    std::vector<GradientSample> samples;
    for (int rep = 0; rep < cfg.repeats; ++rep)
        for (const Trajectory& t : trajs) {
            auto s = sample_gradients(sys, t, 1, static_cast<int>(horizon), mix_seed(cfg.seed, static_cast<std::uint64_t>(rep)));
            samples.insert(samples.end(), s.begin(), s.end());
        }
    const LossBatch batch = gap_batch(samples);
    const BalancedTruncation bt = balanced_truncation(sys.a(), sys.b(), sys.c(), r);

    ProjAE at_bt = linear_projae(n, r, cfg.seed);
    at_bt.layer(0).rep.phi_t = bt.pair.phi;
    at_bt.layer(0).rep.psi_t = bt.pair.psi;

    GapBtResult out;
    const double scale = cfg.tf * cfg.tf * static_cast<double>(du) / static_cast<double>(horizon);
    out.scaled_gap = scale * gap_loss(at_bt, batch.states, batch.grads);
    out.gramian = gramian_trace(bt.wo, bt.wc, bt.pair.phi * bt.pair.psi.transpose());
    out.rel_gap = std::abs(out.scaled_gap - out.gramian) / out.gramian;

    LossSpec spec;
    spec.kind = LossKind::Gap;
    const long ntrain = std::min<long>(batch.count(), static_cast<long>(cfg.train_repeats) * (horizon + 1) * du);
    TrainData data;
    data.train.states = batch.states.leftCols(ntrain);
    data.train.grads = batch.grads.leftCols(ntrain);
    data.valid = data.train;
    TrainConfig tc;
    tc.epochs = cfg.train_epochs;
    tc.lr0 = cfg.lr0;
    tc.batch_size = 2000;
    tc.seed = cfg.seed;
    tc.beta = 1e-5;
    const SessionResult res = train_session(linear_projae(n, r, cfg.seed), spec, data, tc);
    out.trained = polish_linear_gap(pair_of_linear_net(dynamic_cast<const ProjAE&>(*res.best)), data.train.states,
                                    data.train.grads);
    const double deg = 180.0 / M_PI;
    out.angle_phi_deg = principal_angles(out.trained.phi, bt.pair.phi).maxCoeff() * deg;
    out.angle_psi_deg = principal_angles(out.trained.psi, bt.pair.psi).maxCoeff() * deg;
    return out;
}

SparseDemoResult sparse_demo(const SparseDemoConfig& cfg) {
    const LtiSystem sys = banded_lti(cfg.n);
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal;
    std::vector<Trajectory> trajs;
    for (int k = 0; k < cfg.ics; ++k) {
        Vec x0(cfg.n);
        for (long i = 0; i < cfg.n; ++i) x0(i) = normal(rng);
        trajs.push_back(rk4(sys, x0, 0.0, cfg.tf, cfg.dt));
    }
    TrainData data;
    data.train.states = stack_states(trajs);
    data.valid = data.train;
    LossSpec spec;
    spec.kind = LossKind::Rec;
    TrainConfig tc;
    tc.epochs = cfg.dense_epochs;
    tc.lr0 = cfg.dense_lr;
    tc.seed = cfg.seed;
    const SessionResult dense = train_session(linear_projae(cfg.n, cfg.r, cfg.seed), spec, data, tc);
    if (dense.diverged) throw DivergedError("dense stage diverged: " + dense.diagnostic);
    const ProjAE& dense_net = dynamic_cast<const ProjAE&>(*dense.best);

    tc.epochs = cfg.sparse_epochs;
    tc.lr0 = cfg.sparse_lr;
    SparsePhaseConfig sc;
    sc.gamma = cfg.gamma;
    const SessionResult sparse = sparse_train_phase(dense_net, spec, data, tc, sc);
    if (sparse.diverged) throw DivergedError("sparse stage diverged: " + sparse.diagnostic);
    const ProjAE& sparse_net = dynamic_cast<const ProjAE&>(*sparse.best);

    SparseDemoResult out;
    out.dense_loss = dense.best_valid;
    out.sparse_loss = sparse.best_valid;
    out.row_norms_before = orthonormal_row_norms(dense_net.pair(0).psi);
    out.row_norms_after = orthonormal_row_norms(sparse_net.pair(0).psi);
    out.plan = build_sparse_plan(sparse_net, sys);
    Mat z(cfg.r, 64);
    for (long j = 0; j < z.cols(); ++j)
        for (long i = 0; i < cfg.r; ++i) z(i, j) = 2.0 * normal(rng);
    const Mat u(0, z.cols());
    const AutoencoderMap dense_map(*out.plan.net);
    out.rhs_gap = (enc_rom_rhs(dense_map, sys, z, u) - sparse_rom_rhs(out.plan, sys, z, u)).cwiseAbs().maxCoeff();
    return out;
}

SurrogateCheck surrogate_check(const LatentMap& map, const FomSystem& sys, const Mat& x0, double tf, double dt,
                               int grid, double pad) {
    const Mat z0 = map.encode(x0);
    const LatentLift lift = [&map](const Mat& z) { return map.decode(z); };
    const RomRun direct = integrate_latent(
        [&](const Mat& z, const Mat&) { return enc_rom_rhs(map, sys, z, Mat(0, z.cols())); }, lift, z0, 0.0, tf, dt);
    if (direct.any_blown()) throw BlowUpError("direct EncROM blew up before the surrogate fit", tf);
    SurrogateCheck out;
    out.lo = z0.rowwise().minCoeff();
    out.hi = z0.rowwise().maxCoeff();
    for (const Mat& z : direct.latent) {
        out.lo = out.lo.cwiseMin(z.rowwise().minCoeff());
        out.hi = out.hi.cwiseMax(z.rowwise().maxCoeff());
    }
    const Vec w = pad * (out.hi - out.lo);
    out.lo -= w;
    out.hi += w;
    SurrogateSpec spec;
    spec.lo = out.lo;
    spec.hi = out.hi;
    spec.grid = grid;
    const LatentSurrogate sur = fit_latent_surrogate(map, sys, spec);
    out.center_residual = sur.center_residual;
    out.heldout_max_error = sur.heldout_max_error;
    const RomRun fast = integrate_latent([&sur](const Mat& z, const Mat&) { return sur.rhs(z); }, lift, z0, 0.0, tf, dt);
    if (fast.any_blown()) {
        out.trajectory_gap = std::numeric_limits<double>::infinity();
        return out;
    }
    for (std::size_t k = 0; k < direct.lifted.size(); ++k)
        out.trajectory_gap = std::max(out.trajectory_gap, (direct.lifted[k] - fast.lifted[k]).cwiseAbs().maxCoeff());
    return out;
}

}  // namespace projae
