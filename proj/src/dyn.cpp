#include "projae/dyn.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <string>

#include "projae/error.hpp"

namespace projae {

// ---------------------------------------------------------------------------
// FomSystem defaults

Vec FomSystem::vjp_g(const Vec&, const Vec& w) const { return w; }

Mat FomSystem::jacobian_f(const Vec& x, const Vec& u) const {
    const long n = state_dim();
    Mat j(n, n);
    for (long i = 0; i < n; ++i) j.col(i) = jvp_f(x, u, Vec::Unit(n, i));
    return j;
}

Mat FomSystem::jacobian_g(const Vec& x) const {
    const long m = output_dim();
    Mat j(m, state_dim());
    for (long i = 0; i < m; ++i) j.row(i) = vjp_g(x, Vec::Unit(m, i)).transpose();
    return j;
}

namespace {
Vec input_col(const Mat& u, Eigen::Index k) { return u.rows() == 0 ? Vec() : Vec(u.col(k)); }
}  // namespace

Mat FomSystem::f_batch(const Mat& x, const Mat& u) const {
    Mat out(state_dim(), x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) out.col(k) = f(x.col(k), input_col(u, k));
    return out;
}

Mat FomSystem::vjp_f_batch(const Mat& x, const Mat& u, const Mat& w) const {
    Mat out(state_dim(), x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) out.col(k) = vjp_f(x.col(k), input_col(u, k), w.col(k));
    return out;
}

Mat FomSystem::g_batch(const Mat& x) const {
    Mat out(output_dim(), x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) out.col(k) = g(x.col(k));
    return out;
}

Mat FomSystem::vjp_g_batch(const Mat& x, const Mat& w) const {
    Mat out(state_dim(), x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) out.col(k) = vjp_g(x.col(k), w.col(k));
    return out;
}

std::vector<std::vector<long>> FomSystem::coupling() const {
    std::vector<long> all(static_cast<std::size_t>(state_dim()));
    for (long i = 0; i < state_dim(); ++i) all[static_cast<std::size_t>(i)] = i;
    return std::vector<std::vector<long>>(static_cast<std::size_t>(state_dim()), all);
}

Vec FomSystem::f_restricted(const std::vector<long>& rows, const std::vector<long>& nbrs, const Vec& x_nbrs,
                            const Vec& u) const {
    Vec x = Vec::Zero(state_dim());
    for (std::size_t i = 0; i < nbrs.size(); ++i) x(nbrs[i]) = x_nbrs(static_cast<Eigen::Index>(i));
    const Vec full = f(x, u);
    Vec out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = full(rows[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Pitchfork

Vec PitchforkSystem::f(const Vec& x, const Vec&) const {
    Vec out(2);
    out(0) = lambda_ * x(0) * (1.0 - x(0) * x(0));
    out(1) = (x(0) * x(0) - x(1)) / eps_;
    return out;
}

Vec PitchforkSystem::jvp_f(const Vec& x, const Vec&, const Vec& v) const {
    Vec out(2);
    out(0) = lambda_ * (1.0 - 3.0 * x(0) * x(0)) * v(0);
    out(1) = (2.0 * x(0) * v(0) - v(1)) / eps_;
    return out;
}

Vec PitchforkSystem::vjp_f(const Vec& x, const Vec&, const Vec& w) const {
    Vec out(2);
    out(0) = lambda_ * (1.0 - 3.0 * x(0) * x(0)) * w(0) + 2.0 * x(0) * w(1) / eps_;
    out(1) = -w(1) / eps_;
    return out;
}

Mat PitchforkSystem::f_batch(const Mat& x, const Mat&) const {
    Mat out(2, x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
        const double x1 = x(0, k), x2 = x(1, k);
        out(0, k) = lambda_ * x1 * (1.0 - x1 * x1);
        out(1, k) = (x1 * x1 - x2) / eps_;
    }
    return out;
}

Mat PitchforkSystem::vjp_f_batch(const Mat& x, const Mat&, const Mat& w) const {
    Mat out(2, x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
        const double x1 = x(0, k);
        out(0, k) = lambda_ * (1.0 - 3.0 * x1 * x1) * w(0, k) + 2.0 * x1 * w(1, k) / eps_;
        out(1, k) = -w(1, k) / eps_;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Noack

Vec NoackSystem::f(const Vec& x, const Vec&) const {
    Vec out(3);
    out(0) = mu_ * x(0) - omega_ * x(1) + a_ * x(0) * x(2);
    out(1) = omega_ * x(0) + mu_ * x(1) + a_ * x(1) * x(2);
    out(2) = -(x(2) - x(0) * x(0) - x(1) * x(1)) / eps_;
    return out;
}

Vec NoackSystem::jvp_f(const Vec& x, const Vec&, const Vec& v) const {
    Vec out(3);
    out(0) = (mu_ + a_ * x(2)) * v(0) - omega_ * v(1) + a_ * x(0) * v(2);
    out(1) = omega_ * v(0) + (mu_ + a_ * x(2)) * v(1) + a_ * x(1) * v(2);
    out(2) = (2.0 * x(0) * v(0) + 2.0 * x(1) * v(1) - v(2)) / eps_;
    return out;
}

Vec NoackSystem::vjp_f(const Vec& x, const Vec&, const Vec& w) const {
    Vec out(3);
    out(0) = (mu_ + a_ * x(2)) * w(0) + omega_ * w(1) + 2.0 * x(0) * w(2) / eps_;
    out(1) = -omega_ * w(0) + (mu_ + a_ * x(2)) * w(1) + 2.0 * x(1) * w(2) / eps_;
    out(2) = a_ * x(0) * w(0) + a_ * x(1) * w(1) - w(2) / eps_;
    return out;
}

Mat NoackSystem::f_batch(const Mat& x, const Mat&) const {
    Mat out(3, x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
        const double x1 = x(0, k), x2 = x(1, k), x3 = x(2, k);
        out(0, k) = mu_ * x1 - omega_ * x2 + a_ * x1 * x3;
        out(1, k) = omega_ * x1 + mu_ * x2 + a_ * x2 * x3;
        out(2, k) = -(x3 - x1 * x1 - x2 * x2) / eps_;
    }
    return out;
}

Mat NoackSystem::vjp_f_batch(const Mat& x, const Mat&, const Mat& w) const {
    Mat out(3, x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
        const double x1 = x(0, k), x2 = x(1, k), x3 = x(2, k);
        const double w1 = w(0, k), w2 = w(1, k), w3 = w(2, k);
        out(0, k) = (mu_ + a_ * x3) * w1 + omega_ * w2 + 2.0 * x1 * w3 / eps_;
        out(1, k) = -omega_ * w1 + (mu_ + a_ * x3) * w2 + 2.0 * x2 * w3 / eps_;
        out(2, k) = a_ * x1 * w1 + a_ * x2 * w2 - w3 / eps_;
    }
    return out;
}

// ---------------------------------------------------------------------------
// LTI

LtiSystem::LtiSystem(Mat a, Mat b, Mat c) : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {
    if (a_.rows() != a_.cols() || b_.rows() != a_.rows() || c_.cols() != a_.rows())
        throw ShapeError("LtiSystem: inconsistent A, B, C");
}

Vec LtiSystem::f(const Vec& x, const Vec& u) const {
    Vec out = a_ * x;
    if (u.size() > 0) out += b_ * u;
    return out;
}

Vec LtiSystem::jvp_f(const Vec&, const Vec&, const Vec& v) const { return a_ * v; }
Vec LtiSystem::vjp_f(const Vec&, const Vec&, const Vec& w) const { return a_.transpose() * w; }
Vec LtiSystem::vjp_g(const Vec&, const Vec& w) const { return c_.transpose() * w; }

Mat LtiSystem::f_batch(const Mat& x, const Mat& u) const {
    Mat out = a_ * x;
    if (u.rows() > 0) out += b_ * u;
    return out;
}

Mat LtiSystem::vjp_f_batch(const Mat&, const Mat&, const Mat& w) const { return a_.transpose() * w; }
Mat LtiSystem::vjp_g_batch(const Mat&, const Mat& w) const { return c_.transpose() * w; }

std::vector<std::vector<long>> LtiSystem::coupling() const {
    std::vector<std::vector<long>> out(static_cast<std::size_t>(a_.rows()));
    for (long i = 0; i < a_.rows(); ++i)
        for (long j = 0; j < a_.cols(); ++j)
            if (a_(i, j) != 0.0) out[static_cast<std::size_t>(i)].push_back(j);
    return out;
}

Vec LtiSystem::f_restricted(const std::vector<long>& rows, const std::vector<long>& nbrs, const Vec& x_nbrs,
                            const Vec& u) const {
    Vec out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < nbrs.size(); ++j) s += a_(rows[i], nbrs[j]) * x_nbrs(static_cast<Eigen::Index>(j));
        if (u.size() > 0) s += b_.row(rows[i]).dot(u);
        out(static_cast<Eigen::Index>(i)) = s;
    }
    return out;
}

PitchforkSystem pitchfork_system(double lambda, double eps) { return PitchforkSystem(lambda, eps); }

NoackSystem noack_system() { return NoackSystem(); }

LtiSystem nonnormal_lti() {
    Mat a(3, 3);
    a << -1, 0, 100, 0, -2, 100, 0, 0, -5;
    return LtiSystem(a, Mat::Ones(3, 1), Mat::Ones(1, 3));
}

LtiSystem banded_lti(long n) {
    Mat a = Mat::Zero(n, n);
    for (long i = 0; i < n; ++i) {
        a(i, i) = -1.0 - 0.1 * static_cast<double>(i);
        if (i > 0) a(i, i - 1) = 0.6;
        if (i + 1 < n) a(i, i + 1) = -0.6;
    }
    return LtiSystem(a, Mat::Zero(n, 1), Mat::Identity(n, n));
}

// ---------------------------------------------------------------------------
// Integration

namespace {

void check_state(const Vec& x, double t) {
    if (!x.allFinite() || x.norm() > 1e6) throw BlowUpError("state blew up at t = " + std::to_string(t), t);
}

}  // namespace

Trajectory rk4(const FomSystem& sys, const Vec& x0, double t0, double t1, double dt, const InputFn& u,
               bool store_derivs) {
    if (!(dt > 0.0)) throw Error("rk4: dt must be positive");
    if (x0.size() != sys.state_dim()) throw ShapeError("rk4: initial condition has wrong dimension");
    const long steps = std::lround((t1 - t0) / dt);
    const long n = sys.state_dim();
    const long du = sys.input_dim();
    auto input = [&](double t) -> Vec {
        if (du == 0) return Vec();
        return u ? u(t) : Vec::Zero(du);
    };
    Trajectory tr;
    tr.times.resize(steps + 1);
    tr.states.resize(steps + 1, n);
    if (du > 0) tr.inputs.resize(steps + 1, du);
    if (store_derivs) tr.derivs.resize(steps + 1, n);
    Vec x = x0;
    check_state(x, t0);
    for (long k = 0; k <= steps; ++k) {
        const double t = t0 + static_cast<double>(k) * dt;
        tr.times(k) = t;
        tr.states.row(k) = x.transpose();
        const Vec uk = input(t);
        if (du > 0) tr.inputs.row(k) = uk.transpose();
        const Vec k1 = sys.f(x, uk);
        if (store_derivs) tr.derivs.row(k) = k1.transpose();
        if (k == steps) break;
        const Vec uh = input(t + 0.5 * dt);
        const Vec k2 = sys.f(x + 0.5 * dt * k1, uh);
        const Vec k3 = sys.f(x + 0.5 * dt * k2, uh);
        const Vec k4 = sys.f(x + dt * k3, input(t + dt));
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        check_state(x, t + dt);
    }
    return tr;
}

Mat rk4_step_jacobian(const FomSystem& sys, const Vec& x, const Vec& u, double dt) {
    const long n = sys.state_dim();
    const Mat id = Mat::Identity(n, n);
    const Vec k1 = sys.f(x, u);
    const Mat j1 = sys.jacobian_f(x, u);
    const Vec x1 = x + 0.5 * dt * k1;
    const Vec k2 = sys.f(x1, u);
    const Mat j2 = sys.jacobian_f(x1, u) * (id + 0.5 * dt * j1);
    const Vec x2 = x + 0.5 * dt * k2;
    const Vec k3 = sys.f(x2, u);
    const Mat j3 = sys.jacobian_f(x2, u) * (id + 0.5 * dt * j2);
    const Vec x3 = x + dt * k3;
    const Mat j4 = sys.jacobian_f(x3, u) * (id + dt * j3);
    return id + dt / 6.0 * (j1 + 2.0 * j2 + 2.0 * j3 + j4);
}

Vec adjoint_gradient(const FomSystem& sys, const Trajectory& traj, long k, long horizon, const Mat& xi) {
    const double dt = traj.dt();
    auto state = [&](long i) -> Vec { return traj.states.row(i).transpose(); };
    auto input = [&](long i) -> Vec { return traj.inputs.rows() ? Vec(traj.inputs.row(i).transpose()) : Vec(); };
    Vec lam = sys.jacobian_g(state(k + horizon)).transpose() * xi.row(horizon).transpose();
    for (long j = horizon - 1; j >= 0; --j) {
        const Mat m = rk4_step_jacobian(sys, state(k + j), input(k + j), dt);
        lam = m.transpose() * lam + sys.jacobian_g(state(k + j)).transpose() * xi.row(j).transpose();
    }
    return lam;
}

std::vector<GradientSample> sample_gradients(const FomSystem& sys, const Trajectory& traj, int sg, int horizon_steps,
                                             std::uint64_t seed) {
    if (sg < 1 || horizon_steps < 1) throw Error("sample_gradients: sg and horizon must be positive");
    const long t_count = traj.size();
    long horizon = horizon_steps;
    std::vector<long> bases;
    if (t_count - 1 < horizon) {
        horizon = t_count - 1;
        bases.push_back(0);
    } else {
        for (long k = 0; k + horizon <= t_count - 1; k += sg) bases.push_back(k);
    }
    const long m = sys.output_dim();
    const double dt = traj.dt();
    auto state = [&](long i) -> Vec { return traj.states.row(i).transpose(); };
    auto input = [&](long i) -> Vec { return traj.inputs.rows() ? Vec(traj.inputs.row(i).transpose()) : Vec(); };

    std::vector<Mat> steps(static_cast<std::size_t>(std::max<long>(t_count - 1, 0)));
    std::vector<bool> have(steps.size(), false);
    std::vector<Mat> outs(static_cast<std::size_t>(t_count));
    std::vector<bool> have_out(outs.size(), false);
    auto step_jac = [&](long i) -> const Mat& {
        auto idx = static_cast<std::size_t>(i);
        if (!have[idx]) {
            steps[idx] = rk4_step_jacobian(sys, state(i), input(i), dt);
            have[idx] = true;
        }
        return steps[idx];
    };
    auto out_jac = [&](long i) -> const Mat& {
        auto idx = static_cast<std::size_t>(i);
        if (!have_out[idx]) {
            outs[idx] = sys.jacobian_g(state(i));
            have_out[idx] = true;
        }
        return outs[idx];
    };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<GradientSample> samples;
    samples.reserve(bases.size() * static_cast<std::size_t>(sg));
    for (long k : bases) {
        // xi blocks: draw-major, then time, then output component
        std::vector<Mat> xi(static_cast<std::size_t>(horizon + 1), Mat(m, sg));
        for (int d = 0; d < sg; ++d)
            for (long j = 0; j <= horizon; ++j)
                for (long i = 0; i < m; ++i) xi[static_cast<std::size_t>(j)](i, d) = normal(rng);
        Mat lam = out_jac(k + horizon).transpose() * xi[static_cast<std::size_t>(horizon)];
        for (long j = horizon - 1; j >= 0; --j)
            lam = step_jac(k + j).transpose() * lam + out_jac(k + j).transpose() * xi[static_cast<std::size_t>(j)];
        for (int d = 0; d < sg; ++d) samples.push_back({state(k), lam.col(d)});
    }
    return samples;
}

// ---------------------------------------------------------------------------
// Polynomials and slow manifolds

double poly_eval(const Vec& c, double x) {
    double acc = 0.0;
    for (Eigen::Index i = c.size(); i-- > 0;) acc = acc * x + c(i);
    return acc;
}

Vec poly_derivative(const Vec& c) {
    if (c.size() <= 1) return Vec::Zero(1);
    Vec d(c.size() - 1);
    for (Eigen::Index i = 1; i < c.size(); ++i) d(i - 1) = static_cast<double>(i) * c(i);
    return d;
}

Vec poly_mul(const Vec& a, const Vec& b) {
    Vec out = Vec::Zero(a.size() + b.size() - 1);
    for (Eigen::Index i = 0; i < a.size(); ++i)
        for (Eigen::Index j = 0; j < b.size(); ++j) out(i + j) += a(i) * b(j);
    return out;
}

namespace {

Vec poly_add(const Vec& a, const Vec& b) {
    Vec out = Vec::Zero(std::max(a.size(), b.size()));
    out.head(a.size()) += a;
    out.head(b.size()) += b;
    return out;
}

Vec shift_up(const Vec& a) {
    Vec out = Vec::Zero(a.size() + 1);
    out.tail(a.size()) = a;
    return out;
}

}  // namespace

std::vector<Vec> pitchfork_slow_manifold_series(double lambda, int order) {
    // eps h' x1' = x1^2 - h  =>  h_{k+1} = -h_k' * lambda x1 (1 - x1^2)
    Vec q(4);
    q << 0.0, lambda, 0.0, -lambda;
    std::vector<Vec> h;
    Vec h0(3);
    h0 << 0.0, 0.0, 1.0;
    h.push_back(h0);
    for (int k = 0; k < order; ++k) h.push_back(-poly_mul(poly_derivative(h.back()), q));
    return h;
}

double pitchfork_slow_manifold(double x1, double eps, int order, double lambda) {
    const auto h = pitchfork_slow_manifold_series(lambda, order);
    double acc = 0.0, e = 1.0;
    for (const Vec& c : h) {
        acc += e * poly_eval(c, x1);
        e *= eps;
    }
    return acc;
}

double pitchfork_slow_manifold_dx(double x1, double eps, int order, double lambda) {
    const auto h = pitchfork_slow_manifold_series(lambda, order);
    double acc = 0.0, e = 1.0;
    for (const Vec& c : h) {
        acc += e * poly_eval(poly_derivative(c), x1);
        e *= eps;
    }
    return acc;
}

std::vector<Vec> noack_slow_manifold_series(double mu, double a, int order) {
    // eps h'(rho) 2 rho (mu + a h) = rho - h
    std::vector<Vec> h;
    Vec h0(2);
    h0 << 0.0, 1.0;
    h.push_back(h0);
    for (int k = 0; k < order; ++k) {
        Vec inner = mu * poly_derivative(h[static_cast<std::size_t>(k)]);
        for (int i = 0; i <= k; ++i)
            inner = poly_add(inner, a * poly_mul(poly_derivative(h[static_cast<std::size_t>(i)]),
                                                 h[static_cast<std::size_t>(k - i)]));
        h.push_back(-2.0 * shift_up(inner));
    }
    return h;
}

double noack_slow_manifold_rho(double rho, double eps, int order, const NoackSystem& sys) {
    const auto h = noack_slow_manifold_series(sys.mu(), sys.a(), order);
    double acc = 0.0, e = 1.0;
    for (const Vec& c : h) {
        acc += e * poly_eval(c, rho);
        e *= eps;
    }
    return acc;
}

double noack_slow_manifold_drho(double rho, double eps, int order, const NoackSystem& sys) {
    const auto h = noack_slow_manifold_series(sys.mu(), sys.a(), order);
    double acc = 0.0, e = 1.0;
    for (const Vec& c : h) {
        acc += e * poly_eval(poly_derivative(c), rho);
        e *= eps;
    }
    return acc;
}

double noack_slow_manifold(double x1, double x2, double eps, int order, const NoackSystem& sys) {
    return noack_slow_manifold_rho(x1 * x1 + x2 * x2, eps, order, sys);
}

// ---------------------------------------------------------------------------
// Linear baselines

BiorthogonalPair pod_projection(const Mat& snapshots, long r) {
    if (r < 1 || r > snapshots.rows()) throw ShapeError("pod_projection: invalid rank");
    Eigen::JacobiSVD<Mat> s(snapshots, Eigen::ComputeThinU);
    Mat u = s.matrixU().leftCols(r);
    return {u, u};
}

namespace {

Mat psd_sqrt_factor(const Mat& w) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (w + w.transpose()));
    Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace

BalancedTruncation balanced_truncation(const Mat& a, const Mat& b, const Mat& c, long r) {
    if (r < 1 || r > a.rows()) throw ShapeError("balanced_truncation: invalid rank");
    BalancedTruncation bt;
    bt.wc = solve_lyapunov(a, b * b.transpose());
    bt.wo = solve_lyapunov(a.transpose(), c.transpose() * c);
    const Mat lc = psd_sqrt_factor(bt.wc);
    const Mat lo = psd_sqrt_factor(bt.wo);
    Eigen::JacobiSVD<Mat> s(lo.transpose() * lc, Eigen::ComputeFullU | Eigen::ComputeFullV);
    bt.hankel = s.singularValues();
    if (bt.hankel(r - 1) <= 0.0) throw SingularMatrixError("balanced_truncation: zero Hankel singular value");
    const Vec isq = bt.hankel.head(r).cwiseSqrt().cwiseInverse();
    bt.pair.phi = lc * s.matrixV().leftCols(r) * isq.asDiagonal();
    bt.pair.psi = lo * s.matrixU().leftCols(r) * isq.asDiagonal();
    bt.a_r = bt.pair.psi.transpose() * a * bt.pair.phi;
    bt.b_r = bt.pair.psi.transpose() * b;
    bt.c_r = c * bt.pair.phi;
    return bt;
}

double gramian_trace(const Mat& wo, const Mat& wc, const Mat& p) {
    const Mat e = Mat::Identity(p.rows(), p.cols()) - p;
    return (wo * e * wc * e.transpose()).trace();
}

}  // namespace projae
