#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "projae/biortho.hpp"
#include "projae/matkit.hpp"

namespace projae {

// Full-order model x' = f(x, u), y = g(x). Batched variants act column-wise.
class FomSystem {
public:
    virtual ~FomSystem() = default;
    virtual long state_dim() const = 0;
    virtual long output_dim() const { return state_dim(); }
    virtual long input_dim() const { return 0; }

    virtual Vec f(const Vec& x, const Vec& u) const = 0;
    virtual Vec jvp_f(const Vec& x, const Vec& u, const Vec& v) const = 0;
    virtual Vec vjp_f(const Vec& x, const Vec& u, const Vec& w) const = 0;
    virtual Vec g(const Vec& x) const { return x; }
    virtual Vec vjp_g(const Vec& x, const Vec& w) const;
    virtual Mat jacobian_f(const Vec& x, const Vec& u) const;
    virtual Mat jacobian_g(const Vec& x) const;

    // u may have zero rows for autonomous systems.
    virtual Mat f_batch(const Mat& x, const Mat& u) const;
    virtual Mat vjp_f_batch(const Mat& x, const Mat& u, const Mat& w) const;
    virtual Mat g_batch(const Mat& x) const;
    virtual Mat vjp_g_batch(const Mat& x, const Mat& w) const;

    // coupling()[i] lists the state indices that f_i depends on.
    virtual std::vector<std::vector<long>> coupling() const;
    // f restricted to `rows`, given the state only on `nbrs` (a superset of the
    // coupling of `rows`).
    virtual Vec f_restricted(const std::vector<long>& rows, const std::vector<long>& nbrs, const Vec& x_nbrs,
                             const Vec& u) const;
};

class PitchforkSystem : public FomSystem {
public:
    PitchforkSystem(double lambda, double eps) : lambda_(lambda), eps_(eps) {}
    long state_dim() const override { return 2; }
    Vec f(const Vec& x, const Vec& u) const override;
    Vec jvp_f(const Vec& x, const Vec& u, const Vec& v) const override;
    Vec vjp_f(const Vec& x, const Vec& u, const Vec& w) const override;
    Mat f_batch(const Mat& x, const Mat& u) const override;
    Mat vjp_f_batch(const Mat& x, const Mat& u, const Mat& w) const override;
    double lambda() const { return lambda_; }
    double eps() const { return eps_; }

private:
    double lambda_, eps_;
};

class NoackSystem : public FomSystem {
public:
    NoackSystem(double mu = 0.1, double omega = 1.0, double a = -0.1, double eps = 0.1)
        : mu_(mu), omega_(omega), a_(a), eps_(eps) {}
    long state_dim() const override { return 3; }
    Vec f(const Vec& x, const Vec& u) const override;
    Vec jvp_f(const Vec& x, const Vec& u, const Vec& v) const override;
    Vec vjp_f(const Vec& x, const Vec& u, const Vec& w) const override;
    Mat f_batch(const Mat& x, const Mat& u) const override;
    Mat vjp_f_batch(const Mat& x, const Mat& u, const Mat& w) const override;
    double mu() const { return mu_; }
    double omega() const { return omega_; }
    double a() const { return a_; }
    double eps() const { return eps_; }

private:
    double mu_, omega_, a_, eps_;
};

// x' = A x + B u, y = C x
class LtiSystem : public FomSystem {
public:
    LtiSystem(Mat a, Mat b, Mat c);
    long state_dim() const override { return a_.rows(); }
    long output_dim() const override { return c_.rows(); }
    long input_dim() const override { return b_.cols(); }
    Vec f(const Vec& x, const Vec& u) const override;
    Vec jvp_f(const Vec& x, const Vec& u, const Vec& v) const override;
    Vec vjp_f(const Vec& x, const Vec& u, const Vec& w) const override;
    Vec g(const Vec& x) const override { return c_ * x; }
    Vec vjp_g(const Vec& x, const Vec& w) const override;
    Mat jacobian_f(const Vec&, const Vec&) const override { return a_; }
    Mat jacobian_g(const Vec&) const override { return c_; }
    Mat f_batch(const Mat& x, const Mat& u) const override;
    Mat vjp_f_batch(const Mat& x, const Mat& u, const Mat& w) const override;
    Mat g_batch(const Mat& x) const override { return c_ * x; }
    Mat vjp_g_batch(const Mat& x, const Mat& w) const override;
    std::vector<std::vector<long>> coupling() const override;
    Vec f_restricted(const std::vector<long>& rows, const std::vector<long>& nbrs, const Vec& x_nbrs,
                     const Vec& u) const override;
    const Mat& a() const { return a_; }
    const Mat& b() const { return b_; }
    const Mat& c() const { return c_; }

private:
    Mat a_, b_, c_;
};

PitchforkSystem pitchfork_system(double lambda = 0.1, double eps = 0.1);
NoackSystem noack_system();
LtiSystem nonnormal_lti();
// Stable tridiagonal system with n states and full-state output.
LtiSystem banded_lti(long n);

struct Trajectory {
    Vec times;
    Mat states;  // T x n
    Mat inputs;  // T x d_u, or empty
    Mat derivs;  // T x n, or empty
    long size() const { return times.size(); }
    double dt() const { return times.size() > 1 ? times(1) - times(0) : 0.0; }
};

using InputFn = std::function<Vec(double)>;

// Classical RK4 with N = round((t1 - t0)/dt) steps. Throws BlowUpError when a
// state is non-finite or exceeds 1e6 in norm.
Trajectory rk4(const FomSystem& sys, const Vec& x0, double t0, double t1, double dt, const InputFn& u = nullptr,
               bool store_derivs = true);

// Jacobian of one RK4 step x -> x + dt/6 (k1 + 2k2 + 2k3 + k4), input held at u.
Mat rk4_step_jacobian(const FomSystem& sys, const Vec& x, const Vec& u, double dt);

struct GradientSample {
    Vec base;
    Vec grad;
};

// Base points every sg steps while the horizon fits (k + horizon <= T - 1);
// sg draws of xi per base point. A trajectory shorter than the horizon
// contributes one base point at k = 0 with the horizon truncated.
std::vector<GradientSample> sample_gradients(const FomSystem& sys, const Trajectory& traj, int sg, int horizon_steps,
                                             std::uint64_t seed);

// Same as above with explicit xi blocks: xi[j] is the (horizon+1) x m matrix of
// output weights for draw j at base point k.
Vec adjoint_gradient(const FomSystem& sys, const Trajectory& traj, long k, long horizon, const Mat& xi);

// Slow-manifold series. Entry k holds the ascending polynomial coefficients of
// the eps^k term.
std::vector<Vec> pitchfork_slow_manifold_series(double lambda, int order);
double pitchfork_slow_manifold(double x1, double eps, int order = 2, double lambda = 0.1);
double pitchfork_slow_manifold_dx(double x1, double eps, int order = 2, double lambda = 0.1);

// Terms are polynomials in rho = x1^2 + x2^2.
std::vector<Vec> noack_slow_manifold_series(double mu, double a, int order);
double noack_slow_manifold(double x1, double x2, double eps, int order = 4, const NoackSystem& sys = NoackSystem());
double noack_slow_manifold_rho(double rho, double eps, int order, const NoackSystem& sys);
double noack_slow_manifold_drho(double rho, double eps, int order, const NoackSystem& sys);

double poly_eval(const Vec& c, double x);
Vec poly_derivative(const Vec& c);
Vec poly_mul(const Vec& a, const Vec& b);

// snapshots: n x N columns.
BiorthogonalPair pod_projection(const Mat& snapshots, long r);

struct BalancedTruncation {
    BiorthogonalPair pair;
    Mat a_r, b_r, c_r;
    Vec hankel;  // all Hankel singular values, descending
    Mat wc, wo;
};

BalancedTruncation balanced_truncation(const Mat& a, const Mat& b, const Mat& c, long r);

// Tr[W_o (I - P) W_c (I - P)^T] for the oblique projection P = phi psi^T.
double gramian_trace(const Mat& wo, const Mat& wc, const Mat& p);

}  // namespace projae
