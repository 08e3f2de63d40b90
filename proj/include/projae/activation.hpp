#pragma once

#include <numbers>

#include "projae/matkit.hpp"

namespace projae {

enum class Branch { Plus, Minus };

// Smooth bi-Lipschitz leaky-ReLU pair. sigma_minus inverts sigma_plus and the
// slopes stay inside [tan(pi/4 - alpha), tan(pi/4 + alpha)].
class HyperbolicActivation {
public:
    explicit HyperbolicActivation(double alpha = std::numbers::pi / 8.0);

    double alpha() const { return alpha_; }
    double a() const { return a_; }
    double b() const { return b_; }

    double plus(double x) const;
    double minus(double x) const;
    double eval(double x, Branch br) const { return br == Branch::Plus ? plus(x) : minus(x); }
    // order in {0, 1, 2}
    double derivative(double x, Branch br, int order) const;

    double min_slope() const;
    double max_slope() const;

    Mat apply(const Mat& x, Branch br, int order) const;

private:
    double alpha_, s_, c_, a_, b_;
    double kp_, km_;  // 1/s + 1/c and 1/s - 1/c
    double up_;       // 2/(s c)
};

enum class ActKind { Hyperbolic, Identity, Gelu };

double gelu(double x, int order);

// Dispatches an activation branch elementwise. For Hyperbolic the branch picks
// sigma+/sigma-; Identity ignores it; Gelu has only one branch.
struct Activation {
    ActKind kind = ActKind::Hyperbolic;
    HyperbolicActivation hyp{};

    Mat apply(const Mat& x, Branch br, int order) const;
};

}  // namespace projae
