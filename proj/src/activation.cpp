#include "projae/activation.hpp"

#include <cmath>

#include "projae/error.hpp"

namespace projae {

namespace {
constexpr double kFarField = 1e8;
}

HyperbolicActivation::HyperbolicActivation(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha < std::numbers::pi / 4.0))
        throw Error("activation angle must lie in (0, pi/4)");
    s_ = std::sin(alpha);
    c_ = std::cos(alpha);
    a_ = 1.0 / (s_ * s_) - 1.0 / (c_ * c_);
    b_ = 1.0 / (s_ * s_) + 1.0 / (c_ * c_);
    kp_ = 1.0 / s_ + 1.0 / c_;
    km_ = 1.0 / s_ - 1.0 / c_;
    up_ = 2.0 / (s_ * c_);
}

double HyperbolicActivation::min_slope() const { return std::tan(std::numbers::pi / 4.0 - alpha_); }
double HyperbolicActivation::max_slope() const { return std::tan(std::numbers::pi / 4.0 + alpha_); }

double HyperbolicActivation::plus(double x) const {
    const double u = up_ * x - std::numbers::sqrt2 / c_;
    if (std::abs(x) <= kFarField)
        return b_ * x / a_ - std::numbers::sqrt2 / (a_ * s_) + std::sqrt(u * u + 2.0 * a_) / a_;
    // sqrt(u^2 + 2a) = |u| + 2a / (|u| + sqrt(u^2 + 2a)); the linear parts combine exactly
    const double root = std::sqrt(u * u + 2.0 * a_);
    const double k = u >= 0.0 ? kp_ : km_;
    return (k * k * x - std::numbers::sqrt2 * k) / a_ + 2.0 / (std::abs(u) + root);
}

double HyperbolicActivation::minus(double x) const {
    const double v = up_ * x + std::numbers::sqrt2 / c_;
    if (std::abs(x) <= kFarField)
        return b_ * x / a_ + std::numbers::sqrt2 / (a_ * s_) - std::sqrt(v * v + 2.0 * a_) / a_;
    const double root = std::sqrt(v * v + 2.0 * a_);
    const double k = v >= 0.0 ? km_ : kp_;
    return (k * k * x + std::numbers::sqrt2 * k) / a_ - 2.0 / (std::abs(v) + root);
}

double HyperbolicActivation::derivative(double x, Branch br, int order) const {
    if (order == 0) return eval(x, br);
    const double sign = br == Branch::Plus ? 1.0 : -1.0;
    const double w = up_ * x - sign * std::numbers::sqrt2 / c_;
    const double q = w * w + 2.0 * a_;
    const double root = std::sqrt(q);
    if (order == 1) {
        if (std::abs(x) <= kFarField) return b_ / a_ + sign * up_ * w / (a_ * root);
        // w / root = sign(w) (1 - 2a / (root (|w| + root)))
        const double sw = w >= 0.0 ? 1.0 : -1.0;
        const double lead = (b_ + sign * sw * up_) / a_;
        return lead - sign * sw * up_ * 2.0 / (root * (std::abs(w) + root));
    }
    if (order == 2) return sign * 2.0 * up_ * up_ / (q * root);
    throw Error("activation derivative order must be 0, 1 or 2");
}

Mat HyperbolicActivation::apply(const Mat& x, Branch br, int order) const {
    Mat out(x.rows(), x.cols());
    const double* in = x.data();
    double* o = out.data();
    const Eigen::Index n = x.size();
    if (order == 0 && br == Branch::Plus)
        for (Eigen::Index i = 0; i < n; ++i) o[i] = plus(in[i]);
    else if (order == 0)
        for (Eigen::Index i = 0; i < n; ++i) o[i] = minus(in[i]);
    else
        for (Eigen::Index i = 0; i < n; ++i) o[i] = derivative(in[i], br, order);
    return out;
}

double gelu(double x, int order) {
    const double cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    switch (order) {
        case 0: return x * cdf;
        case 1: return cdf + x * pdf;
        case 2: return pdf * (2.0 - x * x);
        default: throw Error("gelu derivative order must be 0, 1 or 2");
    }
}

Mat Activation::apply(const Mat& x, Branch br, int order) const {
    switch (kind) {
        case ActKind::Hyperbolic: return hyp.apply(x, br, order);
        case ActKind::Identity:
            if (order == 0) return x;
            if (order == 1) return Mat::Ones(x.rows(), x.cols());
            return Mat::Zero(x.rows(), x.cols());
        case ActKind::Gelu:
            return x.unaryExpr([order](double v) { return gelu(v, order); });
    }
    throw Error("unknown activation kind");
}

}  // namespace projae
