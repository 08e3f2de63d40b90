#pragma once

#include <functional>
#include <string>
#include <vector>

#include "projae/activation.hpp"
#include "projae/matkit.hpp"

namespace projae::ad {

class Tape;

class Var {
public:
    Var() = default;

    const Mat& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    double scalar() const { return value()(0, 0); }
    Tape* tape() const { return tape_; }
    int id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* t, int id) : tape_(t), id_(id) {}
    Tape* tape_ = nullptr;
    int id_ = -1;
};

// Reverse-mode tape over dense matrices. Nodes are appended in evaluation order
// and the reverse sweep visits each node once. With recording off the tape only
// stores values, which is how plain forward evaluation runs.
class Tape {
public:
    using Backward = std::function<void(Tape&, const Mat& g)>;

    explicit Tape(bool recording = true) : recording_(recording) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }

    Var constant(Mat value);
    Var variable(Mat value);

    // Parents are used only to decide whether the node needs a gradient.
    Var push(Mat value, const char* op, std::initializer_list<Var> parents, Backward backward);

    void backward(Var root);
    const Mat& grad(Var v) const;
    void accumulate(int id, const Mat& g);
    bool needs_grad(int id) const { return nodes_[id].needs_grad; }

    const Mat& value(int id) const { return nodes_[id].value; }
    std::size_t size() const { return nodes_.size(); }

    // Label attached to non-finite diagnostics, e.g. "layer 3".
    void set_scope(std::string scope) { scope_ = std::move(scope); }
    const std::string& scope() const { return scope_; }

private:
    struct Node {
        Mat value;
        Mat grad;
        bool needs_grad = false;
        bool has_grad = false;
        Backward backward;
    };
    bool recording_;
    std::vector<Node> nodes_;
    std::string scope_;
    Mat empty_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(double s, Var a);
Var matmul(Var a, Var b);
Var matmul_tn(Var a, Var b);  // a^T b
Var hadamard(Var a, Var b);
Var add_col(Var m, Var c);  // c broadcast across columns
Var sub_col(Var m, Var c);
Var activation(Var a, const Activation& act, Branch br, int order);
Var inverse(Var a);
Var sum_squares(Var a);                  // 1x1
Var weighted_sum_squares(Var a, const Vec& col_weights);  // sum_k w_k ||a_k||^2
Var col_dots(Var a, Var b);              // 1 x B
Var sub_identity(Var a);                 // a - I

// Column-wise external map y_k = f(x_k) with a supplied adjoint
// vjp(x, g) = (df/dx)^T g, both applied to whole matrices.
Var external(Var x, Mat value, const char* op, std::function<Mat(const Mat& x, const Mat& g)> vjp);

// Nonsmooth penalty on a full-rank matrix with a caller-supplied subgradient.
Var custom_scalar(Var x, double value, Mat subgrad, const char* op);

}  // namespace projae::ad
