#include "projae/ad.hpp"

#include "projae/error.hpp"

namespace projae::ad {

const Mat& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Mat value) {
    nodes_.push_back(Node{std::move(value), Mat(), false, false, nullptr});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::variable(Mat value) {
    nodes_.push_back(Node{std::move(value), Mat(), recording_, false, nullptr});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::push(Mat value, const char* op, std::initializer_list<Var> parents, Backward backward) {
    if (!value.allFinite()) {
        std::string where = scope_.empty() ? std::string() : " in " + scope_;
        throw Error(std::string("non-finite value produced by ") + op + where);
    }
    bool needs = false;
    if (recording_)
        for (const Var& p : parents) needs = needs || nodes_[p.id()].needs_grad;
    nodes_.push_back(Node{std::move(value), Mat(), needs, false, needs ? std::move(backward) : nullptr});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int id, const Mat& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (!n.has_grad) {
        n.grad = g;
        n.has_grad = true;
    } else {
        n.grad += g;
    }
}

void Tape::backward(Var root) {
    if (!recording_) throw Error("backward on a non-recording tape");
    if (root.rows() != 1 || root.cols() != 1) throw ShapeError("backward needs a scalar root");
    accumulate(root.id(), Mat::Ones(1, 1));
    for (int id = root.id(); id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.has_grad || !n.backward) continue;
        // copy: callbacks may grow grads of earlier nodes but never this one
        const Mat g = n.grad;
        n.backward(*this, g);
    }
}

const Mat& Tape::grad(Var v) const {
    const Node& n = nodes_[v.id()];
    return n.has_grad ? n.grad : empty_;
}

namespace {

void check_same(Var a, Var b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
}

}  // namespace

Var operator+(Var a, Var b) {
    check_same(a, b, "add");
    const int ia = a.id(), ib = b.id();
    return a.tape()->push(a.value() + b.value(), "add", {a, b}, [ia, ib](Tape& t, const Mat& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, g);
    });
}

Var operator-(Var a, Var b) {
    check_same(a, b, "sub");
    const int ia = a.id(), ib = b.id();
    return a.tape()->push(a.value() - b.value(), "sub", {a, b}, [ia, ib](Tape& t, const Mat& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, -g);
    });
}

Var operator*(double s, Var a) {
    const int ia = a.id();
    return a.tape()->push(s * a.value(), "scale", {a}, [ia, s](Tape& t, const Mat& g) { t.accumulate(ia, s * g); });
}

Var matmul(Var a, Var b) {
    if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
    const int ia = a.id(), ib = b.id();
    return a.tape()->push(a.value() * b.value(), "matmul", {a, b}, [ia, ib](Tape& t, const Mat& g) {
        if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
        if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
    });
}

Var matmul_tn(Var a, Var b) {
    if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts differ");
    const int ia = a.id(), ib = b.id();
    return a.tape()->push(a.value().transpose() * b.value(), "matmul_tn", {a, b}, [ia, ib](Tape& t, const Mat& g) {
        if (t.needs_grad(ia)) t.accumulate(ia, t.value(ib) * g.transpose());
        if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia) * g);
    });
}

Var hadamard(Var a, Var b) {
    check_same(a, b, "hadamard");
    const int ia = a.id(), ib = b.id();
    return a.tape()->push(a.value().cwiseProduct(b.value()), "hadamard", {a, b}, [ia, ib](Tape& t, const Mat& g) {
        if (t.needs_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
        if (t.needs_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
    });
}

Var add_col(Var m, Var c) {
    if (c.cols() != 1 || c.rows() != m.rows()) throw ShapeError("add_col: bias shape mismatch");
    const int im = m.id(), ic = c.id();
    Mat v = m.value().colwise() + c.value().col(0);
    return m.tape()->push(std::move(v), "add_col", {m, c}, [im, ic](Tape& t, const Mat& g) {
        t.accumulate(im, g);
        if (t.needs_grad(ic)) t.accumulate(ic, g.rowwise().sum());
    });
}

Var sub_col(Var m, Var c) {
    if (c.cols() != 1 || c.rows() != m.rows()) throw ShapeError("sub_col: bias shape mismatch");
    const int im = m.id(), ic = c.id();
    Mat v = m.value().colwise() - c.value().col(0);
    return m.tape()->push(std::move(v), "sub_col", {m, c}, [im, ic](Tape& t, const Mat& g) {
        t.accumulate(im, g);
        if (t.needs_grad(ic)) t.accumulate(ic, -g.rowwise().sum());
    });
}

Var activation(Var a, const Activation& act, Branch br, int order) {
    if (act.kind == ActKind::Identity && order == 0) return a;
    const int ia = a.id();
    Mat v = act.apply(a.value(), br, order);
    if (act.kind == ActKind::Identity) return a.tape()->constant(std::move(v));
    return a.tape()->push(std::move(v), "activation", {a}, [ia, act, br, order](Tape& t, const Mat& g) {
        t.accumulate(ia, act.apply(t.value(ia), br, order + 1).cwiseProduct(g));
    });
}

Var inverse(Var a) {
    if (a.rows() != a.cols()) throw ShapeError("inverse: matrix not square");
    Mat inv = solve(a.value(), Mat::Identity(a.rows(), a.cols()));
    const int ia = a.id();
    const int io = static_cast<int>(a.tape()->size());
    return a.tape()->push(std::move(inv), "inverse", {a}, [ia, io](Tape& t, const Mat& g) {
        // d(M^-1) = -M^-1 dM M^-1
        const Mat& v = t.value(io);
        t.accumulate(ia, -(v.transpose() * g * v.transpose()));
    });
}

Var sum_squares(Var a) {
    const int ia = a.id();
    Mat v(1, 1);
    v(0, 0) = a.value().squaredNorm();
    return a.tape()->push(std::move(v), "sum_squares", {a},
                          [ia](Tape& t, const Mat& g) { t.accumulate(ia, (2.0 * g(0, 0)) * t.value(ia)); });
}

Var weighted_sum_squares(Var a, const Vec& w) {
    if (w.size() != a.cols()) throw ShapeError("weighted_sum_squares: weight count mismatch");
    const int ia = a.id();
    Mat v(1, 1);
    v(0, 0) = (a.value().colwise().squaredNorm() * w)(0, 0);
    return a.tape()->push(std::move(v), "weighted_sum_squares", {a}, [ia, w](Tape& t, const Mat& g) {
        t.accumulate(ia, (2.0 * g(0, 0)) * (t.value(ia) * w.asDiagonal()));
    });
}

Var col_dots(Var a, Var b) {
    check_same(a, b, "col_dots");
    const int ia = a.id(), ib = b.id();
    Mat v = a.value().cwiseProduct(b.value()).colwise().sum();
    return a.tape()->push(std::move(v), "col_dots", {a, b}, [ia, ib](Tape& t, const Mat& g) {
        const auto gr = g.row(0).asDiagonal();
        if (t.needs_grad(ia)) t.accumulate(ia, t.value(ib) * gr);
        if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia) * gr);
    });
}

Var sub_identity(Var a) {
    if (a.rows() != a.cols()) throw ShapeError("sub_identity: matrix not square");
    const int ia = a.id();
    return a.tape()->push(a.value() - Mat::Identity(a.rows(), a.cols()), "sub_identity", {a},
                          [ia](Tape& t, const Mat& g) { t.accumulate(ia, g); });
}

Var external(Var x, Mat value, const char* op, std::function<Mat(const Mat&, const Mat&)> vjp) {
    const int ix = x.id();
    return x.tape()->push(std::move(value), op, {x}, [ix, vjp = std::move(vjp)](Tape& t, const Mat& g) {
        t.accumulate(ix, vjp(t.value(ix), g));
    });
}

Var custom_scalar(Var x, double value, Mat subgrad, const char* op) {
    const int ix = x.id();
    Mat v(1, 1);
    v(0, 0) = value;
    return x.tape()->push(std::move(v), op, {x}, [ix, sg = std::move(subgrad)](Tape& t, const Mat& g) {
        t.accumulate(ix, g(0, 0) * sg);
    });
}

}  // namespace projae::ad
