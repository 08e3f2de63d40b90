#include "projae/rom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include <Eigen/Eigenvalues>

#include "projae/error.hpp"

namespace projae {

namespace {

constexpr double kBlowUp = 1e6;
constexpr double kInf = std::numeric_limits<double>::infinity();

Mat gather_cols(const Mat& m, const std::vector<long>& idx) {
    Mat out(m.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(idx[k]);
    return out;
}

Mat input_block(const InputFn& u, long input_dim, double t, long cols) {
    if (input_dim == 0 || !u) return Mat::Zero(input_dim, cols);
    const Vec ut = u(t);
    if (ut.size() != input_dim) throw ShapeError("input function returned the wrong dimension");
    return ut.replicate(1, cols);
}

}  // namespace

LinearMap::LinearMap(BiorthogonalPair pair, Vec offset) : pair_(std::move(pair)), offset_(std::move(offset)) {
    if (pair_.phi.rows() != pair_.psi.rows() || pair_.phi.cols() != pair_.psi.cols())
        throw ShapeError("LinearMap: phi and psi shapes differ");
    if (offset_.size() == 0) offset_ = Vec::Zero(pair_.phi.rows());
    if (offset_.size() != pair_.phi.rows()) throw ShapeError("LinearMap: offset has wrong length");
}

Mat LinearMap::encode(const Mat& x) const { return pair_.psi.transpose() * (x.colwise() - offset_); }

Mat LinearMap::decode(const Mat& z) const { return (pair_.phi * z).colwise() + offset_; }

Mat GraphMap::decode(const Mat& z) const {
    Mat x(2, z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        x(0, j) = z(0, j);
        x(1, j) = h_(z(0, j));
    }
    return x;
}

Mat GraphMap::jvp_decode(const Mat& z, const Mat& w) const {
    Mat t(2, z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        t(0, j) = w(0, j);
        t(1, j) = dh_(z(0, j)) * w(0, j);
    }
    return t;
}

const char* rom_name(RomKind kind) { return kind == RomKind::Enc ? "EncROM" : "DecROM"; }

Mat enc_rom_rhs(const LatentMap& map, const FomSystem& sys, const Mat& z, const Mat& u) {
    const Mat x = map.decode(z);
    return map.jvp_encode(x, sys.f_batch(x, u));
}

Mat dec_rom_rhs(const LatentMap& map, const FomSystem& sys, const Mat& z, const Mat& u) {
    const long r = map.latent_dim();
    const long b = z.cols();
    const Mat x = map.decode(z);
    const Mat fx = sys.f_batch(x, u);
    std::vector<Mat> jcols;
    for (long j = 0; j < r; ++j) {
        Mat e = Mat::Zero(r, b);
        e.row(j).setOnes();
        jcols.push_back(map.jvp_decode(z, e));
    }
    Mat out(r, b);
    Mat jac(map.state_dim(), r);
    for (long c = 0; c < b; ++c) {
        for (long j = 0; j < r; ++j) jac.col(j) = jcols[static_cast<std::size_t>(j)].col(c);
        Mat gram = jac.transpose() * jac;
        Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
        const double lmax = es.eigenvalues().maxCoeff();
        const double lmin = es.eigenvalues().minCoeff();
        const double cond = lmin > 0.0 ? lmax / lmin : kInf;
        if (!(cond <= 1e12)) throw IllConditionedError("decoder tangent Gram matrix has condition " + std::to_string(cond));
        if (cond > 1e8) gram.diagonal().array() += 1e-12 * gram.trace();
        out.col(c) = gram.ldlt().solve(jac.transpose() * fx.col(c));
    }
    return out;
}

Mat rom_rhs(RomKind kind, const LatentMap& map, const FomSystem& sys, const Mat& z, const Mat& u) {
    return kind == RomKind::Enc ? enc_rom_rhs(map, sys, z, u) : dec_rom_rhs(map, sys, z, u);
}

bool RomRun::any_blown() const { return std::any_of(blown.begin(), blown.end(), [](bool b) { return b; }); }

Trajectory RomRun::lifted_trajectory(long col) const {
    Trajectory tr;
    tr.times = times;
    tr.states.resize(times.size(), lifted.empty() ? 0 : lifted.front().rows());
    for (std::size_t k = 0; k < lifted.size(); ++k) tr.states.row(static_cast<Eigen::Index>(k)) = lifted[k].col(col).transpose();
    return tr;
}

Trajectory RomRun::latent_trajectory(long col) const {
    Trajectory tr;
    tr.times = times;
    tr.states.resize(times.size(), latent.empty() ? 0 : latent.front().rows());
    for (std::size_t k = 0; k < latent.size(); ++k) tr.states.row(static_cast<Eigen::Index>(k)) = latent[k].col(col).transpose();
    return tr;
}

RomRun integrate_latent(const LatentRhs& rhs, const LatentLift& lift, const Mat& z0, double t0, double t1, double dt,
                        int substeps, long input_dim, const InputFn& u) {
    if (!(dt > 0.0) || substeps < 1) throw ConfigError("integrate_latent needs dt > 0 and substeps >= 1");
    const long steps = std::lround((t1 - t0) / dt);
    const long b = z0.cols();
    const double h = dt / substeps;
    RomRun run;
    run.times = Vec::LinSpaced(steps + 1, t0, t0 + steps * dt);
    run.blown.assign(static_cast<std::size_t>(b), false);
    run.blow_time.assign(static_cast<std::size_t>(b), kInf);
    Mat z = z0;

    auto active = [&] {
        std::vector<long> idx;
        for (long j = 0; j < b; ++j)
            if (!run.blown[static_cast<std::size_t>(j)]) idx.push_back(j);
        return idx;
    };
    auto mark = [&](long col, double t) {
        run.blown[static_cast<std::size_t>(col)] = true;
        run.blow_time[static_cast<std::size_t>(col)] = t;
    };
    // rhs on the given columns; columns whose evaluation fails are marked.
    auto eval = [&](const Mat& zs, const std::vector<long>& idx, double t) {
        const Mat us = input_block(u, input_dim, t, zs.cols());
        Mat k;
        try {
            k = rhs(zs, us);
        } catch (const Error&) {
            k = Mat::Zero(zs.rows(), zs.cols());
            for (Eigen::Index c = 0; c < zs.cols(); ++c) {
                try {
                    k.col(c) = rhs(zs.col(c), us.col(c));
                } catch (const Error&) {
                    mark(idx[static_cast<std::size_t>(c)], t);
                }
            }
        }
        for (Eigen::Index c = 0; c < k.cols(); ++c)
            if (!k.col(c).allFinite()) {
                mark(idx[static_cast<std::size_t>(c)], t);
                k.col(c).setZero();
            }
        return k;
    };
    long lift_rows = -1;
    for (long j = 0; j < b && lift_rows < 0; ++j) {
        if (!z0.col(j).allFinite()) continue;
        try {
            lift_rows = lift(z0.col(j)).rows();
        } catch (const Error&) {
        }
    }
    auto lift_all = [&](double t) {
        Mat x = Mat::Constant(std::max(0L, lift_rows), b, kInf);
        const std::vector<long> idx = active();
        if (!idx.empty() && lift_rows >= 0) {
            Mat xs;
            try {
                xs = lift(gather_cols(z, idx));
            } catch (const Error&) {
                xs = Mat::Constant(x.rows(), static_cast<Eigen::Index>(idx.size()), kInf);
                for (std::size_t c = 0; c < idx.size(); ++c) {
                    try {
                        xs.col(static_cast<Eigen::Index>(c)) = lift(z.col(idx[c]));
                    } catch (const Error&) {
                    }
                }
            }
            for (std::size_t c = 0; c < idx.size(); ++c) {
                const auto col = xs.col(static_cast<Eigen::Index>(c));
                if (!col.allFinite() || col.norm() > kBlowUp) {
                    mark(idx[c], t);
                } else {
                    x.col(idx[c]) = col;
                }
            }
        }
        return x;
    };

    for (long j = 0; j < b; ++j)
        if (!z.col(j).allFinite() || lift_rows < 0) {
            mark(j, t0);
            z.col(j).setZero();
        }
    run.latent.push_back(z);
    run.lifted.push_back(lift_all(t0));
    for (long s = 0; s < steps; ++s) {
        for (int sub = 0; sub < substeps; ++sub) {
            const double t = t0 + s * dt + sub * h;
            const std::vector<long> idx = active();
            if (idx.empty()) break;
            const Mat za = gather_cols(z, idx);
            const Mat k1 = eval(za, idx, t);
            const Mat k2 = eval(za + 0.5 * h * k1, idx, t + 0.5 * h);
            const Mat k3 = eval(za + 0.5 * h * k2, idx, t + 0.5 * h);
            const Mat k4 = eval(za + h * k3, idx, t + h);
            const Mat zn = za + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            for (std::size_t c = 0; c < idx.size(); ++c) {
                const long col = idx[c];
                if (run.blown[static_cast<std::size_t>(col)]) continue;
                const auto zc = zn.col(static_cast<Eigen::Index>(c));
                if (!zc.allFinite() || zc.norm() > kBlowUp) {
                    mark(col, t + h);
                } else {
                    z.col(col) = zc;
                }
            }
        }
        Mat zs = z;
        for (long j = 0; j < b; ++j)
            if (run.blown[static_cast<std::size_t>(j)]) zs.col(j).setConstant(kInf);
        const double t = t0 + (s + 1) * dt;
        Mat x = lift_all(t);
        for (long j = 0; j < b; ++j)
            if (run.blown[static_cast<std::size_t>(j)]) {
                zs.col(j).setConstant(kInf);
                x.col(j).setConstant(kInf);
            }
        run.latent.push_back(std::move(zs));
        run.lifted.push_back(std::move(x));
    }
    return run;
}

RomRun simulate_rom(const LatentMap& map, const FomSystem& sys, RomKind kind, const Mat& x0, double t0, double t1,
                    double dt, int substeps, const InputFn& u) {
    const Mat z0 = map.encode(x0);
    LatentRhs rhs = [&](const Mat& z, const Mat& us) { return rom_rhs(kind, map, sys, z, us); };
    LatentLift lift = [&](const Mat& z) { return map.decode(z); };
    return integrate_latent(rhs, lift, z0, t0, t1, dt, substeps, sys.input_dim(), u);
}

Mat noack_manifold_grid(const NoackSystem& sys, int grid, int order) {
    Mat pts(3, static_cast<Eigen::Index>(grid) * grid);
    const Vec axis = Vec::LinSpaced(grid, -1.0, 1.0);
    Eigen::Index k = 0;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j, ++k) {
            pts(0, k) = axis(i);
            pts(1, k) = axis(j);
            pts(2, k) = noack_slow_manifold(axis(i), axis(j), sys.eps(), order, sys);
        }
    return pts;
}

double manifold_recon_error(const LatentMap& map, const NoackSystem& sys, int grid, int order) {
    const Mat pts = noack_manifold_grid(sys, grid, order);
    Mat proj;
    try {
        proj = map.project(pts);
    } catch (const Error&) {
        return kInf;
    }
    return (pts - proj).colwise().squaredNorm().mean();
}

PredError rom_pred_error(const LatentMap& map, const FomSystem& sys, RomKind kind,
                         const std::vector<const Trajectory*>& trajs, int substeps) {
    if (trajs.empty()) throw Error("rom_pred_error needs at least one trajectory");
    const Trajectory& ref = *trajs.front();
    const long n = ref.states.cols();
    Mat x0(n, static_cast<Eigen::Index>(trajs.size()));
    for (std::size_t j = 0; j < trajs.size(); ++j) {
        if (trajs[j]->size() != ref.size() || (trajs[j]->times - ref.times).cwiseAbs().maxCoeff() > 1e-12)
            throw ShapeError("rom_pred_error needs a shared time grid");
        x0.col(static_cast<Eigen::Index>(j)) = trajs[j]->states.row(0).transpose();
    }
    PredError out;
    Mat z0;
    try {
        z0 = map.encode(x0);
    } catch (const Error&) {
        out.mean = kInf;
        out.per_traj.assign(trajs.size(), kInf);
        out.blown = static_cast<long>(trajs.size());
        return out;
    }
    LatentRhs rhs = [&](const Mat& z, const Mat& us) { return rom_rhs(kind, map, sys, z, us); };
    LatentLift lift = [&](const Mat& z) { return map.decode(z); };
    const RomRun run = integrate_latent(rhs, lift, z0, ref.times(0), ref.times(ref.size() - 1), ref.dt(), substeps);
    double total = 0.0;
    long count = 0;
    for (std::size_t j = 0; j < trajs.size(); ++j) {
        if (run.blown[j]) {
            out.per_traj.push_back(kInf);
            ++out.blown;
            continue;
        }
        double s = 0.0;
        for (long k = 0; k < ref.size(); ++k)
            s += (run.lifted[static_cast<std::size_t>(k)].col(static_cast<Eigen::Index>(j)) -
                  trajs[j]->states.row(k).transpose())
                     .squaredNorm();
        out.per_traj.push_back(s / static_cast<double>(ref.size()));
        total += s;
        count += ref.size();
    }
    out.mean = out.blown > 0 ? kInf : total / static_cast<double>(count);
    return out;
}

namespace {

double cubic(double r) { return r * r * r; }

}  // namespace

Mat RbfInterpolant::eval(const Mat& z) const {
    const long n = centers.cols();
    Mat k(n, z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j)
        for (long i = 0; i < n; ++i) k(i, j) = cubic((centers.col(i) - z.col(j)).norm());
    Mat p(z.rows() + 1, z.cols());
    p.row(0).setOnes();
    p.bottomRows(z.rows()) = z;
    return weights.transpose() * k + poly.transpose() * p;
}

RbfInterpolant fit_rbf(const Mat& centers, const Mat& values) {
    const long n = centers.cols(), d = centers.rows();
    if (values.cols() != n) throw ShapeError("fit_rbf: one value column per center");
    if (n < d + 1) throw ShapeError("fit_rbf: too few centers for the linear tail");
    Mat sys = Mat::Zero(n + d + 1, n + d + 1);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) sys(i, j) = cubic((centers.col(i) - centers.col(j)).norm());
    for (long i = 0; i < n; ++i) {
        sys(i, n) = 1.0;
        sys(n, i) = 1.0;
        for (long k = 0; k < d; ++k) {
            sys(i, n + 1 + k) = centers(k, i);
            sys(n + 1 + k, i) = centers(k, i);
        }
    }
    Mat rhs = Mat::Zero(n + d + 1, values.rows());
    rhs.topRows(n) = values.transpose();
    const Mat sol = solve(sys, rhs);
    RbfInterpolant out;
    out.centers = centers;
    out.weights = sol.topRows(n);
    out.poly = sol.bottomRows(d + 1);
    return out;
}

namespace {

Mat grid_points(const Vec& lo, const Vec& hi, int per_axis) {
    const long d = lo.size();
    long total = 1;
    for (long k = 0; k < d; ++k) total *= per_axis;
    Mat pts(d, total);
    for (long idx = 0; idx < total; ++idx) {
        long rem = idx;
        for (long k = d - 1; k >= 0; --k) {
            const long i = rem % per_axis;
            rem /= per_axis;
            pts(k, idx) = per_axis == 1 ? 0.5 * (lo(k) + hi(k)) : lo(k) + (hi(k) - lo(k)) * i / (per_axis - 1.0);
        }
    }
    return pts;
}

}  // namespace

LatentSurrogate fit_latent_surrogate(const LatentMap& map, const FomSystem& sys, const SurrogateSpec& spec) {
    const long r = map.latent_dim();
    if (sys.input_dim() != 0) throw ConfigError("latent surrogates are fitted for autonomous systems only");
    if (spec.lo.size() != r || spec.hi.size() != r) throw ShapeError("surrogate box has wrong dimension");
    Mat centers, held;
    if (r <= 3) {
        centers = grid_points(spec.lo, spec.hi, spec.grid);
        const Vec h = (spec.hi - spec.lo) / (spec.grid - 1.0);
        held = grid_points(spec.lo + 0.5 * h, spec.hi - 0.5 * h, std::max(1, spec.grid - 1));
    } else {
        const long count = spec.samples > 0 ? spec.samples : 200 * r;
        std::mt19937_64 rng(spec.seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        auto draw = [&](long m) {
            Mat pts(r, m);
            for (long j = 0; j < m; ++j) {
                if (spec.encoded_data && spec.encoded_data->cols() > 0) {
                    const long pick = static_cast<long>(unif(rng) * spec.encoded_data->cols()) % spec.encoded_data->cols();
                    for (long k = 0; k < r; ++k)
                        pts(k, j) = (*spec.encoded_data)(k, pick) + 0.05 * (spec.hi(k) - spec.lo(k)) * gauss(rng);
                } else {
                    for (long k = 0; k < r; ++k) pts(k, j) = spec.lo(k) + (spec.hi(k) - spec.lo(k)) * unif(rng);
                }
            }
            return pts;
        };
        centers = draw(count);
        held = draw(std::max<long>(50, count / 10));
    }
    const Mat none(0, centers.cols());
    LatentSurrogate out;
    out.f = fit_rbf(centers, enc_rom_rhs(map, sys, centers, none));
    out.g = fit_rbf(centers, sys.g_batch(map.decode(centers)));
    out.center_residual = std::max((out.f.eval(centers) - enc_rom_rhs(map, sys, centers, none)).cwiseAbs().maxCoeff(),
                                   (out.g.eval(centers) - sys.g_batch(map.decode(centers))).cwiseAbs().maxCoeff());
    const Mat none_h(0, held.cols());
    out.heldout_max_error = (out.f.eval(held) - enc_rom_rhs(map, sys, held, none_h)).cwiseAbs().maxCoeff();
    return out;
}

OuterLayerSplit::OuterLayerSplit(const ProjAE& net) : act_(net.activation()) {
    const std::size_t nl = net.num_layers();
    const BiorthogonalPair last = net.pair(nl - 1);
    phi_ = last.phi;
    psi_ = last.psi;
    bias_ = net.bias(nl - 1);
    if (nl > 1) {
        std::vector<long> widths(net.widths().begin(), net.widths().end() - 1);
        std::vector<LayerParams> layers;
        for (std::size_t l = 0; l + 1 < nl; ++l) layers.push_back(net.layer(l));
        inner_.emplace(std::move(widths), std::move(layers), act_, ProjAEOptions{});
    }
}

Mat OuterLayerSplit::inner_decode(const Mat& z) const {
    return act_.apply(inner_ ? inner_->decode(z) : z, Branch::Plus, 0);
}

Mat OuterLayerSplit::inner_encode_jvp(const Mat& y, const Mat& v) const {
    const Mat dv = act_.apply(y, Branch::Minus, 1).cwiseProduct(v);
    if (!inner_) return dv;
    return inner_->jvp_encode(act_.apply(y, Branch::Minus, 0), dv);
}

BilinearForm noack_bilinear(const NoackSystem& sys) {
    const double a = sys.a(), eps = sys.eps();
    return [a, eps](const Vec& x, const Vec& y) {
        Vec out(3);
        out(0) = 0.5 * a * (x(0) * y(2) + x(2) * y(0));
        out(1) = 0.5 * a * (x(1) * y(2) + x(2) * y(1));
        out(2) = (x(0) * y(0) + x(1) * y(1)) / eps;
        return out;
    };
}

Mat noack_linear_part(const NoackSystem& sys) {
    Mat a = Mat::Zero(3, 3);
    a(0, 0) = sys.mu();
    a(0, 1) = -sys.omega();
    a(1, 0) = sys.omega();
    a(1, 1) = sys.mu();
    a(2, 2) = -1.0 / sys.eps();
    return a;
}

nlohmann::json BilinearTensors::to_json() const {
    nlohmann::json j;
    j["a"] = mat_to_json(a);
    j["b"] = mat_to_json(b);
    j["c"] = nlohmann::json::array();
    for (const Mat& ci : c) j["c"].push_back(mat_to_json(ci));
    return j;
}

BilinearTensors assemble_bilinear_tensors(const Mat& phi_l, const Mat& psi_l, const Vec& b_l, const BilinearForm& h2) {
    const long m = phi_l.cols();
    BilinearTensors t;
    t.a = psi_l.transpose() * h2(b_l, b_l);
    t.b.resize(m, m);
    for (long j = 0; j < m; ++j) t.b.col(j) = psi_l.transpose() * h2(b_l, phi_l.col(j));
    t.c.assign(static_cast<std::size_t>(m), Mat::Zero(m, m));
    for (long j1 = 0; j1 < m; ++j1)
        for (long j2 = j1; j2 < m; ++j2) {
            const Vec v = psi_l.transpose() * h2(phi_l.col(j1), phi_l.col(j2));
            for (long i = 0; i < m; ++i) {
                t.c[static_cast<std::size_t>(i)](j1, j2) = v(i);
                t.c[static_cast<std::size_t>(i)](j2, j1) = v(i);
            }
        }
    return t;
}

BilinearTensors assemble_bilinear_tensors(const OuterLayerSplit& split, const BilinearForm& h2) {
    return assemble_bilinear_tensors(split.phi(), split.psi(), split.bias(), h2);
}

Mat tensor_rom_f2(const BilinearTensors& t, const Mat& y) {
    const long m = t.a.size();
    if (y.rows() != m) throw ShapeError("tensor_rom_f2: wrong latent width");
    Mat out = t.a.replicate(1, y.cols()) + 2.0 * t.b * y;
    for (long i = 0; i < m; ++i) {
        const Mat cy = t.c[static_cast<std::size_t>(i)] * y;
        out.row(i) += cy.cwiseProduct(y).colwise().sum();
    }
    return out;
}

TensorRom::TensorRom(const ProjAE& net, const Mat& linear, const BilinearForm& h2)
    : split_(net), tensors_(assemble_bilinear_tensors(split_, h2)) {
    lin_const_ = split_.psi().transpose() * linear * split_.bias();
    lin_ = split_.psi().transpose() * linear * split_.phi();
}

Mat TensorRom::rhs(const Mat& z) const {
    const Mat y = split_.inner_decode(z);
    const Mat v = (lin_ * y).colwise() + lin_const_ + tensor_rom_f2(tensors_, y);
    return split_.inner_encode_jvp(y, v);
}

Vec orthonormal_row_norms(const Mat& psi) { return qr_thin(psi).Q.rowwise().norm(); }

SparseEncoderPlan build_sparse_plan(const ProjAE& net, const FomSystem& sys, double tol) {
    const std::size_t last = net.num_layers() - 1;
    const Mat psi = net.pair(last).psi;
    const Vec norms = orthonormal_row_norms(psi);
    SparseEncoderPlan plan;
    for (long i = 0; i < norms.size(); ++i)
        if (norms(i) >= tol) plan.rows.push_back(i);
    if (static_cast<long>(plan.rows.size()) < psi.cols())
        throw SparsificationError("only " + std::to_string(plan.rows.size()) + " rows of psi_L survive, need " +
                                  std::to_string(psi.cols()));
    auto pruned = std::make_shared<ProjAE>(net);
    std::vector<bool> keep(static_cast<std::size_t>(norms.size()), false);
    for (long i : plan.rows) keep[static_cast<std::size_t>(i)] = true;
    for (long i = 0; i < norms.size(); ++i)
        if (!keep[static_cast<std::size_t>(i)]) pruned->layer(last).rep.psi_t.row(i).setZero();
    plan.net = pruned;
    plan.split = std::make_shared<OuterLayerSplit>(*pruned);

    const auto coupling = sys.coupling();
    std::set<long> nb;
    for (long i : plan.rows)
        for (long j : coupling[static_cast<std::size_t>(i)]) nb.insert(j);
    plan.nbrs.assign(nb.begin(), nb.end());

    const OuterLayerSplit& sp = *plan.split;
    plan.psi_rows.resize(static_cast<Eigen::Index>(plan.rows.size()), sp.width());
    for (std::size_t k = 0; k < plan.rows.size(); ++k)
        plan.psi_rows.row(static_cast<Eigen::Index>(k)) = sp.psi().row(plan.rows[k]);
    plan.phi_nbrs.resize(static_cast<Eigen::Index>(plan.nbrs.size()), sp.width());
    plan.bias_nbrs.resize(static_cast<Eigen::Index>(plan.nbrs.size()));
    for (std::size_t k = 0; k < plan.nbrs.size(); ++k) {
        plan.phi_nbrs.row(static_cast<Eigen::Index>(k)) = sp.phi().row(plan.nbrs[k]);
        plan.bias_nbrs(static_cast<Eigen::Index>(k)) = sp.bias()(plan.nbrs[k]);
    }
    return plan;
}

Mat sparse_rom_rhs(const SparseEncoderPlan& plan, const FomSystem& sys, const Mat& z, const Mat& u) {
    const Mat y = plan.split->inner_decode(z);
    const Mat xn = (plan.phi_nbrs * y).colwise() + plan.bias_nbrs;
    Mat v(plan.psi_rows.cols(), z.cols());
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        const Vec uc = u.rows() > 0 ? Vec(u.col(c)) : Vec();
        v.col(c) = plan.psi_rows.transpose() * sys.f_restricted(plan.rows, plan.nbrs, xn.col(c), uc);
    }
    return plan.split->inner_encode_jvp(y, v);
}

SessionResult sparse_train_phase(const ProjAE& net, const LossSpec& spec, const TrainData& data,
                                 const TrainConfig& cfg, const SparsePhaseConfig& sparse) {
    LossSpec s = spec;
    s.sparsity_gamma = sparse.gamma;
    TrainConfig c = cfg;
    c.validation_includes_beta = true;
    c.keep_last = true;
    if (sparse.final_lr > 0.0) c.lr_final = sparse.final_lr;
    return train_session(net, s, data, c);
}

}  // namespace projae
