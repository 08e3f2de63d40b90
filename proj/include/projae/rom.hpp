#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "projae/dyn.hpp"
#include "projae/net.hpp"
#include "projae/train.hpp"

namespace projae {

// Encoder/decoder pair acting on column batches.
class LatentMap {
public:
    virtual ~LatentMap() = default;
    virtual long state_dim() const = 0;
    virtual long latent_dim() const = 0;
    virtual Mat encode(const Mat& x) const = 0;
    virtual Mat decode(const Mat& z) const = 0;
    virtual Mat jvp_encode(const Mat& x, const Mat& v) const = 0;
    virtual Mat jvp_decode(const Mat& z, const Mat& w) const = 0;
    Mat project(const Mat& x) const { return decode(encode(x)); }
};

class AutoencoderMap : public LatentMap {
public:
    explicit AutoencoderMap(const Autoencoder& net) : net_(net) {}
    long state_dim() const override { return net_.state_dim(); }
    long latent_dim() const override { return net_.latent_dim(); }
    Mat encode(const Mat& x) const override { return net_.encode(x); }
    Mat decode(const Mat& z) const override { return net_.decode(z); }
    Mat jvp_encode(const Mat& x, const Mat& v) const override { return net_.jvp_encode(x, v); }
    Mat jvp_decode(const Mat& z, const Mat& w) const override { return net_.jvp_decode(z, w); }

private:
    const Autoencoder& net_;
};

// x -> psi^T (x - b), z -> b + phi z
class LinearMap : public LatentMap {
public:
    LinearMap(BiorthogonalPair pair, Vec offset = Vec());
    long state_dim() const override { return pair_.phi.rows(); }
    long latent_dim() const override { return pair_.phi.cols(); }
    Mat encode(const Mat& x) const override;
    Mat decode(const Mat& z) const override;
    Mat jvp_encode(const Mat&, const Mat& v) const override { return pair_.psi.transpose() * v; }
    Mat jvp_decode(const Mat&, const Mat& w) const override { return pair_.phi * w; }

private:
    BiorthogonalPair pair_;
    Vec offset_;
};

// Planar graph x2 = h(x1) with the vertical encoder x -> x1.
class GraphMap : public LatentMap {
public:
    GraphMap(std::function<double(double)> h, std::function<double(double)> dh) : h_(std::move(h)), dh_(std::move(dh)) {}
    long state_dim() const override { return 2; }
    long latent_dim() const override { return 1; }
    Mat encode(const Mat& x) const override { return x.topRows(1); }
    Mat decode(const Mat& z) const override;
    Mat jvp_encode(const Mat&, const Mat& v) const override { return v.topRows(1); }
    Mat jvp_decode(const Mat& z, const Mat& w) const override;

private:
    std::function<double(double)> h_, dh_;
};

enum class RomKind { Enc, Dec };

const char* rom_name(RomKind kind);

// u has zero rows for autonomous systems, else one column per z column.
Mat enc_rom_rhs(const LatentMap& map, const FomSystem& sys, const Mat& z, const Mat& u);
// Normal-equation solve per column; ridge 1e-12 tr(G) once cond(G) > 1e8,
// IllConditionedError once cond(G) > 1e12.
Mat dec_rom_rhs(const LatentMap& map, const FomSystem& sys, const Mat& z, const Mat& u);
Mat rom_rhs(RomKind kind, const LatentMap& map, const FomSystem& sys, const Mat& z, const Mat& u);

using LatentRhs = std::function<Mat(const Mat& z, const Mat& u)>;
using LatentLift = std::function<Mat(const Mat& z)>;

// Batched latent simulation. Column j is marked blown (and frozen) once its
// latent or lifted state is non-finite, exceeds 1e6 in norm, or its rhs throws.
struct RomRun {
    Vec times;
    std::vector<Mat> latent;  // per stored time: r x B
    std::vector<Mat> lifted;  // per stored time: n x B
    std::vector<bool> blown;
    std::vector<double> blow_time;

    bool any_blown() const;
    Trajectory lifted_trajectory(long col) const;
    Trajectory latent_trajectory(long col) const;
};

// RK4 with `substeps` internal steps per stored step of size dt.
RomRun integrate_latent(const LatentRhs& rhs, const LatentLift& lift, const Mat& z0, double t0, double t1, double dt,
                        int substeps = 1, long input_dim = 0, const InputFn& u = nullptr);

RomRun simulate_rom(const LatentMap& map, const FomSystem& sys, RomKind kind, const Mat& x0, double t0, double t1,
                    double dt, int substeps = 1, const InputFn& u = nullptr);

// Mean squared distance to P over the 20 x 20 grid of (x1, x2) in [-1, 1]^2
// lifted by the order-4 slow-manifold graph.
Mat noack_manifold_grid(const NoackSystem& sys, int grid = 20, int order = 4);
double manifold_recon_error(const LatentMap& map, const NoackSystem& sys, int grid = 20, int order = 4);

struct PredError {
    double mean = 0.0;  // infinity when any run blew up
    std::vector<double> per_traj;
    long blown = 0;
};

// Trajectories must share a time grid. Each ROM starts from the encoded x0 of
// its test trajectory.
PredError rom_pred_error(const LatentMap& map, const FomSystem& sys, RomKind kind,
                         const std::vector<const Trajectory*>& trajs, int substeps = 1);

// Polyharmonic r^3 radial basis interpolant with a linear polynomial tail.
struct RbfInterpolant {
    Mat centers;  // d x N
    Mat weights;  // N x m
    Mat poly;     // (d + 1) x m
    Mat eval(const Mat& z) const;  // returns m x B
};

RbfInterpolant fit_rbf(const Mat& centers, const Mat& values);

struct SurrogateSpec {
    Vec lo, hi;       // sampling box in latent space
    int grid = 31;    // per-axis grid when r <= 3
    long samples = 0; // random samples otherwise
    std::optional<Mat> encoded_data;  // r x N, sampled with jitter when given
    std::uint64_t seed = 0;
};

struct LatentSurrogate {
    RbfInterpolant f;
    RbfInterpolant g;
    double center_residual = 0.0;
    double heldout_max_error = 0.0;

    Mat rhs(const Mat& z) const { return f.eval(z); }
    Mat output(const Mat& z) const { return g.eval(z); }
};

// Autonomous systems only: fits the EncROM vector field and the output map.
LatentSurrogate fit_latent_surrogate(const LatentMap& map, const FomSystem& sys, const SurrogateSpec& spec);

// Split of a ProjAE around its outer layer: psi_d(z) = b_L + phi_L y with
// y = inner_decode(z), and psi_e(x) = inner_encode(psi_L^T (x - b_L)).
class OuterLayerSplit {
public:
    explicit OuterLayerSplit(const ProjAE& net);
    const Mat& phi() const { return phi_; }
    const Mat& psi() const { return psi_; }
    const Vec& bias() const { return bias_; }
    long width() const { return phi_.cols(); }
    Mat inner_decode(const Mat& z) const;
    // D inner_encode(y) v
    Mat inner_encode_jvp(const Mat& y, const Mat& v) const;

private:
    std::optional<ProjAE> inner_;
    Activation act_;
    Mat phi_, psi_;
    Vec bias_;
};

using BilinearForm = std::function<Vec(const Vec&, const Vec&)>;

// Symmetric bilinear part of the Noack vector field (f2(x) = h2(x, x)).
BilinearForm noack_bilinear(const NoackSystem& sys);
Mat noack_linear_part(const NoackSystem& sys);

struct BilinearTensors {
    Vec a;               // m
    Mat b;               // m x m, b(i, j)
    std::vector<Mat> c;  // c[i](j1, j2), symmetric
    nlohmann::json to_json() const;
};

BilinearTensors assemble_bilinear_tensors(const Mat& phi_l, const Mat& psi_l, const Vec& b_l, const BilinearForm& h2);
BilinearTensors assemble_bilinear_tensors(const OuterLayerSplit& split, const BilinearForm& h2);

// [psi_L^T f2(b_L + phi_L y)]_i = a_i + 2 sum b_ij y_j + sum c_ijk y_j y_k, columnwise.
Mat tensor_rom_f2(const BilinearTensors& t, const Mat& y);

// EncROM rhs of a system f(x) = A x + h2(x, x) from pre-assembled operators.
class TensorRom {
public:
    TensorRom(const ProjAE& net, const Mat& linear, const BilinearForm& h2);
    Mat rhs(const Mat& z) const;
    const BilinearTensors& tensors() const { return tensors_; }

private:
    OuterLayerSplit split_;
    BilinearTensors tensors_;
    Vec lin_const_;
    Mat lin_;
};

struct SparseEncoderPlan {
    std::vector<long> rows;  // I
    std::vector<long> nbrs;  // N(I)
    Mat psi_rows;            // |I| x n_{L-1}
    Mat phi_nbrs;            // |N| x n_{L-1}
    Vec bias_nbrs;           // |N|
    std::shared_ptr<ProjAE> net;  // pruned copy: rows outside I are exactly zero
    std::shared_ptr<OuterLayerSplit> split;
};

// Row norms of qf(psi_L); values below tol count as zero.
Vec orthonormal_row_norms(const Mat& psi);

// Keeps rows of qf(psi_L) with norm >= tol. Throws SparsificationError when
// fewer than n_{L-1} rows survive.
SparseEncoderPlan build_sparse_plan(const ProjAE& net, const FomSystem& sys, double tol = 1e-6);

Mat sparse_rom_rhs(const SparseEncoderPlan& plan, const FomSystem& sys, const Mat& z, const Mat& u);

// Second training stage with gamma * R_{1,2}(Range(psi_L)) added to the cost.
// The rate decays geometrically from cfg.lr0 to final_lr so that rows driven
// onto the kink of the penalty settle there.
struct SparsePhaseConfig {
    double gamma = 1.0;
    double final_lr = 1e-9;
};

SessionResult sparse_train_phase(const ProjAE& net, const LossSpec& spec, const TrainData& data,
                                 const TrainConfig& cfg, const SparsePhaseConfig& sparse);

}  // namespace projae
