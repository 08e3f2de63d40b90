#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "projae/rom.hpp"
#include "projae/train.hpp"

namespace projae {

enum class GridKind { Fine, Coarse };

// 10 x 10 x 10 grid on [-1, 1]^3, or {-1, -1/3, -1/9, 1/9, 1/3, 1}^3.
Mat noack_initial_grid(GridKind kind);
Mat uniform_cube(long count, std::uint64_t seed);

std::vector<Trajectory> simulate_set(const FomSystem& sys, const Mat& ics, double tf, double dt);
Mat stack_states(const std::vector<Trajectory>& trajs);
std::vector<const Trajectory*> pointers(const std::vector<Trajectory>& trajs);
std::vector<GradientSample> gradient_set(const FomSystem& sys, const std::vector<Trajectory>& trajs, int sg,
                                         int horizon_steps, std::uint64_t seed);

struct NoackDataSpec {
    GridKind grid = GridKind::Coarse;
    long valid_count = -1;  // -1: same as the training set
    long test_count = 1000;
    double tf = 20.0;
    double dt = 0.1;
    int sg = 10;
    int horizon_steps = 20;
    std::uint64_t seed = 0;
};

struct NoackData {
    std::vector<Trajectory> train, valid, test;
    std::vector<GradientSample> train_grads, valid_grads;
};

NoackData make_noack_data(const NoackSystem& sys, const NoackDataSpec& spec);
TrainData make_train_data(const NoackData& data, const FomSystem& sys, LossKind kind);

// Five-layer nets of the case study: ProjAE widths {2, 3, 3, 3, 3, 3}; StandAE
// encoder {3, 3, 3, 3, 3, 2} + W_e and decoder {2, 3, 3, 3, 3, 3} + W_d.
std::unique_ptr<Autoencoder> noack_net(bool projae, std::uint64_t seed);

struct StudyConfig {
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8};
    TrainConfig train{};
    int rom_substeps = 1;
    bool verbose = false;
};

struct StudyEntry {
    std::string arch;  // "ProjAE" / "StandAE"
    LossKind loss = LossKind::Rec;
    RomKind rom = RomKind::Enc;
    std::uint64_t seed = 0;
    double valid_pred = 0.0;
    double test_pred = 0.0;
    double manifold = 0.0;
    std::vector<double> test_per_traj;
};

struct StudySession {
    std::string arch;
    LossKind loss = LossKind::Rec;
    std::vector<SeedRun> runs;
    // Per seed: validation prediction errors for EncROM and DecROM.
    std::vector<double> enc_valid, dec_valid;
    StudyEntry best_enc, best_dec;
    long diverged_sessions = 0;
};

// Trains every seed, then picks the best EncROM and DecROM models by
// validation prediction error and scores them on the test set.
StudySession run_study_session(const NoackSystem& sys, const NoackData& data, bool projae, LossKind loss,
                               const StudyConfig& cfg);

// Table-shaped report: rows net x ROM kind, columns loss x {Manif., Pred.}.
std::string format_table(const std::vector<StudySession>& sessions);
std::string format_value(double v);

// Slow-fast pitchfork: vertical versus orthogonal projection.
struct Example1Rates {
    double vertical_rate = 0.0;
    double orthogonal_rate = 0.0;
    Vec times;
    Vec err_vertical, err_orthogonal;
};

// Closest point (s, h(s)) of a planar graph to x, by Newton iteration from x(0).
double orthogonal_graph_foot(const Vec& x, const std::function<double(double)>& h,
                             const std::function<double(double)>& dh, const std::function<double(double)>& d2h);

Example1Rates example1_rates(const PitchforkSystem& sys, const Vec& x0);

struct Example1Flip {
    std::vector<double> points;
    std::vector<double> truth, vertical, orthogonal;
};

// Reduced vector fields on the graph (x1, 0.95 x1^2 + 0.05).
Example1Flip example1_flip(const PitchforkSystem& sys, const std::vector<double>& points);

// Nonnormal LTI impulse response: POD, BT and RVP-trained linear models.
struct ImpulseComparison {
    Vec times;
    Vec y_fom, y_pod, y_rvp, y_bt;
    double err_pod = 0.0, err_rvp = 0.0, err_bt = 0.0;  // output L2 error on [0, tf]
    BiorthogonalPair rvp_pair;
    double rvp_loss = 0.0;
};

struct Example2Config {
    double tf = 6.0;
    double dt = 0.01;
    int epochs = 20000;
    double lr0 = 1e-2;
    int patience = 200;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3};  // lowest training loss wins
};

// Impulse response y(t) = C e^{At} B of the reduced model (psi^T A phi, psi^T B, C phi).
Vec linear_impulse_response(const LtiSystem& sys, const BiorthogonalPair& pair, double tf, double dt);
BiorthogonalPair pair_of_linear_net(const ProjAE& net);
ProjAE linear_projae(long n, long r, std::uint64_t seed);
ImpulseComparison example2_compare(const LtiSystem& sys, const Example2Config& cfg);

// |H(i w)| for the full system and a reduced pair, single input / output.
Vec frequency_response(const Mat& a, const Mat& b, const Mat& c, const Vec& omegas);

// GAP loss versus the Gramian trace on impulse data of a stable LTI system.
struct GapBtConfig {
    double tf = 15.0;
    double dt = 0.005;
    int repeats = 40;
    int train_repeats = 10;  // leading repeats used for training
    int train_epochs = 300;
    double lr0 = 1e-2;
    std::uint64_t seed = 0;
};

struct GapBtResult {
    double scaled_gap = 0.0;   // (tf^2 d_u / L) * empirical GAP at the BT projection
    double gramian = 0.0;      // Tr[W_o (I - P) W_c (I - P)^T] at the BT projection
    double rel_gap = 0.0;
    double angle_phi_deg = 0.0;  // largest principal angle, trained vs BT ranges
    double angle_psi_deg = 0.0;
    BiorthogonalPair trained;
};

// Levenberg-Marquardt refinement of a linear pair on the GAP objective.
BiorthogonalPair polish_linear_gap(const BiorthogonalPair& start, const Mat& states, const Mat& grads);

GapBtResult gap_bt_limit(const LtiSystem& sys, long r, const GapBtConfig& cfg);

// Two-stage training of a linear rank-r ProjAE on the banded system, then the
// sparse encoder plan and its rhs check against the dense EncROM.
struct SparseDemoConfig {
    long n = 10;
    long r = 2;
    int ics = 20;
    double tf = 5.0;
    double dt = 0.05;
    int dense_epochs = 300;
    double dense_lr = 1e-2;
    int sparse_epochs = 400;
    double sparse_lr = 3e-2;
    double gamma = 1.0;
    std::uint64_t seed = 1;
};

struct SparseDemoResult {
    double dense_loss = 0.0;
    double sparse_loss = 0.0;
    Vec row_norms_before, row_norms_after;
    SparseEncoderPlan plan;
    double rhs_gap = 0.0;  // max |enc_rom_rhs - sparse_rom_rhs| on random z
};

SparseDemoResult sparse_demo(const SparseDemoConfig& cfg);

// Fits a grid surrogate on the latent box visited by the direct EncROM from
// x0 (padded by `pad` of its width), then compares lifted trajectories.
struct SurrogateCheck {
    Vec lo, hi;
    double center_residual = 0.0;
    double heldout_max_error = 0.0;
    double trajectory_gap = 0.0;  // max |decode(z_direct) - decode(z_surrogate)| over all stored times
};

SurrogateCheck surrogate_check(const LatentMap& map, const FomSystem& sys, const Mat& x0, double tf, double dt,
                               int grid = 31, double pad = 0.05);

}  // namespace projae
