#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "projae/ad.hpp"
#include "projae/biortho.hpp"

namespace projae {

// Mutable view of one parameter array (matrix or vector).
struct ParamBlock {
    std::string name;
    Eigen::Map<Mat> value;
};

// Network evaluated on a tape. Batches are column-stacked: x is n x B, z is r x B.
class BoundNet {
public:
    virtual ~BoundNet() = default;
    virtual ad::Var encode(ad::Var x) = 0;
    virtual ad::Var decode(ad::Var z) = 0;
    // (value, Jacobian-vector product)
    virtual std::pair<ad::Var, ad::Var> encode_jvp(ad::Var x, ad::Var v) = 0;
    virtual std::pair<ad::Var, ad::Var> decode_jvp(ad::Var z, ad::Var w) = 0;
    // Sum of the biorthogonality regularizers, or nullopt for unconstrained nets.
    virtual std::optional<ad::Var> regularizer() = 0;
    // psi of the last layer, for the row-sparsity penalty.
    virtual std::optional<ad::Var> last_psi() = 0;
    // Parameter leaves in the same order as Autoencoder::blocks().
    const std::vector<ad::Var>& leaves() const { return leaves_; }

protected:
    std::vector<ad::Var> leaves_;
};

class Autoencoder {
public:
    virtual ~Autoencoder() = default;
    virtual long state_dim() const = 0;
    virtual long latent_dim() const = 0;
    virtual bool is_projection() const = 0;
    virtual std::unique_ptr<BoundNet> bind(ad::Tape& tape) const = 0;
    virtual std::vector<ParamBlock> blocks() = 0;
    virtual std::unique_ptr<Autoencoder> clone() const = 0;
    virtual nlohmann::json to_json() const = 0;

    std::vector<Mat> parameters() const;
    void set_parameters(const std::vector<Mat>& values);
    std::vector<std::string> block_names() const;

    // Dense evaluation on column batches (no gradients recorded).
    Mat encode(const Mat& x) const;
    Mat decode(const Mat& z) const;
    Mat project(const Mat& x) const;
    Mat jvp_encode(const Mat& x, const Mat& v) const;
    Mat jvp_decode(const Mat& z, const Mat& w) const;
    Mat jvp_project(const Mat& x, const Mat& v) const;
};

struct LayerParams {
    PairRep rep;
    Vec bias;
};

struct ProjAEOptions {
    std::optional<Vec> pin_equilibrium;
    // Rows are linear constraints L with L P(x) = 0.
    std::optional<Mat> constraint;
    // 0/1 entries; rows of the last layer's psi with mask 0 are held at zero.
    std::optional<Vec> psi_row_mask;
};

// Constrained autoencoder whose decoder/encoder layers share biorthogonal
// weight pairs, so psi_e o psi_d = Id and P = psi_d o psi_e is a projection.
class ProjAE : public Autoencoder {
public:
    // widths = {r = n_0, n_1, ..., n_L = n}
    static ProjAE init(const std::vector<long>& widths, std::uint64_t seed, Activation act = {},
                       ProjAEOptions options = {});
    ProjAE(std::vector<long> widths, std::vector<LayerParams> layers, Activation act, ProjAEOptions options);

    long state_dim() const override { return widths_.back(); }
    long latent_dim() const override { return widths_.front(); }
    bool is_projection() const override { return true; }
    std::unique_ptr<BoundNet> bind(ad::Tape& tape) const override;
    std::vector<ParamBlock> blocks() override;
    std::unique_ptr<Autoencoder> clone() const override { return std::make_unique<ProjAE>(*this); }
    nlohmann::json to_json() const override;
    static ProjAE from_json(const nlohmann::json& j);

    const std::vector<long>& widths() const { return widths_; }
    std::size_t num_layers() const { return layers_.size(); }
    const Activation& activation() const { return act_; }
    const ProjAEOptions& options() const { return options_; }
    // Stored parameters; with a constraint the last layer holds null-space
    // coefficients instead of phi~_L and b_L.
    const LayerParams& layer(std::size_t l) const { return layers_[l]; }
    LayerParams& layer(std::size_t l) { return layers_[l]; }
    const Mat& null_basis() const { return null_basis_; }

    // Effective representative/pair/bias of layer l after constraint, mask and pin.
    PairRep effective_rep(std::size_t l) const;
    BiorthogonalPair pair(std::size_t l) const;
    Vec bias(std::size_t l) const;

private:
    std::vector<long> widths_;
    std::vector<LayerParams> layers_;
    Activation act_;
    ProjAEOptions options_;
    Mat null_basis_;
};

// Unconstrained GeLU autoencoder used as the baseline.
struct DenseLayer {
    Mat weight;
    Vec bias;
};

class StandAE : public Autoencoder {
public:
    // encoder widths {n, ..., r}, decoder widths {r, ..., n}
    static StandAE init(const std::vector<long>& enc_widths, const std::vector<long>& dec_widths, std::uint64_t seed);
    StandAE(std::vector<DenseLayer> enc, Mat w_e, std::vector<DenseLayer> dec, Mat w_d);

    long state_dim() const override { return w_d_.rows(); }
    long latent_dim() const override { return w_e_.rows(); }
    bool is_projection() const override { return false; }
    std::unique_ptr<BoundNet> bind(ad::Tape& tape) const override;
    std::vector<ParamBlock> blocks() override;
    std::unique_ptr<Autoencoder> clone() const override { return std::make_unique<StandAE>(*this); }
    nlohmann::json to_json() const override;
    static StandAE from_json(const nlohmann::json& j);

    const std::vector<DenseLayer>& encoder_layers() const { return enc_; }
    const std::vector<DenseLayer>& decoder_layers() const { return dec_; }
    const Mat& w_e() const { return w_e_; }
    const Mat& w_d() const { return w_d_; }

private:
    std::vector<DenseLayer> enc_;
    Mat w_e_;
    std::vector<DenseLayer> dec_;
    Mat w_d_;
};

// Scale applied to unit-sphere rows of StandAE hidden layers.
double gelu_init_scale();

// Checkpoints: self-describing JSON with full-precision arrays.
nlohmann::json mat_to_json(const Mat& m);
Mat mat_from_json(const nlohmann::json& j);
void save_checkpoint(const Autoencoder& net, const std::string& path);
std::unique_ptr<Autoencoder> load_checkpoint(const std::string& path);
std::unique_ptr<Autoencoder> autoencoder_from_json(const nlohmann::json& j);

}  // namespace projae
