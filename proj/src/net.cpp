#include "projae/net.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "projae/error.hpp"

namespace projae {

using ad::Tape;
using ad::Var;

// ---------------------------------------------------------------------------
// Autoencoder dense helpers

std::vector<Mat> Autoencoder::parameters() const {
    auto* self = const_cast<Autoencoder*>(this);
    std::vector<Mat> out;
    for (const ParamBlock& b : self->blocks()) out.push_back(b.value);
    return out;
}

void Autoencoder::set_parameters(const std::vector<Mat>& values) {
    auto bl = blocks();
    if (bl.size() != values.size()) throw ShapeError("set_parameters: block count mismatch");
    for (std::size_t i = 0; i < bl.size(); ++i) {
        if (bl[i].value.rows() != values[i].rows() || bl[i].value.cols() != values[i].cols())
            throw ShapeError("set_parameters: shape mismatch in " + bl[i].name);
        bl[i].value = values[i];
    }
}

std::vector<std::string> Autoencoder::block_names() const {
    auto* self = const_cast<Autoencoder*>(this);
    std::vector<std::string> out;
    for (const ParamBlock& b : self->blocks()) out.push_back(b.name);
    return out;
}

Mat Autoencoder::encode(const Mat& x) const {
    Tape t(false);
    auto net = bind(t);
    return net->encode(t.constant(x)).value();
}

Mat Autoencoder::decode(const Mat& z) const {
    Tape t(false);
    auto net = bind(t);
    return net->decode(t.constant(z)).value();
}

Mat Autoencoder::project(const Mat& x) const {
    Tape t(false);
    auto net = bind(t);
    return net->decode(net->encode(t.constant(x))).value();
}

Mat Autoencoder::jvp_encode(const Mat& x, const Mat& v) const {
    Tape t(false);
    auto net = bind(t);
    return net->encode_jvp(t.constant(x), t.constant(v)).second.value();
}

Mat Autoencoder::jvp_decode(const Mat& z, const Mat& w) const {
    Tape t(false);
    auto net = bind(t);
    return net->decode_jvp(t.constant(z), t.constant(w)).second.value();
}

Mat Autoencoder::jvp_project(const Mat& x, const Mat& v) const {
    Tape t(false);
    auto net = bind(t);
    auto [z, dz] = net->encode_jvp(t.constant(x), t.constant(v));
    return net->decode_jvp(z, dz).second.value();
}

// ---------------------------------------------------------------------------
// ProjAE

namespace {

std::uint64_t layer_seed(std::uint64_t seed, std::size_t l) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(l), 0x5eedu};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Eigen::Map<Mat> view(Mat& m) { return Eigen::Map<Mat>(m.data(), m.rows(), m.cols()); }
Eigen::Map<Mat> view(Vec& v) { return Eigen::Map<Mat>(v.data(), v.size(), 1); }

void check_widths(const std::vector<long>& widths) {
    if (widths.size() < 2) throw ConfigError("ProjAE needs at least one layer");
    for (std::size_t i = 1; i < widths.size(); ++i)
        if (widths[i] < widths[i - 1]) throw ConfigError("ProjAE widths must be nondecreasing from latent to state");
    if (widths.front() < 1) throw ConfigError("latent dimension must be positive");
}

void check_rep_domain(const Mat& m, std::size_t layer) {
    const LuInfo info = lu_info(m);
    if (!(info.det > 0.0) || std::abs(info.det) < 1e-300 || !(info.min_pivot > 1e-14 * info.norm))
        throw DomainError("layer " + std::to_string(layer + 1) + " left D+ (det(psi^T phi) = " +
                          std::to_string(info.det) + ")");
}

class BoundProjAE : public BoundNet {
public:
    BoundProjAE(const ProjAE& net, Tape& tape) : net_(net), tape_(tape) {
        const std::size_t nl = net.num_layers();
        const auto& opt = net.options();
        const bool pinned = opt.pin_equilibrium.has_value();
        for (std::size_t l = 0; l < nl; ++l) {
            tape.set_scope("layer " + std::to_string(l + 1));
            const LayerParams& lp = net.layer(l);
            const bool last = l + 1 == nl;
            Var phi_t = tape.variable(lp.rep.phi_t);
            Var psi_t = tape.variable(lp.rep.psi_t);
            leaves_.push_back(phi_t);
            leaves_.push_back(psi_t);
            Var bias;
            if (!(last && pinned)) {
                bias = tape.variable(lp.bias);
                leaves_.push_back(bias);
            }
            if (last && opt.constraint) {
                Var basis = tape.constant(net.null_basis());
                phi_t = ad::matmul(basis, phi_t);
                if (bias.valid()) bias = ad::matmul(basis, bias);
            }
            if (last && opt.psi_row_mask) {
                Mat mask = opt.psi_row_mask->replicate(1, lp.rep.psi_t.cols());
                psi_t = ad::hadamard(tape.constant(std::move(mask)), psi_t);
            }
            Layer layer;
            layer.m = ad::matmul_tn(psi_t, phi_t);
            check_rep_domain(layer.m.value(), l);
            layer.minv = ad::inverse(layer.m);
            layer.phi = ad::matmul(phi_t, layer.minv);
            layer.psi = psi_t;
            layer.bias = bias;
            layers_.push_back(layer);
        }
        if (pinned) {
            tape.set_scope("equilibrium pin");
            Var z = tape.constant(Mat::Zero(net.latent_dim(), 1));
            for (std::size_t l = 0; l + 1 < nl; ++l) z = decode_layer(l, z);
            Var s = ad::activation(z, net.activation(), Branch::Plus, 0);
            Mat xeq = *opt.pin_equilibrium;
            layers_.back().bias = tape.constant(std::move(xeq)) - ad::matmul(layers_.back().phi, s);
        }
        tape.set_scope("");
    }

    Var encode(Var x) override {
        Var h = x;
        for (std::size_t l = layers_.size(); l-- > 0;) {
            const Layer& L = layers_[l];
            h = ad::activation(ad::matmul_tn(L.psi, ad::sub_col(h, L.bias)), net_.activation(), Branch::Minus, 0);
        }
        return h;
    }

    Var decode(Var z) override {
        Var h = z;
        for (std::size_t l = 0; l < layers_.size(); ++l) h = decode_layer(l, h);
        return h;
    }

    std::pair<Var, Var> encode_jvp(Var x, Var v) override {
        Var h = x, t = v;
        for (std::size_t l = layers_.size(); l-- > 0;) {
            const Layer& L = layers_[l];
            Var pre = ad::matmul_tn(L.psi, ad::sub_col(h, L.bias));
            Var tpre = ad::matmul_tn(L.psi, t);
            h = ad::activation(pre, net_.activation(), Branch::Minus, 0);
            t = ad::hadamard(ad::activation(pre, net_.activation(), Branch::Minus, 1), tpre);
        }
        return {h, t};
    }

    std::pair<Var, Var> decode_jvp(Var z, Var w) override {
        Var h = z, t = w;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const Layer& L = layers_[l];
            Var s = ad::activation(h, net_.activation(), Branch::Plus, 0);
            Var ds = ad::hadamard(ad::activation(h, net_.activation(), Branch::Plus, 1), t);
            h = ad::add_col(ad::matmul(L.phi, s), L.bias);
            t = ad::matmul(L.phi, ds);
        }
        return {h, t};
    }

    std::optional<Var> regularizer() override {
        std::optional<Var> total;
        for (const Layer& L : layers_) {
            Var r = ad::hadamard(ad::sum_squares(ad::sub_identity(L.m)), ad::sum_squares(L.minv));
            total = total ? *total + r : r;
        }
        return total;
    }

    std::optional<Var> last_psi() override { return layers_.back().psi; }

private:
    struct Layer {
        Var phi, psi, bias, m, minv;
    };

    Var decode_layer(std::size_t l, Var h) {
        const Layer& L = layers_[l];
        return ad::add_col(ad::matmul(L.phi, ad::activation(h, net_.activation(), Branch::Plus, 0)), L.bias);
    }

    const ProjAE& net_;
    Tape& tape_;
    std::vector<Layer> layers_;
};

}  // namespace

ProjAE::ProjAE(std::vector<long> widths, std::vector<LayerParams> layers, Activation act, ProjAEOptions options)
    : widths_(std::move(widths)), layers_(std::move(layers)), act_(act), options_(std::move(options)) {
    check_widths(widths_);
    if (layers_.size() + 1 != widths_.size()) throw ConfigError("ProjAE layer count does not match widths");
    const long n = widths_.back();
    if (options_.pin_equilibrium && options_.pin_equilibrium->size() != n)
        throw ConfigError("equilibrium has wrong dimension");
    if (options_.psi_row_mask && options_.psi_row_mask->size() != n) throw ConfigError("psi row mask has wrong length");
    if (options_.constraint) {
        if (options_.constraint->cols() != n) throw ConfigError("constraint matrix has wrong column count");
        null_basis_ = null_space(*options_.constraint);
        if (null_basis_.cols() < widths_[widths_.size() - 2])
            throw ConfigError("constraint leaves too few directions for the last layer");
        if (options_.pin_equilibrium && ((*options_.constraint) * (*options_.pin_equilibrium)).norm() > 1e-12)
            throw ConfigError("pinned equilibrium violates the linear constraint");
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const long rows = widths_[l + 1], cols = widths_[l];
        const bool constrained_last = options_.constraint && l + 1 == layers_.size();
        const long prow = constrained_last ? null_basis_.cols() : rows;
        const LayerParams& lp = layers_[l];
        if (lp.rep.phi_t.rows() != prow || lp.rep.phi_t.cols() != cols || lp.rep.psi_t.rows() != rows ||
            lp.rep.psi_t.cols() != cols || lp.bias.size() != prow)
            throw ShapeError("ProjAE layer " + std::to_string(l + 1) + " has inconsistent shapes");
    }
}

ProjAE ProjAE::init(const std::vector<long>& widths, std::uint64_t seed, Activation act, ProjAEOptions options) {
    check_widths(widths);
    Mat basis;
    if (options.constraint) basis = null_space(*options.constraint);
    std::vector<LayerParams> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        LayerParams lp;
        lp.rep = init_pair(widths[l + 1], widths[l], layer_seed(seed, l));
        lp.bias = Vec::Zero(widths[l + 1]);
        const bool last = l + 2 == widths.size();
        if (last && options.psi_row_mask) lp.rep.psi_t = options.psi_row_mask->asDiagonal() * lp.rep.psi_t;
        if (last && options.constraint) {
            lp.rep.phi_t = basis.transpose() * lp.rep.phi_t;
            lp.bias = Vec::Zero(basis.cols());
        }
        layers.push_back(std::move(lp));
    }
    return ProjAE(widths, std::move(layers), act, std::move(options));
}

std::unique_ptr<BoundNet> ProjAE::bind(Tape& tape) const { return std::make_unique<BoundProjAE>(*this, tape); }

std::vector<ParamBlock> ProjAE::blocks() {
    std::vector<ParamBlock> out;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::string p = "layer" + std::to_string(l + 1) + ".";
        out.push_back({p + "phi_t", view(layers_[l].rep.phi_t)});
        out.push_back({p + "psi_t", view(layers_[l].rep.psi_t)});
        if (!(l + 1 == layers_.size() && options_.pin_equilibrium)) out.push_back({p + "bias", view(layers_[l].bias)});
    }
    return out;
}

PairRep ProjAE::effective_rep(std::size_t l) const {
    PairRep rep = layers_[l].rep;
    if (l + 1 == layers_.size()) {
        if (options_.constraint) rep.phi_t = null_basis_ * rep.phi_t;
        if (options_.psi_row_mask) rep.psi_t = options_.psi_row_mask->asDiagonal() * rep.psi_t;
    }
    return rep;
}

BiorthogonalPair ProjAE::pair(std::size_t l) const { return project_pair(effective_rep(l)); }

Vec ProjAE::bias(std::size_t l) const {
    if (l + 1 == layers_.size() && options_.pin_equilibrium) {
        Mat z = Mat::Zero(latent_dim(), 1);
        for (std::size_t k = 0; k + 1 < layers_.size(); ++k) {
            BiorthogonalPair p = pair(k);
            z = (p.phi * act_.apply(z, Branch::Plus, 0)).colwise() + layers_[k].bias;
        }
        BiorthogonalPair p = pair(l);
        return *options_.pin_equilibrium - p.phi * act_.apply(z, Branch::Plus, 0).col(0);
    }
    if (l + 1 == layers_.size() && options_.constraint) return null_basis_ * layers_[l].bias;
    return layers_[l].bias;
}

}  // namespace projae

namespace projae {

// ---------------------------------------------------------------------------
// StandAE

double gelu_init_scale() { return 1.0 / std::sqrt(0.588); }

namespace {

Mat sphere_rows(long rows, long cols, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat w(rows, cols);
    for (long i = 0; i < rows; ++i) {
        for (long j = 0; j < cols; ++j) w(i, j) = normal(rng);
        w.row(i) *= scale / w.row(i).norm();
    }
    return w;
}

class BoundStandAE : public BoundNet {
public:
    BoundStandAE(const StandAE& net, Tape& tape) {
        act_.kind = ActKind::Gelu;
        auto add_layers = [&](const std::vector<DenseLayer>& src, std::vector<std::pair<Var, Var>>& dst) {
            for (const DenseLayer& d : src) {
                Var w = tape.variable(d.weight);
                Var b = tape.variable(d.bias);
                leaves_.push_back(w);
                leaves_.push_back(b);
                dst.emplace_back(w, b);
            }
        };
        add_layers(net.encoder_layers(), enc_);
        w_e_ = tape.variable(net.w_e());
        leaves_.push_back(w_e_);
        add_layers(net.decoder_layers(), dec_);
        w_d_ = tape.variable(net.w_d());
        leaves_.push_back(w_d_);
    }

    Var encode(Var x) override { return ad::matmul(w_e_, hidden(enc_, x)); }
    Var decode(Var z) override { return ad::matmul(w_d_, hidden(dec_, z)); }

    std::pair<Var, Var> encode_jvp(Var x, Var v) override {
        auto [h, t] = hidden_jvp(enc_, x, v);
        return {ad::matmul(w_e_, h), ad::matmul(w_e_, t)};
    }

    std::pair<Var, Var> decode_jvp(Var z, Var w) override {
        auto [h, t] = hidden_jvp(dec_, z, w);
        return {ad::matmul(w_d_, h), ad::matmul(w_d_, t)};
    }

    std::optional<Var> regularizer() override { return std::nullopt; }
    std::optional<Var> last_psi() override { return std::nullopt; }

private:
    Var hidden(const std::vector<std::pair<Var, Var>>& layers, Var h) {
        for (const auto& [w, b] : layers) h = ad::activation(ad::add_col(ad::matmul(w, h), b), act_, Branch::Plus, 0);
        return h;
    }

    std::pair<Var, Var> hidden_jvp(const std::vector<std::pair<Var, Var>>& layers, Var h, Var t) {
        for (const auto& [w, b] : layers) {
            Var pre = ad::add_col(ad::matmul(w, h), b);
            t = ad::hadamard(ad::activation(pre, act_, Branch::Plus, 1), ad::matmul(w, t));
            h = ad::activation(pre, act_, Branch::Plus, 0);
        }
        return {h, t};
    }

    Activation act_;
    std::vector<std::pair<Var, Var>> enc_, dec_;
    Var w_e_, w_d_;
};

}  // namespace

StandAE::StandAE(std::vector<DenseLayer> enc, Mat w_e, std::vector<DenseLayer> dec, Mat w_d)
    : enc_(std::move(enc)), w_e_(std::move(w_e)), dec_(std::move(dec)), w_d_(std::move(w_d)) {
    auto check_chain = [](const std::vector<DenseLayer>& layers, long in, const char* what) {
        long width = in;
        for (const DenseLayer& d : layers) {
            if (d.weight.cols() != width || d.bias.size() != d.weight.rows())
                throw ShapeError(std::string("StandAE ") + what + " layer shapes are inconsistent");
            width = d.weight.rows();
        }
        return width;
    };
    const long n = w_d_.rows();
    const long r = w_e_.rows();
    if (check_chain(enc_, n, "encoder") != w_e_.cols()) throw ShapeError("StandAE W_e shape mismatch");
    if (check_chain(dec_, r, "decoder") != w_d_.cols()) throw ShapeError("StandAE W_d shape mismatch");
}

StandAE StandAE::init(const std::vector<long>& enc_widths, const std::vector<long>& dec_widths, std::uint64_t seed) {
    if (enc_widths.size() < 2 || dec_widths.size() < 2) throw ConfigError("StandAE needs at least one hidden layer");
    if (enc_widths.front() != dec_widths.back()) throw ConfigError("StandAE state widths disagree");
    std::mt19937_64 rng(seed);
    const double scale = gelu_init_scale();
    auto build = [&](const std::vector<long>& w) {
        std::vector<DenseLayer> layers;
        for (std::size_t l = 0; l + 1 < w.size(); ++l)
            layers.push_back({sphere_rows(w[l + 1], w[l], rng, scale), Vec::Zero(w[l + 1])});
        return layers;
    };
    auto enc = build(enc_widths);
    const long r = dec_widths.front();
    Mat w_e = sphere_rows(r, enc_widths.back(), rng, 1.0);
    auto dec = build(dec_widths);
    Mat w_d = sphere_rows(dec_widths.back(), dec_widths.back(), rng, 1.0);
    return StandAE(std::move(enc), std::move(w_e), std::move(dec), std::move(w_d));
}

std::unique_ptr<BoundNet> StandAE::bind(Tape& tape) const { return std::make_unique<BoundStandAE>(*this, tape); }

std::vector<ParamBlock> StandAE::blocks() {
    std::vector<ParamBlock> out;
    for (std::size_t l = 0; l < enc_.size(); ++l) {
        const std::string p = "enc" + std::to_string(l + 1) + ".";
        out.push_back({p + "weight", view(enc_[l].weight)});
        out.push_back({p + "bias", view(enc_[l].bias)});
    }
    out.push_back({"w_e", view(w_e_)});
    for (std::size_t l = 0; l < dec_.size(); ++l) {
        const std::string p = "dec" + std::to_string(l + 1) + ".";
        out.push_back({p + "weight", view(dec_[l].weight)});
        out.push_back({p + "bias", view(dec_[l].bias)});
    }
    out.push_back({"w_d", view(w_d_)});
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

using nlohmann::json;

json mat_to_json(const Mat& m) {
    std::vector<double> data;
    data.reserve(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Mat mat_from_json(const json& j) {
    const long rows = j.at("rows").get<long>();
    const long cols = j.at("cols").get<long>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<long>(data.size()) != rows * cols) throw Error("checkpoint array has wrong length");
    Mat m(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long j2 = 0; j2 < cols; ++j2) m(i, j2) = data[static_cast<std::size_t>(i * cols + j2)];
    return m;
}

namespace {

Vec vec_from_json(const json& j) {
    Mat m = mat_from_json(j);
    return Eigen::Map<Vec>(m.data(), m.size());
}

const char* kind_name(ActKind k) {
    switch (k) {
        case ActKind::Hyperbolic: return "hyperbolic";
        case ActKind::Identity: return "identity";
        case ActKind::Gelu: return "gelu";
    }
    return "hyperbolic";
}

ActKind kind_from(const std::string& s) {
    if (s == "hyperbolic") return ActKind::Hyperbolic;
    if (s == "identity") return ActKind::Identity;
    if (s == "gelu") return ActKind::Gelu;
    throw Error("unknown activation kind in checkpoint: " + s);
}

}  // namespace

json ProjAE::to_json() const {
    json j;
    j["format"] = "projae-checkpoint";
    j["version"] = 1;
    j["type"] = "ProjAE";
    j["widths"] = widths_;
    j["activation"] = {{"kind", kind_name(act_.kind)}, {"alpha", act_.hyp.alpha()}};
    j["pin_equilibrium"] = options_.pin_equilibrium ? mat_to_json(*options_.pin_equilibrium) : json(nullptr);
    j["constraint"] = options_.constraint ? mat_to_json(*options_.constraint) : json(nullptr);
    j["psi_row_mask"] = options_.psi_row_mask ? mat_to_json(*options_.psi_row_mask) : json(nullptr);
    json layers = json::array();
    for (const LayerParams& lp : layers_)
        layers.push_back({{"phi_t", mat_to_json(lp.rep.phi_t)},
                          {"psi_t", mat_to_json(lp.rep.psi_t)},
                          {"bias", mat_to_json(lp.bias)}});
    j["layers"] = layers;
    return j;
}

ProjAE ProjAE::from_json(const json& j) {
    if (j.at("type") != "ProjAE") throw Error("checkpoint does not hold a ProjAE");
    auto widths = j.at("widths").get<std::vector<long>>();
    Activation act;
    act.kind = kind_from(j.at("activation").at("kind").get<std::string>());
    act.hyp = HyperbolicActivation(j.at("activation").at("alpha").get<double>());
    ProjAEOptions opt;
    if (!j.at("pin_equilibrium").is_null()) opt.pin_equilibrium = vec_from_json(j["pin_equilibrium"]);
    if (!j.at("constraint").is_null()) opt.constraint = mat_from_json(j["constraint"]);
    if (!j.at("psi_row_mask").is_null()) opt.psi_row_mask = vec_from_json(j["psi_row_mask"]);
    std::vector<LayerParams> layers;
    for (const json& l : j.at("layers"))
        layers.push_back({{mat_from_json(l.at("phi_t")), mat_from_json(l.at("psi_t"))}, vec_from_json(l.at("bias"))});
    return ProjAE(std::move(widths), std::move(layers), act, std::move(opt));
}

json StandAE::to_json() const {
    auto dump = [](const std::vector<DenseLayer>& layers) {
        json arr = json::array();
        for (const DenseLayer& d : layers) arr.push_back({{"weight", mat_to_json(d.weight)}, {"bias", mat_to_json(d.bias)}});
        return arr;
    };
    json j;
    j["format"] = "projae-checkpoint";
    j["version"] = 1;
    j["type"] = "StandAE";
    j["encoder"] = dump(enc_);
    j["w_e"] = mat_to_json(w_e_);
    j["decoder"] = dump(dec_);
    j["w_d"] = mat_to_json(w_d_);
    return j;
}

StandAE StandAE::from_json(const json& j) {
    if (j.at("type") != "StandAE") throw Error("checkpoint does not hold a StandAE");
    auto load = [](const json& arr) {
        std::vector<DenseLayer> layers;
        for (const json& d : arr) layers.push_back({mat_from_json(d.at("weight")), vec_from_json(d.at("bias"))});
        return layers;
    };
    return StandAE(load(j.at("encoder")), mat_from_json(j.at("w_e")), load(j.at("decoder")), mat_from_json(j.at("w_d")));
}

std::unique_ptr<Autoencoder> autoencoder_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "ProjAE") return std::make_unique<ProjAE>(ProjAE::from_json(j));
    if (type == "StandAE") return std::make_unique<StandAE>(StandAE::from_json(j));
    throw Error("unknown network type in checkpoint: " + type);
}

void save_checkpoint(const Autoencoder& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write checkpoint " + path);
    out << net.to_json().dump(1) << '\n';
}

std::unique_ptr<Autoencoder> load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read checkpoint " + path);
    return autoencoder_from_json(json::parse(in));
}

}  // namespace projae
