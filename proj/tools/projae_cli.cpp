#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "projae/error.hpp"
#include "projae/experiments.hpp"
#include "projae/grad.hpp"
#include "projae/io.hpp"

using namespace projae;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "key = value config file");
    cmd->add_option("--seed", c.seed, "overrides the config seed");
    cmd->add_option("--out", c.out, "output directory");
}

Config load(const Common& c) {
    Config cfg = c.config.empty() ? Config() : Config::load(c.config);
    if (c.seed) cfg.set("seed", std::to_string(*c.seed));
    return cfg;
}

void check_keys(const Config& cfg, std::vector<std::string> known) {
    known.push_back("seed");
    known.push_back("system");
    const auto extra = cfg.unknown_keys(known);
    if (!extra.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : extra) msg += " " + k;
        throw ConfigError(msg);
    }
}

void require_noack(const Config& cfg) {
    const std::string sys = cfg.get_string("system", "noack");
    if (sys != "noack") throw ConfigError("system '" + sys + "' is not supported by this command (use noack)");
}

const std::vector<std::string> kDataKeys{"grid", "tf", "dt", "sg", "horizon_steps", "valid_count", "test_count"};

NoackDataSpec data_spec(const Config& cfg) {
    NoackDataSpec s;
    const std::string grid = cfg.get_string("grid", "coarse");
    if (grid == "coarse")
        s.grid = GridKind::Coarse;
    else if (grid == "fine")
        s.grid = GridKind::Fine;
    else
        throw ConfigError("grid must be coarse or fine, got '" + grid + "'");
    s.tf = cfg.get_double("tf", s.tf);
    s.dt = cfg.get_double("dt", s.dt);
    s.sg = static_cast<int>(cfg.get_long("sg", s.sg));
    s.horizon_steps = static_cast<int>(cfg.get_long("horizon_steps", s.horizon_steps));
    s.valid_count = cfg.get_long("valid_count", s.valid_count);
    s.test_count = cfg.get_long("test_count", s.test_count);
    s.seed = cfg.get_u64("seed", s.seed);
    return s;
}

long state_count(const std::vector<Trajectory>& trajs) {
    long n = 0;
    for (const auto& t : trajs) n += t.size();
    return n;
}

NoackData obtain_data(const Config& cfg, const NoackSystem& sys) {
    if (cfg.has("data")) return read_dataset(cfg.get_string("data", ""), sys);
    return make_noack_data(sys, data_spec(cfg));
}

int cmd_gen_data(const Common& c) {
    const Config cfg = load(c);
    check_keys(cfg, kDataKeys);
    require_noack(cfg);
    const NoackSystem sys = noack_system();
    const NoackDataSpec spec = data_spec(cfg);
    const NoackData data = make_noack_data(sys, spec);
    nlohmann::json m;
    m["system"] = "noack";
    m["grid"] = cfg.get_string("grid", "coarse");
    m["tf"] = spec.tf;
    m["dt"] = spec.dt;
    m["sg"] = spec.sg;
    m["horizon_steps"] = spec.horizon_steps;
    m["seed"] = spec.seed;
    m["train_trajectories"] = data.train.size();
    m["train_states"] = state_count(data.train);
    m["valid_trajectories"] = data.valid.size();
    m["test_trajectories"] = data.test.size();
    m["train_gradient_samples"] = data.train_grads.size();
    m["valid_gradient_samples"] = data.valid_grads.size();
    write_dataset(c.out, data, m);
    std::printf("train: %zu trajectories, %ld states, %zu gradient samples\n", data.train.size(),
                state_count(data.train), data.train_grads.size());
    std::printf("valid: %zu trajectories; test: %zu trajectories -> %s\n", data.valid.size(), data.test.size(),
                c.out.c_str());
    return 0;
}

LossSpec loss_spec(const Config& cfg, double horizon) {
    LossSpec s;
    s.kind = loss_from_name(cfg.get_string("loss", "rec"));
    s.beta = cfg.get_double("beta", s.beta);
    s.rvp.gamma = cfg.get_double("rvp_gamma", s.rvp.gamma);
    s.rvp.horizon = cfg.get_double("rvp_horizon", horizon);
    s.rvp.lipschitz = cfg.get_double("rvp_lipschitz", s.rvp.lipschitz);
    return s;
}

TrainConfig train_config(const Config& cfg) {
    TrainConfig t;
    t.epochs = static_cast<int>(cfg.get_long("epochs", t.epochs));
    t.lr0 = cfg.get_double("lr", t.lr0);
    t.batch_size = cfg.get_long("batch_size", t.batch_size);
    t.traj_batch = cfg.get_long("traj_batch", t.traj_batch);
    t.beta = cfg.get_double("beta", t.beta);
    t.plateau.patience = static_cast<int>(cfg.get_long("patience", t.plateau.patience));
    t.plateau.factor = cfg.get_double("factor", t.plateau.factor);
    t.plateau.min_lr = cfg.get_double("min_lr", t.plateau.min_lr);
    return t;
}

bool is_projae(const Config& cfg) {
    const std::string arch = cfg.get_string("arch", "projae");
    if (arch == "projae") return true;
    if (arch == "standae") return false;
    throw ConfigError("arch must be projae or standae, got '" + arch + "'");
}

int cmd_train(const Common& c) {
    const Config cfg = load(c);
    auto keys = kDataKeys;
    keys.insert(keys.end(), {"data", "arch", "loss", "epochs", "lr", "batch_size", "traj_batch", "beta", "patience",
                             "factor", "min_lr", "seeds", "rvp_gamma", "rvp_horizon", "rvp_lipschitz", "select"});
    check_keys(cfg, keys);
    require_noack(cfg);
    const NoackSystem sys = noack_system();
    const NoackData data = obtain_data(cfg, sys);
    const bool projae = is_projae(cfg);
    const LossSpec spec = loss_spec(cfg, data.train.front().times(data.train.front().size() - 1));
    TrainConfig tc = train_config(cfg);
    if (!projae) tc.beta = 0.0;
    tc.out_dir = c.out;
    tc.tag = std::string(projae ? "ProjAE" : "StandAE") + "_" + loss_name(spec.kind);
    const std::vector<std::uint64_t> seeds = cfg.get_u64_list("seeds", {cfg.get_u64("seed", 1)});
    const std::string select = cfg.get_string("select", "enc");
    SelectionMetric metric;
    const auto valid = pointers(data.valid);
    if (select == "enc" || select == "dec") {
        const RomKind kind = select == "enc" ? RomKind::Enc : RomKind::Dec;
        metric = [&, kind](const Autoencoder& net) { return rom_pred_error(AutoencoderMap(net), sys, kind, valid).mean; };
    } else if (select != "loss") {
        throw ConfigError("select must be enc, dec or loss, got '" + select + "'");
    }
    const TrainData td = make_train_data(data, sys, spec.kind);
    const MultiSeedResult ms =
        multi_seed(seeds, [projae](std::uint64_t s) { return noack_net(projae, s); }, spec, td, tc, metric);

    nlohmann::json m;
    m["arch"] = projae ? "ProjAE" : "StandAE";
    m["loss"] = loss_name(spec.kind);
    m["select"] = select;
    m["best_seed"] = ms.best().seed;
    m["best_checkpoint"] = ms.best().session.checkpoint_path;
    bool any_diverged = false;
    for (const SeedRun& r : ms.runs) {
        nlohmann::json e;
        e["seed"] = r.seed;
        e["best_valid"] = format_double(r.session.best_valid);
        e["best_epoch"] = r.session.best_epoch;
        e["metric"] = format_double(r.metric);
        e["diverged"] = r.session.diverged;
        e["diagnostic"] = r.session.diagnostic;
        e["checkpoint"] = r.session.checkpoint_path;
        e["curve"] = r.session.curve_path;
        m["sessions"].push_back(e);
        any_diverged = any_diverged || r.session.diverged;
        std::printf("seed %llu: valid %s, metric %s, best epoch %d%s\n", static_cast<unsigned long long>(r.seed),
                    format_value(r.session.best_valid).c_str(), format_value(r.metric).c_str(), r.session.best_epoch,
                    r.session.diverged ? " (diverged)" : "");
    }
    write_json((fs::path(c.out) / "manifest.json").string(), m);
    std::printf("best seed %llu -> %s\n", static_cast<unsigned long long>(ms.best().seed),
                ms.best().session.checkpoint_path.c_str());
    return any_diverged ? 2 : 0;
}

std::unique_ptr<LatentMap> map_for(const std::string& checkpoint, std::unique_ptr<Autoencoder>& holder) {
    if (checkpoint == "identity") return std::make_unique<LinearMap>(BiorthogonalPair{Mat::Identity(3, 3), Mat::Identity(3, 3)});
    holder = load_checkpoint(checkpoint);
    return std::make_unique<AutoencoderMap>(*holder);
}

int cmd_evaluate(const Common& c) {
    const Config cfg = load(c);
    auto keys = kDataKeys;
    keys.insert(keys.end(), {"data", "checkpoint", "substeps"});
    check_keys(cfg, keys);
    require_noack(cfg);
    if (!cfg.has("checkpoint")) throw ConfigError("evaluate needs checkpoint = <file> (or identity)");
    const NoackSystem sys = noack_system();
    const NoackData data = obtain_data(cfg, sys);
    const std::string ckpt = cfg.get_string("checkpoint", "");
    std::unique_ptr<Autoencoder> holder;
    const auto map = map_for(ckpt, holder);
    const int substeps = static_cast<int>(cfg.get_long("substeps", 1));
    const auto test = pointers(data.test);
    const double manifold = manifold_recon_error(*map, sys);
    const PredError enc = rom_pred_error(*map, sys, RomKind::Enc, test, substeps);
    const PredError dec = rom_pred_error(*map, sys, RomKind::Dec, test, substeps);

    fs::create_directories(c.out);
    Mat per(static_cast<long>(test.size()), 3);
    for (long k = 0; k < per.rows(); ++k) {
        per(k, 0) = static_cast<double>(k);
        per(k, 1) = enc.per_traj[static_cast<std::size_t>(k)];
        per(k, 2) = dec.per_traj[static_cast<std::size_t>(k)];
    }
    write_csv((fs::path(c.out) / "per_trajectory.csv").string(), {"traj", "enc_error", "dec_error"}, per);
    std::ostringstream report;
    report << "checkpoint: " << ckpt << "\n";
    report << "                Manif.      Pred.\n";
    char line[128];
    std::snprintf(line, sizeof line, "EncROM          %-12s%-12s\n", format_value(manifold).c_str(),
                  format_value(enc.mean).c_str());
    report << line;
    std::snprintf(line, sizeof line, "DecROM          %-12s%-12s\n", format_value(manifold).c_str(),
                  format_value(dec.mean).c_str());
    report << line;
    report << "blown runs: EncROM " << enc.blown << ", DecROM " << dec.blown << " of " << test.size() << "\n";
    std::ofstream((fs::path(c.out) / "report.txt").string()) << report.str();
    std::cout << report.str();
    return 0;
}

Vec parse_vector(const std::string& s, long n) {
    std::vector<double> vals;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        try {
            vals.push_back(std::stod(item, &used));
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos)
            throw ConfigError("x0: cannot parse '" + item + "'");
    }
    if (static_cast<long>(vals.size()) != n) throw ConfigError("x0 needs " + std::to_string(n) + " comma-separated values");
    return Eigen::Map<Vec>(vals.data(), n);
}

int cmd_rom_sim(const Common& c) {
    const Config cfg = load(c);
    check_keys(cfg, {"checkpoint", "kind", "x0", "tf", "dt", "substeps"});
    require_noack(cfg);
    if (!cfg.has("checkpoint")) throw ConfigError("rom-sim needs checkpoint = <file> (or identity)");
    const NoackSystem sys = noack_system();
    std::unique_ptr<Autoencoder> holder;
    const auto map = map_for(cfg.get_string("checkpoint", ""), holder);
    const std::string kind_name = cfg.get_string("kind", "enc");
    if (kind_name != "enc" && kind_name != "dec") throw ConfigError("kind must be enc or dec");
    const RomKind kind = kind_name == "enc" ? RomKind::Enc : RomKind::Dec;
    const Vec x0 = parse_vector(cfg.get_string("x0", "0.5,0.5,0.5"), 3);
    const double tf = cfg.get_double("tf", 20.0), dt = cfg.get_double("dt", 0.1);
    const RomRun run = simulate_rom(*map, sys, kind, x0, 0.0, tf, dt, static_cast<int>(cfg.get_long("substeps", 1)));
    const Trajectory fom = rk4(sys, x0, 0.0, tf, dt, nullptr, false);
    const Trajectory lifted = run.lifted_trajectory(0), latent = run.latent_trajectory(0);
    const long r = latent.states.cols();
    std::vector<std::string> header{"t"};
    for (long i = 0; i < r; ++i) header.push_back("z" + std::to_string(i + 1));
    for (int i = 1; i <= 3; ++i) header.push_back("xrom" + std::to_string(i));
    for (int i = 1; i <= 3; ++i) header.push_back("xfom" + std::to_string(i));
    Mat rows(run.times.size(), 1 + r + 6);
    rows.col(0) = run.times;
    rows.middleCols(1, r) = latent.states;
    rows.middleCols(1 + r, 3) = lifted.states;
    rows.rightCols(3) = fom.states;
    fs::create_directories(c.out);
    const std::string path = (fs::path(c.out) / ("rom_" + kind_name + ".csv")).string();
    write_csv(path, header, rows);
    if (run.blown[0])
        std::printf("%s ROM blew up at t = %g; error ∞\n", rom_name(kind), run.blow_time[0]);
    else
        std::printf("%s ROM error %s -> %s\n", rom_name(kind),
                    format_value((lifted.states - fom.states).rowwise().squaredNorm().mean()).c_str(), path.c_str());
    return 0;
}

int cmd_baselines(const Common& c) {
    const Config cfg = load(c);
    check_keys(cfg, {"tf", "dt", "epochs", "lr", "patience", "seeds", "omega_min", "omega_max", "omega_count"});
    const std::string sysname = cfg.get_string("system", "nonnormal_lti");
    if (sysname != "nonnormal_lti") throw ConfigError("baselines supports system = nonnormal_lti only");
    const LtiSystem sys = nonnormal_lti();
    Example2Config ec;
    ec.tf = cfg.get_double("tf", ec.tf);
    ec.dt = cfg.get_double("dt", ec.dt);
    ec.epochs = static_cast<int>(cfg.get_long("epochs", ec.epochs));
    ec.lr0 = cfg.get_double("lr", ec.lr0);
    ec.patience = static_cast<int>(cfg.get_long("patience", ec.patience));
    ec.seeds = cfg.get_u64_list("seeds", ec.seeds);
    const ImpulseComparison cmp = example2_compare(sys, ec);

    fs::create_directories(c.out);
    Mat imp(cmp.times.size(), 5);
    imp << cmp.times, cmp.y_fom, cmp.y_pod, cmp.y_rvp, cmp.y_bt;
    write_csv((fs::path(c.out) / "impulse.csv").string(), {"t", "fom", "pod", "rvp", "bt"}, imp);

    const long count = cfg.get_long("omega_count", 200);
    const Vec logw = Vec::LinSpaced(count, std::log10(cfg.get_double("omega_min", 1e-2)),
                                    std::log10(cfg.get_double("omega_max", 1e3)));
    const Vec omegas = logw.unaryExpr([](double v) { return std::pow(10.0, v); });
    const Mat snaps = rk4(sys, sys.b().col(0), 0.0, ec.tf, ec.dt).states.transpose();
    auto reduced = [&](const BiorthogonalPair& p) {
        return frequency_response(p.psi.transpose() * sys.a() * p.phi, p.psi.transpose() * sys.b(), sys.c() * p.phi,
                                  omegas);
    };
    Mat bode(count, 5);
    bode << omegas, frequency_response(sys.a(), sys.b(), sys.c(), omegas),
        reduced(pod_projection(snaps, 2)), reduced(cmp.rvp_pair),
        reduced(balanced_truncation(sys.a(), sys.b(), sys.c(), 2).pair);
    write_csv((fs::path(c.out) / "bode.csv").string(), {"omega", "fom", "pod", "rvp", "bt"}, bode);
    std::printf("impulse-response L2 error on [0, %g]: POD %s, RVP %s, BT %s\n", ec.tf, format_value(cmp.err_pod).c_str(),
                format_value(cmp.err_rvp).c_str(), format_value(cmp.err_bt).c_str());
    return 0;
}

int cmd_fd_check(const Common& c) {
    const Config cfg = load(c);
    check_keys(cfg, {"arch", "loss", "probes", "h", "trajectories"});
    require_noack(cfg);
    const NoackSystem sys = noack_system();
    const std::uint64_t seed = cfg.get_u64("seed", 0);
    const bool projae = is_projae(cfg);
    const auto net = noack_net(projae, seed);
    const LossKind kind = loss_from_name(cfg.get_string("loss", "rec"));
    const Mat ics = uniform_cube(cfg.get_long("trajectories", 4), seed);
    const std::vector<Trajectory> trajs = simulate_set(sys, ics, 2.0, 0.1);
    LossSpec spec;
    spec.kind = kind;
    spec.rvp.horizon = 2.0;
    LossBatch batch;
    if (kind == LossKind::Rec) batch = rec_batch(stack_states(trajs));
    if (kind == LossKind::Gap) batch = gap_batch(gradient_set(sys, trajs, 2, 10, seed));
    if (kind == LossKind::Rvp) batch = rvp_batch(sys, pointers(trajs));
    const FdReport rep = fd_check(spec, *net, batch, static_cast<int>(cfg.get_long("probes", 32)),
                                  cfg.get_double("h", 1e-5), seed);
    std::cout << rep.to_text();
    std::printf("max relative error: %.3e\n", rep.max_rel_err());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Projection-constrained autoencoders for model reduction"};
    app.require_subcommand(1);
    Common gen, train, eval, sim, base, fd;
    add_common(app.add_subcommand("gen-data", "simulate training/validation/test trajectories"), gen);
    add_common(app.add_subcommand("train", "train one session per seed"), train);
    add_common(app.add_subcommand("evaluate", "manifold and prediction errors of a checkpoint"), eval);
    add_common(app.add_subcommand("rom-sim", "simulate one ROM trajectory"), sim);
    add_common(app.add_subcommand("baselines", "POD / BT / RVP impulse and frequency responses"), base);
    add_common(app.add_subcommand("fd-check", "finite-difference gradient check"), fd);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    try {
        const std::string name = app.get_subcommands().front()->get_name();
        if (name == "gen-data") return cmd_gen_data(gen);
        if (name == "train") return cmd_train(train);
        if (name == "evaluate") return cmd_evaluate(eval);
        if (name == "rom-sim") return cmd_rom_sim(sim);
        if (name == "baselines") return cmd_baselines(base);
        if (name == "fd-check") return cmd_fd_check(fd);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
