#include "projae/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "projae/error.hpp"

namespace projae {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, sep)) out.push_back(trim(cell));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
        throw Error("cannot parse number '" + s + "' in " + where);
    return v;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    return is;
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header, const Mat& rows) {
    if (!header.empty() && static_cast<long>(header.size()) != rows.cols())
        throw ShapeError("write_csv: header has " + std::to_string(header.size()) + " names for " +
                         std::to_string(rows.cols()) + " columns");
    std::ofstream os = open_out(path);
    for (std::size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << header[j];
    os << "\n";
    for (long i = 0; i < rows.rows(); ++i) {
        for (long j = 0; j < rows.cols(); ++j) os << (j ? "," : "") << format_double(rows(i, j));
        os << "\n";
    }
}

CsvTable read_csv(const std::string& path) {
    std::ifstream is = open_in(path);
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) throw Error(path + ": empty file");
    t.header = split(trim(line), ',');
    std::vector<std::vector<double>> rows;
    long lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != t.header.size())
            throw Error(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " fields, got " + std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_double(c, path + ":" + std::to_string(lineno)));
        rows.push_back(std::move(row));
    }
    t.rows.resize(static_cast<long>(rows.size()), static_cast<long>(t.header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) t.rows(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
    return t;
}

void write_trajectories_csv(const std::string& path, const std::vector<Trajectory>& trajs) {
    if (trajs.empty()) throw Error("write_trajectories_csv: no trajectories");
    const long n = trajs.front().states.cols();
    const long du = trajs.front().inputs.cols();
    std::vector<std::string> header{"traj", "t"};
    for (long i = 0; i < n; ++i) header.push_back("x" + std::to_string(i + 1));
    for (long i = 0; i < du; ++i) header.push_back("u" + std::to_string(i + 1));
    long total = 0;
    for (const auto& t : trajs) {
        if (t.states.cols() != n || t.inputs.cols() != du) throw ShapeError("trajectories differ in dimension");
        total += t.size();
    }
    Mat rows(total, 2 + n + du);
    long r = 0;
    for (std::size_t k = 0; k < trajs.size(); ++k) {
        const Trajectory& t = trajs[k];
        for (long i = 0; i < t.size(); ++i, ++r) {
            rows(r, 0) = static_cast<double>(k);
            rows(r, 1) = t.times(i);
            rows.row(r).segment(2, n) = t.states.row(i);
            if (du > 0) rows.row(r).tail(du) = t.inputs.row(i);
        }
    }
    write_csv(path, header, rows);
}

std::vector<Trajectory> read_trajectories_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    if (t.header.size() < 3 || t.header[0] != "traj" || t.header[1] != "t")
        throw Error(path + ": not a trajectory file");
    long n = 0, du = 0;
    for (std::size_t j = 2; j < t.header.size(); ++j) (t.header[j][0] == 'u' ? du : n) += 1;
    std::vector<Trajectory> out;
    long start = 0;
    while (start < t.rows.rows()) {
        long end = start;
        while (end < t.rows.rows() && t.rows(end, 0) == t.rows(start, 0)) ++end;
        Trajectory tr;
        tr.times = t.rows.col(1).segment(start, end - start);
        tr.states = t.rows.block(start, 2, end - start, n);
        if (du > 0) tr.inputs = t.rows.block(start, 2 + n, end - start, du);
        out.push_back(std::move(tr));
        start = end;
    }
    return out;
}

void write_gradients_csv(const std::string& path, const std::vector<GradientSample>& samples) {
    if (samples.empty()) throw Error("write_gradients_csv: no samples");
    const long n = samples.front().base.size();
    std::vector<std::string> header;
    for (long i = 0; i < n; ++i) header.push_back("x" + std::to_string(i + 1));
    for (long i = 0; i < n; ++i) header.push_back("g" + std::to_string(i + 1));
    Mat rows(static_cast<long>(samples.size()), 2 * n);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        rows.row(static_cast<long>(k)).head(n) = samples[k].base.transpose();
        rows.row(static_cast<long>(k)).tail(n) = samples[k].grad.transpose();
    }
    write_csv(path, header, rows);
}

std::vector<GradientSample> read_gradients_csv(const std::string& path) {
    const CsvTable t = read_csv(path);
    if (t.header.size() % 2 != 0 || t.header.empty()) throw Error(path + ": not a gradient-sample file");
    const long n = static_cast<long>(t.header.size()) / 2;
    std::vector<GradientSample> out(static_cast<std::size_t>(t.rows.rows()));
    for (long k = 0; k < t.rows.rows(); ++k) {
        out[static_cast<std::size_t>(k)].base = t.rows.row(k).head(n).transpose();
        out[static_cast<std::size_t>(k)].grad = t.rows.row(k).tail(n).transpose();
    }
    return out;
}

void attach_derivs(const FomSystem& sys, Trajectory& traj) {
    const Mat u = traj.inputs.size() > 0 ? Mat(traj.inputs.transpose()) : Mat(0, traj.size());
    traj.derivs = sys.f_batch(traj.states.transpose(), u).transpose();
}

void write_dataset(const std::string& dir, const NoackData& data, const nlohmann::json& manifest) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path d(dir);
    write_trajectories_csv((d / "train.csv").string(), data.train);
    write_trajectories_csv((d / "valid.csv").string(), data.valid);
    write_trajectories_csv((d / "test.csv").string(), data.test);
    write_gradients_csv((d / "train_grads.csv").string(), data.train_grads);
    write_gradients_csv((d / "valid_grads.csv").string(), data.valid_grads);
    write_json((d / "manifest.json").string(), manifest);
}

NoackData read_dataset(const std::string& dir, const FomSystem& sys) {
    const std::filesystem::path d(dir);
    NoackData data;
    data.train = read_trajectories_csv((d / "train.csv").string());
    data.valid = read_trajectories_csv((d / "valid.csv").string());
    data.test = read_trajectories_csv((d / "test.csv").string());
    data.train_grads = read_gradients_csv((d / "train_grads.csv").string());
    data.valid_grads = read_gradients_csv((d / "valid_grads.csv").string());
    for (auto* set : {&data.train, &data.valid, &data.test})
        for (Trajectory& t : *set) {
            if (t.states.cols() != sys.state_dim()) throw ShapeError(dir + ": state dimension does not match the system");
            attach_derivs(sys, t);
        }
    return data;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream os = open_out(path);
    os << j.dump(2) << "\n";
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream is = open_in(path);
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
}

Config Config::parse(const std::string& text) {
    Config c;
    std::istringstream is(text);
    std::string line;
    long lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (c.has(key)) throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        c.values_[key] = trim(line.substr(eq + 1));
    }
    return c;
}

Config Config::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        return parse_double(it->second, "key '" + key + "'");
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

long Config::get_long(const std::string& key, long fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    char* end = nullptr;
    errno = 0;
    const long v = std::strtol(it->second.c_str(), &end, 10);
    if (it->second.empty() || *end != '\0' || errno == ERANGE)
        throw ConfigError("key '" + key + "': expected an integer, got '" + it->second + "'");
    return v;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::vector<std::uint64_t> v = get_u64_list(key, {});
    if (v.size() != 1) throw ConfigError("key '" + key + "': expected one unsigned integer");
    return v.front();
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + it->second + "'");
}

std::vector<std::uint64_t> Config::get_u64_list(const std::string& key,
                                                const std::vector<std::uint64_t>& fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    auto num = [&](const std::string& s) {
        char* end = nullptr;
        errno = 0;
        if (s.empty() || s[0] == '-') throw ConfigError("key '" + key + "': bad unsigned integer '" + s + "'");
        const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
        if (*end != '\0' || errno == ERANGE) throw ConfigError("key '" + key + "': bad unsigned integer '" + s + "'");
        return static_cast<std::uint64_t>(v);
    };
    std::vector<std::uint64_t> out;
    for (const std::string& item : split(it->second, ',')) {
        const auto dash = item.find('-');
        if (dash == std::string::npos || dash == 0) {
            out.push_back(num(item));
            continue;
        }
        const std::uint64_t a = num(trim(item.substr(0, dash))), b = num(trim(item.substr(dash + 1)));
        if (b < a) throw ConfigError("key '" + key + "': empty range " + item);
        for (std::uint64_t v = a; v <= b; ++v) out.push_back(v);
    }
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

std::vector<std::string> Config::unknown_keys(const std::vector<std::string>& known) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
        if (std::find(known.begin(), known.end(), k) == known.end()) out.push_back(k);
    return out;
}

}  // namespace projae
