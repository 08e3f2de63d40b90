#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "projae/experiments.hpp"

namespace projae {

// Plain numeric CSV with one header line. Values are written with 17
// significant digits so that reading them back gives the same doubles.
struct CsvTable {
    std::vector<std::string> header;
    Mat rows;  // one row per line
};

std::string format_double(double v);
void write_csv(const std::string& path, const std::vector<std::string>& header, const Mat& rows);
CsvTable read_csv(const std::string& path);

// Columns: traj, t, x1..xn[, u1..ud]. Trajectories are numbered in order.
void write_trajectories_csv(const std::string& path, const std::vector<Trajectory>& trajs);
std::vector<Trajectory> read_trajectories_csv(const std::string& path);

// Columns: x1..xn, g1..gn.
void write_gradients_csv(const std::string& path, const std::vector<GradientSample>& samples);
std::vector<GradientSample> read_gradients_csv(const std::string& path);

// Dataset directory: train.csv, valid.csv, test.csv, train_grads.csv,
// valid_grads.csv and manifest.json. Derivatives are recomputed from f on load.
void write_dataset(const std::string& dir, const NoackData& data, const nlohmann::json& manifest);
NoackData read_dataset(const std::string& dir, const FomSystem& sys);
void attach_derivs(const FomSystem& sys, Trajectory& traj);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

// Flat "key = value" text. '#' starts a comment; blank lines are skipped.
// Repeated keys and lines without '=' are errors.
class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long get_long(const std::string& key, long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    // Comma-separated list of unsigned integers, ranges "a-b" allowed.
    std::vector<std::uint64_t> get_u64_list(const std::string& key, const std::vector<std::uint64_t>& fallback) const;
    // Keys present in the file but not in `known`.
    std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const;
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace projae
