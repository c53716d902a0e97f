#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stokesrve/geometry.hpp"
#include "stokesrve/saddle.hpp"
#include "stokesrve/util.hpp"

namespace stokesrve {

enum class RunMode { Effective, Dilute, Ensemble, TwoScale, Validate };

// Parsed key-value config with [section] headers. Values keep their source
// line for diagnostics.
struct ConfigFile {
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::map<std::string, std::map<std::string, Entry>> sections;

    bool has(const std::string& sec, const std::string& key) const;
    std::string get(const std::string& sec, const std::string& key) const;  // throws ConfigError
    std::string get_or(const std::string& sec, const std::string& key,
                       const std::string& fallback) const;
    double get_double(const std::string& sec, const std::string& key) const;
    double get_double_or(const std::string& sec, const std::string& key, double fallback) const;
    long get_long_or(const std::string& sec, const std::string& key, long fallback) const;
    bool get_bool_or(const std::string& sec, const std::string& key, bool fallback) const;
    std::vector<double> get_list_or(const std::string& sec, const std::string& key,
                                    const std::vector<double>& fallback) const;
};

ConfigFile parse_config_file(const std::string& path);

struct RunConfig {
    RunMode mode = RunMode::Validate;
    std::string out_dir = "out";
    bool debug = false;

    // geometry
    int dim = 2;
    double L = 32.0;
    double lambda = 0.1;
    double delta = 0.2;
    GeneratorTag generator = GeneratorTag::RSA;
    std::vector<std::uint64_t> seeds{1};
    Vec3 spacing{4.0, 4.0, 4.0};
    double jitter = 0.0;

    // grid
    int N = 0;

    // solver
    double tol = 1e-9;
    int max_iter = 0;
    PreconKind precon = PreconKind::BlockDiag;
    bool dump_fields = false;
    std::string dump_dir = "fields";

    // dilute
    std::vector<double> lambda_ladder{0.005, 0.01, 0.02};
    int dilute_N = 512;
    double dilute_gap = 0.5;

    // ensemble
    std::vector<double> L_ladder{16, 32, 64};
    double ensemble_h = 0.125;
    int n_seeds = 8;

    // twoscale
    double cell_L = 8.0;
    int cell_N = 128;
    int box_N = 256;
    std::vector<double> eps_ladder{0.25, 0.125, 0.0625};
    bool sediment = false;

    std::string echo() const;  // resolved config as config-file text
};

RunConfig parse_run_config(const std::string& path);

}  // namespace stokesrve
