#include "stokesrve/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "stokesrve/errors.hpp"

namespace stokesrve {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

}  // namespace

bool ConfigFile::has(const std::string& sec, const std::string& key) const {
    auto s = sections.find(sec);
    return s != sections.end() && s->second.count(key) > 0;
}

std::string ConfigFile::get(const std::string& sec, const std::string& key) const {
    auto s = sections.find(sec);
    if (s == sections.end() || !s->second.count(key))
        throw ConfigError("missing required key [" + sec + "] " + key);
    return s->second.at(key).value;
}

std::string ConfigFile::get_or(const std::string& sec, const std::string& key,
                               const std::string& fallback) const {
    return has(sec, key) ? get(sec, key) : fallback;
}

double ConfigFile::get_double(const std::string& sec, const std::string& key) const {
    const std::string v = get(sec, key);
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("key [" + sec + "] " + key + ": cannot parse '" + v +
                          "' as a number (line " +
                          std::to_string(sections.at(sec).at(key).line) + ")");
    }
}

double ConfigFile::get_double_or(const std::string& sec, const std::string& key,
                                 double fallback) const {
    return has(sec, key) ? get_double(sec, key) : fallback;
}

long ConfigFile::get_long_or(const std::string& sec, const std::string& key,
                             long fallback) const {
    if (!has(sec, key)) return fallback;
    const double d = get_double(sec, key);
    const long l = static_cast<long>(d);
    if (static_cast<double>(l) != d)
        throw ConfigError("key [" + sec + "] " + key + ": expected an integer");
    return l;
}

bool ConfigFile::get_bool_or(const std::string& sec, const std::string& key,
                             bool fallback) const {
    if (!has(sec, key)) return fallback;
    std::string v = get(sec, key);
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("key [" + sec + "] " + key + ": expected a boolean, got '" + v + "'");
}

std::vector<double> ConfigFile::get_list_or(const std::string& sec, const std::string& key,
                                            const std::vector<double>& fallback) const {
    if (!has(sec, key)) return fallback;
    std::vector<double> out;
    for (const auto& tok : split(get(sec, key), ',')) {
        if (tok.empty()) continue;
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ConfigError("key [" + sec + "] " + key + ": bad list entry '" + tok + "'");
        }
    }
    if (out.empty())
        throw ConfigError("key [" + sec + "] " + key + ": empty list");
    return out;
}

ConfigFile parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    ConfigFile cf;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) +
                                  ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) +
                              ": key '" + key + "' appears before any [section]");
        cf.sections[section][key] = {value, lineno};
    }
    return cf;
}

RunConfig parse_run_config(const std::string& path) {
    const ConfigFile cf = parse_config_file(path);
    RunConfig rc;

    const std::string mode = cf.get("run", "mode");
    if (mode == "effective") rc.mode = RunMode::Effective;
    else if (mode == "dilute") rc.mode = RunMode::Dilute;
    else if (mode == "ensemble") rc.mode = RunMode::Ensemble;
    else if (mode == "twoscale") rc.mode = RunMode::TwoScale;
    else if (mode == "validate") rc.mode = RunMode::Validate;
    else throw ConfigError("key [run] mode: unknown mode '" + mode + "'");
    rc.out_dir = cf.get_or("run", "out_dir", rc.out_dir);
    rc.debug = cf.get_bool_or("run", "debug", false);

    rc.dim = static_cast<int>(cf.get_long_or("geometry", "dim", 2));
    if (rc.dim != 2 && rc.dim != 3) throw ConfigError("key [geometry] dim: must be 2 or 3");
    rc.L = cf.get_double_or("geometry", "L", rc.L);
    if (rc.L <= 0) throw ConfigError("key [geometry] L: must be positive");
    rc.lambda = cf.get_double_or("geometry", "lambda", rc.lambda);
    if (rc.lambda < 0 || rc.lambda >= 1)
        throw ConfigError("key [geometry] lambda: must lie in [0,1)");
    rc.delta = cf.get_double_or("geometry", "delta", rc.delta);
    if (rc.delta <= 0 || rc.delta >= 1)
        throw ConfigError("key [geometry] delta: must lie in (0,1)");
    const std::string gen = cf.get_or("geometry", "generator", "rsa");
    if (gen == "rsa") rc.generator = GeneratorTag::RSA;
    else if (gen == "lattice") rc.generator = GeneratorTag::PerturbedLattice;
    else if (gen == "single" || gen == "manual") rc.generator = GeneratorTag::Manual;
    else throw ConfigError("key [geometry] generator: unknown generator '" + gen + "'");
    if (cf.has("geometry", "seeds")) {
        rc.seeds.clear();
        for (double v : cf.get_list_or("geometry", "seeds", {}))
            rc.seeds.push_back(static_cast<std::uint64_t>(v));
    }
    if (cf.has("geometry", "spacing")) {
        auto sp = cf.get_list_or("geometry", "spacing", {});
        for (std::size_t i = 0; i < sp.size() && i < 3; ++i) rc.spacing[i] = sp[i];
        for (std::size_t i = sp.size(); i < 3; ++i) rc.spacing[i] = sp.back();
    }
    rc.jitter = cf.get_double_or("geometry", "jitter", 0.0);
    if (rc.jitter < 0) throw ConfigError("key [geometry] jitter: must be nonnegative");

    const bool needs_grid = rc.mode == RunMode::Effective || rc.mode == RunMode::Validate;
    if (needs_grid || cf.has("grid", "N")) {
        if (!cf.has("grid", "N")) throw ConfigError("missing required key [grid] N");
        rc.N = static_cast<int>(cf.get_long_or("grid", "N", 0));
        if (rc.N < 4) throw ConfigError("key [grid] N: must be at least 4");
    }

    rc.tol = cf.get_double_or("solver", "tol", rc.tol);
    if (rc.tol <= 0 || rc.tol >= 1) throw ConfigError("key [solver] tol: must lie in (0,1)");
    rc.max_iter = static_cast<int>(cf.get_long_or("solver", "max_iter", 0));
    if (rc.max_iter < 0) throw ConfigError("key [solver] max_iter: must be nonnegative");
    const std::string pre = cf.get_or("solver", "preconditioner", "blockdiag");
    if (pre == "none") rc.precon = PreconKind::None;
    else if (pre == "blockdiag") rc.precon = PreconKind::BlockDiag;
    else throw ConfigError("key [solver] preconditioner: unknown kind '" + pre + "'");
    rc.dump_fields = cf.get_bool_or("solver", "dump_fields", false);
    rc.dump_dir = cf.get_or("solver", "dump_dir", rc.dump_dir);

    rc.lambda_ladder = cf.get_list_or("dilute", "lambda_ladder", rc.lambda_ladder);
    for (double l : rc.lambda_ladder)
        if (l <= 0 || l > 0.05)
            throw ConfigError("key [dilute] lambda_ladder: values must lie in (0, 0.05]");
    rc.dilute_N = static_cast<int>(cf.get_long_or("dilute", "N", rc.dilute_N));
    rc.dilute_gap = cf.get_double_or("dilute", "gap", rc.dilute_gap);

    rc.L_ladder = cf.get_list_or("ensemble", "L_ladder", rc.L_ladder);
    rc.ensemble_h = cf.get_double_or("ensemble", "h", rc.ensemble_h);
    if (rc.ensemble_h <= 0) throw ConfigError("key [ensemble] h: must be positive");
    rc.n_seeds = static_cast<int>(cf.get_long_or("ensemble", "n_seeds", rc.n_seeds));
    if (rc.mode == RunMode::Ensemble && rc.n_seeds < 2)
        throw ConfigError("key [ensemble] n_seeds: need at least 2 seeds");

    rc.cell_L = cf.get_double_or("twoscale", "cell_L", rc.cell_L);
    rc.cell_N = static_cast<int>(cf.get_long_or("twoscale", "cell_N", rc.cell_N));
    rc.box_N = static_cast<int>(cf.get_long_or("twoscale", "box_N", rc.box_N));
    rc.eps_ladder = cf.get_list_or("twoscale", "eps_ladder", rc.eps_ladder);
    for (double e : rc.eps_ladder)
        if (e <= 0 || e >= 1)
            throw ConfigError("key [twoscale] eps_ladder: values must lie in (0,1)");
    rc.sediment = cf.get_bool_or("twoscale", "sediment", false);
    return rc;
}

std::string RunConfig::echo() const {
    std::ostringstream os;
    const char* mode_name = mode == RunMode::Effective   ? "effective"
                            : mode == RunMode::Dilute    ? "dilute"
                            : mode == RunMode::Ensemble  ? "ensemble"
                            : mode == RunMode::TwoScale  ? "twoscale"
                                                         : "validate";
    os << "[run]\nmode = " << mode_name << "\nout_dir = " << out_dir << "\n";
    os << "\n[geometry]\ndim = " << dim << "\nL = " << fmt17(L)
       << "\nlambda = " << fmt17(lambda) << "\ndelta = " << fmt17(delta)
       << "\ngenerator = "
       << (generator == GeneratorTag::RSA               ? "rsa"
           : generator == GeneratorTag::PerturbedLattice ? "lattice"
                                                         : "single")
       << "\nseeds = ";
    for (std::size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
    os << "\nspacing = " << fmt17(spacing[0]) << "," << fmt17(spacing[1]) << ","
       << fmt17(spacing[2]) << "\njitter = " << fmt17(jitter) << "\n";
    os << "\n[grid]\nN = " << N << "\n";
    os << "\n[solver]\ntol = " << fmt17(tol) << "\nmax_iter = " << max_iter
       << "\npreconditioner = " << (precon == PreconKind::None ? "none" : "blockdiag")
       << "\ndump_fields = " << (dump_fields ? "true" : "false")
       << "\ndump_dir = " << dump_dir << "\n";
    os << "\n[dilute]\nlambda_ladder = ";
    for (std::size_t i = 0; i < lambda_ladder.size(); ++i)
        os << (i ? "," : "") << fmt17(lambda_ladder[i]);
    os << "\nN = " << dilute_N << "\ngap = " << fmt17(dilute_gap) << "\n";
    os << "\n[ensemble]\nL_ladder = ";
    for (std::size_t i = 0; i < L_ladder.size(); ++i)
        os << (i ? "," : "") << fmt17(L_ladder[i]);
    os << "\nh = " << fmt17(ensemble_h) << "\nn_seeds = " << n_seeds << "\n";
    os << "\n[twoscale]\ncell_L = " << fmt17(cell_L) << "\ncell_N = " << cell_N
       << "\nbox_N = " << box_N << "\neps_ladder = ";
    for (std::size_t i = 0; i < eps_ladder.size(); ++i)
        os << (i ? "," : "") << fmt17(eps_ladder[i]);
    os << "\nsediment = " << (sediment ? "true" : "false") << "\n";
    return os.str();
}

}  // namespace stokesrve
