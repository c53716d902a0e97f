// stokes-rve: configuration-driven runner
//   stokes-rve <mode> --config <path> [--seed-override k] [--out dir]
// modes: effective | dilute | ensemble | twoscale | validate
// exit codes: 0 success, 2 config error, 3 solver failure, 4 invariant failure

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <random>
#include <sstream>

#include "stokesrve/config.hpp"
#include "stokesrve/effective.hpp"
#include "stokesrve/errors.hpp"
#include "stokesrve/geometry.hpp"
#include "stokesrve/grid.hpp"
#include "stokesrve/solver.hpp"
#include "stokesrve/twoscale.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stokesrve;

namespace {

bool g_debug = false;

void log_info(const std::string& msg) { std::cerr << "[info] " << msg << "\n"; }
void log_debug(const std::string& msg) {
    if (g_debug) std::cerr << "[debug] " << msg << "\n";
}

std::string checksum_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    const std::string bytes = ss.str();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(bytes.data(), bytes.size())));
    return buf;
}

void write_manifest(const RunConfig& rc, const fs::path& out,
                    const std::vector<std::string>& artifacts) {
    json m;
    m["config"] = rc.echo();
    m["artifacts"] = json::array();
    for (const auto& a : artifacts) {
        const fs::path p = out / a;
        m["artifacts"].push_back(
            {{"name", a}, {"fnv1a", checksum_file(p)}, {"bytes", fs::file_size(p)}});
    }
    std::ofstream os(out / "manifest.json");
    os << m.dump(2) << "\n";
}

InclusionSet make_geometry(const RunConfig& rc, std::uint64_t seed) {
    switch (rc.generator) {
        case GeneratorTag::RSA: {
            RsaParams p;
            p.dim = rc.dim;
            p.cell_length = rc.L;
            p.target_fraction = rc.lambda;
            p.gap = rc.delta;
            p.seed = seed;
            return rsa_generate(p);
        }
        case GeneratorTag::PerturbedLattice: {
            PerturbedLatticeParams p;
            p.dim = rc.dim;
            p.cell_length = rc.L;
            p.spacing = rc.spacing;
            p.jitter = rc.jitter;
            p.gap = rc.delta;
            p.seed = seed;
            return perturbed_lattice_generate(p);
        }
        default: {
            InclusionSet set;
            set.dim = rc.dim;
            set.cell_length = rc.L;
            set.gap = rc.delta;
            set.seed = seed;
            set.tag = GeneratorTag::Manual;
            if (rc.lambda > 0)
                set.centers = {Vec3{rc.L / 2, rc.L / 2, rc.dim == 3 ? rc.L / 2 : 0.0}};
            return set;
        }
    }
}

SolverOptions solver_options(const RunConfig& rc) {
    SolverOptions opt;
    opt.tol = rc.tol;
    opt.max_iter = rc.max_iter;
    opt.precon = rc.precon;
    return opt;
}

// bounded worker pool: tasks indexed, results merged by index
template <class T, class F>
std::vector<T> run_tasks(std::size_t n, F&& task) {
    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(4, std::thread::hardware_concurrency()));
    std::vector<T> results(n);
    std::size_t next = 0;
    while (next < n) {
        const std::size_t batch = std::min(workers, n - next);
        std::vector<std::future<T>> futs;
        for (std::size_t k = 0; k < batch; ++k)
            futs.push_back(std::async(std::launch::async, task, next + k));
        for (std::size_t k = 0; k < batch; ++k) results[next + k] = futs[k].get();
        next += batch;
    }
    return results;
}

int run_effective(const RunConfig& rc, const fs::path& out) {
    const StrainBasis basis = StrainBasis::canonical(rc.dim);
    const int m = basis.m();

    struct SeedResult {
        EffectiveCoefficients eff;
    };
    auto task = [&](std::size_t i) -> SeedResult {
        const std::uint64_t seed = rc.seeds[i];
        log_debug("seed " + std::to_string(seed) + ": generating");
        InclusionSet set = make_geometry(rc, seed);
        Grid grid = Grid::periodic(rc.dim, rc.N, rc.L);
        LabelField labels = rasterize(set, grid);
        std::vector<CorrectorSolution> sols;
        for (const auto& E : basis.E)
            sols.push_back(solve_corrector(grid, labels, E, solver_options(rc)));
        EffectiveMeta meta{seed, rc.L, rc.N, rc.tol};
        return {compute_effective(sols, labels, basis, meta)};
    };
    auto results = run_tasks<SeedResult>(rc.seeds.size(), task);

    std::ofstream csv(out / "effective.csv");
    csv << "seed,L,N,lambda";
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) csv << ",B_" << i + 1 << j + 1;
    for (int i = 0; i < m; ++i) csv << ",b_" << i + 1;
    csv << ",res_force,res_torque,iters\n";
    for (const auto& r : results) {
        const auto& e = r.eff;
        csv << e.meta.seed << ',' << fmt17(e.meta.L) << ',' << e.meta.N << ','
            << fmt17(e.lambda);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) csv << ',' << fmt17(e.B(i, j));
        for (int i = 0; i < m; ++i) csv << ',' << fmt17(e.b[i]);
        csv << ',' << fmt17(e.force_res) << ',' << fmt17(e.torque_res) << ',' << e.iters
            << '\n';
    }
    csv.close();

    json s;
    s["n_seeds"] = rc.seeds.size();
    auto stat = [&](auto getter) {
        double mean = 0, var = 0;
        for (const auto& r : results) mean += getter(r.eff);
        mean /= results.size();
        for (const auto& r : results) {
            const double d = getter(r.eff) - mean;
            var += d * d;
        }
        var = results.size() > 1 ? var / (results.size() - 1) : 0.0;
        return json{{"mean", mean}, {"stddev", std::sqrt(var)}};
    };
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            s["B"][std::to_string(i + 1) + std::to_string(j + 1)] =
                stat([=](const EffectiveCoefficients& e) { return e.B(i, j); });
    for (int i = 0; i < m; ++i)
        s["b"][std::to_string(i + 1)] =
            stat([=](const EffectiveCoefficients& e) { return e.b[i]; });
    s["lambda"] = stat([](const EffectiveCoefficients& e) { return e.lambda; });
    s["min_eig"] = stat([](const EffectiveCoefficients& e) { return e.min_eig; });
    s["shear_mean"] = stat([](const EffectiveCoefficients& e) { return e.shear_mean; });
    s["aniso_res"] = stat([](const EffectiveCoefficients& e) { return e.aniso_res; });
    s["b_route_diff"] = stat([](const EffectiveCoefficients& e) { return e.b_route_diff; });
    s["skew_res"] = stat([](const EffectiveCoefficients& e) { return e.skew_res; });
    std::ofstream(out / "summary.json") << s.dump(2) << "\n";

    write_manifest(rc, out, {"effective.csv", "summary.json"});
    for (const auto& r : results) {
        if (r.eff.min_eig < 1.0 - 1e-6) {
            log_info("coercivity violated: min eigenvalue " + fmt17(r.eff.min_eig));
            return 4;
        }
    }
    return 0;
}

int run_dilute(const RunConfig& rc, const fs::path& out) {
    DiluteConfig dc;
    dc.dim = rc.dim;
    dc.lambda_ladder = rc.lambda_ladder;
    dc.N = rc.dilute_N;
    dc.gap = rc.dilute_gap;
    dc.single_inclusion = rc.generator != GeneratorTag::RSA;
    dc.rsa_cell_length = rc.L;
    dc.seeds = rc.seeds;
    dc.tol = rc.tol;
    DiluteFit fit = dilute_slope(dc);

    std::ofstream csv(out / "dilute.csv");
    csv << "seed,lambda_nominal,lambda_realized,shear_eig_mean\n";
    for (const auto& p : fit.points)
        csv << p.seed << ',' << fmt17(p.lambda_nominal) << ',' << fmt17(p.lambda_realized)
            << ',' << fmt17(p.shear_eig_mean) << '\n';
    csv.close();

    json s;
    s["slope"] = fit.c;
    s["ci"] = fit.ci;
    std::ofstream(out / "dilute.json") << s.dump(2) << "\n";
    write_manifest(rc, out, {"dilute.csv", "dilute.json"});
    log_info("dilute slope c = " + fmt17(fit.c) + " +- " + fmt17(fit.ci));
    return 0;
}

int run_ensemble(const RunConfig& rc, const fs::path& out) {
    EnsembleConfig ec;
    ec.dim = rc.dim;
    ec.lambda = rc.lambda;
    ec.gap = rc.delta;
    ec.L_ladder = rc.L_ladder;
    ec.n_seeds = rc.n_seeds;
    ec.seed0 = rc.seeds.empty() ? 1 : rc.seeds[0];
    ec.h = rc.ensemble_h;
    ec.generator = rc.generator;
    ec.spacing = rc.spacing;
    ec.jitter = rc.jitter;
    ec.tol = rc.tol;
    EnsembleStats st = ensemble_stats(ec);

    const int m = StrainBasis::canonical(rc.dim).m();
    std::ofstream csv(out / "ensemble.csv");
    csv << "L,seed,lambda";
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) csv << ",B_" << i + 1 << j + 1;
    for (int i = 0; i < m; ++i) csv << ",b_" << i + 1;
    csv << ",mean_grad_res,sigma_fluid_mean,iters\n";
    for (const auto& r : st.rows) {
        csv << fmt17(r.L) << ',' << r.seed << ',' << fmt17(r.lambda);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) csv << ',' << fmt17(r.B(i, j));
        for (int i = 0; i < m; ++i) csv << ',' << fmt17(r.b[i]);
        csv << ',' << fmt17(r.mean_grad_res) << ',' << fmt17(r.sigma_fluid_mean) << ','
            << r.iters << '\n';
    }
    csv.close();

    json s;
    for (std::size_t i = 0; i < st.L_values.size(); ++i) {
        s["by_L"].push_back({{"L", st.L_values[i]},
                             {"mean_shear", st.mean_shear[i]},
                             {"stddev_shear", st.stddev_shear[i]}});
    }
    s["stddev_decreasing"] = st.stddev_decreasing;
    std::ofstream(out / "ensemble.json") << s.dump(2) << "\n";
    write_manifest(rc, out, {"ensemble.csv", "ensemble.json"});
    return 0;
}

int run_twoscale(const RunConfig& rc, const fs::path& out) {
    TwoScaleConfig tc;
    tc.dim = rc.dim;
    tc.lambda = rc.lambda;
    tc.gap = rc.delta;
    tc.seed = rc.seeds.empty() ? 1 : rc.seeds[0];
    tc.cell_L = rc.cell_L;
    tc.cell_N = rc.cell_N;
    tc.box_N = rc.box_N;
    tc.eps_ladder = rc.eps_ladder;
    tc.tol = rc.tol;
    tc.sediment = rc.sediment;
    TwoScaleReport rep = run_two_scale(tc);

    std::ofstream csv(out / "twoscale.csv");
    csv << "eps,lambda_eps,h1_err_vel,l2_err_press,weak_avg_err\n";
    for (const auto& r : rep.rows)
        csv << fmt17(r.eps) << ',' << fmt17(r.lambda_eps) << ',' << fmt17(r.h1_err_vel)
            << ',' << fmt17(r.l2_err_press) << ',' << fmt17(r.weak_avg_err) << '\n';
    csv.close();

    json s;
    s["lambda"] = rep.lambda;
    s["seed"] = rep.seed;
    s["f"] = rep.f_descriptor;
    for (int i = 0; i < rep.Bbar.rows(); ++i)
        for (int j = 0; j < rep.Bbar.cols(); ++j)
            s["Bbar"][std::to_string(i + 1) + std::to_string(j + 1)] = rep.Bbar(i, j);
    for (int i = 0; i < rep.bbar.size(); ++i)
        s["bbar"][std::to_string(i + 1)] = rep.bbar[i];
    bool h1_dec = true, p_dec = true;
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        h1_dec = h1_dec && rep.rows[i].h1_err_vel < rep.rows[i - 1].h1_err_vel;
        p_dec = p_dec && rep.rows[i].l2_err_press < rep.rows[i - 1].l2_err_press;
    }
    s["h1_monotone_decay"] = h1_dec;
    s["pressure_monotone_decay"] = p_dec;
    std::ofstream(out / "twoscale.json") << s.dump(2) << "\n";
    write_manifest(rc, out, {"twoscale.csv", "twoscale.json"});
    return 0;
}

int run_validate(const RunConfig& rc, const fs::path& out) {
    bool all_ok = true;
    auto report = [&](bool ok, const std::string& what) {
        std::cout << (ok ? "PASS" : "FAIL") << ": " << what << "\n";
        all_ok = all_ok && ok;
    };

    // empty-suspension identity: Bbar = Id, bbar = 0
    {
        const int N = rc.N > 0 ? rc.N : 64;
        Grid grid = Grid::periodic(rc.dim, N, rc.L);
        LabelField labels = LabelField::all_fluid(grid);
        labels.gap = rc.delta;
        const StrainBasis basis = StrainBasis::canonical(rc.dim);
        std::vector<CorrectorSolution> sols;
        for (const auto& E : basis.E)
            sols.push_back(solve_corrector(grid, labels, E, solver_options(rc)));
        EffectiveCoefficients eff =
            compute_effective(sols, labels, basis, {0, rc.L, N, rc.tol});
        const double err =
            (eff.B - Eigen::MatrixXd::Identity(basis.m(), basis.m())).cwiseAbs().maxCoeff();
        report(err < 1e-9 && eff.b.cwiseAbs().maxCoeff() == 0.0,
               "empty suspension: Bbar = Id (max err " + fmt17(err) + "), bbar = 0");
    }

    // discrete adjointness of div/grad
    {
        Grid grid = Grid::periodic(rc.dim, 8, 8.0);
        std::mt19937_64 rng(12345);
        StaggeredField u = StaggeredField::zeros(grid);
        for (int c = 0; c < rc.dim; ++c)
            for (auto& v : u.comp[c]) v = 2.0 * uniform01(rng) - 1.0;
        ScalarField p = ScalarField::zeros(grid);
        for (auto& v : p.v) v = 2.0 * uniform01(rng) - 1.0;
        const double lhs = inner(divergence(u), p);
        const double rhs = -inner(u, gradient(p));
        report(std::abs(lhs - rhs) < 1e-13 * (std::abs(lhs) + 1.0),
               "div/grad adjointness to round-off");
    }

    // geometry invariants per seed
    for (std::uint64_t seed : rc.seeds) {
        try {
            InclusionSet set = make_geometry(rc, seed);
            ValidationReport vr = validate(set);
            report(vr.pass(), "seed " + std::to_string(seed) + ": hardcore gap " +
                                  fmt17(vr.min_gap) + " > delta, lambda " +
                                  fmt17(vr.volume_fraction));
            InclusionSet set2 = make_geometry(rc, seed);
            report(set.centers == set2.centers,
                   "seed " + std::to_string(seed) + ": generation is reproducible");
            if (rc.N > 0) {
                Grid grid = Grid::periodic(rc.dim, rc.N, rc.L);
                LabelField labels = rasterize(set, grid);
                check_label_structure(labels);
                report(true, "seed " + std::to_string(seed) +
                                 ": rasterization labels well-formed");
            }
        } catch (const Error& e) {
            report(false, "seed " + std::to_string(seed) + ": " + e.what());
        }
    }

    std::ofstream(out / "validate.txt") << (all_ok ? "PASS" : "FAIL") << "\n";
    write_manifest(rc, out, {"validate.txt"});
    return all_ok ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stokes-rve: effective viscosity of rigid suspensions on periodized cells"};
    app.require_subcommand(1);

    std::string config_path, out_override;
    long seed_override = -1;
    for (const std::string mode :
         {"effective", "dilute", "ensemble", "twoscale", "validate"}) {
        auto* sub = app.add_subcommand(mode);
        sub->add_option("--config", config_path, "config file")->required();
        sub->add_option("--seed-override", seed_override, "replace the seed list");
        sub->add_option("--out", out_override, "output directory override");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string mode = app.get_subcommands().front()->get_name();

    RunConfig rc;
    try {
        rc = parse_run_config(config_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    const char* want = mode.c_str();
    // subcommand overrides the file's mode so one config can serve several runs
    if (mode == "effective") rc.mode = RunMode::Effective;
    else if (mode == "dilute") rc.mode = RunMode::Dilute;
    else if (mode == "ensemble") rc.mode = RunMode::Ensemble;
    else if (mode == "twoscale") rc.mode = RunMode::TwoScale;
    else if (mode == "validate") rc.mode = RunMode::Validate;
    (void)want;
    if (seed_override >= 0) rc.seeds = {static_cast<std::uint64_t>(seed_override)};
    if (!out_override.empty()) rc.out_dir = out_override;
    g_debug = rc.debug;

    try {
        fs::create_directories(rc.out_dir);
        const fs::path out(rc.out_dir);
        log_info("mode " + mode + ", output " + rc.out_dir);
        switch (rc.mode) {
            case RunMode::Effective: return run_effective(rc, out);
            case RunMode::Dilute: return run_dilute(rc, out);
            case RunMode::Ensemble: return run_ensemble(rc, out);
            case RunMode::TwoScale: return run_twoscale(rc, out);
            case RunMode::Validate: return run_validate(rc, out);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
