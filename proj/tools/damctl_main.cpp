// damctl command-line interface. Talks to the library only through damctl.h.

#include <damctl/damctl.h>

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct ConfigDeleter {
    void operator()(damctl_config* p) const { damctl_config_free(p); }
};
struct SolutionDeleter {
    void operator()(damctl_solution* p) const { damctl_solution_free(p); }
};
struct SweepDeleter {
    void operator()(damctl_sweep* p) const { damctl_sweep_free(p); }
};
using ConfigPtr = std::unique_ptr<damctl_config, ConfigDeleter>;
using SolutionPtr = std::unique_ptr<damctl_solution, SolutionDeleter>;
using SweepPtr = std::unique_ptr<damctl_sweep, SweepDeleter>;

// Thrown to unwind with a status already reported.
struct Failure {
    int code;
};

void check(damctl_status st, const std::string& context) {
    if (st == DAMCTL_OK) return;
    std::cerr << "damctl: " << context << ": " << damctl_last_error() << "\n";
    throw Failure{static_cast<int>(st)};
}

ConfigPtr load_config(const std::string& path) {
    damctl_config* raw = nullptr;
    check(damctl_config_load(path.c_str(), &raw), "loading configuration");
    ConfigPtr cfg(raw);
    for (size_t i = 0; i < damctl_config_warning_count(cfg.get()); ++i)
        std::cerr << "warning: " << damctl_config_warning(cfg.get(), i) << "\n";
    return cfg;
}

SolutionPtr load_solution(const std::string& dir) {
    damctl_solution* raw = nullptr;
    check(damctl_solution_load(dir.c_str(), &raw), "loading policy bundle");
    return SolutionPtr(raw);
}

template <class F>
std::string read_text(F&& fill) {
    size_t needed = 0;
    check(fill(nullptr, 0, &needed), "formatting output");
    std::string buf(needed, '\0');
    check(fill(buf.data(), buf.size(), &needed), "formatting output");
    buf.resize(needed ? needed - 1 : 0);
    return buf;
}

void print_stats(const char* label, const damctl_mc_stats& s) {
    std::printf("%s estimate %.10g std_error %.6g paths %ld failed %ld empty_hit %ld truncated %ld\n", label,
                s.estimate, s.std_error, s.paths, s.failed, s.empty_hit, s.truncated);
}

struct Probes {
    std::vector<double> h, ell;
    std::vector<int> regime;
};

// CSV with header h,ell,regime.
Probes read_probes(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        std::cerr << "damctl: " << path << ": cannot open probe file\n";
        throw Failure{DAMCTL_ERR_IO};
    }
    Probes p;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (lineno == 1 && line.rfind("h", 0) == 0) continue;
        std::istringstream ss(line);
        std::string a, b, c;
        double h = 0, ell = 0;
        int r = 0;
        try {
            if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ','))
                throw std::invalid_argument("expected h,ell,regime");
            h = std::stod(a);
            ell = std::stod(b);
            r = std::stoi(c);
        } catch (const std::exception&) {
            std::cerr << "damctl: " << path << ":" << lineno << ": expected h,ell,regime\n";
            throw Failure{DAMCTL_ERR_VALIDATION};
        }
        p.h.push_back(h);
        p.ell.push_back(ell);
        p.regime.push_back(r);
    }
    if (p.h.empty()) {
        std::cerr << "damctl: " << path << ": no probes\n";
        throw Failure{DAMCTL_ERR_VALIDATION};
    }
    return p;
}

int cmd_solve(const std::string& config, const std::string& out, double tol, long max_iter,
              const std::string& format) {
    auto cfg = load_config(config);
    damctl_solution* raw = nullptr;
    check(damctl_solve(cfg.get(), tol, max_iter, 0, &raw), "solve");
    SolutionPtr sol(raw);
    check(damctl_solution_write(sol.get(), out.c_str(), format == "json" ? 1 : 0), "writing bundle");
    std::printf("converged in %ld iterations, residual %.6g, %.3f s\n", damctl_solution_iterations(sol.get()),
                damctl_solution_residual(sol.get()), damctl_solution_wall_time(sol.get()));
    return 0;
}

int cmd_simulate(const std::string& config, const std::string& policy, double h0, double ell0, int regime,
                 long paths, uint64_t seed, const std::string& dump) {
    auto cfg = load_config(config);
    SolutionPtr sol;
    if (policy != "baseline") sol = load_solution(policy);
    damctl_mc_stats stats{};
    check(damctl_simulate(cfg.get(), sol.get(), h0, ell0, regime, paths, seed, 0, dump.empty() ? nullptr : dump.c_str(),
                          &stats),
          "simulate");
    print_stats(sol ? "policy" : "baseline", stats);
    return 0;
}

int cmd_sweep(const std::string& config, const std::vector<double>& c_list, const std::vector<double>& probe_ells,
              const std::string& out) {
    auto cfg = load_config(config);
    damctl_sweep* raw = nullptr;
    check(damctl_sweep_run(cfg.get(), c_list.data(), c_list.size(), probe_ells.data(), probe_ells.size(), 0.0, 0, 0,
                           &raw),
          "sweep");
    SweepPtr sweep(raw);
    check(damctl_sweep_write(sweep.get(), out.c_str()), "writing sweep");
    std::cout << read_text([&](char* b, size_t n, size_t* need) { return damctl_sweep_verdicts(sweep.get(), b, n, need); });
    const size_t failed = damctl_sweep_failed_count(sweep.get());
    if (failed > 0) {
        std::cerr << "damctl: " << failed << " of " << c_list.size() << " solves did not converge\n";
        return DAMCTL_ERR_NONCONVERGENCE;
    }
    return 0;
}

int cmd_validate(const std::string& config, const std::string& policy, const std::string& probes_path, long paths,
                 uint64_t seed) {
    auto cfg = load_config(config);
    auto sol = load_solution(policy);
    const Probes p = read_probes(probes_path);
    std::vector<damctl_probe_check> out(p.h.size());
    const damctl_status st = damctl_validate(cfg.get(), sol.get(), p.h.data(), p.ell.data(), p.regime.data(),
                                             p.h.size(), paths, seed, 0, out.data());
    // probe rows are only filled when the checks themselves ran
    if (st != DAMCTL_OK && out[0].own.paths == 0) check(st, "validate");
    std::printf("h,ell,regime,solver,mc,mc_se,refined_gap,c_disc,baseline,baseline_se,consistent,dominates\n");
    for (const auto& c : out)
        std::printf("%.10g,%.10g,%d,%.10g,%.10g,%.6g,%.6g,%.6g,%.10g,%.6g,%d,%d\n", c.h, c.ell, c.regime,
                    c.solver_value, c.own.estimate, c.own.std_error, c.refined_gap, c.c_disc, c.baseline.estimate,
                    c.baseline.std_error, c.consistent, c.dominates);
    if (st != DAMCTL_OK) {
        std::cerr << "damctl: validate: " << damctl_last_error() << "\n";
        return st;
    }
    return 0;
}

int cmd_report(const std::string& policy) {
    auto sol = load_solution(policy);
    std::cout << read_text([&](char* b, size_t n, size_t* need) { return damctl_solution_report(sol.get(), b, n, need); })
              << "\n";
    double recomputed = 0.0;
    check(damctl_solution_recheck(sol.get(), &recomputed), "recomputing residual");
    const double stored = damctl_solution_residual(sol.get());
    if (std::abs(recomputed - stored) > 1e-12) {
        std::cerr << "damctl: stored residual " << stored << " does not match recomputed " << recomputed << "\n";
        return DAMCTL_ERR_VALIDATION;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal dam management under self-exciting rainfall"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(damctl_version()));

    std::string config, out, policy, probes, format = "csv", dump;
    double tol = 0.0, h0 = 0.0, ell0 = 0.0;
    long max_iter = 0, paths = 0;
    int regime = 0;
    uint64_t seed = 0;
    std::vector<double> c_list, probe_ells{0.5, 1.5, 2.5};

    auto* solve = app.add_subcommand("solve", "Solve the switching problem and write a result bundle");
    solve->add_option("--config", config, "Configuration file")->required();
    solve->add_option("--out", out, "Output directory")->required();
    solve->add_option("--tol", tol, "Sup-norm stopping tolerance (default: from config)");
    solve->add_option("--max-iter", max_iter, "Iteration cap (default: from config)");
    solve->add_option("--format", format, "Bundle layout")->check(CLI::IsMember({"csv", "json"}));

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo value of a solved policy");
    simulate->add_option("--config", config, "Configuration file")->required();
    simulate->add_option("--policy", policy, "Result bundle directory, or 'baseline'")->required();
    simulate->add_option("--h0", h0, "Initial level")->required();
    simulate->add_option("--ell0", ell0, "Initial intensity")->required();
    simulate->add_option("--regime", regime, "Initial regime (0 closed, 1 operating)")->check(CLI::Range(0, 1));
    simulate->add_option("--paths", paths, "Number of paths")->required();
    simulate->add_option("--seed", seed, "Master seed")->required();
    simulate->add_option("--dump-paths", dump, "Write per-path rewards to FILE")
        ->expected(0, 1)
        ->default_str("paths.csv");

    auto* sweep = app.add_subcommand("sweep", "Re-solve over self-excitation values and test threshold monotonicity");
    sweep->add_option("--config", config, "Configuration file")->required();
    sweep->add_option("--c-list", c_list, "Values of c (space or comma separated)")->required()->delimiter(',');
    sweep->add_option("--probe-ells", probe_ells, "Intensities at which value columns are recorded")->delimiter(',');
    sweep->add_option("--out", out, "Output directory")->required();

    auto* validate = app.add_subcommand("validate", "Cross-check a solved policy by simulation");
    validate->add_option("--config", config, "Configuration file")->required();
    validate->add_option("--policy", policy, "Result bundle directory")->required();
    validate->add_option("--probes", probes, "CSV file with h,ell,regime rows")->required();
    validate->add_option("--paths", paths, "Paths per probe")->required();
    validate->add_option("--seed", seed, "Master seed")->required();

    auto* report = app.add_subcommand("report", "Summarise and re-verify a result bundle");
    report->add_option("--policy", policy, "Result bundle directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "damctl: " << e.what() << "\n\n" << app.help();
        return DAMCTL_ERR_VALIDATION;
    }

    try {
        if (*solve) return cmd_solve(config, out, tol, max_iter, format);
        if (*simulate) {
            if (simulate->count("--dump-paths") && dump.empty()) dump = "paths.csv";
            return cmd_simulate(config, policy, h0, ell0, regime, paths, seed, dump);
        }
        if (*sweep) return cmd_sweep(config, c_list, probe_ells, out);
        if (*validate) return cmd_validate(config, policy, probes, paths, seed);
        if (*report) return cmd_report(policy);
    } catch (const Failure& f) {
        return f.code;
    }
    return DAMCTL_ERR_INTERNAL;
}
