#include "damctl/damctl.h"

#include "damctl/analysis.hpp"
#include "damctl/bundle.hpp"
#include "damctl/config.hpp"
#include "damctl/error.hpp"
#include "damctl/parallel.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <new>
#include <string>

using namespace damctl;

struct damctl_config {
    ModelConfig cfg;
    std::vector<std::string> warnings;
};

struct damctl_solution {
    ResultBundle bundle;
};

struct damctl_sweep {
    ModelConfig cfg;
    SweepResult result;
    double wall_time = 0.0;
};

namespace {

thread_local std::string g_last_error;

template <class F>
damctl_status guarded(F&& fn) noexcept {
    try {
        g_last_error.clear();
        fn();
        return DAMCTL_OK;
    } catch (const ConfigError& e) {
        g_last_error = e.what();
        return DAMCTL_ERR_VALIDATION;
    } catch (const NonConvergenceError& e) {
        g_last_error = e.what();
        return DAMCTL_ERR_NONCONVERGENCE;
    } catch (const IoError& e) {
        g_last_error = e.what();
        return DAMCTL_ERR_IO;
    } catch (const std::invalid_argument& e) {
        g_last_error = e.what();
        return DAMCTL_ERR_VALIDATION;
    } catch (const DomainError& e) {
        g_last_error = e.what();
        return DAMCTL_ERR_VALIDATION;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return DAMCTL_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return DAMCTL_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return DAMCTL_ERR_INTERNAL;
    }
}

void require_handle(const void* p, const char* what) {
    if (!p) throw std::invalid_argument(std::string(what) + " is NULL");
}

void copy_out(const std::string& s, char* buf, size_t cap, size_t* needed) {
    if (needed) *needed = s.size() + 1;
    if (buf && cap > 0) {
        const size_t n = std::min(cap - 1, s.size());
        std::memcpy(buf, s.data(), n);
        buf[n] = '\0';
    }
}

damctl_mc_stats to_c(const McEstimate& e) {
    return {e.estimate, e.std_error, e.paths, e.failed, e.truncated, e.empty_hit};
}

Regime regime_arg(int r) {
    if (r != 0 && r != 1) throw std::invalid_argument("regime must be 0 or 1");
    return regime_from_index(r);
}

void write_path_log(const std::string& path, const std::vector<RewardAccumulator>& paths) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError(path, "cannot open for writing");
    f << "path,total,production,penalties,switch_costs,terminal_penalty,jumps,switches,failed,end_time,empty_hit,"
         "truncated\n";
    for (std::size_t p = 0; p < paths.size(); ++p) {
        const auto& a = paths[p];
        f << p << ',' << format_double(a.total()) << ',' << format_double(a.production) << ','
          << format_double(a.penalties) << ',' << format_double(a.switch_costs) << ','
          << format_double(a.terminal_penalty) << ',' << a.jumps << ',' << a.switches << ',' << a.failed << ','
          << format_double(a.end_time) << ',' << a.empty_hit << ',' << a.truncated << '\n';
    }
    if (!f) throw IoError(path, "write failed");
}

} // namespace

extern "C" {

const char* damctl_version(void) { return "0.1.0"; }

const char* damctl_last_error(void) { return g_last_error.c_str(); }

damctl_status damctl_config_default(damctl_config** out) {
    return guarded([&] {
        require_handle(out, "out");
        auto* c = new damctl_config{};
        c->warnings = validate(c->cfg);
        *out = c;
    });
}

damctl_status damctl_config_load(const char* path, damctl_config** out) {
    return guarded([&] {
        require_handle(path, "path");
        require_handle(out, "out");
        auto loaded = load_config(path);
        *out = new damctl_config{std::move(loaded.config), std::move(loaded.warnings)};
    });
}

damctl_status damctl_config_parse(const char* text, damctl_config** out) {
    return guarded([&] {
        require_handle(text, "text");
        require_handle(out, "out");
        auto loaded = parse_config(text);
        *out = new damctl_config{std::move(loaded.config), std::move(loaded.warnings)};
    });
}

void damctl_config_free(damctl_config* cfg) { delete cfg; }

size_t damctl_config_warning_count(const damctl_config* cfg) { return cfg ? cfg->warnings.size() : 0; }

const char* damctl_config_warning(const damctl_config* cfg, size_t i) {
    if (!cfg || i >= cfg->warnings.size()) return nullptr;
    return cfg->warnings[i].c_str();
}

damctl_status damctl_config_get(const damctl_config* cfg, const char* key, double* out) {
    return guarded([&] {
        require_handle(cfg, "cfg");
        require_handle(key, "key");
        require_handle(out, "out");
        *out = get_numeric(cfg->cfg, key);
    });
}

damctl_status damctl_config_set(damctl_config* cfg, const char* key, double value) {
    return guarded([&] {
        require_handle(cfg, "cfg");
        require_handle(key, "key");
        ModelConfig next = cfg->cfg;
        set_numeric(next, key, value);
        auto warnings = validate(next);
        cfg->cfg = next;
        cfg->warnings = std::move(warnings);
    });
}

uint64_t damctl_config_hash(const damctl_config* cfg) { return cfg ? config_hash(cfg->cfg) : 0; }

damctl_status damctl_config_serialize(const damctl_config* cfg, char* buf, size_t cap, size_t* needed) {
    return guarded([&] {
        require_handle(cfg, "cfg");
        copy_out(serialize_config(cfg->cfg), buf, cap, needed);
    });
}

damctl_status damctl_solve(const damctl_config* cfg, double tol, long max_iter, int threads, damctl_solution** out) {
    return guarded([&] {
        require_handle(cfg, "cfg");
        require_handle(out, "out");
        SolveOptions opts;
        opts.tol = tol > 0.0 ? tol : cfg->cfg.numerics.tol;
        opts.max_iter = max_iter > 0 ? max_iter : cfg->cfg.numerics.max_iter;
        opts.threads = threads > 0 ? threads : worker_count();
        opts.keep_history = false;
        const SolveResult res = solve(cfg->cfg, Grid(cfg->cfg), opts);
        *out = new damctl_solution{make_bundle(cfg->cfg, res, opts.tol, opts.threads)};
    });
}

void damctl_solution_free(damctl_solution* sol) { delete sol; }

damctl_status damctl_solution_write(const damctl_solution* sol, const char* dir, int format) {
    return guarded([&] {
        require_handle(sol, "sol");
        require_handle(dir, "dir");
        if (format != 0 && format != 1) throw std::invalid_argument("format must be 0 (csv) or 1 (json)");
        write_bundle(sol->bundle, dir, format == 0 ? BundleFormat::Csv : BundleFormat::Json);
    });
}

damctl_status damctl_solution_load(const char* dir, damctl_solution** out) {
    return guarded([&] {
        require_handle(dir, "dir");
        require_handle(out, "out");
        *out = new damctl_solution{read_bundle(dir)};
    });
}

damctl_status damctl_solution_config(const damctl_solution* sol, damctl_config** out) {
    return guarded([&] {
        require_handle(sol, "sol");
        require_handle(out, "out");
        auto* c = new damctl_config{sol->bundle.config, {}};
        c->warnings = validate(c->cfg);
        *out = c;
    });
}

long damctl_solution_iterations(const damctl_solution* sol) { return sol ? sol->bundle.iterations : 0; }
double damctl_solution_residual(const damctl_solution* sol) { return sol ? sol->bundle.residual : 0.0; }
double damctl_solution_wall_time(const damctl_solution* sol) { return sol ? sol->bundle.wall_time : 0.0; }

void damctl_solution_shape(const damctl_solution* sol, int* nh, int* nl) {
    if (!sol) return;
    if (nh) *nh = sol->bundle.config.grid.nh;
    if (nl) *nl = sol->bundle.config.grid.nl;
}

damctl_status damctl_solution_value(const damctl_solution* sol, int regime, int ih, int il, double* out) {
    return guarded([&] {
        require_handle(sol, "sol");
        require_handle(out, "out");
        const Grid g = sol->bundle.grid();
        if (ih < 0 || ih >= g.nh() || il < 0 || il >= g.nl()) throw std::invalid_argument("node out of range");
        *out = sol->bundle.value.v[index_of(regime_arg(regime))][g.index(ih, il)];
    });
}

damctl_status damctl_solution_threshold(const damctl_solution* sol, int regime, int il, double* out) {
    return guarded([&] {
        require_handle(sol, "sol");
        require_handle(out, "out");
        const auto& t = sol->bundle.thresholds[index_of(regime_arg(regime))];
        if (il < 0 || static_cast<std::size_t>(il) >= t.size()) throw std::invalid_argument("node out of range");
        *out = t[il];
    });
}

damctl_status damctl_solution_recheck(const damctl_solution* sol, double* residual) {
    return guarded([&] {
        require_handle(sol, "sol");
        require_handle(residual, "residual");
        const auto& b = sol->bundle;
        const ValueField r = hjb_residual(b.config, b.grid(), b.value);
        double m = 0.0;
        for (const auto& field : r.v)
            for (double x : field) m = std::max(m, std::abs(x));
        *residual = m;
    });
}

damctl_status damctl_solution_report(const damctl_solution* sol, char* buf, size_t cap, size_t* needed) {
    return guarded([&] {
        require_handle(sol, "sol");
        const auto& b = sol->bundle;
        const ValueField r = hjb_residual(b.config, b.grid(), b.value);
        double m = 0.0;
        for (const auto& field : r.v)
            for (double x : field) m = std::max(m, std::abs(x));
        copy_out(report_json(b, policy_report(b.config, b.grid(), b.value, b.policy), m), buf, cap, needed);
    });
}

damctl_status damctl_simulate(const damctl_config* cfg, const damctl_solution* policy, double h, double ell,
                              int regime, long n_paths, uint64_t seed, int threads, const char* dump_path,
                              damctl_mc_stats* out) {
    return guarded([&] {
        require_handle(cfg, "cfg");
        require_handle(out, "out");
        const ModelConfig& c = cfg->cfg;
        if (!(h >= c.h_min && h <= c.h_max)) throw std::invalid_argument("initial level outside [h_min, h_max]");
        if (!(ell >= c.b)) throw std::invalid_argument("initial intensity must be >= b");
        const DamState x0{h, ell, regime_arg(regime), 0.0, false};
        std::vector<RewardAccumulator> paths;
        McEstimate est;
        if (policy) {
            if (policy->bundle.config.grid.nh != c.grid.nh || policy->bundle.config.grid.nl != c.grid.nl)
                throw std::invalid_argument("policy grid does not match the configuration grid");
            const GridPolicyAdapter adapter(c, policy->bundle.grid(), policy->bundle.policy);
            est = mc_value(c, adapter, x0, n_paths, seed, threads, dump_path ? &paths : nullptr);
        } else {
            est = mc_value(c, FloorPolicy(c), x0, n_paths, seed, threads, dump_path ? &paths : nullptr);
        }
        if (dump_path) write_path_log(dump_path, paths);
        *out = to_c(est);
    });
}

damctl_status damctl_validate(const damctl_config* cfg, const damctl_solution* sol, const double* h, const double* ell,
                              const int* regime, size_t n, long n_paths, uint64_t seed, int threads,
                              damctl_probe_check* out) {
    bool all_ok = true;
    const damctl_status st = guarded([&] {
        require_handle(cfg, "cfg");
        require_handle(sol, "sol");
        if (n > 0) {
            require_handle(h, "h");
            require_handle(ell, "ell");
            require_handle(regime, "regime");
            require_handle(out, "out");
        }
        for (size_t i = 0; i < n; ++i) out[i] = damctl_probe_check{};
        const ModelConfig& c = cfg->cfg;
        const auto& b = sol->bundle;
        if (b.config.grid.nh != c.grid.nh || b.config.grid.nl != c.grid.nl)
            throw std::invalid_argument("policy grid does not match the configuration grid");
        std::vector<ProbeState> probes;
        for (size_t i = 0; i < n; ++i) probes.push_back({h[i], ell[i], regime_arg(regime[i])});

        SolveOptions opts;
        opts.tol = b.tol > 0.0 ? b.tol : c.numerics.tol;
        opts.max_iter = c.numerics.max_iter * 4;
        opts.threads = threads;
        opts.keep_history = false;
        const Grid coarse = b.grid();
        const Grid fine = coarse.refined();
        const SolveResult refined = solve(c, fine, opts);

        const auto checks = validate_policy(c, coarse, b.value, b.policy, fine, refined.value, probes, n_paths, seed,
                                            threads);
        for (size_t i = 0; i < checks.size(); ++i) {
            const auto& k = checks[i];
            out[i] = {k.probe.h, k.probe.ell, index_of(k.probe.regime), k.solver_value, k.refined_gap, k.c_disc, to_c(k.own),
                      to_c(k.baseline), k.consistent, k.dominates};
            all_ok = all_ok && k.consistent && k.dominates;
        }
    });
    if (st == DAMCTL_OK && !all_ok) {
        g_last_error = "at least one probe failed the Monte Carlo cross-check";
        return DAMCTL_ERR_VALIDATION;
    }
    return st;
}

damctl_status damctl_sweep_run(const damctl_config* cfg, const double* c_values, size_t n_c, const double* probe_ells,
                               size_t n_probes, double tol, long max_iter, int threads, damctl_sweep** out) {
    return guarded([&] {
        require_handle(cfg, "cfg");
        require_handle(out, "out");
        if (n_c == 0) throw std::invalid_argument("empty c list");
        require_handle(c_values, "c_values");
        if (n_probes > 0) require_handle(probe_ells, "probe_ells");
        SolveOptions opts;
        opts.tol = tol > 0.0 ? tol : cfg->cfg.numerics.tol;
        opts.max_iter = max_iter > 0 ? max_iter : cfg->cfg.numerics.max_iter;
        opts.threads = threads;
        opts.keep_history = false;
        const auto start = std::chrono::steady_clock::now();
        auto* s = new damctl_sweep{cfg->cfg, {}, 0.0};
        try {
            s->result = sweep_c(cfg->cfg, std::vector<double>(c_values, c_values + n_c),
                                std::vector<double>(probe_ells, probe_ells + n_probes), opts);
        } catch (...) {
            delete s;
            throw;
        }
        s->wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        *out = s;
    });
}

void damctl_sweep_free(damctl_sweep* sweep) { delete sweep; }

damctl_status damctl_sweep_write(const damctl_sweep* sweep, const char* dir) {
    return guarded([&] {
        require_handle(sweep, "sweep");
        require_handle(dir, "dir");
        write_sweep(sweep->result, sweep->cfg, dir, sweep->wall_time);
    });
}

size_t damctl_sweep_failed_count(const damctl_sweep* sweep) {
    if (!sweep) return 0;
    size_t n = 0;
    for (const auto& e : sweep->result.entries) n += !e.converged;
    return n;
}

damctl_status damctl_sweep_verdicts(const damctl_sweep* sweep, char* buf, size_t cap, size_t* needed) {
    return guarded([&] {
        require_handle(sweep, "sweep");
        std::string text;
        for (const auto& line : verdict_lines(sweep->result, Grid(sweep->cfg).j())) text += line + "\n";
        copy_out(text, buf, cap, needed);
    });
}

} // extern "C"
