#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "conftree/h1_error.hpp"
#include "conftree/indicators.hpp"
#include "conftree/io.hpp"
#include "conftree/nvb2d.hpp"
#include "conftree/oracle.hpp"

namespace conftree::bench {

struct ExperimentConfig {
    std::string target = "u2";          // u1 | u2 | affine | xsq
    std::string domain = "auto";        // auto | lshape | square
    std::string algorithm = "both";     // alg1 | alg2 | both
    std::string stop = "iterations";    // iterations | error_below | indicator_zero
    std::size_t iterations = 2000;
    double error_tol = 0.0;
    std::string quad_mode = "adaptive";  // adaptive | plain
    int quad_depth = 24;                 // bisection levels near curve loci
    int quad_point_depth = 40;           // bisection levels near point loci
    double quad_tol = 1e-9;
    std::size_t checkpoint_stride = 10;
    std::string output_dir = "out";
    std::size_t oracle_depth = 8;
    std::size_t oracle_state_cap = 2'000'000;
    std::size_t iteration_cap = 50'000'000;
    std::size_t conformity_check_stride = 1000;
};

inline void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    auto to_size = [&](const std::string& v) { return static_cast<std::size_t>(std::stoull(v)); };
    if (key == "target") cfg.target = value;
    else if (key == "domain") cfg.domain = value;
    else if (key == "algorithm") cfg.algorithm = value;
    else if (key == "stop") cfg.stop = value;
    else if (key == "iterations") cfg.iterations = to_size(value);
    else if (key == "error_tol") cfg.error_tol = std::stod(value);
    else if (key == "quad_mode") cfg.quad_mode = value;
    else if (key == "quad_depth") cfg.quad_depth = std::stoi(value);
    else if (key == "quad_point_depth") cfg.quad_point_depth = std::stoi(value);
    else if (key == "quad_tol") cfg.quad_tol = std::stod(value);
    else if (key == "checkpoint_stride") cfg.checkpoint_stride = to_size(value);
    else if (key == "output_dir") cfg.output_dir = value;
    else if (key == "oracle_depth") cfg.oracle_depth = to_size(value);
    else if (key == "oracle_state_cap") cfg.oracle_state_cap = to_size(value);
    else if (key == "iteration_cap") cfg.iteration_cap = to_size(value);
    else if (key == "conformity_check_stride") cfg.conformity_check_stride = to_size(value);
    else throw std::invalid_argument("unknown config key: " + key);
}

/// Line-oriented `key = value` file; '#' starts a comment. Unknown keys are
/// rejected.
inline ExperimentConfig parse_config_file(std::istream& is, ExperimentConfig base = {}) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        apply_key(base, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return base;
}

inline void validate(const ExperimentConfig& cfg) {
    auto one_of = [](const std::string& v, std::initializer_list<const char*> opts,
                     const char* what) {
        for (const char* o : opts)
            if (v == o) return;
        throw std::invalid_argument(std::string("invalid ") + what + ": " + v);
    };
    one_of(cfg.target, {"u1", "u2", "affine", "xsq"}, "target");
    one_of(cfg.domain, {"auto", "lshape", "square"}, "domain");
    one_of(cfg.algorithm, {"alg1", "alg2", "both"}, "algorithm");
    one_of(cfg.stop, {"iterations", "error_below", "indicator_zero"}, "stop");
    one_of(cfg.quad_mode, {"adaptive", "plain"}, "quad_mode");
    if (cfg.checkpoint_stride == 0) throw std::invalid_argument("checkpoint_stride must be > 0");
    if (cfg.quad_depth < 0 || cfg.quad_point_depth < 0)
        throw std::invalid_argument("quadrature depths must be nonnegative");
}

inline nvb::InitialMesh domain_mesh(const ExperimentConfig& cfg) {
    std::string d = cfg.domain;
    if (d == "auto") d = (cfg.target == "u1") ? "lshape" : "square";
    return d == "lshape" ? nvb::lshape_mesh() : nvb::square_mesh();
}

inline QuadratureSettings quad_settings(const ExperimentConfig& cfg) {
    QuadratureSettings qs;
    qs.adaptive = cfg.quad_mode == "adaptive";
    qs.curve_depth = cfg.quad_depth;
    qs.point_depth = cfg.quad_point_depth;
    qs.tol = cfg.quad_tol;
    return qs;
}

inline StoppingRule stopping_rule(const ExperimentConfig& cfg) {
    if (cfg.stop == "iterations") return StoppingRule::max_iterations(cfg.iterations);
    if (cfg.stop == "error_below") return StoppingRule::error_below(cfg.error_tol);
    return StoppingRule::indicator_zero();
}

/// Per-run invariant audit: conformity after every step (incremental edge
/// bookkeeping, cross-checked by full scans every `full_check_stride` steps),
/// exact monotonicity of the maximal indicator, and the complexity identity.
class RunAudit {
public:
    RunAudit(nvb::NvbBackend& backend, const RefinementTree& tree, std::size_t full_check_stride)
        : backend_(&backend), tracker_(backend, tree), stride_(full_check_stride) {}

    template <typename Engine>
    void after_step(Engine& engine, const StepRecord& rec, const SubdivisionPatch& patch) {
        tracker_.apply_subdivision(patch, *backend_);
        if (!tracker_.conforming()) ++conformity_violations_;
        if (stride_ != 0 && (rec.n + 1) % stride_ == 0 &&
            !backend_->is_conforming(engine.tree()))
            ++conformity_violations_;
        if (have_prev_ && !(rec.max_indicator <= prev_t_)) ++monotonicity_violations_;
        prev_t_ = rec.max_indicator;
        have_prev_ = true;
        if (engine.tree().complexity() != rec.n + 1) ++complexity_violations_;
        // Subadditivity audit over the subdivided cells, relative tolerance
        // 1e-10 on the parent error.
        for (CellId parent : patch.cells) {
            const auto first = backend_->arena().first_child(parent);
            const auto count = backend_->arena().child_count(parent);
            double child_sum = 0.0;
            for (std::uint32_t i = 0; i < count; ++i) child_sum += engine.err_of(first + i);
            const double pe = engine.err_of(parent);
            if (std::isinf(pe)) continue;
            if (child_sum > pe * (1.0 + 1e-10)) ++subadditivity_violations_;
            ++subadditivity_checks_;
        }
    }

    template <typename Engine>
    void finish(Engine& engine) {
        if (have_prev_ && !(engine.trace().final_max_indicator <= prev_t_))
            ++monotonicity_violations_;
        if (!backend_->is_conforming(engine.tree())) ++conformity_violations_;
    }

    long conformity_violations() const { return conformity_violations_; }
    long monotonicity_violations() const { return monotonicity_violations_; }
    long complexity_violations() const { return complexity_violations_; }
    long subadditivity_violations() const { return subadditivity_violations_; }
    long subadditivity_checks() const { return subadditivity_checks_; }

private:
    nvb::NvbBackend* backend_;
    nvb::ConformityTracker tracker_;
    std::size_t stride_;
    double prev_t_ = 0.0;
    bool have_prev_ = false;
    long conformity_violations_ = 0;
    long monotonicity_violations_ = 0;
    long complexity_violations_ = 0;
    long subadditivity_violations_ = 0;
    long subadditivity_checks_ = 0;
};

struct RunOutput {
    RunTrace trace;
    std::vector<io::Checkpoint> checkpoints;
    RunStatus status = RunStatus::indicator_zero;
    long conformity_violations = 0;
    long monotonicity_violations = 0;
    long complexity_violations = 0;
    long subadditivity_violations = 0;
    long subadditivity_checks = 0;
    std::size_t final_leaves = 0;
    double final_err = 0.0;
};

/// Runs one algorithm on one target over a fresh backend and returns the
/// trace plus audit counters. Checkpoints record every `stride`-th iteration
/// and the final state, with the global error re-summed exactly.
inline RunOutput run_single(const ExperimentConfig& cfg, Marking marking) {
    nvb::NvbBackend backend(domain_mesh(cfg));
    H1ErrorFunctional err(backend, make_target(cfg.target), quad_settings(cfg));
    auto engine = make_engine(backend, [&err](CellId c) { return err(c); }, marking);
    RunAudit audit(backend, engine.tree(), cfg.conformity_check_stride);

    struct Hook {
        RunAudit* audit;
        std::vector<io::Checkpoint>* cps;
        std::size_t stride;
        template <typename Engine>
        void after_step(Engine& engine, const StepRecord& rec, const SubdivisionPatch& patch) {
            audit->after_step(engine, rec, patch);
            if ((rec.n + 1) % stride == 0) {
                double exact = 0.0;
                for (CellId c : engine.tree().leaves()) exact += engine.err_of(c);
                cps->push_back({engine.tree().leaf_count(), std::sqrt(exact)});
            }
        }
    };

    RunOutput out;
    out.checkpoints.push_back(
        {engine.tree().leaf_count(), std::sqrt(engine.global_error())});
    Hook hook{&audit, &out.checkpoints, cfg.checkpoint_stride};
    out.status = engine.run(stopping_rule(cfg), cfg.iteration_cap, hook);
    audit.finish(engine);

    double exact = 0.0;
    for (CellId c : engine.tree().leaves()) exact += engine.err_of(c);
    if (out.checkpoints.back().cards != engine.tree().leaf_count())
        out.checkpoints.push_back({engine.tree().leaf_count(), std::sqrt(exact)});

    out.trace = engine.trace();
    out.conformity_violations = audit.conformity_violations();
    out.monotonicity_violations = audit.monotonicity_violations();
    out.complexity_violations = audit.complexity_violations();
    out.subadditivity_violations = audit.subadditivity_violations();
    out.subadditivity_checks = audit.subadditivity_checks();
    out.final_leaves = engine.tree().leaf_count();
    out.final_err = exact;
    return out;
}

inline const char* status_name(RunStatus s) {
    switch (s) {
        case RunStatus::indicator_zero: return "indicator_zero";
        case RunStatus::iterations_reached: return "iterations_reached";
        case RunStatus::error_reached: return "error_reached";
        case RunStatus::cap_exceeded: return "cap_exceeded";
    }
    return "unknown";
}

/// Full `run` command: executes the configured algorithms and writes, per
/// algorithm: trace_<alg>.csv, convergence_<alg>.csv, mesh_<alg>.txt,
/// patches_<alg>.txt and summary_<alg>.txt under output_dir.
inline int cmd_run(const ExperimentConfig& cfg) {
    validate(cfg);
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    bool capped = false;
    for (const std::string alg : {std::string("alg1"), std::string("alg2")}) {
        if (cfg.algorithm != "both" && cfg.algorithm != alg) continue;
        const Marking marking = alg == "alg1" ? Marking::penalized : Marking::simple;

        // The mesh/patches dumps need the backend alive; rebuild and re-run
        // within one scope.
        nvb::NvbBackend backend(domain_mesh(cfg));
        H1ErrorFunctional err(backend, make_target(cfg.target), quad_settings(cfg));
        auto engine = make_engine(backend, [&err](CellId c) { return err(c); }, marking);
        RunAudit audit(backend, engine.tree(), cfg.conformity_check_stride);
        std::vector<io::Checkpoint> cps{{engine.tree().leaf_count(),
                                         std::sqrt(engine.global_error())}};
        struct Hook {
            RunAudit* audit;
            std::vector<io::Checkpoint>* cps;
            std::size_t stride;
            template <typename Engine>
            void after_step(Engine& e, const StepRecord& rec, const SubdivisionPatch& p) {
                audit->after_step(e, rec, p);
                if ((rec.n + 1) % stride == 0) {
                    double exact = 0.0;
                    for (CellId c : e.tree().leaves()) exact += e.err_of(c);
                    cps->push_back({e.tree().leaf_count(), std::sqrt(exact)});
                }
            }
        } hook{&audit, &cps, cfg.checkpoint_stride};
        const RunStatus status = engine.run(stopping_rule(cfg), cfg.iteration_cap, hook);
        audit.finish(engine);
        capped = capped || status == RunStatus::cap_exceeded;

        double exact = 0.0;
        for (CellId c : engine.tree().leaves()) exact += engine.err_of(c);
        if (cps.back().cards != engine.tree().leaf_count())
            cps.push_back({engine.tree().leaf_count(), std::sqrt(exact)});

        const fs::path dir(cfg.output_dir);
        {
            std::ofstream os(dir / ("trace_" + alg + ".csv"));
            io::write_trace_csv(engine.trace(), os);
        }
        {
            std::ofstream os(dir / ("convergence_" + alg + ".csv"));
            io::write_convergence_csv(cps, os);
        }
        {
            std::ofstream os(dir / ("mesh_" + alg + ".txt"));
            io::dump_mesh(backend, engine.tree(), os);
        }
        {
            std::ofstream os(dir / ("patches_" + alg + ".txt"));
            io::dump_patches(engine.tree().patch_history(), os);
        }
        {
            std::ofstream os(dir / ("summary_" + alg + ".txt"));
            os << "target = " << cfg.target << "\n";
            os << "algorithm = " << alg << "\n";
            os << "status = " << status_name(status) << "\n";
            os << "iterations = " << engine.iteration() << "\n";
            os << "final_leaves = " << engine.tree().leaf_count() << "\n";
            os << "final_complexity = " << engine.tree().complexity() << "\n";
            os << "final_err = " << io::fmt17(exact) << "\n";
            os << "conformity_violations = " << audit.conformity_violations() << "\n";
            os << "monotonicity_violations = " << audit.monotonicity_violations() << "\n";
            os << "complexity_violations = " << audit.complexity_violations() << "\n";
            os << "subadditivity_violations = " << audit.subadditivity_violations() << "\n";
            os << "subadditivity_checks = " << audit.subadditivity_checks() << "\n";
        }
    }
    return capped ? 2 : 0;
}

/// Least-squares slope of log(err) against log(cards) over a cardinality
/// window. Needs at least `min_points` checkpoints inside the window.
inline double fit_slope(const std::vector<io::Checkpoint>& pts, double cards_lo, double cards_hi,
                        std::size_t min_points = 5) {
    std::vector<std::pair<double, double>> xy;
    for (const auto& p : pts) {
        if (p.cards < cards_lo || p.cards > cards_hi) continue;
        if (p.err_sqrt <= 0.0) continue;
        xy.emplace_back(std::log(static_cast<double>(p.cards)), std::log(p.err_sqrt));
    }
    if (xy.size() < min_points)
        throw std::invalid_argument("slope fit: fewer than " + std::to_string(min_points) +
                                    " checkpoints in range");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : xy) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(xy.size());
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct CertifyOutcome {
    oracle::BestErrorTable table;
    oracle::CertifyReport report;
    bool capped = false;
};

/// Near-best certification: brute-force best errors up to oracle_depth, one
/// penalized-marking run of the same length, and the bound check.
inline CertifyOutcome certify(const ExperimentConfig& cfg) {
    validate(cfg);
    nvb::NvbBackend backend(domain_mesh(cfg));
    H1ErrorFunctional err(backend, make_target(cfg.target), quad_settings(cfg));
    auto err_fn = [&err](CellId c) { return err(c); };

    CertifyOutcome out;
    out.table = oracle::best_errors(backend, backend.initial_tree(), err_fn, cfg.oracle_depth,
                                    cfg.oracle_state_cap);
    out.capped = out.table.capped;

    auto engine = make_engine(backend, err_fn, Marking::penalized);
    engine.run(StoppingRule::max_iterations(cfg.oracle_depth), cfg.iteration_cap);
    std::vector<double> err_at;
    for (std::size_t n = 0; n < engine.trace().recorded_states(); ++n)
        err_at.push_back(engine.trace().err_at(n));
    out.report = oracle::certify_near_best(err_at, out.table, nvb::NvbBackend::max_patch_size);
    return out;
}

}  // namespace conftree::bench
