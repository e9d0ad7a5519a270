// Benchmark harness: greedy conforming-mesh refinement runs, convergence
// exports, brute-force near-best certification, slope fits, mesh dumps and
// quadrature validation. All runs are deterministic; there is no seed.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "conftree/bench.hpp"
#include "conftree/h1_error.hpp"
#include "conftree/io.hpp"
#include "conftree/nvb2d.hpp"
#include "conftree/quadrature.hpp"

namespace {

using conftree::bench::ExperimentConfig;

void add_config_options(CLI::App* cmd, ExperimentConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path, "key = value config file");
    cmd->add_option("--target", cfg.target, "u1 | u2 | affine | xsq");
    cmd->add_option("--domain", cfg.domain, "auto | lshape | square");
    cmd->add_option("--alg", cfg.algorithm, "alg1 | alg2 | both");
    cmd->add_option("--stop", cfg.stop, "iterations | error_below | indicator_zero");
    cmd->add_option("--iters", cfg.iterations, "iteration budget for stop = iterations");
    cmd->add_option("--error-tol", cfg.error_tol, "threshold for stop = error_below");
    cmd->add_option("--quad-mode", cfg.quad_mode, "adaptive | plain");
    cmd->add_option("--quad-depth", cfg.quad_depth, "bisection depth near curve loci");
    cmd->add_option("--quad-point-depth", cfg.quad_point_depth,
                    "bisection depth near point loci");
    cmd->add_option("--quad-tol", cfg.quad_tol, "quadrature flagging tolerance");
    cmd->add_option("--stride", cfg.checkpoint_stride, "checkpoint stride (iterations)");
    cmd->add_option("--out", cfg.output_dir, "output directory");
    cmd->add_option("--oracle-depth", cfg.oracle_depth, "brute-force enumeration depth");
    cmd->add_option("--oracle-cap", cfg.oracle_state_cap, "enumeration state cap");
    cmd->add_option("--iteration-cap", cfg.iteration_cap, "hard iteration cap");
    cmd->add_option("--conformity-stride", cfg.conformity_check_stride,
                    "full conformity scan stride (0 = never)");
}

ExperimentConfig resolve_config(const CLI::App* cmd, ExperimentConfig cli_values,
                                const std::string& config_path) {
    if (config_path.empty()) return cli_values;
    std::ifstream is(config_path);
    if (!is) throw std::runtime_error("cannot open config file: " + config_path);
    ExperimentConfig cfg = conftree::bench::parse_config_file(is);
    // Command-line options override file values when explicitly given.
    ExperimentConfig defaults;
    auto pick = [&](auto member, const char* opt) {
        if (cmd->count(opt) > 0) cfg.*member = cli_values.*member;
    };
    pick(&ExperimentConfig::target, "--target");
    pick(&ExperimentConfig::domain, "--domain");
    pick(&ExperimentConfig::algorithm, "--alg");
    pick(&ExperimentConfig::stop, "--stop");
    pick(&ExperimentConfig::iterations, "--iters");
    pick(&ExperimentConfig::error_tol, "--error-tol");
    pick(&ExperimentConfig::quad_mode, "--quad-mode");
    pick(&ExperimentConfig::quad_depth, "--quad-depth");
    pick(&ExperimentConfig::quad_point_depth, "--quad-point-depth");
    pick(&ExperimentConfig::quad_tol, "--quad-tol");
    pick(&ExperimentConfig::checkpoint_stride, "--stride");
    pick(&ExperimentConfig::output_dir, "--out");
    pick(&ExperimentConfig::oracle_depth, "--oracle-depth");
    pick(&ExperimentConfig::oracle_state_cap, "--oracle-cap");
    pick(&ExperimentConfig::iteration_cap, "--iteration-cap");
    pick(&ExperimentConfig::conformity_check_stride, "--conformity-stride");
    (void)defaults;
    return cfg;
}

int do_run(const ExperimentConfig& cfg) { return conftree::bench::cmd_run(cfg); }

int do_certify(const ExperimentConfig& cfg) {
    auto outcome = conftree::bench::certify(cfg);
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    {
        std::ofstream os(fs::path(cfg.output_dir) / "sigma.csv");
        conftree::io::write_sigma_csv(outcome.table, os);
    }
    {
        std::ofstream os(fs::path(cfg.output_dir) / "certification.csv");
        conftree::io::write_certification_csv(outcome.report, os);
    }
    std::cout << "near-best certification: target " << cfg.target << ", depth "
              << cfg.oracle_depth << "\n";
    for (const auto& r : outcome.report.rows) {
        std::cout << "  N=" << r.N << "  Err=" << conftree::io::fmt17(r.err)
                  << "  bound=" << conftree::io::fmt17(r.bound) << " (n=" << r.best_n
                  << ")  ratio=" << conftree::io::fmt17(r.ratio)
                  << (r.pass ? "  pass" : "  FAIL") << "\n";
    }
    if (outcome.capped) {
        std::cout << "enumeration hit the state cap; coverage is partial\n";
        return 2;
    }
    std::cout << (outcome.report.all_pass ? "all bounds hold\n" : "certification FAILED\n");
    return outcome.report.all_pass ? 0 : 1;
}

int do_slope(const std::string& csv, double lo, double hi) {
    std::ifstream is(csv);
    if (!is) throw std::runtime_error("cannot open convergence csv: " + csv);
    const auto pts = conftree::io::read_convergence_csv(is);
    const double slope = conftree::bench::fit_slope(pts, lo, hi);
    std::cout << conftree::io::fmt17(slope) << "\n";
    return 0;
}

int do_dump_mesh(const ExperimentConfig& cfg, std::size_t iteration, const std::string& path) {
    conftree::bench::validate(cfg);
    conftree::nvb::NvbBackend backend(conftree::bench::domain_mesh(cfg));
    conftree::H1ErrorFunctional err(backend, conftree::make_target(cfg.target),
                                    conftree::bench::quad_settings(cfg));
    const auto marking = cfg.algorithm == "alg2" ? conftree::Marking::simple
                                                 : conftree::Marking::penalized;
    auto engine = conftree::make_engine(
        backend, [&err](conftree::CellId c) { return err(c); }, marking);
    const auto status = engine.run(conftree::StoppingRule::max_iterations(iteration),
                                   cfg.iteration_cap);
    if (engine.iteration() != iteration) {
        std::cerr << "run stopped after " << engine.iteration() << " iterations (status "
                  << conftree::bench::status_name(status) << "), iteration " << iteration
                  << " was never reached\n";
        return 1;
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open output: " + path);
    conftree::io::dump_mesh(backend, engine.tree(), os);
    std::ofstream ps(path + ".patches");
    conftree::io::dump_patches(engine.tree().patch_history(), ps);
    return 0;
}

int do_validate_quadrature() {
    const auto& rule = conftree::quad::shared_degree17_rule();
    const auto rep = conftree::quad::validate_rule(rule);
    std::cout << "degree-17 triangle rule: " << rule.nodes.size() << " nodes\n"
              << "  max relative monomial error (deg <= " << rep.degree_checked
              << "): " << conftree::io::fmt17(rep.max_rel_error) << " at x^" << rep.worst_i
              << " y^" << rep.worst_j << "\n"
              << "  weights positive: " << (rep.all_weights_positive ? "yes" : "NO") << "\n"
              << "  nodes interior:   " << (rep.all_nodes_interior ? "yes" : "NO") << "\n"
              << "  degree-18 control (x^18): "
              << conftree::io::fmt17(conftree::quad::monomial_rule_error(rule, 18, 0)) << "\n"
              << (rep.pass ? "PASS" : "FAIL") << "\n";
    return rep.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Near-best adaptive tree refinement on conforming meshes"};
    app.require_subcommand(1);

    ExperimentConfig cfg;
    std::string config_path;

    auto* run = app.add_subcommand("run", "run the greedy algorithms and export CSVs");
    add_config_options(run, cfg, config_path);

    auto* certify = app.add_subcommand("certify", "brute-force near-best certification");
    add_config_options(certify, cfg, config_path);

    auto* slope = app.add_subcommand("slope", "log-log slope of a convergence csv");
    std::string slope_csv;
    double slope_lo = 0.0, slope_hi = 1e300;
    slope->add_option("csv", slope_csv, "convergence csv (cards,err_sqrt)")->required();
    slope->add_option("--min-cards", slope_lo, "lower cardinality bound");
    slope->add_option("--max-cards", slope_hi, "upper cardinality bound");

    auto* dump = app.add_subcommand("dump-mesh", "dump the mesh at a given iteration");
    std::size_t dump_iteration = 0;
    std::string dump_path = "mesh.txt";
    add_config_options(dump, cfg, config_path);
    dump->add_option("--iteration", dump_iteration, "iteration to dump")->required();
    dump->add_option("--mesh-out", dump_path, "output file");

    auto* vq = app.add_subcommand("validate-quadrature", "check the degree-17 rule");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return do_run(resolve_config(run, cfg, config_path));
        if (certify->parsed()) return do_certify(resolve_config(certify, cfg, config_path));
        if (slope->parsed()) return do_slope(slope_csv, slope_lo, slope_hi);
        if (dump->parsed())
            return do_dump_mesh(resolve_config(dump, cfg, config_path), dump_iteration,
                                dump_path);
        if (vq->parsed()) return do_validate_quadrature();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
