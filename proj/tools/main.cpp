#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nihigs/io.hpp"
#include "nihigs/loop.hpp"
#include "nihigs/mass_spring.hpp"
#include "nihigs/svg_plot.hpp"

// Exit codes: 0 = pass, 1 = analysis negative, 2 = usage or parse error.

namespace {

using namespace nihigs;

struct GlobalOpts {
    std::string config;
    std::string out;
    std::optional<double> tol;
    std::optional<std::uint64_t> seed;
};

RunConfig need_config(const GlobalOpts& g) {
    if (g.config.empty()) {
        throw ConfigError("--config: required for this command");
    }
    return load_config(g.config);
}

void merge_cert_flag(RunConfig& cfg, const std::string& cert_path) {
    if (cert_path.empty()) {
        return;
    }
    const auto loaded = load_certificate(cert_path);
    cfg.certificate_p = loaded.P;
    cfg.certificate_x = loaded.X;
}

int cmd_zoh(const GlobalOpts& g, std::optional<double> h_flag) {
    RunConfig cfg = need_config(g);
    const auto cm = cfg.require_continuous_model();
    if (h_flag) {
        cfg.h = *h_flag;
    }
    if (!cfg.h) {
        throw ConfigError("h: required (config field h or --period)");
    }
    if (*cfg.h <= 0) {
        throw ConfigError("h: must be > 0");
    }
    const auto m = zoh_discretize(cm, *cfg.h);
    const std::string out = g.out.empty() ? "model.json" : g.out;
    save_model(out, m, &cm, cfg.h);
    std::cout << format_matrix(m.A, "A") << format_matrix(m.B, "B")
              << "written " << out << "\n";
    return 0;
}

int cmd_check_ni(const GlobalOpts& g, const std::string& cert_path, int empirical_trials,
                 int horizon) {
    RunConfig cfg = need_config(g);
    merge_cert_flag(cfg, cert_path);
    const auto m = cfg.require_discrete_model();
    const double tol = g.tol.value_or(cfg.tol.value_or(1e-9));

    if (!cfg.certificate_p && cfg.certificate_x) {
        const BilinearCertificate<double> cert(*cfg.certificate_x);
        const auto report = check_bilinear_certificate(m, cert, tol);
        std::cout << "bilinear certificate check\n" << certificate_report_to_text(report);
        return report.verdict ? 0 : 1;
    }

    const auto cert = cfg.require_certificate();
    const auto report = check_ni_certificate(m, cert, tol);
    std::cout << certificate_report_to_text(report);
    bool ok = report.verdict;

    if (empirical_trials > 0 && ok) {
        const std::uint64_t seed = g.seed.value_or(cfg.seed.value_or(0));
        const auto emp = empirical_ni_test(m, cert, empirical_trials, horizon, seed);
        std::cout << "empirical trials   " << empirical_trials << " x " << horizon
                  << " steps, worst slack " << emp.worst_slack
                  << (emp.pass ? "  ok" : "  FAIL") << "\n";
        ok = ok && emp.pass;
    }
    return ok ? 0 : 1;
}

int cmd_find_cert(const GlobalOpts& g, std::optional<double> eps_flag,
                  std::optional<int> iters_flag) {
    RunConfig cfg = need_config(g);
    const auto m = cfg.require_discrete_model();

    CertificateSearchOptions opts;
    opts.eps = eps_flag.value_or(cfg.eps.value_or(opts.eps));
    opts.max_iters = iters_flag.value_or(cfg.max_iters.value_or(opts.max_iters));
    opts.tol = g.tol.value_or(cfg.tol.value_or(opts.tol));

    const auto result = find_ni_certificate(m, opts);
    if (!result.found()) {
        std::cout << "infeasible: search exhausted after " << result.iterations
                  << " iterations (best residual " << result.best_residual
                  << "); this does not prove the system is not dissipative\n";
        return 1;
    }
    const std::string out = g.out.empty() ? "certificate.json" : g.out;
    save_certificate(out, result.certificate->P);
    const auto report = check_ni_certificate(m, *result.certificate, opts.tol);
    std::cout << "certificate found in " << result.iterations << " iterations\n"
              << certificate_report_to_text(report) << "written " << out << "\n";
    return report.verdict ? 0 : 1;
}

int cmd_design(const GlobalOpts& g, const std::string& cert_path, double margin) {
    RunConfig cfg = need_config(g);
    merge_cert_flag(cfg, cert_path);
    const auto m = cfg.require_discrete_model();

    HigsParams<double> params = cfg.higs ? *cfg.higs
                                         : design_higs(m, cfg.margin.value_or(margin));

    std::optional<NICertificate<double>> cert;
    if (cfg.certificate_p) {
        cert.emplace(*cfg.certificate_p);
    } else {
        CertificateSearchOptions opts;
        opts.tol = g.tol.value_or(1e-6);
        auto result = find_ni_certificate(m, opts);
        if (!result.found()) {
            std::cout << "no certificate available: search exhausted (best residual "
                      << result.best_residual << ")\n";
            return 1;
        }
        cert = std::move(result.certificate);
    }

    const double cert_tol = g.tol.value_or(cfg.tol.value_or(1e-6));
    const auto report = validate_design(m, *cert, params, cert_tol);
    std::cout << "omega_h           " << params.omega_h << "\n"
              << "k_h               " << params.k_h << "\n"
              << design_report_to_text(report);
    return report.verdict ? 0 : 1;
}

int cmd_simulate(const GlobalOpts& g, const std::string& cert_path,
                 const std::string& svg_flag) {
    RunConfig cfg = need_config(g);
    merge_cert_flag(cfg, cert_path);
    const auto m = cfg.require_discrete_model();
    if (!cfg.higs) {
        throw ConfigError("higs: missing (omega_h and k_h required to simulate)");
    }
    if (!cfg.n_steps) {
        throw ConfigError("n_steps: missing");
    }
    const Eigen::VectorXd x0 =
        cfg.x0.value_or(Eigen::VectorXd::Zero(m.n()).eval());

    std::optional<NICertificate<double>> cert;
    if (cfg.certificate_p) {
        cert.emplace(*cfg.certificate_p);
    }

    const auto trace = simulate(m, *cfg.higs, x0, cfg.higs_x0, *cfg.n_steps,
                                cert ? &*cert : nullptr);

    const std::string out =
        !g.out.empty() ? g.out : cfg.out.value_or(std::string("trace.csv"));
    save_trace_csv(out, trace);
    std::cout << "written " << out << "\n";

    const std::string svg = !svg_flag.empty() ? svg_flag : cfg.svg.value_or("");
    if (!svg.empty()) {
        save_trace_svg(svg, trace);
        std::cout << "written " << svg << "\n";
    }

    std::cout << analysis_to_text(analyze_trace(trace));
    if (trace.diverged) {
        std::cout << "divergence: non-finite state reached at step " << trace.steps()
                  << "\n";
        return 1;
    }
    return 0;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

int cmd_demo(const GlobalOpts& g, double omega_h, double k_h, int steps) {
    namespace fs = std::filesystem;
    const fs::path outdir = g.out.empty() ? fs::path(".") : fs::path(g.out);

    bool all_ok = true;
    const auto stage = [&](const char* name, bool ok, const std::string& detail) {
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name;
        if (!detail.empty()) {
            std::cout << " (" << detail << ")";
        }
        std::cout << "\n";
        all_ok = all_ok && ok;
    };

    // 1. sample the two-mass chain and compare with the closed-form reference
    const auto cm = mass_spring_continuous<double>();
    const auto m = zoh_discretize(cm, mass_spring_period);
    const auto ref = mass_spring_reference_discrete<double>();
    const double zoh_err = std::max((m.A - ref.A).cwiseAbs().maxCoeff(),
                                    (m.B - ref.B).cwiseAbs().maxCoeff());
    stage("discretization matches closed form", zoh_err <= 1e-9,
          "max entry error " + fmt(zoh_err));
    save_model((outdir / "demo_model.json").string(), m, &cm, mass_spring_period);

    // 2. DC value
    const double g1 = transfer_eval(m, 1.0);
    stage("DC value G(1) = 1.5", std::abs(g1 - 1.5) <= 1e-9, "G(1) = " + fmt(g1));

    // 3. storage certificate (scale resolved by computation)
    const Eigen::MatrixXd P = mass_spring_storage<double>();
    const double alpha = resolve_storage_scale(m, P);
    const NICertificate<double> cert((alpha * P).eval());
    const auto cert_report = check_ni_certificate(m, cert, 1e-8);
    stage("storage certificate valid", cert_report.verdict,
          "scale " + fmt(alpha) + ", equality residual " +
              fmt(cert_report.equality_residual));
    save_certificate((outdir / "demo_certificate.json").string(), cert.P);

    // 4. controller design gate
    const HigsParams<double> params(omega_h, k_h);
    const auto design = validate_design(m, cert, params, 1e-8);
    stage("design conditions", design.verdict,
          "k_h G(1) = " + fmt(params.k_h * design.g1));

    // 5. closed-loop simulation
    const auto trace =
        simulate(m, params, mass_spring_x0<double>(), 0.0, steps, &cert);
    const auto analysis = analyze_trace(trace);
    save_trace_csv((outdir / "demo_trace.csv").string(), trace);
    save_trace_svg((outdir / "demo_trace.svg").string(), trace);
    stage("trajectory converges", analysis.converged,
          "final/initial norm = " +
              fmt(analysis.final_norm / analysis.initial_norm) +
              (analysis.converged ? "" : "; threshold 1e-3 not reached"));

    // 6. Lyapunov decrease along the trace
    if (trace.has_w && trace.steps() >= 2) {
        const double w_tol = 1e-10 * std::max(1.0, std::abs(trace.w(1)));
        stage("Lyapunov value nonincreasing", analysis.max_w_increase <= w_tol,
              "max increase " + fmt(analysis.max_w_increase));
    }

    std::cout << "\nsummary: G(1) = " << g1 << ", storage scale = " << alpha
              << ", modes I/G = " << analysis.modes_integrator << "/"
              << analysis.modes_gain << ", final norm = " << analysis.final_norm
              << "\noutputs in " << outdir.string() << "\n";
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Digital control of negative imaginary systems with hybrid "
                 "integrator-gain controllers"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand name

    GlobalOpts g;
    app.add_option("--config", g.config, "JSON run configuration / model file");
    app.add_option("--out", g.out, "output path (file, or directory for demo)");
    double tol_value = 0;
    auto* tol_opt = app.add_option("--tol", tol_value, "residual tolerance");
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "seed for randomized checks");

    auto* zoh = app.add_subcommand("zoh", "discretize a continuous model (ZOH)");
    std::optional<double> h_flag;
    zoh->add_option("--period", h_flag, "sampling period override (config field h)");

    auto* check = app.add_subcommand("check-ni", "grade a certificate against a model");
    std::string check_cert;
    int empirical_trials = 0;
    int empirical_horizon = 50;
    check->add_option("--cert", check_cert, "certificate file (field P or X)");
    check->add_option("--empirical", empirical_trials,
                      "additionally run N random dissipation trials");
    check->add_option("--horizon", empirical_horizon, "steps per empirical trial");

    auto* find = app.add_subcommand("find-cert", "search for a storage certificate");
    std::optional<double> eps_flag;
    std::optional<int> iters_flag;
    find->add_option("--eps", eps_flag, "lower bound on the certificate spectrum");
    find->add_option("--max-iters", iters_flag, "subgradient iteration budget");

    auto* design = app.add_subcommand("design", "pick/validate controller constants");
    std::string design_cert;
    double margin = 0.9;
    design->add_option("--cert", design_cert, "certificate file");
    design->add_option("--margin", margin, "gain margin in (0,1)")->capture_default_str();

    auto* sim = app.add_subcommand("simulate", "run the closed loop, write a CSV trace");
    std::string sim_cert;
    std::string svg_flag;
    sim->add_option("--cert", sim_cert, "certificate file (adds the W column)");
    sim->add_option("--svg", svg_flag, "also write an SVG chart");

    auto* demo = app.add_subcommand("demo", "built-in mass-spring pipeline");
    double demo_omega = mass_spring_omega_h;
    double demo_kh = mass_spring_k_h;
    int demo_steps = mass_spring_demo_steps;
    demo->add_option("--omega-h", demo_omega, "integrator frequency")->capture_default_str();
    demo->add_option("--k-h", demo_kh, "gain value")->capture_default_str();
    demo->add_option("--steps", demo_steps, "simulation horizon")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (tol_opt->count() > 0) {
        if (!(tol_value > 0)) {
            std::cerr << "--tol: must be > 0\n";
            return 2;
        }
        g.tol = tol_value;
    }
    if (seed_opt->count() > 0) {
        g.seed = seed_value;
    }

    try {
        if (*zoh) return cmd_zoh(g, h_flag);
        if (*check) return cmd_check_ni(g, check_cert, empirical_trials, empirical_horizon);
        if (*find) return cmd_find_cert(g, eps_flag, iters_flag);
        if (*design) return cmd_design(g, design_cert, margin);
        if (*sim) return cmd_simulate(g, sim_cert, svg_flag);
        if (*demo) return cmd_demo(g, demo_omega, demo_kh, demo_steps);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
