#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "nihigs/higs.hpp"
#include "nihigs/loop.hpp"
#include "nihigs/lti.hpp"
#include "nihigs/ni.hpp"

// File formats. One structured format repo-wide (JSON):
//   model file:        { "A": [[..]], "B": [[..]], "C": [[..]],
//                        optional "continuous": {"Ac","Bc","C"}, optional "h" }
//   certificate file:  { "P": [[..]] }  or  { "X": [[..]] }
//   run config:        model source (inline "A"/"B"/"C", or "model_path", or
//                      "continuous" + "h") plus "higs", "x0", "n_steps", ...
// Parse errors carry the offending field path. All numeric output round-trips
// doubles exactly.

namespace nihigs {

/// Configuration error with a field path, mapped to exit code 2 by the CLI.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct RunConfig {
    std::optional<StateSpaceModel<double>> model;
    std::optional<ContinuousModel<double>> continuous;
    std::optional<double> h;

    std::optional<HigsParams<double>> higs;
    double higs_x0 = 0.0;

    std::optional<Eigen::VectorXd> x0;
    std::optional<int> n_steps;
    std::optional<double> tol;
    std::optional<std::uint64_t> seed;
    std::optional<double> margin;
    std::optional<double> eps;
    std::optional<int> max_iters;

    std::optional<Eigen::MatrixXd> certificate_p;
    std::optional<Eigen::MatrixXd> certificate_x;

    std::optional<std::string> out;
    std::optional<std::string> svg;

    /// Discrete model, discretizing the continuous one when necessary.
    StateSpaceModel<double> require_discrete_model() const;
    ContinuousModel<double> require_continuous_model() const;
    NICertificate<double> require_certificate() const;
};

RunConfig load_config(const std::string& path);

struct LoadedCertificate {
    std::optional<Eigen::MatrixXd> P;
    std::optional<Eigen::MatrixXd> X;
};

LoadedCertificate load_certificate(const std::string& path);

StateSpaceModel<double> load_model(const std::string& path);
void save_model(const std::string& path, const StateSpaceModel<double>& m,
                const ContinuousModel<double>* continuous = nullptr,
                std::optional<double> h = std::nullopt);

void save_certificate(const std::string& path, const Eigen::MatrixXd& P,
                      const std::string& field = "P");

/// CSV with header  k,x1,...,xn,x_tilde,e,u,mode,W  (W only when the trace
/// carries Lyapunov values); floats at 17 significant digits, mode as I/G.
std::string trace_to_csv(const ClosedLoopTrace<double>& t);
void save_trace_csv(const std::string& path, const ClosedLoopTrace<double>& t);

std::string certificate_report_to_text(const CertificateReport<double>& r);
std::string design_report_to_text(const DesignReport<double>& r);
std::string analysis_to_text(const TraceAnalysis<double>& a);

std::string format_matrix(const Eigen::MatrixXd& m, const std::string& name);

/// Writes via a temporary file in the same directory followed by a rename.
void atomic_write(const std::string& path, const std::string& content);

}  // namespace nihigs
