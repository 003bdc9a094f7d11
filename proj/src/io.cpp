#include "nihigs/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace nihigs {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError(path + ": " + message);
}

double as_finite_number(const json& j, const std::string& path) {
    if (!j.is_number()) {
        fail(path, "expected a number");
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        fail(path, "must be finite");
    }
    return v;
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) {
        fail(path, "expected a non-empty array of rows");
    }
    const auto& first = j.at(0);
    if (!first.is_array() || first.empty()) {
        fail(path + "[0]", "expected a non-empty row array");
    }
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(first.size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j.at(static_cast<std::size_t>(r));
        const std::string row_path = path + "[" + std::to_string(r) + "]";
        if (!row.is_array()) {
            fail(row_path, "expected a row array");
        }
        if (static_cast<Eigen::Index>(row.size()) != cols) {
            fail(row_path, "has " + std::to_string(row.size()) + " entries, expected " +
                               std::to_string(cols));
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = as_finite_number(row.at(static_cast<std::size_t>(c)),
                                       row_path + "[" + std::to_string(c) + "]");
        }
    }
    return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path + ": cannot open file");
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (!j.is_object()) {
        throw ConfigError(path + ": expected a JSON object");
    }
    return j;
}

StateSpaceModel<double> parse_inline_model(const json& j, const std::string& ctx) {
    const Eigen::MatrixXd A = parse_matrix(j.at("A"), ctx + "A");
    const Eigen::MatrixXd B = parse_matrix(j.at("B"), ctx + "B");
    const Eigen::MatrixXd C = parse_matrix(j.at("C"), ctx + "C");
    try {
        return make_model(A, B, C);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(ctx + e.what());
    }
}

ContinuousModel<double> parse_continuous(const json& j, const std::string& ctx) {
    if (!j.is_object()) {
        fail(ctx, "expected an object with Ac, Bc, C");
    }
    for (const char* field : {"Ac", "Bc", "C"}) {
        if (!j.contains(field)) {
            fail(ctx + "." + field, "missing");
        }
    }
    const Eigen::MatrixXd Ac = parse_matrix(j.at("Ac"), ctx + ".Ac");
    const Eigen::MatrixXd Bc = parse_matrix(j.at("Bc"), ctx + ".Bc");
    const Eigen::MatrixXd C = parse_matrix(j.at("C"), ctx + ".C");
    try {
        return make_continuous_model(Ac, Bc, C);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(ctx + ": " + e.what());
    }
}

// %.17g: shortest text that still round-trips any double exactly.
std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

StateSpaceModel<double> RunConfig::require_discrete_model() const {
    if (model) {
        return *model;
    }
    if (continuous) {
        if (!h) {
            throw ConfigError("h: required to discretize a continuous model");
        }
        return zoh_discretize(*continuous, *h);
    }
    throw ConfigError("model: no model source (need A/B/C, model_path, or continuous)");
}

ContinuousModel<double> RunConfig::require_continuous_model() const {
    if (!continuous) {
        throw ConfigError("continuous: missing (Ac/Bc/C required)");
    }
    return *continuous;
}

NICertificate<double> RunConfig::require_certificate() const {
    if (!certificate_p) {
        throw ConfigError("certificate: missing (field P required)");
    }
    return NICertificate<double>(*certificate_p);
}

RunConfig load_config(const std::string& path) {
    const json j = read_json_file(path);
    RunConfig cfg;

    // A "continuous" block may legitimately accompany inline matrices (model
    // files written by the discretizer keep their provenance), so only two
    // discrete sources conflict.
    const bool has_inline = j.contains("A") || j.contains("B") || j.contains("C");
    const bool has_path = j.contains("model_path");
    if (has_inline && has_path) {
        fail(path, "more than one model source given (inline A/B/C and model_path)");
    }

    if (has_inline) {
        for (const char* field : {"A", "B", "C"}) {
            if (!j.contains(field)) {
                fail(path + ": " + field, "missing (inline models need A, B and C)");
            }
        }
        cfg.model = parse_inline_model(j, path + ": ");
    } else if (has_path) {
        cfg.model = load_model(j.at("model_path").get<std::string>());
    }
    if (j.contains("continuous")) {
        cfg.continuous = parse_continuous(j.at("continuous"), path + ": continuous");
    }

    if (j.contains("h")) {
        const double h = as_finite_number(j.at("h"), path + ": h");
        if (h <= 0) {
            fail(path + ": h", "must be > 0");
        }
        cfg.h = h;
    }

    if (j.contains("higs")) {
        const auto& hj = j.at("higs");
        if (!hj.is_object()) {
            fail(path + ": higs", "expected an object {omega_h, k_h, x0}");
        }
        const double omega = as_finite_number(hj.value("omega_h", json(0.0)),
                                              path + ": higs.omega_h");
        if (!hj.contains("k_h")) {
            fail(path + ": higs.k_h", "missing");
        }
        const double k_h = as_finite_number(hj.at("k_h"), path + ": higs.k_h");
        try {
            cfg.higs = HigsParams<double>(omega, k_h);
        } catch (const std::invalid_argument& e) {
            fail(path + ": higs", e.what());
        }
        if (hj.contains("x0")) {
            cfg.higs_x0 = as_finite_number(hj.at("x0"), path + ": higs.x0");
        }
    }

    if (j.contains("x0")) {
        const auto& xj = j.at("x0");
        if (!xj.is_array() || xj.empty()) {
            fail(path + ": x0", "expected a non-empty array");
        }
        Eigen::VectorXd x0(xj.size());
        for (std::size_t i = 0; i < xj.size(); ++i) {
            x0(static_cast<Eigen::Index>(i)) =
                as_finite_number(xj.at(i), path + ": x0[" + std::to_string(i) + "]");
        }
        cfg.x0 = x0;
    }

    if (j.contains("n_steps")) {
        if (!j.at("n_steps").is_number_integer()) {
            fail(path + ": n_steps", "expected an integer");
        }
        cfg.n_steps = j.at("n_steps").get<int>();
    }
    if (j.contains("tol")) {
        const double tol = as_finite_number(j.at("tol"), path + ": tol");
        if (tol <= 0) {
            fail(path + ": tol", "must be > 0");
        }
        cfg.tol = tol;
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_integer()) {
            fail(path + ": seed", "expected an integer");
        }
        cfg.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("margin")) {
        cfg.margin = as_finite_number(j.at("margin"), path + ": margin");
    }
    if (j.contains("eps")) {
        const double eps = as_finite_number(j.at("eps"), path + ": eps");
        if (eps <= 0) {
            fail(path + ": eps", "must be > 0");
        }
        cfg.eps = eps;
    }
    if (j.contains("max_iters")) {
        if (!j.at("max_iters").is_number_integer()) {
            fail(path + ": max_iters", "expected an integer");
        }
        const int iters = j.at("max_iters").get<int>();
        if (iters < 1) {
            fail(path + ": max_iters", "must be >= 1");
        }
        cfg.max_iters = iters;
    }

    if (j.contains("certificate") && j.contains("certificate_path")) {
        fail(path, "both certificate and certificate_path given");
    }
    json cert;
    std::string cert_ctx = path + ": certificate";
    if (j.contains("certificate")) {
        cert = j.at("certificate");
    } else if (j.contains("certificate_path")) {
        const auto cert_path = j.at("certificate_path").get<std::string>();
        cert = read_json_file(cert_path);
        cert_ctx = cert_path;
    }
    if (!cert.is_null()) {
        if (cert.contains("P")) {
            cfg.certificate_p = parse_matrix(cert.at("P"), cert_ctx + ".P");
        }
        if (cert.contains("X")) {
            cfg.certificate_x = parse_matrix(cert.at("X"), cert_ctx + ".X");
        }
        if (!cfg.certificate_p && !cfg.certificate_x) {
            fail(cert_ctx, "expected a field P or X");
        }
    }

    if (j.contains("out")) {
        cfg.out = j.at("out").get<std::string>();
    }
    if (j.contains("svg")) {
        cfg.svg = j.at("svg").get<std::string>();
    }
    return cfg;
}

LoadedCertificate load_certificate(const std::string& path) {
    const json j = read_json_file(path);
    LoadedCertificate cert;
    if (j.contains("P")) {
        cert.P = parse_matrix(j.at("P"), path + ": P");
    }
    if (j.contains("X")) {
        cert.X = parse_matrix(j.at("X"), path + ": X");
    }
    if (!cert.P && !cert.X) {
        throw ConfigError(path + ": expected a field P or X");
    }
    return cert;
}

StateSpaceModel<double> load_model(const std::string& path) {
    const json j = read_json_file(path);
    for (const char* field : {"A", "B", "C"}) {
        if (!j.contains(field)) {
            throw ConfigError(path + ": " + field + ": missing");
        }
    }
    return parse_inline_model(j, path + ": ");
}

void save_model(const std::string& path, const StateSpaceModel<double>& m,
                const ContinuousModel<double>* continuous, std::optional<double> h) {
    json j;
    j["A"] = matrix_to_json(m.A);
    j["B"] = matrix_to_json(m.B);
    j["C"] = matrix_to_json(m.C);
    if (continuous != nullptr) {
        j["continuous"] = {{"Ac", matrix_to_json(continuous->Ac)},
                           {"Bc", matrix_to_json(continuous->Bc)},
                           {"C", matrix_to_json(continuous->C)}};
    }
    if (h) {
        j["h"] = *h;
    }
    atomic_write(path, j.dump(2) + "\n");
}

void save_certificate(const std::string& path, const Eigen::MatrixXd& P,
                      const std::string& field) {
    json j;
    j[field] = matrix_to_json(P);
    atomic_write(path, j.dump(2) + "\n");
}

std::string trace_to_csv(const ClosedLoopTrace<double>& t) {
    std::ostringstream os;
    const Eigen::Index n = t.states.cols();
    os << "k";
    for (Eigen::Index i = 1; i <= n; ++i) {
        os << ",x" << i;
    }
    os << ",x_tilde,e,u,mode";
    if (t.has_w) {
        os << ",W";
    }
    os << "\n";
    for (Eigen::Index k = 0; k < t.steps(); ++k) {
        os << k;
        for (Eigen::Index i = 0; i < n; ++i) {
            os << "," << fmt17(t.states(k, i));
        }
        os << "," << fmt17(t.x_tilde(k)) << "," << fmt17(t.e(k)) << "," << fmt17(t.u(k))
           << "," << mode_char(t.mode[static_cast<std::size_t>(k)]);
        if (t.has_w) {
            os << "," << fmt17(t.w(k));
        }
        os << "\n";
    }
    return os.str();
}

void save_trace_csv(const std::string& path, const ClosedLoopTrace<double>& t) {
    atomic_write(path, trace_to_csv(t));
}

std::string certificate_report_to_text(const CertificateReport<double>& r) {
    std::ostringstream os;
    os << "lmi_residual      " << fmt17(r.lmi_residual) << (r.lmi_ok ? "  ok" : "  FAIL")
       << "\n"
       << "equality_residual " << fmt17(r.equality_residual)
       << (r.equality_ok ? "  ok" : "  FAIL") << "\n"
       << "pd_margin         " << fmt17(r.pd_margin) << (r.pd_ok ? "  ok" : "  FAIL")
       << "\n"
       << "tol               " << fmt17(r.tol) << "\n"
       << "verdict           " << (r.verdict ? "PASS" : "FAIL") << "\n";
    return os.str();
}

std::string design_report_to_text(const DesignReport<double>& r) {
    const auto line = [](const char* name, bool ok) {
        return std::string(name) + (ok ? "  ok" : "  FAIL") + "\n";
    };
    std::ostringstream os;
    os << "G(1)              " << fmt17(r.g1) << "\n"
       << line("condition_omega  ", r.condition_omega)
       << line("condition_gain   ", r.condition_gain)
       << line("minimal          ", r.minimal)
       << line("det(I-A) != 0    ", r.det_ima_ok)
       << line("certificate      ", r.certificate_ok)
       << line("lyapunov_pd      ", r.lyapunov_pd);
    if (r.gain_sign_warning) {
        os << "warning: G(1) <= 0; gain condition checked as k_h*G(1) < 1\n";
    }
    os << "verdict           " << (r.verdict ? "PASS" : "FAIL") << "\n";
    return os.str();
}

std::string analysis_to_text(const TraceAnalysis<double>& a) {
    std::ostringstream os;
    os << "converged         " << (a.converged ? "yes" : "no") << "\n"
       << "initial_norm      " << fmt17(a.initial_norm) << "\n"
       << "final_norm        " << fmt17(a.final_norm) << "\n"
       << "modes             I=" << a.modes_integrator << " G=" << a.modes_gain << "\n";
    if (a.w_monotone_from >= 0) {
        os << "W_monotone_from   " << a.w_monotone_from << "\n"
           << "max_W_increase    " << fmt17(a.max_w_increase) << "\n";
    }
    if (a.diverged) {
        os << "diverged          yes (trace truncated)\n";
    }
    return os.str();
}

std::string format_matrix(const Eigen::MatrixXd& m, const std::string& name) {
    std::ostringstream os;
    os << name << " =\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        os << "  ";
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            os << (c ? " " : "") << fmt17(m(r, c));
        }
        os << "\n";
    }
    return os.str();
}

void atomic_write(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (!target.parent_path().empty()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error(tmp.string() + ": cannot open for writing");
        }
        out << content;
        if (!out.flush()) {
            throw std::runtime_error(tmp.string() + ": write failed");
        }
    }
    fs::rename(tmp, target);
}

}  // namespace nihigs
