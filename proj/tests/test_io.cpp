#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nihigs/io.hpp"
#include "nihigs/mass_spring.hpp"
#include "nihigs/svg_plot.hpp"

using namespace nihigs;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;

    TempDir() {
        path = fs::temp_directory_path() /
               fs::path("nihigs_io_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("model files round-trip bit-identically") {
    TempDir dir;
    const auto cm = mass_spring_continuous<double>();
    const auto m = zoh_discretize(cm, mass_spring_period);

    const auto path = dir.file("model.json");
    save_model(path, m, &cm, mass_spring_period);
    const auto loaded = load_model(path);

    CHECK(std::memcmp(m.A.data(), loaded.A.data(), sizeof(double) * m.A.size()) == 0);
    CHECK(std::memcmp(m.B.data(), loaded.B.data(), sizeof(double) * m.B.size()) == 0);
    CHECK(std::memcmp(m.C.data(), loaded.C.data(), sizeof(double) * m.C.size()) == 0);

    // and again through the config reader
    const auto cfg = load_config(path);
    REQUIRE(cfg.model.has_value());
    CHECK(std::memcmp(m.A.data(), cfg.model->A.data(), sizeof(double) * m.A.size()) == 0);
}

TEST_CASE("config validation errors carry field paths") {
    TempDir dir;

    SUBCASE("no model source") {
        const auto path = dir.file("empty.json");
        write_file(path, "{}");
        const auto cfg = load_config(path);
        CHECK_THROWS_WITH_AS(cfg.require_discrete_model(),
                             doctest::Contains("model"), ConfigError);
    }
    SUBCASE("two discrete model sources") {
        const auto other = dir.file("other.json");
        write_file(other, R"({"A": [[0]], "B": [[1]], "C": [[1]]})");
        const auto path = dir.file("two.json");
        write_file(path, R"({"A": [[0]], "B": [[1]], "C": [[1]],
                             "model_path": ")" + other + R"("})");
        CHECK_THROWS_WITH_AS(load_config(path), doctest::Contains("model source"),
                             ConfigError);
    }
    SUBCASE("a continuous block beside inline matrices is provenance, not a conflict") {
        const auto path = dir.file("with_prov.json");
        write_file(path, R"({"A": [[0]], "B": [[1]], "C": [[1]],
                             "continuous": {"Ac": [[0]], "Bc": [[1]], "C": [[1]]}})");
        const auto cfg = load_config(path);
        CHECK(cfg.model.has_value());
        CHECK(cfg.continuous.has_value());
    }
    SUBCASE("ragged matrix row") {
        const auto path = dir.file("ragged.json");
        write_file(path, R"({"A": [[1, 0], [1]], "B": [[1], [0]], "C": [[1, 0]]})");
        CHECK_THROWS_WITH_AS(load_config(path), doctest::Contains("A[1]"), ConfigError);
    }
    SUBCASE("invalid sampling period") {
        const auto path = dir.file("h.json");
        write_file(path, R"({"continuous": {"Ac": [[0]], "Bc": [[1]], "C": [[1]]},
                             "h": -1})");
        CHECK_THROWS_WITH_AS(load_config(path), doctest::Contains("h"), ConfigError);
    }
    SUBCASE("invalid controller gain") {
        const auto path = dir.file("kh.json");
        write_file(path, R"({"A": [[0]], "B": [[1]], "C": [[1]],
                             "higs": {"omega_h": 0.1, "k_h": 0}})");
        CHECK_THROWS_WITH_AS(load_config(path), doctest::Contains("higs"), ConfigError);
    }
    SUBCASE("certificate without P or X") {
        const auto path = dir.file("cert.json");
        write_file(path, R"({"A": [[0]], "B": [[1]], "C": [[1]], "certificate": {}})");
        CHECK_THROWS_WITH_AS(load_config(path), doctest::Contains("P or X"), ConfigError);
    }
    SUBCASE("search options must be positive") {
        const auto path = dir.file("eps.json");
        write_file(path, R"({"A": [[0]], "B": [[1]], "C": [[1]], "eps": 0})");
        CHECK_THROWS_WITH_AS(load_config(path), doctest::Contains("eps"), ConfigError);
        const auto path2 = dir.file("iters.json");
        write_file(path2, R"({"A": [[0]], "B": [[1]], "C": [[1]], "max_iters": 0})");
        CHECK_THROWS_WITH_AS(load_config(path2), doctest::Contains("max_iters"),
                             ConfigError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_config(dir.file("nope.json")), ConfigError);
    }
}

TEST_CASE("certificate files") {
    TempDir dir;
    const MatrixXd P = mass_spring_storage<double>();
    const auto path = dir.file("cert.json");
    save_certificate(path, P);
    const auto loaded = load_certificate(path);
    REQUIRE(loaded.P.has_value());
    CHECK(std::memcmp(P.data(), loaded.P->data(), sizeof(double) * P.size()) == 0);
    CHECK_FALSE(loaded.X.has_value());
}

TEST_CASE("trace CSV format") {
    const auto m = make_model((MatrixXd(2, 2) << 0.5, 0.1, 0, 0.5).finished(),
                              (MatrixXd(2, 1) << 0, 1).finished(),
                              (MatrixXd(1, 2) << 1, 0).finished());
    const HigsParams<double> p(0.1, 0.4);
    const VectorXd x0 = (VectorXd(2) << 1.0 / 3.0, -2).finished();

    SUBCASE("header without Lyapunov column") {
        const auto t = simulate(m, p, x0, 0.0, 3);
        const auto csv = trace_to_csv(t);
        CHECK(csv.rfind("k,x1,x2,x_tilde,e,u,mode\n", 0) == 0);
    }
    SUBCASE("header with Lyapunov column, values round-trip") {
        const NICertificate<double> cert(MatrixXd::Identity(2, 2));
        const auto t = simulate(m, p, x0, 0.0, 3, &cert);
        const auto csv = trace_to_csv(t);
        std::istringstream is(csv);
        std::string header;
        std::getline(is, header);
        CHECK(header == "k,x1,x2,x_tilde,e,u,mode,W");

        std::string line;
        std::getline(is, line);  // k = 0
        // fields: k,x1,x2,x_tilde,e,u,mode,W
        std::vector<std::string> fields;
        std::stringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) fields.push_back(f);
        REQUIRE(fields.size() == 8);
        CHECK(fields[0] == "0");
        CHECK(std::stod(fields[1]) == x0(0));  // 17 digits round-trip 1/3 exactly
        CHECK((fields[6] == "I" || fields[6] == "G"));

        int rows = 1;
        while (std::getline(is, line) && !line.empty()) ++rows;
        CHECK(rows == 3);
    }
}

TEST_CASE("atomic_write leaves no temporary behind") {
    TempDir dir;
    const auto path = dir.file("out.txt");
    atomic_write(path, "payload");
    CHECK(read_file(path) == "payload");
    CHECK_FALSE(fs::exists(path + ".tmp"));
    atomic_write(path, "replaced");
    CHECK(read_file(path) == "replaced");
}

TEST_CASE("SVG chart contains one polyline per state series") {
    const auto m = zoh_discretize(mass_spring_continuous<double>(), mass_spring_period);
    const auto t = simulate(m, HigsParams<double>(0.1, 0.6), mass_spring_x0<double>(),
                            0.0, 50);
    const auto svg = trace_to_svg(t);
    CHECK(svg.find("<svg") != std::string::npos);
    std::size_t count = 0;
    for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos;
         pos = svg.find("<polyline", pos + 1)) {
        ++count;
    }
    CHECK(count == 5);  // four plant states plus the controller state
    CHECK(svg.find("x_tilde") != std::string::npos);
    CHECK(svg.find(">x1<") != std::string::npos);
}

TEST_CASE("report formatting carries verdicts") {
    const auto m = zoh_discretize(mass_spring_continuous<double>(), mass_spring_period);
    const NICertificate<double> cert(mass_spring_storage<double>());
    const auto text = certificate_report_to_text(check_ni_certificate(m, cert, 1e-8));
    CHECK(text.find("verdict           PASS") != std::string::npos);

    const auto design =
        design_report_to_text(validate_design(m, cert, HigsParams<double>(0.1, 0.7), 1e-8));
    CHECK(design.find("FAIL") != std::string::npos);
}
