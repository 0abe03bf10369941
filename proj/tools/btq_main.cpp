// btq: Toeplitz quantization laboratory on the Bargmann plane and CP1.
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "btq/calculus.hpp"
#include "btq/errors.hpp"
#include "btq/harness.hpp"
#include "btq/quantum.hpp"
#include "btq/toeplitz.hpp"

namespace {

using btq::Complex;

struct GlobalOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int jobs = 1;
    bool seed_set = false;
};

btq::SweepConfig load_base_config(const GlobalOpts& g) {
    btq::SweepConfig config;
    if (!g.config_path.empty()) {
        std::ifstream in(g.config_path);
        if (!in) throw btq::ConfigError("cannot open config file " + g.config_path);
        nlohmann::json j;
        in >> j;
        config = btq::SweepConfig::from_json(j);
    }
    if (g.seed_set) config.seed = g.seed;
    if (!g.out_dir.empty()) config.out_dir = g.out_dir;
    return config;
}

std::string report_path(const btq::SweepConfig& config, const std::string& explicit_path,
                        const char* stem, const char* ext) {
    if (!explicit_path.empty()) return explicit_path;
    const std::string dir = config.out_dir.empty() ? "." : config.out_dir;
    return dir + "/" + stem + ext;
}

void print_verdicts(const btq::ConvergenceReport& report) {
    for (const auto& f : report.fits) {
        std::cout << (f.pass ? "PASS " : "FAIL ") << f.metric;
        if (f.provenance.find("threshold") != std::string::npos)
            std::cout << " worst-vs-threshold " << f.predicted;
        else
            std::cout << " slope " << f.slope << " (predicted " << f.predicted
                      << " +- " << f.tolerance << ")";
        std::cout << '\n';
    }
    std::cout << "verdict: " << report.verdict << '\n';
}

int verdict_code(const btq::ConvergenceReport& report) {
    return report.verdict == "fail" ? 1 : 0;
}

void write_matrix_csv(const btq::ToeplitzMatrix& T, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw btq::Error("cannot open " + path);
    char buf[96];
    for (int j = 0; j < T.dimension(); ++j) {
        for (int k = 0; k < T.dimension(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.16e,%.16e", T.entries(j, k).real(),
                          T.entries(j, k).imag());
            out << buf << (k + 1 == T.dimension() ? "\n" : ",");
        }
    }
}

void write_matrix_binary(const btq::ToeplitzMatrix& T, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw btq::Error("cannot open " + path);
    out.write("TQMAT01\0", 8);
    const std::uint64_t D = static_cast<std::uint64_t>(T.dimension());
    out.write(reinterpret_cast<const char*>(&D), 8);
    for (int j = 0; j < T.dimension(); ++j) {
        for (int k = 0; k < T.dimension(); ++k) {
            const double re = T.entries(j, k).real(), im = T.entries(j, k).imag();
            out.write(reinterpret_cast<const char*>(&re), 8);
            out.write(reinterpret_cast<const char*>(&im), 8);
        }
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Toeplitz quantization laboratory (Bargmann plane and CP1)"};
    app.require_subcommand(1);

    GlobalOpts global;
    app.add_option("--config", global.config_path, "JSON config file");
    app.add_option("--out-dir", global.out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", global.seed, "sampling seed");
    app.add_option("--jobs", global.jobs, "worker count (runs are serial and deterministic)")
        ->check(CLI::PositiveNumber);

    // quantize ------------------------------------------------------------
    auto* quantize = app.add_subcommand("quantize", "assemble one Toeplitz matrix");
    std::string q_geometry = "bargmann", q_symbol, q_out, q_format = "csv";
    int q_N = 32;
    double q_support = 1.15;
    quantize->add_option("--geometry", q_geometry);
    quantize->add_option("--N", q_N)->check(CLI::PositiveNumber);
    quantize->add_option("--symbol", q_symbol)->required();
    quantize->add_option("--out", q_out)->required();
    quantize->add_option("--format", q_format)->check(CLI::IsMember({"csv", "bin"}));
    quantize->add_option("--support-radius", q_support);

    // compose ---------------------------------------------------------------
    auto* compose_cmd = app.add_subcommand("compose", "composition against the star expansion");
    std::string c_geometry = "bargmann", c_f, c_g, c_report;
    std::vector<int> c_N;
    int c_J = 1;
    double c_delta = 0.0;
    compose_cmd->add_option("--geometry", c_geometry);
    compose_cmd->add_option("--N-list", c_N)->delimiter(',');
    compose_cmd->add_option("--f", c_f)->required();
    compose_cmd->add_option("--g", c_g)->required();
    compose_cmd->add_option("--J", c_J);
    compose_cmd->add_option("--delta", c_delta);
    compose_cmd->add_option("--report", c_report);

    // sweep -------------------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "run the experiment described by --config");

    // funcalc -------------------------------------------------------------------
    auto* funcalc = app.add_subcommand("funcalc", "functional calculus sweep");
    std::string fc_geometry = "cp1", fc_symbol, fc_chi = "2.0,1.0,bump", fc_report;
    std::vector<int> fc_N;
    double fc_floor = 1.0;
    int fc_M = 4;
    funcalc->add_option("--geometry", fc_geometry);
    funcalc->add_option("--N-list", fc_N)->delimiter(',');
    funcalc->add_option("--symbol", fc_symbol)->required();
    funcalc->add_option("--chi", fc_chi, "center,width,shape");
    funcalc->add_option("--floor", fc_floor, "strip floor scale (floor = scale*N^-2)");
    funcalc->add_option("--M", fc_M, "extension decay order");
    funcalc->add_option("--report", fc_report);

    // trace ----------------------------------------------------------------------
    auto* trace_cmd = app.add_subcommand("trace", "trace formula sweep");
    std::string t_geometry = "cp1", t_symbol, t_report;
    std::vector<int> t_N;
    trace_cmd->add_option("--geometry", t_geometry);
    trace_cmd->add_option("--N-list", t_N)->delimiter(',');
    trace_cmd->add_option("--symbol", t_symbol)->required();
    trace_cmd->add_option("--report", t_report);

    // parametrix -------------------------------------------------------------------
    auto* parametrix = app.add_subcommand("parametrix", "approximate inverse sweep");
    std::string p_geometry = "bargmann", p_symbol, p_z = "0,0", p_report;
    std::vector<int> p_N;
    int p_J = 1;
    double p_delta = 0.0;
    parametrix->add_option("--geometry", p_geometry);
    parametrix->add_option("--symbol", p_symbol)->required();
    parametrix->add_option("--z", p_z, "re,im");
    parametrix->add_option("--J", p_J);
    parametrix->add_option("--delta", p_delta);
    parametrix->add_option("--N-list", p_N)->delimiter(',');
    parametrix->add_option("--report", p_report);

    // kernel ------------------------------------------------------------------------
    auto* kernel = app.add_subcommand("kernel", "weighted kernel values as CSV");
    std::string k_geometry = "bargmann", k_symbol = "1", k_out;
    int k_N = 32, k_pairs = 12;
    double k_support = 1.15;
    kernel->add_option("--geometry", k_geometry);
    kernel->add_option("--N", k_N)->check(CLI::PositiveNumber);
    kernel->add_option("--symbol", k_symbol);
    kernel->add_option("--pairs", k_pairs, "number of seeded sample pairs");
    kernel->add_option("--support-radius", k_support);
    kernel->add_option("--out", k_out, "CSV path (stdout when omitted)");

    // check-symbols --------------------------------------------------------------------
    auto* checksym = app.add_subcommand("check-symbols", "order-function and class certificates");
    std::string s_geometry = "bargmann", s_f, s_report;
    std::vector<int> s_N;
    double s_delta = 0.25;
    checksym->add_option("--geometry", s_geometry);
    checksym->add_option("--f", s_f)->required();
    checksym->add_option("--delta", s_delta);
    checksym->add_option("--N-list", s_N)->delimiter(',');
    checksym->add_option("--report", s_report);

    try {
        app.parse(argc, argv);
        global.seed_set = seed_opt->count() > 0;
        btq::SweepConfig config = load_base_config(global);

        if (*quantize) {
            config.geometry_id = q_geometry;
            const auto geometry = btq::ModelGeometry::from_id(q_geometry);
            const auto expr = btq::parse_symbol(q_symbol);
            double R = q_support;
            if (std::isfinite(expr.support_radius()))
                R = std::max(R, expr.support_radius() + 0.15);
            const auto basis = btq::QuantumBasis::build(geometry, q_N, R);
            const auto rule = btq::QuadratureRule::build(basis);
            const auto T = btq::assemble_expr(expr, basis, rule);
            if (q_format == "csv")
                write_matrix_csv(T, q_out);
            else
                write_matrix_binary(T, q_out);
            std::cout << "wrote " << q_out << " (D = " << T.dimension() << ")\n";
            return 0;
        }

        if (*sweep) {
            if (global.config_path.empty())
                throw btq::ConfigError("sweep requires --config");
            const auto report = btq::run_experiment(config);
            btq::emit_report(report, report_path(config, "", "report", ".csv"),
                             report_path(config, "", "report", ".json"));
            print_verdicts(report);
            return verdict_code(report);
        }

        if (*compose_cmd) {
            config.experiment = "composition";
            config.geometry_id = c_geometry;
            if (!c_N.empty()) config.N_list = c_N;
            config.f_text = c_f;
            config.g_text = c_g;
            config.J = c_J;
            config.delta = c_delta;
            const auto report = btq::run_experiment(config);
            nlohmann::json out;
            out["per_N"] = nlohmann::json::array();
            for (const auto& row : report.rows) {
                if (row.metric != "composition_err") continue;
                double normalized = 0.0;
                for (const auto& r2 : report.rows)
                    if (r2.metric == "composition_err_normalized" && r2.N == row.N)
                        normalized = r2.value;
                out["per_N"].push_back(
                    {{"N", int(row.N)}, {"err_norm", row.value}, {"normalized_err", normalized}});
            }
            out["fitted_slope"] = report.fits.at(0).slope;
            out["predicted_slope"] = report.fits.at(0).predicted;
            out["pass"] = report.fits.at(0).pass;
            std::ofstream(report_path(config, c_report, "compose", ".json"))
                << out.dump(2) << '\n';
            print_verdicts(report);
            return verdict_code(report);
        }

        if (*funcalc) {
            config.experiment = "funcalc";
            config.geometry_id = fc_geometry;
            if (!fc_N.empty()) config.N_list = fc_N;
            config.f_text = fc_symbol;
            config.floor_scale = fc_floor;
            config.M_target = fc_M;
            {
                std::stringstream ss(fc_chi);
                std::string part;
                std::getline(ss, part, ',');
                config.chi.center = std::stod(part);
                std::getline(ss, part, ',');
                config.chi.width = std::stod(part);
                if (std::getline(ss, part, ',')) config.chi.shape = part;
            }
            const auto report = btq::run_experiment(config);
            std::ofstream(report_path(config, fc_report, "funcalc", ".json"))
                << btq::report_to_json(report).dump(2) << '\n';
            print_verdicts(report);
            return verdict_code(report);
        }

        if (*trace_cmd) {
            config.experiment = "trace";
            config.geometry_id = t_geometry;
            if (!t_N.empty()) config.N_list = t_N;
            config.f_text = t_symbol;
            const auto report = btq::run_experiment(config);
            std::ofstream(report_path(config, t_report, "trace", ".json"))
                << btq::report_to_json(report).dump(2) << '\n';
            print_verdicts(report);
            return verdict_code(report);
        }

        if (*parametrix) {
            config.experiment = "parametrix";
            config.geometry_id = p_geometry;
            if (!p_N.empty()) config.N_list = p_N;
            config.f_text = p_symbol;
            config.J = p_J;
            config.delta = p_delta;
            {
                std::stringstream ss(p_z);
                std::string part;
                std::getline(ss, part, ',');
                config.z_re = std::stod(part);
                if (std::getline(ss, part, ',')) config.z_im = std::stod(part);
            }
            const auto report = btq::run_experiment(config);
            std::ofstream(report_path(config, p_report, "parametrix", ".json"))
                << btq::report_to_json(report).dump(2) << '\n';
            print_verdicts(report);
            return verdict_code(report);
        }

        if (*kernel) {
            const auto geometry = btq::ModelGeometry::from_id(k_geometry);
            const auto expr = btq::parse_symbol(k_symbol);
            double R = k_support;
            if (std::isfinite(expr.support_radius()))
                R = std::max(R, expr.support_radius() + 0.15);
            const auto basis = btq::QuantumBasis::build(geometry, k_N, R);
            const auto rule = btq::QuadratureRule::build(basis);
            const auto T = btq::assemble_expr(expr, basis, rule);
            std::mt19937_64 rng(config.seed);
            std::uniform_real_distribution<double> uangle(0.0, 2.0 * M_PI);
            std::uniform_real_distribution<double> uradius(0.0, 0.8);
            std::ostream* out = &std::cout;
            std::ofstream file;
            if (!k_out.empty()) {
                file.open(k_out, std::ios::binary);
                if (!file) throw btq::Error("cannot open " + k_out);
                out = &file;
            }
            *out << "x_re,x_im,y_re,y_im,value\n";
            char buf[160];
            for (int s = 0; s < k_pairs; ++s) {
                const Complex x = std::polar(uradius(rng), uangle(rng));
                const Complex y = std::polar(uradius(rng), uangle(rng));
                if (!basis.truncation_tail_ok(x, std::conj(y)))
                    std::cerr << "warning: truncation tail at pair " << s << '\n';
                const Complex v = btq::weighted_kernel_at(T, basis, x, std::conj(y));
                std::snprintf(buf, sizeof(buf), "%.16e,%.16e,%.16e,%.16e,%.16e\n", x.real(),
                              x.imag(), y.real(), y.imag(), std::abs(v));
                *out << buf;
            }
            return 0;
        }

        if (*checksym) {
            config.experiment = "symbol-class";
            config.geometry_id = s_geometry;
            if (!s_N.empty()) config.N_list = s_N;
            config.f_text = s_f;
            config.delta = s_delta;
            const auto report = btq::run_experiment(config);
            nlohmann::json cert;
            for (const auto& row : report.rows) {
                if (row.metric == "order_function_M0") cert["M0"] = int(row.value);
                if (row.metric == "order_function_C") cert["C"] = row.value;
                if (row.metric.rfind("class_C_", 0) == 0)
                    cert["per_alpha"][row.metric.substr(8)] = row.value;
            }
            cert["certified"] = report.verdict == "pass";
            std::ofstream(report_path(config, s_report, "symbol_certificate", ".json"))
                << cert.dump(2) << '\n';
            print_verdicts(report);
            return verdict_code(report);
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const btq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const btq::ParseError& e) {
        std::cerr << "symbol parse error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
