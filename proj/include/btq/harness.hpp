#ifndef BTQ_HARNESS_HPP
#define BTQ_HARNESS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace btq {

struct ChiSpec {
    double center = 2.0;
    double width = 1.0;
    std::string shape = "bump"; // bump | plateau
};

/// One experiment run: geometry, N sweep, symbols, class parameters,
/// tolerances and seed. Round-trips losslessly through JSON.
struct SweepConfig {
    std::string experiment; // composition|commutator|trace|funcalc|parametrix|kernel|symbol-class
    std::string geometry_id = "bargmann";
    std::vector<int> N_list = {32, 48, 64, 96, 128, 192, 256};
    std::string f_text;
    std::string g_text;
    ChiSpec chi;
    double delta = 0.0;
    int J = 1;
    double z_re = 0.0, z_im = 0.0; // parametrix spectral point
    double floor_scale = 1.0;      // strip floor = floor_scale * N^{-2}
    int hs_N_cap = 72;             // largest N for the resolvent-integral route
    double support_radius = 1.15;  // Bargmann truncation radius for unbounded symbols
    double slope_tolerance = 0.0;  // 0 -> per-experiment default
    int M_target = 4;              // extension decay order
    std::uint64_t seed = 0;
    std::string out_dir;

    static SweepConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
};

struct FitResult {
    double slope = 0.0;
    double stderr_ = 0.0;
    bool floored = false;
    int points = 0;
};

/// Least-squares slope of log(value) against log(N). Values at or below
/// 1e-13 truncate the fit to the prefix above the floor and set the flag.
FitResult fit_rate(std::span<const std::pair<double, double>> rows);

struct ReportRow {
    std::string metric;
    double N = 0.0;
    double value = 0.0;
};

struct ReportFit {
    std::string metric;
    double slope = 0.0;
    double stderr_ = 0.0;
    double predicted = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    bool floored = false;
    std::string provenance; // where the predicted exponent comes from
};

struct ConvergenceReport {
    nlohmann::json config_echo;
    std::vector<ReportRow> rows;
    std::vector<ReportFit> fits;
    std::string verdict; // pass | fail | no-op
};

ConvergenceReport run_experiment(const SweepConfig& config);

/// CSV (metric,N,value; 17 significant digits) and JSON
/// {config_echo, rows, fits, verdict}; byte-identical across reruns.
void emit_report(const ConvergenceReport& report, const std::string& csv_path,
                 const std::string& json_path);

nlohmann::json report_to_json(const ConvergenceReport& report);

} // namespace btq

#endif
