#include "btq/geometry.hpp"

#include <cmath>
#include <limits>

#include "btq/errors.hpp"

namespace btq {

ModelGeometry ModelGeometry::bargmann() {
    return ModelGeometry(ModelId::bargmann_plane, "bargmann",
                         std::numeric_limits<double>::infinity());
}

ModelGeometry ModelGeometry::projective_line(double chart_bound) {
    return ModelGeometry(ModelId::projective_line, "cp1", chart_bound);
}

ModelGeometry ModelGeometry::from_id(const std::string& id) {
    if (id == "bargmann") return bargmann();
    if (id == "cp1") return projective_line();
    throw ConfigError("unknown geometry id: " + id + " (expected bargmann|cp1)");
}

double ModelGeometry::potential(Complex z) const {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw ChartError("potential: non-finite argument");
    const double r2 = std::norm(z);
    switch (id_) {
        case ModelId::bargmann_plane:
            return r2;
        case ModelId::projective_line:
            if (std::abs(z) > chart_bound_)
                throw ChartError("potential: |z| exceeds chart bound, switch to antipodal chart");
            return std::log1p(r2);
    }
    return 0.0;
}

Complex ModelGeometry::extension(Complex x, Complex y_conj) const {
    switch (id_) {
        case ModelId::bargmann_plane:
            return x * y_conj;
        case ModelId::projective_line: {
            if (std::abs(x) > chart_bound_ || std::abs(y_conj) > chart_bound_)
                throw ChartError("extension: argument exceeds chart bound");
            const Complex w = 1.0 + x * y_conj;
            if (w.real() <= 0.0 && std::abs(w.imag()) < 1e-14)
                throw BranchError("extension: non-polarizable pair, 1 + x*conj(y) on the cut");
            return std::log(w);
        }
    }
    return {};
}

double ModelGeometry::metric_density(Complex z) const {
    switch (id_) {
        case ModelId::bargmann_plane:
            return 1.0;
        case ModelId::projective_line: {
            if (std::abs(z) > chart_bound_)
                throw ChartError("metric_density: |z| exceeds chart bound");
            const double s = 1.0 + std::norm(z);
            return 1.0 / (s * s);
        }
    }
    return 0.0;
}

double ModelGeometry::volume_density(Complex z) const { return 2.0 * metric_density(z); }

double ModelGeometry::distance(Complex x, Complex y) const {
    // ds^2 = 2 H |dz|^2 for the metric induced by omega.
    switch (id_) {
        case ModelId::bargmann_plane:
            return std::sqrt(2.0) * std::abs(x - y);
        case ModelId::projective_line: {
            const double chord = std::abs(x - y);
            const double denom = std::abs(1.0 + x * std::conj(y));
            if (denom == 0.0) return std::sqrt(2.0) * (M_PI / 2.0); // antipodal
            return std::sqrt(2.0) * std::atan(chord / denom);
        }
    }
    return 0.0;
}

PhaseDominationReport phase_domination_check(
    const ModelGeometry& geometry,
    std::span<const std::pair<Complex, Complex>> samples) {
    PhaseDominationReport report;
    double best = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& [x, y] : samples) {
        const double sep2 = std::norm(x - y);
        if (sep2 < 1e-24) continue; // diagonal pair, vacuous
        const double gap = geometry.extension(x, std::conj(y)).real() -
                           0.5 * (geometry.potential(x) + geometry.potential(y));
        if (gap >= 0.0) {
            report.violations.emplace_back(x, y);
            continue;
        }
        best = std::min(best, -gap / sep2);
        any = true;
    }
    report.constant = any ? best : 0.0;
    report.positive = any && report.violations.empty() && report.constant > 0.0;
    return report;
}

} // namespace btq
