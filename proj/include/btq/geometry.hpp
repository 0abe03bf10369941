#ifndef BTQ_GEOMETRY_HPP
#define BTQ_GEOMETRY_HPP

#include <complex>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace btq {

using Complex = std::complex<double>;

enum class ModelId { bargmann_plane, projective_line };

/// One of the two exactly solvable model geometries, fixed in a single chart:
///   bargmann_plane:   phi = |z|^2,        psi(x, yb) = x*yb,        H = 1
///   projective_line:  phi = log(1+|z|^2), psi(x, yb) = log(1+x*yb), H = (1+|z|^2)^-2
/// Conventions: omega = i dd̄ phi, volume density mu = 2 H against planar
/// Lebesgue measure, so the CP1 total volume is 2*pi.
class ModelGeometry {
public:
    static ModelGeometry bargmann();
    static ModelGeometry projective_line(double chart_bound = 10.0);
    static ModelGeometry from_id(const std::string& id); // "bargmann" | "cp1"

    ModelId id() const { return id_; }
    const std::string& name() const { return name_; }
    double chart_bound() const { return chart_bound_; }

    double potential(Complex z) const;
    Complex extension(Complex x, Complex y_conj) const;
    double metric_density(Complex z) const;  // H = dd̄ phi
    double volume_density(Complex z) const;  // mu = 2 H
    /// Geodesic distance for the metric induced by omega.
    double distance(Complex x, Complex y) const;

private:
    ModelGeometry(ModelId id, std::string name, double chart_bound)
        : id_(id), name_(std::move(name)), chart_bound_(chart_bound) {}
    ModelId id_;
    std::string name_;
    double chart_bound_;
};

struct PhaseDominationReport {
    double constant = 0.0; // largest C with Re psi - (phi(x)+phi(y))/2 <= -C|x-y|^2
    bool positive = false;
    std::vector<std::pair<Complex, Complex>> violations; // pairs with nonnegative phase gap
};

/// Fits the Gaussian domination constant of the polarized phase over sample
/// pairs. Diagonal pairs are vacuous and skipped.
PhaseDominationReport phase_domination_check(
    const ModelGeometry& geometry,
    std::span<const std::pair<Complex, Complex>> samples);

} // namespace btq

#endif
