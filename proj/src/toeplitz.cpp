#include "btq/toeplitz.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>

#include "btq/errors.hpp"

namespace btq {

namespace {

// Half-weighted normalized monomials u_k(r) = sqrt(w_r) r^k / ||z^k||, O(1)
// throughout, assembled in the log domain.
Eigen::MatrixXd monomial_table(const QuantumBasis& basis, const QuadratureRule& rule) {
    const int R = rule.radial_count();
    const int D = basis.dimension();
    Eigen::MatrixXd U(R, D);
    for (int i = 0; i < R; ++i) {
        const double logr = std::log(rule.radius(i));
        const double half_w = 0.5 * rule.log_radial_weight(i);
        for (int k = 0; k < D; ++k) {
            const double e = half_w + k * logr - 0.5 * basis.log_squared_norm(k);
            U(i, k) = e < -700.0 ? 0.0 : std::exp(e);
        }
    }
    return U;
}

} // namespace

ToeplitzMatrix assemble(const Symbol& symbol, const QuantumBasis& basis,
                        const QuadratureRule& rule) {
    if (!rule.certification().converged)
        throw QuadratureError("assemble: quadrature certification missing");
    const int R = rule.radial_count();
    const int A = rule.angular_count();
    const int D = basis.dimension();
    const double N = basis.level();

    // symbol values on the tensor grid, then angular Fourier bands per radius
    Eigen::FFT<double> fft;
    std::vector<std::vector<Complex>> hat(R);
    std::vector<Complex> samples(A), freq(A);
    for (int i = 0; i < R; ++i) {
        for (int a = 0; a < A; ++a) {
            const Complex v = symbol.expr.eval(std::polar(rule.radius(i), rule.angle(a)));
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                throw Error("assemble: symbol evaluated to NaN/inf at a quadrature node");
            samples[a] = v;
        }
        fft.fwd(freq, samples);
        hat[i] = freq;
    }

    // band m carries sum_a f_a e^{i m theta_a} = fwd[(A - m) mod A]
    const auto band = [&](int i, int m) {
        return hat[i][static_cast<std::size_t>(((A - m) % A + A) % A)];
    };

    double global_peak = 0.0;
    for (int i = 0; i < R; ++i)
        for (int a = 0; a < A; ++a) global_peak = std::max(global_peak, std::abs(hat[i][a]));
    const double drop = 1e-15 * global_peak;

    const Eigen::MatrixXd U = monomial_table(basis, rule);
    const double angular_w = rule.angular_weight();

    ToeplitzMatrix out;
    out.level = N;
    out.entries = Eigen::MatrixXcd::Zero(D, D);
    out.provenance = symbol.expr.valid() ? symbol.expr.print() : "<expr>";
    if (symbol.power != 0.0)
        out.provenance = "N^" + std::to_string(symbol.power) + "*(" + out.provenance + ")";
    out.hermitian_expected = symbol.expr.is_conjugation_symmetric();

    Eigen::VectorXcd Gm(R);
    for (int m = -(D - 1); m <= D - 1; ++m) {
        double peak = 0.0;
        for (int i = 0; i < R; ++i) peak = std::max(peak, std::abs(band(i, m)));
        if (m != 0 && peak <= drop) continue;
        for (int i = 0; i < R; ++i) Gm(i) = angular_w * band(i, m);
        // entries (j, j+m): conj(e_j) e_{j+m} picks e^{i m theta}
        const int jlo = std::max(0, -m);
        const int jhi = std::min(D, D - m);
        for (int j = jlo; j < jhi; ++j) {
            const int k = j + m;
            Complex acc(0.0);
            for (int i = 0; i < R; ++i) acc += U(i, j) * U(i, k) * Gm(i);
            out.entries(j, k) = acc;
        }
    }
    if (symbol.power != 0.0) out.entries *= std::pow(N, symbol.power);
    return out;
}

ToeplitzMatrix assemble_expr(const SymbolExpr& expr, const QuantumBasis& basis,
                             const QuadratureRule& rule) {
    Symbol s;
    s.expr = expr;
    return assemble(s, basis, rule);
}

ToeplitzMatrix identity_matrix(const QuantumBasis& basis) {
    ToeplitzMatrix out;
    out.level = basis.level();
    out.entries = Eigen::MatrixXcd::Identity(basis.dimension(), basis.dimension());
    out.provenance = "identity";
    out.hermitian_expected = true;
    return out;
}

namespace {
void require_compatible(const ToeplitzMatrix& A, const ToeplitzMatrix& B, const char* op) {
    if (A.level != B.level || A.dimension() != B.dimension())
        throw DimensionError(std::string(op) + ": mismatched level or dimension");
}
} // namespace

ToeplitzMatrix compose(const ToeplitzMatrix& A, const ToeplitzMatrix& B) {
    require_compatible(A, B, "compose");
    ToeplitzMatrix out;
    out.level = A.level;
    out.entries = A.entries * B.entries;
    out.provenance = "(" + A.provenance + ")o(" + B.provenance + ")";
    out.hermitian_expected = false;
    return out;
}

ToeplitzMatrix commutator(const ToeplitzMatrix& A, const ToeplitzMatrix& B) {
    require_compatible(A, B, "commutator");
    ToeplitzMatrix out;
    out.level = A.level;
    out.entries = A.entries * B.entries - B.entries * A.entries;
    out.provenance = "[" + A.provenance + "," + B.provenance + "]";
    out.hermitian_expected = false;
    return out;
}

ToeplitzMatrix add_scaled(const ToeplitzMatrix& A, Complex alpha, const ToeplitzMatrix& B) {
    require_compatible(A, B, "add_scaled");
    ToeplitzMatrix out;
    out.level = A.level;
    out.entries = A.entries + alpha * B.entries;
    out.provenance = A.provenance + "+(" + std::to_string(alpha.real()) + ")*" + B.provenance;
    out.hermitian_expected = A.hermitian_expected && B.hermitian_expected && alpha.imag() == 0.0;
    return out;
}

Complex trace(const ToeplitzMatrix& A) { return A.entries.trace(); }

double operator_norm(const Eigen::MatrixXcd& A) {
    const int n = static_cast<int>(A.cols());
    if (n == 0) return 0.0;
    Eigen::VectorXcd v(n);
    for (int k = 0; k < n; ++k) v(k) = Complex(1.0 + 0.25 * std::cos(0.7 * k), 0.0);
    v.normalize();
    double prev = 0.0;
    for (int iter = 0; iter < 3000; ++iter) {
        Eigen::VectorXcd w = A * v;
        const double sigma = w.norm();
        if (sigma == 0.0) return 0.0;
        v = A.adjoint() * w;
        const double nv = v.norm();
        if (nv == 0.0) return sigma;
        v /= nv;
        if (iter > 4 && std::abs(sigma - prev) <= 5e-13 * std::max(1.0, sigma)) return sigma;
        prev = sigma;
    }
    return prev;
}

Complex weighted_kernel_at(const ToeplitzMatrix& A, const QuantumBasis& basis,
                           Complex x, Complex y_conj) {
    const int D = basis.dimension();
    const double N = basis.level();
    const Complex y = std::conj(y_conj);
    const auto section_vector = [&](Complex p) {
        Eigen::VectorXcd v = Eigen::VectorXcd::Zero(D);
        const double mag = std::abs(p);
        const double base = -0.5 * N * basis.geometry().potential(p);
        if (mag == 0.0) {
            v(0) = std::exp(base - 0.5 * basis.log_squared_norm(0));
            return v;
        }
        const double logmag = std::log(mag);
        const double arg = std::arg(p);
        for (int k = 0; k < D; ++k) {
            const double e = base + k * logmag - 0.5 * basis.log_squared_norm(k);
            v(k) = e < -700.0 ? Complex(0.0) : std::polar(std::exp(e), k * arg);
        }
        return v;
    };
    const Eigen::VectorXcd vx = section_vector(x);
    const Eigen::VectorXcd vy = section_vector(y);
    const Eigen::VectorXcd w = A.entries * vy.conjugate();
    return (vx.array() * w.array()).sum();
}

Complex trace_by_kernel_integral(const ToeplitzMatrix& A, const QuantumBasis& basis,
                                 const QuadratureRule& rule) {
    Complex acc(0.0);
    const int D = basis.dimension();
    Eigen::VectorXcd v(D);
    for (int i = 0; i < rule.radial_count(); ++i) {
        const double r = rule.radius(i);
        const double logr = std::log(r);
        const double half_w = 0.5 * rule.log_radial_weight(i);
        for (int a = 0; a < rule.angular_count(); ++a) {
            const double th = rule.angle(a);
            for (int k = 0; k < D; ++k) {
                const double e = half_w + k * logr - 0.5 * basis.log_squared_norm(k);
                v(k) = e < -700.0 ? Complex(0.0) : std::polar(std::exp(e), k * th);
            }
            acc += rule.angular_weight() * v.dot(A.entries * v);
        }
    }
    return acc;
}

} // namespace btq
