#ifndef BTQ_TOEPLITZ_HPP
#define BTQ_TOEPLITZ_HPP

#include <Eigen/Dense>
#include <string>

#include "btq/quantum.hpp"
#include "btq/symbols.hpp"

namespace btq {

/// Dense Toeplitz operator matrix in the orthonormal monomial basis.
struct ToeplitzMatrix {
    double level = 0.0; // N
    Eigen::MatrixXcd entries;
    std::string provenance;
    bool hermitian_expected = false;

    int dimension() const { return static_cast<int>(entries.rows()); }
};

/// Gram-against-weight assembly: entry (j,k) = <f e_k, e_j> through the
/// certified rule. The angular direction is handled by an exact uniform-angle
/// DFT, so entries only receive the Fourier bands the symbol actually
/// carries; radial symbols come out diagonal by construction.
ToeplitzMatrix assemble(const Symbol& symbol, const QuantumBasis& basis,
                        const QuadratureRule& rule);
ToeplitzMatrix assemble_expr(const SymbolExpr& expr, const QuantumBasis& basis,
                             const QuadratureRule& rule);

ToeplitzMatrix identity_matrix(const QuantumBasis& basis);

ToeplitzMatrix compose(const ToeplitzMatrix& A, const ToeplitzMatrix& B);
ToeplitzMatrix commutator(const ToeplitzMatrix& A, const ToeplitzMatrix& B);
/// A + alpha * B.
ToeplitzMatrix add_scaled(const ToeplitzMatrix& A, Complex alpha, const ToeplitzMatrix& B);

Complex trace(const ToeplitzMatrix& A);

/// Largest singular value (power iteration on A^H A, deterministic start).
double operator_norm(const Eigen::MatrixXcd& A);
inline double operator_norm(const ToeplitzMatrix& A) { return operator_norm(A.entries); }

/// e^{-(N/2)(phi(x)+phi(y))} sum_jk e_j(x) A_jk conj(e_k(y)).
Complex weighted_kernel_at(const ToeplitzMatrix& A, const QuantumBasis& basis,
                           Complex x, Complex y_conj);

/// Trace recomputed as the quadrature integral of the diagonal kernel
/// against e^{-N phi} mu. Full node sweep; intended as a spot-check oracle
/// at small N.
Complex trace_by_kernel_integral(const ToeplitzMatrix& A, const QuantumBasis& basis,
                                 const QuadratureRule& rule);

/// Row/column count kept by Bargmann entrywise assertions (the top rows hold
/// the truncation error).
inline int corner_limit(int dimension) { return (dimension * 9) / 10; }

} // namespace btq

#endif
