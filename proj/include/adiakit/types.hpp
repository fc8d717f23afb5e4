#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace adiakit {

using Complex = std::complex<double>;
using Operator = Eigen::MatrixXcd;   // d x d Hilbert-space operator
using Superop = Eigen::MatrixXcd;    // d^2 x d^2 matrix acting on vectorized operators
using OpVector = Eigen::VectorXcd;   // vectorized operator, length d^2

// Default tolerances. Each is overridable per call.
inline constexpr double kHermitianTol = 1e-12;      // relative, max-entry scale
inline constexpr double kZeroEigTol = 1e-10;        // relative to spectral radius
inline constexpr double kClusterTol = 1e-8;         // relative to spectral radius
inline constexpr double kDefectiveTol = 1e-8;       // eigendecomposition residual, relative
inline constexpr double kTraceTol = 1e-10;
inline constexpr double kPsdTol = 1e-10;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define ADIAKIT_ERROR_TYPE(Name)                     \
    class Name : public Error {                      \
    public:                                          \
        using Error::Error;                          \
    }

ADIAKIT_ERROR_TYPE(NonHermitianInput);
ADIAKIT_ERROR_TYPE(DimensionMismatch);
ADIAKIT_ERROR_TYPE(DefectiveMatrix);
ADIAKIT_ERROR_TYPE(EmptyKernel);
ADIAKIT_ERROR_TYPE(SingularShift);
ADIAKIT_ERROR_TYPE(GapTooSmall);
ADIAKIT_ERROR_TYPE(OrderTooHigh);
ADIAKIT_ERROR_TYPE(NonConvergence);
ADIAKIT_ERROR_TYPE(ProjectorFailure);
ADIAKIT_ERROR_TYPE(DegenerateCase);
ADIAKIT_ERROR_TYPE(QuadratureFailure);
ADIAKIT_ERROR_TYPE(DegenerateHamiltonian);
ADIAKIT_ERROR_TYPE(SingularGibbs);
ADIAKIT_ERROR_TYPE(DegenerateKernel);
ADIAKIT_ERROR_TYPE(InsufficientData);
ADIAKIT_ERROR_TYPE(NonAntiHermitianK);
ADIAKIT_ERROR_TYPE(ConfigError);

#undef ADIAKIT_ERROR_TYPE

inline double max_abs(const Eigen::MatrixXcd& a) {
    return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline double hermiticity_defect(const Operator& a) {
    return max_abs(a - a.adjoint());
}

inline bool is_hermitian(const Operator& a, double tol = kHermitianTol) {
    const double scale = std::max(max_abs(a), 1e-300);
    return hermiticity_defect(a) <= tol * scale;
}

inline void require_hermitian(const Operator& a, const char* what, double tol = kHermitianTol) {
    if (!a.allFinite()) throw NonHermitianInput(std::string(what) + ": non-finite entries");
    if (!is_hermitian(a, tol)) {
        throw NonHermitianInput(std::string(what) + ": hermiticity defect " +
                                std::to_string(hermiticity_defect(a)) + " exceeds tolerance");
    }
}

// Trace norm (sum of singular values). For a Hermitian argument this equals
// the sum of absolute eigenvalues.
inline double trace_norm(const Operator& a) {
    if (is_hermitian(a, 1e-10)) {
        Eigen::SelfAdjointEigenSolver<Operator> es((a + a.adjoint()) / 2.0);
        return es.eigenvalues().cwiseAbs().sum();
    }
    return a.jacobiSvd().singularValues().sum();
}

inline const Operator& sigma_x() {
    static const Operator m = (Operator(2, 2) << 0, 1, 1, 0).finished();
    return m;
}

inline const Operator& sigma_y() {
    static const Operator m =
        (Operator(2, 2) << 0, Complex(0, -1), Complex(0, 1), 0).finished();
    return m;
}

inline const Operator& sigma_z() {
    static const Operator m = (Operator(2, 2) << 1, 0, 0, -1).finished();
    return m;
}

// Lowering operator |1><0| in the sigma_z basis, sigma_minus = (sigma_x - i sigma_y)/2.
inline const Operator& sigma_minus() {
    static const Operator m = (Operator(2, 2) << 0, 0, 1, 0).finished();
    return m;
}

inline const Operator& sigma_plus() {
    static const Operator m = (Operator(2, 2) << 0, 1, 0, 0).finished();
    return m;
}

inline Operator pauli_hamiltonian(double mx, double my, double mz) {
    return mx * sigma_x() + my * sigma_y() + mz * sigma_z();
}

// Physical state: Hermitian, unit trace, positive semidefinite within tolerance.
struct DensityMatrix {
    Operator rho;

    int dim() const { return static_cast<int>(rho.rows()); }

    double trace_defect() const { return std::abs(rho.trace().real() - 1.0) + std::abs(rho.trace().imag()); }

    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<Operator> es((rho + rho.adjoint()) / 2.0);
        return es.eigenvalues().minCoeff();
    }

    static DensityMatrix checked(Operator candidate, double trace_tol = kTraceTol,
                                 double psd_tol = kPsdTol) {
        require_hermitian(candidate, "DensityMatrix");
        DensityMatrix dm{std::move(candidate)};
        if (dm.trace_defect() > trace_tol)
            throw Error("DensityMatrix: trace defect " + std::to_string(dm.trace_defect()));
        if (dm.min_eigenvalue() < -psd_tol)
            throw Error("DensityMatrix: negative eigenvalue " + std::to_string(dm.min_eigenvalue()));
        return dm;
    }
};

}  // namespace adiakit
