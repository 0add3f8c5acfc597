// lindblad.hpp: density matrices, thermal Lindbladians, time evolution and steady states.
//
// Superoperators act on column-stacked density matrices: vec(A X B) = (B^T (x) A) vec(X).
#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qar/hilbert.hpp"
#include "qar/model.hpp"
#include "qar/ode.hpp"

namespace qar {

namespace tolerance {
inline constexpr double hermitian = 1e-10;
inline constexpr double trace = 1e-9;
inline constexpr double positivity = 1e-8;
}  // namespace tolerance

class DensityMatrix {
public:
    /// Validates Hermiticity, unit trace and positivity.
    DensityMatrix(QuditSpace space, Matrix m) : space_(std::move(space)), m_(std::move(m)) {
        const auto n = space_.total_dim();
        if (m_.rows() != n || m_.cols() != n) throw DimensionMismatch("DensityMatrix: wrong matrix size");
        if ((m_ - m_.adjoint()).norm() > tolerance::hermitian) {
            throw ValidationError("DensityMatrix: not Hermitian");
        }
        if (std::abs(m_.trace() - cplx(1.0)) > tolerance::trace) {
            throw ValidationError("DensityMatrix: trace differs from 1");
        }
        if (min_eigenvalue() < -tolerance::positivity) {
            throw ValidationError("DensityMatrix: negative eigenvalue");
        }
    }

    struct unchecked_t {};
    /// Skips positivity validation; used by integrators that were told not to check it.
    DensityMatrix(QuditSpace space, Matrix m, unchecked_t) : space_(std::move(space)), m_(std::move(m)) {}

    static DensityMatrix pure(const QuditSpace& space, const BasisLabel& label) {
        const Vector v = basis_ket(space, label);
        return DensityMatrix(space, v * v.adjoint());
    }

    /// Diagonal state with the given basis populations.
    static DensityMatrix diagonal(const QuditSpace& space, const Eigen::VectorXd& populations) {
        if (populations.size() != space.total_dim()) throw DimensionMismatch("DensityMatrix::diagonal");
        return DensityMatrix(space, populations.cast<cplx>().asDiagonal());
    }

    const QuditSpace& space() const noexcept { return space_; }
    const Matrix& matrix() const noexcept { return m_; }

    double population(const BasisLabel& label) const {
        const int k = space_.index_of(label);
        return m_(k, k).real();
    }

    double expectation(const Operator& op) const {
        require_same_space(space_, op.space(), "expectation");
        return (op.matrix() * m_).trace().real();
    }

    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m_ + m_.adjoint()), Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

private:
    QuditSpace space_;
    Matrix m_;
};

/// Thermal channel Gamma {(n+1) D[a, .] + n D[a+, .]} on one qudit.
struct DissipationChannel {
    int qudit = 1;
    double rate = 0.0;
    double occupation = 0.0;

    void validate(const QuditSpace& space) const {
        space.check_qudit(qudit);
        if (!(rate >= 0.0) || !std::isfinite(rate)) throw ValidationError("DissipationChannel: rate < 0");
        if (!(occupation >= 0.0) || !std::isfinite(occupation)) {
            throw ValidationError("DissipationChannel: occupation < 0");
        }
    }
};

/// D[A, B] = A B A+ - (A+A B + B A+A) / 2.
inline Operator dissipator(const Operator& a, const Operator& b) {
    require_same_space(a.space(), b.space(), "dissipator");
    const Matrix& am = a.matrix();
    const Matrix& bm = b.matrix();
    const Matrix ada = am.adjoint() * am;
    return Operator(a.space(), am * bm * am.adjoint() - 0.5 * (ada * bm + bm * ada));
}

class Liouvillian {
public:
    Liouvillian(QuditSpace space, Matrix super) : space_(std::move(space)), super_(std::move(super)) {
        const auto n = space_.total_dim() * space_.total_dim();
        if (super_.rows() != n || super_.cols() != n) throw DimensionMismatch("Liouvillian: wrong size");
    }

    const QuditSpace& space() const noexcept { return space_; }
    const Matrix& matrix() const noexcept { return super_; }

    Matrix apply(const Matrix& rho) const {
        const int d = space_.total_dim();
        const Vector v = super_ * Eigen::Map<const Vector>(rho.data(), rho.size());
        return Eigen::Map<const Matrix>(v.data(), d, d);
    }

    Liouvillian& operator+=(const Liouvillian& o) {
        require_same_space(space_, o.space_, "Liouvillian+");
        super_ += o.super_;
        return *this;
    }

private:
    QuditSpace space_;
    Matrix super_;
};

namespace detail {

inline Matrix left_multiplier(const Matrix& x) {
    return Eigen::kroneckerProduct(Matrix::Identity(x.rows(), x.cols()), x);
}
inline Matrix right_multiplier(const Matrix& x) {
    return Eigen::kroneckerProduct(x.transpose(), Matrix::Identity(x.rows(), x.cols()));
}
inline Matrix dissipator_super(const Matrix& l) {
    const Matrix ldl = l.adjoint() * l;
    return Eigen::kroneckerProduct(l.conjugate(), l) - 0.5 * left_multiplier(ldl) -
           0.5 * right_multiplier(ldl);
}

}  // namespace detail

/// The dissipative part of a single channel.
inline Liouvillian channel_liouvillian(const QuditSpace& space, const DissipationChannel& ch) {
    ch.validate(space);
    const Matrix a = annihilation(space, ch.qudit).matrix();
    Matrix s = ch.rate * (ch.occupation + 1.0) * detail::dissipator_super(a);
    if (ch.occupation > 0.0) s += ch.rate * ch.occupation * detail::dissipator_super(a.adjoint());
    return Liouvillian(space, std::move(s));
}

/// rho -> -i[H, rho] + sum_i Gamma_i {(n_i+1) D[a_i, rho] + n_i D[a_i+, rho]}.
inline Liouvillian build_liouvillian(const Operator& h, std::span<const DissipationChannel> channels) {
    const auto& space = h.space();
    const cplx minus_i(0.0, -1.0);
    Liouvillian l(space, minus_i * (detail::left_multiplier(h.matrix()) - detail::right_multiplier(h.matrix())));
    for (const auto& ch : channels) l += channel_liouvillian(space, ch);
    return l;
}

inline Liouvillian build_liouvillian(const Operator& h, std::initializer_list<DissipationChannel> channels) {
    return build_liouvillian(h, std::span<const DissipationChannel>(channels.begin(), channels.size()));
}

enum class Integrator { matrix_exponential, runge_kutta };

struct EvolveOptions {
    Integrator backend = Integrator::matrix_exponential;
    double rtol = 1e-8;
    double atol = 1e-12;
    bool check_positivity = true;
};

namespace detail {

inline DensityMatrix checked_state(const QuditSpace& space, const Vector& v, double t, bool positivity) {
    const int d = space.total_dim();
    Matrix m = Eigen::Map<const Matrix>(v.data(), d, d);
    if (std::abs(m.trace() - cplx(1.0)) > tolerance::trace) {
        throw IntegrationError("trace drifted beyond 1e-9", t);
    }
    if ((m - m.adjoint()).norm() > tolerance::hermitian) {
        throw IntegrationError("density matrix lost Hermiticity beyond 1e-10", t);
    }
    m = 0.5 * (m + m.adjoint()).eval();
    if (!positivity) return DensityMatrix(space, std::move(m), DensityMatrix::unchecked_t{});
    {
        Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -tolerance::positivity) {
            throw PositivityViolation("density matrix lost positivity", t);
        }
    }
    return DensityMatrix(space, std::move(m));
}

}  // namespace detail

/// Propagates rho0 (taken at t = 0) and returns the state at each requested time.
inline std::vector<DensityMatrix> evolve(const DensityMatrix& rho0, const Liouvillian& l,
                                         std::span<const double> times, const EvolveOptions& opt = {}) {
    require_same_space(rho0.space(), l.space(), "evolve");
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < 0.0 || (k > 0 && times[k] < times[k - 1])) {
            throw IntegrationError("evolve: times must be ascending and >= 0", 0.0);
        }
    }
    const auto& space = rho0.space();
    const Matrix& r0 = rho0.matrix();
    Vector v = Eigen::Map<const Vector>(r0.data(), r0.size());
    std::vector<DensityMatrix> out;
    out.reserve(times.size());

    if (opt.backend == Integrator::matrix_exponential) {
        // Uniform grids reuse one propagator.
        std::map<double, Matrix> cache;
        double t = 0.0;
        for (double target : times) {
            const double dt = target - t;
            if (dt > 0.0) {
                auto it = cache.lower_bound(dt * (1.0 - 1e-12));
                if (it == cache.end() || it->first > dt * (1.0 + 1e-12)) {
                    Matrix scaled = l.matrix() * dt;
                    it = cache.emplace(dt, scaled.exp()).first;
                }
                v = it->second * v;
            }
            t = target;
            out.push_back(detail::checked_state(space, v, t, opt.check_positivity));
        }
        return out;
    }

    ode::Options o;
    o.rtol = opt.rtol;
    o.atol = opt.atol;
    const Matrix& s = l.matrix();
    auto rhs = [&s](double, const Vector& y) -> Vector { return s * y; };
    const auto states = ode::integrate(rhs, 0.0, v, times, o);
    for (std::size_t k = 0; k < states.size(); ++k) {
        out.push_back(detail::checked_state(space, states[k], times[k], opt.check_positivity));
    }
    return out;
}

struct SteadyStateOptions {
    /// Singular values below this fraction of the largest count as null directions.
    double null_tolerance = 1e-10;
    /// Accepted ||L rho|| relative to ||L||_F.
    double residual_tolerance = 1e-10;
};

/// Relative residual ||L vec(rho)|| / ||L||_F.
inline double steady_state_residual(const Liouvillian& l, const DensityMatrix& rho) {
    const Matrix r = l.apply(rho.matrix());
    return r.norm() / std::max(l.matrix().norm(), 1e-300);
}

/// Unique null vector of L normalized to unit trace.
inline DensityMatrix steady_state(const Liouvillian& l, const SteadyStateOptions& opt = {}) {
    const auto& space = l.space();
    const int d = space.total_dim();
    Eigen::BDCSVD<Matrix> svd(l.matrix(), Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double largest = sv.size() > 0 ? sv(0) : 0.0;
    int null_dim = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
        if (sv(k) <= opt.null_tolerance * largest) ++null_dim;
    }
    if (largest == 0.0 || null_dim > 1) {
        throw NonUniqueSteadyState("Liouvillian kernel has dimension " +
                                   std::to_string(largest == 0.0 ? d * d : null_dim));
    }
    const Vector v = svd.matrixV().col(sv.size() - 1);
    Matrix m = Eigen::Map<const Matrix>(v.data(), d, d);
    const cplx tr = m.trace();
    if (std::abs(tr) < 1e-300) throw NonUniqueSteadyState("null vector has zero trace");
    m /= tr;
    m = 0.5 * (m + m.adjoint()).eval();
    DensityMatrix rho(space, std::move(m));
    const double res = steady_state_residual(l, rho);
    if (res > opt.residual_tolerance) {
        throw NonUniqueSteadyState("steady state residual " + std::to_string(res) + " too large");
    }
    return rho;
}

}  // namespace qar
