// hilbert.hpp: truncated multi-qudit spaces and dense operators on them.
//
// Basis ordering follows |q1 q2 ... qn> = |q1> (x) |q2> (x) ... (x) |qn>, with q1 the
// most significant digit. Qudits are numbered from 1 (Q1, Q2, Q3), matching the
// device labels used throughout the library.
#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qar/errors.hpp"

namespace qar {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Occupation numbers, one per qudit, e.g. {1,0,1} for |101>.
struct BasisLabel {
    std::vector<int> occupations;

    BasisLabel() = default;
    BasisLabel(std::initializer_list<int> occ) : occupations(occ) {}
    explicit BasisLabel(std::vector<int> occ) : occupations(std::move(occ)) {}

    std::string str() const {
        std::string s = "|";
        for (int n : occupations) s += std::to_string(n);
        return s + ">";
    }
    bool operator==(const BasisLabel&) const = default;
};

class QuditSpace {
public:
    explicit QuditSpace(std::vector<int> dims) : dims_(std::move(dims)) {
        if (dims_.empty()) throw InvalidDimension("QuditSpace: at least one qudit is required");
        for (int d : dims_) {
            if (d < 2) {
                throw InvalidDimension("QuditSpace: every truncation dimension must be >= 2, got " +
                                       std::to_string(d));
            }
        }
        total_ = std::accumulate(dims_.begin(), dims_.end(), 1, std::multiplies<>());
    }

    std::span<const int> dims() const noexcept { return dims_; }
    int num_qudits() const noexcept { return static_cast<int>(dims_.size()); }
    int total_dim() const noexcept { return total_; }

    /// Truncation dimension of qudit `qudit` (1-based).
    int dim(int qudit) const {
        check_qudit(qudit);
        return dims_[static_cast<std::size_t>(qudit - 1)];
    }

    void check_qudit(int qudit) const {
        if (qudit < 1 || qudit > num_qudits()) {
            throw IndexOutOfRange("qudit index " + std::to_string(qudit) + " outside 1.." +
                                  std::to_string(num_qudits()));
        }
    }

    bool contains(const BasisLabel& label) const noexcept {
        if (label.occupations.size() != dims_.size()) return false;
        for (std::size_t k = 0; k < dims_.size(); ++k) {
            if (label.occupations[k] < 0 || label.occupations[k] >= dims_[k]) return false;
        }
        return true;
    }

    int index_of(const BasisLabel& label) const {
        if (!contains(label)) {
            throw InvalidLabel("basis label " + label.str() + " is not valid in this space");
        }
        int index = 0;
        for (std::size_t k = 0; k < dims_.size(); ++k) index = index * dims_[k] + label.occupations[k];
        return index;
    }

    BasisLabel label_of(int index) const {
        if (index < 0 || index >= total_) throw IndexOutOfRange("basis index out of range");
        std::vector<int> occ(dims_.size());
        for (std::size_t k = dims_.size(); k-- > 0;) {
            occ[k] = index % dims_[k];
            index /= dims_[k];
        }
        return BasisLabel(std::move(occ));
    }

    bool operator==(const QuditSpace& other) const noexcept { return dims_ == other.dims_; }

private:
    std::vector<int> dims_;
    int total_ = 0;
};

inline QuditSpace make_space(std::vector<int> dims) { return QuditSpace(std::move(dims)); }

inline void require_same_space(const QuditSpace& a, const QuditSpace& b, const char* where) {
    if (!(a == b)) throw DimensionMismatch(std::string(where) + ": operands act on different spaces");
}

/// Dense operator on a QuditSpace.
class Operator {
public:
    explicit Operator(QuditSpace space) : space_(std::move(space)) {
        matrix_ = Matrix::Zero(space_.total_dim(), space_.total_dim());
    }
    Operator(QuditSpace space, Matrix matrix) : space_(std::move(space)), matrix_(std::move(matrix)) {
        const auto n = space_.total_dim();
        if (matrix_.rows() != n || matrix_.cols() != n) {
            throw DimensionMismatch("Operator: matrix is " + std::to_string(matrix_.rows()) + "x" +
                                    std::to_string(matrix_.cols()) + ", space needs " +
                                    std::to_string(n));
        }
    }

    const QuditSpace& space() const noexcept { return space_; }
    const Matrix& matrix() const noexcept { return matrix_; }
    int dim() const noexcept { return space_.total_dim(); }

    cplx element(const BasisLabel& row, const BasisLabel& col) const {
        return matrix_(space_.index_of(row), space_.index_of(col));
    }

    Operator adjoint() const { return Operator(space_, matrix_.adjoint()); }

    /// ||M - M^dagger|| <= tol * max(||M||, 1).
    bool is_hermitian(double tol = 1e-12) const {
        const double scale = std::max(matrix_.norm(), 1.0);
        return (matrix_ - matrix_.adjoint()).norm() <= tol * scale;
    }

    Operator& operator+=(const Operator& o) {
        require_same_space(space_, o.space_, "operator+");
        matrix_ += o.matrix_;
        return *this;
    }
    Operator& operator-=(const Operator& o) {
        require_same_space(space_, o.space_, "operator-");
        matrix_ -= o.matrix_;
        return *this;
    }
    Operator& operator*=(cplx s) {
        matrix_ *= s;
        return *this;
    }

    friend Operator operator+(Operator a, const Operator& b) { return a += b; }
    friend Operator operator-(Operator a, const Operator& b) { return a -= b; }
    friend Operator operator*(cplx s, Operator a) { return a *= s; }
    friend Operator operator*(Operator a, cplx s) { return a *= s; }
    friend Operator operator*(const Operator& a, const Operator& b) {
        require_same_space(a.space_, b.space_, "operator*");
        return Operator(a.space_, a.matrix_ * b.matrix_);
    }

private:
    QuditSpace space_;
    Matrix matrix_;
};

inline Operator commutator(const Operator& a, const Operator& b) { return a * b - b * a; }

inline Operator identity(const QuditSpace& space) {
    return Operator(space, Matrix::Identity(space.total_dim(), space.total_dim()));
}

/// Embeds a single-qudit matrix at position `qudit` (1-based): I (x) ... (x) local (x) ... (x) I.
inline Operator embed(const QuditSpace& space, int qudit, const Matrix& local) {
    space.check_qudit(qudit);
    if (local.rows() != space.dim(qudit) || local.cols() != space.dim(qudit)) {
        throw DimensionMismatch("embed: local operator does not match qudit dimension");
    }
    Matrix out = Matrix::Identity(1, 1);
    for (int k = 1; k <= space.num_qudits(); ++k) {
        const int d = space.dim(k);
        Matrix factor = (k == qudit) ? local : Matrix::Identity(d, d);
        Matrix next = Eigen::kroneckerProduct(out, factor);
        out = std::move(next);
    }
    return Operator(space, std::move(out));
}

/// Single-qudit lowering matrix with sqrt(n) on the first superdiagonal.
inline Matrix lowering_matrix(int d) {
    Matrix a = Matrix::Zero(d, d);
    for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

inline Operator annihilation(const QuditSpace& space, int qudit) {
    space.check_qudit(qudit);
    return embed(space, qudit, lowering_matrix(space.dim(qudit)));
}

inline Operator creation(const QuditSpace& space, int qudit) {
    return annihilation(space, qudit).adjoint();
}

inline Operator number(const QuditSpace& space, int qudit) {
    space.check_qudit(qudit);
    const int d = space.dim(qudit);
    Matrix n = Matrix::Zero(d, d);
    for (int k = 0; k < d; ++k) n(k, k) = k;
    return embed(space, qudit, n);
}

inline Vector basis_ket(const QuditSpace& space, const BasisLabel& label) {
    Vector v = Vector::Zero(space.total_dim());
    v(space.index_of(label)) = 1.0;
    return v;
}

/// |to><from|
inline Operator transition(const QuditSpace& space, const BasisLabel& to, const BasisLabel& from) {
    Matrix m = Matrix::Zero(space.total_dim(), space.total_dim());
    m(space.index_of(to), space.index_of(from)) = 1.0;
    return Operator(space, std::move(m));
}

/// Rank-1 projector |label><label|.
inline Operator basis_projector(const QuditSpace& space, const BasisLabel& label) {
    return transition(space, label, label);
}

}  // namespace qar
