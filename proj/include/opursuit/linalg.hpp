#pragma once

// Dense matrices, SVD access, matrix norms and the projection algebra.
//
// Matrices are Eigen::MatrixXd, column-major: column j is data point j,
// row i is coordinate i.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <vector>

namespace opursuit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index  = Eigen::Index;

/// Numerical tolerances shared by all modules.
struct Tolerances {
    /// Relative numerical-rank cutoff (times sigma_1).
    static constexpr double rank_rel = 1e-9;
    /// Orthonormality of stored bases.
    static constexpr double orthonormal = 1e-10;
    /// Equality conditions of the certificate (Frobenius).
    static constexpr double certificate_eq = 1e-8;
    /// Strict-mode margin for certificate inequalities.
    static constexpr double strict_margin = 1e-10;
    /// Orthogonal-outlier assumption, relative to ||M||_F^2.
    static constexpr double orthogonality = 1e-8;
    /// Default success_check tolerance.
    static constexpr double success = 1e-3;
    /// psi within this of 1 is treated as 1 (I - G numerically singular).
    static constexpr double psi_one = 1e-12;
    /// A column of C counts as nonzero above this fraction of max(1, ||M||_F).
    static constexpr double zero_column = 1e-8;
};

/// Throws ConfigError if `a` is empty or has a non-finite entry.
void require_valid(const Matrix &a, const char *what);

/// Sorted set of column indices in [0, n).
class ColumnSet {
  public:
    ColumnSet() = default;
    /// Sorts and deduplicates; throws ConfigError on an index outside [0, n).
    ColumnSet(std::vector<Index> indices, Index n);

    static ColumnSet all(Index n);
    static ColumnSet none(Index n) { return ColumnSet({}, n); }

    const std::vector<Index> &indices() const & { return indices_; }
    /// By value on temporaries, so `for (j : s.complement().indices())` is safe.
    std::vector<Index> indices() && { return std::move(indices_); }
    Index n() const { return n_; }
    Index size() const { return static_cast<Index>(indices_.size()); }
    bool empty() const { return indices_.empty(); }
    bool contains(Index j) const;
    /// Columns not in the set.
    ColumnSet complement() const;
    /// Boolean membership vector of length n.
    std::vector<bool> membership() const;

    friend bool operator==(const ColumnSet &, const ColumnSet &) = default;

  private:
    std::vector<Index> indices_;
    Index n_ = 0;
};

/// Thin SVD truncated at the numerical rank k.
struct SvdFactors {
    Matrix U;     ///< p x k
    Vector sigma; ///< k, nonincreasing
    Matrix V;     ///< n x k
    Index k = 0;

    Matrix reconstruct() const;
};

/// SVD with absolute rank cutoff `rank_tol` (values <= rank_tol are dropped).
/// Sign convention: the first nonzero entry of each column of U is positive.
SvdFactors svd(const Matrix &a, double rank_tol);
/// SVD with the default relative cutoff Tolerances::rank_rel * sigma_1.
SvdFactors svd(const Matrix &a);
/// All singular values, nonincreasing.
Vector singular_values(const Matrix &a);

double nuclear_norm(const Matrix &a);
double spectral_norm(const Matrix &a);
double frob_norm(const Matrix &a);
/// Sum of column 2-norms.
double norm_1_2(const Matrix &a);
/// Largest column 2-norm.
double norm_inf_2(const Matrix &a);
Vector column_norms(const Matrix &a);

/// Orthonormal basis of the leading `r` left singular vectors of `a`.
Matrix leading_left_basis(const Matrix &a, Index r);

/// Bases and column set defining the projectors P_U, P_V, P_I and P_T.
struct ProjectorContext {
    std::optional<Matrix> U;
    std::optional<Matrix> V;
    std::optional<ColumnSet> I;

    /// Throws ConfigError if a stored basis is not orthonormal.
    void validate() const;
};

Matrix project_col_space(const ProjectorContext &ctx, const Matrix &a);
Matrix project_row_space(const ProjectorContext &ctx, const Matrix &a);
Matrix project_columns(const ColumnSet &set, const Matrix &a);
Matrix project_T(const ProjectorContext &ctx, const Matrix &a);

Matrix project_col_complement(const ProjectorContext &ctx, const Matrix &a);
Matrix project_row_complement(const ProjectorContext &ctx, const Matrix &a);
Matrix project_columns_complement(const ColumnSet &set, const Matrix &a);
Matrix project_T_complement(const ProjectorContext &ctx, const Matrix &a);

/// ||P_U P_I(A) - P_I P_U(A)||_F.
double commutation_check(const ProjectorContext &ctx, const Matrix &a);

/// Spectral norm of U1 U1^T - U2 U2^T for orthonormal-column U1, U2.
double subspace_distance(const Matrix &u1, const Matrix &u2);

} // namespace opursuit
