#include <opursuit/errors.hpp>
#include <opursuit/linalg.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace opursuit {

void require_valid(const Matrix &a, const char *what) {
    if (a.rows() < 1 || a.cols() < 1)
        throw ConfigError(std::string(what) + ": matrix must have at least one row and column");
    if (!a.allFinite())
        throw ConfigError(std::string(what) + ": matrix has non-finite entries");
}

// ---------------------------------------------------------------- ColumnSet

ColumnSet::ColumnSet(std::vector<Index> indices, Index n) : indices_(std::move(indices)), n_(n) {
    if (n < 0)
        throw ConfigError("ColumnSet: negative column count");
    std::sort(indices_.begin(), indices_.end());
    indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
    if (!indices_.empty() && (indices_.front() < 0 || indices_.back() >= n))
        throw ConfigError("ColumnSet: index out of range [0, " + std::to_string(n) + ")");
}

ColumnSet ColumnSet::all(Index n) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j)
        idx[static_cast<std::size_t>(j)] = j;
    return ColumnSet(std::move(idx), n);
}

bool ColumnSet::contains(Index j) const {
    return std::binary_search(indices_.begin(), indices_.end(), j);
}

ColumnSet ColumnSet::complement() const {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(n_ - size()));
    auto it = indices_.begin();
    for (Index j = 0; j < n_; ++j) {
        if (it != indices_.end() && *it == j)
            ++it;
        else
            out.push_back(j);
    }
    return ColumnSet(std::move(out), n_);
}

std::vector<bool> ColumnSet::membership() const {
    std::vector<bool> m(static_cast<std::size_t>(n_), false);
    for (Index j : indices_)
        m[static_cast<std::size_t>(j)] = true;
    return m;
}

// ---------------------------------------------------------------------- SVD

Matrix SvdFactors::reconstruct() const {
    return U * sigma.asDiagonal() * V.transpose();
}

SvdFactors svd(const Matrix &a, double rank_tol) {
    if (!(rank_tol >= 0))
        throw ConfigError("svd: rank_tol must be nonnegative");
    if (!a.allFinite())
        throw ConfigError("svd: matrix has non-finite entries");
    SvdFactors f;
    if (a.size() == 0) {
        f.U.resize(a.rows(), 0);
        f.V.resize(a.cols(), 0);
        return f;
    }
    Eigen::BDCSVD<Matrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success)
        throw NumericalError("svd: decomposition did not converge");
    const Vector &s = dec.singularValues();
    Index k = 0;
    while (k < s.size() && s(k) > rank_tol)
        ++k;
    f.k     = k;
    f.sigma = s.head(k);
    f.U     = dec.matrixU().leftCols(k);
    f.V     = dec.matrixV().leftCols(k);
    for (Index j = 0; j < k; ++j) {
        Index i = 0;
        // "first nonzero" up to rounding: skip entries that are negligible
        while (i < f.U.rows() && std::abs(f.U(i, j)) <= 1e-12)
            ++i;
        if (i < f.U.rows() && f.U(i, j) < 0) {
            f.U.col(j) *= -1;
            f.V.col(j) *= -1;
        }
    }
    if (!f.U.allFinite() || !f.V.allFinite())
        throw NumericalError("svd: non-finite singular vectors");
    return f;
}

SvdFactors svd(const Matrix &a) {
    Vector s = singular_values(a);
    double s1 = s.size() ? s(0) : 0.0;
    return svd(a, Tolerances::rank_rel * s1);
}

Vector singular_values(const Matrix &a) {
    if (a.size() == 0)
        return Vector();
    if (!a.allFinite())
        throw ConfigError("singular_values: matrix has non-finite entries");
    Eigen::BDCSVD<Matrix> dec(a);
    if (dec.info() != Eigen::Success)
        throw NumericalError("singular_values: decomposition did not converge");
    return dec.singularValues();
}

// -------------------------------------------------------------------- norms

double nuclear_norm(const Matrix &a) { return singular_values(a).sum(); }

double spectral_norm(const Matrix &a) {
    Vector s = singular_values(a);
    return s.size() ? s(0) : 0.0;
}

double frob_norm(const Matrix &a) { return a.norm(); }

Vector column_norms(const Matrix &a) { return a.colwise().norm().transpose(); }

double norm_1_2(const Matrix &a) { return a.size() ? column_norms(a).sum() : 0.0; }

double norm_inf_2(const Matrix &a) { return a.size() ? column_norms(a).maxCoeff() : 0.0; }

Matrix leading_left_basis(const Matrix &a, Index r) {
    if (r < 0 || r > std::min(a.rows(), a.cols()))
        throw ConfigError("leading_left_basis: rank out of range");
    if (r == 0)
        return Matrix(a.rows(), 0);
    SvdFactors f = svd(a, 0.0);
    if (f.k < r)
        throw NumericalError("leading_left_basis: matrix rank below requested r");
    return f.U.leftCols(r);
}

// --------------------------------------------------------------- projectors

namespace {

bool orthonormal(const Matrix &b) {
    Matrix g = b.transpose() * b;
    return (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() <= Tolerances::orthonormal;
}

const Matrix &need_U(const ProjectorContext &ctx) {
    if (!ctx.U)
        throw ConfigError("projector: column basis U not set");
    if (ctx.U->cols() > 0 && !orthonormal(*ctx.U))
        throw ConfigError("projector: U is not orthonormal");
    return *ctx.U;
}

const Matrix &need_V(const ProjectorContext &ctx) {
    if (!ctx.V)
        throw ConfigError("projector: row basis V not set");
    if (ctx.V->cols() > 0 && !orthonormal(*ctx.V))
        throw ConfigError("projector: V is not orthonormal");
    return *ctx.V;
}

} // namespace

void ProjectorContext::validate() const {
    if (U && U->cols() > 0 && !orthonormal(*U))
        throw ConfigError("ProjectorContext: U is not orthonormal");
    if (V && V->cols() > 0 && !orthonormal(*V))
        throw ConfigError("ProjectorContext: V is not orthonormal");
}

Matrix project_col_space(const ProjectorContext &ctx, const Matrix &a) {
    const Matrix &u = need_U(ctx);
    if (u.rows() != a.rows())
        throw ConfigError("project_col_space: dimension mismatch");
    return u * (u.transpose() * a);
}

Matrix project_row_space(const ProjectorContext &ctx, const Matrix &a) {
    const Matrix &v = need_V(ctx);
    if (v.rows() != a.cols())
        throw ConfigError("project_row_space: dimension mismatch");
    return (a * v) * v.transpose();
}

Matrix project_columns(const ColumnSet &set, const Matrix &a) {
    if (set.n() != a.cols())
        throw ConfigError("project_columns: column set size mismatch");
    Matrix out = Matrix::Zero(a.rows(), a.cols());
    for (Index j : set.indices())
        out.col(j) = a.col(j);
    return out;
}

Matrix project_T(const ProjectorContext &ctx, const Matrix &a) {
    Matrix pu = project_col_space(ctx, a);
    return pu + project_row_space(ctx, a) - project_row_space(ctx, pu);
}

Matrix project_col_complement(const ProjectorContext &ctx, const Matrix &a) {
    return a - project_col_space(ctx, a);
}

Matrix project_row_complement(const ProjectorContext &ctx, const Matrix &a) {
    return a - project_row_space(ctx, a);
}

Matrix project_columns_complement(const ColumnSet &set, const Matrix &a) {
    return project_columns(set.complement(), a);
}

Matrix project_T_complement(const ProjectorContext &ctx, const Matrix &a) {
    return a - project_T(ctx, a);
}

double commutation_check(const ProjectorContext &ctx, const Matrix &a) {
    if (!ctx.I)
        throw ConfigError("commutation_check: column set I not set");
    Matrix ui = project_col_space(ctx, project_columns(*ctx.I, a));
    Matrix iu = project_columns(*ctx.I, project_col_space(ctx, a));
    return (ui - iu).norm();
}

double subspace_distance(const Matrix &u1, const Matrix &u2) {
    if (u1.rows() != u2.rows())
        throw ConfigError("subspace_distance: ambient dimension mismatch");
    Matrix d = u1 * u1.transpose() - u2 * u2.transpose();
    // symmetric: spectral norm = largest |eigenvalue|
    Eigen::SelfAdjointEigenSolver<Matrix> es(d, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError("subspace_distance: eigensolver failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace opursuit
