#pragma once

// Outlier Pursuit: min ||L||_* + lambda ||C||_{1,2}  s.t.  M = L + C,
// solved by accelerated proximal gradient with continuation on mu.

#include <opursuit/linalg.hpp>

#include <optional>
#include <vector>

namespace opursuit {

/// Boolean p x n indicator of observed entries.
class ColumnEntryMask {
  public:
    /// Throws ConfigError if no entry is observed.
    explicit ColumnEntryMask(Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed);
    static ColumnEntryMask full(Index p, Index n);

    Index rows() const { return observed_.rows(); }
    Index cols() const { return observed_.cols(); }
    bool operator()(Index i, Index j) const { return observed_(i, j); }
    const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> &observed() const { return observed_; }
    /// 1.0 on observed entries, 0.0 elsewhere.
    Matrix as_weights() const { return observed_.cast<double>().matrix(); }
    Index count() const { return observed_.count(); }

  private:
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed_;
};

/// Column basis U0 and outlier set I0 of the oracle problem.
struct OracleConstraint {
    Matrix U0;
    ColumnSet I0;
};

struct SolverOptions {
    double lambda     = 0; ///< must be set (> 0)
    double delta      = 1e-5;
    double eta        = 0.9;
    double mu0_factor = 0.99;
    Index max_iters   = 2000;
    double conv_tol   = 1e-6;
    std::optional<ColumnEntryMask> mask;
    std::optional<OracleConstraint> oracle;

    /// Throws ConfigError on invalid values.
    void validate() const;
};

struct DecompositionResult {
    Matrix L;
    Matrix C;
    Index iterations = 0;
    bool converged   = false;
    /// ||L_k||_* + lambda ||C_k||_{1,2} after each iteration.
    std::vector<double> objective_history;
    /// Continuation parameter used at each iteration.
    std::vector<double> mu_history;
    /// ||M - L - C||_F, restricted to observed entries when masked.
    double residual = 0;
    /// solve_noisy only: final residual outside [0.5 eps, 1.5 eps].
    bool residual_target_missed = false;
    /// solve_oracle only: the exact refinement step was applied.
    bool refined = false;
};

/// Singular value thresholding: U max(S - eps, 0) V^T.
Matrix svt(const Matrix &a, double eps);

/// Column-wise shrinkage, the proximal map of eps ||.||_{1,2}.
Matrix column_shrink(const Matrix &a, double eps);

/// ||L||_* + lambda ||C||_{1,2}.
double objective(const Matrix &l, const Matrix &c, double lambda);

/// Runs the iteration honoring opts.mask and opts.oracle if present.
DecompositionResult solve(const Matrix &m, const SolverOptions &opts);

/// Frobenius-ball variant, via penalty parameter continuation targeting
/// a final residual in [0.5 eps, 1.5 eps].
DecompositionResult solve_noisy(const Matrix &m, const SolverOptions &opts, double eps_noise);

/// Only entries in `mask` enter the data term.
DecompositionResult solve_partial(const Matrix &m, const ColumnEntryMask &mask,
                                  SolverOptions opts);

/// Problem restricted to P_U0(L) = L and P_I0(C) = C. When the constraints
/// admit an exact decomposition the iterate is refined to the exact optimum.
DecompositionResult solve_oracle(const Matrix &m, const Matrix &u0, const ColumnSet &i0,
                                 SolverOptions opts);

/// Column indices of C whose norm exceeds Tolerances::zero_column * max(1, scale).
std::vector<Index> nonzero_columns(const Matrix &c, double scale);

} // namespace opursuit
