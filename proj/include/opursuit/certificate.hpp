#pragma once

// Recovery theory on concrete instances: incoherence, the admissible lambda
// interval, the dual certificate Q and its five optimality conditions, and the
// orthogonal-outlier criterion.

#include <opursuit/linalg.hpp>

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace opursuit {

struct IncoherenceStats {
    double mu = 0;
    Index r = 0;
    double gamma = 0;
    Index n = 0;
};

/// mu = ((1 - gamma) n / r) max_{i not in I0} ||V^T e_i||^2.
IncoherenceStats incoherence(const Matrix &v, const ColumnSet &i0);

enum class GammaConstant { noiseless, noisy };

constexpr double c1_noiseless = 9.0 / 121.0;
constexpr double c2_noisy     = 9.0 / 1024.0;

/// gamma / (1 - gamma) <= c / (mu r).
bool gamma_condition(double gamma, double mu, Index r, GammaConstant which);

/// 3 / (7 sqrt(gamma n)); throws ConfigError when gamma n = 0.
double default_lambda(double gamma, Index n);
/// sqrt(9 + 1024 mu r) / (14 sqrt(n)).
double default_lambda_noisy(double mu, Index r, Index n);
/// sqrt((mu r + 1) / n), the orthogonal-case choice.
double corollary_lambda(double mu, Index r, Index n);

/// Spectral norm of G = P_I0(Vbar^T) P_I0(Vbar^T)^T.
double compute_psi(const Matrix &v_bar, const ColumnSet &i0);

struct LambdaInterval {
    double lo = 0;
    double hi = std::numeric_limits<double>::infinity(); ///< +inf when gamma = 0
    bool nonempty = false;

    bool contains(double lambda) const { return nonempty && lambda >= lo && lambda <= hi; }
};

LambdaInterval lambda_interval(double psi, double gamma, double mu, Index r, Index n);

/// Certificate and the oracle quantities it was built from.
struct DualCertificate {
    Matrix Q;
    Matrix L_hat, C_hat, H_hat;
    Matrix V_bar;
    double psi = 0;
};

/// Builds Q = U0 Vbar^T + lambda H - Delta1 - Delta2 from the oracle solution.
/// Throws InapplicableError when psi >= 1.
DualCertificate build_certificate(const Matrix &m, const Matrix &u0, const ColumnSet &i0,
                                  double lambda);

/// Same, from a given oracle solution (L_hat, C_hat) with rank(L_hat) = U0.cols().
DualCertificate build_certificate_from(const Matrix &l_hat, const Matrix &c_hat,
                                       const Matrix &u0, const ColumnSet &i0, double lambda);

struct ConditionRecord {
    std::string name;
    double measured = 0;
    double bound = 0;
    bool pass = false;
};

struct CertificateReport {
    double psi = 0;
    double lambda_lo = 0;
    double lambda_hi = std::numeric_limits<double>::infinity();
    bool gamma_condition_ok = false;
    std::vector<ConditionRecord> conditions; ///< five entries
    bool strict = false;
    double mu = 0;
    Index r = 0;
    double gamma = 0;

    bool all_pass() const;
};

/// Measures conditions (1)-(5) for Q against (L_hat, C_hat). The lambda
/// interval uses psi from L_hat and mu from P_{I0^c}(L_hat).
CertificateReport verify_certificate(const Matrix &q, const Matrix &l_hat, const Matrix &c_hat,
                                     const ColumnSet &i0, double lambda, bool strict);

struct OrthogonalConditionResult {
    bool pass = false;
    double h0_norm = 0;
    double uv_inf2 = 0;
};

/// ||H0|| <= 1/lambda and ||U0 V0^T||_{inf,2} <= lambda. Throws
/// AssumptionError if outliers are not orthogonal to the inliers.
OrthogonalConditionResult check_orthogonal_condition(const Matrix &m, const ColumnSet &i0,
                                                     double lambda);

/// Max over random X in P_Vbar of || P_Vbar P_{I0^c} P_Vbar (inv(X)) - X ||_F,
/// inv(X) = X Vbar (I - G)^{-1} Vbar^T. Throws InapplicableError if psi >= 1.
double neumann_inverse_check(const Matrix &v_bar, const ColumnSet &i0, Index trials,
                             std::uint64_t seed = 0);

/// Closed-form inverse of P_Vbar P_{I0^c} P_Vbar on P_Vbar, applied to x.
Matrix neumann_inverse_apply(const Matrix &v_bar, const ColumnSet &i0, const Matrix &x);

} // namespace opursuit
