#include <opursuit/certificate.hpp>
#include <opursuit/errors.hpp>
#include <opursuit/random.hpp>
#include <opursuit/solver.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace opursuit {

IncoherenceStats incoherence(const Matrix &v, const ColumnSet &i0) {
    if (v.cols() == 0)
        throw ConfigError("incoherence: r must be at least 1");
    if (i0.n() != v.rows())
        throw ConfigError("incoherence: column set size does not match V");
    const Index n     = v.rows();
    const Index n_in  = n - i0.size();
    double max_row_sq = 0;
    for (Index i = 0; i < n; ++i)
        if (!i0.contains(i))
            max_row_sq = std::max(max_row_sq, v.row(i).squaredNorm());
    IncoherenceStats st;
    st.r     = v.cols();
    st.n     = n;
    st.gamma = static_cast<double>(i0.size()) / static_cast<double>(n);
    st.mu    = static_cast<double>(n_in) / static_cast<double>(st.r) * max_row_sq;
    return st;
}

bool gamma_condition(double gamma, double mu, Index r, GammaConstant which) {
    if (!(gamma >= 0 && gamma < 1))
        throw ConfigError("gamma_condition: gamma must lie in [0, 1)");
    const double c = which == GammaConstant::noiseless ? c1_noiseless : c2_noisy;
    return gamma / (1 - gamma) <= c / (mu * static_cast<double>(r));
}

double default_lambda(double gamma, Index n) {
    const double gn = gamma * static_cast<double>(n);
    if (!(gn > 0) || !std::isfinite(gn))
        throw ConfigError("default_lambda: gamma * n must be positive; give lambda explicitly");
    return 3.0 / (7.0 * std::sqrt(gn));
}

double default_lambda_noisy(double mu, Index r, Index n) {
    if (n < 1)
        throw ConfigError("default_lambda_noisy: n must be positive");
    return std::sqrt(9.0 + 1024.0 * mu * static_cast<double>(r)) / (14.0 * std::sqrt(static_cast<double>(n)));
}

double corollary_lambda(double mu, Index r, Index n) {
    if (n < 1)
        throw ConfigError("corollary_lambda: n must be positive");
    return std::sqrt((mu * static_cast<double>(r) + 1.0) / static_cast<double>(n));
}

namespace {

Matrix rows_of(const Matrix &v, const ColumnSet &set) {
    Matrix out(set.size(), v.cols());
    for (Index q = 0; q < set.size(); ++q)
        out.row(q) = v.row(set.indices()[static_cast<std::size_t>(q)]);
    return out;
}

Matrix gram_on(const Matrix &v_bar, const ColumnSet &i0) {
    Matrix vi = rows_of(v_bar, i0);
    return vi.transpose() * vi;
}

double sym_spectral(const Matrix &g) {
    if (g.size() == 0)
        return 0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix normalized_columns(const Matrix &c, const ColumnSet &i0) {
    Matrix h          = Matrix::Zero(c.rows(), c.cols());
    const double zero = Tolerances::zero_column * std::max(1.0, c.norm());
    for (Index j : i0.indices()) {
        double nrm = c.col(j).norm();
        if (nrm > zero)
            h.col(j) = c.col(j) / nrm;
    }
    return h;
}

} // namespace

double compute_psi(const Matrix &v_bar, const ColumnSet &i0) {
    if (i0.n() != v_bar.rows())
        throw ConfigError("compute_psi: column set size does not match Vbar");
    return std::clamp(sym_spectral(gram_on(v_bar, i0)), 0.0, 1.0);
}

LambdaInterval lambda_interval(double psi, double gamma, double mu, Index r, Index n) {
    LambdaInterval out;
    if (!(psi < 1) || !(gamma >= 0 && gamma < 1) || n < 1 || r < 1)
        return out;
    const double mr    = mu * static_cast<double>(r);
    const double nn    = static_cast<double>(n);
    const double ratio = gamma / (1 - gamma);
    const double denom = 1 - psi - std::sqrt(ratio * mr);
    if (!(denom > 0))
        return out;
    out.lo = (1 - psi) * std::sqrt(mr / (1 - gamma)) / (std::sqrt(nn) * denom);
    out.hi = gamma > 0 ? (1 - psi) / ((2 - psi) * std::sqrt(nn * gamma))
                       : std::numeric_limits<double>::infinity();
    // Relative slack absorbs rounding when the condition holds with equality.
    const double bound = (1 - psi) * (1 - psi) / ((3 - psi) * (3 - psi) * mr);
    out.nonempty       = ratio <= bound * (1 + 1e-12);
    return out;
}

DualCertificate build_certificate_from(const Matrix &l_hat, const Matrix &c_hat, const Matrix &u0,
                                       const ColumnSet &i0, double lambda) {
    const Index r = u0.cols();
    if (l_hat.rows() != u0.rows() || c_hat.rows() != u0.rows() || l_hat.cols() != i0.n() ||
        c_hat.cols() != i0.n())
        throw ConfigError("build_certificate: shape mismatch");
    if (r < 1)
        throw ConfigError("build_certificate: U0 must have at least one column");

    SvdFactors f = svd(l_hat);
    if (f.k < r)
        throw NumericalError("build_certificate: oracle L has rank below r");
    Matrix u_hat = f.U.leftCols(r), v_hat = f.V.leftCols(r);

    DualCertificate cert;
    cert.L_hat = l_hat;
    cert.C_hat = c_hat;
    cert.V_bar = v_hat * (u_hat.transpose() * u0);
    cert.H_hat = normalized_columns(c_hat, i0);

    Matrix g = gram_on(cert.V_bar, i0);
    cert.psi = std::clamp(sym_spectral(g), 0.0, 1.0);
    if (!(cert.psi < 1 - Tolerances::psi_one)) {
        std::ostringstream os;
        os << "build_certificate: psi = " << cert.psi << " >= 1";
        throw InapplicableError(os.str());
    }

    const Matrix &vb = cert.V_bar;
    Matrix lh        = lambda * cert.H_hat;
    Matrix delta1    = u0 * (u0.transpose() * lh);
    Matrix z         = lh - delta1;
    // (I + sum_i G^i) = (I - G)^{-1} in the r-dimensional coefficient space
    Matrix coeff  = (Matrix::Identity(r, r) - g).ldlt().solve((z * vb).transpose()).transpose();
    Matrix delta2 = coeff * vb.transpose();
    for (Index j : i0.indices())
        delta2.col(j).setZero();

    cert.Q = u0 * vb.transpose() + lh - delta1 - delta2;
    return cert;
}

DualCertificate build_certificate(const Matrix &m, const Matrix &u0, const ColumnSet &i0,
                                  double lambda) {
    require_valid(m, "build_certificate");
    SolverOptions opts;
    opts.lambda             = lambda;
    DecompositionResult res = solve_oracle(m, u0, i0, opts);
    return build_certificate_from(res.L, res.C, u0, i0, lambda);
}

bool CertificateReport::all_pass() const {
    return !conditions.empty() &&
           std::all_of(conditions.begin(), conditions.end(), [](const ConditionRecord &c) { return c.pass; });
}

CertificateReport verify_certificate(const Matrix &q, const Matrix &l_hat, const Matrix &c_hat,
                                     const ColumnSet &i0, double lambda, bool strict) {
    if (q.rows() != l_hat.rows() || q.cols() != l_hat.cols() || c_hat.rows() != q.rows() ||
        c_hat.cols() != q.cols() || i0.n() != q.cols())
        throw ConfigError("verify_certificate: shape mismatch");

    CertificateReport rep;
    rep.strict = strict;
    rep.gamma  = static_cast<double>(i0.size()) / static_cast<double>(q.cols());

    SvdFactors f = svd(l_hat);
    ProjectorContext ctx;
    ctx.U        = f.U;
    ctx.V        = f.V;
    Matrix uv    = f.U * f.V.transpose();
    Matrix h_hat = normalized_columns(c_hat, i0);

    auto equality = [&](std::string name, double measured) {
        rep.conditions.push_back({std::move(name), measured, Tolerances::certificate_eq,
                                  measured <= Tolerances::certificate_eq});
    };
    auto inequality = [&](std::string name, double measured, double bound) {
        bool pass = strict ? measured < bound - Tolerances::strict_margin : measured <= bound;
        rep.conditions.push_back({std::move(name), measured, bound, pass});
    };

    equality("P_U(Q) = U V^T", (project_col_space(ctx, q) - uv).norm());
    equality("P_V(Q) = U V^T", (project_row_space(ctx, q) - uv).norm());
    equality("P_I0(Q) = lambda H", (project_columns(i0, q) - lambda * h_hat).norm());
    inequality("||P_T_perp(Q)|| <= 1", spectral_norm(project_T_complement(ctx, q)), 1.0);
    inequality("||P_I0c(Q)||_inf,2 <= lambda", norm_inf_2(project_columns_complement(i0, q)), lambda);

    rep.r = f.k;
    if (f.k > 0) {
        // Vbar Vbar^T = V V^T, so psi only needs the row basis of L_hat.
        rep.psi      = std::clamp(sym_spectral(gram_on(f.V, i0)), 0.0, 1.0);
        SvdFactors g = svd(project_columns_complement(i0, l_hat));
        if (g.k > 0) {
            rep.mu                 = incoherence(g.V, i0).mu;
            LambdaInterval li      = lambda_interval(rep.psi, rep.gamma, rep.mu, g.k, q.cols());
            rep.lambda_lo          = li.lo;
            rep.lambda_hi          = li.hi;
            rep.gamma_condition_ok = li.nonempty;
        }
    }
    return rep;
}

OrthogonalConditionResult check_orthogonal_condition(const Matrix &m, const ColumnSet &i0,
                                                     double lambda) {
    require_valid(m, "check_orthogonal_condition");
    if (i0.n() != m.cols())
        throw ConfigError("check_orthogonal_condition: column set size mismatch");
    if (!(lambda > 0))
        throw ConfigError("check_orthogonal_condition: lambda must be positive");

    Matrix l0 = project_columns_complement(i0, m);
    Matrix c0 = project_columns(i0, m);
    const double worst = (c0.transpose() * l0).cwiseAbs().maxCoeff();
    const double tol   = Tolerances::orthogonality * m.squaredNorm();
    if (worst > tol) {
        std::ostringstream os;
        os << "check_orthogonal_condition: outliers not orthogonal to inliers (max |<M_i, M_j>| = "
           << worst << ")";
        throw AssumptionError(os.str(), worst);
    }

    OrthogonalConditionResult out;
    out.h0_norm = spectral_norm(normalized_columns(c0, i0));
    SvdFactors f = svd(l0);
    out.uv_inf2  = f.k > 0 ? norm_inf_2(f.U * f.V.transpose()) : 0.0;
    out.pass     = out.h0_norm <= 1.0 / lambda && out.uv_inf2 <= lambda;
    return out;
}

Matrix neumann_inverse_apply(const Matrix &v_bar, const ColumnSet &i0, const Matrix &x) {
    const Index r = v_bar.cols();
    Matrix g      = gram_on(v_bar, i0);
    if (!(sym_spectral(g) < 1 - Tolerances::psi_one))
        throw InapplicableError("neumann_inverse: psi >= 1");
    Matrix w = x * v_bar;
    Matrix coeff = (Matrix::Identity(r, r) - g).ldlt().solve(w.transpose()).transpose();
    return coeff * v_bar.transpose();
}

double neumann_inverse_check(const Matrix &v_bar, const ColumnSet &i0, Index trials, std::uint64_t seed) {
    if (i0.n() != v_bar.rows())
        throw ConfigError("neumann_inverse_check: column set size does not match Vbar");
    if (!(compute_psi(v_bar, i0) < 1 - Tolerances::psi_one))
        throw InapplicableError("neumann_inverse_check: psi >= 1");
    const Index n = v_bar.rows();
    ColumnSet ic  = i0.complement();
    Rng rng(seed);
    double worst = 0;
    for (Index t = 0; t < trials; ++t) {
        Matrix y(n, n);
        for (Index j = 0; j < n; ++j)
            for (Index i = 0; i < n; ++i)
                y(i, j) = rng.normal();
        Matrix x   = y * v_bar * v_bar.transpose(); // into P_Vbar
        Matrix inv = neumann_inverse_apply(v_bar, i0, x);
        Matrix pv  = inv * v_bar * v_bar.transpose();
        Matrix pic = project_columns(ic, pv);
        Matrix out = pic * v_bar * v_bar.transpose();
        worst      = std::max(worst, (out - x).norm());
    }
    return worst;
}

} // namespace opursuit
