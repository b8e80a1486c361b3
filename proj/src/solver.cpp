#include <opursuit/errors.hpp>
#include <opursuit/solver.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace opursuit {

// ------------------------------------------------------------ mask, options

ColumnEntryMask::ColumnEntryMask(Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed)
    : observed_(std::move(observed)) {
    if (observed_.size() == 0 || observed_.count() == 0)
        throw ConfigError("ColumnEntryMask: at least one entry must be observed");
}

ColumnEntryMask ColumnEntryMask::full(Index p, Index n) {
    return ColumnEntryMask(Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(p, n, true));
}

void SolverOptions::validate() const {
    if (!(lambda > 0) || !std::isfinite(lambda))
        throw ConfigError("SolverOptions: lambda must be positive and finite");
    if (!(eta > 0 && eta < 1))
        throw ConfigError("SolverOptions: eta must lie in (0, 1)");
    if (!(delta > 0) || !std::isfinite(delta))
        throw ConfigError("SolverOptions: delta must be positive");
    if (!(mu0_factor > 0) || !std::isfinite(mu0_factor))
        throw ConfigError("SolverOptions: mu0_factor must be positive");
    if (!(conv_tol > 0))
        throw ConfigError("SolverOptions: conv_tol must be positive");
    if (max_iters < 1)
        throw ConfigError("SolverOptions: max_iters must be at least 1");
    if (oracle) {
        const Matrix &u = oracle->U0;
        if (u.cols() > 0) {
            Matrix g = u.transpose() * u;
            if ((g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() > Tolerances::orthonormal)
                throw ConfigError("SolverOptions: oracle basis U0 is not orthonormal");
        }
    }
}

// ---------------------------------------------------------------- operators

namespace {

/// svt via the singular value decomposition; also returns the output's nuclear norm.
Matrix svt_direct(const Matrix &a, double eps, double &nuclear) {
    SvdFactors f = svd(a, 0.0);
    Vector s     = (f.sigma.array() - eps).max(0.0).matrix();
    nuclear      = s.sum();
    return f.U * s.asDiagonal() * f.V.transpose();
}

/// svt via the eigendecomposition of the smaller Gram matrix. Falls back to
/// the SVD when the threshold is too small relative to sigma_1 for the
/// squared spectrum to resolve it.
Matrix svt_impl(const Matrix &a, double eps, double &nuclear) {
    if (a.size() == 0) {
        nuclear = 0;
        return a;
    }
    if (eps == 0) {
        nuclear = nuclear_norm(a);
        return a;
    }
    const bool tall = a.rows() >= a.cols();
    Matrix gram     = tall ? Matrix(a.transpose() * a) : Matrix(a * a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    if (es.info() != Eigen::Success)
        throw NumericalError("svt: eigendecomposition failed");
    const Vector &ev = es.eigenvalues(); // ascending
    const double smax = std::sqrt(std::max(ev(ev.size() - 1), 0.0));
    if (smax <= eps) {
        nuclear = 0;
        return Matrix::Zero(a.rows(), a.cols());
    }
    if (eps < 1e-6 * smax)
        return svt_direct(a, eps, nuclear);

    Index keep = 0;
    for (Index i = ev.size() - 1; i >= 0 && std::sqrt(std::max(ev(i), 0.0)) > eps; --i)
        ++keep;
    const Index first = ev.size() - keep;
    Matrix w          = es.eigenvectors().rightCols(keep);
    Vector factor(keep);
    nuclear = 0;
    for (Index i = 0; i < keep; ++i) {
        double s  = std::sqrt(ev(first + i));
        factor(i) = 1.0 - eps / s;
        nuclear += s - eps;
    }
    if (tall)
        return ((a * w) * factor.asDiagonal()) * w.transpose();
    return (w * factor.asDiagonal()) * (w.transpose() * a);
}

} // namespace

Matrix svt(const Matrix &a, double eps) {
    if (!(eps >= 0))
        throw ConfigError("svt: eps must be nonnegative");
    double nuclear = 0;
    return svt_impl(a, eps, nuclear);
}

Matrix column_shrink(const Matrix &a, double eps) {
    if (!(eps >= 0))
        throw ConfigError("column_shrink: eps must be nonnegative");
    Matrix out = a;
    for (Index j = 0; j < a.cols(); ++j) {
        double nrm = a.col(j).norm();
        if (nrm <= eps)
            out.col(j).setZero();
        else
            out.col(j) *= 1.0 - eps / nrm;
    }
    return out;
}

double objective(const Matrix &l, const Matrix &c, double lambda) {
    return nuclear_norm(l) + lambda * norm_1_2(c);
}

std::vector<Index> nonzero_columns(const Matrix &c, double scale) {
    const double cut = Tolerances::zero_column * std::max(1.0, scale);
    std::vector<Index> out;
    for (Index j = 0; j < c.cols(); ++j)
        if (c.col(j).norm() > cut)
            out.push_back(j);
    return out;
}

// --------------------------------------------------------------- iteration

namespace {

struct ApgRun {
    const Matrix &m;
    const SolverOptions &opts;
    /// Continuation floor; defaults to delta * mu0.
    std::optional<double> mu_floor;
};

DecompositionResult run_apg(const ApgRun &run) {
    const Matrix &m           = run.m;
    const SolverOptions &opts = run.opts;
    const Index p = m.rows(), n = m.cols();

    Matrix weights;
    if (opts.mask) {
        if (opts.mask->rows() != p || opts.mask->cols() != n)
            throw ConfigError("solve: mask shape does not match M");
        weights = opts.mask->as_weights();
    }
    const Matrix data   = opts.mask ? Matrix(m.cwiseProduct(weights)) : m;
    const double m_norm = data.norm();

    const Matrix *u0 = nullptr;
    std::vector<bool> in_i0;
    if (opts.oracle) {
        if (opts.oracle->U0.rows() != p || opts.oracle->I0.n() != n)
            throw ConfigError("solve: oracle shapes do not match M");
        u0    = &opts.oracle->U0;
        in_i0 = opts.oracle->I0.membership();
    }

    const double mu0    = opts.mu0_factor * m_norm;
    const double mu_bar = run.mu_floor ? *run.mu_floor : opts.delta * mu0;
    const double scale  = std::max(1.0, m_norm);

    DecompositionResult res;
    Matrix l = Matrix::Zero(p, n), l_prev = l;
    Matrix c = Matrix::Zero(p, n), c_prev = c;
    double t = 1, t_prev = 1;
    double mu = std::max(mu0, mu_bar);
    res.objective_history.reserve(static_cast<std::size_t>(std::min<Index>(opts.max_iters, 4096)));

    for (Index k = 0; k < opts.max_iters; ++k) {
        const double beta = (t_prev - 1) / t;
        Matrix yl         = l + beta * (l - l_prev);
        Matrix yc         = c + beta * (c - c_prev);
        Matrix r          = yl + yc - m;
        if (opts.mask)
            r = r.cwiseProduct(weights);
        r *= 0.5;
        Matrix gl = yl - r;
        Matrix gc = yc - r;

        double nuc = 0;
        Matrix l_new;
        if (u0)
            l_new = (*u0) * svt_impl(u0->transpose() * gl, mu / 2, nuc);
        else
            l_new = svt_impl(gl, mu / 2, nuc);
        Matrix c_new = column_shrink(gc, opts.lambda * mu / 2);
        if (u0)
            for (Index j = 0; j < n; ++j)
                if (!in_i0[static_cast<std::size_t>(j)])
                    c_new.col(j).setZero();

        if (!l_new.allFinite() || !c_new.allFinite())
            throw NumericalError("solve: non-finite iterate at iteration " + std::to_string(k), k);

        res.objective_history.push_back(nuc + opts.lambda * norm_1_2(c_new));
        res.mu_history.push_back(mu);
        const double change =
            std::max((l_new - l).norm(), (c_new - c).norm()) / scale;
        const bool at_floor = mu <= mu_bar;

        l_prev = std::move(l);
        l      = std::move(l_new);
        c_prev = std::move(c);
        c      = std::move(c_new);
        t_prev = t;
        t      = (1 + std::sqrt(4 * t * t + 1)) / 2;
        mu     = std::max(opts.eta * mu, mu_bar);
        res.iterations = k + 1;
        if (at_floor && change < opts.conv_tol) {
            res.converged = true;
            break;
        }
    }

    Matrix resid = m - l - c;
    if (opts.mask)
        resid = resid.cwiseProduct(weights);
    res.residual = resid.norm();
    res.L        = std::move(l);
    res.C        = std::move(c);
    return res;
}

void check_input(const Matrix &m, const SolverOptions &opts) {
    require_valid(m, "solve");
    opts.validate();
}

} // namespace

DecompositionResult solve(const Matrix &m, const SolverOptions &opts) {
    check_input(m, opts);
    return run_apg({m, opts, std::nullopt});
}

DecompositionResult solve_partial(const Matrix &m, const ColumnEntryMask &mask, SolverOptions opts) {
    opts.mask = mask;
    return solve(m, opts);
}

DecompositionResult solve_noisy(const Matrix &m, const SolverOptions &opts, double eps_noise) {
    check_input(m, opts);
    if (!(eps_noise >= 0) || !std::isfinite(eps_noise))
        throw ConfigError("solve_noisy: eps_noise must be nonnegative and finite");

    Matrix data = m;
    if (opts.mask)
        data = m.cwiseProduct(opts.mask->as_weights());
    const double m_norm = data.norm();
    if (eps_noise >= m_norm) {
        DecompositionResult res;
        res.L         = Matrix::Zero(m.rows(), m.cols());
        res.C         = res.L;
        res.converged = true;
        res.residual  = m_norm;
        return res;
    }
    if (eps_noise == 0)
        return run_apg({m, opts, std::nullopt});

    // The residual of the penalized problem grows with rho (roughly
    // proportionally): secant steps in log space, safeguarded by a bracket.
    const double lo_band = 0.5 * eps_noise, hi_band = 1.5 * eps_noise;
    double lo = 0, hi = std::numeric_limits<double>::infinity();
    double rho = eps_noise;
    std::optional<DecompositionResult> best, last;
    double best_gap = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 40; ++it) {
        last              = run_apg({m, opts, rho});
        const double res  = last->residual;
        const double gap  = std::abs(std::log(std::max(res, 1e-300) / eps_noise));
        if (res >= lo_band && res <= hi_band && gap < best_gap) {
            best_gap = gap;
            best     = last;
        }
        if (gap < std::log(1.05))
            break;
        (res < eps_noise ? lo : hi) = rho;
        double next = res > 0 ? rho * eps_noise / res : rho * 1e3;
        next        = std::clamp(next, rho * 1e-3, rho * 1e3);
        if (next <= lo || next >= hi)
            next = std::sqrt(lo * hi);
        if (hi / lo < 1 + 1e-12)
            break;
        rho = next;
    }
    if (!best) {
        last->residual_target_missed = true;
        return *last;
    }
    return *best;
}

// --------------------------------------------------------- oracle problem

namespace {

/// Exact minimizer of the oracle problem when it is smooth:
///   x_j free for j in I0, X = [U0^T M_j (j not in I0), x_j (j in I0)],
///   f(x) = ||X||_* + lambda sum_j sqrt(a_j^2 + ||b_j - x_j||^2),
/// where a_j = ||P_U0perp M_j|| > 0 and b_j = U0^T M_j.
class OracleRefiner {
  public:
    OracleRefiner(const Matrix &m, const Matrix &u0, const ColumnSet &i0, double lambda)
        : u0_(u0), lambda_(lambda), out_(i0.indices()) {
        x_fixed_ = u0.transpose() * m;
        b_.resize(u0.cols(), i0.size());
        a_.resize(i0.size());
        for (Index q = 0; q < i0.size(); ++q) {
            Index j  = out_[static_cast<std::size_t>(q)];
            b_.col(q) = x_fixed_.col(j);
            a_(q)    = (m.col(j) - u0 * b_.col(q)).norm();
        }
    }

    const Vector &a() const { return a_; }

    Matrix assemble(const Matrix &x) const {
        Matrix full = x_fixed_;
        for (Index q = 0; q < x.cols(); ++q)
            full.col(out_[static_cast<std::size_t>(q)]) = x.col(q);
        return full;
    }

    double value(const Matrix &x) const {
        Matrix full = assemble(x);
        Eigen::SelfAdjointEigenSolver<Matrix> es(full * full.transpose(), Eigen::EigenvaluesOnly);
        double f = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
        for (Index q = 0; q < x.cols(); ++q)
            f += lambda_ * std::sqrt(a_(q) * a_(q) + (b_.col(q) - x.col(q)).squaredNorm());
        return f;
    }

    /// Gradient; the nuclear part is (X X^T)^{-1/2} X on the free columns.
    Matrix gradient(const Matrix &x) const {
        Matrix full = assemble(x);
        Eigen::SelfAdjointEigenSolver<Matrix> es(full * full.transpose());
        Vector inv_sqrt = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
        Matrix w        = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
        Matrix g(x.rows(), x.cols());
        for (Index q = 0; q < x.cols(); ++q) {
            Vector d  = b_.col(q) - x.col(q);
            double cn = std::sqrt(a_(q) * a_(q) + d.squaredNorm());
            g.col(q)  = w * x.col(q) - lambda_ * d / cn;
        }
        return g;
    }

    /// Damped Newton with a finite-difference Hessian. Returns false if the
    /// gradient could not be driven below `gtol`.
    bool minimize(Matrix &x, double gtol) const {
        const Index r = x.rows(), k = x.cols(), d = r * k;
        auto flat = [&](const Matrix &mtx) { return Eigen::Map<const Vector>(mtx.data(), d); };
        Matrix g  = gradient(x);
        double f  = value(x);
        for (int it = 0; it < 100; ++it) {
            const double gn = g.cwiseAbs().maxCoeff();
            if (gn <= gtol)
                return true;
            const double h = 1e-6 * std::max(1.0, x.cwiseAbs().maxCoeff());
            Matrix hess(d, d);
            for (Index i = 0; i < d; ++i) {
                Matrix xp = x, xm = x;
                xp.data()[i] += h;
                xm.data()[i] -= h;
                hess.col(i) = (flat(gradient(xp)) - flat(gradient(xm))) / (2 * h);
            }
            hess = 0.5 * (hess + hess.transpose()).eval();
            Vector gv = flat(g);
            Vector step;
            double tau = 0;
            for (int tries = 0; tries < 30; ++tries) {
                Eigen::LLT<Matrix> llt(hess + tau * Matrix::Identity(d, d));
                if (llt.info() == Eigen::Success) {
                    step = -llt.solve(gv);
                    if (step.allFinite() && step.dot(gv) < 0)
                        break;
                }
                tau = tau == 0 ? 1e-10 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff()) : tau * 10;
                step.resize(0);
            }
            if (step.size() == 0)
                return false;
            double alpha = 1;
            bool moved   = false;
            for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
                Matrix xn = x;
                Eigen::Map<Vector>(xn.data(), d) += alpha * step;
                double fn = value(xn);
                Matrix gn_mat = gradient(xn);
                double gnn    = gn_mat.cwiseAbs().maxCoeff();
                if (fn <= f + 1e-4 * alpha * step.dot(gv) || gnn < 0.9 * gn) {
                    x     = std::move(xn);
                    f     = fn;
                    g     = std::move(gn_mat);
                    moved = true;
                    break;
                }
            }
            if (!moved)
                return g.cwiseAbs().maxCoeff() <= gtol;
        }
        return g.cwiseAbs().maxCoeff() <= gtol;
    }

  private:
    const Matrix &u0_;
    double lambda_;
    std::vector<Index> out_;
    Matrix x_fixed_;
    Matrix b_;
    Vector a_;
};

} // namespace

DecompositionResult solve_oracle(const Matrix &m, const Matrix &u0, const ColumnSet &i0,
                                 SolverOptions opts) {
    if (u0.rows() != m.rows() || i0.n() != m.cols())
        throw ConfigError("solve_oracle: U0 / I0 shapes do not match M");
    opts.oracle = OracleConstraint{u0, i0};
    DecompositionResult res = solve(m, opts);
    if (opts.mask || u0.cols() == 0)
        return res;

    // Refinement applies when P_{I0^c}(M) lies in span(U0), U0^T P_{I0^c}(M)
    // has full row rank, and no outlier lies in span(U0).
    const double scale = std::max(1.0, m.norm());
    ColumnSet inl      = i0.complement();
    Matrix m_in        = Matrix::Zero(m.rows(), m.cols());
    for (Index j : inl.indices())
        m_in.col(j) = m.col(j);
    Matrix proj_in = u0.transpose() * m_in;
    if ((m_in - u0 * proj_in).norm() > 1e-10 * scale)
        return res;
    Vector sv = singular_values(proj_in);
    if (sv.size() < u0.cols() || sv(u0.cols() - 1) <= 1e-8 * std::max(sv(0), 1e-300))
        return res;

    OracleRefiner ref(m, u0, i0, opts.lambda);
    Matrix l_ref, c_ref;
    if (i0.empty()) {
        l_ref = u0 * proj_in;
        c_ref = Matrix::Zero(m.rows(), m.cols());
    } else {
        if (ref.a().minCoeff() <= 1e-10 * scale)
            return res;
        Matrix x(u0.cols(), i0.size());
        for (Index q = 0; q < i0.size(); ++q)
            x.col(q) = u0.transpose() * res.L.col(i0.indices()[static_cast<std::size_t>(q)]);
        if (!ref.minimize(x, 1e-12))
            return res;
        l_ref = u0 * ref.assemble(x);
        c_ref = Matrix::Zero(m.rows(), m.cols());
        for (Index j : i0.indices())
            c_ref.col(j) = m.col(j) - l_ref.col(j);
    }
    if (!l_ref.allFinite() || !c_ref.allFinite())
        return res;
    res.L        = std::move(l_ref);
    res.C        = std::move(c_ref);
    res.residual = (m - res.L - res.C).norm();
    res.refined  = true;
    return res;
}

} // namespace opursuit
