#include "certified.hpp"
#include "oracles.hpp"

#include <opursuit/certificate.hpp>
#include <opursuit/datagen.hpp>
#include <opursuit/errors.hpp>

#include <doctest.h>

using namespace opursuit;

namespace {

Instance orthogonal_instance(std::uint64_t seed, Index r, Index k, OutlierMode mode, Index n = 60) {
    InstanceSpec s;
    s.p                   = n;
    s.n                   = n;
    s.r                   = r;
    s.outlier_count       = k;
    s.mode                = mode;
    s.row_basis           = RowBasis::spread;
    s.orthogonal_outliers = true;
    s.seed                = seed;
    return generate(s);
}

} // namespace

TEST_CASE("incoherence of a coordinate-aligned column") {
    const Index n = 40;
    ColumnSet i0({0, 1, 2, 3}, n);
    Matrix v   = Matrix::Zero(n, 1);
    v(10, 0)   = 1;
    auto st    = incoherence(v, i0);
    const double gamma = 0.1;
    CHECK(st.gamma == doctest::Approx(gamma));
    CHECK(st.mu == doctest::Approx((1 - gamma) * n / 1.0));
}

TEST_CASE("incoherence of a flat column is 1") {
    const Index n = 40;
    ColumnSet i0({5, 6, 7, 8}, n);
    Matrix v = Matrix::Zero(n, 1);
    for (Index i = 0; i < n; ++i)
        if (!i0.contains(i))
            v(i, 0) = (i % 2 ? 1.0 : -1.0) / std::sqrt(36.0);
    CHECK(incoherence(v, i0).mu == doctest::Approx(1));
}

TEST_CASE("incoherence against direct row-norm maximum") {
    Rng rng(1);
    Matrix v   = oracle::random_orthonormal(rng, 50, 3);
    ColumnSet i0({4, 9, 33}, 50);
    double best = 0;
    for (Index i = 0; i < 50; ++i)
        if (i != 4 && i != 9 && i != 33)
            best = std::max(best, v(i, 0) * v(i, 0) + v(i, 1) * v(i, 1) + v(i, 2) * v(i, 2));
    CHECK(std::abs(incoherence(v, i0).mu - 47.0 / 3.0 * best) < 1e-12);
    CHECK_THROWS_AS(incoherence(Matrix(50, 0), i0), ConfigError);
}

TEST_CASE("gamma_condition boundaries") {
    CHECK(gamma_condition(9.0 / 130.0, 1, 1, GammaConstant::noiseless));
    CHECK_FALSE(gamma_condition(0.08, 1, 1, GammaConstant::noiseless));
    CHECK(gamma_condition(0, 50, 7, GammaConstant::noiseless));
    CHECK(gamma_condition(0, 50, 7, GammaConstant::noisy));
    CHECK(gamma_condition(9.0 / 1033.0, 1, 1, GammaConstant::noisy));
    CHECK_FALSE(gamma_condition(0.01, 1, 1, GammaConstant::noisy));
}

TEST_CASE("lambda formulas") {
    CHECK(default_lambda(9.0 / 100.0, 100) == doctest::Approx(1.0 / 7.0));
    CHECK(default_lambda(25.0 / 400.0, 400) == doctest::Approx(3.0 / 35.0));
    CHECK(default_lambda_noisy(1, 1, 196) == doctest::Approx(std::sqrt(1033.0) / 196.0));
    CHECK(corollary_lambda(1, 3, 100) == doctest::Approx(0.2));
    CHECK_THROWS_AS(default_lambda(0, 100), ConfigError);
}

TEST_CASE("compute_psi edge cases") {
    Rng rng(2);
    Matrix v = oracle::random_orthonormal(rng, 20, 3);
    CHECK(compute_psi(v, ColumnSet::none(20)) == 0);
    CHECK(compute_psi(v, ColumnSet::all(20)) == doctest::Approx(1));
    ColumnSet i0({1, 5}, 20);
    Matrix g = Matrix::Zero(3, 3);
    for (Index j : i0.indices())
        g += v.row(j).transpose() * v.row(j);
    CHECK(std::abs(compute_psi(v, i0) - oracle::jacobi_eigenvalues(g)(0)) < 1e-12);
}

TEST_CASE("lambda interval at psi = 1/4 with the gamma condition tight") {
    // gamma / (1 - gamma) = 9 / (121 mu r): both ends collapse onto 3 / (7 sqrt(gamma n))
    const double mu = 1.3;
    const Index r = 2, n = 400;
    const double ratio = 9.0 / (121.0 * mu * r);
    const double gamma = ratio / (1 + ratio);
    LambdaInterval li  = lambda_interval(0.25, gamma, mu, r, n);
    CHECK(li.nonempty);
    const double paper = 3.0 / (7.0 * std::sqrt(gamma * n));
    CHECK(li.lo == doctest::Approx(paper).epsilon(1e-9));
    CHECK(li.hi == doctest::Approx(paper).epsilon(1e-9));

    // below the corner the interval opens up and holds that value strictly
    LambdaInterval open = lambda_interval(0.2, gamma, mu, r, n);
    CHECK(open.nonempty);
    CHECK(open.lo < paper);
    CHECK(paper < open.hi);
}

TEST_CASE("lambda interval limits") {
    LambdaInterval g0 = lambda_interval(0.1, 0, 2, 3, 100);
    CHECK(g0.nonempty);
    CHECK(std::isinf(g0.hi));
    CHECK(g0.lo == doctest::Approx(std::sqrt(6.0 / 100.0)));
    CHECK(g0.contains(5.0));

    LambdaInterval bad = lambda_interval(0.9, 0.2, 2, 3, 100);
    CHECK_FALSE(bad.nonempty);
    CHECK_FALSE(bad.contains(0.1));
    CHECK_FALSE(lambda_interval(1.0, 0.01, 1, 1, 100).nonempty);

    // the nonempty flag follows the closed-form condition
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        const double psi = 0.5 * rng.uniform(), gamma = 0.1 * rng.uniform(), mu = 1 + 3 * rng.uniform();
        const Index r        = 1 + static_cast<Index>(rng.below(3));
        LambdaInterval li    = lambda_interval(psi, gamma, mu, r, 200);
        const bool expected  = gamma / (1 - gamma) <= (1 - psi) * (1 - psi) / ((3 - psi) * (3 - psi) * mu * r);
        CHECK(li.nonempty == expected);
        if (li.nonempty)
            CHECK(li.lo <= li.hi);
    }
}

TEST_CASE("certificate on an orthogonal instance is U0 V0^T + lambda H0") {
    Instance in         = orthogonal_instance(4, 2, 4, OutlierMode::random);
    const GroundTruth &t = in.truth;
    const double mu     = incoherence(true_row_basis(t), t.I0).mu;
    const double lambda = corollary_lambda(mu, 2, 60);
    DualCertificate cert = build_certificate(in.M, t.U0, t.I0, lambda);
    CHECK(cert.psi < 1e-12);

    SvdFactors f = svd(t.L0);
    Matrix h0    = Matrix::Zero(60, 60);
    for (Index j : t.I0.indices())
        h0.col(j) = t.C0.col(j) / t.C0.col(j).norm();
    CHECK((cert.Q - (f.U * f.V.transpose() + lambda * h0)).norm() < 1e-6);

    CertificateReport rep = verify_certificate(cert.Q, cert.L_hat, cert.C_hat, t.I0, lambda, false);
    CHECK(rep.all_pass());
    CHECK(rep.conditions.size() == 5);
}

TEST_CASE("certificate with no outliers is U0 V0^T") {
    InstanceSpec s;
    s.p = s.n         = 30;
    s.r               = 2;
    s.outlier_count   = 0;
    s.seed            = 5;
    Instance in       = generate(s);
    DualCertificate c = build_certificate(in.M, in.truth.U0, in.truth.I0, 0.4);
    SvdFactors f      = svd(in.M);
    CHECK((c.Q - f.U * f.V.transpose()).norm() < 1e-8);
    CHECK(c.psi == 0);
}

TEST_CASE("certificate on random recoverable instances") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        certified::Case c = certified::make(100 + seed, seed % 2 ? 2 : 1, 3);
        const GroundTruth &t = c.inst.truth;
        INFO("seed " << seed);
        REQUIRE(c.report.gamma_condition_ok);
        CHECK(c.report.lambda_lo <= c.lambda);
        CHECK(c.lambda <= c.report.lambda_hi);
        CHECK(c.report.all_pass());
        CHECK(c.cert.psi <= c.lambda * c.lambda * 3 + 1e-12);
        CHECK(c.report.psi == doctest::Approx(c.cert.psi).epsilon(1e-8));

        // incoherence of Vbar on the inliers does not exceed that of V0
        CHECK(incoherence(c.cert.V_bar, t.I0).mu <= c.mu_truth + 1e-9);

        // U0 P_I0(Vbar^T) = lambda P_U0(H)
        Matrix lhs = oracle::keep_columns(Matrix(t.U0 * c.cert.V_bar.transpose()), t.I0.membership());
        Matrix rhs = c.lambda * t.U0 * (t.U0.transpose() * c.cert.H_hat);
        CHECK((lhs - rhs).norm() < 1e-6);

        // P_I0 P_Vbar P_I0 contracts by psi
        Rng rng(seed);
        Matrix pv = c.cert.V_bar * c.cert.V_bar.transpose();
        for (int k = 0; k < 20; ++k) {
            Matrix x = oracle::gaussian(rng, 60, 60);
            Matrix y = oracle::keep_columns(Matrix(oracle::keep_columns(x, t.I0.membership()) * pv), t.I0.membership());
            CHECK(y.norm() <= c.cert.psi * x.norm() + 1e-12);
        }
    }
}

TEST_CASE("equality conditions hold even when lambda is out of range") {
    certified::Case c = certified::make(200, 2, 3);
    const GroundTruth &t = c.inst.truth;
    for (double lambda : {0.05, 2.0}) {
        SolverOptions o;
        o.lambda              = lambda;
        DecompositionResult r = solve_oracle(c.inst.M, t.U0, t.I0, o);
        DualCertificate cert  = build_certificate_from(r.L, r.C, t.U0, t.I0, lambda);
        CertificateReport rep = verify_certificate(cert.Q, r.L, r.C, t.I0, lambda, false);
        for (int k = 0; k < 3; ++k)
            CHECK(rep.conditions[static_cast<std::size_t>(k)].pass);
    }
}

TEST_CASE("verify_certificate detects violations") {
    certified::Case c = certified::make(300, 2, 2);
    const GroundTruth &t = c.inst.truth;
    REQUIRE(c.report.all_pass());

    CertificateReport zero = verify_certificate(Matrix::Zero(60, 60), c.oracle.L, c.oracle.C, t.I0, c.lambda, false);
    CHECK_FALSE(zero.conditions[0].pass);
    CHECK(zero.conditions[0].measured == doctest::Approx(std::sqrt(2.0)));
    CHECK_FALSE(zero.all_pass());

    Matrix q        = c.cert.Q;
    const Index col = t.I0.complement().indices().front();
    Vector e        = Vector::Zero(60);
    e(0)            = 1;
    q.col(col) += 2 * c.lambda * e;
    CertificateReport bad = verify_certificate(q, c.oracle.L, c.oracle.C, t.I0, c.lambda, false);
    CHECK_FALSE(bad.conditions[4].pass);
    CHECK_FALSE(bad.all_pass());

    // strict mode: an inequality at the bound fails
    CertificateReport strict = verify_certificate(c.cert.Q, c.oracle.L, c.oracle.C, t.I0, c.lambda, true);
    CHECK(strict.strict);
    CHECK(strict.all_pass());
    CertificateReport tight = verify_certificate(c.cert.Q, c.oracle.L, c.oracle.C, t.I0,
                                                 strict.conditions[4].measured, true);
    CHECK_FALSE(tight.conditions[4].pass);
}

TEST_CASE("build_certificate with psi = 1 is inapplicable") {
    Rng rng(6);
    Matrix u = oracle::random_orthonormal(rng, 10, 1);
    // the only nonzero column of L lies in I0, so Vbar is supported on I0
    Matrix l  = Matrix::Zero(10, 8);
    l.col(3)  = u.col(0);
    Matrix c  = Matrix::Zero(10, 8);
    CHECK_THROWS_AS(build_certificate_from(l, c, u, ColumnSet({3}, 8), 0.5), InapplicableError);
    CHECK_THROWS_AS(neumann_inverse_check(Matrix::Identity(4, 1), ColumnSet({0}, 4), 2), InapplicableError);
}

TEST_CASE("orthogonal case: identical outliers") {
    Instance in          = orthogonal_instance(7, 2, 6, OutlierMode::identical);
    const GroundTruth &t = in.truth;
    OrthogonalConditionResult res = check_orthogonal_condition(in.M, t.I0, 0.3);
    CHECK(res.h0_norm == doctest::Approx(std::sqrt(6.0)));
    const double mu = incoherence(true_row_basis(t), t.I0).mu;
    CHECK(res.uv_inf2 == doctest::Approx(std::sqrt(mu * 2 / ((1 - t.gamma) * 60))));
}

TEST_CASE("orthogonal case: corollary lambda passes iff gamma/(1-gamma) <= 1/(mu r)") {
    // spread basis: mu = 1, r = 2, n = 60 -> boundary at 20 outliers
    for (Index k : {4, 12, 19, 21, 25}) {
        Instance in          = orthogonal_instance(8 + static_cast<std::uint64_t>(k), 2, k, OutlierMode::identical);
        const GroundTruth &t = in.truth;
        const double mu      = incoherence(true_row_basis(t), t.I0).mu;
        CHECK(mu == doctest::Approx(1));
        const double lambda = corollary_lambda(mu, 2, 60);
        const bool expected = t.gamma / (1 - t.gamma) <= 1 / (mu * 2);
        INFO("k = " << k);
        CHECK(check_orthogonal_condition(in.M, t.I0, lambda).pass == expected);
    }
}

TEST_CASE("orthogonal condition rejects non-orthogonal outliers") {
    InstanceSpec s;
    s.p = s.n       = 40;
    s.outlier_count = 3;
    s.seed          = 9;
    Instance in     = generate(s);
    CHECK_THROWS_AS(check_orthogonal_condition(in.M, in.truth.I0, 0.3), AssumptionError);
    try {
        check_orthogonal_condition(in.M, in.truth.I0, 0.3);
    } catch (const AssumptionError &e) {
        CHECK(e.measured() > 0);
    }
}

TEST_CASE("neumann inverse") {
    Rng rng(10);
    Matrix v = oracle::random_orthonormal(rng, 30, 2);
    CHECK(neumann_inverse_check(v, ColumnSet::none(30), 5) < 1e-12);

    // choose I0 so that psi is near 0.5
    std::vector<Index> idx;
    ColumnSet i0;
    for (Index j = 0; j < 30; ++j) {
        idx.push_back(j);
        i0 = ColumnSet(idx, 30);
        if (compute_psi(v, i0) >= 0.45)
            break;
    }
    const double psi = compute_psi(v, i0);
    CHECK(psi > 0.4);
    CHECK(psi < 0.8);
    CHECK(neumann_inverse_check(v, i0, 20, 3) < 1e-8);

    const std::vector<bool> in_i0 = i0.membership();
    for (int t = 0; t < 5; ++t) {
        Matrix x = oracle::gaussian(rng, 30, 30) * v * v.transpose();
        CHECK((neumann_inverse_apply(v, i0, x) - oracle::neumann_series(v, in_i0, x)).norm() < 1e-8 * x.norm());
    }

    // inputs orthogonal to P_Vbar map to zero
    Matrix y     = oracle::gaussian(rng, 30, 30);
    Matrix y_off = y - y * v * v.transpose();
    CHECK(neumann_inverse_apply(v, i0, y_off).norm() < 1e-10);
}
