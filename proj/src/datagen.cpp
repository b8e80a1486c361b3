#include <opursuit/datagen.hpp>
#include <opursuit/errors.hpp>
#include <opursuit/random.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>

namespace opursuit {

std::string to_string(OutlierMode mode) {
    return mode == OutlierMode::random ? "random" : "identical";
}

OutlierMode outlier_mode_from_string(const std::string &s) {
    if (s == "random")
        return OutlierMode::random;
    if (s == "identical")
        return OutlierMode::identical;
    throw ConfigError("unknown outlier mode '" + s + "' (expected random|identical)");
}

std::string to_string(RowBasis basis) {
    return basis == RowBasis::gaussian ? "gaussian" : "spread";
}

RowBasis row_basis_from_string(const std::string &s) {
    if (s == "gaussian")
        return RowBasis::gaussian;
    if (s == "spread")
        return RowBasis::spread;
    throw ConfigError("unknown row basis '" + s + "' (expected gaussian|spread)");
}

void InstanceSpec::validate() const {
    if (p < 1 || n < 1)
        throw ConfigError("InstanceSpec: p and n must be at least 1");
    if (outlier_count < 0 || outlier_count >= n)
        throw ConfigError("InstanceSpec: outlier_count must lie in [0, n)");
    if (r < 1 || r > std::min(p, n - outlier_count))
        throw ConfigError("InstanceSpec: r must lie in [1, min(p, n - outlier_count)]");
    if (!(noise_sigma >= 0) || !std::isfinite(noise_sigma))
        throw ConfigError("InstanceSpec: noise_sigma must be nonnegative");
    if (!(observe_prob > 0 && observe_prob <= 1))
        throw ConfigError("InstanceSpec: observe_prob must lie in (0, 1]");
    if (row_basis == RowBasis::spread && 2 * (r / 2) >= n - outlier_count)
        throw ConfigError("InstanceSpec: spread row basis needs n - outlier_count > 2 * floor(r / 2)");
    if (orthogonal_outliers && r >= p && outlier_count > 0)
        throw ConfigError("InstanceSpec: orthogonal outliers need r < p");
}

namespace {

Matrix gaussian(Rng &rng, Index rows, Index cols) {
    Matrix a(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i)
            a(i, j) = rng.normal();
    return a;
}

/// Columns: a constant (when r is odd) then cos/sin pairs at frequencies
/// 1, 2, ... with one uniform phase per pair. Every row has squared norm r.
Matrix spread_rows(Rng &rng, Index m, Index r) {
    Matrix b(m, r);
    Index col = 0;
    if (r % 2 == 1)
        b.col(col++).setOnes();
    for (Index f = 1; col < r; ++f) {
        const double phase = 2 * std::numbers::pi * rng.uniform();
        for (Index j = 0; j < m; ++j) {
            const double arg = 2 * std::numbers::pi * static_cast<double>(f * j) / static_cast<double>(m) + phase;
            b(j, col)     = std::numbers::sqrt2 * std::cos(arg);
            b(j, col + 1) = std::numbers::sqrt2 * std::sin(arg);
        }
        col += 2;
    }
    return b;
}

Matrix orthonormal_basis(const Matrix &a) {
    Eigen::HouseholderQR<Matrix> qr(a);
    return qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
}

} // namespace

Instance generate(const InstanceSpec &spec) {
    spec.validate();
    const Index p = spec.p, n = spec.n, r = spec.r, k = spec.outlier_count;
    Rng rng(spec.seed);

    Matrix a = gaussian(rng, p, r);
    Matrix b = spec.row_basis == RowBasis::gaussian ? gaussian(rng, n - k, r) : spread_rows(rng, n - k, r);
    Matrix u0 = orthonormal_basis(a);

    Matrix out(p, k);
    if (spec.mode == OutlierMode::random) {
        out = gaussian(rng, p, k);
    } else if (k > 0) {
        Vector v = gaussian(rng, p, 1).col(0);
        out      = v.replicate(1, k);
    }
    if (spec.orthogonal_outliers && k > 0) {
        out -= u0 * (u0.transpose() * out);
        if (out.colwise().norm().minCoeff() <= 1e-12)
            throw NumericalError("generate: outlier vanished after orthogonal projection");
    }

    Matrix noise;
    if (spec.noise_sigma > 0)
        noise = spec.noise_sigma * gaussian(rng, p, n);

    Instance inst;
    if (spec.observe_prob < 1) {
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> obs(p, n);
        for (Index j = 0; j < n; ++j)
            for (Index i = 0; i < p; ++i)
                obs(i, j) = rng.uniform() < spec.observe_prob;
        inst.mask = ColumnEntryMask(std::move(obs));
    }

    std::vector<Index> positions;
    if (spec.shuffle_outliers) {
        std::vector<Index> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), Index{0});
        for (Index i = n - 1; i > 0; --i)
            std::swap(perm[static_cast<std::size_t>(i)],
                      perm[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
        positions.assign(perm.begin(), perm.begin() + k);
    } else {
        for (Index j = n - k; j < n; ++j)
            positions.push_back(j);
    }
    ColumnSet i0(positions, n);

    GroundTruth &t = inst.truth;
    t.U0    = u0;
    t.I0    = i0;
    t.r     = r;
    t.gamma = static_cast<double>(k) / static_cast<double>(n);
    t.L0    = Matrix::Zero(p, n);
    t.C0    = Matrix::Zero(p, n);
    const Matrix inl = a * b.transpose();
    Index in_col = 0, out_col = 0;
    for (Index j = 0; j < n; ++j) {
        if (i0.contains(j))
            t.C0.col(j) = out.col(out_col++);
        else
            t.L0.col(j) = inl.col(in_col++);
    }
    inst.M = t.L0 + t.C0;
    if (spec.noise_sigma > 0)
        inst.M += noise;
    return inst;
}

Instance scaled_outlier_instance(const InstanceSpec &spec, double s, double sigma) {
    if (!(s > 0) || !std::isfinite(s))
        throw ConfigError("scaled_outlier_instance: s must be positive");
    if (!(sigma >= 0) || !std::isfinite(sigma))
        throw ConfigError("scaled_outlier_instance: sigma must be nonnegative");
    InstanceSpec base = spec;
    base.noise_sigma  = 0;
    Instance inst     = generate(base);
    GroundTruth &t    = inst.truth;

    Rng rng(derive_seed(spec.seed, {0x5ca1edULL}));
    for (Index j : t.I0.indices()) {
        Vector perp = t.C0.col(j) - t.U0 * (t.U0.transpose() * t.C0.col(j));
        double d    = perp.norm();
        if (d <= 1e-12 * std::max(1.0, t.C0.col(j).norm()))
            throw NumericalError("scaled_outlier_instance: outlier lies in span(U0)");
        t.C0.col(j) *= s / d;
    }
    inst.M = t.L0 + t.C0;
    if (sigma > 0) {
        const ColumnSet inliers = t.I0.complement();
        for (Index j : inliers.indices()) {
            Vector g = gaussian(rng, spec.p, 1).col(0);
            inst.M.col(j) += (sigma / g.norm()) * g;
        }
    }
    return inst;
}

bool success_check(const DecompositionResult &result, const GroundTruth &truth, double tol) {
    const Matrix &l = result.L;
    const Matrix &c = result.C;
    if (l.rows() != truth.L0.rows() || l.cols() != truth.L0.cols() || c.rows() != l.rows() ||
        c.cols() != l.cols())
        throw ConfigError("success_check: shape mismatch");

    if (truth.r > 0) {
        SvdFactors f = svd(l, 0.0);
        if (f.k < truth.r)
            return false;
        if (subspace_distance(f.U.leftCols(truth.r), truth.U0) > tol)
            return false;
    }

    const double l_norm = l.norm();
    Matrix perp         = l - truth.U0 * (truth.U0.transpose() * l);
    if (perp.norm() > tol * l_norm)
        return false;

    double in_max = 0, out_max = 0;
    for (Index j = 0; j < c.cols(); ++j) {
        double v = c.col(j).norm();
        if (truth.I0.contains(j))
            in_max = std::max(in_max, v);
        else
            out_max = std::max(out_max, v);
    }
    return out_max <= tol * std::max(1.0, in_max);
}

bool identify_outliers_threshold(const Matrix &c, const ColumnSet &i0) {
    if (i0.n() != c.cols())
        throw ConfigError("identify_outliers_threshold: column set size mismatch");
    double in_min = std::numeric_limits<double>::infinity(), out_max = 0;
    for (Index j = 0; j < c.cols(); ++j) {
        double v = c.col(j).norm();
        if (i0.contains(j))
            in_min = std::min(in_min, v);
        else
            out_max = std::max(out_max, v);
    }
    return in_min > out_max;
}

Matrix true_row_basis(const GroundTruth &truth) {
    SvdFactors f = svd(truth.L0);
    if (f.k < truth.r)
        throw NumericalError("true_row_basis: L0 has rank below r");
    return f.V.leftCols(truth.r);
}

} // namespace opursuit
