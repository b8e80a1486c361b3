#pragma once

// Synthetic instances M = L0 + C0 (+ noise) and recovery scoring.

#include <opursuit/linalg.hpp>
#include <opursuit/solver.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace opursuit {

enum class OutlierMode { random, identical };

/// Row factor B of the inlier block A B^T.
enum class RowBasis {
    gaussian, ///< i.i.d. N(0,1) entries
    spread,   ///< constant and cos/sin columns with random phases (mu = 1)
};

std::string to_string(OutlierMode mode);
OutlierMode outlier_mode_from_string(const std::string &s);
std::string to_string(RowBasis basis);
RowBasis row_basis_from_string(const std::string &s);

struct InstanceSpec {
    Index p = 100, n = 100;
    Index r = 2;
    Index outlier_count   = 5;
    OutlierMode mode      = OutlierMode::random;
    double noise_sigma    = 0;
    double observe_prob   = 1;
    std::uint64_t seed    = 0;
    RowBasis row_basis    = RowBasis::gaussian;
    /// Project outlier columns onto the orthogonal complement of span(U0).
    bool orthogonal_outliers = false;
    /// Place outliers at seeded random positions instead of the last columns.
    bool shuffle_outliers = false;

    /// Throws ConfigError on invalid values.
    void validate() const;
};

struct GroundTruth {
    Matrix U0;
    ColumnSet I0;
    Index r = 0;
    double gamma = 0;
    Matrix L0;
    Matrix C0;
};

struct Instance {
    Matrix M;
    GroundTruth truth;
    std::optional<ColumnEntryMask> mask;
};

/// Draw order from one stream seeded by spec.seed: A (p x r, column-major),
/// B, outlier columns, noise, mask, outlier positions.
Instance generate(const InstanceSpec &spec);

/// Outliers rescaled so their distance to span(U0) is exactly s; each inlier
/// perturbed by a random vector of norm exactly sigma.
Instance scaled_outlier_instance(const InstanceSpec &spec, double s, double sigma);

/// Recovery: subspace distance of the rank-r part of L, column support of C,
/// and L inside span(U0).
bool success_check(const DecompositionResult &result, const GroundTruth &truth,
                   double tol = Tolerances::success);

/// True iff min over I0 of the column norms of C exceeds the max over I0^c.
bool identify_outliers_threshold(const Matrix &c, const ColumnSet &i0);

/// Row basis of the inlier block of L0.
Matrix true_row_basis(const GroundTruth &truth);

} // namespace opursuit
