#pragma once

// Success-rate sweeps over synthetic instances.

#include <opursuit/datagen.hpp>
#include <opursuit/solver.hpp>

#include <string>
#include <utility>
#include <vector>

namespace opursuit {

/// How lambda is chosen per instance.
enum class LambdaRule {
    theorem,   ///< 3 / (7 sqrt(gamma n)); 1 when there are no outliers
    corollary, ///< sqrt((mu r + 1) / n), mu measured on the ground truth
    fixed,     ///< ExperimentOptions::lambda
};

std::string to_string(LambdaRule rule);
LambdaRule lambda_rule_from_string(const std::string &s);

struct ExperimentOptions {
    LambdaRule rule = LambdaRule::theorem;
    double lambda   = 0; ///< used by LambdaRule::fixed
    double tol      = Tolerances::success;
    /// Solver settings; lambda is overwritten per instance.
    SolverOptions solver;
    /// 0 = std::thread::hardware_concurrency().
    unsigned threads = 0;
};

/// Lambda for one instance under `rule`.
double choose_lambda(const GroundTruth &truth, const ExperimentOptions &opts);

/// hash(seed, r, outlier_count, trial).
std::uint64_t cell_seed(std::uint64_t seed, Index r, Index outlier_count, Index trial);

struct ExperimentGrid {
    std::vector<Index> r_values;
    std::vector<Index> outlier_counts;
    Matrix rates;     ///< |r_values| x |outlier_counts|
    Eigen::MatrixXi successes;
    Eigen::MatrixXi failures; ///< solver errors, counted as unsuccessful
    Index trials_per_cell = 0;
    InstanceSpec config;
};

ExperimentGrid phase_transition(const InstanceSpec &tmpl, const std::vector<Index> &r_values,
                                const std::vector<Index> &outlier_counts, Index trials,
                                const ExperimentOptions &opts = {});

struct SweepPoint {
    double x = 0; ///< sigma / s, or observation probability
    double rate = 0;
};

/// Identification rate (threshold separability of the column norms of C).
std::vector<SweepPoint> noise_sweep(const InstanceSpec &tmpl, double s,
                                    const std::vector<double> &sigma_values, Index trials,
                                    const ExperimentOptions &opts = {});

/// Success rate of solve_partial.
std::vector<SweepPoint> observation_sweep(const InstanceSpec &tmpl,
                                          const std::vector<double> &observe_probs, Index trials,
                                          const ExperimentOptions &opts = {});

/// (column index, norm), descending by norm; ties by ascending index.
std::vector<std::pair<Index, double>> rank_outliers(const Matrix &c);

/// Window-3 median with replicated edges.
std::vector<double> majority_smooth(const std::vector<double> &xs);
bool nonincreasing(const std::vector<double> &xs, double slack = 0);

} // namespace opursuit
