#include <opursuit/certificate.hpp>
#include <opursuit/errors.hpp>
#include <opursuit/experiments.hpp>
#include <opursuit/random.hpp>

#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>

namespace opursuit {

std::string to_string(LambdaRule rule) {
    switch (rule) {
        case LambdaRule::theorem: return "theorem";
        case LambdaRule::corollary: return "corollary";
        case LambdaRule::fixed: return "fixed";
    }
    return "?";
}

LambdaRule lambda_rule_from_string(const std::string &s) {
    if (s == "theorem")
        return LambdaRule::theorem;
    if (s == "corollary")
        return LambdaRule::corollary;
    if (s == "fixed")
        return LambdaRule::fixed;
    throw ConfigError("unknown lambda rule '" + s + "' (expected theorem|corollary|fixed)");
}

double choose_lambda(const GroundTruth &truth, const ExperimentOptions &opts) {
    const Index n = truth.L0.cols();
    switch (opts.rule) {
        case LambdaRule::theorem: {
            // no outliers: lambda = 1 >= ||U0 V0^T||_{inf,2} certifies (M, 0)
            if (truth.I0.empty())
                return 1.0;
            return default_lambda(truth.gamma, n);
        }
        case LambdaRule::corollary: {
            IncoherenceStats st = incoherence(true_row_basis(truth), truth.I0);
            return corollary_lambda(st.mu, truth.r, n);
        }
        case LambdaRule::fixed:
            if (!(opts.lambda > 0))
                throw ConfigError("choose_lambda: fixed rule needs a positive lambda");
            return opts.lambda;
    }
    throw ConfigError("choose_lambda: unknown rule");
}

std::uint64_t cell_seed(std::uint64_t seed, Index r, Index outlier_count, Index trial) {
    return derive_seed(seed, {static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(outlier_count),
                              static_cast<std::uint64_t>(trial)});
}

namespace {

/// Runs task(i) for i in [0, count); results must go to disjoint slots.
void parallel_for(Index count, unsigned threads, const std::function<void(Index)> &task) {
    unsigned hw = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    hw          = static_cast<unsigned>(std::min<Index>(hw, std::max<Index>(count, 1)));
    if (hw <= 1) {
        for (Index i = 0; i < count; ++i)
            task(i);
        return;
    }
    std::atomic<Index> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < hw; ++t)
        pool.emplace_back([&] {
            for (Index i; (i = next.fetch_add(1)) < count;)
                task(i);
        });
    for (auto &th : pool)
        th.join();
}

enum class Outcome { success, failure, error };

} // namespace

ExperimentGrid phase_transition(const InstanceSpec &tmpl, const std::vector<Index> &r_values,
                                const std::vector<Index> &outlier_counts, Index trials,
                                const ExperimentOptions &opts) {
    if (trials < 1)
        throw ConfigError("phase_transition: trials must be at least 1");
    const Index nr = static_cast<Index>(r_values.size()), nk = static_cast<Index>(outlier_counts.size());
    for (Index r : r_values)
        for (Index k : outlier_counts) {
            InstanceSpec s   = tmpl;
            s.r              = r;
            s.outlier_count  = k;
            s.validate();
        }

    std::vector<Outcome> out(static_cast<std::size_t>(nr * nk * trials));
    parallel_for(nr * nk * trials, opts.threads, [&](Index idx) {
        const Index t = idx % trials, cell = idx / trials;
        const Index a = cell / nk, b = cell % nk;
        InstanceSpec s  = tmpl;
        s.r             = r_values[static_cast<std::size_t>(a)];
        s.outlier_count = outlier_counts[static_cast<std::size_t>(b)];
        s.seed          = cell_seed(tmpl.seed, s.r, s.outlier_count, t);
        Outcome o;
        try {
            Instance inst     = generate(s);
            SolverOptions so  = opts.solver;
            so.lambda         = choose_lambda(inst.truth, opts);
            so.mask           = inst.mask;
            DecompositionResult res = solve(inst.M, so);
            o = success_check(res, inst.truth, opts.tol) ? Outcome::success : Outcome::failure;
        } catch (const std::exception &) {
            o = Outcome::error;
        }
        out[static_cast<std::size_t>(idx)] = o;
    });

    ExperimentGrid g;
    g.r_values        = r_values;
    g.outlier_counts  = outlier_counts;
    g.trials_per_cell = trials;
    g.config          = tmpl;
    g.successes       = Eigen::MatrixXi::Zero(nr, nk);
    g.failures        = Eigen::MatrixXi::Zero(nr, nk);
    for (Index idx = 0; idx < nr * nk * trials; ++idx) {
        const Index cell = idx / trials;
        Outcome o        = out[static_cast<std::size_t>(idx)];
        if (o == Outcome::success)
            ++g.successes(cell / nk, cell % nk);
        else if (o == Outcome::error)
            ++g.failures(cell / nk, cell % nk);
    }
    g.rates = g.successes.cast<double>() / static_cast<double>(trials);
    return g;
}

std::vector<SweepPoint> noise_sweep(const InstanceSpec &tmpl, double s,
                                    const std::vector<double> &sigma_values, Index trials,
                                    const ExperimentOptions &opts) {
    if (!(s > 0))
        throw ConfigError("noise_sweep: s must be positive");
    if (trials < 1)
        throw ConfigError("noise_sweep: trials must be at least 1");
    tmpl.validate();
    const Index ns = static_cast<Index>(sigma_values.size());
    std::vector<char> hit(static_cast<std::size_t>(ns * trials), 0);
    parallel_for(ns * trials, opts.threads, [&](Index idx) {
        const Index t = idx % trials, a = idx / trials;
        InstanceSpec spec = tmpl;
        spec.seed         = cell_seed(tmpl.seed, tmpl.r, tmpl.outlier_count, t);
        try {
            Instance inst    = scaled_outlier_instance(spec, s, sigma_values[static_cast<std::size_t>(a)]);
            SolverOptions so = opts.solver;
            so.lambda        = choose_lambda(inst.truth, opts);
            DecompositionResult res          = solve(inst.M, so);
            hit[static_cast<std::size_t>(idx)] = identify_outliers_threshold(res.C, inst.truth.I0);
        } catch (const std::exception &) {
        }
    });
    std::vector<SweepPoint> pts;
    for (Index a = 0; a < ns; ++a) {
        Index c = 0;
        for (Index t = 0; t < trials; ++t)
            c += hit[static_cast<std::size_t>(a * trials + t)];
        pts.push_back({sigma_values[static_cast<std::size_t>(a)] / s,
                       static_cast<double>(c) / static_cast<double>(trials)});
    }
    return pts;
}

std::vector<SweepPoint> observation_sweep(const InstanceSpec &tmpl,
                                          const std::vector<double> &observe_probs, Index trials,
                                          const ExperimentOptions &opts) {
    if (trials < 1)
        throw ConfigError("observation_sweep: trials must be at least 1");
    for (double q : observe_probs)
        if (!(q > 0 && q <= 1))
            throw ConfigError("observation_sweep: probabilities must lie in (0, 1]");
    tmpl.validate();
    const Index np = static_cast<Index>(observe_probs.size());
    std::vector<char> hit(static_cast<std::size_t>(np * trials), 0);
    parallel_for(np * trials, opts.threads, [&](Index idx) {
        const Index t = idx % trials, a = idx / trials;
        InstanceSpec spec  = tmpl;
        spec.seed          = cell_seed(tmpl.seed, tmpl.r, tmpl.outlier_count, t);
        spec.observe_prob  = observe_probs[static_cast<std::size_t>(a)];
        try {
            Instance inst    = generate(spec);
            SolverOptions so = opts.solver;
            so.lambda        = choose_lambda(inst.truth, opts);
            ColumnEntryMask mask = inst.mask ? *inst.mask : ColumnEntryMask::full(spec.p, spec.n);
            DecompositionResult res            = solve_partial(inst.M, mask, so);
            hit[static_cast<std::size_t>(idx)] = success_check(res, inst.truth, opts.tol);
        } catch (const std::exception &) {
        }
    });
    std::vector<SweepPoint> pts;
    for (Index a = 0; a < np; ++a) {
        Index c = 0;
        for (Index t = 0; t < trials; ++t)
            c += hit[static_cast<std::size_t>(a * trials + t)];
        pts.push_back({observe_probs[static_cast<std::size_t>(a)],
                       static_cast<double>(c) / static_cast<double>(trials)});
    }
    return pts;
}

std::vector<std::pair<Index, double>> rank_outliers(const Matrix &c) {
    std::vector<std::pair<Index, double>> out;
    for (Index j = 0; j < c.cols(); ++j)
        out.emplace_back(j, c.col(j).norm());
    std::stable_sort(out.begin(), out.end(), [](const auto &a, const auto &b) { return a.second > b.second; });
    return out;
}

std::vector<double> majority_smooth(const std::vector<double> &xs) {
    const std::size_t n = xs.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double a = xs[i == 0 ? 0 : i - 1], b = xs[i], c = xs[i + 1 < n ? i + 1 : n - 1];
        out[i] = std::max(std::min(a, b), std::min(std::max(a, b), c));
    }
    return out;
}

bool nonincreasing(const std::vector<double> &xs, double slack) {
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (xs[i] > xs[i - 1] + slack)
            return false;
    return true;
}

} // namespace opursuit
