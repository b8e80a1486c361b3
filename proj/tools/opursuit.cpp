// Command-line front end. Exit codes: 0 success, 1 I/O or parse error,
// 2 non-convergence or numerical failure, 64 usage error.

#include <opursuit/certificate.hpp>
#include <opursuit/errors.hpp>
#include <opursuit/experiments.hpp>
#include <opursuit/io.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace opursuit;

namespace {

constexpr int exit_ok = 0, exit_io = 1, exit_noconv = 2, exit_usage = 64;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolveFlags {
    std::string matrix;
    std::optional<double> lambda, gamma;
    Index max_iters = 2000;
    double conv_tol = 1e-6, delta = 1e-5, eta = 0.9;
    std::string out = ".";
    bool rank = false;
};

void add_solve_flags(CLI::App *sub, SolveFlags &f) {
    sub->add_option("-m,--matrix", f.matrix, "Data matrix CSV (rows = coordinates, columns = points)")
        ->required();
    auto *l = sub->add_option("--lambda", f.lambda, "Regularization weight");
    auto *g = sub->add_option("--gamma", f.gamma, "Outlier fraction; sets lambda = 3/(7 sqrt(gamma n))");
    l->excludes(g);
    sub->add_option("--max-iters", f.max_iters, "Iteration budget")->capture_default_str();
    sub->add_option("--conv-tol", f.conv_tol, "Relative change tolerance")->capture_default_str();
    sub->add_option("--delta", f.delta, "Continuation floor factor")->capture_default_str();
    sub->add_option("--eta", f.eta, "Continuation decay")->capture_default_str();
    sub->add_option("-o,--out", f.out, "Output directory")->capture_default_str();
    sub->add_flag("--rank-outliers", f.rank, "Append ranked column norms of C to the report");
}

SolverOptions solver_options(const SolveFlags &f, Index n) {
    if (f.lambda.has_value() == f.gamma.has_value())
        throw UsageError("exactly one of --lambda or --gamma is required");
    SolverOptions o;
    o.lambda    = f.lambda ? *f.lambda : default_lambda(*f.gamma, n);
    o.max_iters = f.max_iters;
    o.conv_tol  = f.conv_tol;
    o.delta     = f.delta;
    o.eta       = f.eta;
    o.validate();
    return o;
}

json solve_inputs(const SolveFlags &f, const SolverOptions &o) {
    json in = {{"matrix", f.matrix}, {"lambda", o.lambda}, {"max_iters", o.max_iters},
               {"conv_tol", o.conv_tol}, {"delta", o.delta}, {"eta", o.eta}, {"out", f.out}};
    if (f.gamma)
        in["gamma"] = *f.gamma;
    return in;
}

json result_summary(const Matrix &m, const DecompositionResult &res, double lambda, bool rank) {
    json r;
    r["objective"]       = objective(res.L, res.C, lambda);
    r["iterations"]      = res.iterations;
    r["residual"]        = res.residual;
    r["converged"]       = res.converged;
    r["recovered_rank"]  = svd(res.L).k;
    r["outlier_indices"] = nonzero_columns(res.C, m.norm());
    if (rank) {
        json arr = json::array();
        for (auto [j, v] : rank_outliers(res.C))
            arr.push_back({{"index", j}, {"norm", v}});
        r["ranked_outliers"] = arr;
    }
    return r;
}

json report(const std::string &cmd, json inputs, json result,
            std::chrono::steady_clock::time_point start) {
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return {{"schema_version", schema_version}, {"version", version_string}, {"command", cmd},
            {"inputs", std::move(inputs)},      {"result", std::move(result)}, {"timing_ms", ms}};
}

int finish_solve(const std::string &cmd, const SolveFlags &f, const Matrix &m, const SolverOptions &o,
                 const DecompositionResult &res, json inputs, std::chrono::steady_clock::time_point start) {
    fs::path out(f.out);
    write_matrix_csv(out / "L.csv", res.L);
    write_matrix_csv(out / "C.csv", res.C);
    json result = result_summary(m, res, o.lambda, f.rank);
    if (cmd == "solve-noisy")
        result["residual_target_missed"] = res.residual_target_missed;
    json rep = report(cmd, std::move(inputs), std::move(result), start);
    write_text(out / "report.json", rep.dump(2) + "\n");
    std::cout << rep.dump(2) << "\n";
    return res.converged ? exit_ok : exit_noconv;
}

struct SpecFlags {
    InstanceSpec spec;
    std::string mode = "random", basis = "gaussian";
};

void add_spec_flags(CLI::App *sub, SpecFlags &f, bool with_r_and_count) {
    sub->add_option("--p", f.spec.p, "Ambient dimension")->capture_default_str();
    sub->add_option("--n", f.spec.n, "Number of points")->capture_default_str();
    if (with_r_and_count) {
        sub->add_option("--r", f.spec.r, "Rank of the inlier block")->capture_default_str();
        sub->add_option("--outliers", f.spec.outlier_count, "Number of outlier columns")->capture_default_str();
    }
    sub->add_option("--mode", f.mode, "random | identical")->capture_default_str();
    sub->add_option("--row-basis", f.basis, "gaussian | spread")->capture_default_str();
    sub->add_option("--seed", f.spec.seed, "Random seed")->capture_default_str();
    sub->add_flag("--orthogonal", f.spec.orthogonal_outliers, "Project outliers off span(U0)");
    sub->add_flag("--shuffle", f.spec.shuffle_outliers, "Seeded random outlier positions");
}

InstanceSpec resolve_spec(const SpecFlags &f) {
    InstanceSpec s = f.spec;
    s.mode         = outlier_mode_from_string(f.mode);
    s.row_basis    = row_basis_from_string(f.basis);
    return s;
}

struct RuleFlags {
    std::string rule;
    std::optional<double> lambda;
    /// Used by the fixed rule when --lambda is absent; 0 = none.
    double fixed_default = 0;
};

void add_rule_flags(CLI::App *sub, RuleFlags &f, const std::string &default_rule) {
    f.rule = default_rule;
    sub->add_option("--lambda-rule", f.rule, "theorem | corollary | fixed")->capture_default_str();
    sub->add_option("--lambda", f.lambda,
                    f.fixed_default > 0 ? "Lambda for the fixed rule (default " + format_double(f.fixed_default) + ")"
                                        : std::string("Lambda for the fixed rule"));
}

ExperimentOptions resolve_rule(const RuleFlags &f) {
    ExperimentOptions eo;
    eo.rule = lambda_rule_from_string(f.rule);
    if (eo.rule == LambdaRule::fixed) {
        if (!f.lambda && !(f.fixed_default > 0))
            throw UsageError("--lambda-rule fixed needs --lambda");
        eo.lambda = f.lambda ? *f.lambda : f.fixed_default;
    } else if (f.lambda) {
        throw UsageError("--lambda is only valid with --lambda-rule fixed");
    }
    return eo;
}

json spec_json(const InstanceSpec &s) {
    return {{"p", s.p},
            {"n", s.n},
            {"r", s.r},
            {"outlier_count", s.outlier_count},
            {"mode", to_string(s.mode)},
            {"row_basis", to_string(s.row_basis)},
            {"seed", s.seed},
            {"orthogonal_outliers", s.orthogonal_outliers},
            {"shuffle_outliers", s.shuffle_outliers}};
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Outlier Pursuit: low-rank plus column-sparse matrix decomposition"};
    app.set_version_flag("--version", version_string);
    app.require_subcommand(1);

    SolveFlags sf, nf, pf;
    double eps_noise = 0;
    std::string mask_path;
    auto *c_solve = app.add_subcommand("solve", "Decompose M = L + C");
    add_solve_flags(c_solve, sf);
    auto *c_noisy = app.add_subcommand("solve-noisy", "Decompose with ||M - L - C||_F <= eps");
    add_solve_flags(c_noisy, nf);
    c_noisy->add_option("--eps", eps_noise, "Noise level eps")->required();
    auto *c_partial = app.add_subcommand("solve-partial", "Decompose from observed entries only");
    add_solve_flags(c_partial, pf);
    c_partial->add_option("--mask", mask_path, "0/1 CSV of observed entries")->required();

    SpecFlags gen_flags;
    std::string gen_out = ".";
    auto *c_gen = app.add_subcommand("gen", "Generate a synthetic instance");
    add_spec_flags(c_gen, gen_flags, true);
    c_gen->add_option("--noise-sigma", gen_flags.spec.noise_sigma, "Entrywise noise std")->capture_default_str();
    c_gen->add_option("--observe-prob", gen_flags.spec.observe_prob, "Entry observation probability")
        ->capture_default_str();
    c_gen->add_option("-o,--out", gen_out, "Output directory")->capture_default_str();

    SpecFlags ph_flags;
    ph_flags.mode = "identical";
    RuleFlags ph_rule;
    std::vector<Index> r_values = {1, 2, 5, 10}, counts = {0, 5, 10, 20, 40};
    Index ph_trials = 10;
    std::string ph_out = ".";
    unsigned threads   = 0;
    auto *c_phase = app.add_subcommand("phase", "Success-rate grid over rank and outlier count");
    add_spec_flags(c_phase, ph_flags, false);
    add_rule_flags(c_phase, ph_rule, "theorem");
    c_phase->add_option("--r-values", r_values, "Ranks")->delimiter(',')->capture_default_str();
    c_phase->add_option("--outlier-counts", counts, "Outlier counts")->delimiter(',')->capture_default_str();
    c_phase->add_option("--trials", ph_trials, "Trials per cell")->capture_default_str();
    c_phase->add_option("--threads", threads, "Worker threads (0 = hardware)")->capture_default_str();
    c_phase->add_option("-o,--out", ph_out, "Output directory")->capture_default_str();

    SpecFlags ns_flags;
    ns_flags.spec.r             = 5;
    ns_flags.spec.outlier_count = 5;
    RuleFlags ns_rule;
    double ns_s = 80;
    std::vector<double> ratios = {0, 0.1, 0.3, 0.5, 0.7, 1.0, 1.5};
    Index ns_trials            = 10;
    std::string ns_out         = ".";
    auto *c_noise = app.add_subcommand("noise-sweep", "Outlier identification rate vs sigma/s");
    add_spec_flags(c_noise, ns_flags, true);
    add_rule_flags(c_noise, ns_rule, "corollary");
    c_noise->add_option("--s", ns_s, "Outlier distance to span(U0)")->capture_default_str();
    c_noise->add_option("--ratios", ratios, "sigma/s values")->delimiter(',')->capture_default_str();
    c_noise->add_option("--trials", ns_trials, "Trials per point")->capture_default_str();
    c_noise->add_option("--threads", threads, "Worker threads (0 = hardware)")->capture_default_str();
    c_noise->add_option("-o,--out", ns_out, "Output directory")->capture_default_str();

    SpecFlags os_flags;
    RuleFlags os_rule;
    os_rule.fixed_default     = 0.75;
    std::vector<double> probs = {1.0, 0.8, 0.5, 0.3};
    Index os_trials           = 10;
    std::string os_out        = ".";
    auto *c_obs = app.add_subcommand("obs-sweep", "Success rate vs observation probability");
    add_spec_flags(c_obs, os_flags, true);
    add_rule_flags(c_obs, os_rule, "fixed");
    c_obs->add_option("--probs", probs, "Observation probabilities")->delimiter(',')->capture_default_str();
    c_obs->add_option("--trials", os_trials, "Trials per point")->capture_default_str();
    c_obs->add_option("--threads", threads, "Worker threads (0 = hardware)")->capture_default_str();
    c_obs->add_option("-o,--out", os_out, "Output directory")->capture_default_str();

    std::string cert_matrix, cert_truth, cert_rule, cert_out;
    std::optional<double> cert_lambda;
    bool cert_strict = false;
    auto *c_cert = app.add_subcommand("certify", "Build and verify the dual certificate for an instance");
    c_cert->add_option("-m,--matrix", cert_matrix, "Data matrix CSV")->required();
    c_cert->add_option("-t,--truth", cert_truth, "Instance sidecar JSON (r, I0)")->required();
    auto *cl = c_cert->add_option("--lambda", cert_lambda, "Regularization weight");
    auto *cr = c_cert->add_option("--lambda-rule", cert_rule, "theorem | corollary (mu measured from M)");
    cl->excludes(cr);
    c_cert->add_flag("--strict", cert_strict, "Require strict inequalities");
    c_cert->add_option("-o,--out", cert_out, "Write certificate.json to this directory");

    std::string rank_matrix, rank_out;
    auto *c_rank = app.add_subcommand("rank-outliers", "Column norms of C, descending");
    c_rank->add_option("-m,--matrix", rank_matrix, "C matrix CSV")->required();
    c_rank->add_option("-o,--out", rank_out, "Write CSV here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return exit_usage;
    }

    const auto start = std::chrono::steady_clock::now();
    try {
        if (*c_solve) {
            Matrix m        = read_matrix_csv(sf.matrix);
            SolverOptions o = solver_options(sf, m.cols());
            auto res        = solve(m, o);
            return finish_solve("solve", sf, m, o, res, solve_inputs(sf, o), start);
        }
        if (*c_noisy) {
            Matrix m        = read_matrix_csv(nf.matrix);
            SolverOptions o = solver_options(nf, m.cols());
            auto res        = solve_noisy(m, o, eps_noise);
            json in         = solve_inputs(nf, o);
            in["eps"]       = eps_noise;
            return finish_solve("solve-noisy", nf, m, o, res, in, start);
        }
        if (*c_partial) {
            Matrix m             = read_matrix_csv(pf.matrix);
            ColumnEntryMask mask = read_mask_csv(mask_path);
            if (mask.rows() != m.rows() || mask.cols() != m.cols())
                throw IoError("mask shape does not match the matrix");
            SolverOptions o = solver_options(pf, m.cols());
            auto res        = solve_partial(m, mask, o);
            json in         = solve_inputs(pf, o);
            in["mask"]      = mask_path;
            return finish_solve("solve-partial", pf, m, o, res, in, start);
        }
        if (*c_gen) {
            InstanceSpec s = resolve_spec(gen_flags);
            Instance inst  = generate(s);
            fs::path out(gen_out);
            write_matrix_csv(out / "M.csv", inst.M);
            write_matrix_csv(out / "L0.csv", inst.truth.L0);
            write_matrix_csv(out / "C0.csv", inst.truth.C0);
            if (inst.mask)
                write_mask_csv(out / "mask.csv", *inst.mask);
            write_text(out / "truth.json", instance_sidecar(s, inst.truth).dump(2) + "\n");
            return exit_ok;
        }
        if (*c_phase) {
            InstanceSpec s       = resolve_spec(ph_flags);
            ExperimentOptions eo = resolve_rule(ph_rule);
            eo.threads           = threads;
            // phase cells override r and the outlier count
            s.r             = r_values.empty() ? 1 : r_values.front();
            s.outlier_count = 0;
            ExperimentGrid g = phase_transition(s, r_values, counts, ph_trials, eo);
            fs::path out(ph_out);
            write_text(out / "grid.csv", grid_to_csv(g));
            write_text(out / "grid.pgm", grid_to_pgm(g));
            json in = spec_json(s);
            in.erase("r");
            in.erase("outlier_count");
            in["r_values"]       = r_values;
            in["outlier_counts"] = counts;
            in["trials"]         = ph_trials;
            in["lambda_rule"]    = to_string(eo.rule);
            json result = {{"rates", json::array()}, {"solver_errors", json::array()}};
            for (Index a = 0; a < g.rates.rows(); ++a) {
                json row = json::array(), err = json::array();
                for (Index b = 0; b < g.rates.cols(); ++b) {
                    row.push_back(g.rates(a, b));
                    err.push_back(g.failures(a, b));
                }
                result["rates"].push_back(row);
                result["solver_errors"].push_back(err);
            }
            json rep = report("phase", in, result, start);
            write_text(out / "report.json", rep.dump(2) + "\n");
            std::cout << grid_to_csv(g);
            return exit_ok;
        }
        if (*c_noise || *c_obs) {
            const bool noise     = c_noise->parsed();
            InstanceSpec s       = resolve_spec(noise ? ns_flags : os_flags);
            ExperimentOptions eo = resolve_rule(noise ? ns_rule : os_rule);
            eo.threads           = threads;
            std::vector<SweepPoint> pts;
            json in = spec_json(s);
            in["lambda_rule"] = to_string(eo.rule);
            if (eo.rule == LambdaRule::fixed)
                in["lambda"] = eo.lambda;
            if (noise) {
                std::vector<double> sigmas;
                for (double q : ratios)
                    sigmas.push_back(q * ns_s);
                pts          = noise_sweep(s, ns_s, sigmas, ns_trials, eo);
                in["s"]      = ns_s;
                in["ratios"] = ratios;
                in["trials"] = ns_trials;
            } else {
                pts          = observation_sweep(s, probs, os_trials, eo);
                in["probs"]  = probs;
                in["trials"] = os_trials;
            }
            const std::string x = noise ? "sigma_over_s" : "observe_prob";
            fs::path out(noise ? ns_out : os_out);
            const std::string csv = sweep_to_csv(pts, x);
            write_text(out / (noise ? "noise.csv" : "obs.csv"), csv);
            json result = json::array();
            for (const auto &p : pts)
                result.push_back({{x, p.x}, {"rate", p.rate}});
            json rep = report(noise ? "noise-sweep" : "obs-sweep", in, {{"points", result}}, start);
            write_text(out / "report.json", rep.dump(2) + "\n");
            std::cout << csv;
            return exit_ok;
        }
        if (*c_cert) {
            Matrix m        = read_matrix_csv(cert_matrix);
            SidecarInfo sc  = parse_sidecar(json::parse(read_text(cert_truth)));
            ColumnSet i0(sc.I0, m.cols());
            Matrix inl      = project_columns_complement(i0, m);
            Matrix u0       = leading_left_basis(inl, sc.r);
            double lambda   = 0;
            if (cert_lambda) {
                lambda = *cert_lambda;
            } else {
                const std::string rule = cert_rule.empty() ? "corollary" : cert_rule;
                if (rule == "corollary") {
                    SvdFactors f = svd(inl);
                    lambda       = corollary_lambda(incoherence(f.V.leftCols(sc.r), i0).mu, sc.r, m.cols());
                } else if (rule == "theorem") {
                    lambda = default_lambda(static_cast<double>(i0.size()) / static_cast<double>(m.cols()), m.cols());
                } else {
                    throw UsageError("--lambda-rule must be theorem or corollary");
                }
            }
            if (!(lambda > 0))
                throw UsageError("lambda must be positive");

            json out = {{"schema_version", schema_version}, {"version", version_string},
                        {"lambda", lambda}};
            try {
                DualCertificate cert  = build_certificate(m, u0, i0, lambda);
                CertificateReport rep = verify_certificate(cert.Q, cert.L_hat, cert.C_hat, i0, lambda, cert_strict);
                out["certificate"]    = to_json(rep);
                out["pass"]           = rep.all_pass();
            } catch (const InapplicableError &e) {
                out["certificate"] = nullptr;
                out["pass"]        = false;
                out["error"]       = e.what();
            }
            try {
                out["orthogonal"] = to_json(check_orthogonal_condition(m, i0, lambda));
            } catch (const AssumptionError &) {
                out["orthogonal"] = nullptr;
            }
            out["timing_ms"] =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            if (!cert_out.empty())
                write_text(fs::path(cert_out) / "certificate.json", out.dump(2) + "\n");
            std::cout << out.dump(2) << "\n";
            return exit_ok;
        }
        if (*c_rank) {
            Matrix c        = read_matrix_csv(rank_matrix);
            std::string csv = "index,norm\n";
            for (auto [j, v] : rank_outliers(c))
                csv += std::to_string(j) + "," + format_double(v) + "\n";
            if (rank_out.empty())
                std::cout << csv;
            else
                write_text(rank_out, csv);
            return exit_ok;
        }
    } catch (const UsageError &e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return exit_usage;
    } catch (const ConfigError &e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return exit_usage;
    } catch (const IoError &e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return exit_io;
    } catch (const json::exception &e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return exit_io;
    } catch (const NumericalError &e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return exit_noconv;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_io;
    }
    return exit_usage;
}
