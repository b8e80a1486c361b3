#include <opursuit/errors.hpp>
#include <opursuit/io.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace opursuit {

std::string format_double(double v) {
    if (v == 0)
        return "0"; // also folds -0
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view tok, std::size_t line, std::size_t col) {
    tok = trim(tok);
    if (!tok.empty() && tok.front() == '+')
        tok.remove_prefix(1);
    double v  = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
        throw IoError("csv: bad number '" + std::string(tok) + "' at line " + std::to_string(line) +
                      ", field " + std::to_string(col));
    return v;
}

} // namespace

Matrix parse_matrix_csv(const std::string &text) {
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view lv = trim(line);
        if (lv.empty())
            continue;
        std::vector<double> row;
        std::size_t start = 0, col = 1;
        for (;;) {
            std::size_t comma = lv.find(',', start);
            row.push_back(parse_number(lv.substr(start, comma - start), lineno, col++));
            if (comma == std::string_view::npos)
                break;
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw IoError("csv: line " + std::to_string(lineno) + " has " + std::to_string(row.size()) +
                          " fields, expected " + std::to_string(rows.front().size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw IoError("csv: no data");
    Matrix a(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            a(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return a;
}

std::string matrix_to_csv(const Matrix &a) {
    std::string out;
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < a.cols(); ++j) {
            if (j)
                out += ',';
            out += format_double(a(i, j));
        }
        out += '\n';
    }
    return out;
}

std::string read_text(const std::filesystem::path &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path &path, const std::string &text) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot write '" + path.string() + "'");
    f << text;
    if (!f)
        throw IoError("write failed for '" + path.string() + "'");
}

Matrix read_matrix_csv(const std::filesystem::path &path) {
    try {
        return parse_matrix_csv(read_text(path));
    } catch (const IoError &e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_matrix_csv(const std::filesystem::path &path, const Matrix &a) {
    write_text(path, matrix_to_csv(a));
}

ColumnEntryMask read_mask_csv(const std::filesystem::path &path) {
    Matrix m = read_matrix_csv(path);
    if (((m.array() != 0) && (m.array() != 1)).any())
        throw IoError(path.string() + ": mask entries must be 0 or 1");
    if ((m.array() == 1).count() == 0)
        throw IoError(path.string() + ": mask has no observed entry");
    return ColumnEntryMask(m.array() == 1);
}

void write_mask_csv(const std::filesystem::path &path, const ColumnEntryMask &mask) {
    write_matrix_csv(path, mask.as_weights());
}

nlohmann::json instance_sidecar(const InstanceSpec &spec, const GroundTruth &truth) {
    nlohmann::json j;
    j["schema_version"]      = schema_version;
    j["r"]                   = truth.r;
    j["I0"]                  = truth.I0.indices();
    j["seed"]                = spec.seed;
    j["mode"]                = to_string(spec.mode);
    j["p"]                   = spec.p;
    j["n"]                   = spec.n;
    j["outlier_count"]       = spec.outlier_count;
    j["gamma"]               = truth.gamma;
    j["noise_sigma"]         = spec.noise_sigma;
    j["observe_prob"]        = spec.observe_prob;
    j["row_basis"]           = to_string(spec.row_basis);
    j["orthogonal_outliers"] = spec.orthogonal_outliers;
    j["shuffle_outliers"]    = spec.shuffle_outliers;
    return j;
}

SidecarInfo parse_sidecar(const nlohmann::json &j) {
    SidecarInfo s;
    try {
        s.r  = j.at("r").get<Index>();
        s.I0 = j.at("I0").get<std::vector<Index>>();
        s.n  = j.contains("n") ? j.at("n").get<Index>() : 0;
    } catch (const nlohmann::json::exception &e) {
        throw IoError(std::string("sidecar: ") + e.what());
    }
    if (s.r < 1)
        throw IoError("sidecar: r must be at least 1");
    return s;
}

nlohmann::json finite_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json to_json(const CertificateReport &rep) {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["psi"]            = rep.psi;
    j["lambda_lo"]      = finite_or_null(rep.lambda_lo);
    j["lambda_hi"]      = finite_or_null(rep.lambda_hi);
    j["gamma_ok"]       = rep.gamma_condition_ok;
    j["strict"]         = rep.strict;
    j["mu"]             = rep.mu;
    j["r"]              = rep.r;
    j["gamma"]          = rep.gamma;
    j["conditions"]     = nlohmann::json::array();
    for (const auto &c : rep.conditions)
        j["conditions"].push_back(
            {{"name", c.name}, {"measured", finite_or_null(c.measured)}, {"bound", c.bound}, {"pass", c.pass}});
    j["pass"] = rep.all_pass();
    return j;
}

nlohmann::json to_json(const OrthogonalConditionResult &res) {
    return {{"pass", res.pass}, {"h0_norm", res.h0_norm}, {"uv_inf2", res.uv_inf2}};
}

std::string grid_to_csv(const ExperimentGrid &g) {
    std::string out = "r";
    for (Index k : g.outlier_counts)
        out += "," + std::to_string(k);
    out += '\n';
    for (std::size_t a = 0; a < g.r_values.size(); ++a) {
        out += std::to_string(g.r_values[a]);
        for (std::size_t b = 0; b < g.outlier_counts.size(); ++b)
            out += "," + format_double(g.rates(static_cast<Index>(a), static_cast<Index>(b)));
        out += '\n';
    }
    return out;
}

std::string grid_to_pgm(const ExperimentGrid &g) {
    const Index h = g.rates.rows(), w = g.rates.cols();
    std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    for (Index i = 0; i < h; ++i)
        for (Index j = 0; j < w; ++j)
            out += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(g.rates(i, j), 0.0, 1.0))));
    return out;
}

std::string sweep_to_csv(const std::vector<SweepPoint> &pts, const std::string &x_name) {
    std::string out = x_name + ",rate\n";
    for (const auto &p : pts)
        out += format_double(p.x) + "," + format_double(p.rate) + "\n";
    return out;
}

} // namespace opursuit
