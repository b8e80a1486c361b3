#pragma once

// File formats: matrix CSV (no header; row = coordinate, column = point),
// 0/1 mask CSV, instance sidecar JSON, grid CSV + PGM, sweep CSV, reports.

#include <opursuit/certificate.hpp>
#include <opursuit/datagen.hpp>
#include <opursuit/experiments.hpp>
#include <opursuit/solver.hpp>

#include <json.hpp>

#include <filesystem>
#include <string>

namespace opursuit {

inline constexpr const char *version_string = "1.0.0";
/// Version of every JSON document written by this library.
inline constexpr int schema_version = 1;

/// Shortest representation with 17 significant digits; round-trips exactly.
std::string format_double(double v);

Matrix parse_matrix_csv(const std::string &text);
std::string matrix_to_csv(const Matrix &a);
Matrix read_matrix_csv(const std::filesystem::path &path);
void write_matrix_csv(const std::filesystem::path &path, const Matrix &a);

ColumnEntryMask read_mask_csv(const std::filesystem::path &path);
void write_mask_csv(const std::filesystem::path &path, const ColumnEntryMask &mask);

/// r, I0, seed, mode and the rest of the generating spec.
nlohmann::json instance_sidecar(const InstanceSpec &spec, const GroundTruth &truth);
/// Reads r and I0 (the fields needed to rebuild U0 from M).
struct SidecarInfo {
    Index r = 0;
    std::vector<Index> I0;
    Index n = 0;
};
SidecarInfo parse_sidecar(const nlohmann::json &j);

nlohmann::json to_json(const CertificateReport &rep);
nlohmann::json to_json(const OrthogonalConditionResult &res);

/// CSV with header "r,<counts...>", one row per r value.
std::string grid_to_csv(const ExperimentGrid &g);
/// 8-bit binary PGM, one pixel per cell, white = rate 1.
std::string grid_to_pgm(const ExperimentGrid &g);
std::string sweep_to_csv(const std::vector<SweepPoint> &pts, const std::string &x_name);

void write_text(const std::filesystem::path &path, const std::string &text);
std::string read_text(const std::filesystem::path &path);

/// Nonfinite numbers become null.
nlohmann::json finite_or_null(double v);

} // namespace opursuit
