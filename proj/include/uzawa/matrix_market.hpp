#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "uzawa/saddle_system.hpp"

namespace uzawa {

/// Reads a real Matrix Market matrix (coordinate or array; general or
/// symmetric; integer values accepted). Symmetric storage is expanded.
/// Errors carry the 1-based line number.
SparseMatrix<double> mm_parse(std::istream& in);
SparseMatrix<double> mm_read(const std::filesystem::path& path);

/// A vector stored as an n x 1 matrix in either format.
VectorX<double> mm_parse_vector(std::istream& in);
VectorX<double> mm_read_vector(const std::filesystem::path& path);

/// Coordinate real general, 17 significant digits.
void mm_write(std::ostream& out, const SparseMatrix<double>& m);
void mm_write(const std::filesystem::path& path, const SparseMatrix<double>& m);
/// Array real general, 17 significant digits.
void mm_write_vector(std::ostream& out, const VectorX<double>& v);
void mm_write_vector(const std::filesystem::path& path, const VectorX<double>& v);

/// manifest.json of a system bundle.
struct BundleManifest {
  std::string name;
  Index n = 0;
  Index m = 0;
  nlohmann::json params = nlohmann::json::object();
  bool c_zero = false;
};

/// A bundle is a directory holding A.mtx, B.mtx, C.mtx (omitted when C = 0),
/// f.mtx, h.mtx and manifest.json.
SaddleSystem<double> read_system(const std::filesystem::path& bundle,
                                 BundleManifest* manifest = nullptr);

/// Writes a bundle. An existing bundle is only replaced when `force` is set.
/// `meta.n`, `meta.m` and `meta.c_zero` are filled from the system.
void write_system(const SaddleSystem<double>& sys, const std::filesystem::path& bundle,
                  BundleManifest meta, bool force = false);

}  // namespace uzawa
