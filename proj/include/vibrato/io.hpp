#pragma once

#include "vibrato/common.hpp"
#include "vibrato/grid.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace vibrato {

/// All numeric output uses 17 significant digits so that doubles survive a
/// text round trip exactly.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
}

/// Atomic text write: write to a temp file in the same directory, then
/// rename over the target.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    require(out.good(), "io: cannot write " + tmp);
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

/// Legacy VTK structured-points file with one scalar field, point- or
/// cell-centered on the duct mesh.
inline void write_structured_scalars(const std::string& path, const DuctMesh& mesh,
                                     const Vector& values, const std::string& name,
                                     bool cell_data) {
  const Eigen::Index expect =
      cell_data ? mesh.num_elems() : mesh.num_nodes();
  require(values.size() == expect, "vtk: field size does not match mesh");
  std::ostringstream out;
  out << "# vtk DataFile Version 3.0\n";
  out << name << "\n";
  out << "ASCII\n";
  out << "DATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << mesh.nx() + 1 << " " << mesh.ny() + 1 << " 1\n";
  out << "ORIGIN 0 0 0\n";
  out << "SPACING " << fmt17(mesh.h()) << " " << fmt17(mesh.h()) << " "
      << fmt17(mesh.h()) << "\n";
  out << (cell_data ? "CELL_DATA " : "POINT_DATA ") << values.size() << "\n";
  out << "SCALARS " << name << " double 1\n";
  out << "LOOKUP_TABLE default\n";
  for (Eigen::Index k = 0; k < values.size(); ++k) out << fmt17(values[k]) << "\n";
  write_file_atomic(path, out.str());
}

/// Reads back a point-scalar field written by write_structured_scalars,
/// checking the dimensions against the mesh.
inline Vector read_structured_scalars(const std::string& path, const DuctMesh& mesh) {
  std::ifstream in(path);
  require(in.good(), "vtk: cannot open " + path);
  std::string line;
  int dimx = 0, dimy = 0, count = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "DIMENSIONS") {
      int dz;
      ls >> dimx >> dimy >> dz;
    } else if (tok == "POINT_DATA") {
      ls >> count;
    } else if (tok == "CELL_DATA") {
      require(false, "vtk: expected point data in " + path);
    } else if (tok == "LOOKUP_TABLE") {
      break;
    }
  }
  require(dimx == mesh.nx() + 1 && dimy == mesh.ny() + 1,
          "vtk: grid dimensions in " + path + " do not match the mesh");
  require(count == mesh.num_nodes(), "vtk: point count mismatch in " + path);
  Vector values(count);
  for (int k = 0; k < count; ++k) {
    require(static_cast<bool>(in >> values[k]), "vtk: truncated data in " + path);
  }
  return values;
}

/// Comma-separated table with a header row.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns) : cols_(std::move(columns)) {
    for (std::size_t i = 0; i < cols_.size(); ++i)
      body_ += cols_[i] + (i + 1 < cols_.size() ? "," : "\n");
  }

  void row(const std::vector<double>& values) {
    require(values.size() == cols_.size(), "csv: column count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i)
      body_ += fmt17(values[i]) + (i + 1 < values.size() ? "," : "\n");
  }

  void save(const std::string& path) const { write_file_atomic(path, body_); }

 private:
  std::vector<std::string> cols_;
  std::string body_;
};

/// Triplet dump (row, col, value) of a sparse matrix for cross-checking.
inline void dump_matrix(const std::string& path, const SparseMatrix& A) {
  std::ostringstream out;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it)
      out << it.row() << " " << it.col() << " " << fmt17(it.value()) << "\n";
  write_file_atomic(path, out.str());
}

}  // namespace vibrato
