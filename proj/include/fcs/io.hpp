#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fcs/dense_fit.hpp"
#include "fcs/triangulate.hpp"

namespace fcs {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

/// Shortest round-trippable-enough decimal text used in every output file.
std::string format_double(double v);

/// Comma-separated table with a "# config_hash=<hex>" comment line first.
class CsvTable {
 public:
  CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  CsvTable& row(std::vector<std::string> cells);
  void write(const std::filesystem::path& path, const std::string& config_hash) const;
  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct PlyPoint {
  Vec3 position;
  int source = 0;
  double cond = 0.0;
};

void write_ply(const std::filesystem::path& path, const std::vector<PlyPoint>& points,
               const std::string& config_hash);

/// Binary depth image: "FCSD", little-endian uint32 width and height, four
/// reserved bytes, then width*height float32 values (NaN = invalid). A text
/// sidecar "<path>.txt" records the size and provenance.
void write_depth(const std::filesystem::path& path, const DepthImage& img,
                 const std::string& config_hash, const std::string& description);
DepthImage read_depth(const std::filesystem::path& path);

}  // namespace fcs
