#include "fcs/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "fcs/errors.hpp"

namespace fcs {

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

CsvTable& CsvTable::row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw InvalidArgument("CSV row width differs from header");
  rows_.push_back(std::move(cells));
  return *this;
}

void CsvTable::write(const std::filesystem::path& path, const std::string& config_hash) const {
  auto out = open_out(path);
  out << "# config_hash=" << config_hash << '\n';
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
}

void write_ply(const std::filesystem::path& path, const std::vector<PlyPoint>& points,
               const std::string& config_hash) {
  auto out = open_out(path);
  out << "ply\nformat ascii 1.0\ncomment config_hash=" << config_hash << '\n'
      << "element vertex " << points.size() << '\n'
      << "property double x\nproperty double y\nproperty double z\n"
      << "property int source\nproperty double cond\nend_header\n";
  for (const auto& p : points) {
    out << format_double(p.position.x()) << ' ' << format_double(p.position.y()) << ' '
        << format_double(p.position.z()) << ' ' << p.source << ' ' << format_double(p.cond) << '\n';
  }
}

void write_depth(const std::filesystem::path& path, const DepthImage& img,
                 const std::string& config_hash, const std::string& description) {
  static_assert(sizeof(float) == 4);
  {
    auto out = open_out(path, true);
    out.write("FCSD", 4);
    put_u32(out, static_cast<std::uint32_t>(img.width));
    put_u32(out, static_cast<std::uint32_t>(img.height));
    put_u32(out, 0);
    for (double d : img.data) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(d)));
  }
  auto side = open_out(path.string() + ".txt");
  side << "# config_hash=" << config_hash << '\n'
       << "format=FCSD float32 little-endian, NaN marks invalid pixels\n"
       << "width=" << img.width << '\n'
       << "height=" << img.height << '\n'
       << "content=" << description << '\n';
}

DepthImage read_depth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "FCSD", 4) != 0) {
    throw Error(path.string() + " is not an FCSD depth image");
  }
  const auto w = static_cast<int>(get_u32(bytes.data() + 4));
  const auto h = static_cast<int>(get_u32(bytes.data() + 8));
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() != 16 + 4 * n) throw Error(path.string() + " has a truncated payload");
  DepthImage img(w, h);
  for (std::size_t i = 0; i < n; ++i) {
    img.data[i] = std::bit_cast<float>(get_u32(bytes.data() + 16 + 4 * i));
  }
  return img;
}

}  // namespace fcs
