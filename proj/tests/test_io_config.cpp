#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "fcs/config.hpp"
#include "fcs/errors.hpp"
#include "fcs/io.hpp"

namespace fcs {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "fcs_test_io";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Hash, KnownVectors) {
  EXPECT_EQ(hex64(fnv1a64("")), "cbf29ce484222325");
  EXPECT_EQ(hex64(fnv1a64("a")), "af63dc4c8601ec8c");
  EXPECT_EQ(hex64(fnv1a64("foobar")), "85944171f73967e8");
}

TEST(FormatDouble, Cases) {
  EXPECT_EQ(format_double(0.0), "0");
  EXPECT_EQ(format_double(-0.0), "0");
  EXPECT_EQ(format_double(1.5), "1.5");
  EXPECT_EQ(format_double(-3.0), "-3");
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_NEAR(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0, 1e-10);
}

TEST(Csv, HeaderCarriesHashAndRowsKeepWidth) {
  CsvTable t({"a", "b"});
  t.row({"1", "2"}).row({"3", "4"});
  EXPECT_THROW(t.row({"5"}), InvalidArgument);
  const fs::path p = scratch("t.csv");
  t.write(p, "00ff");
  EXPECT_EQ(slurp(p), "# config_hash=00ff\na,b\n1,2\n3,4\n");
}

TEST(Ply, HeaderAndVertexCount) {
  const fs::path p = scratch("c.ply");
  write_ply(p, {PlyPoint{Vec3(1, 2, 3), 0, 10.0}, PlyPoint{Vec3(-1, 0, 5.5), 1, 20.0}}, "abcd");
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "ply");
  std::getline(in, line);
  EXPECT_EQ(line, "format ascii 1.0");
  std::getline(in, line);
  EXPECT_EQ(line, "comment config_hash=abcd");
  bool saw_count = false;
  int body = -1;
  while (std::getline(in, line)) {
    if (line == "element vertex 2") saw_count = true;
    if (body >= 0) ++body;
    if (line == "end_header") body = 0;
  }
  EXPECT_TRUE(saw_count);
  EXPECT_EQ(body, 2);
}

TEST(DepthFile, RoundTripWithNaN) {
  DepthImage img(5, 3);
  for (int v = 0; v < 3; ++v) {
    for (int u = 0; u < 5; ++u) img.at(u, v) = 0.5 * u + 10.0 * v;
  }
  img.at(2, 1) = std::numeric_limits<double>::quiet_NaN();
  const fs::path p = scratch("d.fcsd");
  write_depth(p, img, "beef", "test image");
  const std::string raw = slurp(p);
  ASSERT_EQ(raw.size(), 16u + 4u * 15u);
  EXPECT_EQ(raw.substr(0, 4), "FCSD");
  EXPECT_EQ(static_cast<unsigned char>(raw[4]), 5);
  EXPECT_EQ(static_cast<unsigned char>(raw[8]), 3);
  EXPECT_TRUE(fs::exists(p.string() + ".txt"));
  EXPECT_NE(slurp(p.string() + ".txt").find("beef"), std::string::npos);

  const DepthImage back = read_depth(p);
  ASSERT_EQ(back.width, 5);
  ASSERT_EQ(back.height, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    if (std::isnan(img.data[i])) {
      EXPECT_TRUE(std::isnan(back.data[i]));
    } else {
      EXPECT_EQ(back.data[i], static_cast<double>(static_cast<float>(img.data[i])));
    }
  }
}

TEST(DepthFile, BadMagicRejected) {
  const fs::path p = scratch("bad.fcsd");
  std::ofstream(p) << "NOPE0000000000000000";
  EXPECT_ANY_THROW(read_depth(p));
}

nlohmann::json minimal() { return {{"scenario", {{"rng_seed", 3}, {"baseline_m", 2.5}}}}; }

TEST(Config, MinimalDocumentUsesDefaults) {
  const RunConfig cfg = parse_run_config(minimal());
  EXPECT_EQ(cfg.scenario.rng_seed, 3u);
  EXPECT_EQ(cfg.scenario.baseline_m, 2.5);
  EXPECT_EQ(cfg.estimator.window_size, 10);
  EXPECT_EQ(cfg.analysis.baseline_search.trials, 100);
}

std::string config_error(const nlohmann::json& doc) {
  try {
    parse_run_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, ErrorsNameTheField) {
  nlohmann::json doc = minimal();
  doc["scenario"].erase("baseline_m");
  EXPECT_NE(config_error(doc).find("scenario.baseline_m"), std::string::npos);

  doc = minimal();
  doc["scenario"]["baseline_m"] = "three";
  EXPECT_NE(config_error(doc).find("scenario.baseline_m"), std::string::npos);

  doc = minimal();
  doc["scenario"]["baseline_m"] = -1.0;
  EXPECT_NE(config_error(doc).find("scenario.baseline_m"), std::string::npos);

  doc = minimal();
  doc["scenario"]["baselin_m"] = 3.0;
  EXPECT_NE(config_error(doc).find("scenario.baselin_m"), std::string::npos);

  doc = minimal();
  doc["estimator"] = {{"window_size", 0}};
  EXPECT_NE(config_error(doc).find("estimator.window_size"), std::string::npos);

  doc = minimal();
  doc["bogus"] = 1;
  EXPECT_NE(config_error(doc).find("bogus"), std::string::npos);

  doc = minimal();
  doc["analysis"] = {{"which", {"condition", "nonsense"}}};
  EXPECT_NE(config_error(doc).find("analysis.which"), std::string::npos);
}

TEST(Config, ResolvedDocumentRoundTrips) {
  nlohmann::json doc = minimal();
  doc["mapping"] = {{"cond_threshold", 1234.0}};
  const RunConfig a = parse_run_config(doc);
  const RunConfig b = parse_run_config(to_json(a));
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(b.mapping.cond_threshold, 1234.0);
}

TEST(Config, HashTracksContent) {
  const RunConfig a = parse_run_config(minimal());
  nlohmann::json doc = minimal();
  doc["scenario"]["baseline_m"] = 2.6;
  const RunConfig b = parse_run_config(doc);
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Config, SeedOverrideReplacesSeed) {
  const fs::path p = scratch("cfg.json");
  std::ofstream(p) << minimal().dump();
  const RunConfig plain = load_run_config(p);
  const RunConfig over = load_run_config(p, 99);
  EXPECT_EQ(plain.scenario.rng_seed, 3u);
  EXPECT_EQ(over.scenario.rng_seed, 99u);
  EXPECT_NE(config_hash(plain), config_hash(over));
  EXPECT_NE(plain.analysis.baseline_search.seed, over.analysis.baseline_search.seed);
}

TEST(Config, UnreadableOrMalformedFile) {
  EXPECT_THROW(load_run_config(scratch("does_not_exist.json")), ConfigError);
  const fs::path p = scratch("broken.json");
  std::ofstream(p) << "{ \"scenario\": ";
  EXPECT_THROW(load_run_config(p), ConfigError);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"default.json", "noiseless.json", "analysis.json"}) {
    EXPECT_NO_THROW(load_run_config(fs::path(FCS_SOURCE_DIR) / "configs" / name)) << name;
  }
}

}  // namespace
}  // namespace fcs
