#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "cli/commands.hpp"
#include "cli/spec.hpp"

using namespace fredholm;
using namespace fredholm::cli;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  Scratch() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir = fs::temp_directory_path() / (std::string("fredholm_cli_") + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }

  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return dir / name;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Exec {
  int code = -1;
  std::string err;
};

Exec tool(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(FREDHOLM_TOOL) + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

Json report(const fs::path& out) { return Json::parse(slurp(out / "report.json")); }

const char* kCrossing = R"({"generator": "crossing", "params": {"k": 1, "m": 1}})";
const char* kTsf = R"({"generator": "truncated_shift_flow", "params": {"N": 3}})";
const char* kRotation = R"({"generator": "rotation", "params": {"dim": 2, "theta_max": 6.283185307179586}})";

std::string constant_sampled() {
  Json grid = Json::array(), mats = Json::array();
  for (int i = 0; i < 11; ++i) {
    grid.push_back(i / 10.0);
    mats.push_back(Json{{"re", Json::array({Json::array({-1.0, 0.0}), Json::array({0.0, 2.0})})}});
  }
  Json spec;
  spec["sampled"] = Json{{"dim", 2}, {"grid", grid}, {"matrices", mats}};
  spec["closure"] = Json{{"type", "open_path"}};
  return spec.dump();
}

std::string parse_message(const std::string& text) {
  try {
    parse_family_spec(Json::parse(text));
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(CliSpec, ErrorsNameTheField) {
  EXPECT_NE(parse_message(R"({"generator": "crossing", "params": {"k": "x"}})").find("params.k"), std::string::npos);
  EXPECT_NE(parse_message(R"({"generator": "crossing", "bogus": 1})").find("bogus"), std::string::npos);
  EXPECT_NE(parse_message(R"({"sampled": {"dim": 1, "grid": [0, 1], "matrices": [{"re": [[1]]}, {"im": [[1]]}]}})")
                .find("sampled.matrices[1].re"),
            std::string::npos);
  EXPECT_NE(parse_message(R"({"sampled": {"dim": 2, "grid": [0, 1], "matrices": [{"re": [[1, 0], [0, 1]]}, {"re": [[1, 0], [0]]}]}})")
                .find("sampled.matrices[1].re[1]"),
            std::string::npos);
  EXPECT_NE(parse_message(R"({"generator": "truncated_shift_flow", "params": {"N": 2}, "closure": {"type": "exact_loop"}})")
                .find("closure"),
            std::string::npos);
}

TEST(CliSpec, SampledRoundTrip) {
  const OperatorFamily f = parse_family_spec(Json::parse(constant_sampled()));
  EXPECT_EQ(f.size(), 11u);
  const OperatorFamily g = parse_family_spec(family_to_json(f));
  ASSERT_EQ(g.size(), f.size());
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(f.matrix(i), g.matrix(i));
  EXPECT_EQ(family_to_json(g).dump(), family_to_json(f).dump());
}

TEST(CliSpec, AtlasAndSectionParsing) {
  const Atlas a = parse_atlas(Json::parse(R"({"charts": [{"start": 0, "end": 4, "eps": 0.5}]})"));
  ASSERT_EQ(a.charts.size(), 1u);
  EXPECT_EQ(atlas_to_json(a).dump(), R"({"charts":[{"start":0,"end":4,"eps":0.5}]})");
  WeakSpectralSection s;
  ComplexVector v(2);
  v << Complex(0.6, 0.0), Complex(0.0, 0.8);
  s.subspaces = {Subspace::line(v), Subspace::zero(2)};
  const WeakSpectralSection back = parse_section(section_to_json(s), 2);
  ASSERT_EQ(back.subspaces.size(), 2u);
  EXPECT_NEAR(subspace_distance(back.subspaces[0], s.subspaces[0]), 0.0, 1e-15);
  EXPECT_EQ(back.subspaces[1].dim(), 0);
  EXPECT_THROW(parse_atlas(Json::parse(R"({"charts": [{"start": 0, "end": 4}]})")), Error);
}

TEST(CliSpec, FrameIsColumnMajor) {
  ComplexMatrix m(2, 2);
  m << 1, 0, 0, 1;
  const Json j = frame_to_json(Subspace::from_orthonormal(m));
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0].dump(), R"([{"re":1.0,"im":0.0},{"re":0.0,"im":0.0}])");
}

TEST(CliDigest, Fnv1a64KnownValues) {
  EXPECT_EQ(fnv1a64(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a64("a"), "af63dc4c8601ec8c");
}

TEST(CliFlow, CrossingFlowOneRoutesAgree) {
  Scratch s;
  const auto spec = s.write("crossing.json", kCrossing);
  const auto out = s.dir / "out";
  const auto r = tool("flow --spec " + spec.string() + " --out " + out.string() + " --emit-branches", s.dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const Json rep = report(out);
  EXPECT_EQ(rep["status"], "ok");
  EXPECT_EQ(rep["outputs"]["flow"], 1);
  EXPECT_EQ(rep["outputs"]["agree"], true);
  for (const auto& inv : rep["invariants"]) EXPECT_TRUE(inv["pass"].get<bool>()) << inv.dump();
  EXPECT_TRUE(fs::exists(out / "branches.csv"));
  EXPECT_TRUE(fs::exists(out / "timing.json"));
}

TEST(CliFlow, ConstantSampledSpecFlowZero) {
  Scratch s;
  const auto spec = s.write("const.json", constant_sampled());
  const auto out = s.dir / "out";
  const auto r = tool("flow --spec " + spec.string() + " --out " + out.string(), s.dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(report(out)["outputs"]["flow"], 0);
}

TEST(CliFlow, MalformedJsonIsParseError) {
  Scratch s;
  const auto spec = s.write("bad.json", R"({"generator": "crossing", "params": {"k": 1},})");
  const auto r = tool("flow --spec " + spec.string() + " --out " + (s.dir / "out").string(), s.dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error[parse]"), std::string::npos) << r.err;
}

TEST(CliFlow, BadFieldNamedOnStderr) {
  Scratch s;
  const auto spec = s.write("bad.json", R"({"generator": "crossing", "params": {"k": "x"}})");
  const auto r = tool("flow --spec " + spec.string() + " --out " + (s.dir / "out").string(), s.dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("params.k"), std::string::npos) << r.err;
}

TEST(CliSuspend, CrossingIndexEqualsFlow) {
  Scratch s;
  const auto spec = s.write("crossing.json", kCrossing);
  const auto out = s.dir / "out";
  const auto r = tool("suspend --spec " + spec.string() + " --out " + out.string(), s.dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const Json rep = report(out);
  EXPECT_EQ(rep["outputs"]["index"], 1);
  EXPECT_EQ(rep["outputs"]["flow"], 1);
  EXPECT_LE(rep["outputs"]["lemma_max_distance"].get<double>(), 1e-8);
  const std::string csv = slurp(out / "lemma.csv");
  EXPECT_GE(std::count(csv.begin(), csv.end(), '\n'), 51);
}

TEST(CliSuspend, ConstantHasNoKernels) {
  Scratch s;
  const auto spec = s.write("const.json", constant_sampled());
  const auto out = s.dir / "out";
  ASSERT_EQ(tool("suspend --spec " + spec.string() + " --out " + out.string(), s.dir).code, 0);
  const Json rep = report(out);
  EXPECT_EQ(rep["outputs"]["index"], 0);
  EXPECT_TRUE(rep["outputs"]["kernels"].empty());
}

TEST(CliSection, TruncatedShiftFlowIsObstruction) {
  Scratch s;
  const auto spec = s.write("tsf.json", kTsf);
  const auto out = s.dir / "out";
  const auto r = tool("section --spec " + spec.string() + " --out " + out.string() + " --auto", s.dir);
  EXPECT_EQ(r.code, 2) << r.err;
  const Json rep = report(out);
  EXPECT_EQ(rep["status"], "obstruction");
  EXPECT_EQ(rep["outputs"]["obstruction"], 1);
}

TEST(CliSection, RotationAutoEmitsWitness) {
  Scratch s;
  const auto spec = s.write("rot.json", kRotation);
  const auto out = s.dir / "out";
  const auto r = tool("section --spec " + spec.string() + " --out " + out.string() +
                          " --auto --emit-frames --query-sample 10 --query-s 0.5",
                      s.dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const Json rep = report(out);
  EXPECT_EQ(rep["outputs"]["exists"], true);
  for (const auto& inv : rep["invariants"]) EXPECT_TRUE(inv["pass"].get<bool>()) << inv.dump();
  ASSERT_TRUE(fs::exists(out / "section.json"));
  const Json sec = Json::parse(slurp(out / "section.json"));
  EXPECT_EQ(sec["frames"].size(), 101u);
}

TEST(CliSection, SpectralInputIsIdentityDeformation) {
  Scratch s;
  const auto spec = s.write("rot.json", kRotation);
  const OperatorFamily f = parse_family_spec(Json::parse(kRotation));
  WeakSpectralSection sec;
  for (std::size_t i = 0; i < f.size(); ++i) sec.subspaces.push_back(window_subspace(f, i, 0.0, kInf));
  const auto file = s.write("sec.json", section_to_json(sec).dump());
  const auto out = s.dir / "out";
  const auto r = tool("section --spec " + spec.string() + " --out " + out.string() + " --section " + file.string(), s.dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LE(report(out)["outputs"]["max_change"].get<double>(), 1e-8);
}

TEST(CliPolarize, CrossingPreserved) {
  Scratch s;
  const auto spec = s.write("crossing.json", kCrossing);
  const auto out = s.dir / "out";
  const auto r = tool("polarize --spec " + spec.string() + " --out " + out.string(), s.dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const Json rep = report(out);
  EXPECT_EQ(rep["outputs"]["preserved"], true);
  EXPECT_EQ(rep["outputs"]["flow_after"], 1);
  const OperatorFamily replaced = parse_family_spec(Json::parse(slurp(out / "replaced_family.json")));
  EXPECT_TRUE(replaced.polarized_bands().has_value());
}

TEST(CliPolarize, AlreadyPolarizedUnchanged) {
  Scratch s;
  const auto spec = s.write("pc.json", R"({"generator": "polarized_crossing", "params": {"k": 1, "m_minus": 1, "m_plus": 1}})");
  const auto out = s.dir / "out";
  const auto r = tool("polarize --spec " + spec.string() + " --out " + out.string(), s.dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LE(report(out)["outputs"]["max_change"].get<double>(), 1e-12);
}

TEST(CliPolarize, EpsAtLeastOneIsRangeError) {
  Scratch s;
  const auto spec = s.write("crossing.json", kCrossing);
  const auto atlas = s.write("atlas.json", R"({"charts": [{"start": 0, "end": 100, "eps": 1.5}]})");
  const auto r = tool("polarize --spec " + spec.string() + " --out " + (s.dir / "out").string() +
                          " --atlas " + atlas.string(),
                      s.dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error[range]"), std::string::npos) << r.err;
}

TEST(CliDeterminism, ReportsAreByteIdentical) {
  Scratch s;
  const auto spec = s.write("crossing.json", kCrossing);
  for (const std::string cmd : {"flow", "suspend", "polarize"}) {
    const auto a = s.dir / (cmd + "_a");
    const auto b = s.dir / (cmd + "_b");
    ASSERT_EQ(tool(cmd + " --spec " + spec.string() + " --out " + a.string(), s.dir).code, 0);
    ASSERT_EQ(tool(cmd + " --spec " + spec.string() + " --out " + b.string(), s.dir).code, 0);
    EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json")) << cmd;
  }
}
