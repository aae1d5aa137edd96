#include "spec.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace fredholm::cli {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw Error(ErrorKind::parse, "spec field '" + path + "': " + why);
}

const Json& require(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path.empty() ? key : path + "." + key, "missing");
  return *it;
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string at_index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

void only_keys(const Json& j, const std::set<std::string>& allowed, const std::string& path) {
  if (!j.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) fail(join(path, it.key()), "unknown field");
  }
}

double number(const Json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

long integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<long>();
}

ComplexMatrix parse_matrix(const Json& j, Eigen::Index dim, const std::string& path) {
  only_keys(j, {"re", "im"}, path);
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  for (const char* part : {"re", "im"}) {
    const std::string p = join(path, part);
    auto it = j.find(part);
    if (it == j.end()) {
      if (std::string(part) == "im") continue;
      fail(p, "missing");
    }
    if (!it->is_array() || static_cast<Eigen::Index>(it->size()) != dim) {
      fail(p, "expected " + std::to_string(dim) + " rows");
    }
    for (Eigen::Index r = 0; r < dim; ++r) {
      const Json& row = (*it)[static_cast<std::size_t>(r)];
      const std::string rp = at_index(p, static_cast<std::size_t>(r));
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != dim) {
        fail(rp, "expected " + std::to_string(dim) + " entries");
      }
      for (Eigen::Index c = 0; c < dim; ++c) {
        const double v = number(row[static_cast<std::size_t>(c)], at_index(rp, static_cast<std::size_t>(c)));
        if (std::string(part) == "re") {
          m(r, c).real(v);
        } else {
          m(r, c).imag(v);
        }
      }
    }
  }
  return m;
}

Closure parse_closure(const Json& j, const std::string& path) {
  only_keys(j, {"type", "shift", "interior_radius"}, path);
  const Json& type = require(j, "type", path);
  if (!type.is_string()) fail(join(path, "type"), "expected a string");
  const std::string t = type.get<std::string>();
  int shift = 0;
  if (auto it = j.find("shift"); it != j.end()) shift = static_cast<int>(integer(*it, join(path, "shift")));
  if (t == "open_path") {
    if (shift != 0) fail(join(path, "shift"), "open paths take no shift");
    return Closure::open();
  }
  if (t == "exact_loop") {
    if (shift != 0) fail(join(path, "shift"), "exact loops take no shift");
    return Closure::exact();
  }
  if (t == "shifted_loop") return Closure::shifted(shift);
  fail(join(path, "type"), "expected open_path, exact_loop or shifted_loop");
}

std::optional<PolarizedBands> parse_bands(const Json& j, const std::string& path) {
  only_keys(j, {"minus", "plus"}, path);
  return PolarizedBands{integer(require(j, "minus", path), join(path, "minus")),
                        integer(require(j, "plus", path), join(path, "plus"))};
}

OperatorFamily with_error_path(const std::string& path, const std::function<OperatorFamily()>& build) {
  try {
    return build();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::parse) throw;
    throw Error(e.kind(), "spec field '" + path + "': " + e.what());
  }
}

}  // namespace

Json read_json_file(const std::filesystem::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::parse, what + ": cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::parse, what + ": malformed JSON in " + path.string() + ": " + e.what());
  }
}

OperatorFamily parse_family_spec(const Json& spec) {
  only_keys(spec, {"generator", "params", "sampled", "closure", "polarized_bands", "scale"}, "");
  const bool has_gen = spec.contains("generator");
  const bool has_sampled = spec.contains("sampled");
  if (has_gen == has_sampled) fail("generator", "give exactly one of 'generator' and 'sampled'");

  if (has_gen) {
    const Json& g = spec["generator"];
    if (!g.is_string()) fail("generator", "expected a string");
    GeneratorParams params;
    if (auto it = spec.find("params"); it != spec.end()) {
      if (!it->is_object()) fail("params", "expected an object");
      for (auto p = it->begin(); p != it->end(); ++p) {
        params[p.key()] = number(p.value(), "params." + p.key());
      }
    }
    if (spec.contains("scale")) fail("scale", "only valid for sampled families");
    OperatorFamily f = with_error_path("params", [&] { return generate(g.get<std::string>(), params); });
    if (auto it = spec.find("closure"); it != spec.end()) {
      const Closure c = parse_closure(*it, "closure");
      if (c.type != f.grid().closure().type || c.shift != f.grid().closure().shift) {
        fail("closure", "does not match the closure fixed by the generator");
      }
    }
    if (spec.contains("polarized_bands")) {
      const auto bands = parse_bands(spec["polarized_bands"], "polarized_bands");
      if (!f.polarized_bands() || f.polarized_bands()->minus != bands->minus ||
          f.polarized_bands()->plus != bands->plus) {
        fail("polarized_bands", "does not match the generator's frozen bands");
      }
    }
    return f;
  }

  if (spec.contains("params")) fail("params", "only valid together with 'generator'");
  if (spec.contains("scale") && !(number(spec["scale"], "scale") > 0.0)) fail("scale", "must be positive");
  const Json& s = spec["sampled"];
  only_keys(s, {"dim", "grid", "matrices"}, "sampled");
  const long dim = integer(require(s, "dim", "sampled"), "sampled.dim");
  if (dim < 1) fail("sampled.dim", "must be positive");
  const Json& grid = require(s, "grid", "sampled");
  if (!grid.is_array()) fail("sampled.grid", "expected an array of parameter values");
  std::vector<double> samples;
  for (std::size_t i = 0; i < grid.size(); ++i) samples.push_back(number(grid[i], at_index("sampled.grid", i)));
  const Json& mats = require(s, "matrices", "sampled");
  if (!mats.is_array() || mats.size() != samples.size()) {
    fail("sampled.matrices", "expected one matrix per grid value");
  }
  Closure closure = Closure::open();
  FamilyOptions opts;
  if (auto it = spec.find("closure"); it != spec.end()) {
    closure = parse_closure(*it, "closure");
    if (auto r = it->find("interior_radius"); r != it->end()) {
      opts.interior_radius = number(*r, "closure.interior_radius");
    }
  }
  if (auto it = spec.find("polarized_bands"); it != spec.end()) {
    opts.polarized_bands = parse_bands(*it, "polarized_bands");
  }
  if (auto it = spec.find("scale"); it != spec.end()) opts.scale = it->get<double>();

  std::vector<HermitianOperator> ops;
  for (std::size_t i = 0; i < mats.size(); ++i) {
    const std::string p = at_index("sampled.matrices", i);
    ComplexMatrix m = parse_matrix(mats[i], dim, p);
    try {
      ops.emplace_back(std::move(m));
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, "spec field '" + p + "': " + e.what());
    }
  }
  return with_error_path("sampled", [&] {
    const GridKind kind = closure.is_loop() ? GridKind::circle_loop : GridKind::interval_path;
    return OperatorFamily(ParameterGrid(kind, samples, closure), std::move(ops), opts);
  });
}

Atlas parse_atlas(const Json& j) {
  only_keys(j, {"charts"}, "");
  const Json& charts = require(j, "charts", "");
  if (!charts.is_array()) fail("charts", "expected an array");
  Atlas a;
  for (std::size_t i = 0; i < charts.size(); ++i) {
    const std::string p = at_index("charts", i);
    only_keys(charts[i], {"start", "end", "eps"}, p);
    const long start = integer(require(charts[i], "start", p), p + ".start");
    const long end = integer(require(charts[i], "end", p), p + ".end");
    if (start < 0 || end < start) fail(p, "needs 0 <= start <= end");
    a.charts.push_back(AdaptedChart{static_cast<std::size_t>(start), static_cast<std::size_t>(end),
                                    number(require(charts[i], "eps", p), p + ".eps")});
  }
  return a;
}

WeakSpectralSection parse_section(const Json& j, Eigen::Index ambient_dim) {
  only_keys(j, {"reference_cut", "frames"}, "");
  WeakSpectralSection s;
  if (auto it = j.find("reference_cut"); it != j.end()) s.reference_cut = number(*it, "reference_cut");
  const Json& frames = require(j, "frames", "");
  if (!frames.is_array()) fail("frames", "expected an array");
  for (std::size_t x = 0; x < frames.size(); ++x) {
    const std::string p = at_index("frames", x);
    if (!frames[x].is_array()) fail(p, "expected a list of columns");
    ComplexMatrix m(ambient_dim, static_cast<Eigen::Index>(frames[x].size()));
    for (std::size_t c = 0; c < frames[x].size(); ++c) {
      const Json& col = frames[x][c];
      const std::string cp = at_index(p, c);
      if (!col.is_array() || static_cast<Eigen::Index>(col.size()) != ambient_dim) {
        fail(cp, "expected " + std::to_string(ambient_dim) + " entries");
      }
      for (std::size_t r = 0; r < col.size(); ++r) {
        const std::string ep = at_index(cp, r);
        only_keys(col[r], {"re", "im"}, ep);
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            Complex(number(require(col[r], "re", ep), ep + ".re"),
                    number(require(col[r], "im", ep), ep + ".im"));
      }
    }
    try {
      s.subspaces.push_back(Subspace::from_orthonormal(std::move(m), 1e-8));
    } catch (const Error& e) {
      throw Error(ErrorKind::parse, "spec field '" + p + "': " + e.what());
    }
  }
  return s;
}

Json matrix_to_json(const ComplexMatrix& m) {
  Json re = Json::array();
  Json im = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json rr = Json::array();
    Json ii = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      rr.push_back(m(r, c).real());
      ii.push_back(m(r, c).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ii));
  }
  Json out;
  out["re"] = std::move(re);
  out["im"] = std::move(im);
  return out;
}

Json frame_to_json(const Subspace& s) {
  Json cols = Json::array();
  for (Eigen::Index c = 0; c < s.dim(); ++c) {
    Json col = Json::array();
    for (Eigen::Index r = 0; r < s.ambient_dim(); ++r) {
      Json e;
      e["re"] = s.frame()(r, c).real();
      e["im"] = s.frame()(r, c).imag();
      col.push_back(std::move(e));
    }
    cols.push_back(std::move(col));
  }
  return cols;
}

Json section_to_json(const WeakSpectralSection& s) {
  Json out;
  out["reference_cut"] = s.reference_cut;
  Json frames = Json::array();
  for (const Subspace& sx : s.subspaces) frames.push_back(frame_to_json(sx));
  out["frames"] = std::move(frames);
  return out;
}

Json atlas_to_json(const Atlas& a) {
  Json charts = Json::array();
  for (const AdaptedChart& c : a.charts) {
    Json j;
    j["start"] = c.start;
    j["end"] = c.end;
    j["eps"] = c.eps;
    charts.push_back(std::move(j));
  }
  Json out;
  out["charts"] = std::move(charts);
  return out;
}

Json family_to_json(const OperatorFamily& f) {
  Json sampled;
  sampled["dim"] = f.dim();
  sampled["grid"] = f.grid().samples();
  Json mats = Json::array();
  for (std::size_t i = 0; i < f.size(); ++i) mats.push_back(matrix_to_json(f.matrix(i)));
  sampled["matrices"] = std::move(mats);
  Json closure;
  closure["type"] = std::string(to_string(f.grid().closure().type));
  closure["shift"] = f.grid().closure().shift;
  if (f.options().interior_radius) closure["interior_radius"] = *f.options().interior_radius;
  Json out;
  out["sampled"] = std::move(sampled);
  out["closure"] = std::move(closure);
  if (f.polarized_bands()) {
    Json b;
    b["minus"] = f.polarized_bands()->minus;
    b["plus"] = f.polarized_bands()->plus;
    out["polarized_bands"] = std::move(b);
  }
  if (f.options().scale != 1.0) out["scale"] = f.options().scale;
  return out;
}

}  // namespace fredholm::cli
