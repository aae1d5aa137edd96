#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "fredholm/index.hpp"
#include "fredholm/polarize.hpp"
#include "fredholm/suspension.hpp"

namespace fredholm::cli {

std::string fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string slurp(const std::filesystem::path& p, const std::string& what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::parse, what + ": cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Json parse_text(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::parse, what + ": malformed JSON: " + e.what());
  }
}

struct Context {
  OperatorFamily family;
  Json inputs;
  std::optional<Json> section;
  std::optional<Atlas> atlas;
};

Context load(const RunOptions& o, Json command_options) {
  const std::string spec_text = slurp(o.spec, "spec");
  std::string digest_input = spec_text;
  OperatorFamily family = parse_family_spec(parse_text(spec_text, "spec"));

  std::optional<Json> section;
  if (o.section) {
    const std::string text = slurp(*o.section, "section");
    digest_input += '\x1f' + text;
    section = parse_text(text, "section");
  }
  std::optional<Atlas> atlas;
  if (o.atlas) {
    const std::string text = slurp(*o.atlas, "atlas");
    digest_input += '\x1f' + text;
    atlas = parse_atlas(parse_text(text, "atlas"));
  }

  Json opts;
  opts["t_samples"] = o.t_samples;
  opts["grid_refine"] = o.grid_refine;
  opts["eps_gap_tol"] = o.eps_gap_tol;
  opts["seed"] = o.seed;
  opts["emit_frames"] = o.emit_frames;
  opts["emit_branches"] = o.emit_branches;
  opts["atlas_file"] = o.atlas.has_value();
  for (auto it = command_options.begin(); it != command_options.end(); ++it) opts[it.key()] = it.value();
  digest_input += '\x1f' + opts.dump();

  Json inputs;
  inputs["spec"] = o.spec.filename().string();
  inputs["digest"] = "fnv1a64:" + fnv1a64(digest_input);
  inputs["options"] = std::move(opts);
  Json fam;
  fam["samples"] = family.size();
  fam["dim"] = family.dim();
  fam["closure"] = std::string(to_string(family.grid().closure().type));
  fam["shift"] = family.grid().closure().shift;
  fam["polarized"] = family.polarized_bands().has_value();
  inputs["family"] = std::move(fam);
  return Context{std::move(family), std::move(inputs), std::move(section), std::move(atlas)};
}

class Invariants {
public:
  void add(const std::string& name, bool pass, Json detail = nullptr) {
    Json j;
    j["name"] = name;
    j["pass"] = pass;
    if (!detail.is_null()) j["detail"] = std::move(detail);
    list_.push_back(std::move(j));
    all_ = all_ && pass;
  }
  bool all() const noexcept { return all_; }
  const Json& json() const noexcept { return list_; }

private:
  Json list_ = Json::array();
  bool all_ = true;
};

AtlasOptions atlas_options(const RunOptions& o) {
  AtlasOptions a;
  a.gap_tol = o.eps_gap_tol;
  a.length_seed = o.seed;
  return a;
}

Atlas make_atlas(const Context& ctx, const RunOptions& o) {
  if (ctx.atlas) {
    ctx.atlas->validate(ctx.family.size());
    return *ctx.atlas;
  }
  return build_atlas(ctx.family, atlas_options(o));
}

CommandResult finish(const std::string& command, Context& ctx, Json outputs, const Invariants& inv,
                     bool obstruction = false) {
  CommandResult r;
  r.outcome = !inv.all() ? Outcome::invariant_failure
                         : (obstruction ? Outcome::obstruction : Outcome::ok);
  r.report["command"] = command;
  r.report["version"] = "0.1.0";
  r.report["inputs"] = std::move(ctx.inputs);
  r.report["outputs"] = std::move(outputs);
  r.report["invariants"] = inv.json();
  r.report["status"] = r.outcome == Outcome::ok            ? "ok"
                       : r.outcome == Outcome::obstruction ? "obstruction"
                                                           : "invariant_failure";
  return r;
}

std::string branches_csv(const OperatorFamily& f) {
  std::ostringstream os;
  os.precision(17);
  os << "sample,t,k,eigenvalue\n";
  const auto spectra = f.spectra();
  for (std::size_t x = 0; x < f.size(); ++x) {
    for (Eigen::Index k = 0; k < spectra[x].dim(); ++k) {
      os << x << ',' << f.grid()[x] << ',' << k << ',' << spectra[x].eigenvalues(k) << '\n';
    }
  }
  return os.str();
}

template <class F>
auto with_hint(const std::string& hint, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::resolution || e.kind() == ErrorKind::boundary_zero ||
        e.kind() == ErrorKind::atlas_failure) {
      throw Error(e.kind(), std::string(e.what()) + " [hint: " + hint + "]");
    }
    throw;
  }
}

const char* kRefineHint = "refine the grid: more samples or a larger --grid-refine";

}  // namespace

// ---------------------------------------------------------------------------

CommandResult cmd_flow(const RunOptions& o) {
  Context ctx = load(o, Json::object());
  const OperatorFamily& f = ctx.family;
  const Atlas atlas = with_hint(kRefineHint, [&] { return make_atlas(ctx, o); });
  const IndexChain chain = with_hint(kRefineHint, [&] { return index_chain(f, atlas); });
  const long chartwise = spectral_flow_chartwise(chain);
  OracleOptions oracle_opts;
  oracle_opts.refine = o.grid_refine;
  const long oracle = with_hint(kRefineHint, [&] { return spectral_flow_oracle(f, oracle_opts); });
  const long endpoint = with_hint(kRefineHint, [&] { return endpoint_signature_flow(f); });

  Invariants inv;
  bool adapted = true;
  for (const AdaptedChart& c : atlas.charts) adapted = adapted && is_adapted(f, c).adapted;
  inv.add("atlas_adapted", adapted);
  bool decomposed = true;
  for (const ChainOverlap& ov : chain.overlaps) {
    decomposed = decomposed && ov.v_large.dim() == ov.u_minus.dim() + ov.v_small.dim() + ov.u_plus.dim();
  }
  inv.add("overlap_decomposition", decomposed);
  inv.add("routes_agree", chartwise == oracle && oracle == endpoint);

  Json out;
  out["flow"] = chartwise;
  Json routes;
  routes["chartwise"] = chartwise;
  routes["oracle"] = oracle;
  routes["endpoint"] = endpoint;
  out["routes"] = std::move(routes);
  out["agree"] = chartwise == oracle && oracle == endpoint;
  out["atlas"] = atlas_to_json(atlas)["charts"];
  Json segs = Json::array();
  for (const ChainSegment& s : chain.segments) {
    Json j;
    j["chart"] = s.chart;
    j["left"] = s.left;
    j["right"] = s.right;
    j["eps"] = s.eps;
    j["band_rank"] = s.bands.front().dim();
    j["n_below_left"] = s.n_below_left;
    j["n_below_right"] = s.n_below_right;
    segs.push_back(std::move(j));
  }
  out["segments"] = std::move(segs);
  Json ovs = Json::array();
  for (const ChainOverlap& ov : chain.overlaps) {
    Json j;
    j["sample"] = ov.sample;
    j["eps_small"] = ov.eps_small;
    j["eps_large"] = ov.eps_large;
    j["dim_v_small"] = ov.v_small.dim();
    j["dim_u_minus"] = ov.u_minus.dim();
    j["dim_u_plus"] = ov.u_plus.dim();
    j["dim_v_large"] = ov.v_large.dim();
    ovs.push_back(std::move(j));
  }
  out["overlaps"] = std::move(ovs);

  CommandResult r = finish("flow", ctx, std::move(out), inv);
  if (o.emit_branches) r.files["branches.csv"] = branches_csv(f);
  return r;
}

CommandResult cmd_suspend(const RunOptions& o) {
  Context ctx = load(o, Json::object());
  const OperatorFamily& f = ctx.family;
  const SuspensionFamily sf = suspend(f, o.t_samples);
  const SuspensionIndexReport si = suspension_index(sf);
  const Atlas atlas = with_hint(kRefineHint, [&] { return make_atlas(ctx, o); });
  const long flow =
      with_hint(kRefineHint, [&] { return spectral_flow_chartwise(index_chain(f, atlas)); });

  // Lemma table: every sample, 50 interior t values, eps from the first chart
  // containing the sample.
  std::ostringstream csv;
  csv.precision(17);
  csv << "sample,t,delta,band_dim,distance,spectrum_residual,zero_band_dim\n";
  double worst_distance = 0.0;
  double worst_spectrum = 0.0;
  bool zero_band = true;
  for (std::size_t x = 0; x < f.size(); ++x) {
    double eps = 0.0;
    for (const AdaptedChart& c : atlas.charts) {
      if (c.contains(x)) {
        eps = c.eps;
        break;
      }
    }
    for (int j = 1; j <= 50; ++j) {
      const double t = std::numbers::pi * j / 51.0;
      const double spec = suspension_spectrum_check(f.op(x), t);
      const LemmaBandReport lemma = lemma_band_check(f.op(x), eps, t);
      const Eigen::Index zb = suspension_band_dim(f.op(x), 0.5 * std::abs(std::cos(t)), t);
      worst_distance = std::max(worst_distance, lemma.distance);
      worst_spectrum = std::max(worst_spectrum, spec);
      zero_band = zero_band && zb == 0;
      csv << x << ',' << t << ',' << lemma.delta << ',' << lemma.band_dim << ',' << lemma.distance
          << ',' << spec << ',' << zb << '\n';
    }
  }

  Invariants inv;
  inv.add("index_equals_flow", si.index == flow);
  inv.add("spectrum_identity", worst_spectrum <= 1e-9, worst_spectrum);
  inv.add("band_lemma", worst_distance <= 1e-8, worst_distance);
  inv.add("zero_band_below_cos", zero_band);
  inv.add("off_equator_invertible", true, si.min_off_equator_sigma);

  Json out;
  out["index"] = si.index;
  out["flow"] = flow;
  out["equal"] = si.index == flow;
  out["t_samples"] = sf.t_samples.size();
  Json kernels = Json::array();
  for (const KernelPoint& k : si.kernels) {
    Json j;
    j["sample"] = k.x;
    j["t"] = k.t;
    j["multiplicity"] = k.multiplicity;
    kernels.push_back(std::move(j));
  }
  out["kernels"] = std::move(kernels);
  out["det_winding"] = si.det_winding ? Json(*si.det_winding) : Json(nullptr);
  out["lemma_rows"] = f.size() * 50;
  out["lemma_max_distance"] = worst_distance;
  out["spectrum_max_residual"] = worst_spectrum;

  CommandResult r = finish("suspend", ctx, std::move(out), inv);
  r.files["lemma.csv"] = csv.str();
  if (o.emit_branches) r.files["suspension_spectra.csv"] = suspension_spectra_csv(sf);
  return r;
}

CommandResult cmd_section(const RunOptions& o) {
  if (o.auto_section == o.section.has_value()) {
    throw Error(ErrorKind::validation, "section: pass exactly one of --section FILE and --auto");
  }
  Json copts;
  copts["mode"] = o.auto_section ? "auto" : "file";
  if (o.query_sample) copts["query_sample"] = *o.query_sample;
  if (o.query_s) copts["query_s"] = *o.query_s;
  Context ctx = load(o, copts);
  const OperatorFamily& f = ctx.family;
  Invariants inv;
  Json out;

  std::optional<DeformResult> d;
  std::optional<WeakSpectralSection> input;
  if (o.auto_section) {
    AtlasOptions ao = atlas_options(o);
    SectionExistence se = with_hint(kRefineHint, [&] { return section_existence(f, ao); });
    out["exists"] = se.exists;
    out["flow"] = se.flow;
    if (se.flow != 0) {
      out["obstruction"] = se.flow;
      inv.add("obstruction_is_flow", true, se.flow);
      return finish("section", ctx, std::move(out), inv, true);
    }
    out["witness_rank"] = *se.witness_rank;
    inv.add("witness_closure", se.closure_ok);
    d = std::move(se.witness);
  } else {
    input = parse_section(*ctx.section, f.dim());
    const Atlas atlas = with_hint(kRefineHint, [&] { return make_atlas(ctx, o); });
    const WeakSectionReport weak = weak_section_report(f, *input);
    Json w;
    w["dim_defect_min"] = *std::min_element(weak.dim_defect.begin(), weak.dim_defect.end());
    w["dim_defect_max"] = *std::max_element(weak.dim_defect.begin(), weak.dim_defect.end());
    w["max_step"] = weak.max_step;
    w["continuous"] = weak.continuous;
    out["weak_section"] = std::move(w);
    d = deform_to_spectral_section(f, *input, atlas);
  }

  double endpoint_err = 0.0;
  double identity = 0.0;
  bool dims = true;
  for (std::size_t x = 0; x < f.size(); ++x) {
    const Subspace start = d->homotopy.at(x, 0.0);
    const Subspace& before = input ? input->subspaces[x] : start;
    endpoint_err = std::max({endpoint_err, subspace_distance(start, before),
                             subspace_distance(d->homotopy.at(x, 1.0), d->section.subspaces[x])});
    identity = std::max(identity, subspace_distance(before, d->section.subspaces[x]));
    dims = dims && before.dim() == d->section.subspaces[x].dim();
  }
  inv.add("sandwich", d->verification.ok, d->verification.worst_residual);
  inv.add("dim_preserved", dims);
  inv.add("homotopy_endpoints", endpoint_err <= 1e-9, endpoint_err);

  out["section_dim"] = d->section.subspaces.front().dim();
  out["nu"] = d->nu;
  out["nu_perp"] = d->nu_perp;
  out["margin"] = d->margin;
  out["r_max"] = *std::max_element(d->r.begin(), d->r.end());
  out["r"] = d->r;
  out["mu"] = d->mu;
  out["mu_perp"] = d->mu_perp;
  Json sw;
  sw["ok"] = d->verification.ok;
  sw["worst_sample"] = d->verification.worst_sample;
  sw["worst_residual"] = d->verification.worst_residual;
  out["sandwich"] = std::move(sw);
  out["max_change"] = identity;
  if (o.query_sample || o.query_s) {
    if (!o.query_sample || !o.query_s) {
      throw Error(ErrorKind::validation, "section: --query-sample and --query-s go together");
    }
    const Subspace q = d->homotopy.at(*o.query_sample, *o.query_s);
    Json j;
    j["sample"] = *o.query_sample;
    j["s"] = *o.query_s;
    j["dim"] = q.dim();
    j["frame"] = frame_to_json(q);
    out["query"] = std::move(j);
  }

  CommandResult r = finish("section", ctx, std::move(out), inv);
  if (o.emit_frames) r.files["section.json"] = section_to_json(d->section).dump(2) + "\n";
  return r;
}

CommandResult cmd_polarize(const RunOptions& o) {
  Context ctx = load(o, Json::object());
  const OperatorFamily& f = ctx.family;
  PolarizedReplacement rep = [&] {
    if (ctx.atlas) {
      const double scale = polarization_scale(f);
      const OperatorFamily scaled = scaled_family(f, scale);
      ctx.atlas->validate(scaled.size());
      const PartitionOfUnity pou = PartitionOfUnity::subordinate(*ctx.atlas, scaled.size());
      return apply_chi_family(scaled, radius_function(*ctx.atlas, pou), scale);
    }
    return with_hint(kRefineHint, [&] { return finite_polarized_replace(f, atlas_options(o)); });
  }();
  const FlowPreservation fp = with_hint(kRefineHint, [&] { return flow_preservation_check(rep); });

  bool knots = true;
  for (double r : rep.r) knots = knots && chi_eval(r, r / 2) == r / 2 && chi_eval(r, r) == 1.0;
  const FinitePolarizedReport fpc = finite_polarized_check(rep.replaced);
  double change = 0.0;
  for (std::size_t x = 0; x < f.size(); ++x) {
    change = std::max(change, (rep.replaced.matrix(x) - rep.original.matrix(x)).cwiseAbs().maxCoeff());
  }

  Invariants inv;
  inv.add("flow_preserved", fp.preserved);
  inv.add("band_identity", rep.band_identity_residual <= 1e-9, rep.band_identity_residual);
  inv.add("chi_knots", knots);
  inv.add("finite_polarized", fpc.ok, fpc.ok ? Json(nullptr) : Json(fpc.violation));

  Json out;
  out["scale"] = rep.scale;
  Json bands;
  bands["minus"] = rep.frozen.minus;
  bands["plus"] = rep.frozen.plus;
  out["frozen_bands"] = std::move(bands);
  out["flow_before"] = fp.flow_before;
  out["flow_after"] = fp.flow_after;
  out["preserved"] = fp.preserved;
  out["band_identity_residual"] = rep.band_identity_residual;
  out["max_change"] = change;
  out["shared_atlas"] = atlas_to_json(fp.shared)["charts"];
  out["r"] = rep.r;

  CommandResult r = finish("polarize", ctx, std::move(out), inv);
  r.files["replaced_family.json"] = family_to_json(rep.replaced).dump(2) + "\n";
  return r;
}

int run(const std::string& command, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  CommandResult result;
  try {
    if (command == "flow") {
      result = cmd_flow(options);
    } else if (command == "suspend") {
      result = cmd_suspend(options);
    } else if (command == "section") {
      result = cmd_section(options);
    } else if (command == "polarize") {
      result = cmd_polarize(options);
    } else {
      throw Error(ErrorKind::validation, "unknown command '" + command + "'");
    }
    std::filesystem::create_directories(options.out);
    auto write = [&](const std::string& name, const std::string& text) {
      std::ofstream os(options.out / name, std::ios::binary);
      if (!os) throw Error(ErrorKind::validation, "cannot write " + (options.out / name).string());
      os << text;
    };
    write("report.json", result.report.dump(2) + "\n");
    for (const auto& [name, text] : result.files) write(name, text);
    const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
    Json timing;
    timing["command"] = command;
    timing["wall_time_seconds"] = wall.count();
    write("timing.json", timing.dump(2) + "\n");
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  std::cout << command << ": " << result.report["status"].get<std::string>() << "\n";
  switch (result.outcome) {
    case Outcome::ok: return 0;
    case Outcome::obstruction: return 2;
    case Outcome::invariant_failure: return 1;
  }
  return 1;
}

}  // namespace fredholm::cli
