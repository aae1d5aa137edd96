#include <string>

#include "CLI11.hpp"

#include "cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Spectral flow, suspension, spectral sections and polarized replacement for sampled "
               "self-adjoint families"};
  app.require_subcommand(1);

  fredholm::cli::RunOptions opts;
  std::string spec;
  std::string out = opts.out.string();
  std::string section;
  std::string atlas;
  std::size_t query_sample = 0;
  double query_s = 0.0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--spec", spec, "Family spec (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory")->capture_default_str();
    sub->add_option("--t-samples", opts.t_samples, "Suspension samples on [0, pi]")
        ->capture_default_str();
    sub->add_option("--grid-refine", opts.grid_refine, "Oracle refinement factor")
        ->capture_default_str();
    sub->add_option("--eps-gap-tol", opts.eps_gap_tol, "Minimal gap between +-eps and spectra")
        ->capture_default_str();
    sub->add_option("--seed", opts.seed, "Seed for randomized chart lengths (0: fixed)")
        ->capture_default_str();
    sub->add_flag("--emit-frames", opts.emit_frames, "Write section frames");
    sub->add_flag("--emit-branches", opts.emit_branches, "Write eigenvalue branch CSV");
    sub->add_option("--atlas", atlas, "Atlas file instead of the built one")
        ->check(CLI::ExistingFile);
  };

  CLI::App* flow = app.add_subcommand("flow", "Spectral flow by three routes");
  CLI::App* suspend = app.add_subcommand("suspend", "Suspension lemma checks and index");
  CLI::App* sec = app.add_subcommand("section", "Spectral section existence and deformation");
  CLI::App* polarize = app.add_subcommand("polarize", "Finite-polarized replacement");
  for (CLI::App* sub : {flow, suspend, sec, polarize}) common(sub);
  auto* sec_file = sec->add_option("--section", section, "Weak section file (JSON)")
                       ->check(CLI::ExistingFile);
  auto* sec_auto = sec->add_flag("--auto", opts.auto_section, "Build a witness section");
  sec_file->excludes(sec_auto);
  auto* qx = sec->add_option("--query-sample", query_sample, "Homotopy query sample");
  auto* qs = sec->add_option("--query-s", query_s, "Homotopy query parameter in [0, 1]");
  qx->needs(qs);
  qs->needs(qx);

  CLI11_PARSE(app, argc, argv);

  opts.spec = spec;
  opts.out = out;
  if (!section.empty()) opts.section = section;
  if (!atlas.empty()) opts.atlas = atlas;
  if (*qx) opts.query_sample = query_sample;
  if (*qs) opts.query_s = query_s;
  return fredholm::cli::run(app.get_subcommands().front()->get_name(), opts);
}
