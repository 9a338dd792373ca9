// Command-line front end: convergence studies, penalty constants and mesh dumps.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rtdg/error.hpp"
#include "rtdg/solver.hpp"
#include "rtdg/study.hpp"

namespace fs = std::filesystem;
using namespace rtdg;
using rtdg::Error;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw Error(fmt::format("write to {} failed", path.string()));
}

struct StudyFlags {
  std::string config_file;
  std::map<std::string, std::string> settings;
  std::string export_matrix;
  std::string report_file;
};

// Registers one override flag per config key; values are applied after the file.
void add_study_flags(CLI::App* app, StudyFlags& flags) {
  app->add_option("--config", flags.config_file, "flat key = value configuration file")->check(CLI::ExistingFile);
  const std::vector<std::pair<std::string, std::string>> keys = {
      {"case", "smooth | point_singularity | line_discontinuity"},
      {"k", "sets k_z and k_mu"},
      {"k_z", "degree parameter in z (local degree k_z + 1)"},
      {"k_mu", "degree in mu"},
      {"lambda", "interior penalty variant in [-1, 1]"},
      {"length", "slab width"},
      {"initial_levels", "uniform levels of the initial mesh"},
      {"refinements", "number of uniform refinements"},
      {"max_dofs", "dof budget"},
      {"max_steps", "adaptive step limit"},
      {"estimator", "p_hier | h_hier | local | averaging"},
      {"theta", "Doerfler parameter in (0, 1]"},
      {"tol", "source iteration tolerance"},
      {"max_iter", "source iteration limit"},
      {"alpha", "penalty parameter or auto"},
      {"penalty", "standard | pm1"},
      {"vh_norm", "full | energy"},
      {"output", "output directory"},
  };
  for (const auto& [key, help] : keys) {
    std::string flag = "--" + key;
    for (char& ch : flag)
      if (ch == '_') ch = '-';
    app->add_option_function<std::string>(
        flag, [&flags, key = key](const std::string& v) { flags.settings[key] = v; }, help);
  }
}

StudyConfig load_config(const StudyFlags& flags) {
  StudyConfig c;
  if (!flags.config_file.empty()) {
    std::ifstream in(flags.config_file);
    if (!in) throw Error(fmt::format("cannot read {}", flags.config_file));
    c = parse_config(in);
  }
  // k first so that explicit k_z / k_mu win
  if (auto it = flags.settings.find("k"); it != flags.settings.end()) apply_setting(c, "k", it->second);
  for (const auto& [key, value] : flags.settings)
    if (key != "k") apply_setting(c, key, value);
  validate(c);
  return c;
}

void export_matrix(const StudyConfig& c, const std::string& path) {
  const ProblemData problem = make_problem(c.problem, c.length);
  auto mesh = std::make_shared<const QuadTreeMesh>(build_uniform(c.length, c.initial_levels));
  const AssembledSystem sys = assemble(mesh, TensorShape{c.k_z, c.k_mu}, problem, c.lambda, study_alpha(c));
  std::ostringstream os;
  write_triplets(os, sys.op);
  write_file(path, os.str());
}

int run_uniform(const StudyFlags& flags) {
  const StudyConfig c = load_config(flags);
  if (!flags.export_matrix.empty()) export_matrix(c, flags.export_matrix);
  const UniformStudy study = run_uniform_study(c);
  std::ostringstream csv;
  write_uniform_csv(csv, study);
  std::cout << csv.str();
  if (!c.output.empty()) {
    fs::create_directories(c.output);
    write_file(fs::path(c.output) / "uniform.csv", csv.str());
  }
  if (!flags.report_file.empty()) {
    std::string rep = solve_report_header() + "\n";
    const TensorShape shape{c.k_z, c.k_mu};
    for (const UniformRow& r : study.rows)
      rep += fmt::format("{},{},{},{},{},{},{:.6e},{:.6e},{:.6e}\n", case_name(c.problem), shape.k_z, shape.k_mu, r.N,
                         r.dofs, r.iterations, r.report.contraction, r.error_vh, r.error_l2);
    write_file(flags.report_file, rep);
  }
  if (study.partial) std::cerr << "warning: dof budget reached, table is partial\n";
  return 0;
}

int run_adaptive(const StudyFlags& flags) {
  StudyConfig c = load_config(flags);
  if (c.output.empty()) c.output = "adaptive_out";
  if (!flags.export_matrix.empty()) export_matrix(c, flags.export_matrix);
  const AdaptiveStudy study = run_adaptive_study(c);
  const fs::path dir(c.output);
  fs::create_directories(dir);
  std::ostringstream log;
  write_adaptive_log(log, study, c);
  std::cout << log.str();
  write_file(dir / "run_log.csv", log.str());
  write_file(dir / "config.txt", serialize_config(c));
  for (std::size_t i = 0; i < study.mesh_dumps.size(); ++i)
    write_file(dir / fmt::format("mesh_step_{:03d}.txt", i), study.mesh_dumps[i]);
  for (const char* curve : {"error", "estimator", "reference"})
    write_file(dir / fmt::format("curve_{}.csv", curve), curve_csv(study, curve, c));
  for (const AdaptStep& s : study.run.steps)
    std::cerr << fmt::format("step {:3d}  N {:7d}  dofs {:8d}  {:.3f} s\n", s.step, s.N, s.dofs, s.seconds);
  if (study.run.converged) std::cerr << "estimator vanished: loop stopped\n";
  return 0;
}

int run_constants(int kmax) {
  if (kmax < 0 || kmax > 20) throw Error("constants: kmax must lie in [0, 20]");
  std::cout << "k,C_ie,C_dt,alpha\n";
  for (const PenaltyConstants& r : penalty_table(kmax))
    std::cout << fmt::format("{},{:.12g},{:.12g},{:.12g}\n", r.k, r.c_ie, r.c_dt, r.alpha);
  return 0;
}

int run_dump_mesh(double length, int levels, const std::vector<std::string>& rounds) {
  if (levels < 0 || levels > 12) throw Error("dump-mesh: levels must lie in [0, 12]");
  QuadTreeMesh mesh = build_uniform(length, levels);
  for (const std::string& round : rounds) {
    std::vector<ElementId> ids;
    std::stringstream ss(round);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      std::size_t pos = 0;
      const unsigned long v = std::stoul(tok, &pos);
      if (pos != tok.size()) throw Error(fmt::format("dump-mesh: bad element id '{}'", tok));
      ids.push_back(static_cast<ElementId>(v));
    }
    mesh.refine(ids);
  }
  write_mesh(std::cout, mesh);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-space DG solver for slab radiative transfer"};
  app.require_subcommand(1);

  CLI::App* study = app.add_subcommand("study", "uniform or adaptive convergence study");
  study->require_subcommand(1);
  StudyFlags uflags, aflags;
  CLI::App* uniform = study->add_subcommand("uniform", "uniformly refined meshes");
  add_study_flags(uniform, uflags);
  uniform->add_option("--export-matrix", uflags.export_matrix, "write b_h on the initial mesh as row col value");
  uniform->add_option("--report", uflags.report_file, "write one solve report row per mesh");
  CLI::App* adaptive = study->add_subcommand("adaptive", "solve-estimate-mark-refine loop");
  add_study_flags(adaptive, aflags);
  adaptive->add_option("--export-matrix", aflags.export_matrix, "write b_h on the initial mesh as row col value");

  int kmax = 6;
  CLI::App* constants = app.add_subcommand("constants", "inverse-inequality and penalty constants");
  constants->add_option("--kmax", kmax, "largest degree")->capture_default_str();

  double length = 1.0;
  int levels = 2;
  std::vector<std::string> rounds;
  CLI::App* dump = app.add_subcommand("dump-mesh", "print a mesh in text form");
  dump->add_option("--length", length, "slab width")->capture_default_str();
  dump->add_option("--levels", levels, "uniform levels")->capture_default_str();
  dump->add_option("--refine", rounds, "comma-separated leaf ids per refinement round (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*uniform) return run_uniform(uflags);
    if (*adaptive) return run_adaptive(aflags);
    if (*constants) return run_constants(kmax);
    if (*dump) return run_dump_mesh(length, levels, rounds);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
