#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "qel/common.hpp"
#include "qel/io.hpp"

namespace {

struct SubSpec {
  const char* name;
  const char* help;
};

constexpr SubSpec kSubcommands[] = {
    {"balance", "solve the (twisted) balance equation over the level range"},
    {"bergman", "sample the Bergman density of the model metric per level"},
    {"equiv-rr", "check both sides of the equivariant density identity"},
    {"fit", "exact dimension and weight-trace polynomial fits"},
    {"chow", "Chow weights of the configured action over the levels"},
    {"df", "Donaldson-Futaki invariant of the configured action"},
    {"inner", "inner-product table of torus directions"},
    {"relative-df", "extremal direction and relative DF over a scan"},
    {"futaki", "curvature-integral form of the Futaki invariant"},
    {"limit-weight", "extrapolated limit weight against self-consistent runs"},
    {"compare", "diff the numeric outputs of two manifests"},
};

}  // namespace

int main(int argc, char** argv) {
  if (const char* t = std::getenv("QEL_THREADS")) {
    int n = std::atoi(t);
    if (n > 0) Eigen::setNbThreads(n);
  }

  CLI::App app{"numerical laboratory for quantised extremal metrics"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = "qel_out";
  for (const SubSpec& s : kSubcommands) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config_path, "experiment config (JSON)")
        ->required();
    sub->add_option("--out", out_dir, "output directory (default qel_out)");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string op = app.get_subcommands().front()->get_name();

  try {
    qel::ExperimentConfig cfg = qel::load_config(config_path);
    if (op == "compare") {
      if (cfg.compare_a.empty())
        throw qel::ConfigError("compare needs a compare block in the config");
      qel::CompareReport rep = qel::compare_runs(
          cfg.compare_a, cfg.compare_b, cfg.compare_tolerance, out_dir);
      std::cout << "compared " << rep.compared.size() << " differing cells, "
                << rep.skipped.size() << " notes; max relative difference "
                << rep.max_rel_diff << " against tolerance " << rep.tolerance
                << (rep.within ? " (within)" : " (exceeded)") << "\n";
      return rep.within ? 0 : 1;
    }
    qel::RunManifest m = qel::run_experiment(cfg, op, out_dir);
    for (const qel::OperationRecord& rec : m.operations) {
      std::cout << rec.name;
      if (rec.k >= 0) std::cout << " k=" << rec.k;
      std::cout << ": " << rec.status << "\n";
    }
    std::cout << "manifest " << out_dir << "/qel_manifest.json (config "
              << m.config_hash << ")\n";
    return qel::manifest_exit_code(m);
  } catch (const qel::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const qel::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 1;
  } catch (const qel::InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
