#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qel/polytope.hpp"
#include "qel/potential.hpp"
#include "qel/rational.hpp"

namespace qel {

// ---- experiment configuration ----

// Moment direction of a one-parameter subgroup as given in a config:
// entries are integers or "p/q" strings for the exact lattice side, or
// arbitrary reals for quadrature-side operations.
struct GeneratorSpec {
  bool present = false;
  std::vector<double> lambda_real;
  std::vector<Rational> lambda_exact;  // empty when an entry is not rational
  bool exact = false;
  double shift = 0;
  double scale = 1;
};

struct ExperimentConfig {
  int dim = 0;
  std::vector<std::vector<long>> normals;
  std::vector<Rational> offsets;
  std::map<std::vector<int>, double> perturbation;
  std::vector<long> k_list;
  int quad_order = 0;  // 0: 64 in dimension 1, 32 in dimension 2
  std::string mode = "plain";  // plain | fixed-A | self-consistent-A
  GeneratorSpec generator;
  std::vector<std::vector<Rational>> directions;  // exact scan directions
  std::vector<Rational> direction;                // single exact direction
  std::vector<Rational> beta;                     // limit-weight direction
  std::vector<long> certificate_direction;        // certificate override
  double tolerance = 1e-10;
  double outer_tolerance = 1e-8;
  long max_iter = 2000;
  std::string solver = "gradient";
  std::string start = "hilb";
  unsigned long long seed = 0;

  // compare block
  std::string compare_a;
  std::string compare_b;
  double compare_tolerance = 1e-9;

  std::string config_hash;  // 16-digit hex FNV-1a of the raw config bytes
};

std::uint64_t fnv1a64(const std::string& bytes);

// Throws ConfigError on malformed JSON, schema violations or unknown keys.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

DelzantPolytope config_polytope(const ExperimentConfig& cfg);
SymplecticPotential config_potential(const ExperimentConfig& cfg);
int config_order(const ExperimentConfig& cfg);

// ---- run manifest ----

struct OperationRecord {
  std::string name;
  long k = -1;  // -1 for level-independent records
  std::vector<std::string> outputs;
  double wall_ms = 0;
  std::string status = "ok";  // ok | error:numerical:... | error:...
};

struct RunManifest {
  std::string tool;
  std::string config_hash;
  std::map<std::string, std::string> convention;
  std::vector<OperationRecord> operations;
  std::vector<std::string> files;  // every emitted file, sorted
};

std::map<std::string, std::string> convention_header();

// Executes one subcommand over the configured levels, writing JSON reports
// and CSV tables into out_dir plus the manifest itself.  Module errors
// abort the affected level only and are recorded in the operation status.
RunManifest run_experiment(const ExperimentConfig& cfg, const std::string& op,
                           const std::string& out_dir);

RunManifest read_manifest(const std::string& path);

// worst error class over the recorded operations: 0 ok, 1 numerical,
// 2 config, 3 invariant
int manifest_exit_code(const RunManifest& m);

// ---- regression comparison ----

struct CompareReport {
  double tolerance = 0;
  double max_rel_diff = 0;
  bool within = false;
  std::vector<std::string> compared;  // "file:quantity: a b diff"
  std::vector<std::string> skipped;   // shape mismatches and counters
};

// Compares the numeric outputs listed by two manifests.  Requires equal
// convention headers and equal operation sets; array-shape mismatches are
// skipped with a note.  Writes compare.json into out_dir when non-empty.
CompareReport compare_runs(const std::string& manifest_a,
                           const std::string& manifest_b, double tolerance,
                           const std::string& out_dir);

}  // namespace qel
