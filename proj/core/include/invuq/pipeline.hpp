#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "invuq/config.hpp"
#include "invuq/inversion.hpp"

namespace invuq {

/// Run record: config hash, seed, artifact paths, format versions, timings.
/// Commands refuse to run when a listed input artifact has been deleted.
struct RunManifest {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> artifacts;  // name -> path relative to out dir
  std::map<std::string, std::uint32_t> format_versions;
  std::map<std::string, double> timings_ms;

  void save(const std::filesystem::path& out_dir) const;
  static RunManifest load(const std::filesystem::path& out_dir);

  void record(const std::string& name, const std::string& relpath);
  /// Absolute path of a listed artifact; throws MissingArtifact when the
  /// entry is absent or the file has been deleted.
  std::filesystem::path need(const std::filesystem::path& out_dir, const std::string& name) const;
};

// Pipeline commands. All draw from substreams of RngStream(cfg.seed), so a
// rerun with the same config and seed reproduces every artifact byte for
// byte.
void cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
void cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
void cmd_invert(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                const std::string& method);
void cmd_evaluate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                  const std::string& method, const std::string& mode);

/// Observations round-trip through the observations.csv artifact.
void write_observations_csv(const std::filesystem::path& path, const FlowProblem& problem,
                            const ObsSpec& spec, const Observations& obs);
Observations read_observations_csv(const std::filesystem::path& path);

struct OracleCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Conjugate-Gaussian exactness of the randomized latent sampler on a random
/// linear forward map (20 parameters, 15 observations, 2000 samples).
std::vector<OracleCheck> linear_gaussian_oracle(std::uint64_t seed);
/// Conjugate Bayesian linear-regression calibration of randomized training
/// (linear single-layer network, 2000 members).
std::vector<OracleCheck> randomized_training_oracle(std::uint64_t seed);

/// Runs both linear-Gaussian oracle suites, printing one line per check.
/// Returns the number of failed checks.
int run_oracle_suite(std::ostream& out, std::uint64_t seed);

}  // namespace invuq
