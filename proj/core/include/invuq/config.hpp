#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "invuq/flow.hpp"
#include "invuq/random_field.hpp"
#include "invuq/surrogate.hpp"

namespace invuq {

/// Flat key = value configuration with [sections]; '#' starts a comment.
class IniFile {
 public:
  static IniFile parse(const std::string& text);
  static IniFile load(const std::filesystem::path& path);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;
  std::vector<std::string> get_list(const std::string& section, const std::string& key) const;

  /// Sorted "section.key = value" lines; the hashing canonical form.
  std::string canonical() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> data_;
};

struct WellConfig {
  std::size_t ix = 0, iy = 0;
  double rate = 0.0;  // 1/time units
};

struct FixedHeadConfig {
  std::size_t ix = 0, iy = 0;
  double head = 0.0;
};

/// Everything a pipeline run needs, resolved and validated.
struct ExperimentConfig {
  // grid
  std::size_t nx = 20, ny = 40;
  double dx = 50.0, dy = 50.0;
  std::vector<std::pair<std::size_t, std::size_t>> inactive;

  // flow
  double specific_yield = 0.25;
  double initial_head = 20.0;
  double dry_floor = 1e-3;
  std::size_t n_warmup = 6;
  double warmup_dt = 60.0;
  std::size_t n_steps = 25;
  double dt = 30.0;
  double recharge_base = 2e-4;
  double recharge_seasonal = 0.5;
  double recharge_period = 12.0;
  std::ptrdiff_t ghb_column = 0;  // -1 disables
  double ghb_head = 18.0;
  double ghb_conductance = 25.0;
  std::vector<WellConfig> wells;
  std::vector<FixedHeadConfig> fixed_heads;
  FaceWeighting weighting = FaceWeighting::central;

  // prior
  double prior_variance = 0.25;
  double prior_length = 500.0;
  double prior_mean = 1.6094379124341003;  // ln 5

  // reduction
  double rtol_y = 0.069;
  double rtol_u = 0.00045;

  // surrogate
  std::vector<std::size_t> hidden = {64, 64};
  double sigma2_eta = 1e-8;
  double sigma2_theta = 1e-3;
  std::size_t epochs = 800;
  double learning_rate = 5e-3;
  std::size_t batch = 0;

  // inversion optimizer
  std::size_t inv_iterations = 2000;
  double inv_learning_rate = 2e-2;
  double inv_grad_tol = 1e-8;

  // noise
  double sigma2_us = 1e-2;
  double sigma2_m = 0.0;
  double sigma2_xi = 1.0;

  // ensembles
  std::size_t n_train = 500;
  std::size_t n_heldout = 32;
  std::size_t n_ens = 50;

  // observations
  std::vector<std::pair<std::size_t, std::size_t>> obs_cells;
  std::vector<double> obs_times;  // empty: every monitored step

  // ies
  std::size_t ies_iterations = 3;
  double ies_lambda0 = -1.0;

  // scenario
  double pumping_scale = 1.5;
  double recharge_scale = 0.6;

  // run
  std::uint64_t seed = 20240901;
  std::string out_dir = "out";
  double level = 0.95;

  std::string canonical_text;  // for hashing

  static ExperimentConfig from_ini(const IniFile& ini);
  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;
  std::uint64_t hash() const;

  Grid build_grid() const;
  FlowProblem build_problem() const;
  CovKernel build_kernel() const;
  FieldY build_prior_mean(const Grid& grid) const;
  ObsSpec build_obs_spec(const FlowProblem& problem) const;
  TrainConfig build_train_config() const;
  OptimizerConfig build_inversion_opt() const;
};

std::uint64_t fnv1a64(const std::string& text);

}  // namespace invuq
