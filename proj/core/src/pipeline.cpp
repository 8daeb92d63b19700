#include "invuq/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "invuq/errors.hpp"
#include "invuq/ies.hpp"
#include "invuq/io.hpp"
#include "invuq/kle.hpp"
#include "invuq/linalg.hpp"
#include "invuq/metrics.hpp"

namespace invuq {

namespace {

using nlohmann::json;

// substream ids of the root seed, one per pipeline role
namespace streams {
constexpr std::uint64_t reference = 1;
constexpr std::uint64_t obs_noise = 2;
constexpr std::uint64_t train_fields = 10;
constexpr std::uint64_t de_ensemble = 20;
constexpr std::uint64_t rand_ensemble = 21;
constexpr std::uint64_t invert_ri = 30;
constexpr std::uint64_t invert_de = 31;
constexpr std::uint64_t ies_run = 40;
}  // namespace streams

constexpr const char* kManifestName = "manifest.json";

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

io::FieldFile make_field_file(const Grid& grid, io::FieldKind kind, std::uint32_t n_steps) {
  io::FieldFile f;
  f.kind = kind;
  f.nx = static_cast<std::uint32_t>(grid.nx);
  f.ny = static_cast<std::uint32_t>(grid.ny);
  f.n_steps = n_steps;
  f.mask = grid.mask;
  return f;
}

std::vector<std::vector<double>> to_snapshots(const io::FieldFile& f) {
  return f.fields;
}

void write_json(const std::filesystem::path& path, const json& j) {
  io::write_text(path, j.dump(2) + "\n");
}

json read_json(const std::filesystem::path& path) {
  return json::parse(io::read_text(path));
}

void check_hash(const RunManifest& man, const ExperimentConfig& cfg) {
  if (man.config_hash != cfg.hash())
    throw ConfigError("config does not match the manifest in the output directory "
                      "(rerun generate or restore the original config)");
}

}  // namespace

void RunManifest::save(const std::filesystem::path& out_dir) const {
  json j;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["artifacts"] = artifacts;
  j["format_versions"] = format_versions;
  j["timings_ms"] = timings_ms;
  write_json(out_dir / kManifestName, j);
}

RunManifest RunManifest::load(const std::filesystem::path& out_dir) {
  const auto path = out_dir / kManifestName;
  if (!std::filesystem::exists(path))
    throw MissingArtifact("no manifest in " + out_dir.string() + " (run generate first)");
  const json j = read_json(path);
  RunManifest m;
  m.config_hash = j.at("config_hash").get<std::uint64_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
  m.format_versions = j.at("format_versions").get<std::map<std::string, std::uint32_t>>();
  if (j.contains("timings_ms"))
    m.timings_ms = j.at("timings_ms").get<std::map<std::string, double>>();
  return m;
}

void RunManifest::record(const std::string& name, const std::string& relpath) {
  artifacts[name] = relpath;
}

std::filesystem::path RunManifest::need(const std::filesystem::path& out_dir,
                                        const std::string& name) const {
  const auto it = artifacts.find(name);
  if (it == artifacts.end())
    throw MissingArtifact("artifact '" + name + "' is not listed in the manifest");
  const auto path = out_dir / it->second;
  if (!std::filesystem::exists(path))
    throw MissingArtifact("artifact '" + name + "' is listed but missing on disk: " +
                          path.string());
  return path;
}

void write_observations_csv(const std::filesystem::path& path, const FlowProblem& problem,
                            const ObsSpec& spec, const Observations& obs) {
  const ResolvedObs r = resolve_obs(problem, spec);
  std::ostringstream out;
  out << "ix,iy,time,step,row,value\n";
  std::size_t k = 0;
  for (std::size_t c = 0; c < spec.cells.size(); ++c) {
    const std::size_t ix = spec.cells[c] % problem.grid.nx;
    const std::size_t iy = spec.cells[c] / problem.grid.nx;
    for (std::size_t t = 0; t < spec.times.size(); ++t, ++k) {
      out << ix << ',' << iy << ',' << io::format_double(spec.times[t]) << ',' << r.step[k] << ','
          << obs.u[k].row << ',' << io::format_double(obs.u[k].value) << '\n';
    }
  }
  io::write_text(path, out.str());
}

Observations read_observations_csv(const std::filesystem::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw MissingArtifact("empty observations file: " + path.string());
  Observations obs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(ls, tok, ',')) cols.push_back(tok);
    if (cols.size() != 6) throw MissingArtifact("malformed observations row: " + line);
    obs.u.push_back({std::stoull(cols[4]), std::stod(cols[5])});
  }
  return obs;
}

void cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  Timer timer;
  std::filesystem::create_directories(out_dir);
  const FlowProblem problem = cfg.build_problem();
  const ObsSpec spec = cfg.build_obs_spec(problem);
  const RngStream root(cfg.seed);
  const FieldSampler sampler(problem.grid, cfg.build_kernel(),
                             cfg.build_prior_mean(problem.grid));

  RunManifest man;
  man.config_hash = cfg.hash();
  man.seed = cfg.seed;
  man.format_versions = {{"field", 1}, {"basis", 1}, {"ensemble", 1}, {"posterior", 1}};

  RngStream ref_stream = root.substream(streams::reference);
  const FieldY y_ref = sampler.draw(ref_stream);
  const FieldU u_ref = solve(problem, y_ref);

  io::FieldFile yf = make_field_file(problem.grid, io::FieldKind::y, 1);
  yf.fields.push_back(y_ref.v);
  io::write_fields(out_dir / "y_ref.uqf", yf);
  man.record("y_ref", "y_ref.uqf");

  io::FieldFile uf =
      make_field_file(problem.grid, io::FieldKind::u, static_cast<std::uint32_t>(problem.n_monitor()));
  uf.fields.push_back(monitor_window(u_ref, problem));
  io::write_fields(out_dir / "u_ref.uqf", uf);
  man.record("u_ref", "u_ref.uqf");

  const RngStream train_root = root.substream(streams::train_fields);
  io::FieldFile train_y = make_field_file(problem.grid, io::FieldKind::y, 1);
  io::FieldFile train_u =
      make_field_file(problem.grid, io::FieldKind::u, static_cast<std::uint32_t>(problem.n_monitor()));
  io::FieldFile held_y = train_y;
  io::FieldFile held_u = train_u;
  const std::size_t total = cfg.n_train + cfg.n_heldout;
  for (std::size_t i = 0; i < total; ++i) {
    RngStream s = train_root.substream(i);
    const FieldY y = sampler.draw(s);
    FieldU u;
    try {
      u = solve(problem, y);
    } catch (const NumericalError& e) {
      throw NumericalError("generate: forward solve failed for member " + std::to_string(i) +
                           ": " + e.what());
    }
    auto& fy = (i < cfg.n_train) ? train_y : held_y;
    auto& fu = (i < cfg.n_train) ? train_u : held_u;
    fy.fields.push_back(y.v);
    fu.fields.push_back(monitor_window(u, problem));
  }
  io::write_fields(out_dir / "train_y.uqf", train_y);
  io::write_fields(out_dir / "train_u.uqf", train_u);
  man.record("train_y", "train_y.uqf");
  man.record("train_u", "train_u.uqf");
  if (cfg.n_heldout > 0) {
    io::write_fields(out_dir / "heldout_y.uqf", held_y);
    io::write_fields(out_dir / "heldout_u.uqf", held_u);
    man.record("heldout_y", "heldout_y.uqf");
    man.record("heldout_u", "heldout_u.uqf");
  }

  RngStream obs_stream = root.substream(streams::obs_noise);
  const Observations obs = generate_measurements(u_ref, problem, spec, cfg.sigma2_us, obs_stream);
  write_observations_csv(out_dir / "observations.csv", problem, spec, obs);
  man.record("observations", "observations.csv");

  man.timings_ms["generate"] = timer.ms();
  man.save(out_dir);
}

namespace {

LatentDataset encode_dataset(const io::FieldFile& ys, const io::FieldFile& us,
                             const KLEBasis& basis_y, const KLEBasis& basis_u) {
  const std::size_t n = ys.fields.size();
  LatentDataset d;
  d.inputs = Matrix(n, basis_y.n_modes());
  d.targets = Matrix(n, basis_u.n_modes());
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> xi = encode(basis_y, ys.fields[i]);
    const std::vector<double> eta = encode(basis_u, us.fields[i]);
    std::copy(xi.begin(), xi.end(), d.inputs.row(i).begin());
    std::copy(eta.begin(), eta.end(), d.targets.row(i).begin());
  }
  return d;
}

std::vector<std::size_t> obs_rows_of(const Observations& obs) {
  std::vector<std::size_t> rows;
  rows.reserve(obs.u.size());
  for (const auto& o : obs.u) rows.push_back(o.row);
  return rows;
}

double heldout_lpp(const SurrogateEnsemble& ens, const KLEBasis& basis_y, const KLEBasis& basis_u,
                   const io::FieldFile& held_y, const io::FieldFile& held_u) {
  double total = 0.0;
  for (std::size_t i = 0; i < held_y.fields.size(); ++i) {
    const std::vector<double> xi = encode(basis_y, held_y.fields[i]);
    const EnsembleStats st = ensemble_stats(ens, xi, basis_u);
    total += lpp(st.mean, st.variance, held_u.fields[i]);
  }
  return total;
}

std::string eigenvalues_csv(const KLEBasis& b) {
  std::ostringstream out;
  out << "mode,eigenvalue\n";
  for (std::size_t k = 0; k < b.n_modes(); ++k)
    out << k << ',' << io::format_double(b.eigenvalues[k]) << '\n';
  return out.str();
}

}  // namespace

void cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  Timer timer;
  RunManifest man = RunManifest::load(out_dir);
  check_hash(man, cfg);

  const io::FieldFile train_y = io::read_fields(man.need(out_dir, "train_y"));
  const io::FieldFile train_u = io::read_fields(man.need(out_dir, "train_u"));

  const KLEBasis basis_y = fit_kle(to_snapshots(train_y), cfg.rtol_y);
  const KLEBasis basis_u = fit_kle(to_snapshots(train_u), cfg.rtol_u);
  io::write_basis(out_dir / "basis_y.uqkb", basis_y);
  io::write_basis(out_dir / "basis_u.uqkb", basis_u);
  io::write_text(out_dir / "eigenvalues_y.csv", eigenvalues_csv(basis_y));
  io::write_text(out_dir / "eigenvalues_u.csv", eigenvalues_csv(basis_u));
  man.record("basis_y", "basis_y.uqkb");
  man.record("basis_u", "basis_u.uqkb");
  man.record("eigenvalues_y", "eigenvalues_y.csv");
  man.record("eigenvalues_u", "eigenvalues_u.csv");

  const LatentDataset data = encode_dataset(train_y, train_u, basis_y, basis_u);
  const TrainConfig tc = cfg.build_train_config();
  const RngStream root(cfg.seed);

  const SurrogateEnsemble ens_de =
      build_ensemble(data, tc, EnsembleKind::deep_ensemble, cfg.n_ens,
                     root.substream(streams::de_ensemble));
  const SurrogateEnsemble ens_rand =
      build_ensemble(data, tc, EnsembleKind::randomized, cfg.n_ens,
                     root.substream(streams::rand_ensemble));
  io::write_ensemble(out_dir / "ens_de.uqse", ens_de);
  io::write_ensemble(out_dir / "ens_rand.uqse", ens_rand);
  man.record("ens_de", "ens_de.uqse");
  man.record("ens_rand", "ens_rand.uqse");

  const Observations obs = read_observations_csv(man.need(out_dir, "observations"));
  const std::vector<std::size_t> rows = obs_rows_of(obs);

  json report;
  report["n_train"] = cfg.n_train;
  report["n_ens"] = cfg.n_ens;
  report["rtol_y"] = cfg.rtol_y;
  report["rtol_u"] = cfg.rtol_u;
  report["n_modes_y"] = basis_y.n_modes();
  report["n_modes_u"] = basis_u.n_modes();
  report["retained_energy_y"] = retained_energy(basis_y);
  report["retained_energy_u"] = retained_energy(basis_u);
  report["sigma2_eta"] = cfg.sigma2_eta;
  report["sigma2_theta"] = cfg.sigma2_theta;

  if (man.artifacts.count("heldout_y")) {
    const io::FieldFile held_y = io::read_fields(man.need(out_dir, "heldout_y"));
    const io::FieldFile held_u = io::read_fields(man.need(out_dir, "heldout_u"));
    std::vector<std::vector<double>> held_xi;
    for (const auto& y : held_y.fields) held_xi.push_back(encode(basis_y, y));
    report["sigma2_uhat"] = {
        {"de", estimate_surrogate_variance(ens_de, held_xi, basis_u, rows)},
        {"randomized", estimate_surrogate_variance(ens_rand, held_xi, basis_u, rows)}};
    report["lpp_heldout"] = {{"de", heldout_lpp(ens_de, basis_y, basis_u, held_y, held_u)},
                             {"randomized",
                              heldout_lpp(ens_rand, basis_y, basis_u, held_y, held_u)}};
  }
  write_json(out_dir / "train_report.json", report);
  man.record("train_report", "train_report.json");

  man.timings_ms["train"] = timer.ms();
  man.save(out_dir);
}

namespace {

void write_summary_outputs(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                           RunManifest& man, const std::string& method, const Grid& grid,
                           const FieldStats& stats, std::span<const double> reference,
                           io::FieldKind kind, std::uint32_t n_steps, const std::string& prefix,
                           json extra) {
  const PosteriorSummary summary = summarize(stats.mean, stats.variance, reference, cfg.level);

  io::FieldFile mean_f = make_field_file(grid, kind, n_steps);
  mean_f.fields.push_back(stats.mean);
  io::write_fields(out_dir / (prefix + "_mean_" + method + ".uqf"), mean_f);
  man.record(prefix + "_mean_" + method, prefix + "_mean_" + method + ".uqf");

  io::FieldFile var_f = make_field_file(grid, io::FieldKind::raster, n_steps);
  var_f.fields.push_back(stats.variance);
  io::write_fields(out_dir / (prefix + "_var_" + method + ".uqf"), var_f);
  man.record(prefix + "_var_" + method, prefix + "_var_" + method + ".uqf");

  io::FieldFile cov_f = make_field_file(grid, io::FieldKind::raster, n_steps);
  cov_f.fields.emplace_back(summary.coverage_map.begin(), summary.coverage_map.end());
  io::write_fields(out_dir / (prefix + "_coverage_" + method + ".uqf"), cov_f);
  man.record(prefix + "_coverage_" + method, prefix + "_coverage_" + method + ".uqf");

  json j = std::move(extra);
  j["method"] = method;
  j["level"] = cfg.level;
  j["sigma2_us"] = cfg.sigma2_us;
  j["l2_rel"] = summary.l2_rel;
  j["linf"] = summary.linf;
  j["lpp"] = summary.lpp;
  j["coverage"] = summary.coverage_fraction;
  j["covered"] = summary.covered;
  j["total"] = summary.total;
  write_json(out_dir / (prefix + "_summary_" + method + ".json"), j);
  man.record(prefix + "_summary_" + method, prefix + "_summary_" + method + ".json");

  io::write_text(out_dir / (prefix + "_summary_" + method + ".csv"),
                 summary_csv_header() + "\n" + summary_csv_row(method, cfg.sigma2_us, summary) +
                     "\n");
  man.record(prefix + "_summary_csv_" + method, prefix + "_summary_" + method + ".csv");
}

}  // namespace

void cmd_invert(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                const std::string& method) {
  if (method != "ri" && method != "de" && method != "ies")
    throw ConfigError("invert: method must be ri, de, or ies");
  Timer timer;
  RunManifest man = RunManifest::load(out_dir);
  check_hash(man, cfg);

  const Observations obs = read_observations_csv(man.need(out_dir, "observations"));
  const io::FieldFile y_ref_f = io::read_fields(man.need(out_dir, "y_ref"));
  const std::vector<double>& y_ref = y_ref_f.fields.at(0);
  const RngStream root(cfg.seed);

  NoiseModel noise;
  noise.sigma2_us = cfg.sigma2_us;
  noise.sigma2_m = cfg.sigma2_m;
  noise.sigma2_xi = cfg.sigma2_xi;

  FieldStats stats;
  json extra;

  if (method == "ies") {
    const FlowProblem problem = cfg.build_problem();
    const FieldSampler sampler(problem.grid, cfg.build_kernel(),
                               cfg.build_prior_mean(problem.grid));
    IESConfig icfg;
    icfg.n_iterations = cfg.ies_iterations;
    icfg.lambda0 = cfg.ies_lambda0;
    icfg.budget = cfg.n_train;
    const IESResult res = run_ies(problem, sampler, obs, noise, icfg,
                                  root.substream(streams::ies_run));
    stats = field_stats(res.ensemble);

    io::SampleFile samples;
    samples.method = "ies";
    samples.field_space = true;
    samples.samples = Matrix(res.ensemble.size(), res.ensemble.front().v.size());
    for (std::size_t j = 0; j < res.ensemble.size(); ++j)
      std::copy(res.ensemble[j].v.begin(), res.ensemble[j].v.end(),
                samples.samples.row(j).begin());
    io::write_samples(out_dir / "posterior_ies.uqpe", samples);
    man.record("posterior_ies", "posterior_ies.uqpe");
    io::write_text(out_dir / "samples_ies.csv", io::samples_csv(samples.samples));
    man.record("samples_ies", "samples_ies.csv");

    extra["forward_calls"] = res.forward_calls;
    extra["accepted_iterations"] = res.accepted_iterations;
    extra["rejected_trials"] = res.rejected_trials;
    extra["resamples"] = res.resamples;
    extra["phi_history"] = res.phi_history;
    extra["ensemble_size"] = res.ensemble.size();
    extra["budget"] = cfg.n_train;
  } else {
    const KLEBasis basis_y = io::read_basis(man.need(out_dir, "basis_y"));
    const KLEBasis basis_u = io::read_basis(man.need(out_dir, "basis_u"));
    const json report = read_json(man.need(out_dir, "train_report"));

    PosteriorEnsemble post;
    if (method == "ri") {
      const SurrogateEnsemble ens = io::read_ensemble(man.need(out_dir, "ens_rand"));
      if (report.contains("sigma2_uhat"))
        noise.sigma2_uhat = report["sigma2_uhat"]["randomized"].get<double>();
      post = sample_posterior_total(obs, noise, ens, basis_y, basis_u,
                                    root.substream(streams::invert_ri),
                                    cfg.build_inversion_opt());
    } else {
      const SurrogateEnsemble ens = io::read_ensemble(man.need(out_dir, "ens_de"));
      if (report.contains("sigma2_uhat"))
        noise.sigma2_uhat = report["sigma2_uhat"]["de"].get<double>();
      post = de_inverse(obs, noise, ens, basis_y, basis_u, root.substream(streams::invert_de),
                        cfg.build_inversion_opt());
    }
    stats = posterior_field_stats(post, basis_y);
    io::write_posterior(out_dir / ("posterior_" + method + ".uqpe"), post);
    man.record("posterior_" + method, "posterior_" + method + ".uqpe");
    io::write_text(out_dir / ("xi_" + method + ".csv"), io::samples_csv(post.samples));
    man.record("xi_" + method, "xi_" + method + ".csv");
    extra["n_samples"] = post.size();
    extra["sigma2_uhat"] = noise.sigma2_uhat;
  }

  const Grid grid = cfg.build_grid();
  write_summary_outputs(cfg, out_dir, man, method, grid, stats, y_ref, io::FieldKind::y, 1, "y",
                        std::move(extra));
  man.timings_ms["invert_" + method] = timer.ms();
  man.save(out_dir);
}

void cmd_evaluate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                  const std::string& method, const std::string& mode) {
  if (mode != "predict" && mode != "forecast")
    throw ConfigError("evaluate: mode must be predict or forecast");
  Timer timer;
  RunManifest man = RunManifest::load(out_dir);
  check_hash(man, cfg);

  const io::FieldFile y_ref_f = io::read_fields(man.need(out_dir, "y_ref"));
  const FieldY y_ref{y_ref_f.fields.at(0)};

  const FlowProblem base = cfg.build_problem();
  const FlowProblem problem =
      (mode == "forecast") ? scenario(base, cfg.pumping_scale, cfg.recharge_scale) : base;

  // posterior y samples, decoded when latent
  std::vector<FieldY> fields;
  const io::SampleFile samples = io::read_samples(man.need(out_dir, "posterior_" + method));
  if (samples.field_space) {
    for (std::size_t j = 0; j < samples.samples.rows(); ++j) {
      FieldY y;
      const auto row = samples.samples.row(j);
      y.v.assign(row.begin(), row.end());
      fields.push_back(std::move(y));
    }
  } else {
    const KLEBasis basis_y = io::read_basis(man.need(out_dir, "basis_y"));
    for (std::size_t j = 0; j < samples.samples.rows(); ++j)
      fields.push_back({decode(basis_y, samples.samples.row(j))});
  }

  const FieldU u_ref = solve(problem, y_ref);
  const std::vector<double> ref_window = monitor_window(u_ref, problem);
  std::size_t solver_calls = 1;

  std::vector<FieldY> windows;  // FieldY reused as a flat vector holder
  windows.reserve(fields.size());
  for (std::size_t j = 0; j < fields.size(); ++j) {
    try {
      const FieldU u = solve(problem, fields[j]);
      windows.push_back({monitor_window(u, problem)});
      ++solver_calls;
    } catch (const NumericalError& e) {
      throw NumericalError("evaluate: forward solve failed for posterior sample " +
                           std::to_string(j) + ": " + e.what());
    }
  }
  const FieldStats stats = field_stats(windows);

  json extra;
  extra["mode"] = mode;
  extra["n_samples"] = fields.size();
  extra["solver_calls"] = solver_calls;
  if (mode == "forecast") {
    extra["pumping_scale"] = cfg.pumping_scale;
    extra["recharge_scale"] = cfg.recharge_scale;
  }
  write_summary_outputs(cfg, out_dir, man, method, problem.grid, stats, ref_window,
                        io::FieldKind::u, static_cast<std::uint32_t>(problem.n_monitor()),
                        "u_" + mode, std::move(extra));
  man.timings_ms["evaluate_" + mode + "_" + method] = timer.ms();
  man.save(out_dir);
}

namespace {

KLEBasis identity_basis(std::size_t n) {
  KLEBasis b;
  b.mean.assign(n, 0.0);
  b.modes = Matrix::identity(n);
  b.eigenvalues.assign(n, 1.0);
  b.total_energy = static_cast<double>(n);
  b.rtol = 1e-16;
  return b;
}

struct SampleMoments {
  std::vector<double> mean;
  Matrix cov;
};

SampleMoments moments(const Matrix& samples) {
  const std::size_t n = samples.rows(), d = samples.cols();
  SampleMoments m;
  m.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) axpy(1.0, samples.row(i), m.mean);
  for (auto& v : m.mean) v /= static_cast<double>(n);
  m.cov = Matrix(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = samples.row(i);
    for (std::size_t a = 0; a < d; ++a) {
      const double da = row[a] - m.mean[a];
      for (std::size_t b = a; b < d; ++b) m.cov(a, b) += da * (row[b] - m.mean[b]);
    }
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      m.cov(a, b) /= static_cast<double>(n - 1);
      m.cov(b, a) = m.cov(a, b);
    }
  return m;
}

Matrix spd_inverse(const Matrix& a) {
  const std::size_t n = a.rows();
  const Matrix l = cholesky(a).lower;
  Matrix inv(n, n);
  std::vector<double> e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    const std::vector<double> x = solve_lower_t(l, solve_lower(l, e));
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = x[i];
    e[j] = 0.0;
  }
  return inv;
}

OracleCheck check_mean(const std::string& name, std::span<const double> emp,
                       std::span<const double> exact, const Matrix& cov, std::size_t n_samples) {
  double worst = 0.0;
  for (std::size_t i = 0; i < emp.size(); ++i) {
    const double se = std::sqrt(cov(i, i) / static_cast<double>(n_samples));
    worst = std::max(worst, std::fabs(emp[i] - exact[i]) / se);
  }
  OracleCheck c;
  c.name = name;
  c.pass = worst <= 3.0;
  c.detail = "max |mean error| = " + io::format_double(worst) + " standard errors (limit 3)";
  return c;
}

OracleCheck check_cov(const std::string& name, const Matrix& emp, const Matrix& exact,
                      double limit) {
  Matrix diff = emp;
  for (std::size_t k = 0; k < diff.flat().size(); ++k) diff.flat()[k] -= exact.flat()[k];
  const double rel = frobenius_norm(diff) / frobenius_norm(exact);
  OracleCheck c;
  c.name = name;
  c.pass = rel <= limit;
  c.detail = "covariance Frobenius rel err = " + io::format_double(rel) + " (limit " +
             io::format_double(limit) + ")";
  return c;
}

}  // namespace

std::vector<OracleCheck> linear_gaussian_oracle(std::uint64_t seed) {
  constexpr std::size_t p = 20, m = 15, n_ens = 2000;
  constexpr double sigma2 = 1e-2;
  RngStream rng(seed, 0xA11CE);

  Matrix g(m, p);
  const double scale = 1.0 / std::sqrt(static_cast<double>(p));
  for (auto& v : g.flat()) v = scale * rng.normal();
  std::vector<double> xi_true(p);
  rng.fill_normal(xi_true);
  std::vector<double> d = matvec(g, xi_true);
  for (auto& v : d) v += std::sqrt(sigma2) * rng.normal();

  SurrogateNet net;
  net.widths = {p, m};
  net.activation = Activation::linear;
  net.theta.assign(net.param_count(), 0.0);
  std::copy(g.flat().begin(), g.flat().end(), net.theta.begin());  // weights first, zero bias

  const KLEBasis u_basis = identity_basis(m);
  const KLEBasis y_basis = identity_basis(p);
  Observations obs;
  for (std::size_t i = 0; i < m; ++i) obs.u.push_back({i, d[i]});
  NoiseModel noise;
  noise.sigma2_us = sigma2;
  noise.sigma2_xi = 1.0;

  OptimizerConfig opt;
  opt.step = 0.1;
  opt.max_iters = 6000;
  opt.grad_tol = 1e-9;

  const PosteriorEnsemble post = sample_posterior_gaussian(obs, noise, net, y_basis, u_basis,
                                                           n_ens, rng.substream(1), opt);

  // analytic posterior: C = (G^T G / s2 + I)^-1, mean = C G^T d / s2
  Matrix h = matmul_tn(g, g);
  for (auto& v : h.flat()) v /= sigma2;
  for (std::size_t i = 0; i < p; ++i) h(i, i) += 1.0;
  const Matrix c_exact = spd_inverse(h);
  std::vector<double> rhs = matvec_t(g, d);
  for (auto& v : rhs) v /= sigma2;
  const std::vector<double> mean_exact = matvec(c_exact, rhs);

  const SampleMoments mom = moments(post.samples);
  std::vector<OracleCheck> checks;
  checks.push_back(
      check_mean("linear-gaussian posterior mean", mom.mean, mean_exact, c_exact, n_ens));
  checks.push_back(check_cov("linear-gaussian posterior covariance", mom.cov, c_exact, 0.10));
  return checks;
}

std::vector<OracleCheck> randomized_training_oracle(std::uint64_t seed) {
  constexpr std::size_t n_in = 3, n_out = 2, n_data = 40, n_members = 2000;
  constexpr double s2_eta = 0.05, s2_theta = 1.0;
  RngStream rng(seed, 0xB0B);

  LatentDataset data;
  data.inputs = Matrix(n_data, n_in);
  for (auto& v : data.inputs.flat()) v = rng.normal();
  Matrix w_true(n_out, n_in);
  for (auto& v : w_true.flat()) v = rng.normal();
  data.targets = Matrix(n_data, n_out);
  for (std::size_t i = 0; i < n_data; ++i)
    for (std::size_t o = 0; o < n_out; ++o) {
      double z = 0.3;  // true bias
      for (std::size_t k = 0; k < n_in; ++k) z += w_true(o, k) * data.inputs(i, k);
      data.targets(i, o) = z + 0.2 * rng.normal();
    }

  TrainConfig cfg;
  cfg.sigma2_eta = s2_eta;
  cfg.sigma2_theta = s2_theta;
  cfg.hidden = {};
  cfg.activation = Activation::linear;
  cfg.opt.step = 0.05;
  cfg.opt.max_iters = 5000;
  cfg.opt.grad_tol = 1e-10;

  const std::size_t dim = (n_in + 1) * n_out;
  Matrix thetas(n_members, dim);
  const RngStream member_root = rng.substream(7);
  for (std::size_t i = 0; i < n_members; ++i) {
    RngStream s = member_root.substream(i);
    const TrainResult r = train_randomized(data, cfg, s);
    std::copy(r.net.theta.begin(), r.net.theta.end(), thetas.row(i).begin());
  }

  // conjugate posterior per output row with design [x, 1]
  Matrix design(n_data, n_in + 1);
  for (std::size_t i = 0; i < n_data; ++i) {
    for (std::size_t k = 0; k < n_in; ++k) design(i, k) = data.inputs(i, k);
    design(i, n_in) = 1.0;
  }
  Matrix a = matmul_tn(design, design);
  for (auto& v : a.flat()) v /= s2_eta;
  for (std::size_t i = 0; i <= n_in; ++i) a(i, i) += 1.0 / s2_theta;
  const Matrix c_block = spd_inverse(a);

  // theta layout: W row 0, W row 1, b0, b1 -> index maps per output
  std::vector<double> mean_exact(dim, 0.0);
  Matrix c_exact(dim, dim);
  for (std::size_t o = 0; o < n_out; ++o) {
    std::vector<std::size_t> idx(n_in + 1);
    for (std::size_t k = 0; k < n_in; ++k) idx[k] = o * n_in + k;
    idx[n_in] = n_out * n_in + o;
    std::vector<double> rhs(n_in + 1, 0.0);
    for (std::size_t i = 0; i < n_data; ++i)
      for (std::size_t k = 0; k <= n_in; ++k) rhs[k] += design(i, k) * data.targets(i, o);
    for (auto& v : rhs) v /= s2_eta;
    const std::vector<double> mo = matvec(c_block, rhs);
    for (std::size_t k = 0; k <= n_in; ++k) {
      mean_exact[idx[k]] = mo[k];
      for (std::size_t l = 0; l <= n_in; ++l) c_exact(idx[k], idx[l]) = c_block(k, l);
    }
  }

  const SampleMoments mom = moments(thetas);
  std::vector<OracleCheck> checks;
  checks.push_back(
      check_mean("randomized-training posterior mean", mom.mean, mean_exact, c_exact, n_members));
  checks.push_back(check_cov("randomized-training posterior covariance", mom.cov, c_exact, 0.10));
  return checks;
}

int run_oracle_suite(std::ostream& out, std::uint64_t seed) {
  int failures = 0;
  auto emit = [&](const std::vector<OracleCheck>& checks) {
    for (const auto& c : checks) {
      out << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << "\n";
      if (!c.pass) ++failures;
    }
  };
  emit(linear_gaussian_oracle(seed));
  emit(randomized_training_oracle(seed));
  return failures;
}

}  // namespace invuq
