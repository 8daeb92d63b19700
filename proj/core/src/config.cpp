#include "invuq/config.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "invuq/errors.hpp"
#include "invuq/io.hpp"

namespace invuq {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& v, const std::string& what) {
  try {
    return static_cast<std::size_t>(std::stoull(v));
  } catch (...) {
    throw ConfigError("bad integer for " + what + ": '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (...) {
    throw ConfigError("bad number for " + what + ": '" + v + "'");
  }
}

std::pair<std::size_t, std::size_t> parse_cell(const std::string& tok, const std::string& what) {
  const auto comma = tok.find(',');
  if (comma == std::string::npos) throw ConfigError(what + ": expected ix,iy, got '" + tok + "'");
  return {parse_size(tok.substr(0, comma), what), parse_size(tok.substr(comma + 1), what)};
}

}  // namespace

IniFile IniFile::parse(const std::string& text) {
  IniFile ini;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": unclosed section");
      section = trim(line.substr(1, line.size() - 2));
      ini.data_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    ini.data_[section][key] = value;
  }
  return ini;
}

IniFile IniFile::load(const std::filesystem::path& path) {
  return parse(io::read_text(path));
}

bool IniFile::has(const std::string& section, const std::string& key) const {
  const auto s = data_.find(section);
  return s != data_.end() && s->second.count(key) > 0;
}

std::string IniFile::get(const std::string& section, const std::string& key) const {
  const auto s = data_.find(section);
  if (s == data_.end() || !s->second.count(key))
    throw ConfigError("missing config key [" + section + "] " + key);
  return s->second.at(key);
}

std::string IniFile::get_or(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
  return has(section, key) ? get(section, key) : fallback;
}

double IniFile::get_double(const std::string& section, const std::string& key,
                           double fallback) const {
  if (!has(section, key)) return fallback;
  return parse_double(get(section, key), "[" + section + "] " + key);
}

std::uint64_t IniFile::get_u64(const std::string& section, const std::string& key,
                               std::uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return std::stoull(get(section, key));
  } catch (...) {
    throw ConfigError("bad integer for [" + section + "] " + key);
  }
}

std::vector<std::string> IniFile::get_list(const std::string& section,
                                           const std::string& key) const {
  std::vector<std::string> out;
  if (!has(section, key)) return out;
  std::istringstream in(get(section, key));
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string IniFile::canonical() const {
  std::ostringstream out;
  for (const auto& [section, kv] : data_)
    for (const auto& [key, value] : kv) out << section << '.' << key << " = " << value << '\n';
  return out.str();
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

ExperimentConfig ExperimentConfig::from_ini(const IniFile& ini) {
  ExperimentConfig c;
  c.canonical_text = ini.canonical();

  c.nx = ini.get_u64("grid", "nx", c.nx);
  c.ny = ini.get_u64("grid", "ny", c.ny);
  c.dx = ini.get_double("grid", "dx", c.dx);
  c.dy = ini.get_double("grid", "dy", c.dy);
  for (const auto& tok : ini.get_list("grid", "inactive"))
    c.inactive.push_back(parse_cell(tok, "[grid] inactive"));

  c.specific_yield = ini.get_double("flow", "specific_yield", c.specific_yield);
  c.initial_head = ini.get_double("flow", "initial_head", c.initial_head);
  c.dry_floor = ini.get_double("flow", "dry_floor", c.dry_floor);
  c.n_warmup = ini.get_u64("flow", "n_warmup", c.n_warmup);
  c.warmup_dt = ini.get_double("flow", "warmup_dt", c.warmup_dt);
  c.n_steps = ini.get_u64("flow", "n_steps", c.n_steps);
  c.dt = ini.get_double("flow", "dt", c.dt);
  c.recharge_base = ini.get_double("flow", "recharge_base", c.recharge_base);
  c.recharge_seasonal = ini.get_double("flow", "recharge_seasonal", c.recharge_seasonal);
  c.recharge_period = ini.get_double("flow", "recharge_period", c.recharge_period);
  c.ghb_column = static_cast<std::ptrdiff_t>(
      ini.get_double("flow", "ghb_column", static_cast<double>(c.ghb_column)));
  c.ghb_head = ini.get_double("flow", "ghb_head", c.ghb_head);
  c.ghb_conductance = ini.get_double("flow", "ghb_conductance", c.ghb_conductance);
  for (const auto& tok : ini.get_list("flow", "wells")) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos)
      throw ConfigError("[flow] wells: expected ix,iy:rate, got '" + tok + "'");
    const auto [ix, iy] = parse_cell(tok.substr(0, colon), "[flow] wells");
    c.wells.push_back({ix, iy, parse_double(tok.substr(colon + 1), "[flow] wells rate")});
  }
  for (const auto& tok : ini.get_list("flow", "fixed_heads")) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos)
      throw ConfigError("[flow] fixed_heads: expected ix,iy:head, got '" + tok + "'");
    const auto [ix, iy] = parse_cell(tok.substr(0, colon), "[flow] fixed_heads");
    c.fixed_heads.push_back({ix, iy, parse_double(tok.substr(colon + 1), "fixed head")});
  }
  const std::string weighting = ini.get_or("flow", "face_weighting", "central");
  if (weighting == "central")
    c.weighting = FaceWeighting::central;
  else if (weighting == "upstream")
    c.weighting = FaceWeighting::upstream;
  else
    throw ConfigError("[flow] face_weighting must be central or upstream");

  c.prior_variance = ini.get_double("prior", "variance", c.prior_variance);
  c.prior_length = ini.get_double("prior", "length", c.prior_length);
  c.prior_mean = ini.get_double("prior", "mean_log_k", c.prior_mean);

  c.rtol_y = ini.get_double("reduction", "rtol_y", c.rtol_y);
  c.rtol_u = ini.get_double("reduction", "rtol_u", c.rtol_u);

  if (ini.has("surrogate", "hidden")) {
    c.hidden.clear();
    for (const auto& tok : ini.get_list("surrogate", "hidden"))
      c.hidden.push_back(parse_size(tok, "[surrogate] hidden"));
  }
  c.sigma2_eta = ini.get_double("surrogate", "sigma2_eta", c.sigma2_eta);
  c.sigma2_theta = ini.get_double("surrogate", "sigma2_theta", c.sigma2_theta);
  c.epochs = ini.get_u64("surrogate", "epochs", c.epochs);
  c.learning_rate = ini.get_double("surrogate", "learning_rate", c.learning_rate);
  c.batch = ini.get_u64("surrogate", "batch", c.batch);

  c.inv_iterations = ini.get_u64("inversion", "iterations", c.inv_iterations);
  c.inv_learning_rate = ini.get_double("inversion", "learning_rate", c.inv_learning_rate);
  c.inv_grad_tol = ini.get_double("inversion", "grad_tol", c.inv_grad_tol);

  c.sigma2_us = ini.get_double("noise", "sigma2_us", c.sigma2_us);
  c.sigma2_m = ini.get_double("noise", "sigma2_m", c.sigma2_m);
  c.sigma2_xi = ini.get_double("noise", "sigma2_xi", c.sigma2_xi);

  c.n_train = ini.get_u64("ensemble", "n_train", c.n_train);
  c.n_heldout = ini.get_u64("ensemble", "n_heldout", c.n_heldout);
  c.n_ens = ini.get_u64("ensemble", "n_ens", c.n_ens);

  for (const auto& tok : ini.get_list("observations", "cells"))
    c.obs_cells.push_back(parse_cell(tok, "[observations] cells"));
  for (const auto& tok : ini.get_list("observations", "times"))
    c.obs_times.push_back(parse_double(tok, "[observations] times"));

  c.ies_iterations = ini.get_u64("ies", "iterations", c.ies_iterations);
  c.ies_lambda0 = ini.get_double("ies", "lambda0", c.ies_lambda0);

  c.pumping_scale = ini.get_double("scenario", "pumping_scale", c.pumping_scale);
  c.recharge_scale = ini.get_double("scenario", "recharge_scale", c.recharge_scale);

  c.seed = ini.get_u64("run", "seed", c.seed);
  c.out_dir = ini.get_or("run", "out", c.out_dir);
  c.level = ini.get_double("run", "level", c.level);

  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_ini(IniFile::load(path));
}

void ExperimentConfig::validate() const {
  if (nx == 0 || ny == 0) throw ConfigError("grid dims must be positive");
  for (const auto& [ix, iy] : inactive)
    if (ix >= nx || iy >= ny) throw ConfigError("[grid] inactive cell outside the grid");
  for (const auto& w : wells)
    if (w.ix >= nx || w.iy >= ny) throw ConfigError("[flow] well outside the grid");
  for (const auto& f : fixed_heads)
    if (f.ix >= nx || f.iy >= ny) throw ConfigError("[flow] fixed head outside the grid");
  if (ghb_column >= static_cast<std::ptrdiff_t>(nx))
    throw ConfigError("[flow] ghb_column outside the grid");
  for (const auto& [ix, iy] : obs_cells)
    if (ix >= nx || iy >= ny) throw ConfigError("[observations] cell outside the grid");
  if (prior_variance <= 0.0 || prior_length <= 0.0)
    throw ConfigError("prior variance and length must be positive");
  if (rtol_y <= 0.0 || rtol_y >= 1.0 || rtol_u <= 0.0 || rtol_u >= 1.0)
    throw ConfigError("rtol values must be in (0,1)");
  if (n_train < 2) throw ConfigError("n_train must be >= 2");
  if (n_ens < 2) throw ConfigError("n_ens must be >= 2");
  if (n_train < n_ens) throw ConfigError("n_train must be >= n_ens");
  if (sigma2_us < 0.0 || sigma2_m < 0.0) throw ConfigError("noise variances must be >= 0");
  if (sigma2_xi <= 0.0) throw ConfigError("sigma2_xi must be positive");
  if (obs_cells.empty()) throw ConfigError("[observations] cells must not be empty");
  if (level <= 0.0 || level >= 1.0) throw ConfigError("level must be in (0,1)");
  if (ies_iterations < 1) throw ConfigError("[ies] iterations must be >= 1");
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical_text); }

Grid ExperimentConfig::build_grid() const {
  Grid g = Grid::regular(nx, ny, dx, dy);
  for (const auto& [ix, iy] : inactive) {
    if (ix >= nx || iy >= ny) throw ConfigError("inactive cell outside the grid");
    g.set_inactive(ix, iy);
  }
  g.finalize();
  return g;
}

FlowProblem ExperimentConfig::build_problem() const {
  FlowProblem p;
  p.grid = build_grid();
  p.specific_yield = specific_yield;
  p.dry_floor = dry_floor;
  p.weighting = weighting;
  p.n_warmup = n_warmup;
  p.initial_head.assign(p.grid.n_active(), initial_head);

  const std::size_t total = n_warmup + n_steps;
  p.dt.reserve(total);
  p.recharge.reserve(total);
  for (std::size_t s = 0; s < n_warmup; ++s) {
    p.dt.push_back(warmup_dt);
    p.recharge.push_back(recharge_base);
  }
  for (std::size_t s = 0; s < n_steps; ++s) {
    p.dt.push_back(dt);
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(s) / recharge_period;
    p.recharge.push_back(recharge_base * (1.0 + recharge_seasonal * std::sin(phase)));
  }

  for (const auto& w : wells) {
    if (w.ix >= nx || w.iy >= ny) throw ConfigError("well outside the grid");
    WellSpec ws;
    ws.cell = p.grid.cell_id(w.ix, w.iy);
    ws.rate.assign(total, w.rate);
    p.wells.push_back(std::move(ws));
  }
  if (ghb_column >= 0) {
    const auto col = static_cast<std::size_t>(ghb_column);
    if (col >= nx) throw ConfigError("ghb_column outside the grid");
    for (std::size_t iy = 0; iy < ny; ++iy)
      if (p.grid.is_active(col, iy))
        p.ghb.push_back({p.grid.cell_id(col, iy), ghb_conductance, ghb_head});
  }
  for (const auto& f : fixed_heads) {
    if (f.ix >= nx || f.iy >= ny) throw ConfigError("fixed head outside the grid");
    p.fixed_head.push_back({p.grid.cell_id(f.ix, f.iy), f.head});
  }
  p.validate();
  return p;
}

CovKernel ExperimentConfig::build_kernel() const { return {prior_variance, prior_length}; }

FieldY ExperimentConfig::build_prior_mean(const Grid& grid) const {
  return {std::vector<double>(grid.n_active(), prior_mean)};
}

ObsSpec ExperimentConfig::build_obs_spec(const FlowProblem& problem) const {
  ObsSpec spec;
  for (const auto& [ix, iy] : obs_cells) {
    if (ix >= nx || iy >= ny || !problem.grid.is_active(ix, iy))
      throw ConfigError("observation cell (" + std::to_string(ix) + "," + std::to_string(iy) +
                        ") is not active");
    spec.cells.push_back(problem.grid.cell_id(ix, iy));
  }
  if (!obs_times.empty()) {
    spec.times = obs_times;
  } else {
    for (std::size_t s = problem.n_warmup; s < problem.n_steps(); ++s)
      spec.times.push_back(problem.time_of_step(s));
  }
  return spec;
}

TrainConfig ExperimentConfig::build_train_config() const {
  TrainConfig t;
  t.sigma2_eta = sigma2_eta;
  t.sigma2_theta = sigma2_theta;
  t.hidden = hidden;
  t.activation = Activation::tanh_act;
  t.opt.step = learning_rate;
  t.opt.max_iters = epochs;
  t.opt.grad_tol = 0.0;  // epoch-bounded
  t.batch = batch;
  return t;
}

OptimizerConfig ExperimentConfig::build_inversion_opt() const {
  OptimizerConfig o;
  o.step = inv_learning_rate;
  o.max_iters = inv_iterations;
  o.grad_tol = inv_grad_tol;
  return o;
}

}  // namespace invuq
