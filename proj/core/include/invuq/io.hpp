#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "invuq/inversion.hpp"
#include "invuq/kle.hpp"
#include "invuq/surrogate.hpp"

namespace invuq::io {

/// Field stack in the "UQF1" binary format: magic, version, kind, grid dims,
/// active count, step count, stack count, active mask, then 64-bit
/// little-endian payloads.
enum class FieldKind : std::uint32_t { y = 0, u = 1, raster = 2 };

struct FieldFile {
  FieldKind kind = FieldKind::y;
  std::uint32_t nx = 0, ny = 0;
  std::uint32_t n_steps = 1;
  std::vector<std::uint8_t> mask;
  std::vector<std::vector<double>> fields;  // each n_active * n_steps long

  std::size_t n_active() const;
};

void write_fields(const std::filesystem::path& path, const FieldFile& f);
FieldFile read_fields(const std::filesystem::path& path);

void write_basis(const std::filesystem::path& path, const KLEBasis& basis);
KLEBasis read_basis(const std::filesystem::path& path);

void write_net(const std::filesystem::path& path, const SurrogateNet& net);
SurrogateNet read_net(const std::filesystem::path& path);

void write_ensemble(const std::filesystem::path& path, const SurrogateEnsemble& ens);
SurrogateEnsemble read_ensemble(const std::filesystem::path& path);

/// Posterior sample stacks ("UQPE"): latent posteriors and full-space field
/// ensembles share the format, distinguished by a space tag.
struct SampleFile {
  std::string method;
  bool field_space = false;
  Matrix samples;
  std::vector<SampleDiag> diag;  // may be empty for field-space stacks
};

void write_samples(const std::filesystem::path& path, const SampleFile& s);
SampleFile read_samples(const std::filesystem::path& path);

void write_posterior(const std::filesystem::path& path, const PosteriorEnsemble& post);
PosteriorEnsemble read_posterior(const std::filesystem::path& path);

// Text helpers. All doubles use %.17g so artifacts round-trip bit-exactly.
std::string format_double(double v);
void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

/// ix,iy,step,value rows for one field of a stack.
std::string field_csv(const FieldFile& f, std::size_t index);
/// One row per sample, one column per coordinate.
std::string samples_csv(const Matrix& samples);

}  // namespace invuq::io
