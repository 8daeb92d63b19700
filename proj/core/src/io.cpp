#include "invuq/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "invuq/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "artifact formats are little-endian; big-endian hosts unsupported");

namespace invuq::io {

namespace {

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw MissingArtifact("cannot open for writing: " + path.string());
    path_ = path;
  }
  void magic(const char m[4]) { out_.write(m, 4); }
  void u8(std::uint8_t v) { out_.write(reinterpret_cast<const char*>(&v), 1); }
  void u32(std::uint32_t v) { out_.write(reinterpret_cast<const char*>(&v), 4); }
  void u64(std::uint64_t v) { out_.write(reinterpret_cast<const char*>(&v), 8); }
  void f64(double v) { out_.write(reinterpret_cast<const char*>(&v), 8); }
  void f64s(std::span<const double> v) {
    out_.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * 8));
  }
  void bytes(std::span<const std::uint8_t> v) {
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size()));
  }
  void finish() {
    out_.flush();
    if (!out_) throw MissingArtifact("write failed: " + path_.string());
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw MissingArtifact("missing artifact: " + path.string());
  }
  void expect_magic(const char m[4]) {
    char buf[4];
    in_.read(buf, 4);
    if (!in_ || std::memcmp(buf, m, 4) != 0)
      throw MissingArtifact("bad magic in " + path_.string() + " (expected " +
                            std::string(m, 4) + ")");
  }
  std::uint8_t u8() { return get<std::uint8_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return get<double>(); }
  void f64s(std::span<double> v) {
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
    check();
  }
  void bytes(std::span<std::uint8_t> v) {
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size()));
    check();
  }

 private:
  template <typename T>
  T get() {
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    check();
    return v;
  }
  void check() {
    if (!in_) throw MissingArtifact("truncated artifact: " + path_.string());
  }
  std::ifstream in_;
  std::filesystem::path path_;
};

void expect_version(std::uint32_t got, std::uint32_t want, const std::filesystem::path& p) {
  if (got != want)
    throw MissingArtifact("unsupported format version " + std::to_string(got) + " in " +
                          p.string());
}

}  // namespace

std::size_t FieldFile::n_active() const {
  std::size_t n = 0;
  for (auto m : mask) n += (m != 0);
  return n;
}

void write_fields(const std::filesystem::path& path, const FieldFile& f) {
  Writer w(path);
  w.magic("UQF1");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(f.kind));
  w.u32(f.nx);
  w.u32(f.ny);
  const std::size_t n_active = f.n_active();
  w.u32(static_cast<std::uint32_t>(n_active));
  w.u32(f.n_steps);
  w.u32(static_cast<std::uint32_t>(f.fields.size()));
  w.bytes(f.mask);
  for (const auto& field : f.fields) {
    if (field.size() != n_active * f.n_steps)
      throw ConfigError("write_fields: field length mismatch");
    w.f64s(field);
  }
  w.finish();
}

FieldFile read_fields(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic("UQF1");
  expect_version(r.u32(), 1, path);
  FieldFile f;
  f.kind = static_cast<FieldKind>(r.u32());
  f.nx = r.u32();
  f.ny = r.u32();
  const std::uint32_t n_active = r.u32();
  f.n_steps = r.u32();
  const std::uint32_t count = r.u32();
  f.mask.resize(static_cast<std::size_t>(f.nx) * f.ny);
  r.bytes(f.mask);
  if (f.n_active() != n_active) throw MissingArtifact("mask/active mismatch in " + path.string());
  f.fields.assign(count, std::vector<double>(static_cast<std::size_t>(n_active) * f.n_steps));
  for (auto& field : f.fields) r.f64s(field);
  return f;
}

void write_basis(const std::filesystem::path& path, const KLEBasis& basis) {
  Writer w(path);
  w.magic("UQKB");
  w.u32(1);
  w.u64(basis.support());
  w.u32(static_cast<std::uint32_t>(basis.n_modes()));
  w.f64(basis.rtol);
  w.f64(basis.total_energy);
  w.u8(basis.degenerate ? 1 : 0);
  w.f64s(basis.mean);
  w.f64s(basis.eigenvalues);
  w.f64s(basis.modes.flat());
  w.finish();
}

KLEBasis read_basis(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic("UQKB");
  expect_version(r.u32(), 1, path);
  KLEBasis b;
  const std::uint64_t support = r.u64();
  const std::uint32_t n_modes = r.u32();
  b.rtol = r.f64();
  b.total_energy = r.f64();
  b.degenerate = r.u8() != 0;
  b.mean.resize(support);
  r.f64s(b.mean);
  b.eigenvalues.resize(n_modes);
  r.f64s(b.eigenvalues);
  b.modes = Matrix(support, n_modes);
  r.f64s(b.modes.flat());
  return b;
}

namespace {

void write_net_block(Writer& w, const SurrogateNet& net) {
  w.magic("UQSN");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(net.activation));
  w.u32(static_cast<std::uint32_t>(net.widths.size()));
  for (std::size_t v : net.widths) w.u32(static_cast<std::uint32_t>(v));
  w.f64s(net.theta);
}

SurrogateNet read_net_block(Reader& r, const std::filesystem::path& path) {
  r.expect_magic("UQSN");
  expect_version(r.u32(), 1, path);
  SurrogateNet net;
  net.activation = static_cast<Activation>(r.u32());
  const std::uint32_t nw = r.u32();
  net.widths.resize(nw);
  for (auto& v : net.widths) v = r.u32();
  net.theta.resize(net.param_count());
  r.f64s(net.theta);
  return net;
}

}  // namespace

void write_net(const std::filesystem::path& path, const SurrogateNet& net) {
  Writer w(path);
  write_net_block(w, net);
  w.finish();
}

SurrogateNet read_net(const std::filesystem::path& path) {
  Reader r(path);
  return read_net_block(r, path);
}

void write_ensemble(const std::filesystem::path& path, const SurrogateEnsemble& ens) {
  Writer w(path);
  w.magic("UQSE");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(ens.kind));
  w.u32(static_cast<std::uint32_t>(ens.members.size()));
  for (std::uint64_t s : ens.member_streams) w.u64(s);
  for (const auto& m : ens.members) write_net_block(w, m);
  w.finish();
}

SurrogateEnsemble read_ensemble(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic("UQSE");
  expect_version(r.u32(), 1, path);
  SurrogateEnsemble ens;
  ens.kind = static_cast<EnsembleKind>(r.u32());
  const std::uint32_t count = r.u32();
  ens.member_streams.resize(count);
  for (auto& s : ens.member_streams) s = r.u64();
  ens.members.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) ens.members.push_back(read_net_block(r, path));
  return ens;
}

void write_samples(const std::filesystem::path& path, const SampleFile& s) {
  Writer w(path);
  w.magic("UQPE");
  w.u32(1);
  w.u8(s.field_space ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(s.method.size()));
  w.bytes({reinterpret_cast<const std::uint8_t*>(s.method.data()), s.method.size()});
  w.u32(static_cast<std::uint32_t>(s.samples.rows()));
  w.u32(static_cast<std::uint32_t>(s.samples.cols()));
  w.f64s(s.samples.flat());
  w.u32(static_cast<std::uint32_t>(s.diag.size()));
  for (const auto& d : s.diag) {
    w.f64(d.final_loss);
    w.u64(d.iterations);
    w.u8(d.converged ? 1 : 0);
  }
  w.finish();
}

SampleFile read_samples(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic("UQPE");
  expect_version(r.u32(), 1, path);
  SampleFile s;
  s.field_space = r.u8() != 0;
  const std::uint8_t mlen = r.u8();
  std::vector<std::uint8_t> mbuf(mlen);
  r.bytes(mbuf);
  s.method.assign(mbuf.begin(), mbuf.end());
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  s.samples = Matrix(rows, cols);
  r.f64s(s.samples.flat());
  const std::uint32_t nd = r.u32();
  s.diag.resize(nd);
  for (auto& d : s.diag) {
    d.final_loss = r.f64();
    d.iterations = r.u64();
    d.converged = r.u8() != 0;
  }
  return s;
}

void write_posterior(const std::filesystem::path& path, const PosteriorEnsemble& post) {
  SampleFile s;
  s.method = post.method;
  s.field_space = false;
  s.samples = post.samples;
  s.diag = post.diag;
  write_samples(path, s);
}

PosteriorEnsemble read_posterior(const std::filesystem::path& path) {
  SampleFile s = read_samples(path);
  if (s.field_space) throw MissingArtifact("expected latent posterior in " + path.string());
  PosteriorEnsemble p;
  p.method = s.method;
  p.samples = std::move(s.samples);
  p.diag = std::move(s.diag);
  return p;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifact("cannot open for writing: " + path.string());
  out << content;
  out.flush();
  if (!out) throw MissingArtifact("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("missing artifact: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string field_csv(const FieldFile& f, std::size_t index) {
  std::ostringstream out;
  out << "ix,iy,step,value\n";
  const std::size_t n_active = f.n_active();
  const auto& field = f.fields.at(index);
  for (std::uint32_t s = 0; s < f.n_steps; ++s) {
    std::size_t a = 0;
    for (std::uint32_t iy = 0; iy < f.ny; ++iy) {
      for (std::uint32_t ix = 0; ix < f.nx; ++ix) {
        if (!f.mask[static_cast<std::size_t>(iy) * f.nx + ix]) continue;
        out << ix << ',' << iy << ',' << s << ','
            << format_double(field[static_cast<std::size_t>(s) * n_active + a]) << '\n';
        ++a;
      }
    }
  }
  return out.str();
}

std::string samples_csv(const Matrix& samples) {
  std::ostringstream out;
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    for (std::size_t j = 0; j < samples.cols(); ++j) {
      if (j) out << ',';
      out << format_double(samples(i, j));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace invuq::io
