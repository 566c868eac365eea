#include "fdst/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fdst {

namespace {

using json = nlohmann::json;

constexpr char kMagic[5] = {'F', 'D', 'S', 'T', '1'};

template <typename U>
U byteswap(U v) {
  U out{};
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xff));
  }
  return out;
}

template <typename U>
void write_le(std::ostream& os, U v) {
  if constexpr (std::endian::native == std::endian::big) v = byteswap(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U read_le(std::istream& is) {
  U v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(U));
  if (!is) throw IoError("unexpected end of FDST1 stream");
  if constexpr (std::endian::native == std::endian::big) v = byteswap(v);
  return v;
}

void write_f64(std::ostream& os, double x) { write_le(os, std::bit_cast<std::uint64_t>(x)); }
double read_f64(std::istream& is) { return std::bit_cast<double>(read_le<std::uint64_t>(is)); }

void write_header(std::ostream& os, const std::vector<std::size_t>& shape, std::uint8_t dtype) {
  os.write(kMagic, sizeof kMagic);
  write_le<std::uint16_t>(os, kFdst1Version);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) write_le<std::uint64_t>(os, d);
  write_le<std::uint8_t>(os, dtype);
}

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) { write_le(os, v); }
void write_u64(std::ostream& os, std::uint64_t v) { write_le(os, v); }
std::uint32_t read_u32(std::istream& is) { return read_le<std::uint32_t>(is); }
std::uint64_t read_u64(std::istream& is) { return read_le<std::uint64_t>(is); }

void write_fdst1(std::ostream& os, const RealTensor& t) {
  write_header(os, t.shape(), 0);
  for (double x : t.data()) write_f64(os, x);
  if (!os) throw IoError("failed writing FDST1 tensor");
}

void write_fdst1(std::ostream& os, const ComplexTensor& t) {
  write_header(os, t.shape(), 1);
  for (const auto& z : t.data()) {
    write_f64(os, z.real());
    write_f64(os, z.imag());
  }
  if (!os) throw IoError("failed writing FDST1 tensor");
}

AnyTensor read_fdst1(std::istream& is) {
  char magic[5];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw IoError("corrupt magic");
  const auto version = read_le<std::uint16_t>(is);
  if (version != kFdst1Version) throw IoError("FDST1 version mismatch");
  const auto rank = read_le<std::uint32_t>(is);
  if (rank == 0 || rank > 16) throw IoError("FDST1 rank out of range");
  std::vector<std::size_t> shape(rank);
  for (auto& d : shape) {
    d = read_le<std::uint64_t>(is);
    if (d == 0 || d > (std::uint64_t{1} << 32)) throw IoError("FDST1 extent out of range");
  }
  const auto dtype = read_le<std::uint8_t>(is);
  if (dtype == 0) {
    RealTensor t(shape);
    for (auto& x : t.storage()) x = read_f64(is);
    return t;
  }
  if (dtype == 1) {
    ComplexTensor t(shape);
    for (auto& z : t.storage()) {
      const double re = read_f64(is);
      const double im = read_f64(is);
      z = {re, im};
    }
    return t;
  }
  throw IoError("FDST1 unknown dtype tag");
}

RealTensor read_fdst1_real(std::istream& is) {
  auto any = read_fdst1(is);
  if (auto* t = std::get_if<RealTensor>(&any)) return std::move(*t);
  throw IoError("expected a real FDST1 tensor");
}

ComplexTensor read_fdst1_complex(std::istream& is) {
  auto any = read_fdst1(is);
  if (auto* t = std::get_if<ComplexTensor>(&any)) return std::move(*t);
  throw IoError("expected a complex FDST1 tensor");
}

void save_tensor(const std::filesystem::path& path, const RealTensor& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  write_fdst1(os, t);
}

RealTensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  try {
    return read_fdst1_real(is);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string instance_filename(std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "instance_%05zu.fdst", i);
  return buf;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < ds.instances.size(); ++i) {
    save_tensor(dir / instance_filename(i), ds.instances[i].values);
  }
  json meta;
  meta["n_instances"] = ds.instances.size();
  meta["T"] = ds.T;
  meta["n"] = ds.n;
  meta["delta"] = ds.delta;
  meta["gamma"] = ds.gammas();
  meta["seed"] = ds.seed;
  meta["split"] = {{"train", ds.train_ids}, {"test", ds.test_ids}};
  write_text_file(dir / "dataset.json", meta.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir) {
  json meta;
  try {
    meta = json::parse(read_text_file(dir / "dataset.json"));
  } catch (const json::exception& e) {
    throw IoError("malformed dataset.json in " + dir.string() + ": " + e.what());
  }
  Dataset ds;
  try {
    ds.T = meta.at("T").get<std::size_t>();
    ds.n = meta.at("n").get<std::size_t>();
    ds.delta = meta.at("delta").get<double>();
    ds.seed = meta.at("seed").get<std::uint64_t>();
    const auto count = meta.at("n_instances").get<std::size_t>();
    const auto gammas = meta.at("gamma").get<std::vector<double>>();
    if (gammas.size() != count) throw IoError("dataset.json gamma list length mismatch");
    ds.train_ids = meta.at("split").at("train").get<std::vector<std::size_t>>();
    ds.test_ids = meta.at("split").at("test").get<std::vector<std::size_t>>();
    ds.instances.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      auto& inst = ds.instances[i];
      inst.values = load_tensor(dir / instance_filename(i));
      if (inst.values.shape() != std::vector<std::size_t>{ds.T, ds.n}) {
        throw IoError(instance_filename(i) + ": shape does not match dataset.json");
      }
      inst.gamma = gammas[i];
      inst.delta = ds.delta;
      inst.n = ds.n;
    }
  } catch (const json::exception& e) {
    throw IoError("malformed dataset.json in " + dir.string() + ": " + e.what());
  }
  return ds;
}

}  // namespace fdst
