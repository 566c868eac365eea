#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <variant>

#include "fdst/burgers.hpp"
#include "fdst/tensor.hpp"

namespace fdst {

/// Raised for any filesystem or format problem; maps to exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// FDST1 tensor block:
///   "FDST1" | u16 version = 1 | u32 rank | rank x u64 dims | u8 dtype |
///   row-major payload of little-endian float64 (complex as re, im pairs).
/// dtype 0 = real64, 1 = complex pair.
inline constexpr std::uint16_t kFdst1Version = 1;

using AnyTensor = std::variant<RealTensor, ComplexTensor>;

void write_fdst1(std::ostream& os, const RealTensor& t);
void write_fdst1(std::ostream& os, const ComplexTensor& t);
AnyTensor read_fdst1(std::istream& is);
RealTensor read_fdst1_real(std::istream& is);
ComplexTensor read_fdst1_complex(std::istream& is);

void save_tensor(const std::filesystem::path& path, const RealTensor& t);
RealTensor load_tensor(const std::filesystem::path& path);

/// Little-endian scalar helpers shared by the checkpoint format.
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);

/// One instance_NNNNN.fdst per instance plus dataset.json.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& dir);

std::string instance_filename(std::size_t i);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace fdst
