#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "fdst/burgers.hpp"
#include "fdst/fno.hpp"
#include "fdst/train.hpp"

namespace fdst {

/// Bad key or value in a run configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string source, std::size_t line, std::string key, const std::string& what)
      : std::runtime_error(format(source, line, key, what)), key_(std::move(key)), line_(line) {}
  const std::string& key() const { return key_; }
  std::size_t line() const { return line_; }

 private:
  static std::string format(const std::string& source, std::size_t line, const std::string& key,
                            const std::string& what);
  std::string key_;
  std::size_t line_;
};

/// Everything a run needs, assembled from one flat "key = value" file.
struct RunConfig {
  BurgersConfig data;
  std::size_t instances = 20;
  std::size_t test_instances = 4;
  FnoConfig model;
  TrainConfig train;
  double level = 0.95;
  std::uint64_t seed = 0;

  /// Canonical text form; parse_run_config(to_text()) reproduces *this.
  std::string to_text() const;
};

/// Unknown keys, duplicates, type errors and range violations all throw
/// ConfigError naming the key and line.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace fdst
