#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace corrdict::cli {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitNumerical = 3 };

// Entry point of the `corrdict` tool. Never throws; returns the exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

// Flat key/value configuration. Keys are snake_case; flags use the same names
// with dashes ("--group-threshold" <-> "group_threshold").
using KeyValues = std::map<std::string, std::string>;

std::string canonical_key(std::string_view key);

// `key = value` lines; '#' starts a comment; blank lines ignored.
KeyValues parse_config_text(std::string_view text);
KeyValues read_config_file(const std::filesystem::path& path);

// Values a preset contributes ("paper-desk", "tiny"). Throws InvalidConfig.
KeyValues preset_values(std::string_view name);

struct ManifestRecord {
  std::string command;
  KeyValues config;
};

// Last record for `command` in a JSON-lines manifest. Throws IoError when the
// file is unreadable and InvalidConfig when no record matches.
ManifestRecord read_manifest(const std::filesystem::path& path, std::string_view command);

// Typed view over a resolved configuration. Conversion failures throw
// InvalidConfig naming the key.
class Settings {
 public:
  Settings() = default;
  explicit Settings(KeyValues values) : values_(std::move(values)) {}

  bool has(const std::string& key) const;
  std::string str(const std::string& key) const;
  long long integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;     // comma separated
  std::vector<long long> integers(const std::string& key) const;

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const KeyValues& values() const { return values_; }

 private:
  KeyValues values_;
};

}  // namespace corrdict::cli
