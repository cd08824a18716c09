#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "corrdict/cli.hpp"
#include "corrdict/errors.hpp"

namespace corrdict::cli {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> parts;
  while (true) {
    const auto comma = s.find(',');
    parts.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return parts;
}

template <typename T>
T parse_number(std::string_view text, const std::string& key) {
  text = trim(text);
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw InvalidConfig("invalid value '" + std::string(text) + "' for " + key);
  }
  return v;
}

}  // namespace

std::string canonical_key(std::string_view key) {
  key = trim(key);
  while (!key.empty() && key.front() == '-') key.remove_prefix(1);
  std::string out(key);
  std::replace(out.begin(), out.end(), '-', '_');
  return out;
}

KeyValues parse_config_text(std::string_view text) {
  KeyValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidConfig("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = canonical_key(line.substr(0, eq));
    if (key.empty()) {
      throw InvalidConfig("config line " + std::to_string(line_no) + ": empty key");
    }
    out[key] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

KeyValues read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

KeyValues preset_values(std::string_view name) {
  if (name == "paper-desk") {
    return {{"networks", "10"}, {"atoms", "10"},   {"timepoints", "50"},
            {"grid", "24x24x12"}, {"sparsity", "3"}, {"noise", "0.05"}};
  }
  if (name == "tiny") {
    return {{"networks", "4"}, {"atoms", "4"}, {"timepoints", "16"},
            {"grid", "8x8x4"},   {"sparsity", "2"}};
  }
  throw InvalidConfig("unknown preset '" + std::string(name) + "' (expected paper-desk or tiny)");
}

ManifestRecord read_manifest(const std::filesystem::path& path, std::string_view command) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::optional<ManifestRecord> found;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidConfig("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object() || rec.value("command", "") != command) continue;
    ManifestRecord r;
    r.command = std::string(command);
    for (const auto& [k, v] : rec.at("config").items()) {
      r.config[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    found = std::move(r);
  }
  if (!found) {
    throw InvalidConfig("no '" + std::string(command) + "' record in manifest " + path.string());
  }
  return *found;
}

bool Settings::has(const std::string& key) const {
  const auto it = values_.find(key);
  return it != values_.end() && !it->second.empty();
}

std::string Settings::str(const std::string& key) const {
  const auto it = values_.find(key);
  return it == values_.end() ? std::string() : it->second;
}

long long Settings::integer(const std::string& key) const {
  return parse_number<long long>(str(key), key);
}

double Settings::real(const std::string& key) const {
  return parse_number<double>(str(key), key);
}

bool Settings::flag(const std::string& key) const {
  std::string v = str(key);
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v.empty() || v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InvalidConfig("invalid boolean '" + str(key) + "' for " + key);
}

std::vector<double> Settings::reals(const std::string& key) const {
  std::vector<double> out;
  const std::string v = str(key);
  if (trim(v).empty()) return out;
  for (auto part : split_commas(v)) out.push_back(parse_number<double>(part, key));
  return out;
}

std::vector<long long> Settings::integers(const std::string& key) const {
  std::vector<long long> out;
  const std::string v = str(key);
  if (trim(v).empty()) return out;
  for (auto part : split_commas(v)) out.push_back(parse_number<long long>(part, key));
  return out;
}

}  // namespace corrdict::cli
