#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace catgen {

/// Flat `key = value` settings with `[section]` headers; keys are stored as
/// `section.key`. Every key must be registered and its value must parse as the
/// registered type, otherwise UsageError.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& source = "<config>");
  static Config load(const std::filesystem::path& path);

  /// Validates and stores one entry (used for command-line overrides too).
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_real(const std::string& key, double fallback) const;
  std::size_t get_count(const std::string& key, std::size_t fallback) const;
  bool get_flag(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace catgen
