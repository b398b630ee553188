#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace qwp::cli {

/// Ordered key=value record of a run. Keys without a dot mirror command-line
/// flags, so a manifest can be passed back through --config to repeat a run.
class Manifest {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);
  void set(const std::string& key, bool value);

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::string text() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Hex SHA-256 of a file's bytes.
std::string file_digest(const std::filesystem::path& path);

/// Parses key=value lines ('#' comments and blank lines ignored).
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

}  // namespace qwp::cli
