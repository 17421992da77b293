#pragma once

// Flat key-value config files: one "key value" pair per line, '#' comments,
// blank lines ignored. Values keep their original spelling so a load/save
// round trip is byte-stable; typed getters parse on demand.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace jumpnav {

class KvConfig {
 public:
  static KvConfig parse(const std::string& text, const std::string& origin = "<string>");
  static KvConfig load_file(const std::string& path);

  bool has(const std::string& key) const;
  double get_double(const std::string& key) const;           // throws ParseError if absent
  double get_double(const std::string& key, double dflt) const;
  int get_int(const std::string& key, int dflt) const;
  std::string get_string(const std::string& key) const;       // throws ParseError if absent
  std::string get_string(const std::string& key, const std::string& dflt) const;

  void set_double(const std::string& key, double v);
  void set_int(const std::string& key, int v);
  void set_string(const std::string& key, const std::string& v);

  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

  // Canonical text: keys in insertion order, single space separated.
  std::string serialize() const;
  void save(const std::string& path) const;

  // FNV-1a over the canonical serialization; stamped into result files so a
  // trajectory can be traced back to the exact configuration that made it.
  std::uint64_t hash() const;

 private:
  std::optional<std::string> find(const std::string& key) const;
  std::vector<std::pair<std::string, std::string>> items_;
};

std::uint64_t fnv1a64(const std::string& data);

}  // namespace jumpnav
