#include <jumpnav/kv_config.hpp>

#include <jumpnav/errors.hpp>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace jumpnav {

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

KvConfig KvConfig::parse(const std::string& text, const std::string& origin) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);
    const size_t sep = line.find_first_of(" \t");
    if (sep == std::string::npos)
      throw ParseError(origin + ":" + std::to_string(lineno) +
                       ": expected 'key value', got '" + line + "'");
    const std::string key = line.substr(0, sep);
    const size_t vstart = line.find_first_not_of(" \t", sep);
    const std::string value = line.substr(vstart);
    for (const char c : key)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'))
        throw ParseError(origin + ":" + std::to_string(lineno) + ": bad key '" + key + "'");
    cfg.set_string(key, value);
  }
  return cfg;
}

KvConfig KvConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path);
}

std::optional<std::string> KvConfig::find(const std::string& key) const {
  for (const auto& [k, v] : items_)
    if (k == key) return v;
  return std::nullopt;
}

bool KvConfig::has(const std::string& key) const { return find(key).has_value(); }

double KvConfig::get_double(const std::string& key) const {
  const auto v = find(key);
  if (!v) throw ParseError("missing config key: " + key);
  try {
    size_t used = 0;
    const double d = std::stod(*v, &used);
    while (used < v->size() && std::isspace(static_cast<unsigned char>((*v)[used]))) ++used;
    if (used != v->size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ParseError("config key '" + key + "' is not a number: '" + *v + "'");
  }
}

double KvConfig::get_double(const std::string& key, double dflt) const {
  return has(key) ? get_double(key) : dflt;
}

int KvConfig::get_int(const std::string& key, int dflt) const {
  if (!has(key)) return dflt;
  const double d = get_double(key);
  const int i = static_cast<int>(d);
  if (static_cast<double>(i) != d)
    throw ParseError("config key '" + key + "' is not an integer");
  return i;
}

std::string KvConfig::get_string(const std::string& key) const {
  const auto v = find(key);
  if (!v) throw ParseError("config key '" + key + "' is missing");
  return *v;
}

std::string KvConfig::get_string(const std::string& key, const std::string& dflt) const {
  const auto v = find(key);
  return v ? *v : dflt;
}

void KvConfig::set_double(const std::string& key, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  set_string(key, buf);
}

void KvConfig::set_int(const std::string& key, int v) { set_string(key, std::to_string(v)); }

void KvConfig::set_string(const std::string& key, const std::string& v) {
  for (auto& [k, val] : items_)
    if (k == key) {
      val = v;
      return;
    }
  items_.emplace_back(key, v);
}

std::string KvConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : items_) {
    out += k;
    out += ' ';
    out += v;
    out += '\n';
  }
  return out;
}

void KvConfig::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw ParseError("cannot write config file: " + path);
  f << serialize();
}

std::uint64_t KvConfig::hash() const { return fnv1a64(serialize()); }

}  // namespace jumpnav
