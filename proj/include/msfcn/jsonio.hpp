#pragma once

#include <fstream>
#include <set>
#include <string>
#include <utility>

#include "json.hpp"
#include "msfcn/errors.hpp"

namespace msfcn {

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void save_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot open for writing");
  out << j.dump(2) << "\n";
  if (!out) throw FormatError(path + ": write failed");
}

// Strict view over one JSON object: every key must be consumed through the
// view, leftovers are rejected by their full dotted path. Keeps config typos
// from silently becoming defaults.
class JsonView {
 public:
  JsonView(const nlohmann::json& j, std::string path)
      : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw FormatError(path_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return j_->contains(key); }

  template <typename T>
  T require(const std::string& key) {
    if (!j_->contains(key))
      throw ValueError(path_ + "." + key + ": missing required field");
    return fetch<T>(key);
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!j_->contains(key)) return fallback;
    return fetch<T>(key);
  }

  JsonView child(const std::string& key) {
    if (!j_->contains(key))
      throw ValueError(path_ + "." + key + ": missing required section");
    used_.insert(key);
    return JsonView((*j_)[key], path_ + "." + key);
  }

  const nlohmann::json& raw(const std::string& key) {
    if (!j_->contains(key))
      throw ValueError(path_ + "." + key + ": missing required field");
    used_.insert(key);
    return (*j_)[key];
  }

  void finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!used_.count(it.key()))
        throw ValueError(path_ + "." + it.key() + ": unknown field");
  }

 private:
  template <typename T>
  T fetch(const std::string& key) {
    used_.insert(key);
    try {
      return (*j_)[key].template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw FormatError(path_ + "." + key + ": wrong type");
    }
  }

  const nlohmann::json* j_;
  std::string path_;
  std::set<std::string> used_;
};

}  // namespace msfcn
