#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace facetflow {

enum class Provenance { measured, fitted, configured };

inline const char* provenance_tag(Provenance p) {
  switch (p) {
    case Provenance::measured: return "measured";
    case Provenance::fitted: return "fitted";
    default: return "configured";
  }
}

/// Flat key-value report; every numeric entry carries its provenance tag.
class Report {
 public:
  void add(const std::string& key, double value, Provenance p) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    lines_.push_back(key + " = " + buf + " [" + provenance_tag(p) + "]");
  }
  void add(const std::string& key, int value, Provenance p) {
    lines_.push_back(key + " = " + std::to_string(value) + " [" +
                     provenance_tag(p) + "]");
  }
  void add(const std::string& key, const std::string& value, Provenance p) {
    lines_.push_back(key + " = " + value + " [" + provenance_tag(p) + "]");
  }
  void note(const std::string& text) { lines_.push_back("# " + text); }

  std::string str() const {
    std::string out;
    for (const auto& l : lines_) {
      out += l;
      out += '\n';
    }
    return out;
  }

  void write(const std::string& path) const {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    if (!fp) throw std::runtime_error("cannot open " + path + " for writing");
    std::string s = str();
    std::fwrite(s.data(), 1, s.size(), fp);
    std::fclose(fp);
  }

 private:
  std::vector<std::string> lines_;
};

}  // namespace facetflow
