#include "shillab/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "shillab/errors.hpp"

namespace shillab {

void save_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, const num::Tensor*>>& entries) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open checkpoint for writing: " + path);
  out << "shillab-checkpoint 1\n" << entries.size() << "\n";
  char buf[64];
  for (const auto& [name, t] : entries) {
    if (name.empty() || name.find(' ') != std::string::npos) {
      throw ContractError("checkpoint names must be non-empty and space-free");
    }
    out << name << " " << t->rows() << " " << t->cols() << "\n";
    for (std::size_t i = 0; i < t->size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", (*t)[i]);
      out << buf << (i + 1 == t->size() ? "" : " ");
    }
    out << "\n";
  }
  if (!out) throw ParseError("checkpoint write failed: " + path);
}

std::vector<std::pair<std::string, num::Tensor>> load_checkpoint(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "shillab-checkpoint" || version != 1) {
    throw ParseError("unrecognized checkpoint header in " + path);
  }
  std::size_t count = 0;
  if (!(in >> count)) throw ParseError("checkpoint missing entry count");
  std::vector<std::pair<std::string, num::Tensor>> out;
  out.reserve(count);
  for (std::size_t e = 0; e < count; ++e) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols)) {
      throw ParseError("checkpoint entry header truncated");
    }
    num::Tensor t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!(in >> t[i])) throw ParseError("checkpoint values truncated: " + name);
    }
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

const num::Tensor& checkpoint_get(
    const std::vector<std::pair<std::string, num::Tensor>>& entries,
    const std::string& name) {
  for (const auto& [n, t] : entries) {
    if (n == name) return t;
  }
  throw LookupError("checkpoint entry not found: " + name);
}

}  // namespace shillab
