#include "dml/params.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dml/error.hpp"
#include "dml/random.hpp"

namespace dml {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection on the top of the range keeps the draw exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

void ParameterStore::add(const std::string& name, Tensor value) {
  if (!values_.emplace(name, std::move(value)).second) {
    throw ConfigError("parameter '" + name + "' already exists");
  }
}

const Tensor& ParameterStore::at(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParameterStore::at(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

void ParameterStore::freeze(const std::string& name) {
  at(name);
  frozen_.insert(name);
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(values_.size());
  for (const auto& [name, _] : values_) out.push_back(name);
  return out;
}

std::size_t ParameterStore::trainable_count() const {
  std::size_t total = 0;
  for (const auto& [name, value] : values_) {
    if (!is_frozen(name)) total += value.size();
  }
  return total;
}

Tensor uniform_init(std::uint64_t seed, const std::string& name, Shape shape, double bound) {
  Rng rng(derive_seed(seed, name));
  Tensor t(shape);
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

Tensor glorot_uniform(std::uint64_t seed, const std::string& name, std::size_t rows,
                      std::size_t cols) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return uniform_init(seed, name, Shape(rows, cols), bound);
}

void write_checkpoint(std::ostream& out, const ParameterStore& store) {
  out << "dml-checkpoint " << kCheckpointVersion << "\n";
  out << "params " << store.size() << "\n";
  char buf[40];
  for (const auto& [name, value] : store) {
    const Shape& s = value.shape();
    out << name << " " << s.rank();
    for (std::size_t d = 0; d < s.rank(); ++d) out << " " << s[d];
    out << " " << (store.is_frozen(name) ? 1 : 0) << "\n";
    for (std::size_t i = 0; i < value.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%a", value[i]);
      out << (i ? " " : "") << buf;
    }
    out << "\n";
  }
}

ParameterStore read_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "dml-checkpoint") {
    throw DataError("checkpoint: missing header");
  }
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  std::string tag;
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "params") throw DataError("checkpoint: missing count");

  ParameterStore store;
  for (std::size_t p = 0; p < count; ++p) {
    std::string name;
    std::size_t rank = 0;
    if (!(in >> name >> rank) || rank < 1 || rank > 2) {
      throw DataError("checkpoint: bad record " + std::to_string(p));
    }
    std::size_t d0 = 0, d1 = 0;
    in >> d0;
    if (rank == 2) in >> d1;
    int frozen = 0;
    in >> frozen;
    const Shape shape = rank == 1 ? Shape(d0) : Shape(d0, d1);
    std::vector<double> values(shape.size());
    std::string token;
    for (double& v : values) {
      if (!(in >> token)) throw DataError("checkpoint: truncated values for " + name);
      char* end = nullptr;
      v = std::strtod(token.c_str(), &end);
      if (end == token.c_str() || *end != '\0') {
        throw DataError("checkpoint: bad value '" + token + "' in " + name);
      }
    }
    store.add(name, Tensor(shape, std::move(values)));
    if (frozen) store.freeze(name);
  }
  return store;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store) {
  std::ofstream out(path);
  if (!out) throw DataError("checkpoint: cannot write " + path.string());
  write_checkpoint(out, store);
}

ParameterStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("checkpoint: cannot read " + path.string());
  return read_checkpoint(in);
}

}  // namespace dml
