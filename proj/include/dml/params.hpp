#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dml/tensor.hpp"

namespace dml {

/// Named trainable tensors. Iteration is in name order.
class ParameterStore {
 public:
  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return values_.count(name) != 0; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  /// Frozen parameters are excluded from optimizer updates.
  void freeze(const std::string& name);
  bool is_frozen(const std::string& name) const { return frozen_.count(name) != 0; }

  std::vector<std::string> names() const;
  std::size_t size() const { return values_.size(); }
  /// Total number of scalar values over trainable parameters.
  std::size_t trainable_count() const;

  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
    return a.values_ == b.values_ && a.frozen_ == b.frozen_;
  }

 private:
  std::map<std::string, Tensor> values_;
  std::set<std::string> frozen_;
};

// Initializers. Each draws from a stream keyed by (seed, name) only, so a
// parameter's initial value does not depend on which other parameters exist.

/// Glorot-uniform with bound sqrt(6 / (rows + cols)).
Tensor glorot_uniform(std::uint64_t seed, const std::string& name, std::size_t rows,
                      std::size_t cols);
Tensor uniform_init(std::uint64_t seed, const std::string& name, Shape shape, double bound);

inline constexpr double kEmbeddingInitBound = 0.05;

// Checkpoints: text format, version line then one record per parameter with
// values in hex-float notation so a round trip is bit-exact.
//
//   dml-checkpoint 1
//   params <count>
//   <name> <rank> <dim0> [dim1] <frozen 0|1>
//   <v0> <v1> ...
inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const ParameterStore& store);
ParameterStore read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store);
ParameterStore load_checkpoint(const std::filesystem::path& path);

}  // namespace dml
