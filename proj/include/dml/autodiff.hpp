#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dml/kernels.hpp"
#include "dml/tensor.hpp"

namespace dml {

enum class OpKind : std::uint8_t {
  leaf,
  constant,
  matmul,
  add,
  subtract,
  scale,
  hadamard,
  relu,
  sigmoid,
  row_softmax,
  transpose,
  concat_cols,
  slice_rows,
  row_stack,
  reduce_mean,
  square,
  log,
  lookup_rows,
  clamp,
  stop_gradient,
};

std::string_view to_string(OpKind kind);

/// Position of a node on its tape.
struct NodeId {
  std::uint32_t index = 0;
  friend bool operator==(NodeId a, NodeId b) { return a.index == b.index; }
};

/// Variable-length index lists in CSR form, one bag per batch row.
struct IndexBags {
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::int32_t> indices;

  std::size_t size() const { return offsets.size() - 1; }
  void push(std::span<const std::int32_t> bag);
  void push(std::int32_t index) { push(std::span<const std::int32_t>(&index, 1)); }
  std::span<const std::int32_t> bag(std::size_t row) const {
    return {indices.data() + offsets[row], offsets[row + 1] - offsets[row]};
  }
  kernels::BagView view() const { return {offsets, indices}; }
};

struct OpAttrs {
  double scalar = 0.0;      // scale factor
  double lo = 0.0;          // clamp bounds
  double hi = 0.0;
  std::size_t begin = 0;    // slice_rows
  std::size_t count = 0;
  std::shared_ptr<const IndexBags> bags;  // lookup_rows
};

struct TapeNode {
  OpKind kind = OpKind::leaf;
  std::vector<NodeId> inputs;
  Tensor output;
  /// Input positions through which no adjoint flows.
  std::vector<std::size_t> grad_blocked_inputs;
  OpAttrs attrs;
  /// True when some differentiable leaf reaches this node over unblocked edges.
  bool needs_grad = false;
  std::string name;

  bool is_blocked(std::size_t position) const;
};

/// Append-only record of primitive applications. Nodes reference earlier
/// nodes only, so the tape is its own topological order.
///
/// A tape is single-threaded. Finished tapes may be moved across threads.
class Tape {
 public:
  /// Differentiable leaf.
  NodeId variable(Tensor value, std::string name = {});
  /// Leaf that never receives an adjoint.
  NodeId constant(Tensor value);
  /// Named differentiable leaf; repeated calls with one name return the same node.
  NodeId parameter(const std::string& name, const Tensor& value);
  std::optional<NodeId> find_parameter(const std::string& name) const;
  const std::map<std::string, NodeId>& parameters() const { return parameters_; }

  /// Records one primitive. Throws ShapeError on invalid operands and
  /// NumericError when the result contains NaN or Inf.
  NodeId apply(OpKind kind, std::span<const NodeId> inputs, OpAttrs attrs = {},
               std::span<const std::size_t> blocked = {});

  NodeId matmul(NodeId a, NodeId b);
  /// a + b; b may be a row vector broadcast over the rows of a.
  NodeId add(NodeId a, NodeId b);
  NodeId subtract(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId relu(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId row_softmax(NodeId a);
  NodeId transpose(NodeId a);
  NodeId concat_cols(std::span<const NodeId> parts);
  NodeId slice_rows(NodeId a, std::size_t begin, std::size_t count);
  std::vector<NodeId> split_rows(NodeId a, std::size_t parts);
  NodeId row_stack(std::span<const NodeId> parts);
  NodeId reduce_mean(NodeId a);
  NodeId square(NodeId a);
  NodeId log(NodeId a);
  /// Row r of the result is the mean of table rows listed in bag r.
  NodeId lookup_rows(NodeId table, std::shared_ptr<const IndexBags> bags);
  NodeId clamp(NodeId a, double lo, double hi);
  /// Forward identity; contributes no adjoint to x.
  NodeId stop_gradient(NodeId x);

  /// Test hook: the next stop_gradient calls output these values, in order,
  /// instead of their inputs. Lets a finite-difference probe hold detached
  /// quantities fixed while parameters move.
  void hold_detached(std::vector<Tensor> values);
  /// Outputs of every stop_gradient node, in tape order.
  std::vector<Tensor> detached_values() const;

  const Tensor& value(NodeId id) const { return node(id).output; }
  const TapeNode& node(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  NodeId push(TapeNode node);

  std::vector<TapeNode> nodes_;
  std::map<std::string, NodeId> parameters_;
  std::vector<Tensor> held_;
  std::size_t held_cursor_ = 0;
};

/// Accumulated adjoints, indexed by node.
class GradientMap {
 public:
  GradientMap() = default;
  explicit GradientMap(const Tape& tape);

  /// True when an adjoint reached the node.
  bool contains(NodeId id) const;
  /// Adjoint of a reached node; throws std::out_of_range otherwise.
  const Tensor& at(NodeId id) const;
  /// Adjoint, or zeros of the node's shape when nothing reached it.
  Tensor of(NodeId id) const;

  void accumulate(NodeId id, Tensor delta);

 private:
  std::vector<std::optional<Tensor>> grads_;
  std::vector<Shape> shapes_;
};

/// Reverse-mode sweep from a scalar node. Adjoints are accumulated in reverse
/// tape order, input positions ascending, so results are bit-reproducible.
GradientMap backward(const Tape& tape, NodeId loss);

/// Named parameters with a path into the input of some stop_gradient node.
std::set<std::string> parameters_behind_stop_gradient(const Tape& tape);

/// Adjoints of the tape's named parameters that the sweep reached.
std::map<std::string, Tensor> parameter_gradients(const Tape& tape, const GradientMap& grads);

}  // namespace dml
