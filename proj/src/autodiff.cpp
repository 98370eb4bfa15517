#include "dml/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dml/error.hpp"

namespace dml {

namespace {

std::string describe(OpKind kind, std::span<const Tensor* const> operands) {
  std::string msg(to_string(kind));
  msg += ": incompatible shapes";
  for (const Tensor* t : operands) msg += " " + t->shape().to_string();
  return msg;
}

[[noreturn]] void shape_error(OpKind kind, std::initializer_list<const Tensor*> operands) {
  throw ShapeError(describe(kind, std::span<const Tensor* const>(operands.begin(), operands.size())));
}

void expect_arity(OpKind kind, std::size_t got, std::size_t want) {
  if (got != want) {
    throw ShapeError(std::string(to_string(kind)) + ": expected " + std::to_string(want) +
                     " inputs, got " + std::to_string(got));
  }
}

// b is either the same shape as a or a single row spanning a's columns.
bool is_row_broadcast(const Tensor& a, const Tensor& b) {
  return !(a.shape() == b.shape()) && b.rows() == 1 && b.cols() == a.cols();
}

Tensor elementwise_sum(const Tensor& a, const Tensor& b, double sign) {
  Tensor out(a.shape());
  if (a.shape() == b.shape()) {
    kernels::zip(a.data(), b.data(), out.data(),
                 [sign](double x, double y) { return x + sign * y; });
    return out;
  }
  const std::size_t cols = a.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = a(r, c) + sign * b[c];
  }
  return out;
}

Tensor forward(OpKind kind, std::span<const Tensor* const> in, const OpAttrs& attrs) {
  switch (kind) {
    case OpKind::leaf:
    case OpKind::constant:
      throw std::logic_error("leaves are created with Tape::variable/constant");

    case OpKind::matmul: {
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      if (a.cols() != b.rows()) shape_error(kind, {&a, &b});
      Tensor out(Shape(a.rows(), b.cols()));
      kernels::matmul(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols());
      return out;
    }
    case OpKind::add:
    case OpKind::subtract: {
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      if (!(a.shape() == b.shape()) && !is_row_broadcast(a, b)) shape_error(kind, {&a, &b});
      return elementwise_sum(a, b, kind == OpKind::add ? 1.0 : -1.0);
    }
    case OpKind::scale: {
      Tensor out(in[0]->shape());
      const double s = attrs.scalar;
      kernels::map(in[0]->data(), out.data(), [s](double x) { return s * x; });
      return out;
    }
    case OpKind::hadamard: {
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      if (!(a.shape() == b.shape())) shape_error(kind, {&a, &b});
      Tensor out(a.shape());
      kernels::zip(a.data(), b.data(), out.data(), [](double x, double y) { return x * y; });
      return out;
    }
    case OpKind::relu: {
      Tensor out(in[0]->shape());
      kernels::map(in[0]->data(), out.data(), [](double x) { return x > 0.0 ? x : 0.0; });
      return out;
    }
    case OpKind::sigmoid: {
      Tensor out(in[0]->shape());
      kernels::map(in[0]->data(), out.data(), [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
      return out;
    }
    case OpKind::row_softmax: {
      const Tensor& a = *in[0];
      Tensor out(a.shape());
      kernels::row_softmax(a.data(), out.data(), a.rows(), a.cols());
      return out;
    }
    case OpKind::transpose: {
      const Tensor& a = *in[0];
      Tensor out(Shape(a.cols(), a.rows()));
      for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
      }
      return out;
    }
    case OpKind::concat_cols: {
      if (in.empty()) throw ShapeError("concat_cols: no inputs");
      const std::size_t rows = in[0]->rows();
      std::size_t cols = 0;
      for (const Tensor* t : in) {
        if (t->rows() != rows) throw ShapeError(describe(kind, in));
        cols += t->cols();
      }
      Tensor out(Shape(rows, cols));
      for (std::size_t r = 0; r < rows; ++r) {
        double* dst = out.data().data() + r * cols;
        for (const Tensor* t : in) {
          const double* src = t->data().data() + r * t->cols();
          dst = std::copy(src, src + t->cols(), dst);
        }
      }
      return out;
    }
    case OpKind::slice_rows: {
      const Tensor& a = *in[0];
      if (attrs.count == 0 || attrs.begin + attrs.count > a.rows()) {
        throw ShapeError("slice_rows: rows [" + std::to_string(attrs.begin) + ", " +
                         std::to_string(attrs.begin + attrs.count) + ") out of " +
                         a.shape().to_string());
      }
      const std::size_t cols = a.cols();
      auto first = a.data().begin() + attrs.begin * cols;
      return Tensor(Shape(attrs.count, cols),
                    std::vector<double>(first, first + attrs.count * cols));
    }
    case OpKind::row_stack: {
      if (in.empty()) throw ShapeError("row_stack: no inputs");
      const std::size_t cols = in[0]->cols();
      std::size_t rows = 0;
      for (const Tensor* t : in) {
        if (t->cols() != cols) throw ShapeError(describe(kind, in));
        rows += t->rows();
      }
      std::vector<double> values;
      values.reserve(rows * cols);
      for (const Tensor* t : in) values.insert(values.end(), t->data().begin(), t->data().end());
      return Tensor(Shape(rows, cols), std::move(values));
    }
    case OpKind::reduce_mean: {
      const Tensor& a = *in[0];
      if (a.size() == 0) throw ShapeError("reduce_mean: empty input");
      double total = 0.0;
      for (double v : a.data()) total += v;
      return Tensor::scalar(total / static_cast<double>(a.size()));
    }
    case OpKind::square: {
      Tensor out(in[0]->shape());
      kernels::map(in[0]->data(), out.data(), [](double x) { return x * x; });
      return out;
    }
    case OpKind::log: {
      Tensor out(in[0]->shape());
      kernels::map(in[0]->data(), out.data(), [](double x) { return std::log(x); });
      return out;
    }
    case OpKind::lookup_rows: {
      const Tensor& table = *in[0];
      if (!attrs.bags) throw ShapeError("lookup_rows: missing index bags");
      const IndexBags& bags = *attrs.bags;
      for (std::int32_t idx : bags.indices) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= table.rows()) {
          throw ShapeError("lookup_rows: index " + std::to_string(idx) + " outside table " +
                           table.shape().to_string());
        }
      }
      Tensor out(Shape(bags.size(), table.cols()));
      kernels::gather_mean(table.data(), table.cols(), bags.view(), out.data());
      return out;
    }
    case OpKind::clamp: {
      Tensor out(in[0]->shape());
      const double lo = attrs.lo;
      const double hi = attrs.hi;
      kernels::map(in[0]->data(), out.data(), [lo, hi](double x) { return std::clamp(x, lo, hi); });
      return out;
    }
    case OpKind::stop_gradient:
      return *in[0];
  }
  throw std::logic_error("unknown op kind");
}

std::size_t expected_arity(OpKind kind) {
  switch (kind) {
    case OpKind::matmul:
    case OpKind::add:
    case OpKind::subtract:
    case OpKind::hadamard:
      return 2;
    case OpKind::concat_cols:
    case OpKind::row_stack:
      return 0;  // variadic
    default:
      return 1;
  }
}

}  // namespace

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::constant: return "constant";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::subtract: return "subtract";
    case OpKind::scale: return "scale";
    case OpKind::hadamard: return "hadamard";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::row_softmax: return "row_softmax";
    case OpKind::transpose: return "transpose";
    case OpKind::concat_cols: return "concat_cols";
    case OpKind::slice_rows: return "slice_rows";
    case OpKind::row_stack: return "row_stack";
    case OpKind::reduce_mean: return "reduce_mean";
    case OpKind::square: return "square";
    case OpKind::log: return "log";
    case OpKind::lookup_rows: return "lookup_rows";
    case OpKind::clamp: return "clamp";
    case OpKind::stop_gradient: return "stop_gradient";
  }
  return "unknown";
}

void IndexBags::push(std::span<const std::int32_t> bag) {
  indices.insert(indices.end(), bag.begin(), bag.end());
  offsets.push_back(static_cast<std::uint32_t>(indices.size()));
}

bool TapeNode::is_blocked(std::size_t position) const {
  return std::find(grad_blocked_inputs.begin(), grad_blocked_inputs.end(), position) !=
         grad_blocked_inputs.end();
}

NodeId Tape::push(TapeNode node) {
  nodes_.push_back(std::move(node));
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

NodeId Tape::variable(Tensor value, std::string name) {
  if (!value.all_finite()) throw NumericError("variable: non-finite leaf value");
  TapeNode node;
  node.kind = OpKind::leaf;
  node.output = std::move(value);
  node.needs_grad = true;
  node.name = std::move(name);
  return push(std::move(node));
}

NodeId Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant: non-finite leaf value");
  TapeNode node;
  node.kind = OpKind::constant;
  node.output = std::move(value);
  return push(std::move(node));
}

NodeId Tape::parameter(const std::string& name, const Tensor& value) {
  if (auto it = parameters_.find(name); it != parameters_.end()) return it->second;
  NodeId id = variable(value, name);
  parameters_.emplace(name, id);
  return id;
}

std::optional<NodeId> Tape::find_parameter(const std::string& name) const {
  if (auto it = parameters_.find(name); it != parameters_.end()) return it->second;
  return std::nullopt;
}

const TapeNode& Tape::node(NodeId id) const {
  if (id.index >= nodes_.size()) {
    throw std::out_of_range("tape: node " + std::to_string(id.index) + " does not exist");
  }
  return nodes_[id.index];
}

NodeId Tape::apply(OpKind kind, std::span<const NodeId> inputs, OpAttrs attrs,
                   std::span<const std::size_t> blocked) {
  const std::size_t arity = expected_arity(kind);
  if (arity != 0) expect_arity(kind, inputs.size(), arity);

  std::vector<const Tensor*> operands;
  operands.reserve(inputs.size());
  bool needs_grad = false;
  for (std::size_t pos = 0; pos < inputs.size(); ++pos) {
    const TapeNode& in = node(inputs[pos]);
    operands.push_back(&in.output);
    const bool is_blocked = std::find(blocked.begin(), blocked.end(), pos) != blocked.end();
    needs_grad = needs_grad || (in.needs_grad && !is_blocked);
  }
  for (std::size_t pos : blocked) {
    if (pos >= inputs.size()) {
      throw std::out_of_range(std::string(to_string(kind)) + ": blocked position " +
                              std::to_string(pos) + " has no input");
    }
  }

  Tensor out = forward(kind, operands, attrs);
  if (!out.all_finite()) {
    throw NumericError(std::string(to_string(kind)) + ": non-finite output " +
                       out.shape().to_string());
  }

  TapeNode node;
  node.kind = kind;
  node.inputs.assign(inputs.begin(), inputs.end());
  node.output = std::move(out);
  node.grad_blocked_inputs.assign(blocked.begin(), blocked.end());
  node.attrs = std::move(attrs);
  node.needs_grad = needs_grad;
  return push(std::move(node));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const NodeId in[] = {a, b};
  return apply(OpKind::matmul, in);
}

NodeId Tape::add(NodeId a, NodeId b) {
  const NodeId in[] = {a, b};
  return apply(OpKind::add, in);
}

NodeId Tape::subtract(NodeId a, NodeId b) {
  const NodeId in[] = {a, b};
  return apply(OpKind::subtract, in);
}

NodeId Tape::scale(NodeId a, double factor) {
  OpAttrs attrs;
  attrs.scalar = factor;
  return apply(OpKind::scale, std::span(&a, 1), attrs);
}

NodeId Tape::hadamard(NodeId a, NodeId b) {
  const NodeId in[] = {a, b};
  return apply(OpKind::hadamard, in);
}

NodeId Tape::relu(NodeId a) { return apply(OpKind::relu, std::span(&a, 1)); }
NodeId Tape::sigmoid(NodeId a) { return apply(OpKind::sigmoid, std::span(&a, 1)); }
NodeId Tape::row_softmax(NodeId a) { return apply(OpKind::row_softmax, std::span(&a, 1)); }
NodeId Tape::transpose(NodeId a) { return apply(OpKind::transpose, std::span(&a, 1)); }
NodeId Tape::reduce_mean(NodeId a) { return apply(OpKind::reduce_mean, std::span(&a, 1)); }
NodeId Tape::square(NodeId a) { return apply(OpKind::square, std::span(&a, 1)); }
NodeId Tape::log(NodeId a) { return apply(OpKind::log, std::span(&a, 1)); }

NodeId Tape::concat_cols(std::span<const NodeId> parts) {
  return apply(OpKind::concat_cols, parts);
}

NodeId Tape::row_stack(std::span<const NodeId> parts) { return apply(OpKind::row_stack, parts); }

NodeId Tape::slice_rows(NodeId a, std::size_t begin, std::size_t count) {
  OpAttrs attrs;
  attrs.begin = begin;
  attrs.count = count;
  return apply(OpKind::slice_rows, std::span(&a, 1), attrs);
}

std::vector<NodeId> Tape::split_rows(NodeId a, std::size_t parts) {
  const std::size_t rows = value(a).rows();
  if (parts == 0 || rows % parts != 0) {
    throw ShapeError("split_rows: " + value(a).shape().to_string() + " into " +
                     std::to_string(parts) + " equal parts");
  }
  const std::size_t each = rows / parts;
  std::vector<NodeId> out;
  out.reserve(parts);
  for (std::size_t p = 0; p < parts; ++p) out.push_back(slice_rows(a, p * each, each));
  return out;
}

NodeId Tape::lookup_rows(NodeId table, std::shared_ptr<const IndexBags> bags) {
  OpAttrs attrs;
  attrs.bags = std::move(bags);
  return apply(OpKind::lookup_rows, std::span(&table, 1), attrs);
}

NodeId Tape::clamp(NodeId a, double lo, double hi) {
  OpAttrs attrs;
  attrs.lo = lo;
  attrs.hi = hi;
  return apply(OpKind::clamp, std::span(&a, 1), attrs);
}

NodeId Tape::stop_gradient(NodeId x) {
  const std::size_t blocked[] = {0};
  const NodeId id = apply(OpKind::stop_gradient, std::span(&x, 1), {}, blocked);
  if (held_cursor_ < held_.size()) {
    Tensor& out = nodes_[id.index].output;
    if (held_[held_cursor_].shape() != out.shape()) {
      throw ShapeError("stop_gradient: held value " + held_[held_cursor_].shape().to_string() +
                       " does not match " + out.shape().to_string());
    }
    out = held_[held_cursor_++];
  }
  return id;
}

void Tape::hold_detached(std::vector<Tensor> values) {
  held_ = std::move(values);
  held_cursor_ = 0;
}

std::vector<Tensor> Tape::detached_values() const {
  std::vector<Tensor> out;
  for (const auto& n : nodes_) {
    if (n.kind == OpKind::stop_gradient) out.push_back(n.output);
  }
  return out;
}

std::set<std::string> parameters_behind_stop_gradient(const Tape& tape) {
  std::vector<bool> seen(tape.size(), false);
  std::vector<std::uint32_t> stack;
  for (std::uint32_t i = 0; i < tape.size(); ++i) {
    const auto& n = tape.node(NodeId{i});
    if (n.kind == OpKind::stop_gradient) stack.push_back(n.inputs[0].index);
  }
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    if (seen[i]) continue;
    seen[i] = true;
    for (const NodeId in : tape.node(NodeId{i}).inputs) stack.push_back(in.index);
  }
  std::set<std::string> out;
  for (const auto& [name, id] : tape.parameters()) {
    if (seen[id.index]) out.insert(name);
  }
  return out;
}

// ---------------------------------------------------------------------------

GradientMap::GradientMap(const Tape& tape) : grads_(tape.size()) {
  shapes_.reserve(tape.size());
  for (std::uint32_t i = 0; i < tape.size(); ++i) shapes_.push_back(tape.value(NodeId{i}).shape());
}

bool GradientMap::contains(NodeId id) const {
  return id.index < grads_.size() && grads_[id.index].has_value();
}

const Tensor& GradientMap::at(NodeId id) const {
  if (!contains(id)) {
    throw std::out_of_range("gradient: no adjoint reached node " + std::to_string(id.index));
  }
  return *grads_[id.index];
}

Tensor GradientMap::of(NodeId id) const {
  if (contains(id)) return *grads_[id.index];
  return Tensor(shapes_.at(id.index));
}

void GradientMap::accumulate(NodeId id, Tensor delta) {
  auto& slot = grads_.at(id.index);
  if (!(delta.shape() == shapes_[id.index])) {
    throw ShapeError("gradient: adjoint " + delta.shape().to_string() + " for node of shape " +
                     shapes_[id.index].to_string());
  }
  if (!slot) {
    slot = std::move(delta);
    return;
  }
  kernels::zip(slot->data(), delta.data(), slot->data(), [](double x, double y) { return x + y; });
}

namespace {

Tensor column_sums(const Tensor& g, const Shape& target) {
  Tensor out(target);
  kernels::column_sums(g.data(), out.data(), g.rows(), g.cols());
  return out;
}

}  // namespace

GradientMap backward(const Tape& tape, NodeId loss) {
  const Tensor& out = tape.value(loss);
  if (!out.shape().is_scalar()) {
    throw ShapeError("backward: loss must be a scalar, got " + out.shape().to_string());
  }
  GradientMap grads(tape);
  grads.accumulate(loss, Tensor(out.shape(), 1.0));

  for (std::int64_t i = loss.index; i >= 0; --i) {
    const NodeId id{static_cast<std::uint32_t>(i)};
    const TapeNode& node = tape.node(id);
    if (!node.needs_grad || !grads.contains(id)) continue;
    if (node.kind == OpKind::leaf || node.kind == OpKind::constant) continue;

    const Tensor& g = grads.at(id);
    auto wants = [&](std::size_t pos) {
      return !node.is_blocked(pos) && tape.node(node.inputs[pos]).needs_grad;
    };
    auto input = [&](std::size_t pos) -> const Tensor& { return tape.value(node.inputs[pos]); };
    auto send = [&](std::size_t pos, Tensor delta) { grads.accumulate(node.inputs[pos], std::move(delta)); };

    switch (node.kind) {
      case OpKind::leaf:
      case OpKind::constant:
      case OpKind::stop_gradient:
        break;

      case OpKind::matmul: {
        const Tensor& a = input(0);
        const Tensor& b = input(1);
        if (wants(0)) {
          Tensor da(a.shape());
          kernels::matmul_nt(g.data(), b.data(), da.data(), a.rows(), b.cols(), a.cols());
          send(0, std::move(da));
        }
        if (wants(1)) {
          Tensor db(b.shape());
          kernels::matmul_tn(a.data(), g.data(), db.data(), b.rows(), a.rows(), b.cols());
          send(1, std::move(db));
        }
        break;
      }
      case OpKind::add:
      case OpKind::subtract: {
        if (wants(0)) send(0, g);
        if (wants(1)) {
          const Tensor& b = input(1);
          Tensor db = b.shape() == g.shape() ? g : column_sums(g, b.shape());
          if (node.kind == OpKind::subtract) {
            kernels::map(db.data(), db.data(), [](double x) { return -x; });
          }
          send(1, std::move(db));
        }
        break;
      }
      case OpKind::scale: {
        Tensor d(g.shape());
        const double s = node.attrs.scalar;
        kernels::map(g.data(), d.data(), [s](double x) { return s * x; });
        send(0, std::move(d));
        break;
      }
      case OpKind::hadamard: {
        for (std::size_t pos = 0; pos < 2; ++pos) {
          if (!wants(pos)) continue;
          Tensor d(g.shape());
          kernels::zip(g.data(), input(1 - pos).data(), d.data(),
                       [](double x, double y) { return x * y; });
          send(pos, std::move(d));
        }
        break;
      }
      case OpKind::relu: {
        Tensor d(g.shape());
        kernels::zip(g.data(), input(0).data(), d.data(),
                     [](double dy, double x) { return x > 0.0 ? dy : 0.0; });
        send(0, std::move(d));
        break;
      }
      case OpKind::sigmoid: {
        Tensor d(g.shape());
        kernels::zip(g.data(), node.output.data(), d.data(),
                     [](double dy, double y) { return dy * y * (1.0 - y); });
        send(0, std::move(d));
        break;
      }
      case OpKind::row_softmax: {
        Tensor d(g.shape());
        kernels::row_softmax_backward(node.output.data(), g.data(), d.data(), g.rows(), g.cols());
        send(0, std::move(d));
        break;
      }
      case OpKind::transpose: {
        Tensor d(input(0).shape());
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) d(c, r) = g(r, c);
        }
        send(0, std::move(d));
        break;
      }
      case OpKind::concat_cols: {
        std::size_t offset = 0;
        for (std::size_t pos = 0; pos < node.inputs.size(); ++pos) {
          const Tensor& part = input(pos);
          if (wants(pos)) {
            Tensor d(part.shape());
            for (std::size_t r = 0; r < g.rows(); ++r) {
              const double* src = g.data().data() + r * g.cols() + offset;
              std::copy(src, src + part.cols(), d.data().data() + r * part.cols());
            }
            send(pos, std::move(d));
          }
          offset += part.cols();
        }
        break;
      }
      case OpKind::slice_rows: {
        Tensor d(input(0).shape());
        std::copy(g.data().begin(), g.data().end(),
                  d.data().begin() + node.attrs.begin * d.cols());
        send(0, std::move(d));
        break;
      }
      case OpKind::row_stack: {
        std::size_t offset = 0;
        for (std::size_t pos = 0; pos < node.inputs.size(); ++pos) {
          const Tensor& part = input(pos);
          if (wants(pos)) {
            auto first = g.data().begin() + offset;
            send(pos, Tensor(part.shape(), std::vector<double>(first, first + part.size())));
          }
          offset += part.size();
        }
        break;
      }
      case OpKind::reduce_mean: {
        const Tensor& a = input(0);
        send(0, Tensor(a.shape(), g.item() / static_cast<double>(a.size())));
        break;
      }
      case OpKind::square: {
        Tensor d(g.shape());
        kernels::zip(g.data(), input(0).data(), d.data(),
                     [](double dy, double x) { return 2.0 * x * dy; });
        send(0, std::move(d));
        break;
      }
      case OpKind::log: {
        Tensor d(g.shape());
        kernels::zip(g.data(), input(0).data(), d.data(), [](double dy, double x) { return dy / x; });
        send(0, std::move(d));
        break;
      }
      case OpKind::lookup_rows: {
        const Tensor& table = input(0);
        const IndexBags& bags = *node.attrs.bags;
        const std::size_t dim = table.cols();
        Tensor d(table.shape());
        for (std::size_t r = 0; r < bags.size(); ++r) {
          const auto bag = bags.bag(r);
          const double* src = g.data().data() + r * dim;
          if (bag.empty()) {
            for (std::size_t j = 0; j < dim; ++j) d[j] += src[j];
            continue;
          }
          const double w = 1.0 / static_cast<double>(bag.size());
          for (std::int32_t idx : bag) {
            double* dst = d.data().data() + static_cast<std::size_t>(idx) * dim;
            for (std::size_t j = 0; j < dim; ++j) dst[j] += w * src[j];
          }
        }
        send(0, std::move(d));
        break;
      }
      case OpKind::clamp: {
        Tensor d(g.shape());
        const double lo = node.attrs.lo;
        const double hi = node.attrs.hi;
        kernels::zip(g.data(), input(0).data(), d.data(),
                     [lo, hi](double dy, double x) { return (x >= lo && x <= hi) ? dy : 0.0; });
        send(0, std::move(d));
        break;
      }
    }
  }
  return grads;
}

std::map<std::string, Tensor> parameter_gradients(const Tape& tape, const GradientMap& grads) {
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : tape.parameters()) {
    if (grads.contains(id)) out.emplace(name, grads.at(id));
  }
  return out;
}

}  // namespace dml
