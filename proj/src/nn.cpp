#include "dml/nn.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "dml/error.hpp"

namespace dml {

namespace {

std::atomic<std::uint64_t> g_oov_lookups{0};

}  // namespace

ParamContext::ParamContext(Tape& tape, ParameterStore& store, std::uint64_t init_seed)
    : tape_(tape), store_(store), writable_(&store), init_seed_(init_seed) {}

ParamContext::ParamContext(Tape& tape, const ParameterStore& store)
    : tape_(tape), store_(store) {}

template <class Init>
NodeId ParamContext::fetch(const std::string& name, Shape shape, Init init) {
  if (!store_.contains(name)) {
    if (!writable_) throw ConfigError("missing parameter '" + name + "'");
    writable_->add(name, init());
  }
  const Tensor& value = store_.at(name);
  if (!(value.shape() == shape)) {
    throw ShapeError("parameter '" + name + "' has shape " + value.shape().to_string() +
                     ", expected " + shape.to_string());
  }
  return tape_.parameter(name, value);
}

NodeId ParamContext::weight(const std::string& name, std::size_t rows, std::size_t cols) {
  return fetch(name, Shape(rows, cols),
               [&] { return glorot_uniform(init_seed_, name, rows, cols); });
}

NodeId ParamContext::bias(const std::string& name, std::size_t n) {
  return fetch(name, Shape(n), [&] { return Tensor(Shape(n)); });
}

NodeId ParamContext::uniform(const std::string& name, Shape shape) {
  return fetch(name, shape, [&] { return uniform_init(init_seed_, name, shape, kEmbeddingInitBound); });
}

NodeId activate(Tape& tape, NodeId x, Activation act) {
  switch (act) {
    case Activation::relu: return tape.relu(x);
    case Activation::sigmoid: return tape.sigmoid(x);
    case Activation::linear: return x;
  }
  return x;
}

NodeId mlp_forward(ParamContext& ctx, const std::string& prefix, const MLPSpec& spec, NodeId x) {
  if (spec.layer_dims.empty()) throw ConfigError("mlp '" + prefix + "': no layers");
  Tape& tape = ctx.tape();
  NodeId h = x;
  for (std::size_t layer = 0; layer < spec.layer_dims.size(); ++layer) {
    const std::size_t out = spec.layer_dims[layer];
    if (out == 0) throw ConfigError("mlp '" + prefix + "': zero-width layer");
    const std::size_t in = tape.value(h).cols();
    const std::string base = prefix + "/" + std::to_string(layer);
    const NodeId w = ctx.weight(base + "/W", in, out);
    const NodeId b = ctx.bias(base + "/b", out);
    h = tape.add(tape.matmul(h, w), b);
    const bool last = layer + 1 == spec.layer_dims.size();
    h = activate(tape, h, last ? spec.final_activation : Activation::relu);
  }
  return h;
}

NodeId embed_and_concat(ParamContext& ctx, const std::string& prefix,
                        std::span<const EmbeddingField> fields, std::size_t dim) {
  if (fields.empty()) throw ShapeError("embed_and_concat: no fields");
  Tape& tape = ctx.tape();
  const std::size_t batch = fields.front().bags->size();
  std::vector<NodeId> parts;
  parts.reserve(fields.size());
  for (const EmbeddingField& field : fields) {
    if (field.bags->size() != batch) {
      throw ShapeError("embed_and_concat: field '" + field.name + "' has " +
                       std::to_string(field.bags->size()) + " rows, expected " +
                       std::to_string(batch));
    }
    std::shared_ptr<const IndexBags> bags = field.bags;
    std::size_t oov = 0;
    for (std::int32_t idx : bags->indices) {
      if (idx < 0 || static_cast<std::size_t>(idx) >= field.vocab_size) ++oov;
    }
    if (oov != 0) {
      auto fixed = std::make_shared<IndexBags>(*bags);
      for (std::int32_t& idx : fixed->indices) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= field.vocab_size) idx = 0;
      }
      g_oov_lookups += oov;
      bags = std::move(fixed);
    }
    const NodeId table = ctx.uniform(prefix + "/" + field.name, Shape(field.vocab_size, dim));
    parts.push_back(tape.lookup_rows(table, std::move(bags)));
  }
  return parts.size() == 1 ? parts.front() : tape.concat_cols(parts);
}

std::uint64_t oov_lookups() { return g_oov_lookups.load(); }
void reset_oov_lookups() { g_oov_lookups = 0; }

NodeId scaled_dot_attention(Tape& tape, NodeId q, NodeId k, NodeId v) {
  const Shape& qs = tape.value(q).shape();
  const Shape& ks = tape.value(k).shape();
  const Shape& vs = tape.value(v).shape();
  if (!(qs == ks) || !(ks == vs) || qs.cols() == 0) {
    throw ShapeError("scaled_dot_attention: Q " + qs.to_string() + ", K " + ks.to_string() +
                     ", V " + vs.to_string());
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(qs.cols()));
  const NodeId scores = tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt_d);
  return tape.matmul(tape.row_softmax(scores), v);
}

NodeId task_loss(Tape& tape, LossKind kind, NodeId pred, const Tensor& labels) {
  const Tensor& p = tape.value(pred);
  if (p.size() != labels.size()) {
    throw ShapeError("task_loss: " + std::to_string(p.size()) + " predictions vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const NodeId y = tape.constant(Tensor(p.shape(), labels.values()));
  if (kind == LossKind::squared_error) {
    return tape.reduce_mean(tape.square(tape.subtract(pred, y)));
  }
  for (double v : labels.data()) {
    if (v != 0.0 && v != 1.0) {
      throw DataError("task_loss: binary cross-entropy label " + std::to_string(v) +
                      " is not 0 or 1");
    }
  }
  const NodeId ones = tape.constant(Tensor(p.shape(), 1.0));
  const NodeId clipped = tape.clamp(pred, kBceClamp, 1.0 - kBceClamp);
  const NodeId pos = tape.hadamard(y, tape.log(clipped));
  const NodeId neg = tape.hadamard(tape.subtract(ones, y), tape.log(tape.subtract(ones, clipped)));
  return tape.scale(tape.reduce_mean(tape.add(pos, neg)), -1.0);
}

void adam_step(AdamState& state, ParameterStore& params,
               const std::map<std::string, Tensor>& grads) {
  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) throw ConfigError("adam: gradient for unknown parameter '" + name + "'");
  }
  for (const auto& [name, value] : params) {
    if (params.is_frozen(name)) continue;
    auto it = grads.find(name);
    if (it == grads.end()) {
      throw ConfigError("adam: no gradient for trainable parameter '" + name +
                        "' (freeze it if it is intentionally unreachable)");
    }
    if (!(it->second.shape() == value.shape())) {
      throw ShapeError("adam: gradient shape " + it->second.shape().to_string() +
                       " for parameter '" + name + "' of shape " + value.shape().to_string());
    }
  }

  ++state.step;
  for (const auto& [name, g] : grads) {
    if (params.is_frozen(name)) continue;
    Tensor& value = params.at(name);
    auto [slot, inserted] = state.moments.try_emplace(name, Tensor(value.shape()), Tensor(value.shape()));
    kernels::adam_update(value.data(), g.data(), slot->second.first.data(),
                         slot->second.second.data(), state.hyper, state.step);
  }
}

}  // namespace dml
