#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dml/autodiff.hpp"
#include "dml/kernels.hpp"
#include "dml/params.hpp"
#include "dml/task.hpp"

namespace dml {

/// Binds named parameters from a store onto a tape. In create mode a missing
/// parameter is initialized from (init_seed, name) and added to the store;
/// otherwise a missing name is an error.
class ParamContext {
 public:
  ParamContext(Tape& tape, ParameterStore& store, std::uint64_t init_seed);
  ParamContext(Tape& tape, const ParameterStore& store);

  Tape& tape() { return tape_; }

  /// Glorot-uniform [rows x cols].
  NodeId weight(const std::string& name, std::size_t rows, std::size_t cols);
  /// Zero-initialized [n].
  NodeId bias(const std::string& name, std::size_t n);
  /// Uniform in ±kEmbeddingInitBound.
  NodeId uniform(const std::string& name, Shape shape);

 private:
  template <class Init>
  NodeId fetch(const std::string& name, Shape shape, Init init);

  Tape& tape_;
  const ParameterStore& store_;
  ParameterStore* writable_ = nullptr;
  std::uint64_t init_seed_ = 0;
};

enum class Activation { relu, sigmoid, linear };

struct MLPSpec {
  std::vector<std::size_t> layer_dims;
  /// Hidden layers always use relu.
  Activation final_activation = Activation::relu;
};

/// Affine + activation per layer; parameters "<prefix>/<layer>/{W,b}".
NodeId mlp_forward(ParamContext& ctx, const std::string& prefix, const MLPSpec& spec, NodeId x);

NodeId activate(Tape& tape, NodeId x, Activation act);

struct EmbeddingField {
  std::string name;
  std::size_t vocab_size = 0;
  std::shared_ptr<const IndexBags> bags;
};

/// Looks up "<prefix>/<field>" tables of width dim, mean-pooling multi-valued
/// bags, and concatenates the fields column-wise in order.
/// Out-of-vocabulary indices read row 0 and are counted in oov_lookups().
NodeId embed_and_concat(ParamContext& ctx, const std::string& prefix,
                        std::span<const EmbeddingField> fields, std::size_t dim);

std::uint64_t oov_lookups();
void reset_oov_lookups();

/// row_softmax(Q·Kᵀ/√d)·V for Q, K, V of shape [n x d].
NodeId scaled_dot_attention(Tape& tape, NodeId q, NodeId k, NodeId v);

enum class LossKind { binary_cross_entropy, squared_error };

inline LossKind loss_for(TaskKind kind) {
  return kind == TaskKind::classification ? LossKind::binary_cross_entropy
                                          : LossKind::squared_error;
}

inline constexpr double kBceClamp = 1e-7;

/// Batch-mean loss. BCE clamps predictions to [1e-7, 1 − 1e-7] and requires
/// labels in {0, 1}.
NodeId task_loss(Tape& tape, LossKind kind, NodeId pred, const Tensor& labels);

struct AdamState {
  kernels::AdamHyper hyper;
  std::int64_t step = 0;
  std::map<std::string, std::pair<Tensor, Tensor>> moments;
};

/// One bias-corrected Adam update over every trainable parameter. Every
/// non-frozen parameter must have a gradient; unknown names are an error.
void adam_step(AdamState& state, ParameterStore& params,
               const std::map<std::string, Tensor>& grads);

}  // namespace dml
