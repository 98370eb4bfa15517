#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dml/backbones.hpp"
#include "dml/data.hpp"
#include "dml/dml_head.hpp"

namespace dml {

struct ModelConfig {
  BackboneConfig backbone;
  HeadConfig head;
  std::vector<FieldInfo> fields;
  std::size_t embed_dim = 8;
};

/// Standard sizes: 8-wide embeddings, 128-wide experts, towers (128, 80, 1),
/// GKD width 80, three experts per level.
ModelConfig make_model_config(BackboneKind backbone, DmlVariant variant,
                              std::vector<FieldInfo> fields, std::vector<TaskSpec> tasks);

/// Builds the full forward pass; returns one [batch x 1] prediction per task.
/// Embeddings live under "embed/<field>", or "embed/task_<k>/<field>" for the
/// single-task backbone, which keeps one embedding set per task.
std::vector<NodeId> model_forward(ParamContext& ctx, const ModelConfig& config, const Batch& batch);

/// Creates every parameter of the model with its name-keyed initializer.
ParameterStore initialize_model(const ModelConfig& config, std::uint64_t seed);

/// Unweighted sum of per-task mean losses.
NodeId total_loss(Tape& tape, std::span<const NodeId> preds, const Batch& batch,
                  const ModelConfig& config);

/// Full prediction for task k from a single-task model (its own embeddings,
/// first layer and tower; equivalent to a (128, 128, 80, 1) MLP).
NodeId single_task_forward(ParamContext& ctx, const ModelConfig& config, const Batch& batch,
                           std::size_t k);

}  // namespace dml
