#include "dml/model.hpp"

#include "dml/error.hpp"

namespace dml {

namespace {

std::vector<EmbeddingField> embedding_fields(const ModelConfig& config, const Batch& batch) {
  if (batch.fields.size() != config.fields.size()) {
    throw ShapeError("model: batch has " + std::to_string(batch.fields.size()) +
                     " feature fields, model expects " + std::to_string(config.fields.size()));
  }
  std::vector<EmbeddingField> fields;
  for (std::size_t f = 0; f < config.fields.size(); ++f) {
    fields.push_back({config.fields[f].name, config.fields[f].vocab_size, batch.fields[f]});
  }
  return fields;
}

std::string task_embed_prefix(std::size_t k) { return "embed/task_" + std::to_string(k); }

}  // namespace

ModelConfig make_model_config(BackboneKind backbone, DmlVariant variant,
                              std::vector<FieldInfo> fields, std::vector<TaskSpec> tasks) {
  ModelConfig config;
  config.backbone.kind = backbone;
  config.backbone.num_tasks = tasks.size();
  config.backbone.experts_per_level = 3;
  config.backbone.expert_dim = 128;
  config.head.variant = variant;
  for (const auto& t : tasks) config.head.tasks.push_back(t.kind);
  config.head.d0 = 128;
  config.head.tower_hidden = 128;
  config.head.d1 = 80;
  config.fields = std::move(fields);
  config.embed_dim = 8;
  return config;
}

std::vector<NodeId> model_forward(ParamContext& ctx, const ModelConfig& config, const Batch& batch) {
  if (config.head.d0 != config.backbone.expert_dim) {
    throw ConfigError("model: head width " + std::to_string(config.head.d0) +
                      " differs from backbone width " + std::to_string(config.backbone.expert_dim));
  }
  if (config.head.tasks.size() != config.backbone.num_tasks) {
    throw ConfigError("model: head and backbone disagree on the number of tasks");
  }
  const auto fields = embedding_fields(config, batch);
  NodeId shared_x{};
  std::vector<NodeId> per_task_x;
  if (config.backbone.kind == BackboneKind::single_task) {
    for (std::size_t k = 0; k < config.backbone.num_tasks; ++k) {
      per_task_x.push_back(embed_and_concat(ctx, task_embed_prefix(k), fields, config.embed_dim));
    }
  } else {
    shared_x = embed_and_concat(ctx, "embed", fields, config.embed_dim);
  }
  const BackboneOutput lower = backbone_forward(ctx, config.backbone, shared_x, per_task_x);
  return dml_head_forward(ctx, lower.per_task_inputs, config.head);
}

NodeId single_task_forward(ParamContext& ctx, const ModelConfig& config, const Batch& batch,
                           std::size_t k) {
  if (config.backbone.kind != BackboneKind::single_task) {
    throw ConfigError("single_task_forward: model backbone is " +
                      std::string(to_string(config.backbone.kind)));
  }
  if (k >= config.backbone.num_tasks) throw ShapeError("single_task_forward: task out of range");
  const auto fields = embedding_fields(config, batch);
  const NodeId x = embed_and_concat(ctx, task_embed_prefix(k), fields, config.embed_dim);
  // Only task k's lower layer is built; the other slots are never read.
  BackboneConfig one = config.backbone;
  const std::string prefix = "backbone/single_task/0/task_" + std::to_string(k);
  const NodeId l = mlp_forward(ctx, prefix, MLPSpec{{one.expert_dim}, Activation::relu}, x);
  const NodeId h = tower_hidden(ctx, k, l, config.head);
  return plain_output(ctx, k, h, config.head.tasks[k]);
}

ParameterStore initialize_model(const ModelConfig& config, std::uint64_t seed) {
  Batch probe;
  probe.size = 1;
  for (std::size_t f = 0; f < config.fields.size(); ++f) {
    auto bags = std::make_shared<IndexBags>();
    bags->push(0);
    probe.fields.push_back(std::move(bags));
  }
  ParameterStore store;
  Tape tape;
  ParamContext ctx(tape, store, seed);
  model_forward(ctx, config, probe);
  return store;
}

NodeId total_loss(Tape& tape, std::span<const NodeId> preds, const Batch& batch,
                  const ModelConfig& config) {
  if (preds.size() != config.head.tasks.size() || batch.labels.size() != preds.size()) {
    throw ShapeError("total_loss: predictions, labels and tasks differ in count");
  }
  NodeId total{};
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const NodeId l = task_loss(tape, loss_for(config.head.tasks[k]), preds[k], batch.labels[k]);
    total = k == 0 ? l : tape.add(total, l);
  }
  return total;
}

}  // namespace dml
