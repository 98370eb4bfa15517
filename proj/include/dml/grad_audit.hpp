#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dml/backbones.hpp"
#include "dml/dml_head.hpp"
#include "dml/model.hpp"

namespace dml {

struct AuditCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct AuditOptions {
  double tolerance = 1e-4;
  double eps = 1e-5;
  std::size_t batch_size = 16;
  std::uint64_t seed = 11;
  /// Composite models are checked along random ±1 directions per parameter.
  std::size_t directions_per_parameter = 8;
};

/// Small model (narrow widths, small vocabularies) for gradient work.
ModelConfig audit_model_config(BackboneKind backbone, DmlVariant variant);
/// Model parameters redrawn uniformly in ±0.5, biases included, so that no
/// relu sits exactly at its kink and attention paths carry sizeable adjoints.
ParameterStore audit_parameters(const ModelConfig& config, std::uint64_t seed);
Batch audit_batch(std::size_t batch_size, std::uint64_t seed);

/// Finite differences on each primitive with random operands.
std::vector<AuditCheck> primitive_gradient_checks(const AuditOptions& options);

/// Every backbone x variant on a toy batch, two ways: plain differences with
/// parameters behind a stop-gradient excluded, and differences with detached
/// values held fixed over all parameters.
std::vector<AuditCheck> model_gradient_checks(const AuditOptions& options);

/// Task-k loss must give exactly zero adjoint to the other tasks' tower
/// inputs, task embeddings and towers under blocking, and nonzero without it.
std::vector<AuditCheck> isolation_checks(const AuditOptions& options);

std::vector<AuditCheck> run_grad_audit(const AuditOptions& options);

}  // namespace dml
