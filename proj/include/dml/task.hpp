#pragma once

#include <string>
#include <string_view>

namespace dml {

enum class TaskKind { classification, regression };

struct TaskSpec {
  std::string name;
  TaskKind kind = TaskKind::classification;
};

inline std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::classification ? "classification" : "regression";
}

}  // namespace dml
