#include "dml/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dml/random.hpp"

namespace dml {

namespace {

double evaluate(const ScalarFn& fn, const ParameterStore& params,
                const std::vector<Tensor>& held) {
  Tape tape;
  if (!held.empty()) tape.hold_detached(held);
  const NodeId out = fn(tape, params);
  return tape.value(out).item();
}

}  // namespace

double gradient_error(double analytic, double numeric, double terms) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), terms});
  const double diff = std::abs(analytic - numeric);
  return scale < 1e-8 ? diff : diff / scale;
}

FiniteDifferenceResult finite_difference_check(const ScalarFn& fn, const ParameterStore& params,
                                               const FiniteDifferenceOptions& options) {
  if (!(options.eps > 0.0 && options.eps <= 1e-2)) {
    throw std::invalid_argument("finite_difference_check: eps must lie in (0, 1e-2]");
  }

  Tape tape;
  const NodeId loss = fn(tape, params);
  const double base = tape.value(loss).item();
  const std::vector<Tensor> held =
      options.hold_detached ? tape.detached_values() : std::vector<Tensor>{};
  if (evaluate(fn, params, held) != base) {
    throw std::runtime_error("finite_difference_check: closure is not deterministic");
  }
  const GradientMap grads = backward(tape, loss);

  FiniteDifferenceResult result;
  ParameterStore probe = params;
  for (const auto& [name, value] : params) {
    if (options.excluded.count(name)) continue;
    const auto node = tape.find_parameter(name);
    const Tensor analytic = node ? grads.of(*node) : Tensor(value.shape());

    std::vector<std::size_t> elements(value.size());
    std::iota(elements.begin(), elements.end(), std::size_t{0});
    if (options.max_elements_per_parameter != 0 &&
        elements.size() > options.max_elements_per_parameter) {
      Rng rng(derive_seed(options.sample_seed, name));
      rng.shuffle(elements);
      elements.resize(options.max_elements_per_parameter);
      std::sort(elements.begin(), elements.end());
    }

    Tensor& slot = probe.at(name);
    auto record = [&](std::size_t index, double a, double numeric, double terms) {
      const double err = gradient_error(a, numeric, terms);
      ++result.elements_checked;
      if (err > result.max_relative_error || result.worst_parameter.empty()) {
        result.max_relative_error = err;
        result.worst_parameter = name;
        result.worst_index = index;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    };

    if (options.directions_per_parameter != 0) {
      Rng rng(derive_seed(options.sample_seed, "direction/" + name));
      const Tensor original = slot;
      for (std::size_t r = 0; r < options.directions_per_parameter; ++r) {
        std::vector<double> dir(value.size());
        double a = 0.0, terms = 0.0;
        for (std::size_t i = 0; i < dir.size(); ++i) {
          dir[i] = rng.below(2) ? 1.0 : -1.0;
          a += analytic[i] * dir[i];
          terms += std::abs(analytic[i]);
        }
        for (std::size_t i = 0; i < dir.size(); ++i) slot[i] = original[i] + options.eps * dir[i];
        const double up = evaluate(fn, probe, held);
        for (std::size_t i = 0; i < dir.size(); ++i) slot[i] = original[i] - options.eps * dir[i];
        const double down = evaluate(fn, probe, held);
        slot = original;
        record(r, a, (up - down) / (2.0 * options.eps), terms);
      }
      continue;
    }

    for (std::size_t i : elements) {
      const double original = slot[i];
      slot[i] = original + options.eps;
      const double up = evaluate(fn, probe, held);
      slot[i] = original - options.eps;
      const double down = evaluate(fn, probe, held);
      slot[i] = original;
      record(i, analytic[i], (up - down) / (2.0 * options.eps), 0.0);
    }
  }
  return result;
}

}  // namespace dml
