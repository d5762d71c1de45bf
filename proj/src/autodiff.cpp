/* Copyright 2026 The rtvc Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "rtvc/autodiff.hpp"

#include <algorithm>

namespace rtvc {
namespace {

double evaluate(const std::function<VarD(Tape<double>&, std::span<const VarD>)>& build,
                const std::vector<TensorD>& inputs) {
  Tape<double> tape;
  std::vector<VarD> vars;
  vars.reserve(inputs.size());
  for (const auto& in : inputs) vars.push_back(tape.constant(in));
  return build(tape, vars).value().item();
}

}  // namespace

double finite_diff_check(
    const std::function<VarD(Tape<double>&, std::span<const VarD>)>& build,
    const std::vector<TensorD>& inputs, double eps) {
  Tape<double> tape;
  std::vector<VarD> vars;
  vars.reserve(inputs.size());
  for (const auto& in : inputs) vars.push_back(tape.parameter(in));
  const VarD loss = build(tape, vars);
  const auto grads = tape.backward(loss);

  double worst = 0.0;
  std::vector<TensorD> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const TensorD& analytic = grads.at(vars[k].id());
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k].data()[i];
      probe[k].data()[i] = x0 + eps;
      const double up = evaluate(build, probe);
      probe[k].data()[i] = x0 - eps;
      const double down = evaluate(build, probe);
      probe[k].data()[i] = x0;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = std::abs(analytic.data()[i] - numeric) / std::max(1e-8, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

void adam_step(OptimizerState& state, std::map<std::string, TensorF>& params,
               const std::map<std::string, TensorF>& grads) {
  const AdamConfig& cfg = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const float correction1 = static_cast<float>(1.0 - std::pow(cfg.beta1, t));
  const float correction2 = static_cast<float>(1.0 - std::pow(cfg.beta2, t));
  const float b1 = static_cast<float>(cfg.beta1);
  const float b2 = static_cast<float>(cfg.beta2);
  const float lr = static_cast<float>(cfg.learning_rate);
  const float eps = static_cast<float>(cfg.epsilon);

  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("adam_step: unknown parameter " + name);
    TensorF& p = it->second;
    detail::require(p.shape() == g.shape(), "adam_step: gradient shape mismatch for " + name);
    auto [m_it, m_new] = state.first_moment.try_emplace(name, p.shape());
    auto [v_it, v_new] = state.second_moment.try_emplace(name, p.shape());
    auto& m = m_it->second.array();
    auto& v = v_it->second.array();
    m = b1 * m + (1.0f - b1) * g.array();
    v = b2 * v + (1.0f - b2) * g.array().square();
    p.array() -= lr * (m / correction1) / ((v / correction2).sqrt() + eps);
  }
}

}  // namespace rtvc
