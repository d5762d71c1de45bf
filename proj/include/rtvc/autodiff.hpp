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

// Reverse-mode differentiation over the tensor kernels, plus Adam.
//
// A Tape owns every node created during one forward pass. Node ids increase
// in creation order, so reverse id order is a valid reverse topological
// order. Var is a cheap handle (tape pointer + id); every tensor kernel has a
// Var overload with the same name, which lets model code be written once as
// a template over Tensor<S> (inference) or Var<S> (training, gradient checks).

#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rtvc/tensor.hpp"

namespace rtvc {

template <typename Scalar>
class Tape;

template <typename Scalar>
class Var {
 public:
  using value_type = Scalar;

  Var() = default;
  Var(Tape<Scalar>* tape, int id) : tape_(tape), id_(id) {}

  const Tensor<Scalar>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  PrecisionMode precision() const { return value().precision(); }
  int id() const { return id_; }
  Tape<Scalar>* tape() const { return tape_; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  int id_ = -1;
};

using VarF = Var<float>;
using VarD = Var<double>;

template <typename Scalar>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor<Scalar>&)>;
  using GradientMap = std::unordered_map<int, Tensor<Scalar>>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> parameter(Tensor<Scalar> value) {
    Var<Scalar> v = push(std::move(value), true, {});
    parameters_.push_back(v.id());
    return v;
  }

  Var<Scalar> constant(Tensor<Scalar> value) { return push(std::move(value), false, {}); }

  // Records an op output. `backward` receives the gradient w.r.t. the output
  // and must accumulate into the inputs; it is dropped when no input needs
  // gradients.
  Var<Scalar> record(Tensor<Scalar> value, std::initializer_list<Var<Scalar>> inputs,
                     BackwardFn backward) {
    bool needs = false;
    for (const auto& in : inputs) {
      check_owner(in);
      needs = needs || nodes_[in.id()].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(backward) : BackwardFn{});
  }

  const Tensor<Scalar>& value(int id) const { return nodes_.at(id).value; }
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  void accumulate(int id, const Tensor<Scalar>& grad) {
    Node& node = nodes_[id];
    if (!node.requires_grad) return;
    if (!node.grad) {
      node.grad = Tensor<Scalar>(node.value.shape());
    }
    detail::require(node.grad->shape() == grad.shape(),
                    "Tape: gradient shape " + grad.shape().str() + " for node of shape " +
                        node.grad->shape().str());
    node.grad->array() += grad.array();
  }

  // d(loss)/d(parameter) for every parameter on this tape, keyed by node id.
  // Disconnected parameters get zero tensors.
  GradientMap backward(const Var<Scalar>& loss) {
    check_owner(loss);
    if (loss.value().size() != 1) {
      throw ShapeError("backward: loss must be scalar, got " + loss.shape().str());
    }
    for (auto& node : nodes_) node.grad.reset();
    if (nodes_[loss.id()].requires_grad) {
      accumulate(loss.id(), Tensor<Scalar>::constant(loss.shape(), Scalar(1)));
      for (int id = loss.id(); id >= 0; --id) {
        Node& node = nodes_[id];
        if (node.grad && node.backward) {
          const Tensor<Scalar> g = *node.grad;
          node.backward(*this, g);
        }
      }
    }
    GradientMap grads;
    for (int id : parameters_) {
      const Node& node = nodes_[id];
      grads.emplace(id, node.grad ? *node.grad : Tensor<Scalar>(node.value.shape()));
    }
    return grads;
  }

 private:
  struct Node {
    Tensor<Scalar> value;
    bool requires_grad = false;
    BackwardFn backward;
    std::optional<Tensor<Scalar>> grad;
  };

  Var<Scalar> push(Tensor<Scalar> value, bool requires_grad, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), requires_grad, std::move(backward), std::nullopt});
    return Var<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
  }

  void check_owner(const Var<Scalar>& v) const {
    if (v.tape() != this || v.id() < 0 || v.id() >= static_cast<int>(nodes_.size())) {
      throw std::logic_error("Tape: variable belongs to a different tape");
    }
  }

  std::vector<Node> nodes_;
  std::vector<int> parameters_;
};

// ---------------------------------------------------------------------------
// Generic helpers so model code can be written once over Tensor or Var.

template <typename Scalar>
const Tensor<Scalar>& value_of(const Tensor<Scalar>& x) {
  return x;
}
template <typename Scalar>
const Tensor<Scalar>& value_of(const Var<Scalar>& x) {
  return x.value();
}

// Wraps a plain tensor as a non-differentiable value of the same kind as `like`.
template <typename Scalar>
Tensor<Scalar> constant_like(const Tensor<Scalar>&, Tensor<Scalar> v) {
  return v;
}
template <typename Scalar>
Var<Scalar> constant_like(const Var<Scalar>& like, Tensor<Scalar> v) {
  return like.tape()->constant(std::move(v));
}

template <typename Scalar>
Tensor<Scalar> detach(const Tensor<Scalar>& x) {
  return x;
}
template <typename Scalar>
Var<Scalar> detach(const Var<Scalar>& x) {
  return x.tape()->constant(x.value());
}

// ---------------------------------------------------------------------------
// Differentiable ops

template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& input, const Var<Scalar>& weight, const Var<Scalar>& bias,
                   int stride = 1, int padding = 0) {
  const int in_id = input.id(), w_id = weight.id(), b_id = bias.id();
  return input.tape()->record(
      conv2d(input.value(), weight.value(), bias.value(), stride, padding), {input, weight, bias},
      [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
        const auto& x = t.value(in_id);
        const auto& w = t.value(w_id);
        if (t.requires_grad(in_id))
          t.accumulate(in_id, conv2d_grad_input(g, w, x.shape(), stride, padding));
        if (t.requires_grad(w_id))
          t.accumulate(w_id, conv2d_grad_weight(g, x, w.shape(), stride, padding));
        if (t.requires_grad(b_id)) t.accumulate(b_id, channel_sum(g, t.value(b_id).shape()));
      });
}

namespace detail {

// Unary elementwise op whose derivative depends on the input value only.
template <typename Scalar, typename Deriv>
Var<Scalar> unary(const Var<Scalar>& x, Tensor<Scalar> out, Deriv deriv) {
  const int id = x.id();
  return x.tape()->record(std::move(out), {x}, [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    const auto& xv = t.value(id);
    Tensor<Scalar> gin(xv.shape());
    for (Eigen::Index i = 0; i < xv.size(); ++i) gin.data()[i] = g.data()[i] * deriv(xv.data()[i]);
    t.accumulate(id, gin);
  });
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> silu(const Var<Scalar>& x) {
  return detail::unary(x, silu(x.value()), [](Scalar v) {
    const Scalar s = sigmoid(v);
    return s * (1 + v * (1 - s));
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x) {
  return detail::unary(x, relu(x.value()), [](Scalar v) { return v > 0 ? Scalar(1) : Scalar(0); });
}

template <typename Scalar>
Var<Scalar> softplus(const Var<Scalar>& x) {
  return detail::unary(x, softplus(x.value()), [](Scalar v) { return sigmoid(v); });
}

template <typename Scalar>
Var<Scalar> abs(const Var<Scalar>& x) {
  return detail::unary(x, abs(x.value()), [](Scalar v) {
    return v > 0 ? Scalar(1) : (v < 0 ? Scalar(-1) : Scalar(0));
  });
}

template <typename Scalar>
Var<Scalar> square(const Var<Scalar>& x) {
  return detail::unary(x, square(x.value()), [](Scalar v) { return 2 * v; });
}

// Gradient passes only strictly inside (lo, hi).
template <typename Scalar>
Var<Scalar> clamp(const Var<Scalar>& x, Scalar lo, Scalar hi) {
  return detail::unary(x, clamp(x.value(), lo, hi),
                       [lo, hi](Scalar v) { return (v > lo && v < hi) ? Scalar(1) : Scalar(0); });
}

// Straight-through rounding: forward rounds, backward is the identity.
template <typename Scalar>
Tensor<Scalar> quantize_ste(const Tensor<Scalar>& x) {
  return round_nearest(x);
}
template <typename Scalar>
Var<Scalar> quantize_ste(const Var<Scalar>& x) {
  return detail::unary(x, round_nearest(x.value()), [](Scalar) { return Scalar(1); });
}

template <typename Scalar>
Var<Scalar> mul_scalar(const Var<Scalar>& x, Scalar k) {
  const int id = x.id();
  return x.tape()->record(mul_scalar(x.value(), k), {x},
                          [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                            t.accumulate(id, mul_scalar(g, k));
                          });
}

template <typename Scalar>
Var<Scalar> add_scalar(const Var<Scalar>& x, Scalar k) {
  const int id = x.id();
  return x.tape()->record(add_scalar(x.value(), k), {x},
                          [=](Tape<Scalar>& t, const Tensor<Scalar>& g) { t.accumulate(id, g); });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(add(a.value(), b.value()), {a, b},
                          [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                            t.accumulate(ia, g);
                            t.accumulate(ib, g);
                          });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(sub(a.value(), b.value()), {a, b},
                          [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                            t.accumulate(ia, g);
                            t.accumulate(ib, mul_scalar(g, Scalar(-1)));
                          });
}

template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  const int ia = a.id(), ib = b.id();
  return a.tape()->record(mul(a.value(), b.value()), {a, b},
                          [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                            if (t.requires_grad(ia)) t.accumulate(ia, mul(g, t.value(ib)));
                            if (t.requires_grad(ib)) t.accumulate(ib, mul(g, t.value(ia)));
                          });
}

template <typename Scalar>
Var<Scalar> mul_channel(const Var<Scalar>& x, const Var<Scalar>& scale) {
  const int ix = x.id(), is = scale.id();
  return x.tape()->record(
      mul_channel(x.value(), scale.value()), {x, scale},
      [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
        const auto& sv = t.value(is);
        if (t.requires_grad(ix)) t.accumulate(ix, mul_channel(g, sv));
        if (t.requires_grad(is)) t.accumulate(is, channel_sum(mul(g, t.value(ix)), sv.shape()));
      });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& x) {
  const int id = x.id();
  return x.tape()->record(sum(x.value()), {x}, [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    t.accumulate(id, Tensor<Scalar>::constant(t.value(id).shape(), g.item()));
  });
}

template <typename Scalar>
Var<Scalar> concat_channels(const Var<Scalar>& a, const Var<Scalar>& b) {
  const int ia = a.id(), ib = b.id();
  const int ca = a.shape().c, cb = b.shape().c;
  return a.tape()->record(concat_channels(a.value(), b.value()), {a, b},
                          [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                            t.accumulate(ia, slice_channels(g, 0, ca));
                            t.accumulate(ib, slice_channels(g, ca, cb));
                          });
}

template <typename Scalar>
Var<Scalar> slice_channels(const Var<Scalar>& x, int begin, int count) {
  const int id = x.id();
  return x.tape()->record(slice_channels(x.value(), begin, count), {x},
                          [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                            const Shape& s = t.value(id).shape();
                            Tensor<Scalar> gin(s);
                            for (int n = 0; n < s.n; ++n) {
                              std::copy(g.sample(n), g.sample(n) + g.shape().sample(),
                                        gin.channel(n, begin));
                            }
                            t.accumulate(id, gin);
                          });
}

template <typename Scalar>
Var<Scalar> pixel_unshuffle(const Var<Scalar>& x, int s) {
  const int id = x.id();
  return x.tape()->record(pixel_unshuffle(x.value(), s), {x},
                          [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                            t.accumulate(id, pixel_shuffle(g, s));
                          });
}

template <typename Scalar>
Var<Scalar> pixel_shuffle(const Var<Scalar>& x, int s) {
  const int id = x.id();
  return x.tape()->record(pixel_shuffle(x.value(), s), {x},
                          [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                            t.accumulate(id, pixel_unshuffle(g, s));
                          });
}

template <typename Scalar>
Var<Scalar> downsample2x(const Var<Scalar>& x) {
  const int id = x.id();
  return x.tape()->record(downsample2x(x.value()), {x},
                          [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                            t.accumulate(id, mul_scalar(upsample2x(g), Scalar(0.25)));
                          });
}

template <typename Scalar>
Var<Scalar> upsample2x(const Var<Scalar>& x) {
  const int id = x.id();
  return x.tape()->record(upsample2x(x.value()), {x},
                          [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                            t.accumulate(id, upsample2x_adjoint(g));
                          });
}

// Differentiable in the sampled input; the flow is a constant.
template <typename Scalar>
Var<Scalar> bilinear_sample(const Var<Scalar>& input, const Tensor<Scalar>& flow) {
  const int id = input.id();
  return input.tape()->record(bilinear_sample(input.value(), flow), {input},
                              [=](Tape<Scalar>& t, const Tensor<Scalar>& g) {
                                t.accumulate(id, bilinear_sample_adjoint(g, flow));
                              });
}

// ---------------------------------------------------------------------------
// Gradient verification

// Central-difference check of every coordinate of every input. `build` maps
// the input variables to a scalar loss on the given tape. Returns
// max |analytic - numeric| / max(1e-8, |numeric|).
double finite_diff_check(
    const std::function<VarD(Tape<double>&, std::span<const VarD>)>& build,
    const std::vector<TensorD>& inputs, double eps);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::int64_t step = 0;
  std::map<std::string, TensorF> first_moment;
  std::map<std::string, TensorF> second_moment;
};

// One bias-corrected Adam update over the named parameters present in
// `grads`. Moments are created lazily on first use of a name.
void adam_step(OptimizerState& state, std::map<std::string, TensorF>& params,
               const std::map<std::string, TensorF>& grads);

}  // namespace rtvc
