#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vitts/autograd.hpp"

namespace vitts::nn {

using ag::Var;

// Flat, ordered view of a model's parameters. Collection order is the
// canonical checkpoint order; assign_slots() wires parameters for
// sink-routed gradient accumulation.
struct ParamList {
  std::vector<std::string> names;
  std::vector<Var> vars;

  void add(const std::string& name, const Var& v) {
    names.push_back(name);
    vars.push_back(v);
  }
  void assign_slots() {
    for (size_t i = 0; i < vars.size(); ++i) vars[i]->param_slot = int(i);
  }
  size_t total_elems() const {
    size_t n = 0;
    for (const auto& v : vars) n += v->val.size();
    return n;
  }
  void set_trainable(bool on) {
    for (auto& v : vars) v->needs_grad = on;
  }
};

inline Var make_param(Tensor t) { return ag::leaf(std::move(t), true); }

inline Var xavier_param(int rows, int cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / double(rows + cols));
  Tensor t(rows, cols);
  for (size_t i = 0; i < t.size(); ++i) t.at(i) = rng.uniform(-bound, bound);
  return make_param(std::move(t));
}

inline Var zero_param(int rows, int cols) { return make_param(Tensor(rows, cols)); }

struct Linear {
  Var weight;  // out x in
  Var bias;    // 1 x out

  Linear() = default;
  Linear(int in, int out, Rng& rng, bool zero_init = false)
      : weight(zero_init ? zero_param(out, in) : xavier_param(out, in, rng)),
        bias(zero_param(1, out)) {}

  Var operator()(const Var& x) const {
    return ag::add_rowvec(ag::matmul_nt(x, weight), bias);
  }
  void collect(const std::string& p, ParamList& out) const {
    out.add(p + ".weight", weight);
    out.add(p + ".bias", bias);
  }
};

struct LayerNorm {
  Var gain;  // 1 x width
  Var bias;  // 1 x width

  LayerNorm() = default;
  explicit LayerNorm(int width) : gain(make_param(Tensor(1, width))), bias(zero_param(1, width)) {
    gain->val.fill(1.0);
  }
  Var operator()(const Var& x) const {
    return ag::add_rowvec(ag::mul_rowvec(ag::layer_norm(x), gain), bias);
  }
  void collect(const std::string& p, ParamList& out) const {
    out.add(p + ".gain", gain);
    out.add(p + ".bias", bias);
  }
};

struct Embedding {
  Var table;  // vocab x dim

  Embedding() = default;
  Embedding(int vocab, int dim, Rng& rng)
      : table(make_param(Tensor::randn(vocab, dim, rng, 0.02))) {}
  Var operator()(const std::vector<int>& ids) const { return ag::embedding(table, ids); }
  void collect(const std::string& p, ParamList& out) const { out.add(p + ".table", table); }
};

// 1-D convolution over the row (time) axis, zero-padded to same length.
struct Conv1d {
  int kernel = 1;
  Var weight;  // out x (in*kernel)
  Var bias;    // 1 x out

  Conv1d() = default;
  Conv1d(int in, int out, int k, Rng& rng)
      : kernel(k), weight(xavier_param(out, in * k, rng)), bias(zero_param(1, out)) {}
  Var operator()(const Var& x) const {
    return ag::add_rowvec(ag::matmul_nt(ag::im2col1d(x, kernel), weight), bias);
  }
  void collect(const std::string& p, ParamList& out) const {
    out.add(p + ".weight", weight);
    out.add(p + ".bias", bias);
  }
};

// 2-D convolution over an image stored as (H*W) x C rows.
struct Conv2d {
  int kernel = 1, stride = 1, pad = 0;
  Var weight;  // out x (in*k*k)
  Var bias;    // 1 x out

  Conv2d() = default;
  Conv2d(int in, int out, int k, int stride_, int pad_, Rng& rng)
      : kernel(k),
        stride(stride_),
        pad(pad_),
        weight(xavier_param(out, in * k * k, rng)),
        bias(zero_param(1, out)) {}
  Var operator()(const Var& x, int h, int w) const {
    return ag::add_rowvec(
        ag::matmul_nt(ag::im2col2d(x, h, w, kernel, stride, pad), weight), bias);
  }
  int out_extent(int in_extent) const { return (in_extent + 2 * pad - kernel) / stride + 1; }
  void collect(const std::string& p, ParamList& out) const {
    out.add(p + ".weight", weight);
    out.add(p + ".bias", bias);
  }
};

}  // namespace vitts::nn
