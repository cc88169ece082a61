#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vitts/tensor.hpp"

namespace vitts::ag {

class Node;
using Var = std::shared_ptr<Node>;

// Routes gradients of parameter leaves into per-slot buffers instead of the
// shared node, so data-parallel workers can accumulate without contention.
struct GradSink {
  std::vector<Tensor> slots;
  explicit GradSink(size_t n) : slots(n) {}
};

class Node {
 public:
  Tensor val;
  Tensor grad;
  bool needs_grad = false;
  int param_slot = -1;
  std::vector<Var> parents;
  std::function<void(Node&, GradSink*)> back;

  Node() = default;
  explicit Node(Tensor v) : val(std::move(v)) {}

  int rows() const { return val.rows(); }
  int cols() const { return val.cols(); }
  void ensure_grad() {
    if (grad.size() == 0) grad = Tensor(val.rows(), val.cols());
  }
};

// Accumulate g into n's gradient, honoring the parameter sink if present.
void accum_grad(Node& n, GradSink* sink, const EMat& g);

// Thread-local switch; when disabled, ops record no graph (inference mode).
bool grad_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();

 private:
  bool prev_;
};

// Small adapter so dropout can take any Rng without owning it.
class RngRef {
 public:
  explicit RngRef(Rng& r) : r_(&r) {}
  Rng& get() const { return *r_; }

 private:
  Rng* r_;
};

Var constant(Tensor v);
Var leaf(Tensor v, bool needs_grad);

// ---- primitive ops ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_rowvec(const Var& a, const Var& r);  // r: 1 x C broadcast over rows
Var mul_rowvec(const Var& a, const Var& r);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double c);
Var matmul(const Var& a, const Var& b);     // (MxK)(KxN)
Var matmul_nt(const Var& a, const Var& b);  // (MxK)(NxK)^T -> MxN
Var softmax_rows(const Var& a);
Var layer_norm(const Var& a, double eps = 1e-6);  // per-row, non-affine
Var relu(const Var& a);
Var gelu(const Var& a);
Var silu(const Var& a);
Var embedding(const Var& table, const std::vector<int>& ids);
Var slice_cols(const Var& a, int c0, int n);
Var concat_cols(const std::vector<Var>& parts);
Var mean_all(const Var& a);
Var sum_all(const Var& a);
Var mean_rows(const Var& a);  // -> 1 x C
Var repeat_rows(const Var& a, const std::vector<int>& counts);
Var dropout(const Var& a, double p, RngRef rng);

// im2col with zero "same" padding; x: L x Cin -> L x (Cin*k)
Var im2col1d(const Var& x, int kernel);
// x: (H*W) x Cin -> (Ho*Wo) x (Cin*k*k), valid-style with given stride/pad
Var im2col2d(const Var& x, int height, int width, int kernel, int stride, int pad);

// Relative-position attention pieces (Shaw-style, clipped distance table).
// q: L x dh, table: (2*clip+1) x dh; scores(i,j) = q_i . table[clamp(j-i)+clip]
Var rel_scores(const Var& q, const Var& table, int clip);
// attn: L x L, table as above; out_i = sum_j attn(i,j) * table[clamp(j-i)+clip]
Var rel_values(const Var& attn, const Var& table, int clip);

// Cross-entropy over the selected rows only, averaged; targets[i] pairs with
// selected[i].
Var cross_entropy_selected(const Var& logits, const std::vector<int>& selected,
                           const std::vector<int>& targets);

// ---- compositions ----
Var mse(const Var& a, const Var& b);  // mean over all elements

// Run reverse-mode accumulation from a scalar loss. Parameter-slot leaves go
// to `sink` when given, otherwise into their node's grad.
void backward(const Var& loss, GradSink* sink = nullptr);

}  // namespace vitts::ag
