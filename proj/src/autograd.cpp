#include "vitts/autograd.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace vitts::ag {

namespace {

thread_local bool g_grad_enabled = true;

Var make_node(Tensor v, std::vector<Var> parents,
              std::function<void(Node&, GradSink*)> back) {
  auto n = std::make_shared<Node>(std::move(v));
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& p : parents)
      if (p->needs_grad) {
        any = true;
        break;
      }
    if (any) {
      n->needs_grad = true;
      n->parents = std::move(parents);
      n->back = std::move(back);
    }
  }
  return n;
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

void accum_grad(Node& n, GradSink* sink, const EMat& g) {
  if (!n.needs_grad) return;
  if (n.param_slot >= 0 && sink != nullptr) {
    Tensor& t = sink->slots[size_t(n.param_slot)];
    if (t.size() == 0) t = Tensor(n.val.rows(), n.val.cols());
    t.m() += g;
  } else {
    n.ensure_grad();
    n.grad.m() += g;
  }
}

Var constant(Tensor v) { return std::make_shared<Node>(std::move(v)); }

Var leaf(Tensor v, bool needs_grad) {
  auto n = std::make_shared<Node>(std::move(v));
  n->needs_grad = needs_grad;
  return n;
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a->val, b->val, "add");
  Tensor out = a->val;
  out.m() += b->val.m();
  return make_node(std::move(out), {a, b}, [](Node& n, GradSink* s) {
    accum_grad(*n.parents[0], s, n.grad.m());
    accum_grad(*n.parents[1], s, n.grad.m());
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a->val, b->val, "sub");
  Tensor out = a->val;
  out.m() -= b->val.m();
  return make_node(std::move(out), {a, b}, [](Node& n, GradSink* s) {
    accum_grad(*n.parents[0], s, n.grad.m());
    accum_grad(*n.parents[1], s, -n.grad.m());
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a->val, b->val, "mul");
  Tensor out = a->val;
  out.m() = out.m().cwiseProduct(b->val.m());
  return make_node(std::move(out), {a, b}, [](Node& n, GradSink* s) {
    Node& A = *n.parents[0];
    Node& B = *n.parents[1];
    if (A.needs_grad) accum_grad(A, s, n.grad.m().cwiseProduct(B.val.m()));
    if (B.needs_grad) accum_grad(B, s, n.grad.m().cwiseProduct(A.val.m()));
  });
}

Var add_rowvec(const Var& a, const Var& r) {
  if (r->val.rows() != 1 || r->val.cols() != a->val.cols())
    throw std::invalid_argument("add_rowvec: width mismatch");
  Tensor out = a->val;
  out.m().rowwise() += r->val.m().row(0);
  return make_node(std::move(out), {a, r}, [](Node& n, GradSink* s) {
    accum_grad(*n.parents[0], s, n.grad.m());
    if (n.parents[1]->needs_grad)
      accum_grad(*n.parents[1], s, n.grad.m().colwise().sum());
  });
}

Var mul_rowvec(const Var& a, const Var& r) {
  if (r->val.rows() != 1 || r->val.cols() != a->val.cols())
    throw std::invalid_argument("mul_rowvec: width mismatch");
  Tensor out = a->val;
  out.m().array().rowwise() *= r->val.m().row(0).array();
  return make_node(std::move(out), {a, r}, [](Node& n, GradSink* s) {
    Node& A = *n.parents[0];
    Node& R = *n.parents[1];
    if (A.needs_grad) {
      EMat d = n.grad.m();
      d.array().rowwise() *= R.val.m().row(0).array();
      accum_grad(A, s, d);
    }
    if (R.needs_grad)
      accum_grad(R, s, n.grad.m().cwiseProduct(A.val.m()).colwise().sum());
  });
}

Var scale(const Var& a, double k) {
  Tensor out = a->val;
  out.m() *= k;
  return make_node(std::move(out), {a}, [k](Node& n, GradSink* s) {
    accum_grad(*n.parents[0], s, k * n.grad.m());
  });
}

Var add_scalar(const Var& a, double c) {
  Tensor out = a->val;
  out.m().array() += c;
  return make_node(std::move(out), {a}, [](Node& n, GradSink* s) {
    accum_grad(*n.parents[0], s, n.grad.m());
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a->cols() != b->rows())
    throw std::invalid_argument("matmul: inner dims " + a->val.shape_str() + " vs " +
                                b->val.shape_str());
  Tensor out(a->rows(), b->cols());
  out.m().noalias() = a->val.m() * b->val.m();
  return make_node(std::move(out), {a, b}, [](Node& n, GradSink* s) {
    Node& A = *n.parents[0];
    Node& B = *n.parents[1];
    if (A.needs_grad) accum_grad(A, s, n.grad.m() * B.val.m().transpose());
    if (B.needs_grad) accum_grad(B, s, A.val.m().transpose() * n.grad.m());
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a->cols() != b->cols())
    throw std::invalid_argument("matmul_nt: inner dims " + a->val.shape_str() + " vs " +
                                b->val.shape_str());
  Tensor out(a->rows(), b->rows());
  out.m().noalias() = a->val.m() * b->val.m().transpose();
  return make_node(std::move(out), {a, b}, [](Node& n, GradSink* s) {
    Node& A = *n.parents[0];
    Node& B = *n.parents[1];
    if (A.needs_grad) accum_grad(A, s, n.grad.m() * B.val.m());
    if (B.needs_grad) accum_grad(B, s, n.grad.m().transpose() * A.val.m());
  });
}

Var softmax_rows(const Var& a) {
  Tensor out = a->val;
  auto M = out.m();
  for (int i = 0; i < out.rows(); ++i) {
    double mx = M.row(i).maxCoeff();
    M.row(i) = (M.row(i).array() - mx).exp();
    M.row(i) /= M.row(i).sum();
  }
  return make_node(std::move(out), {a}, [](Node& n, GradSink* s) {
    const auto Y = n.val.m();
    const auto G = n.grad.m();
    EMat d = G.cwiseProduct(Y);
    Eigen::VectorXd rowdot = d.rowwise().sum();
    accum_grad(*n.parents[0], s,
               Y.cwiseProduct(G - rowdot.replicate(1, n.cols())));
  });
}

Var layer_norm(const Var& a, double eps) {
  const int R = a->rows(), C = a->cols();
  Tensor out(R, C);
  Eigen::VectorXd inv_std(R);
  for (int i = 0; i < R; ++i) {
    const auto x = a->val.m().row(i);
    const double mu = x.mean();
    const double var = (x.array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std(i) = is;
    out.m().row(i) = (x.array() - mu) * is;
  }
  return make_node(std::move(out), {a},
                   [inv_std = std::move(inv_std)](Node& n, GradSink* s) {
                     const auto Y = n.val.m();
                     const auto G = n.grad.m();
                     const int C = n.cols();
                     EMat d(n.rows(), C);
                     for (int i = 0; i < n.rows(); ++i) {
                       const double gm = G.row(i).mean();
                       const double gym = G.row(i).cwiseProduct(Y.row(i)).mean();
                       d.row(i) = inv_std(i) *
                                  (G.row(i).array() - gm - Y.row(i).array() * gym);
                     }
                     accum_grad(*n.parents[0], s, d);
                   });
}

Var relu(const Var& a) {
  Tensor out = a->val;
  out.m() = out.m().cwiseMax(0.0);
  return make_node(std::move(out), {a}, [](Node& n, GradSink* s) {
    const auto X = n.parents[0]->val.m();
    accum_grad(*n.parents[0], s,
               n.grad.m().cwiseProduct((X.array() > 0.0).cast<double>().matrix()));
  });
}

Var gelu(const Var& a) {
  Tensor out = a->val;
  out.m() = out.m().unaryExpr(
      [](double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); });
  return make_node(std::move(out), {a}, [](Node& n, GradSink* s) {
    const auto X = n.parents[0]->val.m();
    EMat d = X.unaryExpr([](double x) {
      const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
      const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
      return cdf + x * pdf;
    });
    accum_grad(*n.parents[0], s, n.grad.m().cwiseProduct(d));
  });
}

Var silu(const Var& a) {
  Tensor out = a->val;
  out.m() = out.m().unaryExpr([](double x) { return x / (1.0 + std::exp(-x)); });
  return make_node(std::move(out), {a}, [](Node& n, GradSink* s) {
    const auto X = n.parents[0]->val.m();
    EMat d = X.unaryExpr([](double x) {
      const double sg = 1.0 / (1.0 + std::exp(-x));
      return sg * (1.0 + x * (1.0 - sg));
    });
    accum_grad(*n.parents[0], s, n.grad.m().cwiseProduct(d));
  });
}

Var embedding(const Var& table, const std::vector<int>& ids) {
  const int V = table->rows(), D = table->cols();
  Tensor out(int(ids.size()), D);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= V)
      throw std::invalid_argument("embedding: id " + std::to_string(ids[i]) +
                                  " out of range [0, " + std::to_string(V) + ")");
    out.m().row(int(i)) = table->val.m().row(ids[i]);
  }
  return make_node(std::move(out), {table}, [ids, V, D](Node& n, GradSink* s) {
    EMat d = EMat::Zero(V, D);
    for (size_t i = 0; i < ids.size(); ++i) d.row(ids[i]) += n.grad.m().row(int(i));
    accum_grad(*n.parents[0], s, d);
  });
}

Var slice_cols(const Var& a, int c0, int nc) {
  if (c0 < 0 || nc < 0 || c0 + nc > a->cols())
    throw std::invalid_argument("slice_cols: out of range");
  Tensor out(a->rows(), nc);
  out.m() = a->val.m().middleCols(c0, nc);
  return make_node(std::move(out), {a}, [c0, nc](Node& n, GradSink* s) {
    Node& A = *n.parents[0];
    EMat d = EMat::Zero(A.rows(), A.cols());
    d.middleCols(c0, nc) = n.grad.m();
    accum_grad(A, s, d);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  const int R = parts[0]->rows();
  int C = 0;
  for (const auto& p : parts) {
    if (p->rows() != R) throw std::invalid_argument("concat_cols: row mismatch");
    C += p->cols();
  }
  Tensor out(R, C);
  int off = 0;
  for (const auto& p : parts) {
    out.m().middleCols(off, p->cols()) = p->val.m();
    off += p->cols();
  }
  return make_node(std::move(out), parts, [](Node& n, GradSink* s) {
    int off = 0;
    for (auto& p : n.parents) {
      accum_grad(*p, s, n.grad.m().middleCols(off, p->cols()));
      off += p->cols();
    }
  });
}

Var mean_all(const Var& a) {
  Tensor out = Tensor::scalar(a->val.m().mean());
  const double inv_n = 1.0 / double(a->val.size());
  return make_node(std::move(out), {a}, [inv_n](Node& n, GradSink* s) {
    Node& A = *n.parents[0];
    accum_grad(A, s, EMat::Constant(A.rows(), A.cols(), n.grad.item() * inv_n));
  });
}

Var sum_all(const Var& a) {
  Tensor out = Tensor::scalar(a->val.m().sum());
  return make_node(std::move(out), {a}, [](Node& n, GradSink* s) {
    Node& A = *n.parents[0];
    accum_grad(A, s, EMat::Constant(A.rows(), A.cols(), n.grad.item()));
  });
}

Var mean_rows(const Var& a) {
  Tensor out(1, a->cols());
  out.m() = a->val.m().colwise().mean();
  const double inv_r = 1.0 / double(a->rows());
  return make_node(std::move(out), {a}, [inv_r](Node& n, GradSink* s) {
    Node& A = *n.parents[0];
    accum_grad(A, s, (inv_r * n.grad.m()).replicate(A.rows(), 1));
  });
}

Var repeat_rows(const Var& a, const std::vector<int>& counts) {
  if (int(counts.size()) != a->rows())
    throw std::invalid_argument("repeat_rows: counts length mismatch");
  int total = 0;
  for (int c : counts) {
    if (c < 0) throw std::invalid_argument("repeat_rows: negative duration");
    total += c;
  }
  Tensor out(total, a->cols());
  int r = 0;
  for (size_t i = 0; i < counts.size(); ++i)
    for (int k = 0; k < counts[i]; ++k) out.m().row(r++) = a->val.m().row(int(i));
  return make_node(std::move(out), {a}, [counts](Node& n, GradSink* s) {
    Node& A = *n.parents[0];
    EMat d = EMat::Zero(A.rows(), A.cols());
    int r = 0;
    for (size_t i = 0; i < counts.size(); ++i)
      for (int k = 0; k < counts[i]; ++k) d.row(int(i)) += n.grad.m().row(r++);
    accum_grad(A, s, d);
  });
}

Var dropout(const Var& a, double p, RngRef rng) {
  if (p <= 0.0) return a;
  if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
  auto mask = std::make_shared<Tensor>(a->rows(), a->cols());
  const double keep = 1.0 / (1.0 - p);
  for (size_t i = 0; i < mask->size(); ++i)
    mask->at(i) = rng.get().uniform() >= p ? keep : 0.0;
  Tensor out = a->val;
  out.m() = out.m().cwiseProduct(mask->m());
  return make_node(std::move(out), {a}, [mask](Node& n, GradSink* s) {
    accum_grad(*n.parents[0], s, n.grad.m().cwiseProduct(mask->m()));
  });
}

Var im2col1d(const Var& x, int kernel) {
  if (kernel < 1 || kernel % 2 == 0)
    throw std::invalid_argument("im2col1d: kernel must be odd and positive");
  const int L = x->rows(), C = x->cols(), pad = kernel / 2;
  Tensor out(L, C * kernel);
  for (int i = 0; i < L; ++i)
    for (int t = 0; t < kernel; ++t) {
      const int src = i + t - pad;
      if (src >= 0 && src < L)
        out.m().row(i).segment(t * C, C) = x->val.m().row(src);
    }
  return make_node(std::move(out), {x}, [kernel, pad](Node& n, GradSink* s) {
    Node& X = *n.parents[0];
    const int L = X.rows(), C = X.cols();
    EMat d = EMat::Zero(L, C);
    for (int i = 0; i < L; ++i)
      for (int t = 0; t < kernel; ++t) {
        const int src = i + t - pad;
        if (src >= 0 && src < L) d.row(src) += n.grad.m().row(i).segment(t * C, C);
      }
    accum_grad(X, s, d);
  });
}

Var im2col2d(const Var& x, int height, int width, int kernel, int stride, int pad) {
  const int C = x->cols();
  if (x->rows() != height * width)
    throw std::invalid_argument("im2col2d: rows != height*width");
  const int ho = (height + 2 * pad - kernel) / stride + 1;
  const int wo = (width + 2 * pad - kernel) / stride + 1;
  if (ho < 1 || wo < 1) throw std::invalid_argument("im2col2d: empty output");
  Tensor out(ho * wo, C * kernel * kernel);
  for (int oy = 0; oy < ho; ++oy)
    for (int ox = 0; ox < wo; ++ox) {
      const int orow = oy * wo + ox;
      for (int ky = 0; ky < kernel; ++ky)
        for (int kx = 0; kx < kernel; ++kx) {
          const int iy = oy * stride + ky - pad;
          const int ix = ox * stride + kx - pad;
          if (iy < 0 || iy >= height || ix < 0 || ix >= width) continue;
          out.m().row(orow).segment((ky * kernel + kx) * C, C) =
              x->val.m().row(iy * width + ix);
        }
    }
  return make_node(
      std::move(out), {x},
      [height, width, kernel, stride, pad, ho, wo](Node& n, GradSink* s) {
        Node& X = *n.parents[0];
        const int C = X.cols();
        EMat d = EMat::Zero(X.rows(), C);
        for (int oy = 0; oy < ho; ++oy)
          for (int ox = 0; ox < wo; ++ox) {
            const int orow = oy * wo + ox;
            for (int ky = 0; ky < kernel; ++ky)
              for (int kx = 0; kx < kernel; ++kx) {
                const int iy = oy * stride + ky - pad;
                const int ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= height || ix < 0 || ix >= width) continue;
                d.row(iy * width + ix) +=
                    n.grad.m().row(orow).segment((ky * kernel + kx) * C, C);
              }
          }
        accum_grad(X, s, d);
      });
}

namespace {
inline int clip_index(int delta, int clip) {
  return std::max(-clip, std::min(clip, delta)) + clip;
}
}  // namespace

Var rel_scores(const Var& q, const Var& table, int clip) {
  if (table->rows() != 2 * clip + 1 || table->cols() != q->cols())
    throw std::invalid_argument("rel_scores: table shape mismatch");
  const int L = q->rows();
  Tensor out(L, L);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j)
      out(i, j) = q->val.m().row(i).dot(table->val.m().row(clip_index(j - i, clip)));
  return make_node(std::move(out), {q, table}, [clip](Node& n, GradSink* s) {
    Node& Q = *n.parents[0];
    Node& T = *n.parents[1];
    const int L = n.rows();
    if (Q.needs_grad) {
      EMat dq = EMat::Zero(Q.rows(), Q.cols());
      for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j)
          dq.row(i) += n.grad(i, j) * T.val.m().row(clip_index(j - i, clip));
      accum_grad(Q, s, dq);
    }
    if (T.needs_grad) {
      EMat dt = EMat::Zero(T.rows(), T.cols());
      for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j)
          dt.row(clip_index(j - i, clip)) += n.grad(i, j) * Q.val.m().row(i);
      accum_grad(T, s, dt);
    }
  });
}

Var rel_values(const Var& attn, const Var& table, int clip) {
  if (attn->rows() != attn->cols())
    throw std::invalid_argument("rel_values: attention must be square");
  if (table->rows() != 2 * clip + 1)
    throw std::invalid_argument("rel_values: table rows mismatch");
  const int L = attn->rows(), D = table->cols();
  Tensor out(L, D);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j)
      out.m().row(i) += attn->val(i, j) * table->val.m().row(clip_index(j - i, clip));
  return make_node(std::move(out), {attn, table}, [clip](Node& n, GradSink* s) {
    Node& A = *n.parents[0];
    Node& T = *n.parents[1];
    const int L = A.rows();
    if (A.needs_grad) {
      EMat da = EMat::Zero(L, L);
      for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j)
          da(i, j) = n.grad.m().row(i).dot(T.val.m().row(clip_index(j - i, clip)));
      accum_grad(A, s, da);
    }
    if (T.needs_grad) {
      EMat dt = EMat::Zero(T.rows(), T.cols());
      for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j)
          dt.row(clip_index(j - i, clip)) += A.val(i, j) * n.grad.m().row(i);
      accum_grad(T, s, dt);
    }
  });
}

Var cross_entropy_selected(const Var& logits, const std::vector<int>& selected,
                           const std::vector<int>& targets) {
  if (selected.empty()) throw std::invalid_argument("cross_entropy: empty selection");
  if (selected.size() != targets.size())
    throw std::invalid_argument("cross_entropy: selected/targets length mismatch");
  const int L = logits->rows(), V = logits->cols();
  double loss = 0.0;
  for (size_t k = 0; k < selected.size(); ++k) {
    const int i = selected[k], t = targets[k];
    if (i < 0 || i >= L || t < 0 || t >= V)
      throw std::invalid_argument("cross_entropy: index out of range");
    const auto row = logits->val.m().row(i);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    loss += lse - row(t);
  }
  loss /= double(selected.size());
  return make_node(Tensor::scalar(loss), {logits},
                   [selected, targets](Node& n, GradSink* s) {
                     Node& X = *n.parents[0];
                     const double g = n.grad.item() / double(selected.size());
                     EMat d = EMat::Zero(X.rows(), X.cols());
                     for (size_t k = 0; k < selected.size(); ++k) {
                       const int i = selected[k];
                       const auto row = X.val.m().row(i);
                       const double mx = row.maxCoeff();
                       Eigen::RowVectorXd p = (row.array() - mx).exp();
                       p /= p.sum();
                       d.row(i) += g * p;
                       d(i, targets[k]) -= g;
                     }
                     accum_grad(X, s, d);
                   });
}

Var mse(const Var& a, const Var& b) {
  Var d = sub(a, b);
  return mean_all(mul(d, d));
}

void backward(const Var& loss, GradSink* sink) {
  if (loss->val.size() != 1) throw std::logic_error("backward: loss must be scalar");
  if (!loss->needs_grad) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node* p = n->parents[idx++].get();
      if (p->needs_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  loss->ensure_grad();
  loss->grad.fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->back && n->grad.size() != 0) n->back(*n, sink);
  }
}

}  // namespace vitts::ag
