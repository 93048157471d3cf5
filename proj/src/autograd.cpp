#include "adgen/autograd.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

#include "adgen/errors.hpp"
#include "adgen/kernels.hpp"

namespace adgen::ag {
namespace {

thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<Node>;

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw DimensionError(std::string(op) + ": " + what);
}

std::string shape(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

// Creates the output node. Parents and the backward closure are kept only
// when grad mode is on and some parent requires gradients.
Tensor make(Matrix value, std::vector<NodePtr> parents, std::function<void(const Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(fn);
  }
  return Tensor(std::move(node));
}

const kernels::KernelTable& K() { return kernels::active(); }

}  // namespace

Tensor Tensor::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Tensor(std::move(node));
}

void Tensor::zero_grad() {
  if (node_->grad.size() == node_->value.size()) {
    node_->grad.fill(0.0);
  } else {
    node_->grad = Matrix(node_->value.rows(), node_->value.cols());
  }
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Tensor& root) {
  require(root.rows() == 1 && root.cols() == 1, "backward", "root must be 1x1, got " + shape(root));
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->ensure_grad()(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad.size() == node->value.size()) node->backward_fn(*node);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul", shape(a) + " * " + shape(b));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Matrix out(m, n);
  K().gemm_nn(m, n, k, a.value().data(), b.value().data(), out.data(), false);
  NodePtr pa = a.node(), pb = b.node();
  return make(std::move(out), {pa, pb}, [pa, pb, m, n, k](const Node& self) {
    if (pa->requires_grad) {
      K().gemm_nt(m, k, n, self.grad.data(), pb->value.data(), pa->ensure_grad().data(), true);
    }
    if (pb->requires_grad) {
      K().gemm_tn(k, n, m, pa->value.data(), self.grad.data(), pb->ensure_grad().data(), true);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require(x.cols() == weight.rows(), "linear", shape(x) + " * " + shape(weight));
  require(bias.rows() == 1 && bias.cols() == weight.cols(), "linear", "bias " + shape(bias));
  const std::size_t m = x.rows(), k = x.cols(), n = weight.cols();
  Matrix out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy(bias.value().data(), bias.value().data() + n, out.data() + i * n);
  }
  K().gemm_nn(m, n, k, x.value().data(), weight.value().data(), out.data(), true);
  NodePtr px = x.node(), pw = weight.node(), pb = bias.node();
  return make(std::move(out), {px, pw, pb}, [px, pw, pb, m, n, k](const Node& self) {
    if (px->requires_grad) {
      K().gemm_nt(m, k, n, self.grad.data(), pw->value.data(), px->ensure_grad().data(), true);
    }
    if (pw->requires_grad) {
      K().gemm_tn(k, n, m, px->value.data(), self.grad.data(), pw->ensure_grad().data(), true);
    }
    if (pb->requires_grad) {
      Matrix& g = pb->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) K().axpy(1.0, self.grad.data() + i * n, g.data(), n);
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add", shape(a) + " + " + shape(b));
  Matrix out = a.value();
  K().axpy(1.0, b.value().data(), out.data(), out.size());
  NodePtr pa = a.node(), pb = b.node();
  return make(std::move(out), {pa, pb}, [pa, pb](const Node& self) {
    const std::size_t n = self.grad.size();
    if (pa->requires_grad) K().axpy(1.0, self.grad.data(), pa->ensure_grad().data(), n);
    if (pb->requires_grad) K().axpy(1.0, self.grad.data(), pb->ensure_grad().data(), n);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub", shape(a) + " - " + shape(b));
  Matrix out = a.value();
  K().axpy(-1.0, b.value().data(), out.data(), out.size());
  NodePtr pa = a.node(), pb = b.node();
  return make(std::move(out), {pa, pb}, [pa, pb](const Node& self) {
    const std::size_t n = self.grad.size();
    if (pa->requires_grad) K().axpy(1.0, self.grad.data(), pa->ensure_grad().data(), n);
    if (pb->requires_grad) K().axpy(-1.0, self.grad.data(), pb->ensure_grad().data(), n);
  });
}

Tensor scale(const Tensor& a, double factor) {
  Matrix out = a.value();
  for (double& v : out.values()) v *= factor;
  NodePtr pa = a.node();
  return make(std::move(out), {pa}, [pa, factor](const Node& self) {
    K().axpy(factor, self.grad.data(), pa->ensure_grad().data(), self.grad.size());
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows", "column mismatch " + shape(p));
    rows += p.rows();
    parents.push_back(p.node());
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + offset);
    offset += p.value().size();
  }
  auto captured = parents;
  return make(std::move(out), std::move(parents), [captured](const Node& self) {
    std::size_t offset = 0;
    for (const auto& p : captured) {
      const std::size_t n = p->value.size();
      if (p->requires_grad) K().axpy(1.0, self.grad.data() + offset, p->ensure_grad().data(), n);
      offset += n;
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  require(begin + count <= a.rows(), "slice_rows",
          "rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) + ") of " +
              shape(a));
  const std::size_t cols = a.cols();
  Matrix out(count, cols);
  std::copy(a.value().data() + begin * cols, a.value().data() + (begin + count) * cols,
            out.data());
  NodePtr pa = a.node();
  return make(std::move(out), {pa}, [pa, begin, cols](const Node& self) {
    K().axpy(1.0, self.grad.data(), pa->ensure_grad().data() + begin * cols, self.grad.size());
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t m = x.rows(), n = x.cols();
  require(gain.rows() == 1 && gain.cols() == n && bias.rows() == 1 && bias.cols() == n,
          "layer_norm", "gain/bias must be 1x" + std::to_string(n));
  Matrix out(m, n);
  Matrix xhat(m, n);
  std::vector<double> inv_std(m);
  const double* g = gain.value().data();
  const double* b = bias.value().data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.value().data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mu) * is;
      xhat(i, j) = h;
      out(i, j) = h * g[j] + b[j];
    }
  }
  NodePtr px = x.node(), pg = gain.node(), pb = bias.node();
  return make(std::move(out), {px, pg, pb},
              [px, pg, pb, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                  const Node& self) {
                const double* g = pg->value.data();
                if (pg->requires_grad || pb->requires_grad) {
                  for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < n; ++j) {
                      const double dy = self.grad(i, j);
                      if (pg->requires_grad) pg->ensure_grad()(0, j) += dy * xhat(i, j);
                      if (pb->requires_grad) pb->ensure_grad()(0, j) += dy;
                    }
                  }
                }
                if (!px->requires_grad) return;
                Matrix& dx = px->ensure_grad();
                std::vector<double> dxhat(n);
                for (std::size_t i = 0; i < m; ++i) {
                  double mean_d = 0.0, mean_dx = 0.0;
                  for (std::size_t j = 0; j < n; ++j) {
                    dxhat[j] = self.grad(i, j) * g[j];
                    mean_d += dxhat[j];
                    mean_dx += dxhat[j] * xhat(i, j);
                  }
                  mean_d /= static_cast<double>(n);
                  mean_dx /= static_cast<double>(n);
                  for (std::size_t j = 0; j < n; ++j) {
                    dx(i, j) += inv_std[i] * (dxhat[j] - mean_d - xhat(i, j) * mean_dx);
                  }
                }
              });
}

Tensor gelu(const Tensor& x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double a = 0.044715;
  Matrix out = x.value();
  for (double& v : out.values()) {
    const double u = v;
    v = 0.5 * u * (1.0 + std::tanh(c * (u + a * u * u * u)));
  }
  NodePtr px = x.node();
  return make(std::move(out), {px}, [px](const Node& self) {
    Matrix& dx = px->ensure_grad();
    const double* in = px->value.data();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const double u = in[i];
      const double t = std::tanh(c * (u + a * u * u * u));
      const double dt = (1.0 - t * t) * c * (1.0 + 3.0 * a * u * u);
      dx.data()[i] += self.grad.data()[i] * (0.5 * (1.0 + t) + 0.5 * u * dt);
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  Matrix out = x.value();
  for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  NodePtr px = x.node();
  auto y = std::make_shared<Matrix>(out);
  return make(std::move(out), {px}, [px, y](const Node& self) {
    Matrix& dx = px->ensure_grad();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const double s = y->data()[i];
      dx.data()[i] += self.grad.data()[i] * s * (1.0 - s);
    }
  });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                 bool causal) {
  const std::size_t lq = q.rows(), lk = k.rows(), d = q.cols();
  require(heads > 0 && d % heads == 0, "attention", "channels not divisible by heads");
  require(k.cols() == d && v.cols() == d && v.rows() == lk, "attention",
          "q " + shape(q) + " k " + shape(k) + " v " + shape(v));
  require(!causal || lq == lk, "attention", "causal attention needs equal lengths");
  const std::size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  auto split = [d, dh](const Matrix& src, std::size_t rows, std::size_t h) {
    Matrix out(rows, dh);
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy(src.data() + i * d + h * dh, src.data() + i * d + (h + 1) * dh, out.data() + i * dh);
    }
    return out;
  };

  auto probs = std::make_shared<std::vector<Matrix>>();
  probs->reserve(heads);
  Matrix out(lq, d);
  Matrix oh(lq, dh);
  for (std::size_t h = 0; h < heads; ++h) {
    const Matrix qh = split(q.value(), lq, h);
    const Matrix kh = split(k.value(), lk, h);
    const Matrix vh = split(v.value(), lk, h);
    Matrix p(lq, lk);
    K().gemm_nt(lq, lk, dh, qh.data(), kh.data(), p.data(), false);
    for (std::size_t i = 0; i < lq; ++i) {
      double* row = p.data() + i * lk;
      const std::size_t visible = causal ? i + 1 : lk;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < visible; ++j) {
        row[j] *= inv_sqrt;
        mx = std::max(mx, row[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < visible; ++j) {
        row[j] = std::exp(row[j] - mx);
        z += row[j];
      }
      for (std::size_t j = 0; j < visible; ++j) row[j] /= z;
      for (std::size_t j = visible; j < lk; ++j) row[j] = 0.0;
    }
    K().gemm_nn(lq, dh, lk, p.data(), vh.data(), oh.data(), false);
    for (std::size_t i = 0; i < lq; ++i) {
      std::copy(oh.data() + i * dh, oh.data() + (i + 1) * dh, out.data() + i * d + h * dh);
    }
    probs->push_back(std::move(p));
  }

  NodePtr pq = q.node(), pk = k.node(), pv = v.node();
  return make(std::move(out), {pq, pk, pv},
              [pq, pk, pv, probs, heads, lq, lk, d, dh, inv_sqrt, split](const Node& self) {
                Matrix dout_h(lq, dh), dq_h(lq, dh), dk_h(lk, dh), dv_h(lk, dh), dp(lq, lk);
                for (std::size_t h = 0; h < heads; ++h) {
                  const Matrix& p = (*probs)[h];
                  const Matrix qh = split(pq->value, lq, h);
                  const Matrix kh = split(pk->value, lk, h);
                  const Matrix vh = split(pv->value, lk, h);
                  for (std::size_t i = 0; i < lq; ++i) {
                    std::copy(self.grad.data() + i * d + h * dh,
                              self.grad.data() + i * d + (h + 1) * dh, dout_h.data() + i * dh);
                  }
                  if (pv->requires_grad) {
                    K().gemm_tn(lk, dh, lq, p.data(), dout_h.data(), dv_h.data(), false);
                    Matrix& dv = pv->ensure_grad();
                    for (std::size_t j = 0; j < lk; ++j) {
                      K().axpy(1.0, dv_h.data() + j * dh, dv.data() + j * d + h * dh, dh);
                    }
                  }
                  if (!pq->requires_grad && !pk->requires_grad) continue;
                  K().gemm_nt(lq, lk, dh, dout_h.data(), vh.data(), dp.data(), false);
                  // softmax backward, then fold in the 1/sqrt(dh) scaling
                  for (std::size_t i = 0; i < lq; ++i) {
                    const double* prow = p.data() + i * lk;
                    double* drow = dp.data() + i * lk;
                    const double inner = K().dot(prow, drow, lk);
                    for (std::size_t j = 0; j < lk; ++j) {
                      drow[j] = prow[j] * (drow[j] - inner) * inv_sqrt;
                    }
                  }
                  if (pq->requires_grad) {
                    K().gemm_nn(lq, dh, lk, dp.data(), kh.data(), dq_h.data(), false);
                    Matrix& dq = pq->ensure_grad();
                    for (std::size_t i = 0; i < lq; ++i) {
                      K().axpy(1.0, dq_h.data() + i * dh, dq.data() + i * d + h * dh, dh);
                    }
                  }
                  if (pk->requires_grad) {
                    K().gemm_tn(lk, dh, lq, dp.data(), qh.data(), dk_h.data(), false);
                    Matrix& dk = pk->ensure_grad();
                    for (std::size_t j = 0; j < lk; ++j) {
                      K().axpy(1.0, dk_h.data() + j * dh, dk.data() + j * d + h * dh, dh);
                    }
                  }
                }
              });
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  const std::size_t cols = table.cols();
  Matrix out(ids.size(), cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < table.rows(), "gather_rows",
            "id " + std::to_string(ids[i]) + " out of range");
    const auto r = table.value().row(static_cast<std::size_t>(ids[i]));
    std::copy(r.begin(), r.end(), out.data() + i * cols);
  }
  NodePtr pt = table.node();
  std::vector<int> idx(ids.begin(), ids.end());
  return make(std::move(out), {pt}, [pt, idx = std::move(idx), cols](const Node& self) {
    Matrix& g = pt->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      K().axpy(1.0, self.grad.data() + i * cols, g.data() + static_cast<std::size_t>(idx[i]) * cols,
               cols);
    }
  });
}

Tensor log_softmax_pick(const Tensor& logits, std::size_t first_row, std::span<const int> targets) {
  const std::size_t n = targets.size(), v = logits.cols();
  require(first_row + n <= logits.rows(), "log_softmax_pick", "target rows exceed logits");
  Matrix out(n, 1);
  auto softmax = std::make_shared<Matrix>(n, v);
  for (std::size_t j = 0; j < n; ++j) {
    require(targets[j] >= 0 && static_cast<std::size_t>(targets[j]) < v, "log_softmax_pick",
            "target id out of range");
    const double* row = logits.value().data() + (first_row + j) * v;
    double mx = row[0];
    for (std::size_t c = 1; c < v; ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < v; ++c) z += std::exp(row[c] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < v; ++c) (*softmax)(j, c) = std::exp(row[c] - lse);
    out(j, 0) = row[targets[j]] - lse;
  }
  NodePtr pl = logits.node();
  std::vector<int> tgt(targets.begin(), targets.end());
  return make(std::move(out), {pl},
              [pl, softmax, tgt = std::move(tgt), first_row, v](const Node& self) {
                Matrix& g = pl->ensure_grad();
                for (std::size_t j = 0; j < tgt.size(); ++j) {
                  const double gj = self.grad(j, 0);
                  double* grow = g.data() + (first_row + j) * v;
                  for (std::size_t c = 0; c < v; ++c) grow[c] -= gj * (*softmax)(j, c);
                  grow[tgt[j]] += gj;
                }
              });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  NodePtr pa = a.node();
  return make(Matrix(1, 1, s), {pa}, [pa](const Node& self) {
    const double g = self.grad(0, 0);
    for (double& v : pa->ensure_grad().values()) v += g;
  });
}

Tensor mean(const Tensor& a) {
  require(a.value().size() > 0, "mean", "empty input");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Tensor hinge(const Tensor& a) {
  Matrix out = a.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  NodePtr pa = a.node();
  return make(std::move(out), {pa}, [pa](const Node& self) {
    Matrix& g = pa->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (pa->value.data()[i] > 0.0) g.data()[i] += self.grad.data()[i];
    }
  });
}

Tensor bce_with_logits(const Tensor& logits, std::span<const double> labels,
                       double positive_weight) {
  const std::size_t n = logits.value().size();
  require(n == labels.size() && n > 0, "bce_with_logits", "label count mismatch or empty");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits.value().data()[i];
    const double y = labels[i];
    // -log sigmoid(z) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z)
    const double sp_pos = std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    const double sp_neg = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    total += positive_weight * y * sp_pos + (1.0 - y) * sp_neg;
  }
  NodePtr pl = logits.node();
  std::vector<double> y(labels.begin(), labels.end());
  return make(Matrix(1, 1, total / static_cast<double>(n)), {pl},
              [pl, y = std::move(y), positive_weight, n](const Node& self) {
                Matrix& g = pl->ensure_grad();
                const double scale = self.grad(0, 0) / static_cast<double>(n);
                for (std::size_t i = 0; i < n; ++i) {
                  const double s = 1.0 / (1.0 + std::exp(-pl->value.data()[i]));
                  g.data()[i] += scale * (positive_weight * y[i] * (s - 1.0) + (1.0 - y[i]) * s);
                }
              });
}

}  // namespace adgen::ag
