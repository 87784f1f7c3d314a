#include "bridge/autodiff.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

#include "bridge/error.hpp"

namespace bridge::ad {

void Node::ensure_grad() {
  if (!grad.same_shape(value)) grad = Matrix(value.rows, value.cols);
}

namespace {

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw Error(ErrorCode::shape, std::string(op) + ": " + detail);
}

std::string dims(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

Tensor make(Matrix value, std::vector<Tensor> parents, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return n;
}

// C += A·B, or with transposes selected by the flags.
void gemm(const Matrix& a, bool ta, const Matrix& b, bool tb, Matrix& c) {
  const std::size_t m = ta ? a.cols : a.rows;
  const std::size_t k = ta ? a.rows : a.cols;
  const std::size_t n = tb ? b.rows : b.cols;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ta ? a(p, i) : a(i, p);
      if (av == 0.0) continue;
      double* crow = &c.data[i * n];
      if (tb) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b(j, p);
      } else {
        const double* brow = &b.data[p * n];
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

template <typename F, typename D>
Tensor unary(const Tensor& a, F f, D dfdx) {
  Matrix out(a->value.rows, a->value.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = f(a->value.data[i]);
  return make(std::move(out), {a}, [dfdx](Node& self) {
    auto& x = *self.parents[0];
    if (!x.requires_grad) return;
    x.ensure_grad();
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      x.grad.data[i] += self.grad.data[i] * dfdx(x.value.data[i], self.value.data[i]);
    }
  });
}

}  // namespace

Tensor constant(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

Tensor parameter(Matrix value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->ensure_grad();
  return n;
}

void zero_grad(const std::vector<Tensor>& params) {
  for (const auto& p : params) {
    p->ensure_grad();
    std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
  }
}

void backward(const Tensor& root) {
  require(root->value.rows == 1 && root->value.cols == 1, "backward", "root must be 1x1");
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (n->backward) {
      n->grad = Matrix(n->value.rows, n->value.cols);
    }
  }
  root->ensure_grad();
  root->grad.data[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a->value.cols == b->value.rows, "matmul", dims(a->value) + " by " + dims(b->value));
  Matrix out(a->value.rows, b->value.cols);
  gemm(a->value, false, b->value, false, out);
  return make(std::move(out), {a, b}, [](Node& self) {
    auto& x = *self.parents[0];
    auto& y = *self.parents[1];
    if (x.requires_grad) {
      x.ensure_grad();
      gemm(self.grad, false, y.value, true, x.grad);
    }
    if (y.requires_grad) {
      y.ensure_grad();
      gemm(x.value, true, self.grad, false, y.grad);
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a->value.same_shape(b->value), "add", dims(a->value) + " vs " + dims(b->value));
  Matrix out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b->value.data[i];
  return make(std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad.data[i] += self.grad.data[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a->value.same_shape(b->value), "mul", dims(a->value) + " vs " + dims(b->value));
  Matrix out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b->value.data[i];
  return make(std::move(out), {a, b}, [](Node& self) {
    auto& x = *self.parents[0];
    auto& y = *self.parents[1];
    if (x.requires_grad) {
      x.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        x.grad.data[i] += self.grad.data[i] * y.value.data[i];
      }
    }
    if (y.requires_grad) {
      y.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        y.grad.data[i] += self.grad.data[i] * x.value.data[i];
      }
    }
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require(row->value.rows == 1 && row->value.cols == a->value.cols, "add_row",
          dims(a->value) + " with " + dims(row->value));
  Matrix out = a->value;
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) += row->value.data[c];
  }
  return make(std::move(out), {a, row}, [](Node& self) {
    auto& x = *self.parents[0];
    auto& b = *self.parents[1];
    if (x.requires_grad) {
      x.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) x.grad.data[i] += self.grad.data[i];
    }
    if (b.requires_grad) {
      b.ensure_grad();
      for (std::size_t r = 0; r < self.grad.rows; ++r) {
        for (std::size_t c = 0; c < self.grad.cols; ++c) b.grad.data[c] += self.grad(r, c);
      }
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor sin(const Tensor& a) {
  return unary(a, [](double x) { return std::sin(x); },
               [](double x, double) { return std::cos(x); });
}

Tensor cos(const Tensor& a) {
  return unary(a, [](double x) { return std::cos(x); },
               [](double x, double) { return -std::sin(x); });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(a, [lo, hi](double x) { return std::min(hi, std::max(lo, x)); },
               [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a->value.data) s += v;
  return make(Matrix(1, 1, s), {a}, [](Node& self) {
    auto& x = *self.parents[0];
    if (!x.requires_grad) return;
    x.ensure_grad();
    for (auto& g : x.grad.data) g += self.grad.data[0];
  });
}

Tensor mean(const Tensor& a) {
  require(a->value.size() > 0, "mean", "empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a->value.size()));
}

Tensor softmax_rows(const Tensor& a) {
  Matrix out(a->value.rows, a->value.cols);
  for (std::size_t r = 0; r < out.rows; ++r) {
    double hi = -INFINITY;
    for (std::size_t c = 0; c < out.cols; ++c) hi = std::max(hi, a->value(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < out.cols; ++c) {
      out(r, c) = std::exp(a->value(r, c) - hi);
      z += out(r, c);
    }
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) /= z;
  }
  return make(std::move(out), {a}, [](Node& self) {
    auto& x = *self.parents[0];
    if (!x.requires_grad) return;
    x.ensure_grad();
    for (std::size_t r = 0; r < self.value.rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < self.value.cols; ++c) dot += self.grad(r, c) * self.value(r, c);
      for (std::size_t c = 0; c < self.value.cols; ++c) {
        x.grad(r, c) += self.value(r, c) * (self.grad(r, c) - dot);
      }
    }
  });
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps) {
  const auto& x = a->value;
  require(gamma->value.rows == 1 && gamma->value.cols == x.cols && beta->value.same_shape(gamma->value),
          "layer_norm", dims(x) + " with gamma " + dims(gamma->value));
  const std::size_t n = x.cols;
  Matrix xhat(x.rows, n);
  std::vector<double> inv_std(x.rows);
  Matrix out(x.rows, n);
  for (std::size_t r = 0; r < x.rows; ++r) {
    double m = 0.0;
    for (std::size_t c = 0; c < n; ++c) m += x(r, c);
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t c = 0; c < n; ++c) v += (x(r, c) - m) * (x(r, c) - m);
    v /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(v + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat(r, c) = (x(r, c) - m) * inv_std[r];
      out(r, c) = gamma->value.data[c] * xhat(r, c) + beta->value.data[c];
    }
  }
  return make(std::move(out), {a, gamma, beta},
              [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                auto& in = *self.parents[0];
                auto& g = *self.parents[1];
                auto& b = *self.parents[2];
                const std::size_t n = self.value.cols;
                if (g.requires_grad) g.ensure_grad();
                if (b.requires_grad) b.ensure_grad();
                if (in.requires_grad) in.ensure_grad();
                for (std::size_t r = 0; r < self.value.rows; ++r) {
                  double sum_dxhat = 0.0;
                  double sum_dxhat_xhat = 0.0;
                  for (std::size_t c = 0; c < n; ++c) {
                    const double dy = self.grad(r, c);
                    if (g.requires_grad) g.grad.data[c] += dy * xhat(r, c);
                    if (b.requires_grad) b.grad.data[c] += dy;
                    const double dxhat = dy * g.value.data[c];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat(r, c);
                  }
                  if (!in.requires_grad) continue;
                  for (std::size_t c = 0; c < n; ++c) {
                    const double dxhat = self.grad(r, c) * g.value.data[c];
                    in.grad(r, c) += inv_std[r] / static_cast<double>(n) *
                                     (static_cast<double>(n) * dxhat - sum_dxhat -
                                      xhat(r, c) * sum_dxhat_xhat);
                  }
                }
              });
}

Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols) {
  require(rows * cols == a->value.size(), "reshape",
          dims(a->value) + " to " + std::to_string(rows) + "x" + std::to_string(cols));
  Matrix out = a->value;
  out.rows = rows;
  out.cols = cols;
  return make(std::move(out), {a}, [](Node& self) {
    auto& x = *self.parents[0];
    if (!x.requires_grad) return;
    x.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) x.grad.data[i] += self.grad.data[i];
  });
}

Tensor block_scores(const Tensor& q, const Tensor& k, std::size_t seq) {
  const auto& Q = q->value;
  const auto& K = k->value;
  require(seq > 0 && Q.same_shape(K) && Q.rows % seq == 0, "block_scores",
          dims(Q) + " vs " + dims(K) + " seq " + std::to_string(seq));
  Matrix out(Q.rows, seq);
  for (std::size_t base = 0; base < Q.rows; base += seq) {
    for (std::size_t i = 0; i < seq; ++i) {
      for (std::size_t j = 0; j < seq; ++j) {
        double s = 0.0;
        for (std::size_t d = 0; d < Q.cols; ++d) s += Q(base + i, d) * K(base + j, d);
        out(base + i, j) = s;
      }
    }
  }
  return make(std::move(out), {q, k}, [seq](Node& self) {
    auto& qn = *self.parents[0];
    auto& kn = *self.parents[1];
    if (qn.requires_grad) qn.ensure_grad();
    if (kn.requires_grad) kn.ensure_grad();
    const std::size_t dim = qn.value.cols;
    for (std::size_t base = 0; base < qn.value.rows; base += seq) {
      for (std::size_t i = 0; i < seq; ++i) {
        for (std::size_t j = 0; j < seq; ++j) {
          const double g = self.grad(base + i, j);
          if (g == 0.0) continue;
          for (std::size_t d = 0; d < dim; ++d) {
            if (qn.requires_grad) qn.grad(base + i, d) += g * kn.value(base + j, d);
            if (kn.requires_grad) kn.grad(base + j, d) += g * qn.value(base + i, d);
          }
        }
      }
    }
  });
}

Tensor block_apply(const Tensor& p, const Tensor& v, std::size_t seq) {
  const auto& P = p->value;
  const auto& V = v->value;
  require(seq > 0 && P.cols == seq && P.rows == V.rows && V.rows % seq == 0, "block_apply",
          dims(P) + " with " + dims(V) + " seq " + std::to_string(seq));
  Matrix out(V.rows, V.cols);
  for (std::size_t base = 0; base < V.rows; base += seq) {
    for (std::size_t i = 0; i < seq; ++i) {
      for (std::size_t j = 0; j < seq; ++j) {
        const double w = P(base + i, j);
        for (std::size_t d = 0; d < V.cols; ++d) out(base + i, d) += w * V(base + j, d);
      }
    }
  }
  return make(std::move(out), {p, v}, [seq](Node& self) {
    auto& pn = *self.parents[0];
    auto& vn = *self.parents[1];
    if (pn.requires_grad) pn.ensure_grad();
    if (vn.requires_grad) vn.ensure_grad();
    const std::size_t dim = vn.value.cols;
    for (std::size_t base = 0; base < vn.value.rows; base += seq) {
      for (std::size_t i = 0; i < seq; ++i) {
        for (std::size_t j = 0; j < seq; ++j) {
          double gp = 0.0;
          const double w = pn.value(base + i, j);
          for (std::size_t d = 0; d < dim; ++d) {
            const double g = self.grad(base + i, d);
            gp += g * vn.value(base + j, d);
            if (vn.requires_grad) vn.grad(base + j, d) += w * g;
          }
          if (pn.requires_grad) pn.grad(base + i, j) += gp;
        }
      }
    }
  });
}

Tensor second_difference(const Tensor& a, std::size_t seq, double dt) {
  const auto& X = a->value;
  require(seq >= 3 && X.rows % seq == 0, "second_difference",
          dims(X) + " seq " + std::to_string(seq));
  const std::size_t blocks = X.rows / seq;
  const double inv = 1.0 / (dt * dt);
  Matrix out(blocks * (seq - 2), X.cols);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t t = 1; t + 1 < seq; ++t) {
      for (std::size_t c = 0; c < X.cols; ++c) {
        out(b * (seq - 2) + t - 1, c) =
            (X(b * seq + t + 1, c) - 2.0 * X(b * seq + t, c) + X(b * seq + t - 1, c)) * inv;
      }
    }
  }
  return make(std::move(out), {a}, [seq, inv](Node& self) {
    auto& x = *self.parents[0];
    if (!x.requires_grad) return;
    x.ensure_grad();
    const std::size_t blocks = x.value.rows / seq;
    for (std::size_t b = 0; b < blocks; ++b) {
      for (std::size_t t = 1; t + 1 < seq; ++t) {
        for (std::size_t c = 0; c < x.value.cols; ++c) {
          const double g = self.grad(b * (seq - 2) + t - 1, c) * inv;
          x.grad(b * seq + t + 1, c) += g;
          x.grad(b * seq + t, c) -= 2.0 * g;
          x.grad(b * seq + t - 1, c) += g;
        }
      }
    }
  });
}

}  // namespace bridge::ad
