#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices of doubles. Each forward pass builds a fresh graph of Nodes;
// parameters are long-lived leaf Nodes whose gradients accumulate.

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace bridge::ad {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

struct Node {
  Matrix value;
  Matrix grad;  // allocated on first use
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad();
};

using Tensor = std::shared_ptr<Node>;

Tensor constant(Matrix value);
Tensor parameter(Matrix value);

// Runs reverse accumulation from a 1×1 root.
void backward(const Tensor& root);
void zero_grad(const std::vector<Tensor>& params);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_row(const Tensor& a, const Tensor& row);  // broadcast a 1×cols row
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor square(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
// Per-row standardization followed by gamma ⊙ x + beta (both 1×cols).
Tensor layer_norm_rows(const Tensor& a, const Tensor& gamma, const Tensor& beta,
                       double eps = 1e-5);
Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols);

// Batched attention kernels over [B·S, d] matrices made of B blocks of S rows.
// block_scores gives the [B·S, S] matrix of per-block Q·Kᵀ; block_apply
// multiplies each [S, S] block of P with the matching [S, d] block of V.
Tensor block_scores(const Tensor& q, const Tensor& k, std::size_t seq);
Tensor block_apply(const Tensor& p, const Tensor& v, std::size_t seq);

// Central second differences along time inside each block of `seq` rows:
// [B·S, F] → [B·(S−2), F].
Tensor second_difference(const Tensor& a, std::size_t seq, double dt);

}  // namespace bridge::ad
