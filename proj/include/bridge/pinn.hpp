#pragma once

// Physics-informed attention autoencoder over inertia-sized windows of the
// process series. Encoder and decoder are stacks of multi-head attention and
// feed-forward sublayers around a variational bottleneck; training minimizes
// reconstruction error, KL divergence and an inertial residual.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bridge/autodiff.hpp"
#include "bridge/correlator.hpp"
#include "bridge/trace.hpp"

namespace bridge {

using ad::Matrix;

struct FeatureScaling {
  std::vector<std::string> names;
  std::vector<double> min;
  std::vector<double> max;
};

struct SequenceBatch {
  std::size_t count = 0;
  std::size_t seq_len = 0;
  std::size_t features = 0;
  Matrix data;  // [count·seq_len, features], values scaled to [0,1]
  std::vector<double> start_ts;
  std::vector<double> end_ts;
  FeatureScaling scaling;
  double dt = 1.0;
  std::size_t clamped = 0;  // scaled values forced back into [0,1]
};

// Fits min-max scaling on the series.
SequenceBatch make_sequences(const Series& series, int itb);
// Reuses an existing scaling; out-of-range values are clamped and counted.
SequenceBatch make_sequences(const Series& series, int itb, const FeatureScaling& scaling);

// SoftMax(Q·Kᵀ/√d_k)·V for a single sequence.
Matrix attention_rank(const Matrix& q, const Matrix& k, const Matrix& v);

// LayerNorm(x + f(x)) with unit scale and zero shift.
Matrix sublayer(const Matrix& x, const std::function<Matrix(const Matrix&)>& f,
                double eps = 1e-5);

// ω·sin(d²x̃/dt²) − cos(d²x/dt²) on interior steps of each window of `seq_len` rows.
Matrix pde_residual(const Matrix& x, const Matrix& reconstruction, std::size_t seq_len,
                    double omega, double dt);

struct LossTerms {
  double total = 0.0;
  double mse = 0.0;
  double kl = 0.0;
  double pde = 0.0;
};

struct LossWeights {
  double alpha = 1.0;
  double beta = 0.001;
  double gamma = 0.003;
};

LossTerms total_loss(const Matrix& x, const Matrix& reconstruction, const Matrix& mean,
                     const Matrix& logvar, std::size_t seq_len, double omega, double dt,
                     const LossWeights& weights);

struct PinnHyper {
  int seq_len = 5;
  int heads = 0;      // 0: seq_len
  int layers = 0;     // encoder and decoder depth, 0: seq_len
  int d_k = 0;        // 0: max(features, 4)
  int d_model = 0;    // width of the embedded rows, 0: max(features, 16)
  int ff_hidden = 16;
  int latent = 0;     // 0: max(2, features / 2)
  double omega = 4.7;
  LossWeights weights;
  double learning_rate = 1e-3;
  int epochs = 60;
  int batch_size = 16;
  double holdout = 0.2;
  double percentile = 75.0;
  std::uint64_t seed = 7;
};

struct EpochLoss {
  int epoch = 0;
  LossTerms objective;   // mean-path objective on the training windows after the epoch
  double sampled_total = 0.0;  // running mean of the stochastic minibatch losses
};

struct PinnModel {
  PinnHyper hyper;  // with every 0 resolved
  std::size_t features = 0;
  FeatureScaling scaling;
  double dt = 1.0;
  double theta = 0.0;
  std::vector<std::string> param_names;
  std::vector<ad::Tensor> params;
  std::vector<EpochLoss> history;

  const ad::Tensor& param(const std::string& name) const;
};

// Fresh model with seeded uniform ±1/√fan_in weights.
PinnModel init_model(const PinnHyper& hyper, std::size_t features, const FeatureScaling& scaling,
                     double dt = 1.0);

struct ForwardResult {
  ad::Tensor reconstruction;  // [B·S, F]
  ad::Tensor mean;            // [B, latent]
  ad::Tensor logvar;          // [B, latent]
};

// noise == nullptr selects the mean path; otherwise noise is [B, latent].
ForwardResult forward(const PinnModel& model, const ad::Tensor& x, std::size_t batch,
                      const Matrix* noise = nullptr);

// Differentiable composite loss for one batch.
struct LossGraph {
  ad::Tensor total;
  ad::Tensor mse;
  ad::Tensor kl;
  ad::Tensor pde;
};
LossGraph loss_graph(const PinnModel& model, const Matrix& x, std::size_t batch,
                     const Matrix* noise = nullptr);

// Trains on the leading windows and calibrates θ on the held-out tail.
PinnModel train(const SequenceBatch& data, const PinnHyper& hyper);

// Objective of the model on a batch along the mean path.
LossTerms evaluate(const PinnModel& model, const SequenceBatch& data);

// Per-window reconstruction MSE along the mean path.
std::vector<double> reconstruction_errors(const PinnModel& model, const SequenceBatch& data);

std::pair<double, bool> score_window(const PinnModel& model, const Matrix& window);
std::vector<ScoredWindow> score(const PinnModel& model, const Series& series,
                                std::vector<std::string>* warnings = nullptr);

// Linear-interpolated percentile in [0, 100].
double percentile(std::vector<double> values, double pct);

std::string pinn_to_json(const PinnModel& model);
PinnModel pinn_from_json(const std::string& text);
void save_pinn(const std::string& path, const PinnModel& model);
PinnModel load_pinn(const std::string& path);

}  // namespace bridge
