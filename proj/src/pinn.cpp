#include "bridge/pinn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "bridge/error.hpp"

namespace bridge {

namespace {

using ad::Tensor;
using ojson = nlohmann::ordered_json;

constexpr double kLogvarMin = -60.0;
constexpr double kLogvarMax = 20.0;
constexpr double kLayerNormEps = 1e-5;
constexpr std::size_t kEvalChunk = 256;

double median_step(const Series& series) {
  std::vector<double> steps;
  for (std::size_t i = 1; i < series.frames.size(); ++i) {
    steps.push_back(series.frames[i].ts - series.frames[i - 1].ts);
  }
  if (steps.empty()) return 1.0;
  std::nth_element(steps.begin(), steps.begin() + steps.size() / 2, steps.end());
  return steps[steps.size() / 2];
}

std::vector<std::size_t> column_map(const Series& series, const FeatureScaling& scaling) {
  std::vector<std::size_t> map;
  for (const auto& name : scaling.names) {
    auto idx = series.index_of(name);
    if (!idx) throw Error(ErrorCode::shape, "series has no column '" + name + "'");
    map.push_back(*idx);
  }
  return map;
}

SequenceBatch build_batch(const Series& series, int itb, const FeatureScaling& scaling) {
  if (itb < 2) throw Error(ErrorCode::config, "sequence length must be at least 2");
  const auto seq = static_cast<std::size_t>(itb);
  if (series.size() < seq) {
    throw Error(ErrorCode::insufficient_data, "series has " + std::to_string(series.size()) +
                                                  " frames, fewer than the sequence length " +
                                                  std::to_string(seq));
  }
  const auto map = column_map(series, scaling);
  SequenceBatch b;
  b.seq_len = seq;
  b.features = map.size();
  b.count = series.size() - seq + 1;
  b.scaling = scaling;
  b.dt = median_step(series);
  // Scale every frame once, then copy windows.
  Matrix scaled(series.size(), b.features);
  for (std::size_t r = 0; r < series.size(); ++r) {
    for (std::size_t c = 0; c < b.features; ++c) {
      const double v = series.frames[r].values[map[c]];
      const double lo = scaling.min[c];
      const double range = scaling.max[c] - lo;
      double s = range > 0.0 ? (v - lo) / range : (v > lo ? 1.0 : 0.0);
      if (range <= 0.0 && v > lo) ++b.clamped;
      if (s < 0.0 || s > 1.0) {
        s = std::clamp(s, 0.0, 1.0);
        ++b.clamped;
      }
      scaled(r, c) = s;
    }
  }
  b.data = Matrix(b.count * seq, b.features);
  for (std::size_t w = 0; w < b.count; ++w) {
    std::copy_n(&scaled.data[w * b.features], seq * b.features, &b.data.data[w * seq * b.features]);
    b.start_ts.push_back(series.frames[w].ts);
    b.end_ts.push_back(series.frames[w + seq - 1].ts);
  }
  return b;
}

Matrix rows_of(const SequenceBatch& data, const std::vector<std::size_t>& windows) {
  const std::size_t block = data.seq_len * data.features;
  Matrix m(windows.size() * data.seq_len, data.features);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    std::copy_n(&data.data.data[windows[i] * block], block, &m.data[i * block]);
  }
  return m;
}

Matrix positional_encoding(std::size_t seq, std::size_t features, std::size_t batch) {
  Matrix pe(seq * batch, features);
  for (std::size_t t = 0; t < seq; ++t) {
    for (std::size_t c = 0; c < features; ++c) {
      const double rate = std::pow(10000.0, static_cast<double>(c / 2 * 2) /
                                                static_cast<double>(features));
      const double v = (c % 2 == 0) ? std::sin(t / rate) : std::cos(t / rate);
      for (std::size_t b = 0; b < batch; ++b) pe(b * seq + t, c) = v;
    }
  }
  return pe;
}

void check_finite(const Tensor& t, const std::string& where) {
  for (double v : t->value.data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::numeric, "non-finite activation in " + where);
  }
}

Tensor layer_block(const PinnModel& m, const std::string& p, Tensor x, std::size_t seq) {
  const auto& h = m.hyper;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(h.d_k));
  Tensor attn;
  for (int k = 0; k < h.heads; ++k) {
    const std::string hp = p + ".h" + std::to_string(k);
    Tensor q = ad::matmul(x, m.param(hp + ".Wq"));
    Tensor kk = ad::matmul(x, m.param(hp + ".Wk"));
    Tensor v = ad::matmul(x, m.param(hp + ".Wv"));
    Tensor filter = ad::softmax_rows(ad::scale(ad::block_scores(q, kk, seq), inv_sqrt));
    Tensor head = ad::matmul(ad::block_apply(filter, v, seq), m.param(hp + ".Wo"));
    attn = attn ? ad::add(attn, head) : head;
  }
  attn = ad::add_row(attn, m.param(p + ".bo"));
  x = ad::layer_norm_rows(ad::add(x, attn), m.param(p + ".ln1.g"), m.param(p + ".ln1.b"),
                          kLayerNormEps);
  Tensor hidden = ad::tanh(ad::add_row(ad::matmul(x, m.param(p + ".ff.W1")), m.param(p + ".ff.b1")));
  Tensor ff = ad::add_row(ad::matmul(hidden, m.param(p + ".ff.W2")), m.param(p + ".ff.b2"));
  x = ad::layer_norm_rows(ad::add(x, ff), m.param(p + ".ln2.g"), m.param(p + ".ln2.b"),
                          kLayerNormEps);
  check_finite(x, p);
  return x;
}

double kl_value(const Matrix& mean, const Matrix& logvar) {
  double s = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double lv = std::clamp(logvar.data[i], kLogvarMin, kLogvarMax);
    s += 1.0 + lv - mean.data[i] * mean.data[i] - std::exp(lv);
  }
  return -0.5 * s / static_cast<double>(std::max<std::size_t>(1, mean.rows));
}

Matrix second_diff(const Matrix& x, std::size_t seq, double dt) {
  return ad::second_difference(ad::constant(x), seq, dt)->value;
}

struct Adam {
  double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  long step = 0;
  std::vector<Matrix> m, v;

  Adam(const std::vector<Tensor>& params, double learning_rate) : lr(learning_rate) {
    for (const auto& p : params) {
      m.emplace_back(p->value.rows, p->value.cols);
      v.emplace_back(p->value.rows, p->value.cols);
    }
  }

  void apply(const std::vector<Tensor>& params) {
    ++step;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i];
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        const double g = p.grad.data[j];
        m[i].data[j] = b1 * m[i].data[j] + (1.0 - b1) * g;
        v[i].data[j] = b2 * v[i].data[j] + (1.0 - b2) * g * g;
        p.value.data[j] -= lr * (m[i].data[j] / c1) / (std::sqrt(v[i].data[j] / c2) + eps);
      }
    }
  }
};

PinnHyper resolve(PinnHyper h, std::size_t features) {
  if (h.seq_len < 2) throw Error(ErrorCode::config, "seq_len must be at least 2");
  if (features == 0) throw Error(ErrorCode::config, "model needs at least one feature");
  if (h.heads == 0) h.heads = h.seq_len;
  if (h.layers == 0) h.layers = h.seq_len;
  if (h.d_k == 0) h.d_k = std::max<int>(static_cast<int>(features), 4);
  if (h.d_model == 0) h.d_model = std::max<int>(static_cast<int>(features), 16);
  if (h.latent == 0) h.latent = std::max<int>(2, static_cast<int>(features) / 2);
  if (h.heads < 1 || h.layers < 1 || h.d_k < 1 || h.d_model < 1 || h.ff_hidden < 1 || h.latent < 1) {
    throw Error(ErrorCode::config, "model dimensions must be positive");
  }
  if (h.epochs < 0 || h.batch_size < 1) throw Error(ErrorCode::config, "bad epochs or batch size");
  if (h.learning_rate < 0.0) throw Error(ErrorCode::config, "learning rate must be non-negative");
  if (h.holdout < 0.0 || h.holdout >= 1.0) throw Error(ErrorCode::config, "holdout must lie in [0,1)");
  if (h.weights.gamma != 0.0 && h.seq_len < 3) {
    throw Error(ErrorCode::config, "the inertial residual needs seq_len >= 3");
  }
  return h;
}

}  // namespace

SequenceBatch make_sequences(const Series& series, int itb) {
  FeatureScaling s;
  s.names = series.tags;
  for (std::size_t c = 0; c < series.tags.size(); ++c) {
    double lo = INFINITY;
    double hi = -INFINITY;
    for (const auto& f : series.frames) {
      lo = std::min(lo, f.values[c]);
      hi = std::max(hi, f.values[c]);
    }
    s.min.push_back(series.empty() ? 0.0 : lo);
    s.max.push_back(series.empty() ? 0.0 : hi);
  }
  return build_batch(series, itb, s);
}

SequenceBatch make_sequences(const Series& series, int itb, const FeatureScaling& scaling) {
  return build_batch(series, itb, scaling);
}

Matrix attention_rank(const Matrix& q, const Matrix& k, const Matrix& v) {
  if (q.cols == 0 || q.cols != k.cols || k.rows != v.rows || k.rows == 0) {
    throw Error(ErrorCode::shape, "attention shapes do not line up");
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.cols));
  Matrix scores(q.rows, k.rows);
  for (std::size_t i = 0; i < q.rows; ++i) {
    for (std::size_t j = 0; j < k.rows; ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < q.cols; ++d) s += q(i, d) * k(j, d);
      scores(i, j) = s * inv_sqrt;
    }
  }
  Matrix filter = ad::softmax_rows(ad::constant(scores))->value;
  return ad::matmul(ad::constant(filter), ad::constant(v))->value;
}

Matrix sublayer(const Matrix& x, const std::function<Matrix(const Matrix&)>& f, double eps) {
  Matrix fx = f(x);
  if (!fx.same_shape(x)) throw Error(ErrorCode::shape, "sublayer output shape differs from input");
  auto sum = ad::add(ad::constant(x), ad::constant(std::move(fx)));
  return ad::layer_norm_rows(sum, ad::constant(Matrix(1, x.cols, 1.0)),
                             ad::constant(Matrix(1, x.cols, 0.0)), eps)
      ->value;
}

Matrix pde_residual(const Matrix& x, const Matrix& reconstruction, std::size_t seq_len,
                    double omega, double dt) {
  if (seq_len < 3) throw Error(ErrorCode::shape, "the inertial residual needs at least 3 steps");
  if (!x.same_shape(reconstruction)) throw Error(ErrorCode::shape, "input and reconstruction differ in shape");
  Matrix dx = second_diff(x, seq_len, dt);
  Matrix dr = second_diff(reconstruction, seq_len, dt);
  for (std::size_t i = 0; i < dr.size(); ++i) {
    dr.data[i] = omega * std::sin(dr.data[i]) - std::cos(dx.data[i]);
  }
  return dr;
}

LossTerms total_loss(const Matrix& x, const Matrix& reconstruction, const Matrix& mean,
                     const Matrix& logvar, std::size_t seq_len, double omega, double dt,
                     const LossWeights& w) {
  if (!x.same_shape(reconstruction) || !mean.same_shape(logvar)) {
    throw Error(ErrorCode::shape, "loss inputs differ in shape");
  }
  LossTerms t;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = reconstruction.data[i] - x.data[i];
    t.mse += d * d;
  }
  t.mse /= static_cast<double>(std::max<std::size_t>(1, x.size()));
  t.kl = kl_value(mean, logvar);
  if (w.gamma != 0.0) {
    Matrix r = pde_residual(x, reconstruction, seq_len, omega, dt);
    for (double v : r.data) t.pde += v * v;
    t.pde /= static_cast<double>(std::max<std::size_t>(1, r.size()));
  }
  t.total = w.alpha * t.mse + w.beta * t.kl + w.gamma * t.pde;
  return t;
}

const ad::Tensor& PinnModel::param(const std::string& name) const {
  auto it = std::find(param_names.begin(), param_names.end(), name);
  if (it == param_names.end()) throw Error(ErrorCode::shape, "model has no parameter '" + name + "'");
  return params[static_cast<std::size_t>(it - param_names.begin())];
}

PinnModel init_model(const PinnHyper& hyper, std::size_t features, const FeatureScaling& scaling,
                     double dt) {
  PinnModel m;
  m.hyper = resolve(hyper, features);
  m.features = features;
  m.scaling = scaling;
  m.dt = dt;
  std::mt19937_64 rng(hyper.seed);
  auto add = [&](const std::string& name, std::size_t rows, std::size_t cols, double fill,
                 bool random) {
    Matrix w(rows, cols, fill);
    if (random) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (auto& v : w.data) v = u(rng);
    }
    m.param_names.push_back(name);
    m.params.push_back(ad::parameter(std::move(w)));
  };
  const auto& h = m.hyper;
  const std::size_t F = features;
  const auto D = static_cast<std::size_t>(h.d_model);
  const auto dk = static_cast<std::size_t>(h.d_k);
  const auto ffh = static_cast<std::size_t>(h.ff_hidden);
  const auto Z = static_cast<std::size_t>(h.latent);
  const std::size_t flat = static_cast<std::size_t>(h.seq_len) * D;
  auto add_layer = [&](const std::string& p) {
    for (int k = 0; k < h.heads; ++k) {
      const std::string hp = p + ".h" + std::to_string(k);
      add(hp + ".Wq", D, dk, 0.0, true);
      add(hp + ".Wk", D, dk, 0.0, true);
      add(hp + ".Wv", D, dk, 0.0, true);
      add(hp + ".Wo", dk, D, 0.0, true);
    }
    add(p + ".bo", 1, D, 0.0, false);
    add(p + ".ln1.g", 1, D, 1.0, false);
    add(p + ".ln1.b", 1, D, 0.0, false);
    add(p + ".ff.W1", D, ffh, 0.0, true);
    add(p + ".ff.b1", 1, ffh, 0.0, false);
    add(p + ".ff.W2", ffh, D, 0.0, true);
    add(p + ".ff.b2", 1, D, 0.0, false);
    add(p + ".ln2.g", 1, D, 1.0, false);
    add(p + ".ln2.b", 1, D, 0.0, false);
  };
  add("in.W", F, D, 0.0, true);
  add("in.b", 1, D, 0.0, false);
  for (int l = 0; l < h.layers; ++l) add_layer("enc" + std::to_string(l));
  add("mu.W", flat, Z, 0.0, true);
  add("mu.b", 1, Z, 0.0, false);
  add("logvar.W", flat, Z, 0.0, true);
  add("logvar.b", 1, Z, 0.0, false);
  add("dec.in.W", Z, flat, 0.0, true);
  add("dec.in.b", 1, flat, 0.0, false);
  for (int l = 0; l < h.layers; ++l) add_layer("dec" + std::to_string(l));
  add("out.W", D, F, 0.0, true);
  add("out.b", 1, F, 0.0, false);
  return m;
}

ForwardResult forward(const PinnModel& m, const Tensor& x, std::size_t batch, const Matrix* noise) {
  const auto seq = static_cast<std::size_t>(m.hyper.seq_len);
  const std::size_t F = m.features;
  if (x->value.rows != batch * seq || x->value.cols != F) {
    throw Error(ErrorCode::shape, "batch does not match the model's sequence length or features");
  }
  const auto D = static_cast<std::size_t>(m.hyper.d_model);
  const Tensor pe = ad::constant(positional_encoding(seq, D, batch));
  Tensor h = ad::add(ad::add_row(ad::matmul(x, m.param("in.W")), m.param("in.b")), pe);
  for (int l = 0; l < m.hyper.layers; ++l) h = layer_block(m, "enc" + std::to_string(l), h, seq);
  Tensor flat = ad::reshape(h, batch, seq * D);
  ForwardResult r;
  r.mean = ad::add_row(ad::matmul(flat, m.param("mu.W")), m.param("mu.b"));
  r.logvar = ad::add_row(ad::matmul(flat, m.param("logvar.W")), m.param("logvar.b"));
  Tensor z = r.mean;
  if (noise != nullptr) {
    if (noise->rows != batch || noise->cols != static_cast<std::size_t>(m.hyper.latent)) {
      throw Error(ErrorCode::shape, "noise does not match the latent shape");
    }
    Tensor sd = ad::exp(ad::scale(ad::clamp(r.logvar, kLogvarMin, kLogvarMax), 0.5));
    z = ad::add(r.mean, ad::mul(sd, ad::constant(*noise)));
  }
  check_finite(z, "bottleneck");
  Tensor y = ad::add_row(ad::matmul(z, m.param("dec.in.W")), m.param("dec.in.b"));
  y = ad::add(ad::reshape(y, batch * seq, D), pe);
  for (int l = 0; l < m.hyper.layers; ++l) y = layer_block(m, "dec" + std::to_string(l), y, seq);
  r.reconstruction = ad::add_row(ad::matmul(y, m.param("out.W")), m.param("out.b"));
  check_finite(r.reconstruction, "output projection");
  return r;
}

LossGraph loss_graph(const PinnModel& m, const Matrix& xm, std::size_t batch, const Matrix* noise) {
  const auto seq = static_cast<std::size_t>(m.hyper.seq_len);
  const auto& w = m.hyper.weights;
  const Tensor x = ad::constant(xm);
  ForwardResult f = forward(m, x, batch, noise);
  LossGraph g;
  g.mse = ad::mean(ad::square(ad::sub(f.reconstruction, x)));
  Tensor lv = ad::clamp(f.logvar, kLogvarMin, kLogvarMax);
  Tensor inner = ad::add_scalar(ad::sub(ad::sub(lv, ad::square(f.mean)), ad::exp(lv)), 1.0);
  g.kl = ad::scale(ad::sum(inner), -0.5 / static_cast<double>(batch));
  g.total = ad::scale(g.mse, w.alpha);
  g.total = ad::add(g.total, ad::scale(g.kl, w.beta));
  if (w.gamma != 0.0) {
    Tensor d2r = ad::second_difference(f.reconstruction, seq, m.dt);
    Matrix cos_d2x = second_diff(xm, seq, m.dt);
    for (auto& v : cos_d2x.data) v = std::cos(v);
    Tensor residual = ad::sub(ad::scale(ad::sin(d2r), m.hyper.omega), ad::constant(cos_d2x));
    g.pde = ad::mean(ad::square(residual));
    g.total = ad::add(g.total, ad::scale(g.pde, w.gamma));
  } else {
    g.pde = ad::constant(Matrix(1, 1, 0.0));
  }
  return g;
}

namespace {

template <typename Fn>
void for_chunks(const SequenceBatch& data, const std::vector<std::size_t>& windows, Fn fn) {
  for (std::size_t begin = 0; begin < windows.size(); begin += kEvalChunk) {
    const std::size_t end = std::min(windows.size(), begin + kEvalChunk);
    std::vector<std::size_t> ids(windows.begin() + static_cast<std::ptrdiff_t>(begin),
                                 windows.begin() + static_cast<std::ptrdiff_t>(end));
    fn(ids, rows_of(data, ids));
  }
}

LossTerms evaluate_windows(const PinnModel& m, const SequenceBatch& data,
                           const std::vector<std::size_t>& windows) {
  LossTerms acc;
  if (windows.empty()) return acc;
  for_chunks(data, windows, [&](const std::vector<std::size_t>& ids, const Matrix& x) {
    LossGraph g = loss_graph(m, x, ids.size(), nullptr);
    const double w = static_cast<double>(ids.size());
    acc.total += w * g.total->value.data[0];
    acc.mse += w * g.mse->value.data[0];
    acc.kl += w * g.kl->value.data[0];
    acc.pde += w * g.pde->value.data[0];
  });
  const double n = static_cast<double>(windows.size());
  acc.total /= n;
  acc.mse /= n;
  acc.kl /= n;
  acc.pde /= n;
  return acc;
}

std::vector<double> window_errors(const PinnModel& m, const SequenceBatch& data,
                                  const std::vector<std::size_t>& windows) {
  std::vector<double> out;
  const std::size_t block = data.seq_len * data.features;
  for_chunks(data, windows, [&](const std::vector<std::size_t>& ids, const Matrix& x) {
    ForwardResult f = forward(m, ad::constant(x), ids.size(), nullptr);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < block; ++j) {
        const double d = f.reconstruction->value.data[i * block + j] - x.data[i * block + j];
        s += d * d;
      }
      out.push_back(s / static_cast<double>(block));
    }
  });
  return out;
}

std::vector<std::size_t> iota(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> v(end - begin);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

}  // namespace

PinnModel train(const SequenceBatch& data, const PinnHyper& hyper) {
  if (data.count == 0) throw Error(ErrorCode::insufficient_data, "no training windows");
  if (static_cast<std::size_t>(hyper.seq_len) != data.seq_len) {
    throw Error(ErrorCode::config, "sequence length " + std::to_string(data.seq_len) +
                                       " does not match the model's " +
                                       std::to_string(hyper.seq_len));
  }
  PinnModel m = init_model(hyper, data.features, data.scaling, data.dt);
  const auto& h = m.hyper;
  std::size_t n_hold = 0;
  if (data.count >= 2 && h.holdout > 0.0) {
    n_hold = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(h.holdout * data.count)));
  }
  const std::size_t n_train = data.count - n_hold;
  std::vector<std::size_t> train_ids = iota(0, n_train);
  const std::vector<std::size_t> train_order = train_ids;
  const std::vector<std::size_t> hold_ids = iota(n_train, data.count);

  std::mt19937_64 rng(h.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Adam adam(m.params, h.learning_rate);
  const auto Z = static_cast<std::size_t>(h.latent);
  const auto bs = static_cast<std::size_t>(h.batch_size);

  for (int epoch = 1; epoch <= h.epochs; ++epoch) {
    std::shuffle(train_ids.begin(), train_ids.end(), rng);
    double sampled = 0.0;
    for (std::size_t begin = 0; begin < train_ids.size(); begin += bs) {
      const std::size_t end = std::min(train_ids.size(), begin + bs);
      std::vector<std::size_t> ids(train_ids.begin() + static_cast<std::ptrdiff_t>(begin),
                                   train_ids.begin() + static_cast<std::ptrdiff_t>(end));
      Matrix noise(ids.size(), Z);
      for (auto& v : noise.data) v = normal(rng);
      LossGraph g;
      try {
        g = loss_graph(m, rows_of(data, ids), ids.size(), &noise);
      } catch (const Error& e) {
        throw Error(ErrorCode::numeric, "epoch " + std::to_string(epoch) + ": " + e.what());
      }
      const double loss = g.total->value.data[0];
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::numeric, "non-finite loss in epoch " + std::to_string(epoch));
      }
      sampled += loss * static_cast<double>(ids.size());
      ad::zero_grad(m.params);
      ad::backward(g.total);
      adam.apply(m.params);
    }
    EpochLoss e;
    e.epoch = epoch;
    e.sampled_total = sampled / static_cast<double>(train_ids.size());
    e.objective = evaluate_windows(m, data, train_order);
    if (!std::isfinite(e.objective.total)) {
      throw Error(ErrorCode::numeric, "non-finite loss in epoch " + std::to_string(epoch));
    }
    m.history.push_back(e);
  }
  const auto calib = window_errors(m, data, n_hold > 0 ? hold_ids : train_order);
  m.theta = std::max(0.0, percentile(calib, h.percentile));
  return m;
}

LossTerms evaluate(const PinnModel& model, const SequenceBatch& data) {
  return evaluate_windows(model, data, iota(0, data.count));
}

std::vector<double> reconstruction_errors(const PinnModel& model, const SequenceBatch& data) {
  return window_errors(model, data, iota(0, data.count));
}

std::pair<double, bool> score_window(const PinnModel& model, const Matrix& window) {
  const auto seq = static_cast<std::size_t>(model.hyper.seq_len);
  if (window.rows != seq || window.cols != model.features) {
    throw Error(ErrorCode::shape, "window must be " + std::to_string(seq) + "x" +
                                      std::to_string(model.features));
  }
  Series s;
  s.tags = model.scaling.names;
  for (std::size_t r = 0; r < seq; ++r) {
    SeriesFrame f;
    f.ts = static_cast<double>(r) * model.dt;
    f.values.assign(window.data.begin() + static_cast<std::ptrdiff_t>(r * window.cols),
                    window.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * window.cols));
    s.frames.push_back(std::move(f));
  }
  SequenceBatch b = make_sequences(s, static_cast<int>(seq), model.scaling);
  const double err = reconstruction_errors(model, b).front();
  return {err, err > model.theta};
}

std::vector<ScoredWindow> score(const PinnModel& model, const Series& series,
                                std::vector<std::string>* warnings) {
  SequenceBatch b = make_sequences(series, model.hyper.seq_len, model.scaling);
  if (b.clamped > 0 && warnings != nullptr) {
    warnings->push_back(std::to_string(b.clamped) +
                        " values outside the fitted range were clamped");
  }
  const auto errors = reconstruction_errors(model, b);
  std::vector<ScoredWindow> out;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    out.push_back({b.start_ts[i], b.end_ts[i], errors[i], errors[i] > model.theta});
  }
  return out;
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw Error(ErrorCode::insufficient_data, "percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(pct, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(values.size() - 1, lo + 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::string pinn_to_json(const PinnModel& m) {
  ojson j;
  j["schema"] = "bridge-pinn/1";
  const auto& h = m.hyper;
  j["hyper"] = {{"seq_len", h.seq_len},
                {"heads", h.heads},
                {"layers", h.layers},
                {"d_k", h.d_k},
                {"d_model", h.d_model},
                {"ff_hidden", h.ff_hidden},
                {"latent", h.latent},
                {"omega", h.omega},
                {"alpha", h.weights.alpha},
                {"beta", h.weights.beta},
                {"gamma", h.weights.gamma},
                {"learning_rate", h.learning_rate},
                {"epochs", h.epochs},
                {"batch_size", h.batch_size},
                {"holdout", h.holdout},
                {"percentile", h.percentile},
                {"seed", h.seed}};
  j["features"] = m.features;
  j["dt"] = m.dt;
  j["theta"] = m.theta;
  j["scaling"] = {{"names", m.scaling.names}, {"min", m.scaling.min}, {"max", m.scaling.max}};
  ojson hist = ojson::array();
  for (const auto& e : m.history) {
    hist.push_back({{"epoch", e.epoch},
                    {"total", e.objective.total},
                    {"mse", e.objective.mse},
                    {"kl", e.objective.kl},
                    {"pde", e.objective.pde},
                    {"sampled_total", e.sampled_total}});
  }
  j["history"] = hist;
  ojson params = ojson::array();
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const auto& v = m.params[i]->value;
    params.push_back({{"name", m.param_names[i]}, {"rows", v.rows}, {"cols", v.cols}, {"data", v.data}});
  }
  j["params"] = params;
  return j.dump();
}

PinnModel pinn_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("model json: ") + e.what());
  }
  if (j.value("schema", std::string()) != "bridge-pinn/1") {
    throw Error(ErrorCode::parse, "model schema is not bridge-pinn/1");
  }
  try {
    const auto& jh = j.at("hyper");
    PinnHyper h;
    h.seq_len = jh.at("seq_len");
    h.heads = jh.at("heads");
    h.layers = jh.at("layers");
    h.d_k = jh.at("d_k");
    h.d_model = jh.at("d_model");
    h.ff_hidden = jh.at("ff_hidden");
    h.latent = jh.at("latent");
    h.omega = jh.at("omega");
    h.weights.alpha = jh.at("alpha");
    h.weights.beta = jh.at("beta");
    h.weights.gamma = jh.at("gamma");
    h.learning_rate = jh.at("learning_rate");
    h.epochs = jh.at("epochs");
    h.batch_size = jh.at("batch_size");
    h.holdout = jh.at("holdout");
    h.percentile = jh.at("percentile");
    h.seed = jh.at("seed");
    FeatureScaling s;
    s.names = j.at("scaling").at("names").get<std::vector<std::string>>();
    s.min = j.at("scaling").at("min").get<std::vector<double>>();
    s.max = j.at("scaling").at("max").get<std::vector<double>>();
    const std::size_t F = j.at("features");
    if (s.names.size() != F || s.min.size() != F || s.max.size() != F) {
      throw Error(ErrorCode::parse, "scaling metadata does not match the feature count");
    }
    PinnModel m = init_model(h, F, s, j.at("dt"));
    m.theta = j.at("theta");
    const auto& jp = j.at("params");
    if (jp.size() != m.params.size()) throw Error(ErrorCode::parse, "parameter count mismatch");
    for (std::size_t i = 0; i < jp.size(); ++i) {
      auto& v = m.params[i]->value;
      if (jp[i].at("name") != m.param_names[i] || jp[i].at("rows") != v.rows ||
          jp[i].at("cols") != v.cols) {
        throw Error(ErrorCode::parse, "parameter '" + m.param_names[i] + "' does not match");
      }
      v.data = jp[i].at("data").get<std::vector<double>>();
      if (v.data.size() != v.rows * v.cols) throw Error(ErrorCode::parse, "parameter size mismatch");
      for (double x : v.data) {
        if (!std::isfinite(x)) throw Error(ErrorCode::numeric, "non-finite parameter in model file");
      }
    }
    for (const auto& e : j.value("history", nlohmann::json::array())) {
      EpochLoss el;
      el.epoch = e.at("epoch");
      el.objective = {e.at("total"), e.at("mse"), e.at("kl"), e.at("pde")};
      el.sampled_total = e.at("sampled_total");
      m.history.push_back(el);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("model json: ") + e.what());
  }
}

void save_pinn(const std::string& path, const PinnModel& model) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
  out << pinn_to_json(model) << '\n';
}

PinnModel load_pinn(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return pinn_from_json(ss.str());
}

}  // namespace bridge
