#include "ptaco/nn/layers.hpp"

#include <cmath>

#include "ptaco/error.hpp"

namespace ptaco::nn {

SequenceMask SequenceMask::from_lengths(std::vector<std::size_t> lengths, std::size_t length) {
  SequenceMask m;
  m.length_ = length;
  m.values_.assign(lengths.size() * length, 0.0);
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    if (lengths[b] > length) throw ShapeError("sequence length exceeds padded extent");
    for (std::size_t t = 0; t < lengths[b]; ++t) m.values_[b * length + t] = 1.0;
  }
  m.lengths_ = std::move(lengths);
  return m;
}

SequenceMask SequenceMask::all_valid(std::size_t batch, std::size_t length) {
  return from_lengths(std::vector<std::size_t>(batch, length), length);
}

std::size_t SequenceMask::total() const {
  std::size_t n = 0;
  for (std::size_t l : lengths_) n += l;
  return n;
}

Tensor SequenceMask::column() const {
  return Tensor::from_vector({batch(), length_, 1}, values_);
}

Tensor SequenceMask::key_bias() const {
  std::vector<double> bias(values_.size());
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] = values_[i] != 0.0 ? 0.0 : -1e9;
  return Tensor::from_vector({batch(), 1, 1, length_}, std::move(bias));
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
               Rng& rng, bool zero_init, bool use_bias)
    : weight_(store.create(name + "/weight", {in, out},
                           zero_init ? Init::kZeros : Init::kGlorotUniform, rng)) {
  if (use_bias) bias_ = store.create(name + "/bias", {out}, Init::kZeros, rng);
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight_);
  return bias_.defined() ? add(y, bias_) : y;
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, std::size_t d, Rng& rng)
    : gain_(store.create(name + "/gain", {d}, Init::kOnes, rng)),
      bias_(store.create(name + "/bias", {d}, Init::kZeros, rng)) {}

FeedForward::FeedForward(ParameterStore& store, const std::string& name, std::size_t d, Rng& rng)
    : expand_(store, name + "/ff1", d, 4 * d, rng), contract_(store, name + "/ff2", 4 * d, d, rng) {}

Tensor FeedForward::operator()(const Tensor& x, double dropout_rate, const Context& ctx) const {
  Tensor h = relu(expand_(x));
  if (ctx.training) h = dropout(h, dropout_rate, true, *ctx.rng);
  return contract_(h);
}

Tensor attend(const Tensor& query, const Tensor& key, const Tensor& value, const Tensor& key_bias,
              Tensor* weights) {
  const std::size_t r = key.rank();
  std::vector<std::size_t> perm(r);
  for (std::size_t i = 0; i < r; ++i) perm[i] = i;
  std::swap(perm[r - 1], perm[r - 2]);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(query.dim(-1)));
  Tensor scores = add(scale(matmul(query, permute(key, perm)), inv_sqrt), key_bias);
  Tensor probs = softmax(scores, -1);
  if (weights) *weights = probs;
  return matmul(probs, value);
}

Tensor sinusoidal_embedding(std::span<const double> positions, std::size_t d) {
  if (d == 0 || d % 2 != 0) throw ValueError("sinusoidal embedding needs an even width, got " + std::to_string(d));
  std::vector<double> out(positions.size() * d);
  for (std::size_t p = 0; p < positions.size(); ++p) {
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d));
      out[p * d + 2 * i] = std::sin(positions[p] * freq);
      out[p * d + 2 * i + 1] = std::cos(positions[p] * freq);
    }
  }
  return Tensor::from_vector({positions.size(), d}, std::move(out));
}

LstmCell::LstmCell(ParameterStore& store, const std::string& name, std::size_t input,
                   std::size_t hidden, Rng& rng)
    : input_(store, name + "/input", input, 4 * hidden, rng),
      recurrent_(store.create(name + "/recurrent", {hidden, 4 * hidden}, Init::kGlorotUniform, rng)),
      hidden_(hidden) {}

LstmCell::State LstmCell::initial(std::size_t batch) const {
  return {Tensor::zeros({batch, hidden_}), Tensor::zeros({batch, hidden_})};
}

LstmCell::State LstmCell::step(const Tensor& x, const State& state) const {
  Tensor gates = add(input_(x), matmul(state.h, recurrent_));
  Tensor i = sigmoid(slice(gates, -1, 0, hidden_));
  Tensor f = sigmoid(slice(gates, -1, hidden_, hidden_));
  Tensor g = tanh(slice(gates, -1, 2 * hidden_, hidden_));
  Tensor o = sigmoid(slice(gates, -1, 3 * hidden_, hidden_));
  Tensor c = add(mul(f, state.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

}  // namespace ptaco::nn
