#include "ptaco/train/optim.hpp"

#include <cmath>

#include "ptaco/error.hpp"

namespace ptaco::train {

double LrSchedule::operator()(std::size_t step) const {
  const auto s = static_cast<double>(step);
  if (step <= warmup_steps) {
    if (warmup_steps == 0) return 1.0;
    return warmup_start + (1.0 - warmup_start) * s / static_cast<double>(warmup_steps);
  }
  if (step <= decay_start) return 1.0;
  if (step >= decay_end) return floor;
  const double frac = (s - static_cast<double>(decay_start)) /
                      static_cast<double>(decay_end - decay_start);
  return std::exp(std::log(floor) * frac);
}

double KlSchedule::operator()(Variant variant, std::size_t step) const {
  switch (variant) {
    case Variant::kNoVae:
      return 0.0;
    case Variant::kGlobal:
      return global_beta;
    case Variant::kFine:
      if (step <= start) return 0.0;
      if (step >= end) return final;
      return final * static_cast<double>(step - start) / static_cast<double>(end - start);
  }
  return 0.0;
}

double global_grad_norm(const std::vector<Parameter>& params) {
  double sq = 0.0;
  for (const Parameter& p : params) {
    if (!p.trainable) continue;
    for (double g : p.tensor.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_global_norm(std::vector<Parameter>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (Parameter& p : params) {
      if (!p.trainable || !p.tensor.has_grad()) continue;
      for (double& g : p.tensor.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

void Nesterov::step(std::vector<Parameter>& params, double lr) {
  for (Parameter& p : params) {
    if (!p.trainable || !p.tensor.has_grad()) continue;
    auto it = velocity_.find(p.name);
    if (it == velocity_.end()) {
      it = velocity_.emplace(p.name, std::vector<double>(p.tensor.numel(), 0.0)).first;
      order_.push_back(p.name);
    }
    std::vector<double>& v = it->second;
    const auto g = p.tensor.grad();
    auto w = p.tensor.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum_ * v[i] + g[i];
      w[i] -= lr * (g[i] + momentum_ * v[i]);
    }
    apply_precision(v);
    apply_precision(w);
  }
}

std::vector<NamedTensor> Nesterov::state(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  for (const std::string& name : order_) {
    const auto& v = velocity_.at(name);
    out.push_back({prefix + name, Tensor::from_vector({v.size()}, v)});
  }
  return out;
}

void Nesterov::load_state(const std::vector<NamedTensor>& records, const std::string& prefix) {
  velocity_.clear();
  order_.clear();
  for (const NamedTensor& r : records) {
    if (r.name.rfind(prefix, 0) != 0) continue;
    const std::string name = r.name.substr(prefix.size());
    velocity_[name] = std::vector<double>(r.tensor.values().begin(), r.tensor.values().end());
    order_.push_back(name);
  }
}

}  // namespace ptaco::train
