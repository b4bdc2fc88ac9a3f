#include "ptaco/parameter.hpp"

#include <cmath>

#include "ptaco/error.hpp"

namespace ptaco {

Tensor ParameterStore::create(const std::string& name, const Shape& shape, Init init, Rng& rng,
                              double scale) {
  if (contains(name)) throw ValueError("duplicate parameter name '" + name + "'");
  const std::size_t n = shape_numel(shape);
  std::vector<double> values(n, 0.0);
  switch (init) {
    case Init::kZeros:
      break;
    case Init::kOnes:
      std::fill(values.begin(), values.end(), 1.0);
      break;
    case Init::kGlorotUniform: {
      // Last axis is fan-out; everything before it is fan-in, except that
      // a leading kernel-width axis of a conv weight counts toward both.
      std::size_t fan_out = shape.back();
      std::size_t fan_in = n / fan_out;
      if (shape.size() == 3) fan_out *= shape[0];
      const double limit = scale * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (double& v : values) v = rng.uniform(-limit, limit);
      break;
    }
    case Init::kNormal:
      for (double& v : values) v = rng.normal(0.0, scale);
      break;
  }
  apply_precision(values);
  Tensor t = Tensor::from_vector(shape, std::move(values), true);
  index_.emplace(name, params_.size());
  params_.push_back({name, t, true});
  return t;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValueError("unknown parameter '" + name + "'");
  return params_[it->second];
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValueError("unknown parameter '" + name + "'");
  return params_[it->second];
}

std::vector<Parameter> ParameterStore::with_prefix(const std::string& prefix) const {
  std::vector<Parameter> out;
  for (const Parameter& p : params_) {
    if (p.name.compare(0, prefix.size(), prefix) == 0) out.push_back(p);
  }
  return out;
}

void ParameterStore::zero_grad() {
  for (Parameter& p : params_) p.tensor.zero_grad();
}

std::size_t ParameterStore::total_size() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.tensor.numel();
  return n;
}

}  // namespace ptaco
