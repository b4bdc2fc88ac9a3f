#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "ptaco/rng.hpp"
#include "ptaco/tensor.hpp"

namespace ptaco {

struct Parameter {
  std::string name;  // hierarchical, '/'-separated
  Tensor tensor;
  bool trainable = true;
};

enum class Init { kZeros, kOnes, kGlorotUniform, kNormal };

// Owns every parameter of a model under a unique name, in creation order.
class ParameterStore {
 public:
  // `scale` is the stddev for kNormal and a multiplier for kGlorotUniform.
  Tensor create(const std::string& name, const Shape& shape, Init init, Rng& rng,
                double scale = 1.0);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Parameter& at(const std::string& name) const;
  Parameter& at(const std::string& name);

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  // Parameters whose name starts with `prefix`.
  std::vector<Parameter> with_prefix(const std::string& prefix) const;

  void zero_grad();
  std::size_t total_size() const;

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace ptaco
