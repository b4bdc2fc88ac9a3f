#pragma once
// Schedules, gradient clipping, and the momentum optimizer.

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "ptaco/checkpoint.hpp"
#include "ptaco/parameter.hpp"
#include "ptaco/train/losses.hpp"

namespace ptaco::train {

struct LrSchedule {
  double warmup_start = 0.1;
  std::size_t warmup_steps = 100;
  std::size_t decay_start = 200;
  std::size_t decay_end = 1000;
  double floor = 0.01;

  // Multiplier on the base learning rate: linear warmup_start -> 1 over
  // [0, warmup], 1 until decay_start, exponential 1 -> floor until
  // decay_end, floor afterwards.
  double operator()(std::size_t step) const;
};

struct KlSchedule {
  std::size_t start = 60;
  std::size_t end = 500;
  double final = 1.0;
  double global_beta = 1.0;

  // Fine variant: 0 before start, linear to `final` at end. Global variant:
  // constant global_beta. No-VAE: 0.
  double operator()(Variant variant, std::size_t step) const;
};

// Global L2 norm over the gradients of `params`.
double global_grad_norm(const std::vector<Parameter>& params);
// Rescales gradients so their global norm is at most max_norm; returns the
// norm before clipping.
double clip_global_norm(std::vector<Parameter>& params, double max_norm);

// v <- momentum * v + g;  p <- p - lr * (g + momentum * v)
class Nesterov {
 public:
  explicit Nesterov(double momentum = 0.99) : momentum_(momentum) {}
  void step(std::vector<Parameter>& params, double lr);
  double momentum() const { return momentum_; }

  // Velocities as checkpoint records named "<prefix><parameter name>".
  std::vector<NamedTensor> state(const std::string& prefix) const;
  void load_state(const std::vector<NamedTensor>& records, const std::string& prefix);

 private:
  double momentum_;
  std::unordered_map<std::string, std::vector<double>> velocity_;
  std::vector<std::string> order_;
};

}  // namespace ptaco::train
