#include "ptaco/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ptaco/error.hpp"
#include "ptaco/kinks.hpp"
#include "ptaco/rng.hpp"

namespace ptaco {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double evaluate(const std::function<Tensor()>& loss) {
  NoGradGuard no_grad;
  return loss().item();
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& loss, const std::vector<Parameter>& params,
                           const GradCheckOptions& options) {
  PrecisionGuard high(Precision::kHigh);

  const double first = evaluate(loss);
  const double second = evaluate(loss);
  if (first != second) {
    throw Error("grad_check: loss is not deterministic (" + std::to_string(first) + " vs " +
                std::to_string(second) + ")");
  }

  for (const Parameter& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
  loss().backward();

  GradCheckReport report;
  Rng picker(options.seed);
  for (const Parameter& p : params) {
    Tensor t = p.tensor;
    const std::size_t n = t.numel();
    std::vector<double> analytic(n, 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());

    std::vector<std::size_t> entries(n);
    std::iota(entries.begin(), entries.end(), 0);
    if (options.max_entries != 0 && n > options.max_entries) {
      for (std::size_t i = 0; i < options.max_entries; ++i) {
        const auto j = static_cast<std::size_t>(picker.integer(static_cast<std::int64_t>(i),
                                                               static_cast<std::int64_t>(n - 1)));
        std::swap(entries[i], entries[j]);
      }
      entries.resize(options.max_entries);
    }

    GradCheckEntry entry;
    entry.name = p.name;
    entry.checked = entries.size();
    auto values = t.mutable_values();
    for (std::size_t i : entries) {
      const double saved = values[i];
      values[i] = saved + options.step;
      const double plus = evaluate(loss);
      values[i] = saved - options.step;
      const double minus = evaluate(loss);
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double err = relative_error(analytic[i], numeric, options.floor);
      if (err > entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = i;
        entry.worst_analytic = analytic[i];
        entry.worst_numeric = numeric;
      }
    }
    entry.passed = entry.max_rel_error <= options.tolerance;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.passed = report.passed && entry.passed;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

std::size_t draw_away_from_kinks(const std::function<void(Rng&)>& draw,
                                 const std::function<Tensor()>& loss, Rng& rng, double margin,
                                 std::size_t max_attempts) {
  PrecisionGuard high(Precision::kHigh);
  for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
    draw(rng);
    kinks::start();
    evaluate(loss);
    if (kinks::stop() >= margin) return attempt;
  }
  throw Error("no draw kept relu/abs inputs " + std::to_string(margin) + " away from 0 in " +
              std::to_string(max_attempts) + " attempts");
}

}  // namespace ptaco
