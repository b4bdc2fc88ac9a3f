#include "ptaco/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>

#include "ptaco/error.hpp"
#include "ptaco/opcount.hpp"

namespace ptaco::bench {

namespace {

std::function<Tensor()> make_pass(DecoderKind kind, std::size_t frames, const model::DecoderConfig& config,
                                  std::uint64_t seed) {
  auto store = std::make_shared<ParameterStore>();
  Rng rng(seed);
  std::vector<double> x(frames * config.width);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  const Tensor input = Tensor::from_vector({1, frames, config.width}, std::move(x));
  if (kind == DecoderKind::kArSim) {
    auto dec = std::make_shared<model::ArSimDecoder>(*store, "ar", config, rng);
    return [store, dec, input] { return (*dec)(input); };
  }
  model::DecoderConfig c = config;
  c.kind = kind == DecoderKind::kLConv ? nn::BlockKind::kLConv : nn::BlockKind::kTransformer;
  auto dec = std::make_shared<model::SpecDecoder>(*store, "decoder", c, rng);
  const auto mask = nn::SequenceMask::all_valid(1, frames);
  return [store, dec, input, mask] {
    NoGradGuard no_grad;
    return (*dec)(input, mask, {}).final();
  };
}

}  // namespace

DecoderKind parse_decoder(const std::string& name) {
  if (name == "lconv") return DecoderKind::kLConv;
  if (name == "transformer") return DecoderKind::kTransformer;
  if (name == "ar-sim") return DecoderKind::kArSim;
  throw ValueError("unknown decoder '" + name + "' (expected lconv, transformer or ar-sim)");
}

std::string decoder_name(DecoderKind kind) {
  switch (kind) {
    case DecoderKind::kLConv: return "lconv";
    case DecoderKind::kTransformer: return "transformer";
    case DecoderKind::kArSim: return "ar-sim";
  }
  return "";
}

std::uint64_t count_macs(DecoderKind decoder, std::size_t frames, const model::DecoderConfig& config) {
  const auto pass = make_pass(decoder, frames, config, 1);
  opcount::reset();
  pass();
  return opcount::macs();
}

BenchRow run(DecoderKind decoder, std::size_t frames, std::size_t repeats,
             const model::DecoderConfig& config, std::uint64_t seed) {
  if (frames == 0 || repeats == 0) throw ValueError("frames and repeats must be positive");
  const auto pass = make_pass(decoder, frames, config, seed);
  BenchRow row;
  row.decoder = decoder;
  row.frames = frames;
  row.repeats = repeats;
  std::vector<double> ms;
  for (std::size_t r = 0; r < repeats; ++r) {
    opcount::reset();
    const auto start = std::chrono::steady_clock::now();
    pass();
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    row.macs = opcount::macs();
  }
  for (double v : ms) row.mean_ms += v;
  row.mean_ms /= static_cast<double>(repeats);
  if (repeats > 1) {
    double ss = 0.0;
    for (double v : ms) ss += (v - row.mean_ms) * (v - row.mean_ms);
    row.stddev_ms = std::sqrt(ss / static_cast<double>(repeats - 1));
  }
  return row;
}

std::string csv_header() { return "decoder,frames,repeats,mean_ms,stddev_ms,macs"; }

std::string csv_row(const BenchRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s,%zu,%zu,%.3f,%.3f,%llu", decoder_name(row.decoder).c_str(), row.frames,
                row.repeats, row.mean_ms, row.stddev_ms, static_cast<unsigned long long>(row.macs));
  return buf;
}

}  // namespace ptaco::bench
