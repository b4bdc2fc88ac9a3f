#pragma once
// Decoder-only inference timing and multiply-add counts.

#include <cstdint>
#include <string>
#include <vector>

#include "ptaco/model/decoder.hpp"

namespace ptaco::bench {

enum class DecoderKind { kLConv, kTransformer, kArSim };

DecoderKind parse_decoder(const std::string& name);
std::string decoder_name(DecoderKind kind);

struct BenchRow {
  DecoderKind decoder = DecoderKind::kLConv;
  std::size_t frames = 0;
  std::size_t repeats = 0;
  double mean_ms = 0.0;
  double stddev_ms = 0.0;  // sample standard deviation; 0 with one repeat
  std::uint64_t macs = 0;  // per forward pass
};

// Times `repeats` forward passes of one utterance of `frames` frames through
// a freshly initialized decoder built from `config` (kind taken from
// `decoder`). Weights and inputs depend only on `seed`.
BenchRow run(DecoderKind decoder, std::size_t frames, std::size_t repeats,
             const model::DecoderConfig& config, std::uint64_t seed = 1);

// Multiply-adds of one forward pass, without timing.
std::uint64_t count_macs(DecoderKind decoder, std::size_t frames, const model::DecoderConfig& config);

std::string csv_header();
std::string csv_row(const BenchRow& row);

}  // namespace ptaco::bench
