#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ptaco/corpus/corpus.hpp"
#include "ptaco/corpus/formats.hpp"
#include "ptaco/error.hpp"

using namespace ptaco;
using namespace ptaco::corpus;

TEST_CASE("generation is deterministic per seed") {
  CorpusSpec spec;
  spec.mel_bins = 32;
  const auto a = encode_corpus(generate(spec, 20));
  CHECK(a == encode_corpus(generate(spec, 20)));
  spec.seed = 2;
  CHECK(a != encode_corpus(generate(spec, 20)));
}

TEST_CASE("utterances follow the corpus rules") {
  const Inventory inv = Inventory::standard();
  CHECK(inv.size() == 28);
  CorpusSpec spec;
  const auto corpus = generate(spec, 50);
  for (const Utterance& u : corpus) {
    REQUIRE(u.phonemes.size() == u.durations.size());
    const auto total = std::accumulate(u.durations.begin(), u.durations.end(), std::int64_t{0});
    CHECK(static_cast<std::size_t>(total) == u.frames());
    CHECK(u.mel.size() == u.frames() * spec.mel_bins);
    for (double v : u.mel) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(u.durations == rule_durations(inv, u.speaker, u.phonemes, spec.zero_fraction));
    for (std::size_t n = 0; n < u.phonemes.size(); ++n) {
      if (!inv.is_boundary(u.phonemes[n])) CHECK(u.durations[n] >= 1);
    }
    // Dropping zero-length tokens reproduces the target exactly.
    std::vector<std::int64_t> tokens, durations;
    for (std::size_t n = 0; n < u.phonemes.size(); ++n) {
      if (u.durations[n] == 0) continue;
      tokens.push_back(u.phonemes[n]);
      durations.push_back(u.durations[n]);
    }
    CHECK(render_mel(inv, u.speaker, tokens, durations, spec.mel_bins) == u.mel);
    CHECK(inv.is_boundary(u.phonemes.back()));
  }
}

TEST_CASE("templates are pairwise distinguishable") {
  const Inventory inv = Inventory::standard();
  std::vector<std::vector<double>> templates;
  for (std::int64_t s = 0; s < 4; ++s) {
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(inv.size()); ++t) {
      templates.push_back(spectral_template(inv, t, s, 128));
    }
  }
  double min_l1 = 1e9;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    for (std::size_t j = i + 1; j < templates.size(); ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < 128; ++k) d += std::fabs(templates[i][k] - templates[j][k]);
      // Boundary templates are shared across speakers.
      const auto ti = static_cast<std::int64_t>(i % inv.size()), tj = static_cast<std::int64_t>(j % inv.size());
      if (ti == tj && inv.is_boundary(ti)) continue;
      min_l1 = std::min(min_l1, d / 128.0);
    }
  }
  CHECK(min_l1 > 0.005);
}

TEST_CASE("realized zero-length fraction matches the configured one") {
  const Inventory inv = Inventory::standard();
  for (double fraction : {0.2, 0.4, 0.6}) {
    CorpusSpec spec;
    spec.mel_bins = 4;
    spec.zero_fraction = fraction;
    spec.seed = 11;
    std::size_t boundary = 0, zero = 0;
    for (const Utterance& u : generate(spec, 1500)) {
      for (std::size_t n = 0; n < u.phonemes.size(); ++n) {
        if (!inv.is_boundary(u.phonemes[n])) continue;
        ++boundary;
        zero += u.durations[n] == 0;
      }
    }
    CAPTURE(fraction);
    CHECK(boundary >= 1000);
    CHECK(std::fabs(static_cast<double>(zero) / static_cast<double>(boundary) - fraction) <= 0.05);
  }
}

TEST_CASE("corpus container round trips") {
  CHECK(decode_corpus(encode_corpus({})).empty());
  CorpusSpec spec;
  spec.mel_bins = 16;
  const auto corpus = generate(spec, 100);
  CHECK(decode_corpus(encode_corpus(corpus)) == corpus);
}

TEST_CASE("corrupted corpus bytes raise format errors") {
  CorpusSpec spec;
  spec.mel_bins = 8;
  const auto bytes = encode_corpus(generate(spec, 3));
  SUBCASE("oversized token count") {
    auto bad = bytes;
    bad[17] = 0xff;
    bad[18] = 0xff;
    bad[19] = 0xff;
    CHECK_THROWS_AS(decode_corpus(bad), FormatError);
  }
  SUBCASE("truncation") {
    for (std::size_t keep : {std::size_t{0}, std::size_t{5}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1}) {
      CHECK_THROWS_AS(decode_corpus(std::vector<unsigned char>(bytes.begin(), bytes.begin() + keep)), FormatError);
    }
  }
  SUBCASE("magic and version") {
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_corpus(bad), FormatError);
    bad = bytes;
    bad[8] = 99;
    CHECK_THROWS_WITH_AS(decode_corpus(bad), doctest::Contains("version"), FormatError);
  }
  SUBCASE("trailing bytes") {
    auto bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS(decode_corpus(bad), FormatError);
  }
}

TEST_CASE("duration files round trip in both forms") {
  const std::vector<DurationRecord> records = {{{1, 24, 3}, {4, 0, 2}}, {{}, {}}, {{26}, {0}}};
  CHECK(parse_durations_text(format_durations_text(records)) == records);
  CHECK(decode_durations(encode_durations(records)) == records);
  CHECK_THROWS_AS(parse_durations_text("ptaco-durations 2\n"), FormatError);
  auto bytes = encode_durations(records);
  bytes[8] = 7;
  CHECK_THROWS_AS(decode_durations(bytes), FormatError);
}

TEST_CASE("mel container round trips") {
  Mel mel{3, 2, {0.0, 1.0, 0.25, -0.5, 1e-300, 7.125}};
  CHECK(decode_mel(encode_mel(mel)) == mel);
  CHECK(decode_mel(encode_mel(Mel{})) == Mel{});
  CHECK(format_mel_text(mel).find('\n') != std::string::npos);
  auto bytes = encode_mel(mel);
  bytes.pop_back();
  CHECK_THROWS_AS(decode_mel(bytes), FormatError);
}

TEST_CASE("inventory lookups") {
  const Inventory inv = Inventory::standard();
  CHECK(inv.symbol(inv.id("sil")) == "sil");
  CHECK_THROWS_WITH_AS(inv.id("zz"), doctest::Contains("zz"), ValueError);
  CHECK(dump_corpus({}, inv).empty());
}
