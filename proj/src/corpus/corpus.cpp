#include "ptaco/corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ptaco/binary_io.hpp"
#include "ptaco/error.hpp"
#include "ptaco/rng.hpp"

namespace ptaco::corpus {

namespace {

constexpr char kMagic[] = "PTACOCRP";
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kRegularPhonemes = 24;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double unit_hash(std::initializer_list<std::int64_t> keys) {
  std::uint64_t h = 0x51ed270b27a3c0f1ull;
  for (std::int64_t k : keys) h = mix(h ^ static_cast<std::uint64_t>(k + 1000));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double bump(double x, double center, double width) {
  const double z = (x - center) / width;
  return std::exp(-0.5 * z * z);
}

}  // namespace

Inventory::Inventory(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i].empty()) throw ValueError("empty symbol at line " + std::to_string(i + 1));
    if (!ids_.emplace(symbols_[i], static_cast<std::int64_t>(i)).second) {
      throw ValueError("duplicate symbol '" + symbols_[i] + "'");
    }
  }
  if (!ids_.count("sil")) throw ValueError("inventory has no 'sil' symbol");
}

Inventory Inventory::standard() {
  return Inventory({"AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH", "EH", "ER",
                    "EY", "F", "G", "HH", "IH", "IY", "JH", "K", "L", "M", "N", "NG",
                    "sil", ",", ".", "?"});
}

const std::string& Inventory::symbol(std::int64_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size()) {
    throw ValueError("phoneme id " + std::to_string(id) + " out of range");
  }
  return symbols_[static_cast<std::size_t>(id)];
}

std::int64_t Inventory::id(const std::string& symbol) const {
  auto it = ids_.find(symbol);
  if (it == ids_.end()) throw ValueError("unknown phoneme symbol '" + symbol + "'");
  return it->second;
}

std::int64_t Inventory::silence() const { return ids_.at("sil"); }

bool Inventory::is_boundary(std::int64_t id) const { return id >= silence(); }

void write_inventory(const std::string& path, const Inventory& inv) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  for (const std::string& s : inv.symbols()) out << s << '\n';
}

Inventory read_inventory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "' for reading");
  std::vector<std::string> symbols;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    symbols.push_back(line);
  }
  return Inventory(std::move(symbols));
}

std::int64_t phoneme_frames(std::int64_t phoneme, std::int64_t speaker) {
  static constexpr double kSpeakerScale[] = {0.8, 1.0, 1.2, 1.4};
  const double base = 2.0 + static_cast<double>((phoneme * 7) % 5);
  const auto f = static_cast<std::int64_t>(std::lround(base * kSpeakerScale[speaker % 4]));
  return std::max<std::int64_t>(f, 1);
}

bool boundary_is_zero(std::int64_t token, std::int64_t prev, std::int64_t next, std::int64_t speaker,
                      double zero_fraction) {
  return unit_hash({token, prev, next, speaker}) < zero_fraction;
}

std::int64_t boundary_frames(std::int64_t token, std::int64_t speaker) {
  return 2 + (token + speaker) % 3;
}

std::vector<double> spectral_template(const Inventory& inv, std::int64_t token, std::int64_t speaker,
                                      std::size_t mel_bins) {
  std::vector<double> t(mel_bins);
  const double bins = static_cast<double>(mel_bins);
  const double unit = bins / 128.0;
  const double shift = static_cast<double>(speaker) * 3.0 * unit;
  if (!inv.is_boundary(token)) {
    const double c1 = (8.0 + static_cast<double>((token * 37) % 112)) * unit + shift;
    const double c2 = (8.0 + static_cast<double>((token * 71 + 13) % 112)) * unit + shift;
    const double w = (4.0 + 1.5 * static_cast<double>(token % 5)) * unit;
    const double gain = 0.8 + 0.05 * static_cast<double>(speaker % 4);
    for (std::size_t k = 0; k < mel_bins; ++k) {
      const double x = static_cast<double>(k);
      t[k] = 0.05 + gain * (0.9 * bump(x, c1, w) + 0.5 * bump(x, c2, 1.5 * w));
    }
  } else {
    const auto mark = static_cast<double>(token - inv.silence());
    for (std::size_t k = 0; k < mel_bins; ++k) {
      const double x = static_cast<double>(k);
      t[k] = 0.05 + (mark > 0 ? 0.15 * bump(x, (20.0 + 30.0 * mark) * unit, 6.0 * unit) : 0.0);
    }
  }
  for (double& v : t) v = std::clamp(v, 0.0, 1.0);
  return t;
}

std::vector<double> render_mel(const Inventory& inv, std::int64_t speaker,
                               const std::vector<std::int64_t>& tokens,
                               const std::vector<std::int64_t>& durations, std::size_t mel_bins) {
  if (tokens.size() != durations.size()) throw ShapeError("tokens and durations differ in length");
  std::vector<double> mel;
  std::vector<double> previous;
  const int sharpness = 1 + static_cast<int>(speaker % 2);
  for (std::size_t n = 0; n < tokens.size(); ++n) {
    const std::int64_t f = durations[n];
    if (f == 0) continue;
    const auto cur = spectral_template(inv, tokens[n], speaker, mel_bins);
    for (std::int64_t j = 0; j < f; ++j) {
      const double pos = (static_cast<double>(j) + 0.5) / static_cast<double>(f);
      const double env = 0.75 + 0.25 * std::pow(std::sin(std::numbers::pi * pos), sharpness);
      const double w = (!previous.empty() && j < 2) ? static_cast<double>(j + 1) / 3.0 : 1.0;
      for (std::size_t k = 0; k < mel_bins; ++k) {
        const double blended = w * cur[k] + (w < 1.0 ? (1.0 - w) * previous[k] : 0.0);
        mel.push_back(env * blended);
      }
    }
    previous = cur;
  }
  return mel;
}

std::vector<std::int64_t> rule_durations(const Inventory& inv, std::int64_t speaker,
                                         const std::vector<std::int64_t>& tokens,
                                         double zero_fraction) {
  std::vector<std::int64_t> d(tokens.size());
  for (std::size_t n = 0; n < tokens.size(); ++n) {
    const std::int64_t tok = tokens[n];
    if (!inv.is_boundary(tok)) {
      d[n] = phoneme_frames(tok, speaker);
      continue;
    }
    const std::int64_t prev = n > 0 ? tokens[n - 1] : -1;
    const std::int64_t next = n + 1 < tokens.size() ? tokens[n + 1] : -1;
    d[n] = boundary_is_zero(tok, prev, next, speaker, zero_fraction) ? 0 : boundary_frames(tok, speaker);
  }
  return d;
}

std::vector<Utterance> generate(const CorpusSpec& spec, std::size_t count) {
  if (spec.speakers == 0 || spec.min_words == 0 || spec.min_words > spec.max_words ||
      spec.min_word_phonemes == 0 || spec.min_word_phonemes > spec.max_word_phonemes ||
      spec.mel_bins == 0 || spec.frame_rate <= 0.0 || spec.zero_fraction < 0.0 ||
      spec.zero_fraction > 1.0) {
    throw ValueError("invalid corpus spec");
  }
  const Inventory inv = Inventory::standard();
  const std::int64_t sil = inv.silence();
  const auto punct_count = static_cast<std::int64_t>(inv.size()) - sil - 1;
  Rng rng(spec.seed);
  std::vector<Utterance> out;
  out.reserve(count);
  for (std::size_t u = 0; u < count; ++u) {
    Utterance utt;
    utt.speaker = rng.integer(0, static_cast<std::int64_t>(spec.speakers) - 1);
    const auto words = rng.integer(static_cast<std::int64_t>(spec.min_words),
                                   static_cast<std::int64_t>(spec.max_words));
    for (std::int64_t w = 0; w < words; ++w) {
      if (w > 0) utt.phonemes.push_back(sil);
      const auto len = rng.integer(static_cast<std::int64_t>(spec.min_word_phonemes),
                                   static_cast<std::int64_t>(spec.max_word_phonemes));
      for (std::int64_t p = 0; p < len; ++p) {
        utt.phonemes.push_back(rng.integer(0, static_cast<std::int64_t>(kRegularPhonemes) - 1));
      }
    }
    utt.phonemes.push_back(sil + 1 + rng.integer(0, punct_count - 1));
    utt.durations = rule_durations(inv, utt.speaker, utt.phonemes, spec.zero_fraction);
    utt.mel_bins = spec.mel_bins;
    utt.mel = render_mel(inv, utt.speaker, utt.phonemes, utt.durations, spec.mel_bins);
    out.push_back(std::move(utt));
  }
  return out;
}

std::vector<unsigned char> encode_corpus(const std::vector<Utterance>& corpus) {
  io::ByteWriter w;
  w.text(std::string_view(kMagic, 8));
  w.u8(kVersion);
  w.u32(static_cast<std::uint32_t>(corpus.size()));
  for (const Utterance& u : corpus) {
    w.u32(static_cast<std::uint32_t>(u.speaker));
    w.u32(static_cast<std::uint32_t>(u.phonemes.size()));
    for (std::size_t i = 0; i < u.phonemes.size(); ++i) {
      w.u32(static_cast<std::uint32_t>(u.phonemes[i]));
      w.u32(static_cast<std::uint32_t>(u.durations[i]));
    }
    w.u32(static_cast<std::uint32_t>(u.mel_bins));
    w.u32(static_cast<std::uint32_t>(u.frames()));
    for (double v : u.mel) w.f64(v);
  }
  return w.buffer();
}

std::vector<Utterance> decode_corpus(const std::vector<unsigned char>& bytes) {
  io::ByteReader r(bytes, "corpus");
  r.expect_bytes(std::string_view(kMagic, 8));
  const std::uint8_t version = r.u8();
  if (version != kVersion) throw FormatError("corpus: unsupported version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  r.need_items(count, 16);
  std::vector<Utterance> out(count);
  for (Utterance& u : out) {
    u.speaker = r.u32();
    const std::uint32_t tokens = r.u32();
    r.need_items(tokens, 8);
    u.phonemes.resize(tokens);
    u.durations.resize(tokens);
    std::int64_t total = 0;
    for (std::uint32_t i = 0; i < tokens; ++i) {
      u.phonemes[i] = r.u32();
      u.durations[i] = r.u32();
      total += u.durations[i];
    }
    u.mel_bins = r.u32();
    const std::uint32_t frames = r.u32();
    if (static_cast<std::int64_t>(frames) != total) {
      throw FormatError("corpus: durations sum to " + std::to_string(total) + " but " +
                        std::to_string(frames) + " frames are stored");
    }
    r.need_items(static_cast<std::uint64_t>(frames) * u.mel_bins, 8);
    u.mel.resize(static_cast<std::size_t>(frames) * u.mel_bins);
    for (double& v : u.mel) v = r.f64();
  }
  if (!r.at_end()) throw FormatError("corpus: trailing bytes");
  return out;
}

void write_corpus(const std::string& path, const std::vector<Utterance>& corpus) {
  io::write_file(path, encode_corpus(corpus));
}

std::vector<Utterance> read_corpus(const std::string& path) {
  return decode_corpus(io::read_file(path));
}

std::string dump_corpus(const std::vector<Utterance>& corpus, const Inventory& inv) {
  std::ostringstream out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Utterance& u = corpus[i];
    out << "utt " << i << " speaker " << u.speaker << " frames " << u.frames() << " :";
    for (std::size_t n = 0; n < u.phonemes.size(); ++n) {
      out << ' ' << inv.symbol(u.phonemes[n]) << ':' << u.durations[n];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace ptaco::corpus
