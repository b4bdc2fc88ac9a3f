#pragma once
// Deterministic synthetic phoneme -> spectrogram corpus.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ptaco::corpus {

struct Utterance {
  std::int64_t speaker = 0;
  std::vector<std::int64_t> phonemes;
  std::vector<std::int64_t> durations;  // frames per token
  std::size_t mel_bins = 0;
  std::vector<double> mel;              // [frames, mel_bins] row-major

  std::size_t frames() const { return mel_bins == 0 ? 0 : mel.size() / mel_bins; }
  bool operator==(const Utterance&) const = default;
};

// Symbols by id. Ids 0..phonemes-1 are regular phonemes, then "sil", then
// punctuation marks.
class Inventory {
 public:
  Inventory() = default;
  explicit Inventory(std::vector<std::string> symbols);
  // 24 phonemes, silence, and ", . ?".
  static Inventory standard();

  std::size_t size() const { return symbols_.size(); }
  const std::string& symbol(std::int64_t id) const;
  // Throws ValueError naming an unknown symbol.
  std::int64_t id(const std::string& symbol) const;
  bool is_boundary(std::int64_t id) const;  // silence or punctuation
  std::int64_t silence() const;
  const std::vector<std::string>& symbols() const { return symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::map<std::string, std::int64_t> ids_;
};

// Phoneme inventory file: one symbol per line, id = line number.
void write_inventory(const std::string& path, const Inventory& inv);
Inventory read_inventory(const std::string& path);

struct CorpusSpec {
  std::size_t speakers = 4;
  std::size_t min_words = 2;
  std::size_t max_words = 4;
  std::size_t min_word_phonemes = 1;
  std::size_t max_word_phonemes = 3;
  double frame_rate = 80.0;
  std::size_t mel_bins = 128;
  double zero_fraction = 0.4;  // share of silence/punctuation tokens with zero frames
  std::uint64_t seed = 1;
};

// Frames of a regular phoneme for a speaker; always >= 1.
std::int64_t phoneme_frames(std::int64_t phoneme, std::int64_t speaker);
// Whether the boundary token at a position is silent (zero frames). A pure
// function of (token, neighbours, speaker).
bool boundary_is_zero(std::int64_t token, std::int64_t prev, std::int64_t next, std::int64_t speaker,
                      double zero_fraction);
// Frames of a non-zero boundary token.
std::int64_t boundary_frames(std::int64_t token, std::int64_t speaker);

// Spectral template in [0,1] of length mel_bins.
std::vector<double> spectral_template(const Inventory& inv, std::int64_t token, std::int64_t speaker,
                                      std::size_t mel_bins);

// Renders the target spectrogram of a token sequence with given durations.
std::vector<double> render_mel(const Inventory& inv, std::int64_t speaker,
                               const std::vector<std::int64_t>& tokens,
                               const std::vector<std::int64_t>& durations, std::size_t mel_bins);

// Durations by the corpus rules for a token sequence.
std::vector<std::int64_t> rule_durations(const Inventory& inv, std::int64_t speaker,
                                         const std::vector<std::int64_t>& tokens,
                                         double zero_fraction);

std::vector<Utterance> generate(const CorpusSpec& spec, std::size_t count);

// Versioned binary container; see README for the layout.
std::vector<unsigned char> encode_corpus(const std::vector<Utterance>& corpus);
std::vector<Utterance> decode_corpus(const std::vector<unsigned char>& bytes);
void write_corpus(const std::string& path, const std::vector<Utterance>& corpus);
std::vector<Utterance> read_corpus(const std::string& path);

// Human-readable listing: one line per utterance with symbol:frames pairs.
std::string dump_corpus(const std::vector<Utterance>& corpus, const Inventory& inv);

}  // namespace ptaco::corpus
