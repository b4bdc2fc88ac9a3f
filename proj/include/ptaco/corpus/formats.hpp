#pragma once
// Duration and mel-spectrogram files.

#include <cstdint>
#include <string>
#include <vector>

namespace ptaco::corpus {

struct DurationRecord {
  std::vector<std::int64_t> phonemes;
  std::vector<std::int64_t> frames;
  bool operator==(const DurationRecord&) const = default;
};

// Text form: a "ptaco-durations 1" header line, then one line per record:
// token count followed by id:frames pairs.
std::string format_durations_text(const std::vector<DurationRecord>& records);
std::vector<DurationRecord> parse_durations_text(const std::string& text);

// Binary form: "PTACODUR", version byte, u32 record count, then per record
// u32 token count and that many (u32 id, u32 frames) pairs.
std::vector<unsigned char> encode_durations(const std::vector<DurationRecord>& records);
std::vector<DurationRecord> decode_durations(const std::vector<unsigned char>& bytes);

struct Mel {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> values;  // row-major [frames, bins]
  bool operator==(const Mel&) const = default;
};

// "PTACOMEL", version byte, u32 frames, u32 bins, f64 values.
std::vector<unsigned char> encode_mel(const Mel& mel);
Mel decode_mel(const std::vector<unsigned char>& bytes);
void write_mel(const std::string& path, const Mel& mel);
Mel read_mel(const std::string& path);
// One frame per line, bins separated by spaces.
std::string format_mel_text(const Mel& mel);

}  // namespace ptaco::corpus
