#include "ptaco/corpus/formats.hpp"

#include <iomanip>
#include <sstream>

#include "ptaco/binary_io.hpp"
#include "ptaco/error.hpp"

namespace ptaco::corpus {

namespace {

constexpr char kDurMagic[] = "PTACODUR";
constexpr char kMelMagic[] = "PTACOMEL";
constexpr std::uint8_t kVersion = 1;
constexpr char kTextHeader[] = "ptaco-durations 1";

void check_version(io::ByteReader& r, const char* what) {
  const std::uint8_t v = r.u8();
  if (v != kVersion) throw FormatError(std::string(what) + ": unsupported version " + std::to_string(v));
}

}  // namespace

std::string format_durations_text(const std::vector<DurationRecord>& records) {
  std::ostringstream out;
  out << kTextHeader << '\n';
  for (const DurationRecord& r : records) {
    out << r.phonemes.size();
    for (std::size_t i = 0; i < r.phonemes.size(); ++i) out << ' ' << r.phonemes[i] << ':' << r.frames[i];
    out << '\n';
  }
  return out.str();
}

std::vector<DurationRecord> parse_durations_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTextHeader) {
    throw FormatError("durations: missing '" + std::string(kTextHeader) + "' header");
  }
  std::vector<DurationRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t count = 0;
    if (!(ls >> count)) throw FormatError("durations: line " + std::to_string(line_no) + " has no count");
    DurationRecord r;
    for (std::size_t i = 0; i < count; ++i) {
      std::int64_t id = 0, frames = 0;
      char colon = 0;
      if (!(ls >> id >> colon >> frames) || colon != ':' || id < 0 || frames < 0) {
        throw FormatError("durations: bad pair " + std::to_string(i) + " on line " + std::to_string(line_no));
      }
      r.phonemes.push_back(id);
      r.frames.push_back(frames);
    }
    std::string extra;
    if (ls >> extra) throw FormatError("durations: extra fields on line " + std::to_string(line_no));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<unsigned char> encode_durations(const std::vector<DurationRecord>& records) {
  io::ByteWriter w;
  w.text(std::string_view(kDurMagic, 8));
  w.u8(kVersion);
  w.u32(static_cast<std::uint32_t>(records.size()));
  for (const DurationRecord& r : records) {
    w.u32(static_cast<std::uint32_t>(r.phonemes.size()));
    for (std::size_t i = 0; i < r.phonemes.size(); ++i) {
      w.u32(static_cast<std::uint32_t>(r.phonemes[i]));
      w.u32(static_cast<std::uint32_t>(r.frames[i]));
    }
  }
  return w.buffer();
}

std::vector<DurationRecord> decode_durations(const std::vector<unsigned char>& bytes) {
  io::ByteReader r(bytes, "durations");
  r.expect_bytes(std::string_view(kDurMagic, 8));
  check_version(r, "durations");
  const std::uint32_t count = r.u32();
  r.need_items(count, 4);
  std::vector<DurationRecord> out(count);
  for (DurationRecord& rec : out) {
    const std::uint32_t n = r.u32();
    r.need_items(n, 8);
    for (std::uint32_t i = 0; i < n; ++i) {
      rec.phonemes.push_back(r.u32());
      rec.frames.push_back(r.u32());
    }
  }
  if (!r.at_end()) throw FormatError("durations: trailing bytes");
  return out;
}

std::vector<unsigned char> encode_mel(const Mel& mel) {
  if (mel.values.size() != mel.frames * mel.bins) throw ShapeError("mel value count mismatch");
  io::ByteWriter w;
  w.text(std::string_view(kMelMagic, 8));
  w.u8(kVersion);
  w.u32(static_cast<std::uint32_t>(mel.frames));
  w.u32(static_cast<std::uint32_t>(mel.bins));
  for (double v : mel.values) w.f64(v);
  return w.buffer();
}

Mel decode_mel(const std::vector<unsigned char>& bytes) {
  io::ByteReader r(bytes, "mel");
  r.expect_bytes(std::string_view(kMelMagic, 8));
  check_version(r, "mel");
  Mel mel;
  mel.frames = r.u32();
  mel.bins = r.u32();
  r.need_items(static_cast<std::uint64_t>(mel.frames) * mel.bins, 8);
  mel.values.resize(mel.frames * mel.bins);
  for (double& v : mel.values) v = r.f64();
  if (!r.at_end()) throw FormatError("mel: trailing bytes");
  return mel;
}

void write_mel(const std::string& path, const Mel& mel) { io::write_file(path, encode_mel(mel)); }

Mel read_mel(const std::string& path) { return decode_mel(io::read_file(path)); }

std::string format_mel_text(const Mel& mel) {
  std::ostringstream out;
  out << std::setprecision(9);
  for (std::size_t t = 0; t < mel.frames; ++t) {
    for (std::size_t k = 0; k < mel.bins; ++k) {
      if (k) out << ' ';
      out << mel.values[t * mel.bins + k];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace ptaco::corpus
