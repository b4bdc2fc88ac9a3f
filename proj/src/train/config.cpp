#include "ptaco/train/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "ptaco/error.hpp"

namespace ptaco::train {

namespace {

struct Binding {
  ConfigKey key;
  std::function<void(RunConfig&, const std::string&)> set;  // throws std::invalid_argument
  std::function<std::string(const RunConfig&)> get;
};

std::size_t to_size(const std::string& s) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("expected a non-negative integer");
  return v;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("expected a number");
  }
  if (used != s.size()) throw std::invalid_argument("expected a number");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "on" || s == "true" || s == "1") return true;
  if (s == "off" || s == "false" || s == "0") return false;
  throw std::invalid_argument("expected on or off");
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

#define SIZE_KEY(name, field, help)                                                \
  Binding {                                                                        \
    {name, help}, [](RunConfig& c, const std::string& v) { c.field = to_size(v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }                 \
  }
#define REAL_KEY(name, field, help)                                                  \
  Binding {                                                                          \
    {name, help}, [](RunConfig& c, const std::string& v) { c.field = to_double(v); }, \
        [](const RunConfig& c) { return fmt(c.field); }                              \
  }

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> b = {
      Binding{{"variant", "novae | global | fine"},
              [](RunConfig& c, const std::string& v) {
                try {
                  c.model.variant = parse_variant(v);
                } catch (const Error& e) {
                  throw std::invalid_argument(e.what());
                }
              },
              [](const RunConfig& c) { return variant_name(c.model.variant); }},
      Binding{{"decoder", "lconv | transformer"},
              [](RunConfig& c, const std::string& v) {
                if (v == "lconv") {
                  c.model.decoder_kind = nn::BlockKind::kLConv;
                } else if (v == "transformer") {
                  c.model.decoder_kind = nn::BlockKind::kTransformer;
                } else {
                  throw std::invalid_argument("expected lconv or transformer");
                }
              },
              [](const RunConfig& c) {
                return std::string(c.model.decoder_kind == nn::BlockKind::kLConv ? "lconv" : "transformer");
              }},
      Binding{{"iterative_loss", "on: loss over every decoder block; off: last block only"},
              [](RunConfig& c, const std::string& v) { c.model.iterative_loss = to_bool(v); },
              [](const RunConfig& c) { return std::string(c.model.iterative_loss ? "on" : "off"); }},
      SIZE_KEY("vocab", model.vocab, "phoneme inventory size"),
      SIZE_KEY("speakers", model.speakers, "speaker count"),
      SIZE_KEY("mel_bins", model.mel_bins, "spectrogram bins K"),
      REAL_KEY("frame_rate", model.frame_rate, "frames per second"),
      SIZE_KEY("d_model", model.d_model, "encoder width"),
      SIZE_KEY("encoder_conv_blocks", model.encoder_conv_blocks, "encoder convolution blocks"),
      SIZE_KEY("encoder_conv_kernel", model.encoder_conv_kernel, "encoder convolution width"),
      SIZE_KEY("encoder_blocks", model.encoder_blocks, "encoder transformer blocks"),
      SIZE_KEY("encoder_heads", model.encoder_heads, "encoder attention heads"),
      SIZE_KEY("speaker_dim", model.speaker_dim, "speaker embedding width"),
      SIZE_KEY("latent_dim", model.latent_dim, "VAE latent width"),
      SIZE_KEY("latent_proj", model.latent_proj, "projected latent width"),
      SIZE_KEY("vae_width", model.vae_width, "global posterior width"),
      SIZE_KEY("vae_heads", model.vae_heads, "posterior lightweight-conv heads"),
      SIZE_KEY("vae_kernel", model.vae_kernel, "posterior lightweight-conv width"),
      SIZE_KEY("vae_plain_blocks", model.vae_plain_blocks, "global posterior blocks before downsampling"),
      SIZE_KEY("vae_strided_blocks", model.vae_strided_blocks, "global posterior stride-2 stages"),
      SIZE_KEY("fine_blocks", model.fine_blocks, "phoneme posterior blocks"),
      SIZE_KEY("fine_position_dim", model.fine_position_dim, "phoneme posterior positional width"),
      SIZE_KEY("prior_hidden", model.prior_hidden, "prior LSTM hidden size"),
      SIZE_KEY("duration_blocks", model.duration_blocks, "duration decoder blocks"),
      SIZE_KEY("duration_heads", model.duration_heads, "duration decoder heads"),
      SIZE_KEY("duration_kernel", model.duration_kernel, "duration decoder kernel width"),
      SIZE_KEY("decoder_blocks", model.decoder_blocks, "spectrogram decoder blocks"),
      SIZE_KEY("decoder_heads", model.decoder_heads, "spectrogram decoder heads"),
      SIZE_KEY("decoder_kernel", model.decoder_kernel, "spectrogram decoder kernel width"),
      REAL_KEY("dropout", model.dropout, "dropout rate"),
      Binding{{"seed", "run seed"},
              [](RunConfig& c, const std::string& v) { c.train.seed = to_size(v); },
              [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      SIZE_KEY("batch_size", train.batch_size, "utterances per step"),
      SIZE_KEY("total_steps", train.total_steps, "training steps"),
      REAL_KEY("base_lr", train.base_lr, "learning rate before the schedule multiplier"),
      REAL_KEY("momentum", train.momentum, "Nesterov momentum"),
      REAL_KEY("clip_norm", train.clip_norm, "global gradient norm limit"),
      REAL_KEY("lambda_dur", train.lambda_dur, "duration loss weight"),
      REAL_KEY("warmup_start", train.lr.warmup_start, "lr multiplier at step 0"),
      SIZE_KEY("warmup_steps", train.lr.warmup_steps, "end of linear warmup"),
      SIZE_KEY("decay_start", train.lr.decay_start, "start of exponential decay"),
      SIZE_KEY("decay_end", train.lr.decay_end, "end of exponential decay"),
      REAL_KEY("lr_floor", train.lr.floor, "lr multiplier after decay"),
      SIZE_KEY("beta_start_step", train.kl.start, "fine variant: KL weight ramp start"),
      SIZE_KEY("beta_end_step", train.kl.end, "fine variant: KL weight ramp end"),
      REAL_KEY("beta_final", train.kl.final, "fine variant: KL weight after the ramp"),
      REAL_KEY("global_beta", train.kl.global_beta, "global variant: constant KL weight"),
      Binding{{"precision", "standard | high"},
              [](RunConfig& c, const std::string& v) {
                if (v == "standard") {
                  c.train.precision = Precision::kStandard;
                } else if (v == "high") {
                  c.train.precision = Precision::kHigh;
                } else {
                  throw std::invalid_argument("expected standard or high");
                }
              },
              [](const RunConfig& c) {
                return std::string(c.train.precision == Precision::kHigh ? "high" : "standard");
              }},
      SIZE_KEY("checkpoint_every", train.checkpoint_every, "steps between checkpoints, 0 for final only"),
      SIZE_KEY("log_every", train.log_every, "steps between metrics rows"),
  };
  return b;
}

#undef SIZE_KEY
#undef REAL_KEY

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const Binding& b : bindings()) k.push_back(b.key);
    return k;
  }();
  return keys;
}

std::vector<std::string> validate(const RunConfig& config) {
  std::vector<std::string> errors = config.model.validate();
  const TrainConfig& t = config.train;
  if (t.batch_size == 0) errors.push_back("batch_size must be positive");
  if (t.total_steps == 0) errors.push_back("total_steps must be positive");
  if (t.base_lr <= 0.0) errors.push_back("base_lr must be positive");
  if (t.momentum < 0.0 || t.momentum >= 1.0) errors.push_back("momentum must lie in [0,1)");
  if (t.clip_norm <= 0.0) errors.push_back("clip_norm must be positive");
  if (t.lambda_dur < 0.0) errors.push_back("lambda_dur must be non-negative");
  if (!(t.lr.warmup_steps <= t.lr.decay_start && t.lr.decay_start < t.lr.decay_end)) {
    errors.push_back("need warmup_steps <= decay_start < decay_end");
  }
  if (t.lr.floor <= 0.0 || t.lr.floor > 1.0) errors.push_back("lr_floor must lie in (0,1]");
  if (t.lr.warmup_start <= 0.0 || t.lr.warmup_start > 1.0) errors.push_back("warmup_start must lie in (0,1]");
  if (t.kl.start >= t.kl.end) errors.push_back("need beta_start_step < beta_end_step");
  if (t.kl.final < 0.0 || t.kl.global_beta < 0.0) errors.push_back("KL weights must be non-negative");
  return errors;
}

RunConfig parse_config(const std::string& text, const Overrides& overrides) {
  std::map<std::string, const Binding*> by_name;
  for (const Binding& b : bindings()) by_name[b.key.name] = &b;

  RunConfig config;
  std::vector<std::string> errors;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) {
      errors.push_back(where + "expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = by_name.find(key);
    if (it == by_name.end()) {
      errors.push_back(where + "unknown key '" + key + "'");
      continue;
    }
    if (!seen.insert(key).second) {
      errors.push_back(where + "duplicate key '" + key + "'");
      continue;
    }
    try {
      it->second->set(config, value);
    } catch (const std::invalid_argument& e) {
      errors.push_back(where + key + ": " + e.what() + ", got '" + value + "'");
    }
  }
  for (const auto& [key, value] : overrides) {
    auto it = by_name.find(key);
    if (it == by_name.end()) {
      errors.push_back("unknown key '" + key + "'");
      continue;
    }
    try {
      it->second->set(config, value);
    } catch (const std::invalid_argument& e) {
      errors.push_back(key + ": " + e.what() + ", got '" + value + "'");
    }
  }
  if (config.model.variant == Variant::kFine) {
    for (const char* key : {"beta_start_step", "beta_end_step", "beta_final"}) {
      if (!seen.count(key)) errors.push_back(std::string("fine variant requires '") + key + "'");
    }
  }
  for (const std::string& e : validate(config)) errors.push_back(e);
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ValueError(msg);
  }
  return config;
}

RunConfig load_config(const std::string& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ValueError("cannot open config '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return parse_config(s.str(), overrides);
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Binding& b : bindings()) out.emplace_back(b.key.name, b.get(config));
  return out;
}

std::string format_config(const RunConfig& config) {
  std::ostringstream out;
  for (const auto& [k, v] : config_entries(config)) out << k << " = " << v << '\n';
  return out.str();
}

}  // namespace ptaco::train
