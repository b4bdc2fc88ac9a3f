// ptaco: corpus generation, training, evaluation, synthesis, gradient
// checking and decoder benchmarks.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure,
// 3 check failure.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ptaco/bench.hpp"
#include "ptaco/checkpoint.hpp"
#include "ptaco/corpus/corpus.hpp"
#include "ptaco/corpus/formats.hpp"
#include "ptaco/error.hpp"
#include "ptaco/model/model.hpp"
#include "ptaco/suites.hpp"
#include "ptaco/train/config.hpp"
#include "ptaco/train/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace ptaco;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitCheck = 3;

// Raised for failed checks (gradcheck), mapped to exit code 3.
struct CheckFailure : Error {
  using Error::Error;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValueError("cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// An output directory must be new or empty unless --force is given.
void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) {
    throw ValueError("output '" + dir.string() + "' exists and is not a directory");
  }
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw ValueError("output directory '" + dir.string() + "' is not empty (use --force)");
  }
  fs::create_directories(dir);
}

struct Manifest {
  std::string command;
  json config = json::object();
  std::uint64_t seed = 0;
  std::string started = utc_now();
  json metrics = json::object();

  void write(const fs::path& dir) const {
    json j;
    j["format"] = "ptaco-manifest";
    j["version"] = 1;
    j["command"] = command;
    j["git_describe"] = PTACO_GIT_DESCRIBE;
    j["seed"] = seed;
    j["started"] = started;
    j["finished"] = utc_now();
    j["config"] = config;
    j["final_metrics"] = metrics;
    write_text(dir / "manifest.json", j.dump(2) + "\n");
  }
};

json config_json(const train::RunConfig& config) {
  json j = json::object();
  for (const auto& [k, v] : train::config_entries(config)) j[k] = v;
  return j;
}

std::vector<corpus::Utterance> load_corpus(const std::string& path) {
  const fs::path p = fs::is_directory(path) ? fs::path(path) / "corpus.bin" : fs::path(path);
  return corpus::read_corpus(p.string());
}

// ---- gen ------------------------------------------------------------------

corpus::CorpusSpec parse_corpus_spec(const std::string& text) {
  corpus::CorpusSpec spec;
  std::map<std::string, std::function<void(const std::string&)>> keys = {
      {"speakers", [&](const std::string& v) { spec.speakers = std::stoul(v); }},
      {"min_words", [&](const std::string& v) { spec.min_words = std::stoul(v); }},
      {"max_words", [&](const std::string& v) { spec.max_words = std::stoul(v); }},
      {"min_word_phonemes", [&](const std::string& v) { spec.min_word_phonemes = std::stoul(v); }},
      {"max_word_phonemes", [&](const std::string& v) { spec.max_word_phonemes = std::stoul(v); }},
      {"frame_rate", [&](const std::string& v) { spec.frame_rate = std::stod(v); }},
      {"mel_bins", [&](const std::string& v) { spec.mel_bins = std::stoul(v); }},
      {"zero_fraction", [&](const std::string& v) { spec.zero_fraction = std::stod(v); }},
      {"seed", [&](const std::string& v) { spec.seed = std::stoull(v); }},
  };
  std::vector<std::string> errors;
  std::istringstream in(text);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    if (trim(line).empty()) continue;
    const std::string where = "line " + std::to_string(n) + ": ";
    if (eq == std::string::npos) {
      errors.push_back(where + "expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    auto it = keys.find(key);
    if (it == keys.end()) {
      errors.push_back(where + "unknown key '" + key + "'");
      continue;
    }
    try {
      it->second(value);
    } catch (const std::exception&) {
      errors.push_back(where + "bad value for '" + key + "': '" + value + "'");
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid corpus spec:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ValueError(msg);
  }
  return spec;
}

json corpus_spec_json(const corpus::CorpusSpec& s) {
  return json{{"speakers", s.speakers},           {"min_words", s.min_words},
              {"max_words", s.max_words},         {"min_word_phonemes", s.min_word_phonemes},
              {"max_word_phonemes", s.max_word_phonemes}, {"frame_rate", s.frame_rate},
              {"mel_bins", s.mel_bins},           {"zero_fraction", s.zero_fraction},
              {"seed", s.seed}};
}

void cmd_gen(const std::string& spec_path, std::size_t count, std::optional<std::uint64_t> seed,
             const std::string& out, bool force) {
  if (count == 0) throw ValueError("--count must be at least 1");
  corpus::CorpusSpec spec = spec_path.empty() ? corpus::CorpusSpec{} : parse_corpus_spec(read_text(spec_path));
  if (seed) spec.seed = *seed;
  const fs::path dir(out);
  prepare_out_dir(dir, force);
  Manifest manifest{"gen"};
  manifest.config = corpus_spec_json(spec);
  manifest.config["count"] = count;
  manifest.seed = spec.seed;

  const auto utts = corpus::generate(spec, count);
  const corpus::Inventory inv = corpus::Inventory::standard();
  corpus::write_corpus((dir / "corpus.bin").string(), utts);
  write_text(dir / "corpus.txt", corpus::dump_corpus(utts, inv));
  std::vector<corpus::DurationRecord> records;
  std::size_t tokens = 0, zeros = 0, frames = 0;
  for (const auto& u : utts) {
    records.push_back({u.phonemes, u.durations});
    tokens += u.phonemes.size();
    for (auto d : u.durations) zeros += d == 0;
    frames += u.frames();
  }
  write_text(dir / "durations.txt", corpus::format_durations_text(records));
  corpus::write_inventory((dir / "inventory.txt").string(), inv);
  manifest.metrics = {{"utterances", utts.size()}, {"tokens", tokens}, {"zero_tokens", zeros},
                      {"frames", frames}};
  manifest.write(dir);
  std::cout << "wrote " << utts.size() << " utterances (" << frames << " frames) to " << dir.string() << "\n";
}

// ---- train ----------------------------------------------------------------

// Keeps the header and rows before `step` so a resumed run appends cleanly.
void truncate_metrics(const fs::path& path, std::size_t step) {
  std::vector<std::string> keep;
  {
    std::ifstream in(path);
    if (!in) throw ValueError("cannot resume: '" + path.string() + "' missing");
    std::string line;
    while (std::getline(in, line)) {
      if (keep.empty() || std::stoull(line.substr(0, line.find(','))) < step) keep.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

struct TrainArgs {
  std::string config, corpus, variant, decoder, iterative, out, resume;
  std::size_t stop_after = 0;
  bool force = false;
  bool eval = true;
};

void cmd_train(const TrainArgs& a) {
  train::Overrides overrides;
  if (!a.variant.empty()) overrides.emplace_back("variant", a.variant);
  if (!a.decoder.empty()) overrides.emplace_back("decoder", a.decoder);
  if (!a.iterative.empty()) overrides.emplace_back("iterative_loss", a.iterative);
  const train::RunConfig cfg = train::parse_config(a.config.empty() ? "" : read_text(a.config), overrides);

  const auto data = load_corpus(a.corpus);
  const fs::path dir(a.out);
  if (a.resume.empty()) prepare_out_dir(dir, a.force);
  model::TtsModel model(cfg.model, cfg.train.seed);
  train::Trainer trainer(model, cfg.train, data);

  Manifest manifest{"train"};
  manifest.config = config_json(cfg);
  manifest.seed = cfg.train.seed;
  write_text(dir / "config.txt", train::format_config(cfg));

  const fs::path metrics_path = dir / "metrics.csv";
  if (!a.resume.empty()) {
    trainer.resume(load_checkpoint(a.resume));
    truncate_metrics(metrics_path, trainer.current_step());
  } else {
    write_text(metrics_path, train::metrics_csv_header() + "\n");
  }
  std::ofstream csv(metrics_path, std::ios::app);

  json untrained;
  if (a.eval && trainer.current_step() == 0) {
    const auto r = train::evaluate(model, data, train::EvalMode::kTeacher);
    untrained = {{"spec_l1", r.spec_l1}, {"duration_mae", r.duration_mae},
                 {"nonzero_accuracy", r.nonzero_accuracy}};
  }

  const std::size_t total = cfg.train.total_steps;
  const std::size_t report = std::max<std::size_t>(1, total / 20);
  train::StepMetrics last;
  while (!trainer.done()) {
    last = trainer.step();
    const std::size_t done = trainer.current_step();
    if (last.step % cfg.train.log_every == 0 || done == total) csv << train::metrics_csv_row(last) << '\n';
    if (done % report == 0 || done == total) {
      std::fprintf(stderr, "step %zu/%zu loss %.6f spec %.6f dur %.6f kl %.6f\n", done, total, last.loss,
                   last.spec, last.duration, last.kl);
    }
    if (cfg.train.checkpoint_every && done % cfg.train.checkpoint_every == 0 && done != total) {
      save_checkpoint((dir / ("checkpoint-" + std::to_string(done) + ".ckpt")).string(), trainer.checkpoint());
    }
    if (a.stop_after && done >= a.stop_after) break;
  }
  csv.flush();
  save_checkpoint((dir / "checkpoint.ckpt").string(), trainer.checkpoint());

  manifest.metrics = {{"step", trainer.current_step()}, {"loss", last.loss}, {"spec", last.spec},
                      {"duration", last.duration},      {"kl", last.kl},     {"prior", last.prior}};
  if (!untrained.is_null()) manifest.metrics["untrained_teacher"] = untrained;
  if (a.eval && trainer.done()) {
    const auto r = train::evaluate(model, data, train::EvalMode::kTeacher);
    manifest.metrics["teacher"] = json::parse(train::format_eval_json(r));
    if (!untrained.is_null() && untrained["spec_l1"].get<double>() > 0.0) {
      manifest.metrics["spec_l1_ratio"] = r.spec_l1 / untrained["spec_l1"].get<double>();
    }
  }
  manifest.write(dir);
  std::cout << "trained " << trainer.current_step() << " steps; checkpoint in " << dir.string() << "\n";
}

// ---- checkpoint-based commands -----------------------------------------------

std::unique_ptr<model::TtsModel> load_model(const std::string& ckpt, const std::string& config) {
  const fs::path cfg_path = config.empty() ? fs::path(ckpt).parent_path() / "config.txt" : fs::path(config);
  const train::RunConfig cfg = train::parse_config(read_text(cfg_path));
  auto model = std::make_unique<model::TtsModel>(cfg.model, cfg.train.seed);
  restore(model->parameters(), load_checkpoint(ckpt));
  return model;
}

void cmd_synth(const std::string& ckpt, const std::string& config, const std::string& text,
               std::int64_t speaker, const std::string& out) {
  const auto model = load_model(ckpt, config);
  const corpus::Inventory inv = corpus::Inventory::standard();
  std::vector<std::int64_t> ids;
  std::istringstream in(text);
  for (std::string sym; in >> sym;) ids.push_back(inv.id(sym));
  if (ids.empty()) throw ValueError("--text has no symbols");
  if (speaker < 0 || static_cast<std::size_t>(speaker) >= model->config().speakers) {
    throw ValueError("speaker " + std::to_string(speaker) + " out of range");
  }
  const auto result = model->synthesize(ids, speaker);
  corpus::Mel mel{result.mel.dim(1), result.mel.dim(2),
                  std::vector<double>(result.mel.values().begin(), result.mel.values().end())};
  corpus::write_mel(out, mel);
  write_text(out + ".txt", corpus::format_mel_text(mel));
  std::ostringstream d;
  for (std::size_t i = 0; i < ids.size(); ++i) d << (i ? " " : "") << inv.symbol(ids[i]) << ':' << result.durations[i];
  std::cout << "frames " << mel.frames << "\ndurations " << d.str() << "\n";
}

void cmd_eval(const std::string& ckpt, const std::string& config, const std::string& corpus_path,
              const std::string& mode, const std::string& out, bool force) {
  const auto model = load_model(ckpt, config);
  const auto data = load_corpus(corpus_path);
  train::EvalMode m;
  if (mode == "teacher") {
    m = train::EvalMode::kTeacher;
  } else if (mode == "free-running") {
    m = train::EvalMode::kFreeRunning;
  } else {
    throw ValueError("--mode must be teacher or free-running");
  }
  const fs::path dir(out);
  prepare_out_dir(dir, force);
  const auto report = train::evaluate(*model, data, m);
  train::write_predictions(dir.string(), report);
  const std::string metrics = train::format_eval_json(report);
  write_text(dir / "metrics.json", metrics);
  Manifest manifest{"eval"};
  manifest.config = {{"checkpoint", ckpt}, {"corpus", corpus_path}, {"mode", mode}};
  manifest.seed = 0;
  manifest.metrics = json::parse(metrics);
  manifest.write(dir);
  std::cout << metrics;
}

// ---- bench -----------------------------------------------------------------

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void cmd_bench(const std::string& decoders, const std::string& frames, std::size_t repeats,
               const model::DecoderConfig& config, const std::string& out) {
  std::vector<bench::DecoderKind> kinds;
  for (const auto& d : split_list(decoders)) kinds.push_back(bench::parse_decoder(d));
  std::vector<std::size_t> lengths;
  for (const auto& f : split_list(frames)) {
    try {
      lengths.push_back(std::stoul(f));
    } catch (const std::exception&) {
      throw ValueError("bad frame count '" + f + "'");
    }
    if (lengths.back() == 0) throw ValueError("frame counts must be positive");
  }
  if (kinds.empty() || lengths.empty()) throw ValueError("--decoder and --frames must be non-empty");
  if (repeats == 0) throw ValueError("--repeats must be positive");
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw RuntimeFailure("cannot write '" + out + "'");
  }
  std::ostream& os = out.empty() ? std::cout : file;
  os << bench::csv_header() << '\n';
  for (auto kind : kinds) {
    for (std::size_t t : lengths) {
      os << bench::csv_row(bench::run(kind, t, repeats, config)) << std::endl;
    }
  }
}

// ---- gradcheck ---------------------------------------------------------------

void cmd_gradcheck(const std::string& module, std::size_t max_entries, const std::string& fault) {
  std::vector<std::string> modules;
  if (module == "all") {
    modules = suites::module_names();
  } else {
    for (const auto& m : split_list(module)) {
      if (std::find(suites::module_names().begin(), suites::module_names().end(), m) ==
          suites::module_names().end()) {
        throw ValueError("unknown module '" + m + "'");
      }
      modules.push_back(m);
    }
  }
  if (!fault.empty()) {
    const auto colon = fault.find(':');
    const double scale = colon == std::string::npos ? 1.5 : std::stod(fault.substr(colon + 1));
    set_backward_fault(fault.substr(0, colon), scale);
  }
  GradCheckOptions options;
  options.max_entries = max_entries;
  bool ok = true;
  std::printf("%-22s %7s %12s %6s %8s  %s\n", "module", "params", "max_rel_err", "draws", "seconds", "result");
  for (const auto& m : modules) {
    const auto r = suites::run(m, options);
    std::size_t checked = 0;
    const GradCheckEntry* worst = nullptr;
    for (const auto& e : r.report.entries) {
      checked += e.checked;
      if (!worst || e.max_rel_error > worst->max_rel_error) worst = &e;
    }
    std::printf("%-22s %7zu %12.3e %6zu %8.2f  %s\n", m.c_str(), checked, r.report.max_rel_error, r.draws,
                r.seconds, r.report.passed ? "PASS" : "FAIL");
    if (!r.report.passed && worst) {
      std::printf("    worst: %s[%zu] analytic %.9g numeric %.9g\n", worst->name.c_str(), worst->worst_index,
                  worst->worst_analytic, worst->worst_numeric);
    }
    ok = ok && r.report.passed;
  }
  clear_backward_fault();
  if (!ok) throw CheckFailure("gradient check failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel non-autoregressive text-to-spectrogram toolkit"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  std::string gen_spec, gen_out;
  std::size_t gen_count = 16;
  std::optional<std::uint64_t> gen_seed;
  bool gen_force = false;
  gen->add_option("--spec", gen_spec, "corpus spec file (key = value)")->check(CLI::ExistingFile);
  gen->add_option("--count", gen_count, "number of utterances")->capture_default_str();
  gen->add_option("--seed", gen_seed, "override the spec seed");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_flag("--force", gen_force, "write into a non-empty directory");

  auto* tr = app.add_subcommand("train", "train a model");
  TrainArgs ta;
  bool no_eval = false;
  tr->add_option("--config", ta.config, "run config file (key = value)")->check(CLI::ExistingFile);
  tr->add_option("--corpus", ta.corpus, "corpus file or directory")->required();
  tr->add_option("--variant", ta.variant, "novae | global | fine");
  tr->add_option("--decoder", ta.decoder, "lconv | transformer");
  tr->add_option("--iterative-loss", ta.iterative, "on | off");
  tr->add_option("--out", ta.out, "run directory")->required();
  tr->add_option("--resume", ta.resume, "checkpoint to resume from")->check(CLI::ExistingFile);
  tr->add_option("--stop-after", ta.stop_after, "stop once this step count is reached");
  tr->add_flag("--force", ta.force, "write into a non-empty directory");
  tr->add_flag("--no-eval", no_eval, "skip the teacher-duration evaluations");

  auto* syn = app.add_subcommand("synth", "synthesize a spectrogram from phoneme symbols");
  std::string syn_ckpt, syn_config, syn_text, syn_out;
  std::int64_t syn_speaker = 0;
  syn->add_option("--ckpt", syn_ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  syn->add_option("--config", syn_config, "config (default: config.txt next to the checkpoint)");
  syn->add_option("--text", syn_text, "space-separated phoneme symbols")->required();
  syn->add_option("--speaker", syn_speaker, "speaker id")->capture_default_str();
  syn->add_option("--out", syn_out, "output mel file; a text dump goes to <out>.txt")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
  std::string ev_ckpt, ev_config, ev_corpus, ev_mode = "teacher", ev_out;
  bool ev_force = false;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--config", ev_config, "config (default: config.txt next to the checkpoint)");
  ev->add_option("--corpus", ev_corpus, "corpus file or directory")->required();
  ev->add_option("--mode", ev_mode, "teacher | free-running")->capture_default_str();
  ev->add_option("--out", ev_out, "output directory")->required();
  ev->add_flag("--force", ev_force, "write into a non-empty directory");

  auto* be = app.add_subcommand("bench", "time decoder forward passes");
  std::string be_decoder = "lconv,transformer,ar-sim", be_frames = "200,400,800,1600", be_out;
  std::size_t be_repeats = 3;
  model::DecoderConfig be_cfg;
  be->add_option("--decoder", be_decoder, "comma list of lconv, transformer, ar-sim")->capture_default_str();
  be->add_option("--frames", be_frames, "comma list of frame counts")->capture_default_str();
  be->add_option("--repeats", be_repeats, "timed passes per row")->capture_default_str();
  be->add_option("--width", be_cfg.width, "decoder width")->capture_default_str();
  be->add_option("--blocks", be_cfg.blocks, "decoder blocks")->capture_default_str();
  be->add_option("--kernel", be_cfg.kernel, "lightweight-conv width")->capture_default_str();
  be->add_option("--heads", be_cfg.heads, "heads")->capture_default_str();
  be->add_option("--mel-bins", be_cfg.mel_bins, "output bins")->capture_default_str();
  be->add_option("--out", be_out, "CSV path (default stdout)");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  std::string gc_module = "all", gc_fault;
  std::size_t gc_max_entries = 0;
  gc->add_option("--module", gc_module, "all, or a comma list of: " +
                                            [] {
                                              std::string s;
                                              for (const auto& m : suites::module_names()) s += (s.empty() ? "" : " ") + m;
                                              return s;
                                            }())
      ->capture_default_str();
  gc->add_option("--max-entries", gc_max_entries, "entries checked per parameter, 0 for all")
      ->capture_default_str();
  gc->add_option("--inject-fault", gc_fault, "scale the backward pass of an op, e.g. matmul:1.5");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) {
      cmd_gen(gen_spec, gen_count, gen_seed, gen_out, gen_force);
    } else if (*tr) {
      ta.eval = !no_eval;
      cmd_train(ta);
    } else if (*syn) {
      cmd_synth(syn_ckpt, syn_config, syn_text, syn_speaker, syn_out);
    } else if (*ev) {
      cmd_eval(ev_ckpt, ev_config, ev_corpus, ev_mode, ev_out, ev_force);
    } else if (*be) {
      cmd_bench(be_decoder, be_frames, be_repeats, be_cfg, be_out);
    } else if (*gc) {
      cmd_gradcheck(gc_module, gc_max_entries, gc_fault);
    }
  } catch (const CheckFailure& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return kExitCheck;
  } catch (const ValueError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
