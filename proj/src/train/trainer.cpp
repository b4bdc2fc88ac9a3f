#include "ptaco/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "ptaco/corpus/formats.hpp"
#include "ptaco/error.hpp"

namespace ptaco::train {

namespace {

constexpr char kStepRecord[] = "trainer/step";
constexpr char kVelocityPrefix[] = "optimizer/velocity/";

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double sum_items(const std::vector<Tensor>& ts) {
  double s = 0.0;
  for (const Tensor& t : ts) s += t.item();
  return s;
}

}  // namespace

std::string metrics_csv_header() { return "step,lr,beta,loss,spec,duration,kl,prior,grad_norm"; }

std::string metrics_csv_row(const StepMetrics& m) {
  return std::to_string(m.step) + "," + num(m.lr) + "," + num(m.beta) + "," + num(m.loss) + "," +
         num(m.spec) + "," + num(m.duration) + "," + num(m.kl) + "," + num(m.prior) + "," +
         num(m.grad_norm);
}

std::vector<std::size_t> select_batch(std::size_t corpus_size, std::size_t batch_size, Rng& rng) {
  if (corpus_size == 0) throw ValueError("empty training corpus");
  std::vector<std::size_t> idx(corpus_size);
  std::iota(idx.begin(), idx.end(), 0);
  if (batch_size >= corpus_size) return idx;
  // Partial Fisher-Yates with the run's own generator keeps the draw
  // independent of the standard library's shuffle implementation.
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.integer(static_cast<std::int64_t>(i), static_cast<std::int64_t>(corpus_size - 1)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(batch_size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Trainer::Trainer(model::TtsModel& model, const TrainConfig& config,
                 const std::vector<corpus::Utterance>& data)
    : model_(model), config_(config), data_(data), optimizer_(config.momentum) {
  if (data.empty()) throw ValueError("empty training corpus");
  for (const auto& u : data) {
    if (u.mel_bins != model.config().mel_bins) {
      throw ValueError("corpus has " + std::to_string(u.mel_bins) + " mel bins, model expects " +
                       std::to_string(model.config().mel_bins));
    }
  }
}

StepMetrics Trainer::step() {
  const std::size_t s = step_;
  Rng rng = Rng::derive(config_.seed, s);
  std::vector<const corpus::Utterance*> picked;
  for (std::size_t i : select_batch(data_.size(), config_.batch_size, rng)) picked.push_back(&data_[i]);

  PrecisionGuard guard(config_.precision);
  const model::Batch batch = model::make_batch(picked, model_.config().mel_bins);
  const Variant variant = model_.config().variant;

  StepMetrics m;
  m.step = s;
  m.lr = config_.base_lr * config_.lr(s);
  m.beta = config_.kl(variant, s);

  ParameterStore& store = model_.parameters();
  store.zero_grad();
  const nn::Context ctx{true, &rng};
  const model::TrainingOutput out = model_.forward(batch, ctx, m.beta, config_.lambda_dur);
  const LossTerms& t = out.terms;
  m.loss = out.loss.item();
  m.spec = sum_items(t.spec) / static_cast<double>(t.mel_bins * t.frames);
  m.duration = t.lambda_dur * t.duration.item() / static_cast<double>(t.tokens);
  m.kl = t.kl.defined() ? t.beta * t.kl.item() : 0.0;
  m.prior = t.prior.defined() ? t.prior.item() / static_cast<double>(t.tokens) : 0.0;
  if (!std::isfinite(m.loss)) {
    throw RuntimeFailure("non-finite loss at step " + std::to_string(s) + ": spec=" + num(m.spec) +
                         " duration=" + num(m.duration) + " kl=" + num(m.kl) + " prior=" + num(m.prior) +
                         " lr=" + num(m.lr) + " beta=" + num(m.beta));
  }
  out.loss.backward();
  m.grad_norm = clip_global_norm(store.parameters(), config_.clip_norm);
  if (!std::isfinite(m.grad_norm)) {
    throw RuntimeFailure("non-finite gradient norm at step " + std::to_string(s) +
                         " (loss=" + num(m.loss) + ")");
  }
  optimizer_.step(store.parameters(), m.lr);
  ++step_;
  return m;
}

std::vector<NamedTensor> Trainer::checkpoint() const {
  std::vector<NamedTensor> records = snapshot(model_.parameters());
  for (NamedTensor& v : optimizer_.state(kVelocityPrefix)) records.push_back(std::move(v));
  records.push_back({kStepRecord, Tensor::scalar(static_cast<double>(step_))});
  return records;
}

void Trainer::resume(const std::vector<NamedTensor>& records) {
  restore(model_.parameters(), records);
  optimizer_.load_state(records, kVelocityPrefix);
  auto it = std::find_if(records.begin(), records.end(),
                         [](const NamedTensor& r) { return r.name == kStepRecord; });
  if (it == records.end()) throw FormatError("checkpoint has no trainer step record");
  const double v = it->tensor.item();
  if (v < 0.0 || v != std::floor(v)) throw FormatError("checkpoint step record is not a count");
  step_ = static_cast<std::size_t>(v);
}

std::string eval_mode_name(EvalMode mode) {
  return mode == EvalMode::kTeacher ? "teacher" : "free-running";
}

EvalReport evaluate(const model::TtsModel& model, const std::vector<corpus::Utterance>& data,
                    EvalMode mode) {
  const model::ModelConfig& c = model.config();
  const std::size_t K = c.mel_bins;
  EvalReport report;
  report.mode = mode;
  double abs_sum = 0.0, compared = 0.0, dur_abs = 0.0, correct = 0.0, tokens = 0.0, len_err = 0.0;

  for (std::size_t i = 0; i < data.size(); ++i) {
    const corpus::Utterance& u = data[i];
    UtteranceEval e;
    e.index = i;
    e.speaker = u.speaker;
    e.phonemes = u.phonemes;
    e.target_durations = u.durations;
    e.target_frames = u.frames();

    const model::Batch batch = model::make_batch(std::vector<const corpus::Utterance*>{&u}, K);
    model::InferenceOutput out;
    if (mode == EvalMode::kTeacher) {
      out = model.infer(batch, model::DurationSource::kTeacher);
    } else {
      try {
        out = model.infer(batch, model::DurationSource::kPredicted);
      } catch (const RuntimeFailure&) {
        e.failed = true;
        ++report.failures;
      }
      if (e.failed) {
        // Still report the gate decisions; synthesis had nothing to decode.
        out = model.infer(batch, model::DurationSource::kTeacher);
      }
    }

    const std::size_t n = u.phonemes.size();
    const auto pz = out.predicted.p_z.values();
    const auto sec = out.predicted.seconds.values();
    try {
      e.predicted_durations = model::finalize_durations(pz, sec, c.frame_rate);
    } catch (const RuntimeFailure&) {
      e.predicted_durations.assign(n, 0);
    }
    for (std::size_t j = 0; j < n; ++j) {
      const bool nz = pz[j] >= model::kNonZeroThreshold;
      e.predicted_nonzero.push_back(nz ? 1 : 0);
      correct += (nz == (u.durations[j] > 0)) ? 1.0 : 0.0;
      dur_abs += static_cast<double>(std::llabs(e.predicted_durations[j] - u.durations[j]));
    }
    tokens += static_cast<double>(n);

    if (!e.failed) {
      e.predicted_frames = out.mel.dim(1);
      const auto mv = out.mel.values();
      e.mel.assign(mv.begin(), mv.end());
      e.compared_frames = std::min(e.predicted_frames, e.target_frames);
      double s = 0.0;
      for (std::size_t f = 0; f < e.compared_frames; ++f) {
        for (std::size_t k = 0; k < K; ++k) s += std::fabs(mv[f * K + k] - u.mel[f * K + k]);
      }
      e.spec_l1 = e.compared_frames ? s / static_cast<double>(e.compared_frames * K) : 0.0;
      abs_sum += s;
      compared += static_cast<double>(e.compared_frames * K);
    }
    const std::int64_t pred_total =
        std::accumulate(e.predicted_durations.begin(), e.predicted_durations.end(), std::int64_t{0});
    len_err += std::fabs(static_cast<double>(pred_total) - static_cast<double>(e.target_frames));
    report.utterances.push_back(std::move(e));
  }
  report.spec_l1 = compared > 0.0 ? abs_sum / compared : 0.0;
  report.duration_mae = tokens > 0.0 ? dur_abs / tokens : 0.0;
  report.nonzero_accuracy = tokens > 0.0 ? correct / tokens : 0.0;
  report.length_error = data.empty() ? 0.0 : len_err / static_cast<double>(data.size());
  return report;
}

std::string format_eval_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["mode"] = eval_mode_name(r.mode);
  j["utterances"] = r.utterances.size();
  j["spec_l1"] = r.spec_l1;
  j["duration_mae"] = r.duration_mae;
  j["nonzero_accuracy"] = r.nonzero_accuracy;
  j["length_error"] = r.length_error;
  j["failures"] = r.failures;
  return j.dump(2) + "\n";
}

void write_predictions(const std::string& dir, const EvalReport& report) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream list(fs::path(dir) / "predictions.txt");
  if (!list) throw RuntimeFailure("cannot write predictions to '" + dir + "'");
  list << "ptaco-predictions 1\n";
  for (const UtteranceEval& e : report.utterances) {
    char name[32];
    std::snprintf(name, sizeof(name), "utt_%04zu.mel", e.index);
    list << e.index << ' ' << e.speaker << ' ' << (e.failed ? "-" : name) << ' ' << e.phonemes.size();
    for (std::size_t j = 0; j < e.phonemes.size(); ++j) {
      list << ' ' << e.target_durations[j] << ':' << e.predicted_durations[j] << ':'
           << e.predicted_nonzero[j];
    }
    list << '\n';
    if (!e.failed) {
      corpus::Mel mel{e.predicted_frames, e.mel.size() / std::max<std::size_t>(e.predicted_frames, 1),
                      e.mel};
      corpus::write_mel((fs::path(dir) / name).string(), mel);
    }
  }
}

}  // namespace ptaco::train
