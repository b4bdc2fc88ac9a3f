#pragma once
// Training loop and evaluation.

#include <cstdint>
#include <string>
#include <vector>

#include "ptaco/checkpoint.hpp"
#include "ptaco/corpus/corpus.hpp"
#include "ptaco/model/model.hpp"
#include "ptaco/train/config.hpp"
#include "ptaco/train/optim.hpp"

namespace ptaco::train {

// Normalized contributions as they enter the objective.
struct StepMetrics {
  std::size_t step = 0;
  double lr = 0.0;
  double beta = 0.0;
  double loss = 0.0;
  double spec = 0.0;      // (1/KT) sum of block L1
  double duration = 0.0;  // (lambda/N) L_dur
  double kl = 0.0;        // beta * KL
  double prior = 0.0;     // L_prior / N
  double grad_norm = 0.0; // before clipping
};

std::string metrics_csv_header();
std::string metrics_csv_row(const StepMetrics& m);

// Utterances of a step: every utterance when batch_size covers the corpus,
// otherwise batch_size distinct indices drawn from `rng`.
std::vector<std::size_t> select_batch(std::size_t corpus_size, std::size_t batch_size, Rng& rng);

class Trainer {
 public:
  Trainer(model::TtsModel& model, const TrainConfig& config,
          const std::vector<corpus::Utterance>& data);

  // One optimizer step. Throws RuntimeFailure on a non-finite loss or
  // gradient norm, naming the step and the offending term.
  StepMetrics step();
  std::size_t current_step() const { return step_; }
  bool done() const { return step_ >= config_.total_steps; }

  // Parameters, optimizer velocities and the step counter.
  std::vector<NamedTensor> checkpoint() const;
  void resume(const std::vector<NamedTensor>& records);

 private:
  model::TtsModel& model_;
  TrainConfig config_;
  const std::vector<corpus::Utterance>& data_;
  Nesterov optimizer_;
  std::size_t step_ = 0;
};

enum class EvalMode { kTeacher, kFreeRunning };

struct UtteranceEval {
  std::size_t index = 0;
  std::int64_t speaker = 0;
  std::vector<std::int64_t> phonemes;
  std::vector<std::int64_t> target_durations;
  std::vector<std::int64_t> predicted_durations;  // finalized; all zero when gated off entirely
  std::vector<int> predicted_nonzero;             // p_z >= threshold
  std::size_t target_frames = 0;
  std::size_t predicted_frames = 0;               // frames of `mel`
  double spec_l1 = 0.0;                           // per-bin mean over compared frames
  std::size_t compared_frames = 0;
  bool failed = false;                            // free-running synthesis failed
  std::vector<double> mel;                        // [predicted_frames, K]
};

struct EvalReport {
  EvalMode mode = EvalMode::kTeacher;
  double spec_l1 = 0.0;            // sum |pred - target| / (K * compared frames), whole corpus
  double duration_mae = 0.0;       // mean |predicted - target| frames over all tokens
  double nonzero_accuracy = 0.0;   // share of tokens whose zero/non-zero class is right
  double length_error = 0.0;       // mean |predicted - target| total frames
  std::size_t failures = 0;
  std::vector<UtteranceEval> utterances;
};

// Teacher mode decodes with ground-truth durations so spectrogram L1 is
// measured frame for frame. Free-running mode chains predicted durations
// through the decoder and compares the overlapping frames. Duration metrics
// are computed from the predicted durations in both modes.
EvalReport evaluate(const model::TtsModel& model, const std::vector<corpus::Utterance>& data,
                    EvalMode mode);

std::string eval_mode_name(EvalMode mode);

// metrics.json contents and per-utterance prediction files (<dir>/utt_NNNN.mel
// and <dir>/predictions.txt).
std::string format_eval_json(const EvalReport& report);
void write_predictions(const std::string& dir, const EvalReport& report);

}  // namespace ptaco::train
