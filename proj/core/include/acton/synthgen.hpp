#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "acton/core.hpp"
#include "acton/ingest.hpp"

namespace acton {

using CorrelationMatrix = std::array<std::array<double, kTaskCount>, kTaskCount>;

CorrelationMatrix identity_correlation();

/// How a disorder reshapes a positive subject's activity. Effects scale with
/// severity: 1 for a positive binary label, 0.5 / 1 for classes 1 / 2.
struct Archetype {
  double amplitude_scale = 1.0;       // multiplies the subject's activity amplitude
  double fragmentation_rate = 0.0;    // extra probability of a movement bout per sleep sample
  double daytime_suppression = 0.0;   // fractional reduction of waking activity
  std::vector<int> suppression_days{0, 1, 2, 3, 4, 5, 6};  // day-of-week indices affected
  bool weekday_compensation = false;  // raise the other days so the weekly mean is preserved
  // Days on which label-0 subjects get the same (full-severity) suppression.
  // With matching day counts both classes share one weekly activity mix and
  // differ only in which days are quiet.
  std::vector<int> negative_suppression_days;
};

struct TaskSynthSpec {
  double prevalence = 0.3;     // binary tasks: positive rate. 3-class tasks use tertiles.
  double label_fraction = 1.0; // among labelled subjects, share that carry this task's label
  Archetype archetype;
};

struct BaseSignal {
  double amplitude_median = 250.0;   // counts per sample at the circadian mean
  double amplitude_log_sd = 0.35;    // between-subject spread
  double circadian_depth = 0.5;
  double noise_log_sd = 0.6;
  double idle_probability = 0.15;    // waking samples with zero counts
  double sleep_onset_hour = 23.0;
  double sleep_onset_sd = 0.5;       // between subjects
  double sleep_onset_daily_sd = 0.3; // night to night
  double sleep_hours = 7.5;
  double sleep_movement_probability = 0.05;
  double sleep_movement_mean = 30.0;
};

struct SynthConfig {
  std::size_t n_subjects = 100;
  int days = kDefaultDays;
  int sampling_period_s = kDefaultSamplingPeriod;
  double labeled_fraction = 1.0;
  std::uint64_t seed = 7;
  int threads = 1;
  BaseSignal base;
  std::array<TaskSynthSpec, kTaskCount> tasks{};
  /// Target Pearson correlation between the (ordinal-coded) labels.
  CorrelationMatrix comorbidity = identity_correlation();

  SynthConfig();
};

inline constexpr RawCount kMaxActivityCount = 5000;

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

struct SynthOutput {
  Dataset dataset;
  /// Correlation of the latent Gaussian actually used after calibration and repair.
  CorrelationMatrix latent;
  std::vector<std::string> warnings;
};

/// Byte-identical output for identical configs regardless of `threads`.
SynthOutput generate_cohort(const SynthConfig& cfg);

struct LabelCorrelation {
  CorrelationMatrix matrix{};
  std::array<bool, kTaskCount> degenerate{};  // zero-variance columns (entries reported as 0)
  std::array<std::array<std::size_t, kTaskCount>, kTaskCount> support{};
};

/// Pairwise Pearson correlation over subjects carrying both labels.
LabelCorrelation label_correlation(const LabelTable& labels);

/// Latent Gaussian correlation that yields label correlation `target` after
/// thresholding. Throws InfeasibleCorrelation when the target is out of reach.
double calibrate_latent_correlation(double target, std::span<const double> thresholds_a,
                                    std::span<const double> thresholds_b);

/// Ordinal-label Pearson correlation implied by a latent correlation r.
double implied_label_correlation(double r, std::span<const double> thresholds_a,
                                 std::span<const double> thresholds_b);

/// Nearest correlation matrix (alternating projections).
CorrelationMatrix nearest_correlation(const CorrelationMatrix& m);

/// Latent thresholds for a task: one for binary tasks, two (tertiles) otherwise.
std::vector<double> task_thresholds(Task task, const TaskSynthSpec& spec);

/// Mean waking-hours activity of subjects with and without a positive label.
struct ActivityGap {
  double positive_mean = 0.0;
  double negative_mean = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};
ActivityGap daytime_activity_gap(const Dataset& ds, Task task);

}  // namespace acton
