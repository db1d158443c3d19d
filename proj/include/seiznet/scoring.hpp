#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "seiznet/error.hpp"

namespace seiznet {

enum class Label { bckg, seiz };

Label label_from_name(const std::string& name);
std::string label_name(Label label);

struct Event {
  double start_s = 0.0;
  double stop_s = 0.0;
  Label label = Label::bckg;
};

// Ordered, non-overlapping labeled intervals within [0, total]. Gaps are
// implicitly background.
struct EventList {
  std::vector<Event> events;
  double total_duration_s = 0.0;

  // Sorts, checks overlap/bounds; total defaults to the last stop.
  static EventList from_events(std::vector<Event> events,
                               double total_duration_s = 0.0);

  Label label_at(double time_s) const;                 // bckg when uncovered
  std::optional<Label> find_label(double time_s) const;  // nullopt in gaps
  std::size_t n_epochs() const {
    return static_cast<std::size_t>(total_duration_s);
  }
};

EventList read_annotations_csv(const std::string& path);
void write_annotations_csv(const std::string& path, const EventList& list);

// Per-epoch (1 s) seizure posteriors; epoch count = floor(duration).
struct EpochPosteriors {
  std::vector<double> values;
  double total_duration_s = 0.0;

  static EpochPosteriors from_values(std::vector<double> values);
};

// Epoch is seizure iff posterior >= threshold; contiguous runs merge into
// events and the list tiles [0, total] with alternating labels.
EventList posteriors_to_events(const EpochPosteriors& posteriors,
                               double threshold);

struct ScoreReport {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::size_t fp_event_runs = 0;  // merged runs of FP epochs
  double total_duration_s = 0.0;

  std::optional<double> sensitivity_pct() const;
  std::optional<double> specificity_pct() const;
  // False alarms per 24 hours, counting merged FP event runs (the epoch-rate
  // variant is also exposed since the two readings differ).
  double fa_per_24h() const;
  double fa_epochs_per_24h() const;

  static ScoreReport from_counts(std::size_t tp, std::size_t tn,
                                 std::size_t fp, std::size_t fn,
                                 std::size_t fp_event_runs,
                                 double total_duration_s);
};

// Per-epoch comparison on the 1 s grid; the label of an epoch is the label
// covering its midpoint. sensitivity = TP/(TP+FN), specificity = TN/(TN+FP).
ScoreReport score_epochs(const EventList& ref, const EventList& hyp);

// Event-level any-overlap scoring: a reference seizure is a hit when any
// hypothesis seizure overlaps it by more than zero seconds; a hypothesis
// seizure overlapping no reference seizure is a false alarm.
struct OverlapScore {
  std::size_t hits = 0, misses = 0, false_alarms = 0;
  std::size_t ref_seizures = 0, hyp_seizures = 0;
};

OverlapScore overlap_score(const EventList& ref, const EventList& hyp);

struct DetPoint {
  double threshold = 0.0;
  double fa_per_24h = 0.0;
  double miss_pct = 0.0;  // 100 - sensitivity; NaN when undefined
};

// One score_epochs evaluation per threshold, emitted sorted ascending by
// threshold.
std::vector<DetPoint> det_curve(const EpochPosteriors& posteriors,
                                const EventList& ref,
                                const std::vector<double>& thresholds);

// 101 evenly spaced thresholds plus the distinct posterior values.
std::vector<double> default_threshold_sweep(const EpochPosteriors& posteriors);

// Aligned text table mirroring the columns of the paper-style reports
// (Sensitivity, Specificity, FA/24 Hrs); FA prints rounded to an integer.
std::string format_report(const std::string& system_name,
                          const ScoreReport& report);

void write_det_csv(const std::string& path, const std::vector<DetPoint>& points,
                   const std::vector<std::pair<std::string, std::string>>& header);

}  // namespace seiznet
