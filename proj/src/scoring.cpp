#include "seiznet/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "seiznet/error.hpp"

namespace seiznet {

Label label_from_name(const std::string& name) {
  if (name == "seiz") return Label::seiz;
  if (name == "bckg") return Label::bckg;
  throw FormatError("unknown label '" + name + "' (expected seiz or bckg)");
}

std::string label_name(Label label) {
  return label == Label::seiz ? "seiz" : "bckg";
}

EventList EventList::from_events(std::vector<Event> events,
                                 double total_duration_s) {
  std::sort(events.begin(), events.end(),
            [](const Event& a, const Event& b) { return a.start_s < b.start_s; });
  double last_stop = 0.0;
  for (const Event& e : events) {
    if (e.stop_s <= e.start_s) {
      throw FormatError("event [" + std::to_string(e.start_s) + "," +
                        std::to_string(e.stop_s) + ") is empty or reversed");
    }
    if (e.start_s < 0.0) throw FormatError("event starts before 0");
    if (e.start_s < last_stop) {
      throw FormatError("events overlap near " + std::to_string(e.start_s) +
                        " s");
    }
    last_stop = e.stop_s;
  }
  EventList list;
  list.events = std::move(events);
  list.total_duration_s = total_duration_s > 0.0 ? total_duration_s : last_stop;
  if (last_stop > list.total_duration_s) {
    throw FormatError("events extend past the record duration");
  }
  return list;
}

std::optional<Label> EventList::find_label(double time_s) const {
  // Events are sorted; binary search the last event starting at or before t.
  std::size_t lo = 0, hi = events.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (events[mid].start_s <= time_s) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo == 0) return std::nullopt;
  const Event& e = events[lo - 1];
  if (time_s < e.stop_s) return e.label;
  return std::nullopt;
}

Label EventList::label_at(double time_s) const {
  return find_label(time_s).value_or(Label::bckg);
}

EventList read_annotations_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open annotation file '" + path + "'");
  std::vector<Event> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.rfind("start_s", 0) == 0) continue;  // header
    std::istringstream fields(line);
    std::string start, stop, label;
    if (!std::getline(fields, start, ',') || !std::getline(fields, stop, ',') ||
        !std::getline(fields, label)) {
      throw FormatError("annotation file '" + path + "' line " +
                        std::to_string(lineno) + " is malformed");
    }
    try {
      events.push_back({std::stod(start), std::stod(stop),
                        label_from_name(label)});
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception&) {
      throw FormatError("annotation file '" + path + "' line " +
                        std::to_string(lineno) + " is not numeric");
    }
  }
  if (events.empty()) {
    throw FormatError("annotation file '" + path + "' holds no events");
  }
  return EventList::from_events(std::move(events));
}

void write_annotations_csv(const std::string& path, const EventList& list) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write annotation file '" + path + "'");
  out << "start_s,stop_s,label\n";
  char buf[96];
  for (const Event& e : list.events) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%s\n", e.start_s, e.stop_s,
                  label_name(e.label).c_str());
    out << buf;
  }
}

EpochPosteriors EpochPosteriors::from_values(std::vector<double> values) {
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw FormatError("posterior " + std::to_string(v) +
                        " outside [0,1]");
    }
  }
  EpochPosteriors p;
  p.total_duration_s = static_cast<double>(values.size());
  p.values = std::move(values);
  return p;
}

EventList posteriors_to_events(const EpochPosteriors& posteriors,
                               double threshold) {
  std::vector<Event> events;
  const std::size_t n = posteriors.values.size();
  std::size_t run_start = 0;
  Label run_label = Label::bckg;
  for (std::size_t i = 0; i <= n; ++i) {
    const Label label = i < n && posteriors.values[i] >= threshold
                            ? Label::seiz
                            : Label::bckg;
    if (i == 0) {
      run_label = label;
      continue;
    }
    if (i == n || label != run_label) {
      events.push_back({static_cast<double>(run_start),
                        static_cast<double>(i), run_label});
      run_start = i;
      run_label = label;
    }
  }
  return EventList::from_events(std::move(events),
                                posteriors.total_duration_s);
}

std::optional<double> ScoreReport::sensitivity_pct() const {
  if (tp + fn == 0) return std::nullopt;
  return 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
}

std::optional<double> ScoreReport::specificity_pct() const {
  if (tn + fp == 0) return std::nullopt;
  return 100.0 * static_cast<double>(tn) / static_cast<double>(tn + fp);
}

double ScoreReport::fa_per_24h() const {
  if (total_duration_s <= 0.0) return 0.0;
  return static_cast<double>(fp_event_runs) * 86400.0 / total_duration_s;
}

double ScoreReport::fa_epochs_per_24h() const {
  if (total_duration_s <= 0.0) return 0.0;
  return static_cast<double>(fp) * 86400.0 / total_duration_s;
}

ScoreReport ScoreReport::from_counts(std::size_t tp, std::size_t tn,
                                     std::size_t fp, std::size_t fn,
                                     std::size_t fp_event_runs,
                                     double total_duration_s) {
  ScoreReport r;
  r.tp = tp;
  r.tn = tn;
  r.fp = fp;
  r.fn = fn;
  r.fp_event_runs = fp_event_runs;
  r.total_duration_s = total_duration_s;
  return r;
}

ScoreReport score_epochs(const EventList& ref, const EventList& hyp) {
  if (ref.n_epochs() != hyp.n_epochs()) {
    throw DimError("ref and hyp durations disagree: " +
                   std::to_string(ref.total_duration_s) + " s vs " +
                   std::to_string(hyp.total_duration_s) + " s");
  }
  const std::size_t n = ref.n_epochs();

  // Fill per-epoch label grids by walking the sorted events once.
  auto fill = [n](const EventList& list) {
    std::vector<Label> grid(n, Label::bckg);
    for (const Event& e : list.events) {
      if (e.label != Label::seiz) continue;
      // Epoch k has midpoint k + 0.5.
      const std::size_t first =
          static_cast<std::size_t>(std::max(0.0, std::ceil(e.start_s - 0.5)));
      for (std::size_t k = first; k < n; ++k) {
        const double mid = static_cast<double>(k) + 0.5;
        if (mid >= e.stop_s) break;
        if (mid >= e.start_s) grid[k] = Label::seiz;
      }
    }
    return grid;
  };
  const std::vector<Label> ref_grid = fill(ref);
  const std::vector<Label> hyp_grid = fill(hyp);

  ScoreReport r;
  r.total_duration_s = ref.total_duration_s;
  bool in_fp_run = false;
  for (std::size_t k = 0; k < n; ++k) {
    const bool ref_seiz = ref_grid[k] == Label::seiz;
    const bool hyp_seiz = hyp_grid[k] == Label::seiz;
    if (ref_seiz && hyp_seiz) {
      ++r.tp;
    } else if (!ref_seiz && !hyp_seiz) {
      ++r.tn;
    } else if (!ref_seiz && hyp_seiz) {
      ++r.fp;
      if (!in_fp_run) ++r.fp_event_runs;
    } else {
      ++r.fn;
    }
    in_fp_run = !ref_seiz && hyp_seiz;
  }
  return r;
}

OverlapScore overlap_score(const EventList& ref, const EventList& hyp) {
  if (ref.n_epochs() != hyp.n_epochs()) {
    throw DimError("ref and hyp durations disagree: " +
                   std::to_string(ref.total_duration_s) + " s vs " +
                   std::to_string(hyp.total_duration_s) + " s");
  }
  std::vector<const Event*> ref_seiz, hyp_seiz;
  for (const Event& e : ref.events) {
    if (e.label == Label::seiz) ref_seiz.push_back(&e);
  }
  for (const Event& e : hyp.events) {
    if (e.label == Label::seiz) hyp_seiz.push_back(&e);
  }

  OverlapScore score;
  score.ref_seizures = ref_seiz.size();
  score.hyp_seizures = hyp_seiz.size();

  // Both sides are sorted; sweep with two pointers.
  std::vector<bool> hyp_used(hyp_seiz.size(), false);
  std::size_t j0 = 0;
  for (const Event* r : ref_seiz) {
    bool hit = false;
    while (j0 < hyp_seiz.size() && hyp_seiz[j0]->stop_s <= r->start_s) ++j0;
    for (std::size_t j = j0; j < hyp_seiz.size(); ++j) {
      if (hyp_seiz[j]->start_s >= r->stop_s) break;
      // Strictly positive overlap.
      if (std::min(r->stop_s, hyp_seiz[j]->stop_s) >
          std::max(r->start_s, hyp_seiz[j]->start_s)) {
        hit = true;
        hyp_used[j] = true;
      }
    }
    if (hit) {
      ++score.hits;
    } else {
      ++score.misses;
    }
  }
  for (std::size_t j = 0; j < hyp_seiz.size(); ++j) {
    if (!hyp_used[j]) ++score.false_alarms;
  }
  return score;
}

std::vector<DetPoint> det_curve(const EpochPosteriors& posteriors,
                                const EventList& ref,
                                const std::vector<double>& thresholds) {
  if (thresholds.size() < 2) {
    throw ConfigError("det_curve needs at least two thresholds");
  }
  std::vector<double> sorted = thresholds;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<DetPoint> points;
  points.reserve(sorted.size());
  for (double threshold : sorted) {
    const EventList hyp = posteriors_to_events(posteriors, threshold);
    const ScoreReport report = score_epochs(ref, hyp);
    DetPoint p;
    p.threshold = threshold;
    p.fa_per_24h = report.fa_per_24h();
    const auto sens = report.sensitivity_pct();
    p.miss_pct = sens ? 100.0 - *sens : std::nan("");
    points.push_back(p);
  }
  return points;
}

std::vector<double> default_threshold_sweep(const EpochPosteriors& posteriors) {
  std::set<double> sweep;
  for (int i = 0; i <= 100; ++i) sweep.insert(static_cast<double>(i) / 100.0);
  for (double v : posteriors.values) sweep.insert(v);
  return {sweep.begin(), sweep.end()};
}

std::string format_report(const std::string& system_name,
                          const ScoreReport& report) {
  auto pct = [](const std::optional<double>& value) {
    if (!value) return std::string("undef");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", *value);
    return std::string(buf);
  };
  char fa[32];
  std::snprintf(fa, sizeof(fa), "%.0f", report.fa_per_24h());

  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-16s %-12s %-12s %-10s\n", "System",
                "Sensitivity", "Specificity", "FA/24 Hrs.");
  out << line;
  std::snprintf(line, sizeof(line), "%-16s %-12s %-12s %-10s\n",
                system_name.c_str(), pct(report.sensitivity_pct()).c_str(),
                pct(report.specificity_pct()).c_str(), fa);
  out << line;
  std::snprintf(line, sizeof(line),
                "epochs: TP=%zu TN=%zu FP=%zu FN=%zu  fp_runs=%zu  "
                "fa_epochs_per_24h=%.2f\n",
                report.tp, report.tn, report.fp, report.fn,
                report.fp_event_runs, report.fa_epochs_per_24h());
  out << line;
  return out.str();
}

void write_det_csv(
    const std::string& path, const std::vector<DetPoint>& points,
    const std::vector<std::pair<std::string, std::string>>& header) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + tmp + "'");
    for (const auto& [key, value] : header) {
      out << "# " << key << "=" << value << "\n";
    }
    out << "threshold,fa_per_24h,miss_pct\n";
    char buf[128];
    for (const DetPoint& p : points) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.threshold,
                    p.fa_per_24h, p.miss_pct);
      out << buf;
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw FormatError("cannot rename '" + tmp + "' to '" + path + "'");
  }
}

}  // namespace seiznet
