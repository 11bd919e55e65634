#include "smokeseg/splitter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "smokeseg/common.hpp"

namespace smokeseg {

std::vector<std::string> temporal_thin(const std::vector<ImageSample>& samples, double min_gap_s) {
  if (min_gap_s <= 0.0) throw Error("temporal_thin: min_gap_s must be positive");

  std::map<std::string, std::vector<const ImageSample*>> streams;
  for (const auto& s : samples) {
    if (!s.timestamp) throw Error("temporal_thin: sample '" + s.id + "' missing timestamp");
    streams[s.group_key].push_back(&s);
  }

  std::vector<std::string> kept;
  for (auto& [key, stream] : streams) {
    std::stable_sort(stream.begin(), stream.end(), [](const ImageSample* a, const ImageSample* b) {
      if (*a->timestamp != *b->timestamp) return *a->timestamp < *b->timestamp;
      return a->id < b->id;
    });
    double last_kept = 0.0;
    bool any = false;
    for (const ImageSample* s : stream) {
      if (!any || *s->timestamp >= last_kept + min_gap_s) {
        kept.push_back(s->id);
        last_kept = *s->timestamp;
        any = true;
      }
    }
  }
  return kept;
}

SplitAssignment group_split(const std::vector<ImageSample>& samples,
                            std::array<double, 3> ratios, std::uint64_t seed,
                            const std::set<std::string>& pinned_test_ids) {
  const double ratio_sum = ratios[0] + ratios[1] + ratios[2];
  if (ratios[0] <= 0 || ratios[1] <= 0 || ratios[2] <= 0 || std::abs(ratio_sum - 1.0) > 1e-9) {
    throw Error("group_split: ratios must be positive and sum to 1");
  }

  struct Group {
    std::string key;
    std::vector<std::string> ids;
    bool pinned = false;
  };
  std::map<std::string, Group> by_key;
  for (const auto& s : samples) {
    Group& g = by_key[s.group_key];
    g.key = s.group_key;
    g.ids.push_back(s.id);
    if (pinned_test_ids.count(s.id)) g.pinned = true;
  }

  SplitAssignment assignment;
  assignment.seed = seed;
  assignment.ratios = ratios;

  std::vector<Group> groups;
  long long pinned_total = 0;
  for (auto& [key, g] : by_key) {
    if (g.pinned) {
      pinned_total += static_cast<long long>(g.ids.size());
      for (const auto& id : g.ids) assignment.by_id[id] = Split::Test;
    } else {
      groups.push_back(std::move(g));
    }
  }
  if (groups.size() < 3) throw Error("group_split: need at least 3 unpinned groups");

  std::mt19937_64 rng(seed);
  std::shuffle(groups.begin(), groups.end(), rng);

  const double total = static_cast<double>(samples.size());
  std::array<double, 3> targets = {ratios[0] * total, ratios[1] * total,
                                   std::max(0.0, ratios[2] * total - pinned_total)};
  std::array<double, 3> assigned{0, 0, 0};
  constexpr Split kSplits[3] = {Split::Train, Split::Val, Split::Test};

  auto assign_group = [&](const Group& g, int split_idx) {
    for (const auto& id : g.ids) assignment.by_id[id] = kSplits[split_idx];
    assigned[split_idx] += static_cast<double>(g.ids.size());
  };

  // Seed every split with one group so extreme ratios cannot starve a split,
  // then fill greedily by largest remaining deficit.
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (i < 3) {
      assign_group(groups[i], static_cast<int>(i));
      continue;
    }
    int best = 0;
    double best_deficit = targets[0] - assigned[0];
    for (int s = 1; s < 3; ++s) {
      const double deficit = targets[s] - assigned[s];
      if (deficit > best_deficit) {
        best = s;
        best_deficit = deficit;
      }
    }
    assign_group(groups[i], best);
  }
  return assignment;
}

DatasetManifest apply_split(const DatasetManifest& manifest, const SplitAssignment& assignment) {
  DatasetManifest out = manifest;
  for (auto& s : out.samples) {
    const auto it = assignment.by_id.find(s.id);
    if (it != assignment.by_id.end()) s.split = it->second;
  }
  return out;
}

SplitReport verify_split(const DatasetManifest& manifest, double min_gap_s) {
  SplitReport report;

  std::map<std::string, std::set<Split>> group_splits;
  for (const auto& s : manifest.samples) {
    if (s.split == Split::Unassigned) {
      ++report.unassigned;
      continue;
    }
    group_splits[s.group_key].insert(s.split);
    const int idx = s.split == Split::Train ? 0 : (s.split == Split::Val ? 1 : 2);
    ++report.per_source[to_string(s.source)].counts[idx];
    ++report.totals.counts[idx];
  }

  for (const auto& [key, splits] : group_splits) {
    if (splits.size() > 1) {
      std::ostringstream os;
      os << "group '" << key << "' spans " << splits.size() << " splits:";
      for (Split sp : splits) os << " " << to_string(sp);
      report.findings.push_back(os.str());
    }
  }

  // Per split and group, consecutive kept UAV frames must respect the gap.
  std::map<std::pair<Split, std::string>, std::vector<const ImageSample*>> uav_streams;
  for (const auto& s : manifest.samples) {
    if (s.source != Source::Uav || s.split == Split::Unassigned) continue;
    if (!s.timestamp) {
      report.findings.push_back("UAV sample '" + s.id + "' missing timestamp");
      continue;
    }
    uav_streams[{s.split, s.group_key}].push_back(&s);
  }
  for (auto& [key, stream] : uav_streams) {
    std::stable_sort(stream.begin(), stream.end(), [](const ImageSample* a, const ImageSample* b) {
      return *a->timestamp < *b->timestamp;
    });
    for (std::size_t i = 1; i < stream.size(); ++i) {
      const double gap = *stream[i]->timestamp - *stream[i - 1]->timestamp;
      if (gap < min_gap_s) {
        std::ostringstream os;
        os << "UAV samples '" << stream[i - 1]->id << "' and '" << stream[i]->id << "' in "
           << to_string(key.first) << " are " << gap << " s apart (< " << min_gap_s << ")";
        report.findings.push_back(os.str());
      }
    }
  }
  return report;
}

std::string SplitReport::table() const {
  std::ostringstream os;
  os << "Use case        ";
  for (const auto& [source, row] : per_source) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%14s", source.c_str());
    os << buf;
  }
  os << "         Total  Portion\n";
  const char* row_names[3] = {"Training", "Validation", "Testing"};
  const int grand_total = totals.total();
  for (int i = 0; i < 3; ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-16s", row_names[i]);
    os << buf;
    for (const auto& [source, row] : per_source) {
      std::snprintf(buf, sizeof(buf), "%14d", row.counts[i]);
      os << buf;
    }
    const double portion = grand_total > 0 ? 100.0 * totals.counts[i] / grand_total : 0.0;
    std::snprintf(buf, sizeof(buf), "%14d %7.1f%%\n", totals.counts[i], portion);
    os << buf;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-16s", "Total");
  os << buf;
  for (const auto& [source, row] : per_source) {
    std::snprintf(buf, sizeof(buf), "%14d", row.total());
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "%14d  100.0%%\n", grand_total);
  os << buf;
  if (unassigned > 0) os << "Unassigned: " << unassigned << "\n";
  if (findings.empty()) {
    os << "No findings.\n";
  } else {
    os << "Findings (" << findings.size() << "):\n";
    for (const auto& f : findings) os << "  - " << f << "\n";
  }
  return os.str();
}

nlohmann::json SplitReport::to_json() const {
  nlohmann::json per_source_json = nlohmann::json::object();
  for (const auto& [source, row] : per_source) {
    per_source_json[source] = {{"train", row.counts[0]},
                               {"val", row.counts[1]},
                               {"test", row.counts[2]},
                               {"total", row.total()}};
  }
  return nlohmann::json{{"findings", findings},
                        {"per_source", per_source_json},
                        {"totals",
                         {{"train", totals.counts[0]},
                          {"val", totals.counts[1]},
                          {"test", totals.counts[2]},
                          {"total", totals.total()}}},
                        {"unassigned", unassigned}};
}

void save_split(const SplitAssignment& assignment, const std::string& path) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write split file: " + path);
  for (const auto& [id, split] : assignment.by_id) out << id << "\t" << to_string(split) << "\n";
  if (!out) throw Error("split file write failed: " + path);
}

SplitAssignment load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("split file not found: " + path);
  SplitAssignment assignment;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      std::ostringstream os;
      os << path << ":" << line_no << ": expected 'id<TAB>SPLIT'";
      throw Error(os.str());
    }
    assignment.by_id[line.substr(0, tab)] = split_from_string(line.substr(tab + 1));
  }
  return assignment;
}

}  // namespace smokeseg
