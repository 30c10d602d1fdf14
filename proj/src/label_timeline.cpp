// Copyright 2026 The spoofdiar Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spoofdiar/label_timeline.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_set>

#include "spoofdiar/errors.hpp"

namespace spoofdiar {

namespace {

constexpr double kTimeTolerance = 1e-6;

struct Record {
  std::size_t line;
  std::string utt_id;
  double start;
  double end;
  std::string label;
};

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_time(std::string_view field, std::size_t line) {
  const auto dot = field.find('.');
  if (dot == std::string_view::npos || field.size() - dot - 1 < 2) {
    throw ParseError(line, "time '" + std::string(field) +
                               "' must have at least two decimal places");
  }
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(line, "invalid time '" + std::string(field) + "'");
  }
  if (!std::isfinite(value) || value < 0.0) {
    throw ParseError(line, "time must be finite and >= 0");
  }
  return value;
}

std::vector<Record> read_records(std::string_view text) {
  std::vector<Record> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    ++line_no;
    pos = eol + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const auto fields = split_ws(line);
    if (fields.empty()) {
      if (eol == text.size()) break;
      continue;
    }
    if (fields.size() != 4) {
      throw ParseError(line_no, "expected '<utt_id> <start> <end> <label>', got " +
                                    std::to_string(fields.size()) + " fields");
    }
    Record r{line_no, std::string(fields[0]), parse_time(fields[1], line_no),
             parse_time(fields[2], line_no), std::string(fields[3])};
    if (!(r.end > r.start)) {
      throw ParseError(line_no, "segment end must be greater than start");
    }
    records.push_back(std::move(r));
    if (eol == text.size()) break;
  }
  return records;
}

template <typename Lookup>
std::vector<Timeline> build_timelines(std::string_view text, Lookup&& lookup) {
  const auto records = read_records(text);
  std::vector<Timeline> out;
  std::unordered_set<std::string> finished;
  for (const auto& r : records) {
    if (out.empty() || out.back().utt_id != r.utt_id) {
      if (!out.empty()) finished.insert(out.back().utt_id);
      if (finished.count(r.utt_id)) {
        throw ParseError(r.line, "lines for utterance '" + r.utt_id +
                                     "' are not grouped together");
      }
      Timeline t;
      t.utt_id = r.utt_id;
      if (std::abs(r.start) > kTimeTolerance) {
        throw ValidationError("utterance '" + r.utt_id + "' (line " +
                              std::to_string(r.line) +
                              "): first segment must start at 0");
      }
      out.push_back(std::move(t));
    } else {
      const double prev_end = out.back().segments.back().end;
      if (r.start > prev_end + kTimeTolerance) {
        throw ValidationError("utterance '" + r.utt_id + "' (line " +
                              std::to_string(r.line) + "): gap between " +
                              format_time(prev_end) + " and " +
                              format_time(r.start));
      }
      if (r.start < prev_end - kTimeTolerance) {
        throw ValidationError("utterance '" + r.utt_id + "' (line " +
                              std::to_string(r.line) + "): overlap at " +
                              format_time(r.start));
      }
    }
    const int label = lookup(r.label, r.line);
    out.back().segments.push_back(Segment{r.start, r.end, label});
    out.back().duration = r.end;
  }
  return out;
}

// "C10" sorts after "C2".
bool natural_less(const std::string& a, const std::string& b) {
  auto split = [](const std::string& s) {
    std::size_t i = s.size();
    while (i > 0 && std::isdigit(static_cast<unsigned char>(s[i - 1]))) --i;
    long long num = -1;
    if (i < s.size() && s.size() - i < 18) num = std::stoll(s.substr(i));
    return std::pair{s.substr(0, i), num};
  };
  const auto [pa, na] = split(a);
  const auto [pb, nb] = split(b);
  if (pa != pb) return pa < pb;
  if (na != nb) return na < nb;
  return a < b;
}

// k * resolution, computed as k / rate when the rate is integral so boundaries
// print as short decimals.
double frame_time(std::size_t k, double resolution) {
  const double rate = 1.0 / resolution;
  const double rounded = std::round(rate);
  if (std::abs(rate - rounded) < 1e-9) return static_cast<double>(k) / rounded;
  return static_cast<double>(k) * resolution;
}

}  // namespace

LabelVocabulary::LabelVocabulary(std::vector<std::string> classes)
    : classes_(std::move(classes)) {
  if (classes_.size() < 2) {
    throw VocabularyError("vocabulary needs at least 2 classes");
  }
  if (classes_[0] != kBonaLabel) {
    throw VocabularyError("vocabulary must start with 'bona'");
  }
  std::set<std::string> seen;
  for (const auto& c : classes_) {
    if (c.empty() || !seen.insert(c).second) {
      throw VocabularyError("duplicate or empty class name '" + c + "'");
    }
  }
}

LabelVocabulary LabelVocabulary::with_methods(int num_classes) {
  if (num_classes < 2) throw VocabularyError("num_classes must be >= 2");
  std::vector<std::string> names{std::string(kBonaLabel)};
  for (int i = 1; i < num_classes; ++i) names.push_back("A" + std::to_string(i));
  return LabelVocabulary(std::move(names));
}

const std::string& LabelVocabulary::name(int index) const {
  if (index < 0 || index >= size()) {
    throw VocabularyError("class index " + std::to_string(index) + " out of range");
  }
  return classes_[static_cast<std::size_t>(index)];
}

std::optional<int> LabelVocabulary::find(std::string_view name) const {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

int LabelVocabulary::index(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw VocabularyError("unknown label '" + std::string(name) + "'");
}

std::optional<int> LabelSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

void validate_timeline(const Timeline& t) {
  if (t.segments.empty()) {
    throw ValidationError("timeline '" + t.utt_id + "' has no segments");
  }
  if (std::abs(t.segments.front().start) > kTimeTolerance) {
    throw ValidationError("timeline '" + t.utt_id + "' must start at 0");
  }
  for (std::size_t i = 0; i < t.segments.size(); ++i) {
    const auto& s = t.segments[i];
    if (!(s.end > s.start)) {
      throw ValidationError("timeline '" + t.utt_id + "': empty segment");
    }
    if (i > 0 && std::abs(s.start - t.segments[i - 1].end) > kTimeTolerance) {
      throw ValidationError("timeline '" + t.utt_id + "': segments not contiguous");
    }
  }
  if (std::abs(t.segments.back().end - t.duration) > kTimeTolerance) {
    throw ValidationError("timeline '" + t.utt_id + "': last end != duration");
  }
}

std::vector<Timeline> parse_segments(std::string_view text,
                                     const LabelVocabulary& vocab) {
  return build_timelines(text, [&](const std::string& label, std::size_t line) {
    if (auto i = vocab.find(label)) return *i;
    throw VocabularyError("line " + std::to_string(line) + ": unknown label '" +
                          label + "'");
  });
}

std::vector<Timeline> parse_segments(std::string_view text,
                                     const LabelSet& labels) {
  return build_timelines(text, [&](const std::string& label, std::size_t line) {
    if (auto i = labels.find(label)) return *i;
    throw VocabularyError("line " + std::to_string(line) + ": unknown label '" +
                          label + "'");
  });
}

LabelSet collect_labels(std::string_view text) {
  std::set<std::string> names;
  for (const auto& r : read_records(text)) names.insert(r.label);
  LabelSet out;
  if (names.erase(std::string(kBonaLabel))) out.names.emplace_back(kBonaLabel);
  std::vector<std::string> rest(names.begin(), names.end());
  std::sort(rest.begin(), rest.end(), natural_less);
  out.names.insert(out.names.end(), rest.begin(), rest.end());
  return out;
}

std::string format_time(double seconds) {
  char buf[64];
  for (int precision = 2; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*f", precision, seconds);
    double back = 0.0;
    std::from_chars(buf, buf + std::char_traits<char>::length(buf), back);
    if (back == seconds) break;
  }
  return buf;
}

std::string serialize_segments(const std::vector<Timeline>& timelines,
                               const std::vector<std::string>& names) {
  std::ostringstream os;
  for (const auto& t : timelines) {
    for (const auto& s : t.segments) {
      if (s.label < 0 || static_cast<std::size_t>(s.label) >= names.size()) {
        throw VocabularyError("segment label index out of range");
      }
      os << t.utt_id << ' ' << format_time(s.start) << ' ' << format_time(s.end)
         << ' ' << names[static_cast<std::size_t>(s.label)] << '\n';
    }
  }
  return os.str();
}

int frame_count(double duration, double resolution) {
  if (!(resolution > 0.0)) throw ConfigError("resolution must be > 0");
  return static_cast<int>(std::ceil(duration / resolution - 1e-9));
}

FrameLabels timeline_to_frames(const Timeline& timeline, double resolution) {
  const int n = frame_count(timeline.duration, resolution);
  FrameLabels out;
  out.utt_id = timeline.utt_id;
  out.resolution = resolution;
  out.labels.resize(static_cast<std::size_t>(n));
  std::size_t seg = 0;
  for (int i = 0; i < n; ++i) {
    const double mid = (i + 0.5) * resolution;
    while (seg + 1 < timeline.segments.size() &&
           mid >= timeline.segments[seg + 1].start) {
      ++seg;
    }
    out.labels[static_cast<std::size_t>(i)] = timeline.segments[seg].label;
  }
  return out;
}

Timeline frames_to_timeline(const FrameLabels& frames) {
  Timeline t;
  t.utt_id = frames.utt_id;
  const auto& labels = frames.labels;
  std::size_t run_start = 0;
  for (std::size_t i = 1; i <= labels.size(); ++i) {
    if (i == labels.size() || labels[i] != labels[run_start]) {
      t.segments.push_back(Segment{frame_time(run_start, frames.resolution),
                                   frame_time(i, frames.resolution),
                                   labels[run_start]});
      run_start = i;
    }
  }
  t.duration = frame_time(labels.size(), frames.resolution);
  return t;
}

const LabelSet& mask_labels() {
  static const LabelSet labels{{"nonspeech", "speech"}};
  return labels;
}

SpeechMask timeline_to_mask(const Timeline& timeline, double resolution) {
  const auto frames = timeline_to_frames(timeline, resolution);
  SpeechMask mask(frames.labels.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = frames.labels[i] == 1;
  return mask;
}

Timeline mask_to_timeline(const std::string& utt_id, const SpeechMask& mask,
                          double resolution) {
  FrameLabels f;
  f.utt_id = utt_id;
  f.resolution = resolution;
  f.labels.reserve(mask.size());
  for (bool b : mask) f.labels.push_back(b ? 1 : 0);
  return frames_to_timeline(f);
}

}  // namespace spoofdiar
