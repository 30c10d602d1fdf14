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

// Bona fide / spoof-method labels at segment and frame granularity, plus the
// line-oriented label file format:
//
//   <utt_id> <start_sec> <end_sec> <label>
//
// Lines are grouped by utterance, '#' starts a comment.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spoofdiar {

inline constexpr double kDefaultResolution = 0.02;
inline constexpr std::string_view kBonaLabel = "bona";
inline constexpr std::string_view kConcatLabel = "concat";

/// Ordered class names. Index 0 is always "bona"; the spoof methods follow,
/// and an optional "concat" marker class may be present.
class LabelVocabulary {
 public:
  explicit LabelVocabulary(std::vector<std::string> classes);

  /// {bona, A1, ..., A_{num_classes-1}}.
  static LabelVocabulary with_methods(int num_classes);

  int size() const { return static_cast<int>(classes_.size()); }
  const std::string& name(int index) const;
  std::optional<int> find(std::string_view name) const;
  /// Throws VocabularyError for unknown names.
  int index(std::string_view name) const;
  const std::vector<std::string>& classes() const { return classes_; }

 private:
  std::vector<std::string> classes_;
};

/// Plain label set used for non-class annotations (speech masks, cluster
/// hypotheses). No "bona" requirement.
struct LabelSet {
  std::vector<std::string> names;

  std::optional<int> find(std::string_view name) const;
};

struct Segment {
  double start = 0.0;
  double end = 0.0;
  int label = 0;  // index into the label set the timeline was parsed with
};

struct Timeline {
  std::string utt_id;
  std::vector<Segment> segments;
  double duration = 0.0;
};

struct FrameLabels {
  std::string utt_id;
  double resolution = kDefaultResolution;
  std::vector<int> labels;

  int num_frames() const { return static_cast<int>(labels.size()); }
};

/// Per-frame speech activity. true == speech, scored; false == excluded.
using SpeechMask = std::vector<bool>;

/// Checks ordering, contiguity and the duration invariant. Throws
/// ValidationError.
void validate_timeline(const Timeline& timeline);

/// Parses a label file against a class vocabulary.
std::vector<Timeline> parse_segments(std::string_view text,
                                     const LabelVocabulary& vocab);
/// Same, against an arbitrary label set.
std::vector<Timeline> parse_segments(std::string_view text,
                                     const LabelSet& labels);

/// Label set holding every distinct label in the file, "bona" first when
/// present and the rest in natural order (C2 before C10).
LabelSet collect_labels(std::string_view text);

/// Canonical label file text: single spaces, no comments, shortest time
/// representation with at least two decimals that parses back exactly.
std::string serialize_segments(const std::vector<Timeline>& timelines,
                               const std::vector<std::string>& names);

std::string format_time(double seconds);

/// Frame i takes the label of the segment covering (i + 0.5) * resolution;
/// a boundary instant belongs to the segment starting there.
FrameLabels timeline_to_frames(const Timeline& timeline,
                               double resolution = kDefaultResolution);

/// Maximal runs of equal labels become segments.
Timeline frames_to_timeline(const FrameLabels& frames);

/// Frame count for a duration at a resolution (ceil, tolerant to rounding).
int frame_count(double duration, double resolution);

// Speech masks use the label set {nonspeech, speech}.
const LabelSet& mask_labels();
SpeechMask timeline_to_mask(const Timeline& timeline,
                            double resolution = kDefaultResolution);
Timeline mask_to_timeline(const std::string& utt_id, const SpeechMask& mask,
                          double resolution = kDefaultResolution);

}  // namespace spoofdiar
