#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vmad/errors.hpp"

namespace vmad {

using SubjectId = std::string;
using DocumentId = std::string;
using SequenceId = std::string;
using FrameId = std::string;
using Score = double;

// Unknown covers score-only deployments where ground truth is not
// available; label-aware operations (mxd, evaluation) reject it.
enum class Label { BonaFide, Morphed, Unknown };

inline const char* label_name(Label l) {
  switch (l) {
    case Label::BonaFide: return "bonafide";
    case Label::Morphed: return "morphed";
    case Label::Unknown: return "unknown";
  }
  return "?";
}

inline Label parse_label(const std::string& s, const std::string& context) {
  if (s == "bonafide") return Label::BonaFide;
  if (s == "morphed") return Label::Morphed;
  if (s == "unknown") return Label::Unknown;
  fail(ErrorCode::ParseError, context + ": bad label '" + s + "'");
}

struct FaceBox {
  long x = 0, y = 0, w = 0, h = 0;
  bool operator==(const FaceBox&) const = default;
};

struct FrameRecord {
  FrameId id;
  std::string image_path;  // empty when no image backs this frame
  std::optional<FaceBox> face_box;
  std::map<std::string, Score> mad_scores;      // detector name -> score in [0,1]
  std::map<std::string, Score> quality_scores;  // quality name -> raw score
  bool operator==(const FrameRecord&) const = default;
};

struct SequenceRecord {
  SequenceId id;
  SubjectId subject;
  std::vector<FrameRecord> frames;  // acquisition order, preserved by ingestion
  bool operator==(const SequenceRecord&) const = default;
};

struct DocumentRecord {
  DocumentId id;
  Label label = Label::BonaFide;
  SubjectId subject_a;
  std::optional<SubjectId> subject_b;  // present iff Morphed
  bool operator==(const DocumentRecord&) const = default;
};

struct Attempt {
  DocumentId document;
  SequenceId sequence;
  Label label = Label::BonaFide;
  bool operator==(const Attempt&) const = default;
};

// Detectors whose raw output means "higher = more genuine" are flipped
// to the global orientation (higher = more likely morphed) at ingestion.
enum class TrackPolarity { HighIsMorph, LowIsMorph };

struct Dataset {
  std::vector<SubjectId> subjects;
  std::vector<DocumentRecord> documents;
  std::vector<SequenceRecord> sequences;
  std::vector<Attempt> attempts;
  std::map<std::string, TrackPolarity> mad_track_polarity;

  bool operator==(const Dataset&) const = default;

  const SequenceRecord* find_sequence(const SequenceId& id) const {
    for (const auto& s : sequences)
      if (s.id == id) return &s;
    return nullptr;
  }

  const DocumentRecord* find_document(const DocumentId& id) const {
    for (const auto& d : documents)
      if (d.id == id) return &d;
    return nullptr;
  }
};

struct ValidationIssue {
  std::string code;     // short machine-readable tag
  std::string message;  // ids involved
};

struct ValidationReport {
  std::vector<ValidationIssue> violations;  // invariant breaches
  std::vector<ValidationIssue> warnings;    // legal but noteworthy
  bool ok() const { return violations.empty(); }
};

// [OP] pair_attempts. One attempt per (bona fide or unknown document,
// same-subject sequence), one per (morphed document, sequence of either
// contributor); ordered by document id, then sequence id. Documents
// without an eligible sequence yield nothing.
inline std::vector<Attempt> pair_attempts(const Dataset& ds) {
  std::vector<const DocumentRecord*> docs;
  docs.reserve(ds.documents.size());
  for (const auto& d : ds.documents) docs.push_back(&d);
  std::sort(docs.begin(), docs.end(),
            [](const DocumentRecord* a, const DocumentRecord* b) { return a->id < b->id; });

  std::vector<const SequenceRecord*> seqs;
  seqs.reserve(ds.sequences.size());
  for (const auto& s : ds.sequences) seqs.push_back(&s);
  std::sort(seqs.begin(), seqs.end(),
            [](const SequenceRecord* a, const SequenceRecord* b) { return a->id < b->id; });

  std::vector<Attempt> out;
  for (const DocumentRecord* d : docs) {
    for (const SequenceRecord* s : seqs) {
      bool eligible = false;
      if (d->label == Label::Morphed) {
        eligible = s->subject == d->subject_a ||
                   (d->subject_b && s->subject == *d->subject_b);
      } else {
        eligible = s->subject == d->subject_a;
      }
      if (eligible) out.push_back({d->id, s->id, d->label});
    }
  }
  return out;
}

namespace detail {

inline void check_unique(std::vector<std::string> ids, const char* what,
                         ValidationReport& report) {
  std::sort(ids.begin(), ids.end());
  for (size_t i = 1; i < ids.size(); ++i)
    if (ids[i] == ids[i - 1])
      report.violations.push_back({"duplicate_id", std::string(what) + " '" + ids[i] + "'"});
}

}  // namespace detail

// Optional hook for face-box bounds checking: returns (width, height) of
// the image at the given path, or nullopt when it cannot be read. The
// image module provides a compatible probe; validation itself stays free
// of image-format dependencies.
using ImageDimsProbe =
    std::function<std::optional<std::pair<long, long>>(const std::string& image_path)>;

// [OP] validate_dataset. Collects every invariant violation; never throws.
inline ValidationReport validate_dataset(const Dataset& ds,
                                         const ImageDimsProbe& probe_dims = {}) {
  ValidationReport report;

  std::vector<std::string> subject_ids(ds.subjects.begin(), ds.subjects.end());
  detail::check_unique(subject_ids, "subject", report);
  std::sort(subject_ids.begin(), subject_ids.end());
  auto subject_exists = [&](const SubjectId& s) {
    return std::binary_search(subject_ids.begin(), subject_ids.end(), s);
  };

  std::vector<std::string> doc_ids, seq_ids;
  for (const auto& d : ds.documents) doc_ids.push_back(d.id);
  for (const auto& s : ds.sequences) seq_ids.push_back(s.id);
  detail::check_unique(doc_ids, "document", report);
  detail::check_unique(seq_ids, "sequence", report);

  for (const auto& d : ds.documents) {
    if (!subject_exists(d.subject_a))
      report.violations.push_back(
          {"unknown_subject", "document " + d.id + " references subject " + d.subject_a});
    if (d.subject_b && !subject_exists(*d.subject_b))
      report.violations.push_back(
          {"unknown_subject", "document " + d.id + " references subject " + *d.subject_b});
    if (d.label == Label::Morphed) {
      if (!d.subject_b)
        report.violations.push_back(
            {"morph_missing_subject_b", "morphed document " + d.id + " lacks subject_b"});
      else if (*d.subject_b == d.subject_a)
        report.violations.push_back(
            {"morph_same_subject", "morphed document " + d.id + " lists subject_b = subject_a"});
    } else if (d.subject_b) {
      report.violations.push_back(
          {"unexpected_subject_b", "non-morphed document " + d.id + " carries subject_b"});
    }
  }

  for (const auto& s : ds.sequences) {
    if (!subject_exists(s.subject))
      report.violations.push_back(
          {"unknown_subject", "sequence " + s.id + " references subject " + s.subject});
    if (s.frames.empty())
      report.violations.push_back({"empty_sequence", "sequence " + s.id + " has 0 frames"});
    std::vector<std::string> frame_ids;
    for (const auto& f : s.frames) frame_ids.push_back(s.id + "/" + f.id);
    detail::check_unique(frame_ids, "frame", report);

    for (const auto& f : s.frames) {
      for (const auto& [name, v] : f.mad_scores)
        if (!(v >= 0.0 && v <= 1.0))
          report.violations.push_back({"mad_score_out_of_range",
                                       "frame " + s.id + "/" + f.id + " track " + name});
      if (f.face_box) {
        const FaceBox& b = *f.face_box;
        if (b.w <= 0 || b.h <= 0 || b.x < 0 || b.y < 0) {
          report.violations.push_back(
              {"degenerate_face_box", "frame " + s.id + "/" + f.id});
        } else if (!f.image_path.empty() && probe_dims) {
          auto dims = probe_dims(f.image_path);
          if (!dims) {
            report.warnings.push_back(
                {"unreadable_image", "frame " + s.id + "/" + f.id + ": " + f.image_path});
          } else if (b.x + b.w > dims->first || b.y + b.h > dims->second) {
            report.violations.push_back(
                {"face_box_out_of_bounds", "frame " + s.id + "/" + f.id});
          }
        }
      }
    }
  }

  std::sort(doc_ids.begin(), doc_ids.end());
  std::sort(seq_ids.begin(), seq_ids.end());
  for (const auto& a : ds.attempts) {
    const DocumentRecord* d = ds.find_document(a.document);
    const SequenceRecord* s = ds.find_sequence(a.sequence);
    if (!d || !s) {
      report.violations.push_back(
          {"dangling_attempt", "attempt " + a.document + "/" + a.sequence});
      continue;
    }
    if (a.label != d->label)
      report.violations.push_back(
          {"attempt_label_mismatch", "attempt " + a.document + "/" + a.sequence});
    bool pair_ok = d->label == Label::Morphed
                       ? (s->subject == d->subject_a ||
                          (d->subject_b && s->subject == *d->subject_b))
                       : s->subject == d->subject_a;
    if (!pair_ok)
      report.violations.push_back(
          {"attempt_subject_mismatch", "attempt " + a.document + "/" + a.sequence});
  }

  // Documents that can never produce an attempt are legal; surface them.
  for (const auto& d : ds.documents) {
    bool any = false;
    for (const auto& s : ds.sequences) {
      if (d.label == Label::Morphed
              ? (s.subject == d.subject_a || (d.subject_b && s.subject == *d.subject_b))
              : s.subject == d.subject_a) {
        any = true;
        break;
      }
    }
    if (!any)
      report.warnings.push_back({"document_without_sequence", "document " + d.id});
  }

  return report;
}

}  // namespace vmad
