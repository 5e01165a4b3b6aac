#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "vmad/dataset.hpp"
#include "vmad/errors.hpp"
#include "vmad/text.hpp"

// Manifest: UTF-8 comma-delimited text. Four sections, each opened by a
// [name] marker followed by a mandatory header line with a fixed field
// order. '#' starts a comment, blank lines are ignored.
//
//   [subjects]   subject_id
//   [documents]  document_id,label,subject_a,subject_b
//   [tracks]     track_name,polarity          (optional section)
//   [sequences]  sequence_id,subject_id
//   [frames]     sequence_id,frame_id,image_path,face_x,face_y,face_w,face_h
//
// Score table: header `sequence_id,frame_id,track_name,value`, '.' decimal
// separator. Track names beginning `mad:` are range-checked to [0,1];
// `q:` tracks carry raw values. Files always store the detector's native
// orientation; tracks declared `low` in [tracks] are flipped to the
// global higher-is-morph orientation at ingestion and back on save.

namespace vmad {

namespace detail {

inline void check_id(const std::string& id, const std::string& context) {
  if (id.empty()) fail(ErrorCode::ParseError, context + ": empty identifier");
  if (id.find_first_of(", \t[") != std::string::npos)
    fail(ErrorCode::ParseError, context + ": bad identifier '" + id + "'");
}

inline std::string line_ctx(const std::filesystem::path& path, size_t lineno) {
  return path.string() + ":" + std::to_string(lineno);
}

}  // namespace detail

inline std::string save_manifest(const Dataset& ds) {
  std::string out;
  out += "# vmad dataset manifest\n";
  out += "[subjects]\nsubject_id\n";
  for (const auto& s : ds.subjects) out += s + "\n";
  out += "[documents]\ndocument_id,label,subject_a,subject_b\n";
  for (const auto& d : ds.documents) {
    out += d.id;
    out += ",";
    out += label_name(d.label);
    out += "," + d.subject_a + ",";
    if (d.subject_b) out += *d.subject_b;
    out += "\n";
  }
  if (!ds.mad_track_polarity.empty()) {
    out += "[tracks]\ntrack_name,polarity\n";
    for (const auto& [name, pol] : ds.mad_track_polarity)
      out += "mad:" + name + "," + (pol == TrackPolarity::LowIsMorph ? "low" : "high") + "\n";
  }
  out += "[sequences]\nsequence_id,subject_id\n";
  for (const auto& s : ds.sequences) out += s.id + "," + s.subject + "\n";
  out += "[frames]\nsequence_id,frame_id,image_path,face_x,face_y,face_w,face_h\n";
  for (const auto& s : ds.sequences) {
    for (const auto& f : s.frames) {
      out += s.id + "," + f.id + "," + f.image_path + ",";
      if (f.face_box) {
        out += std::to_string(f.face_box->x) + "," + std::to_string(f.face_box->y) + "," +
               std::to_string(f.face_box->w) + "," + std::to_string(f.face_box->h);
      } else {
        out += ",,,";
      }
      out += "\n";
    }
  }
  return out;
}

// [OP] load_manifest. Throws MissingFile / ParseError on malformed input
// and ReferentialIntegrityError when the parsed dataset breaks an
// invariant. Attempts are not paired here; see pair_attempts.
inline Dataset load_manifest(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  const std::vector<Line> lines = logical_lines(content);

  static const std::map<std::string, std::string> kHeaders = {
      {"subjects", "subject_id"},
      {"documents", "document_id,label,subject_a,subject_b"},
      {"tracks", "track_name,polarity"},
      {"sequences", "sequence_id,subject_id"},
      {"frames", "sequence_id,frame_id,image_path,face_x,face_y,face_w,face_h"},
  };

  std::map<std::string, std::vector<Line>> sections;
  std::string current;
  std::set<std::string> seen;
  size_t i = 0;
  while (i < lines.size()) {
    const Line& ln = lines[i];
    if (ln.text.front() == '[') {
      if (ln.text.back() != ']')
        fail(ErrorCode::ParseError, detail::line_ctx(path, ln.number) + ": bad section marker");
      current = ln.text.substr(1, ln.text.size() - 2);
      auto hdr = kHeaders.find(current);
      if (hdr == kHeaders.end())
        fail(ErrorCode::ParseError,
             detail::line_ctx(path, ln.number) + ": unknown section [" + current + "]");
      if (!seen.insert(current).second)
        fail(ErrorCode::ParseError,
             detail::line_ctx(path, ln.number) + ": duplicate section [" + current + "]");
      ++i;
      if (i >= lines.size() || lines[i].text != hdr->second)
        fail(ErrorCode::ParseError, detail::line_ctx(path, ln.number) + ": section [" + current +
                                        "] must be followed by header '" + hdr->second + "'");
      ++i;
      continue;
    }
    if (current.empty())
      fail(ErrorCode::ParseError,
           detail::line_ctx(path, ln.number) + ": data before any section marker");
    sections[current].push_back(ln);
    ++i;
  }

  Dataset ds;
  for (const Line& ln : sections["subjects"]) {
    detail::check_id(ln.text, detail::line_ctx(path, ln.number));
    ds.subjects.push_back(ln.text);
  }
  for (const Line& ln : sections["documents"]) {
    auto f = split(ln.text, ',');
    const std::string ctx = detail::line_ctx(path, ln.number);
    if (f.size() != 4) fail(ErrorCode::ParseError, ctx + ": expected 4 fields");
    DocumentRecord d;
    detail::check_id(f[0], ctx);
    d.id = f[0];
    d.label = parse_label(f[1], ctx);
    detail::check_id(f[2], ctx);
    d.subject_a = f[2];
    if (!f[3].empty()) {
      detail::check_id(f[3], ctx);
      d.subject_b = f[3];
    }
    ds.documents.push_back(std::move(d));
  }
  for (const Line& ln : sections["tracks"]) {
    auto f = split(ln.text, ',');
    const std::string ctx = detail::line_ctx(path, ln.number);
    if (f.size() != 2) fail(ErrorCode::ParseError, ctx + ": expected 2 fields");
    if (f[0].rfind("mad:", 0) != 0)
      fail(ErrorCode::ParseError, ctx + ": polarity applies to mad: tracks only");
    TrackPolarity pol;
    if (f[1] == "high")
      pol = TrackPolarity::HighIsMorph;
    else if (f[1] == "low")
      pol = TrackPolarity::LowIsMorph;
    else
      fail(ErrorCode::ParseError, ctx + ": polarity must be high or low");
    ds.mad_track_polarity[f[0].substr(4)] = pol;
  }
  for (const Line& ln : sections["sequences"]) {
    auto f = split(ln.text, ',');
    const std::string ctx = detail::line_ctx(path, ln.number);
    if (f.size() != 2) fail(ErrorCode::ParseError, ctx + ": expected 2 fields");
    detail::check_id(f[0], ctx);
    detail::check_id(f[1], ctx);
    ds.sequences.push_back({f[0], f[1], {}});
  }
  for (const Line& ln : sections["frames"]) {
    auto f = split(ln.text, ',');
    const std::string ctx = detail::line_ctx(path, ln.number);
    if (f.size() != 7) fail(ErrorCode::ParseError, ctx + ": expected 7 fields");
    detail::check_id(f[0], ctx);
    detail::check_id(f[1], ctx);
    SequenceRecord* seq = nullptr;
    for (auto& s : ds.sequences)
      if (s.id == f[0]) seq = &s;
    if (!seq)
      fail(ErrorCode::ReferentialIntegrityError, ctx + ": frame references unknown sequence " + f[0]);
    FrameRecord fr;
    fr.id = f[1];
    fr.image_path = f[2];
    const bool all_empty = f[3].empty() && f[4].empty() && f[5].empty() && f[6].empty();
    const bool none_empty = !f[3].empty() && !f[4].empty() && !f[5].empty() && !f[6].empty();
    if (!all_empty && !none_empty)
      fail(ErrorCode::ParseError, ctx + ": face box needs all four fields or none");
    if (none_empty)
      fr.face_box = FaceBox{parse_long(f[3], ctx), parse_long(f[4], ctx),
                            parse_long(f[5], ctx), parse_long(f[6], ctx)};
    seq->frames.push_back(std::move(fr));
  }

  ValidationReport report = validate_dataset(ds);
  if (!report.ok())
    fail(ErrorCode::ReferentialIntegrityError,
         path.string() + ": " + report.violations.front().message + " (" +
             std::to_string(report.violations.size()) + " violation(s))");
  return ds;
}

inline constexpr const char* kScoreTableHeader = "sequence_id,frame_id,track_name,value";

// Writes every score track, or only the prefixed names in `tracks`.
inline std::string save_score_table(const Dataset& ds,
                                    const std::vector<std::string>& tracks = {}) {
  auto wanted = [&](const std::string& prefixed) {
    if (tracks.empty()) return true;
    return std::find(tracks.begin(), tracks.end(), prefixed) != tracks.end();
  };
  std::string out;
  out += kScoreTableHeader;
  out += "\n";
  for (const auto& s : ds.sequences) {
    for (const auto& f : s.frames) {
      for (const auto& [name, v] : f.mad_scores) {
        if (!wanted("mad:" + name)) continue;
        auto pol = ds.mad_track_polarity.find(name);
        double raw = (pol != ds.mad_track_polarity.end() &&
                      pol->second == TrackPolarity::LowIsMorph)
                         ? 1.0 - v
                         : v;
        out += s.id + "," + f.id + ",mad:" + name + "," + format_double(raw) + "\n";
      }
      for (const auto& [name, v] : f.quality_scores)
        if (wanted("q:" + name))
          out += s.id + "," + f.id + ",q:" + name + "," + format_double(v) + "\n";
    }
  }
  return out;
}

// [OP] load_score_table core. Validates every row first and only then
// commits, so a failed load leaves the dataset untouched. Re-assigning a
// (frame, track) that already carries a value is a DuplicateEntry.
inline void attach_score_table(Dataset& ds, const std::string& content,
                               const std::filesystem::path& path) {
  const std::vector<Line> lines = logical_lines(content);
  if (lines.empty() || lines.front().text != kScoreTableHeader)
    fail(ErrorCode::ParseError,
         path.string() + ": missing header '" + std::string(kScoreTableHeader) + "'");

  std::map<std::pair<SequenceId, FrameId>, FrameRecord*> index;
  for (auto& s : ds.sequences)
    for (auto& f : s.frames) index[{s.id, f.id}] = &f;

  struct Row {
    FrameRecord* frame;
    bool is_mad;
    std::string name;  // without prefix
    double value;
  };
  std::vector<Row> rows;
  std::set<std::tuple<SequenceId, FrameId, std::string>> fresh;

  for (size_t i = 1; i < lines.size(); ++i) {
    const Line& ln = lines[i];
    const std::string ctx = detail::line_ctx(path, ln.number);
    auto f = split(ln.text, ',');
    if (f.size() != 4) fail(ErrorCode::ParseError, ctx + ": expected 4 fields");
    auto it = index.find({f[0], f[1]});
    if (it == index.end())
      fail(ErrorCode::UnknownFrame, ctx + ": no frame " + f[0] + "/" + f[1]);
    Row row;
    row.frame = it->second;
    if (f[2].rfind("mad:", 0) == 0) {
      row.is_mad = true;
      row.name = f[2].substr(4);
    } else if (f[2].rfind("q:", 0) == 0) {
      row.is_mad = false;
      row.name = f[2].substr(2);
    } else {
      fail(ErrorCode::ParseError, ctx + ": track name must start with mad: or q:");
    }
    if (row.name.empty()) fail(ErrorCode::ParseError, ctx + ": empty track name");
    row.value = parse_double(f[3], ctx);
    if (row.is_mad) {
      if (!(row.value >= 0.0 && row.value <= 1.0))
        fail(ErrorCode::ScoreOutOfRange,
             ctx + ": mad:" + row.name + " = " + f[3] + " outside [0,1]");
      auto pol = ds.mad_track_polarity.find(row.name);
      if (pol != ds.mad_track_polarity.end() && pol->second == TrackPolarity::LowIsMorph)
        row.value = 1.0 - row.value;
    }
    const auto& existing = row.is_mad ? row.frame->mad_scores : row.frame->quality_scores;
    if (existing.count(row.name) || !fresh.insert({f[0], f[1], f[2]}).second)
      fail(ErrorCode::DuplicateEntry, ctx + ": " + f[2] + " already set for " + f[0] + "/" + f[1]);
    rows.push_back(std::move(row));
  }

  for (const Row& row : rows) {
    auto& target = row.is_mad ? row.frame->mad_scores : row.frame->quality_scores;
    target[row.name] = row.value;
  }
}

inline Dataset load_score_table(const std::filesystem::path& path, const Dataset& ds) {
  Dataset out = ds;
  attach_score_table(out, read_file(path), path);
  return out;
}

}  // namespace vmad
