#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vmad/dataset.hpp"
#include "vmad/errors.hpp"
#include "vmad/quality.hpp"
#include "vmad/rng.hpp"
#include "vmad/text.hpp"

namespace vmad {

// phi functions: each one condenses the per-frame score sequence of a
// single attempt into one sequence-level score. All are pure.

inline Score fuse_avg(std::span<const Score> scores) {
  if (scores.empty()) fail(ErrorCode::EmptySequence, "fuse_avg");
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

// Median; for even n the mean of the two central order statistics.
inline Score fuse_med(std::span<const Score> scores) {
  if (scores.empty()) fail(ErrorCode::EmptySequence, "fuse_med");
  std::vector<Score> v(scores.begin(), scores.end());
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Fraction of frames voting "morph": strictly greater than thr, so a
// score exactly at the threshold counts as a non-morph vote.
inline Score fuse_vote(std::span<const Score> scores, double thr) {
  if (scores.empty()) fail(ErrorCode::EmptySequence, "fuse_vote");
  if (!(thr >= 0.0 && thr <= 1.0))
    fail(ErrorCode::ThresholdOutOfRange, "vote threshold " + format_double(thr));
  size_t votes = 0;
  for (double s : scores)
    if (s > thr) ++votes;
  return static_cast<double>(votes) / static_cast<double>(scores.size());
}

enum class WavgMode {
  Normalized,  // sum(D*Q) / sum(Q); stays in [0,1] and is comparable across lengths
  RawSum,      // literal sum(D*Q), for fidelity experiments
};

inline Score fuse_wavg(std::span<const Score> scores, std::span<const Score> weights,
                       WavgMode mode = WavgMode::Normalized) {
  if (scores.empty()) fail(ErrorCode::EmptySequence, "fuse_wavg");
  if (scores.size() != weights.size())
    fail(ErrorCode::LengthMismatch, std::to_string(scores.size()) + " scores vs " +
                                        std::to_string(weights.size()) + " weights");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (weights[i] < 0.0)
      fail(ErrorCode::InvalidArgument, "negative weight " + format_double(weights[i]));
    num += scores[i] * weights[i];
    den += weights[i];
  }
  if (mode == WavgMode::RawSum) return num;
  if (den <= 0.0) fail(ErrorCode::AllZeroWeights, "fuse_wavg");
  return num / den;
}

// Score of the highest-quality frame; ties go to the lowest frame index.
inline Score fuse_best_quality(std::span<const Score> scores,
                               std::span<const Score> qualities) {
  if (scores.empty()) fail(ErrorCode::EmptySequence, "fuse_best_quality");
  if (scores.size() != qualities.size())
    fail(ErrorCode::LengthMismatch, std::to_string(scores.size()) + " scores vs " +
                                        std::to_string(qualities.size()) + " qualities");
  size_t best = 0;
  for (size_t i = 1; i < qualities.size(); ++i)
    if (qualities[i] > qualities[best]) best = i;
  return scores[best];
}

// Uniform pick of one frame score. The key is a counter-based RNG key,
// normally mix_key(seed, attempt_index), so the draw for one attempt
// never depends on evaluation order.
inline Score baseline_rnd(std::span<const Score> scores, uint64_t key) {
  if (scores.empty()) fail(ErrorCode::EmptySequence, "baseline_rnd");
  Rng rng(key);
  return scores[rng.below(scores.size())];
}

// Label-aware oracle: minimum frame score for bona fide attempts,
// maximum for morphed ones. The theoretical bound, not a deployable
// strategy.
inline Score baseline_mxd(std::span<const Score> scores, Label label) {
  if (scores.empty()) fail(ErrorCode::EmptySequence, "baseline_mxd");
  if (label == Label::Unknown)
    fail(ErrorCode::InvalidArgument, "mxd oracle needs ground-truth labels");
  return label == Label::BonaFide ? *std::min_element(scores.begin(), scores.end())
                                  : *std::max_element(scores.begin(), scores.end());
}

struct FusionStrategy {
  enum class Kind { Avg, Med, Vote, WAvg, BestQuality, Rnd, Mxd };

  Kind kind = Kind::Avg;
  std::string mad_track;          // detector name, no "mad:" prefix
  double vote_threshold = 0.5;    // Vote only
  std::string quality_track;      // WAvg / BestQuality, no "q:" prefix
  QualityNormalization quality_norm;  // applied to WAvg weights
  WavgMode wavg_mode = WavgMode::Normalized;
  uint64_t rnd_seed = 0;          // Rnd only

  // Descriptor used in fused-table exports.
  std::string label() const {
    switch (kind) {
      case Kind::Avg: return "avg";
      case Kind::Med: return "med";
      case Kind::Vote: return "vote:" + format_double(vote_threshold, 6);
      case Kind::WAvg: {
        std::string s = wavg_mode == WavgMode::RawSum ? "wavg-sum:q:" : "wavg:q:";
        s += quality_track;
        if (quality_norm.kind == QualityNormalization::Kind::DivideBy100)
          s += ":div100";
        else if (quality_norm.kind == QualityNormalization::Kind::DivideByDatasetMedian)
          s += ":median";
        return s;
      }
      case Kind::BestQuality: return "best:q:" + quality_track;
      case Kind::Rnd: return "rnd";
      case Kind::Mxd: return "mxd";
    }
    return "?";
  }
};

struct VmadScore {
  Attempt attempt;
  Score value = 0.0;
  std::string strategy;
};

namespace detail {

inline std::vector<Score> gather_track(const Attempt& a,
                                       const SequenceRecord& seq, bool mad,
                                       const std::string& name) {
  std::vector<Score> out;
  out.reserve(seq.frames.size());
  for (const auto& f : seq.frames) {
    const auto& m = mad ? f.mad_scores : f.quality_scores;
    auto it = m.find(name);
    if (it == m.end())
      fail(ErrorCode::MissingTrack, "attempt " + a.document + "/" + a.sequence + ": frame " +
                                        f.id + " lacks track " + (mad ? "mad:" : "q:") + name);
    out.push_back(it->second);
  }
  return out;
}

}  // namespace detail

// [OP] apply_strategy: one VmadScore per attempt, order preserved.
inline std::vector<VmadScore> apply_strategy(const Dataset& ds,
                                             std::span<const Attempt> attempts,
                                             const FusionStrategy& strategy) {
  std::vector<VmadScore> out;
  out.reserve(attempts.size());
  const std::string label = strategy.label();
  for (size_t i = 0; i < attempts.size(); ++i) {
    const Attempt& a = attempts[i];
    const SequenceRecord* seq = ds.find_sequence(a.sequence);
    if (!seq)
      fail(ErrorCode::ReferentialIntegrityError,
           "attempt references unknown sequence " + a.sequence);
    std::vector<Score> scores =
        detail::gather_track(a, *seq, /*mad=*/true, strategy.mad_track);

    Score v = 0.0;
    switch (strategy.kind) {
      case FusionStrategy::Kind::Avg:
        v = fuse_avg(scores);
        break;
      case FusionStrategy::Kind::Med:
        v = fuse_med(scores);
        break;
      case FusionStrategy::Kind::Vote:
        v = fuse_vote(scores, strategy.vote_threshold);
        break;
      case FusionStrategy::Kind::WAvg: {
        std::vector<Score> raw =
            detail::gather_track(a, *seq, /*mad=*/false, strategy.quality_track);
        std::vector<Score> weights(raw.size());
        for (size_t k = 0; k < raw.size(); ++k)
          weights[k] = normalize_quality(raw[k], strategy.quality_norm);
        v = fuse_wavg(scores, weights, strategy.wavg_mode);
        break;
      }
      case FusionStrategy::Kind::BestQuality: {
        std::vector<Score> raw =
            detail::gather_track(a, *seq, /*mad=*/false, strategy.quality_track);
        v = fuse_best_quality(scores, raw);
        break;
      }
      case FusionStrategy::Kind::Rnd:
        v = baseline_rnd(scores, mix_key(strategy.rnd_seed, i));
        break;
      case FusionStrategy::Kind::Mxd:
        v = baseline_mxd(scores, a.label);
        break;
    }
    out.push_back({a, v, label});
  }
  return out;
}

// Fused-score table: `document_id,sequence_id,label,strategy,value`.

inline constexpr const char* kFusedTableHeader = "document_id,sequence_id,label,strategy,value";

inline std::string save_fused_table(std::span<const VmadScore> rows) {
  std::string out;
  out += kFusedTableHeader;
  out += "\n";
  for (const auto& r : rows) {
    out += r.attempt.document + "," + r.attempt.sequence + "," + label_name(r.attempt.label) +
           "," + r.strategy + "," + format_double(r.value) + "\n";
  }
  return out;
}

inline std::vector<VmadScore> parse_fused_table(const std::string& content,
                                                const std::filesystem::path& path) {
  const std::vector<Line> lines = logical_lines(content);
  if (lines.empty() || lines.front().text != kFusedTableHeader)
    fail(ErrorCode::ParseError,
         path.string() + ": missing header '" + std::string(kFusedTableHeader) + "'");
  std::vector<VmadScore> rows;
  for (size_t i = 1; i < lines.size(); ++i) {
    const std::string ctx = path.string() + ":" + std::to_string(lines[i].number);
    auto f = split(lines[i].text, ',');
    if (f.size() != 5) fail(ErrorCode::ParseError, ctx + ": expected 5 fields");
    VmadScore r;
    r.attempt.document = f[0];
    r.attempt.sequence = f[1];
    r.attempt.label = parse_label(f[2], ctx);
    r.strategy = f[3];
    r.value = parse_double(f[4], ctx);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace vmad
