#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "vmad/dataset.hpp"
#include "vmad/errors.hpp"
#include "vmad/rng.hpp"

namespace vmad {

struct QualityDistribution {
  enum class Kind { Uniform, Beta };
  Kind kind = Kind::Uniform;
  double a = 0.0;  // uniform lo / beta alpha
  double b = 1.0;  // uniform hi / beta beta
};

// Synthetic stand-in for a gate database. Subjects are split into a
// bona fide pool (own documents, no morph involvement) and a morph pool
// (contributors only), so every generated sequence serves attempts of a
// single label and per-frame score means stay label-consistent.
struct ScenarioConfig {
  long n_subjects = 12;
  long n_bonafide_docs = 10;
  long n_morph_docs = 20;
  long frames_min = 30;
  long frames_max = 70;  // default range straddles the 50-frame clip length
  double bonafide_score_mean = 0.35;
  double morph_score_mean = 0.65;
  double base_noise_sd = 0.2;
  double quality_noise_coupling = 1.0;  // extra noise sd multiplier at quality 0
  QualityDistribution quality_distribution;
  double sequence_coverage = 1.0;  // probability a subject has gate sequences
  long sequences_per_subject = 1;
  uint64_t seed = 1;

  long bonafide_subjects() const {
    if (n_bonafide_docs <= 0) return 0;
    if (n_morph_docs <= 0) return n_subjects;
    return std::max(1L, n_subjects / 2);
  }

  void validate() const {
    if (n_subjects < 1) fail(ErrorCode::InvalidConfig, "need at least one subject");
    if (n_bonafide_docs < 0 || n_morph_docs < 0)
      fail(ErrorCode::InvalidConfig, "negative document count");
    if (n_bonafide_docs + n_morph_docs == 0)
      fail(ErrorCode::InvalidConfig, "no documents configured");
    if (frames_min < 1 || frames_max < frames_min)
      fail(ErrorCode::InvalidConfig, "bad frames_per_sequence range");
    if (!(bonafide_score_mean >= 0.0 && bonafide_score_mean <= 1.0) ||
        !(morph_score_mean >= 0.0 && morph_score_mean <= 1.0))
      fail(ErrorCode::InvalidConfig, "score means must lie in [0,1]");
    if (!(bonafide_score_mean < morph_score_mean))
      fail(ErrorCode::InvalidConfig, "bonafide_score_mean must be below morph_score_mean");
    if (base_noise_sd < 0.0) fail(ErrorCode::InvalidConfig, "negative base_noise_sd");
    if (quality_noise_coupling < 0.0)
      fail(ErrorCode::InvalidConfig, "negative quality_noise_coupling");
    if (!(sequence_coverage > 0.0 && sequence_coverage <= 1.0))
      fail(ErrorCode::InvalidConfig, "sequence_coverage must lie in (0,1]");
    if (sequences_per_subject < 1)
      fail(ErrorCode::InvalidConfig, "sequences_per_subject must be >= 1");
    if (quality_distribution.kind == QualityDistribution::Kind::Uniform) {
      if (!(quality_distribution.a >= 0.0 && quality_distribution.b <= 1.0 &&
            quality_distribution.a <= quality_distribution.b))
        fail(ErrorCode::InvalidConfig, "uniform quality range must satisfy 0 <= lo <= hi <= 1");
    } else {
      if (!(quality_distribution.a > 0.0 && quality_distribution.b > 0.0))
        fail(ErrorCode::InvalidConfig, "beta quality shapes must be positive");
    }
    if (n_bonafide_docs > 0 && bonafide_subjects() < 1)
      fail(ErrorCode::InvalidConfig, "no subjects left for bona fide documents");
    if (n_morph_docs > 0 && n_subjects - bonafide_subjects() < 2)
      fail(ErrorCode::InvalidConfig, "need at least 2 morph-pool subjects for morphed documents");
  }
};

namespace detail {

inline std::string padded_id(const char* prefix, long k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04ld", prefix, k);
  return buf;
}

}  // namespace detail

// [OP] generate_scenario. Deterministic single pass: subject roles,
// documents, sequence coverage, then per-frame quality + score draws in
// a fixed order. Emits tracks `mad:synth` and `q:synth`.
inline Dataset generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Dataset ds;

  const long nb = cfg.bonafide_subjects();
  std::vector<SubjectId> bona_pool, morph_pool;
  for (long i = 0; i < cfg.n_subjects; ++i) {
    SubjectId id = detail::padded_id("S", i + 1);
    (i < nb ? bona_pool : morph_pool).push_back(id);
    ds.subjects.push_back(std::move(id));
  }

  for (long i = 0; i < cfg.n_bonafide_docs; ++i) {
    DocumentRecord d;
    d.id = detail::padded_id("DB", i + 1);
    d.label = Label::BonaFide;
    d.subject_a = bona_pool[rng.below(bona_pool.size())];
    ds.documents.push_back(std::move(d));
  }
  for (long i = 0; i < cfg.n_morph_docs; ++i) {
    DocumentRecord d;
    d.id = detail::padded_id("DM", i + 1);
    d.label = Label::Morphed;
    const size_t a = rng.below(morph_pool.size());
    size_t b = rng.below(morph_pool.size() - 1);
    if (b >= a) ++b;
    d.subject_a = morph_pool[a];
    d.subject_b = morph_pool[b];
    ds.documents.push_back(std::move(d));
  }

  auto draw_quality = [&]() {
    if (cfg.quality_distribution.kind == QualityDistribution::Kind::Uniform)
      return rng.uniform(cfg.quality_distribution.a, cfg.quality_distribution.b);
    return rng.beta(cfg.quality_distribution.a, cfg.quality_distribution.b);
  };

  long seq_counter = 0;
  for (long i = 0; i < cfg.n_subjects; ++i) {
    const bool covered = rng.uniform01() < cfg.sequence_coverage;
    if (!covered) continue;
    const bool is_bona = i < nb;
    const double mean = is_bona ? cfg.bonafide_score_mean : cfg.morph_score_mean;
    for (long s = 0; s < cfg.sequences_per_subject; ++s) {
      SequenceRecord seq;
      seq.id = detail::padded_id("G", ++seq_counter);
      seq.subject = ds.subjects[static_cast<size_t>(i)];
      const long n_frames = static_cast<long>(
          rng.integer(static_cast<uint64_t>(cfg.frames_min), static_cast<uint64_t>(cfg.frames_max)));
      for (long f = 0; f < n_frames; ++f) {
        FrameRecord fr;
        fr.id = detail::padded_id("F", f + 1);
        const double q = draw_quality();
        const double sd =
            cfg.base_noise_sd * (1.0 + cfg.quality_noise_coupling * (1.0 - q));
        const double score = std::clamp(rng.normal(mean, sd), 0.0, 1.0);
        fr.mad_scores["synth"] = score;
        fr.quality_scores["synth"] = q;
        seq.frames.push_back(std::move(fr));
      }
      ds.sequences.push_back(std::move(seq));
    }
  }

  ds.attempts = pair_attempts(ds);
  return ds;
}

// [OP] scenario_suite: one dataset per seed, same config otherwise.
inline std::vector<Dataset> scenario_suite(const ScenarioConfig& cfg,
                                           std::span<const uint64_t> seeds) {
  if (seeds.empty()) fail(ErrorCode::InvalidConfig, "empty seed list");
  std::vector<Dataset> out;
  out.reserve(seeds.size());
  for (uint64_t s : seeds) {
    ScenarioConfig c = cfg;
    c.seed = s;
    out.push_back(generate_scenario(c));
  }
  return out;
}

// Mirrors the scale of a realistic acquisition campaign: 60 subjects,
// a couple hundred bona fide documents, over a thousand morphs, roughly
// 50-frame sequences, with only part of the subjects ever passing a
// gate. Score means sit close enough that single frames are unreliable
// and fusion strategies separate visibly.
inline ScenarioConfig campaign_scale_config() {
  ScenarioConfig cfg;
  cfg.n_subjects = 60;
  cfg.n_bonafide_docs = 205;
  cfg.n_morph_docs = 1142;
  cfg.frames_min = 30;
  cfg.frames_max = 70;
  cfg.bonafide_score_mean = 0.42;
  cfg.morph_score_mean = 0.58;
  cfg.base_noise_sd = 0.3;
  cfg.sequence_coverage = 0.5;
  return cfg;
}

}  // namespace vmad
