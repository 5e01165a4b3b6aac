#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <list>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vmad/dataset.hpp"
#include "vmad/errors.hpp"
#include "vmad/quality.hpp"
#include "vmad/rng.hpp"
#include "vmad/text.hpp"

namespace vmad {

// Fixed-length feature vector built from per-frame score tracks: for each
// track, the first max_frames values in frame order, padded with
// pad_value, quality tracks normalized first; tracks concatenated in
// order. Dimension depends only on the layout, never on the sequence.
struct FeatureLayout {
  size_t max_frames = 50;
  std::vector<std::string> tracks;  // prefixed names ("mad:x", "q:y"); first must be mad:
  double pad_value = 0.0;
  std::map<std::string, QualityNormalization> normalizations;  // by prefixed name

  size_t dimension() const { return max_frames * tracks.size(); }

  void validate() const {
    if (max_frames == 0) fail(ErrorCode::InvalidConfig, "layout: max_frames must be >= 1");
    if (tracks.empty()) fail(ErrorCode::InvalidConfig, "layout: no tracks");
    if (tracks.front().rfind("mad:", 0) != 0)
      fail(ErrorCode::InvalidConfig, "layout: first track must be a mad: track");
    for (const auto& t : tracks)
      if (t.rfind("mad:", 0) != 0 && t.rfind("q:", 0) != 0)
        fail(ErrorCode::InvalidConfig, "layout: bad track name " + t);
    if (!(pad_value >= 0.0 && pad_value <= 1.0))
      fail(ErrorCode::InvalidConfig, "layout: pad_value outside [0,1]");
  }
};

// [OP] assemble_features for one attempt.
inline std::vector<double> assemble_features(const Dataset& ds, const Attempt& attempt,
                                             const FeatureLayout& layout) {
  layout.validate();
  const SequenceRecord* seq = ds.find_sequence(attempt.sequence);
  if (!seq)
    fail(ErrorCode::ReferentialIntegrityError,
         "attempt references unknown sequence " + attempt.sequence);
  if (seq->frames.empty()) fail(ErrorCode::EmptySequence, "sequence " + seq->id);

  std::vector<double> out;
  out.reserve(layout.dimension());
  for (const auto& track : layout.tracks) {
    const bool is_mad = track.rfind("mad:", 0) == 0;
    const std::string name = is_mad ? track.substr(4) : track.substr(2);
    QualityNormalization norm;
    if (auto it = layout.normalizations.find(track); it != layout.normalizations.end())
      norm = it->second;
    const size_t take = std::min(layout.max_frames, seq->frames.size());
    for (size_t i = 0; i < take; ++i) {
      const FrameRecord& f = seq->frames[i];
      const auto& m = is_mad ? f.mad_scores : f.quality_scores;
      auto it = m.find(name);
      if (it == m.end())
        fail(ErrorCode::MissingTrack, "attempt " + attempt.document + "/" + attempt.sequence +
                                          ": frame " + f.id + " lacks track " + track);
      out.push_back(is_mad ? it->second : normalize_quality(it->second, norm));
    }
    out.resize(out.size() + (layout.max_frames - take), layout.pad_value);
  }
  return out;
}

// [OP] split_dataset. Disjoint exhaustive partition, stratified by label,
// with every attempt of a document on the same side (no document leaks
// across the split). Greedy largest-group-first assignment keeps each
// side's label counts as close to the target fraction as the grouping
// allows.
inline std::pair<std::vector<Attempt>, std::vector<Attempt>> split_dataset(
    std::span<const Attempt> attempts, double fraction, uint64_t seed) {
  if (attempts.empty()) fail(ErrorCode::TooFewAttempts, "no attempts to split");
  if (!(fraction > 0.0 && fraction < 1.0))
    fail(ErrorCode::InvalidArgument, "split fraction must lie in (0,1)");

  struct Group {
    DocumentId doc;
    Label label;
    std::vector<size_t> indices;  // into attempts
  };
  std::map<DocumentId, Group> by_doc;
  for (size_t i = 0; i < attempts.size(); ++i) {
    const Attempt& a = attempts[i];
    if (a.label == Label::Unknown)
      fail(ErrorCode::InvalidArgument, "cannot stratify unlabeled attempt " + a.document);
    auto& g = by_doc[a.document];
    g.doc = a.document;
    g.label = a.label;
    g.indices.push_back(i);
  }

  std::vector<bool> to_train(attempts.size(), false);
  for (Label cls : {Label::BonaFide, Label::Morphed}) {
    std::vector<Group*> groups;
    size_t total = 0;
    for (auto& [id, g] : by_doc) {
      if (g.label != cls) continue;
      groups.push_back(&g);
      total += g.indices.size();
    }
    if (groups.empty()) continue;
    if (groups.size() < 2)
      fail(ErrorCode::TooFewAttempts,
           std::string("need >= 2 ") + label_name(cls) + " documents to stratify");

    // seeded shuffle, then stable largest-first
    Rng rng(mix_key(seed, cls == Label::BonaFide ? 1 : 2));
    for (size_t i = groups.size(); i > 1; --i)
      std::swap(groups[i - 1], groups[rng.below(i)]);
    std::stable_sort(groups.begin(), groups.end(), [](const Group* a, const Group* b) {
      return a->indices.size() > b->indices.size();
    });

    const double target_train = fraction * static_cast<double>(total);
    const double target_test = static_cast<double>(total) - target_train;
    double n_train = 0, n_test = 0;
    for (Group* g : groups) {
      const bool train = (target_train - n_train) >= (target_test - n_test);
      for (size_t idx : g->indices) to_train[idx] = train;
      (train ? n_train : n_test) += static_cast<double>(g->indices.size());
    }
    if (n_train == 0 || n_test == 0)
      fail(ErrorCode::TooFewAttempts,
           std::string(label_name(cls)) + " attempts cannot cover both sides");
  }

  std::pair<std::vector<Attempt>, std::vector<Attempt>> out;
  for (size_t i = 0; i < attempts.size(); ++i)
    (to_train[i] ? out.first : out.second).push_back(attempts[i]);
  return out;
}

// [OP] rbf_kernel: exp(-gamma * ||x-y||^2).
inline double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
  if (x.size() != y.size())
    fail(ErrorCode::DimensionMismatch,
         std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  if (!(gamma > 0.0)) fail(ErrorCode::InvalidArgument, "gamma must be positive");
  double d2 = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

struct SvrModel {
  std::vector<std::vector<double>> support_vectors;
  std::vector<double> dual_coefficients;  // alpha - alpha*, |coef| <= c, sum ~ 0
  double bias = 0.0;
  double gamma = 1e-3;
  double c = 1.0;
  double epsilon = 0.1;
  FeatureLayout layout;
};

// Unclamped decision value sum_i coef_i * k(sv_i, x) + bias.
inline double decision_function(const SvrModel& model, std::span<const double> features) {
  if (!model.layout.tracks.empty() && features.size() != model.layout.dimension())
    fail(ErrorCode::DimensionMismatch,
         "feature dim " + std::to_string(features.size()) + " vs layout dim " +
             std::to_string(model.layout.dimension()));
  double f = model.bias;
  for (size_t i = 0; i < model.support_vectors.size(); ++i)
    f += model.dual_coefficients[i] * rbf_kernel(model.support_vectors[i], features, model.gamma);
  return f;
}

// [OP] predict: decision value clamped to the score range.
inline double predict(const SvrModel& model, std::span<const double> features) {
  return std::clamp(decision_function(model, features), 0.0, 1.0);
}

struct TrainOptions {
  double c = 1.0;
  double gamma = 1e-3;
  double epsilon = 0.1;
  double tol = 1e-3;
  size_t max_iterations = 1'000'000;
  size_t cache_budget_bytes = 64ull << 20;
  bool track_objective = false;  // records the dual objective per iteration
};

struct TrainResult {
  SvrModel model;
  size_t iterations = 0;
  double dual_objective = 0.0;  // minimized form
  size_t support_vector_count = 0;
  std::vector<double> objective_trace;
};

namespace detail {

// LRU cache of kernel matrix rows, capped by a byte budget.
class KernelRowCache {
 public:
  KernelRowCache(const std::vector<double>& flat, size_t n, size_t dim, double gamma,
                 size_t budget_bytes)
      : flat_(flat), n_(n), dim_(dim), gamma_(gamma) {
    max_rows_ = std::max<size_t>(2, budget_bytes / (n * sizeof(double) + 1));
  }

  const std::vector<double>& row(size_t i) {
    auto it = index_.find(i);
    if (it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
    std::vector<double> r(n_);
    const double* xi = &flat_[i * dim_];
    for (size_t s = 0; s < n_; ++s) {
      const double* xs = &flat_[s * dim_];
      double d2 = 0.0;
      for (size_t k = 0; k < dim_; ++k) {
        const double d = xi[k] - xs[k];
        d2 += d * d;
      }
      r[s] = std::exp(-gamma_ * d2);
    }
    lru_.emplace_front(i, std::move(r));
    index_[i] = lru_.begin();
    while (lru_.size() > max_rows_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    return lru_.front().second;
  }

 private:
  const std::vector<double>& flat_;
  size_t n_, dim_;
  double gamma_;
  size_t max_rows_;
  std::list<std::pair<size_t, std::vector<double>>> lru_;
  std::unordered_map<size_t, std::list<std::pair<size_t, std::vector<double>>>::iterator> index_;
};

}  // namespace detail

// [OP] train_svr. Sequential minimal optimization on the standard 2n-
// variable dual of epsilon-SVR: variables beta_t in [0, C] with sign
// +1 for t < n (alpha) and -1 for t >= n (alpha*), linear term
// eps -/+ y, and the equality constraint sum(sign * beta) = 0. Working
// pairs are chosen by maximal KKT violation; the run stops when the
// violation gap falls below tol.
inline TrainResult train_svr(const std::vector<std::vector<double>>& features,
                             std::span<const double> targets, const TrainOptions& opt = {}) {
  const size_t n = features.size();
  if (n < 2) fail(ErrorCode::DegenerateInput, "need at least 2 training samples");
  if (targets.size() != n)
    fail(ErrorCode::DegenerateInput, std::to_string(n) + " samples vs " +
                                         std::to_string(targets.size()) + " targets");
  const size_t dim = features.front().size();
  if (dim == 0) fail(ErrorCode::DegenerateInput, "zero-dimensional features");
  for (const auto& f : features)
    if (f.size() != dim) fail(ErrorCode::DegenerateInput, "ragged feature matrix");
  for (double y : targets)
    if (!std::isfinite(y) || y < 0.0 || y > 1.0)
      fail(ErrorCode::DegenerateInput, "targets must lie in [0,1]");
  if (!(opt.c > 0.0)) fail(ErrorCode::InvalidArgument, "c must be positive");
  if (!(opt.gamma > 0.0)) fail(ErrorCode::InvalidArgument, "gamma must be positive");
  if (opt.epsilon < 0.0) fail(ErrorCode::InvalidArgument, "epsilon must be nonnegative");

  std::vector<double> flat(n * dim);
  for (size_t i = 0; i < n; ++i)
    std::copy(features[i].begin(), features[i].end(), flat.begin() + i * dim);
  detail::KernelRowCache cache(flat, n, dim, opt.gamma, opt.cache_budget_bytes);

  const size_t m = 2 * n;
  const double C = opt.c;
  auto sign = [n](size_t t) { return t < n ? 1.0 : -1.0; };
  auto sample = [n](size_t t) { return t < n ? t : t - n; };

  std::vector<double> beta(m, 0.0), grad(m), lin(m);
  for (size_t t = 0; t < m; ++t) {
    lin[t] = t < n ? opt.epsilon - targets[t] : opt.epsilon + targets[t - n];
    grad[t] = lin[t];  // beta = 0
  }

  auto objective = [&]() {
    // 0.5*b'Qb + p'b = 0.5*sum(b*(G+p)) since G = Qb + p
    double obj = 0.0;
    for (size_t t = 0; t < m; ++t) obj += beta[t] * (grad[t] + lin[t]);
    return 0.5 * obj;
  };

  TrainResult res;
  constexpr double kTau = 1e-12;
  size_t iter = 0;
  for (;; ++iter) {
    // maximal violating pair
    double up_max = -std::numeric_limits<double>::infinity();
    double low_min = std::numeric_limits<double>::infinity();
    size_t i = m, j = m;
    for (size_t t = 0; t < m; ++t) {
      const double yg = -sign(t) * grad[t];
      const bool in_up = (sign(t) > 0 && beta[t] < C) || (sign(t) < 0 && beta[t] > 0);
      const bool in_low = (sign(t) < 0 && beta[t] < C) || (sign(t) > 0 && beta[t] > 0);
      if (in_up && yg > up_max) {
        up_max = yg;
        i = t;
      }
      if (in_low && yg < low_min) {
        low_min = yg;
        j = t;
      }
    }
    if (i == m || j == m || up_max - low_min <= opt.tol) break;
    if (iter >= opt.max_iterations)
      fail(ErrorCode::NonConvergence,
           "SMO did not converge within " + std::to_string(opt.max_iterations) + " iterations");

    const auto& ki = cache.row(sample(i));
    const auto& kj = cache.row(sample(j));
    const double qii = ki[sample(i)];
    const double qjj = kj[sample(j)];
    const double kij = ki[sample(j)];

    const double old_i = beta[i], old_j = beta[j];
    if (sign(i) != sign(j)) {
      double quad = qii + qjj + 2.0 * kij;  // Q_ii + Q_jj - 2*Q_ij with Q_ij = -k_ij
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = beta[i] - beta[j];
      beta[i] += delta;
      beta[j] += delta;
      if (diff > 0) {
        if (beta[j] < 0) {
          beta[j] = 0;
          beta[i] = diff;
        }
      } else {
        if (beta[i] < 0) {
          beta[i] = 0;
          beta[j] = -diff;
        }
      }
      if (beta[i] > C) {
        beta[i] = C;
        beta[j] = C - diff;
      }
      if (beta[j] > C) {
        beta[j] = C;
        beta[i] = C + diff;
      }
    } else {
      double quad = qii + qjj - 2.0 * kij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = beta[i] + beta[j];
      beta[i] -= delta;
      beta[j] += delta;
      if (sum > C) {
        if (beta[i] > C) {
          beta[i] = C;
          beta[j] = sum - C;
        }
        if (beta[j] > C) {
          beta[j] = C;
          beta[i] = sum - C;
        }
      } else {
        if (beta[j] < 0) {
          beta[j] = 0;
          beta[i] = sum;
        }
        if (beta[i] < 0) {
          beta[i] = 0;
          beta[j] = sum;
        }
      }
    }

    // rank-2 gradient update; theta deltas carry the dual signs
    const double di = sign(i) * (beta[i] - old_i);
    const double dj = sign(j) * (beta[j] - old_j);
    for (size_t s = 0; s < n; ++s) {
      const double u = di * ki[s] + dj * kj[s];
      grad[s] += u;
      grad[s + n] -= u;
    }
    if (opt.track_objective) res.objective_trace.push_back(objective());
  }

  // bias from the KKT conditions: average over free variables when any
  // exist, midpoint of the feasibility interval otherwise
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  size_t nr_free = 0;
  for (size_t t = 0; t < m; ++t) {
    const double yg = sign(t) * grad[t];
    if (beta[t] >= C) {
      if (sign(t) < 0)
        ub = std::min(ub, yg);
      else
        lb = std::max(lb, yg);
    } else if (beta[t] <= 0) {
      if (sign(t) > 0)
        ub = std::min(ub, yg);
      else
        lb = std::max(lb, yg);
    } else {
      ++nr_free;
      sum_free += yg;
    }
  }
  const double rho = nr_free > 0 ? sum_free / static_cast<double>(nr_free) : 0.5 * (ub + lb);

  res.iterations = iter;
  res.dual_objective = objective();
  res.model.bias = -rho;
  res.model.gamma = opt.gamma;
  res.model.c = opt.c;
  res.model.epsilon = opt.epsilon;
  for (size_t s = 0; s < n; ++s) {
    const double theta = beta[s] - beta[s + n];
    if (theta != 0.0) {
      res.model.support_vectors.push_back(features[s]);
      res.model.dual_coefficients.push_back(theta);
    }
  }
  res.support_vector_count = res.model.support_vectors.size();
  return res;
}

// --- model persistence (versioned plain text) ---

inline std::string save_svr_model(const SvrModel& model) {
  std::string out = "# vmad svr model\n";
  out += "version,1\n";
  out += "c," + format_double(model.c) + "\n";
  out += "gamma," + format_double(model.gamma) + "\n";
  out += "epsilon," + format_double(model.epsilon) + "\n";
  out += "bias," + format_double(model.bias) + "\n";
  out += "max_frames," + std::to_string(model.layout.max_frames) + "\n";
  out += "pad_value," + format_double(model.layout.pad_value) + "\n";
  out += "tracks,";
  for (size_t i = 0; i < model.layout.tracks.size(); ++i)
    out += (i ? ";" : "") + model.layout.tracks[i];
  out += "\n";
  for (const auto& [track, norm] : model.layout.normalizations) {
    out += "norm," + track + ",";
    switch (norm.kind) {
      case QualityNormalization::Kind::Identity: out += "identity,"; break;
      case QualityNormalization::Kind::DivideBy100: out += "div100,"; break;
      case QualityNormalization::Kind::DivideByDatasetMedian:
        out += "median," + format_double(norm.statistic);
        break;
    }
    out += "\n";
  }
  out += "support_vector_count," + std::to_string(model.support_vectors.size()) + "\n";
  for (size_t i = 0; i < model.support_vectors.size(); ++i) {
    out += "sv," + format_double(model.dual_coefficients[i]);
    for (double v : model.support_vectors[i]) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

inline SvrModel load_svr_model(const std::string& content, const std::filesystem::path& path) {
  SvrModel model;
  size_t declared_svs = 0;
  bool has_version = false;
  for (const Line& ln : logical_lines(content)) {
    const std::string ctx = path.string() + ":" + std::to_string(ln.number);
    auto f = split(ln.text, ',');
    const std::string& key = f[0];
    if (key == "version") {
      if (f.size() != 2 || f[1] != "1")
        fail(ErrorCode::ParseError, ctx + ": unsupported model version");
      has_version = true;
    } else if (key == "c") {
      model.c = parse_double(f.at(1), ctx);
    } else if (key == "gamma") {
      model.gamma = parse_double(f.at(1), ctx);
    } else if (key == "epsilon") {
      model.epsilon = parse_double(f.at(1), ctx);
    } else if (key == "bias") {
      model.bias = parse_double(f.at(1), ctx);
    } else if (key == "max_frames") {
      model.layout.max_frames = static_cast<size_t>(parse_long(f.at(1), ctx));
    } else if (key == "pad_value") {
      model.layout.pad_value = parse_double(f.at(1), ctx);
    } else if (key == "tracks") {
      if (f.size() != 2) fail(ErrorCode::ParseError, ctx + ": bad tracks line");
      for (const auto& t : split(f[1], ';'))
        if (!t.empty()) model.layout.tracks.push_back(t);
    } else if (key == "norm") {
      if (f.size() != 4) fail(ErrorCode::ParseError, ctx + ": bad norm line");
      QualityNormalization norm;
      if (f[2] == "identity")
        norm.kind = QualityNormalization::Kind::Identity;
      else if (f[2] == "div100")
        norm.kind = QualityNormalization::Kind::DivideBy100;
      else if (f[2] == "median") {
        norm.kind = QualityNormalization::Kind::DivideByDatasetMedian;
        norm.statistic = parse_double(f[3], ctx);
      } else
        fail(ErrorCode::ParseError, ctx + ": unknown normalization " + f[2]);
      model.layout.normalizations[f[1]] = norm;
    } else if (key == "support_vector_count") {
      declared_svs = static_cast<size_t>(parse_long(f.at(1), ctx));
    } else if (key == "sv") {
      if (f.size() < 3) fail(ErrorCode::ParseError, ctx + ": bad sv line");
      model.dual_coefficients.push_back(parse_double(f[1], ctx));
      std::vector<double> sv;
      for (size_t i = 2; i < f.size(); ++i) sv.push_back(parse_double(f[i], ctx));
      model.support_vectors.push_back(std::move(sv));
    } else {
      fail(ErrorCode::ParseError, ctx + ": unknown key '" + key + "'");
    }
  }
  if (!has_version) fail(ErrorCode::ParseError, path.string() + ": missing version line");
  if (model.support_vectors.size() != declared_svs)
    fail(ErrorCode::ParseError, path.string() + ": support vector count mismatch");
  const size_t dim = model.layout.dimension();
  for (const auto& sv : model.support_vectors)
    if (sv.size() != dim)
      fail(ErrorCode::ParseError, path.string() + ": support vector dim mismatch with layout");
  return model;
}

}  // namespace vmad
