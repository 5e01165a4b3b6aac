#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>

#include "vmad/dataset.hpp"
#include "vmad/image.hpp"
#include "vmad/manifest.hpp"
#include "vmad/rng.hpp"
#include "vmad/synth.hpp"
#include "vmad/text.hpp"

#include "test_util.hpp"

using namespace vmad;
using vmad::test::TempDir;

namespace {

Dataset tiny_dataset() {
  Dataset ds;
  ds.subjects = {"A", "B"};
  ds.documents.push_back({"D1", Label::BonaFide, "A", std::nullopt});
  SequenceRecord seq{"Q1", "A", {}};
  for (int i = 1; i <= 3; ++i) seq.frames.push_back({"F" + std::to_string(i), "", {}, {}, {}});
  ds.sequences.push_back(seq);
  return ds;
}

void require_error(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
    FAIL("expected " << error_code_name(code));
  } catch (const VmadError& e) {
    REQUIRE(e.code() == code);
  }
}

}  // namespace

TEST_CASE("minimal manifest loads and pairs to one attempt") {
  TempDir tmp("manifest");
  const std::string text =
      "# demo\n"
      "[subjects]\nsubject_id\nA\n"
      "[documents]\ndocument_id,label,subject_a,subject_b\nD1,bonafide,A,\n"
      "[sequences]\nsequence_id,subject_id\nQ1,A\n"
      "[frames]\nsequence_id,frame_id,image_path,face_x,face_y,face_w,face_h\n"
      "Q1,F1,,,,,\nQ1,F2,,,,,\nQ1,F3,,,,,\n";
  write_file_atomic(tmp / "m.txt", text);
  Dataset ds = load_manifest(tmp / "m.txt");
  REQUIRE(ds.subjects.size() == 1);
  REQUIRE(ds.sequences.size() == 1);
  REQUIRE(ds.sequences[0].frames.size() == 3);
  ds.attempts = pair_attempts(ds);
  REQUIRE(ds.attempts.size() == 1);
  REQUIRE(ds.attempts[0] == Attempt{"D1", "Q1", Label::BonaFide});
}

TEST_CASE("morphed document with subject_b equal to subject_a is rejected") {
  TempDir tmp("manifest");
  const std::string text =
      "[subjects]\nsubject_id\nA\n"
      "[documents]\ndocument_id,label,subject_a,subject_b\nD1,morphed,A,A\n"
      "[sequences]\nsequence_id,subject_id\n"
      "[frames]\nsequence_id,frame_id,image_path,face_x,face_y,face_w,face_h\n";
  write_file_atomic(tmp / "m.txt", text);
  require_error(ErrorCode::ReferentialIntegrityError, [&] { load_manifest(tmp / "m.txt"); });
}

TEST_CASE("manifest parse failures carry line context") {
  TempDir tmp("manifest");
  SECTION("missing file") {
    require_error(ErrorCode::MissingFile, [&] { load_manifest(tmp / "nope.txt"); });
  }
  SECTION("missing section header") {
    write_file_atomic(tmp / "m.txt", "[subjects]\nA\n");
    require_error(ErrorCode::ParseError, [&] { load_manifest(tmp / "m.txt"); });
  }
  SECTION("data before any section") {
    write_file_atomic(tmp / "m.txt", "A\n[subjects]\nsubject_id\n");
    require_error(ErrorCode::ParseError, [&] { load_manifest(tmp / "m.txt"); });
  }
  SECTION("bad label") {
    write_file_atomic(tmp / "m.txt",
                      "[subjects]\nsubject_id\nA\n"
                      "[documents]\ndocument_id,label,subject_a,subject_b\nD1,genuine,A,\n");
    require_error(ErrorCode::ParseError, [&] { load_manifest(tmp / "m.txt"); });
  }
}

TEST_CASE("score table attachment") {
  Dataset ds = tiny_dataset();

  SECTION("assigns the named track") {
    attach_score_table(ds,
                       "sequence_id,frame_id,track_name,value\n"
                       "Q1,F1,mad:dfr,0.7\nQ1,F2,q:magface,25.3\n",
                       "t");
    REQUIRE(ds.sequences[0].frames[0].mad_scores.at("dfr") == 0.7);
    REQUIRE(ds.sequences[0].frames[1].quality_scores.at("magface") == 25.3);
    REQUIRE(ds.sequences[0].frames[2].mad_scores.empty());
  }
  SECTION("mad score out of range") {
    require_error(ErrorCode::ScoreOutOfRange, [&] {
      attach_score_table(ds, "sequence_id,frame_id,track_name,value\nQ1,F1,mad:dfr,1.5\n", "t");
    });
  }
  SECTION("quality tracks are not range checked") {
    attach_score_table(ds, "sequence_id,frame_id,track_name,value\nQ1,F1,q:mag,250.5\n", "t");
    REQUIRE(ds.sequences[0].frames[0].quality_scores.at("mag") == 250.5);
  }
  SECTION("duplicate rows") {
    require_error(ErrorCode::DuplicateEntry, [&] {
      attach_score_table(ds,
                         "sequence_id,frame_id,track_name,value\n"
                         "Q1,F1,mad:dfr,0.7\nQ1,F1,mad:dfr,0.8\n",
                         "t");
    });
  }
  SECTION("duplicate against an earlier load") {
    attach_score_table(ds, "sequence_id,frame_id,track_name,value\nQ1,F1,mad:dfr,0.7\n", "t");
    require_error(ErrorCode::DuplicateEntry, [&] {
      attach_score_table(ds, "sequence_id,frame_id,track_name,value\nQ1,F1,mad:dfr,0.7\n", "t");
    });
  }
  SECTION("unknown frame") {
    require_error(ErrorCode::UnknownFrame, [&] {
      attach_score_table(ds, "sequence_id,frame_id,track_name,value\nQ1,F9,mad:dfr,0.5\n", "t");
    });
  }
  SECTION("failed load leaves the dataset untouched") {
    const Dataset before = ds;
    try {
      attach_score_table(ds,
                         "sequence_id,frame_id,track_name,value\n"
                         "Q1,F1,mad:dfr,0.7\nQ1,F9,mad:dfr,0.5\n",
                         "t");
    } catch (const VmadError&) {
    }
    REQUIRE(ds == before);
  }
  SECTION("low polarity tracks are flipped at ingestion") {
    ds.mad_track_polarity["dfr"] = TrackPolarity::LowIsMorph;
    attach_score_table(ds, "sequence_id,frame_id,track_name,value\nQ1,F1,mad:dfr,0.3\n", "t");
    REQUIRE(ds.sequences[0].frames[0].mad_scores.at("dfr") == Catch::Approx(0.7));
    // save writes the detector's native orientation back
    REQUIRE(save_score_table(ds).find("mad:dfr,0.3") != std::string::npos);
  }
}

TEST_CASE("score ingestion is order independent") {
  Dataset a = tiny_dataset(), b = tiny_dataset();
  attach_score_table(a,
                     "sequence_id,frame_id,track_name,value\n"
                     "Q1,F1,mad:dfr,0.1\nQ1,F2,mad:dfr,0.2\nQ1,F3,q:x,9\n",
                     "t");
  attach_score_table(b,
                     "sequence_id,frame_id,track_name,value\n"
                     "Q1,F3,q:x,9\nQ1,F2,mad:dfr,0.2\nQ1,F1,mad:dfr,0.1\n",
                     "t");
  REQUIRE(a == b);
}

TEST_CASE("pairing rules") {
  Dataset ds;
  ds.subjects = {"A", "B", "C"};
  SequenceRecord qa{"QA", "A", {{"F1", "", {}, {}, {}}}};
  SequenceRecord qb{"QB", "B", {{"F1", "", {}, {}, {}}}};
  SequenceRecord qc{"QC", "C", {{"F1", "", {}, {}, {}}}};

  SECTION("bona fide pairs with same-subject sequences only") {
    ds.documents.push_back({"D1", Label::BonaFide, "A", std::nullopt});
    ds.sequences = {qa, qb};
    auto attempts = pair_attempts(ds);
    REQUIRE(attempts.size() == 1);
    REQUIRE(attempts[0].sequence == "QA");
  }
  SECTION("morphed pairs with both contributors") {
    ds.documents.push_back({"D1", Label::Morphed, "A", "B"});
    ds.sequences = {qa, qb, qc};
    auto attempts = pair_attempts(ds);
    REQUIRE(attempts.size() == 2);
    REQUIRE(attempts[0].sequence == "QA");
    REQUIRE(attempts[1].sequence == "QB");
    REQUIRE(attempts[0].label == Label::Morphed);
  }
  SECTION("two morph documents over two sequences give four attempts") {
    ds.documents.push_back({"D1", Label::Morphed, "A", "B"});
    ds.documents.push_back({"D2", Label::Morphed, "A", "B"});
    ds.sequences = {qa, qb};
    REQUIRE(pair_attempts(ds).size() == 4);
  }
  SECTION("deterministic order: document id then sequence id") {
    ds.documents.push_back({"D2", Label::Morphed, "A", "B"});
    ds.documents.push_back({"D1", Label::BonaFide, "B", std::nullopt});
    ds.sequences = {qb, qa};
    auto attempts = pair_attempts(ds);
    REQUIRE(attempts.size() == 3);
    REQUIRE(attempts[0] == Attempt{"D1", "QB", Label::BonaFide});
    REQUIRE(attempts[1] == Attempt{"D2", "QA", Label::Morphed});
    REQUIRE(attempts[2] == Attempt{"D2", "QB", Label::Morphed});
  }
}

TEST_CASE("pair_attempts size matches the counting oracle on random datasets") {
  Rng rng(20240517);
  for (int trial = 0; trial < 50; ++trial) {
    Dataset ds;
    const int n_subj = 2 + static_cast<int>(rng.below(9));  // <= 10 subjects
    for (int s = 0; s < n_subj; ++s) ds.subjects.push_back("S" + std::to_string(s));
    const int n_seq = static_cast<int>(rng.below(12));
    for (int q = 0; q < n_seq; ++q)
      ds.sequences.push_back({"Q" + std::to_string(q),
                              ds.subjects[rng.below(ds.subjects.size())],
                              {{"F1", "", {}, {}, {}}}});
    const int n_doc = static_cast<int>(rng.below(10));
    for (int d = 0; d < n_doc; ++d) {
      if (rng.uniform01() < 0.4 || n_subj < 2) {
        ds.documents.push_back(
            {"D" + std::to_string(d), Label::BonaFide, ds.subjects[rng.below(ds.subjects.size())],
             std::nullopt});
      } else {
        size_t a = rng.below(ds.subjects.size());
        size_t b = rng.below(ds.subjects.size() - 1);
        if (b >= a) ++b;
        ds.documents.push_back(
            {"D" + std::to_string(d), Label::Morphed, ds.subjects[a], ds.subjects[b]});
      }
    }

    // oracle: per-subject sequence counts, summed per document
    std::map<SubjectId, size_t> seq_count;
    for (const auto& s : ds.sequences) ++seq_count[s.subject];
    size_t expected = 0;
    for (const auto& d : ds.documents) {
      expected += seq_count[d.subject_a];
      if (d.label == Label::Morphed) expected += seq_count[*d.subject_b];
    }

    auto attempts = pair_attempts(ds);
    REQUIRE(attempts.size() == expected);
    REQUIRE(pair_attempts(ds) == attempts);  // deterministic
  }
}

TEST_CASE("validation") {
  SECTION("well-formed dataset gives an empty report") {
    Dataset ds = tiny_dataset();
    REQUIRE(validate_dataset(ds).ok());
  }
  SECTION("zero-frame sequence is one violation") {
    Dataset ds = tiny_dataset();
    ds.sequences.push_back({"Q2", "A", {}});
    auto report = validate_dataset(ds);
    REQUIRE(report.violations.size() == 1);
    REQUIRE(report.violations[0].code == "empty_sequence");
  }
  SECTION("face box outside the image is one violation") {
    TempDir tmp("validate");
    GrayImage img;
    img.width = 8;
    img.height = 6;
    img.data.assign(48, 100);
    write_file_atomic(tmp / "f.pgm", encode_pgm(img));

    Dataset ds = tiny_dataset();
    ds.sequences[0].frames[0].image_path = (tmp / "f.pgm").string();
    ds.sequences[0].frames[0].face_box = FaceBox{4, 2, 10, 3};
    auto report = validate_dataset(ds, probe_pgm_dims);
    REQUIRE(report.violations.size() == 1);
    REQUIRE(report.violations[0].code == "face_box_out_of_bounds");

    ds.sequences[0].frames[0].face_box = FaceBox{1, 1, 4, 4};
    REQUIRE(validate_dataset(ds, probe_pgm_dims).ok());
  }
  SECTION("degenerate face box needs no image") {
    Dataset ds = tiny_dataset();
    ds.sequences[0].frames[0].face_box = FaceBox{0, 0, 0, 5};
    REQUIRE(validate_dataset(ds).violations.size() == 1);
  }
  SECTION("document with no eligible sequence is a warning, not a violation") {
    Dataset ds = tiny_dataset();
    ds.documents.push_back({"D2", Label::BonaFide, "B", std::nullopt});
    auto report = validate_dataset(ds);
    REQUIRE(report.ok());
    REQUIRE(report.warnings.size() == 1);
    REQUIRE(report.warnings[0].code == "document_without_sequence");
  }
  SECTION("attempt label must match its document") {
    Dataset ds = tiny_dataset();
    ds.attempts.push_back({"D1", "Q1", Label::Morphed});
    REQUIRE_FALSE(validate_dataset(ds).ok());
  }
}

TEST_CASE("manifest round trip is the identity") {
  ScenarioConfig cfg;
  cfg.n_subjects = 8;
  cfg.n_bonafide_docs = 6;
  cfg.n_morph_docs = 9;
  cfg.frames_min = 2;
  cfg.frames_max = 5;
  cfg.seed = 7;
  Dataset ds = generate_scenario(cfg);
  ds.mad_track_polarity["synth"] = TrackPolarity::HighIsMorph;

  TempDir tmp("roundtrip");
  write_file_atomic(tmp / "m.txt", save_manifest(ds));
  write_file_atomic(tmp / "s.csv", save_score_table(ds));

  Dataset loaded = load_manifest(tmp / "m.txt");
  attach_score_table(loaded, read_file(tmp / "s.csv"), tmp / "s.csv");
  loaded.attempts = pair_attempts(loaded);
  REQUIRE(loaded == ds);

  // structure alone round-trips without the score tables
  Dataset structural = load_manifest(tmp / "m.txt");
  REQUIRE(structural.sequences.size() == ds.sequences.size());
  REQUIRE(structural.documents == ds.documents);
}

TEST_CASE("unknown labels load and pair like bona fide but stay unknown") {
  TempDir tmp("unknown");
  const std::string text =
      "[subjects]\nsubject_id\nA\n"
      "[documents]\ndocument_id,label,subject_a,subject_b\nD1,unknown,A,\n"
      "[sequences]\nsequence_id,subject_id\nQ1,A\n"
      "[frames]\nsequence_id,frame_id,image_path,face_x,face_y,face_w,face_h\nQ1,F1,,,,,\n";
  write_file_atomic(tmp / "m.txt", text);
  Dataset ds = load_manifest(tmp / "m.txt");
  auto attempts = pair_attempts(ds);
  REQUIRE(attempts.size() == 1);
  REQUIRE(attempts[0].label == Label::Unknown);
}
