#include <doctest.h>

#include <functional>
#include <set>
#include <sstream>

#include <acton/act2vec.hpp>
#include <acton/ingest.hpp>
#include <acton/persist.hpp>
#include <acton/synthgen.hpp>

#include "support.hpp"

using namespace acton;

namespace {

Dataset parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_activity_csv(in);
}

LabelTable labels_text(const std::string& text) {
  std::istringstream in(text);
  return parse_labels_csv(in);
}

ErrorCode error_of(const std::function<void()>& f, std::string* message = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  FAIL("expected an acton::Error");
  return ErrorCode::InvalidConfig;
}

const char* kHeader = "subject_id,timestamp_index,activity_count\n";

}  // namespace

TEST_CASE("parse_activity_csv: two subjects, four rows each") {
  std::string text = kHeader;
  for (const char* s : {"a", "b"})
    for (int t = 0; t < 4; ++t) text += std::string(s) + "," + std::to_string(t) + "," + std::to_string(t * 10) + "\n";
  const auto ds = parse_text(text);
  REQUIRE(ds.sequences.size() == 2);
  CHECK(ds.sequences[0].subject_id == "a");
  CHECK(ds.sequences[1].counts == std::vector<RawCount>{0, 10, 20, 30});
  CHECK(ds.provenance.digest.size() == 64);
}

TEST_CASE("parse_activity_csv: gaps and NA become UNK") {
  const auto ds = parse_text(std::string(kHeader) + "a,3,7\na,0,1\na,1,NA\n");
  REQUIRE(ds.sequences.size() == 1);
  CHECK(ds.sequences[0].counts == std::vector<RawCount>{1, kMissingCount, kMissingCount, 7});
  const auto vocab = build_vocabulary(ds);
  const auto enc = encode_sequence(vocab, ds.sequences[0]);
  CHECK(enc.symbols[2] == vocab.unk_id());
  CHECK(enc.symbols[1] == vocab.unk_id());
}

TEST_CASE("parse_activity_csv errors") {
  std::string msg;
  CHECK(error_of([] { parse_text(std::string(kHeader) + "abc,0,1\nabc,1,50\nabc,x,50\n"); }, &msg) ==
        ErrorCode::MalformedRow);
  CHECK(msg.find("line 4") != std::string::npos);
  CHECK(error_of([] { parse_text(std::string(kHeader) + "abc,1,-3\n"); }) == ErrorCode::MalformedRow);
  CHECK(error_of([] { parse_text(std::string(kHeader) + "a,1,3\na,1,4\n"); }) ==
        ErrorCode::DuplicateTimestamp);
  CHECK(error_of([] { parse_text(""); }) == ErrorCode::EmptyInput);
  CHECK(error_of([] { parse_text(kHeader); }) == ErrorCode::EmptyInput);
}

TEST_CASE("parse_labels_csv") {
  const char* head = "subject_id,apnea,diabetes,hypertension,insomnia\n";
  auto t = labels_text(std::string(head) + "s1,1,-1,0,2\n");
  const auto& r = t.at("s1");
  CHECK(r[Task::Apnea] == 1);
  CHECK_FALSE(r[Task::Diabetes].has_value());
  CHECK(r[Task::Hypertension] == 0);
  CHECK(r[Task::Insomnia] == 2);

  CHECK(error_of([&] { labels_text(std::string(head) + "s1,1,3,0,0\n"); }) == ErrorCode::OutOfRangeClass);
  CHECK(error_of([] { labels_text("subject_id,apnea,gout\n"); }) == ErrorCode::UnknownTaskColumn);
  CHECK(labels_text(head).empty());
}

TEST_CASE("build_vocabulary counting") {
  const auto ds = parse_text(std::string(kHeader) + "a,0,0\na,1,0\na,2,5\n");
  const auto v = build_vocabulary(ds);
  CHECK(v.size() == 3);
  CHECK(v.counts()[static_cast<std::size_t>(v.encode(0))] == 2);
  CHECK(v.counts()[static_cast<std::size_t>(v.encode(5))] == 1);

  const auto gap = parse_text(std::string(kHeader) + "a,0,0\na,1,NA\na,2,5\n");
  const auto vg = build_vocabulary(gap);
  CHECK(vg.counts()[static_cast<std::size_t>(vg.unk_id())] == 1);

  Dataset empty;
  CHECK(error_of([&] { build_vocabulary(empty); }) == ErrorCode::EmptyInput);
}

TEST_CASE("build_vocabulary matches an independent distinct scan on a cohort") {
  auto cfg = testing::tiny_config(40, 7, 300);
  const auto ds = generate_cohort(cfg).dataset;
  std::set<RawCount> distinct;
  std::uint64_t present = 0, total = 0;
  for (const auto& s : ds.sequences)
    for (RawCount c : s.counts) {
      ++total;
      if (c >= 0) {
        distinct.insert(c);
        ++present;
      }
    }
  const auto v = build_vocabulary(ds);
  CHECK(v.size() == distinct.size() + 1);
  CHECK(v.in_vocabulary_total() == present);
  std::uint64_t sum = 0;
  for (auto c : v.counts()) sum += c;
  CHECK(sum == total);
}

TEST_CASE("align_lengths pads and truncates") {
  Dataset ds;
  ds.sequences.push_back({"long", std::vector<RawCount>(3000, 1), 30});
  ds.sequences.push_back({"short", std::vector<RawCount>(2500, 1), 30});
  ds.sequences.push_back({"near", std::vector<RawCount>(2700, 1), 30});
  const auto flagged = align_lengths(ds, 1);
  CHECK(ds.sequences[0].counts.size() == 2880);
  CHECK(ds.sequences[1].counts.size() == 2880);
  CHECK(ds.sequences[1].counts.back() == kMissingCount);
  CHECK(flagged == std::vector<std::string>{"short"});  // 13% missing vs 6%
}

TEST_CASE("resolve_oov") {
  const auto vocab = Vocabulary::from_counts({{10, 1}, {20, 1}}, 0);
  EmbeddingSpace space;
  space.dim = 2;
  space.symbol_vectors = Matrix(3, 2);
  space.symbol_vectors(0, 0) = 1;
  space.symbol_vectors(0, 1) = 2;
  space.symbol_vectors(1, 0) = 3;
  space.symbol_vectors(1, 1) = 6;
  CHECK(resolve_oov(vocab, space, 15) == std::vector<double>{2, 4});
  CHECK(resolve_oov(vocab, space, 25) == std::vector<double>{3, 6});
  CHECK(error_of([&] { resolve_oov(vocab, space, 10); }) == ErrorCode::PreconditionViolation);

  const auto single = Vocabulary::from_counts({{10, 1}}, 0);
  CHECK(resolve_oov(single, space, 15) == std::vector<double>{1, 2});

  EmbeddingSpace bare;
  bare.dim = 2;
  CHECK(error_of([&] { resolve_oov(vocab, bare, 15); }) == ErrorCode::NoSymbolVectors);
}

TEST_CASE("property: csv write/parse round trip") {
  auto cfg = testing::tiny_config(12, 3, 600);
  cfg.labeled_fraction = 0.5;
  auto ds = generate_cohort(cfg).dataset;
  ds.sequences[2].counts[5] = kMissingCount;
  std::ostringstream act, lab;
  write_activity_csv(act, ds);
  write_labels_csv(lab, ds);
  std::istringstream ain(act.str()), lin(lab.str());
  auto back = parse_activity_csv(ain, cfg.sampling_period_s);
  back.labels = parse_labels_csv(lin);
  REQUIRE(back.sequences.size() == ds.sequences.size());
  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    CHECK(back.sequences[i].subject_id == ds.sequences[i].subject_id);
    CHECK(back.sequences[i].counts == ds.sequences[i].counts);
  }
  REQUIRE(back.labels.size() == ds.labels.size());
  for (const auto& [id, rec] : ds.labels) CHECK(back.labels.at(id).values == rec.values);
}
