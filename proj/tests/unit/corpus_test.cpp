#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "qprobe/corpus.hpp"
#include "support/temp_dir.hpp"

using namespace qprobe;
using testing_support::TempDir;

namespace {

Document doc(std::string id, std::vector<std::string> tokens, CategoryIndex label) {
  return {std::move(id), std::move(tokens), label};
}

Corpus two_class_corpus() {
  return Corpus(CategorySet({"A", "B"}), {doc("1", {"x", "common", "shared"}, 0), doc("2", {"x", "common"}, 0),
                                          doc("3", {"y", "common", "shared"}, 1), doc("4", {"y", "common"}, 1)});
}

}  // namespace

TEST(CategorySet, RejectsBadLabels) {
  EXPECT_THROW(CategorySet({"only"}), DataError);
  EXPECT_THROW(CategorySet({"a", "a"}), DataError);
  EXPECT_THROW(CategorySet({"a", ""}), DataError);
  EXPECT_THROW(CategorySet({"a", "b c"}), DataError);
  CategorySet ok({"b", "a"});
  EXPECT_EQ(ok.index_of("a"), 1u);
}

TEST(Corpus, ValidatesDocuments) {
  CategorySet cats({"A", "B"});
  EXPECT_THROW(Corpus(cats, {doc("1", {"a"}, 0), doc("1", {"b"}, 1)}), DataError);
  EXPECT_THROW(Corpus(cats, {doc("1", {"a,"}, 0)}), DataError);
  EXPECT_THROW(Corpus(cats, {doc("1", {""}, 0)}), DataError);
  EXPECT_THROW(Corpus(cats, {doc("1", {"a"}, 2)}), DataError);
}

TEST(Ingest, DirectoryTreeWithTwoCategories) {
  TempDir dir;
  dir.write("tree/sport/a.txt", "Ball game");
  dir.write("tree/sport/b.txt", "Goal!");
  dir.write("tree/art/c.txt", "Paint");
  dir.write("tree/art/d.txt", "Brush, canvas");
  auto corpus = ingest(dir / "tree");
  EXPECT_EQ(corpus.categories().names(), (std::vector<std::string>{"art", "sport"}));
  ASSERT_EQ(corpus.size(), 4u);
  EXPECT_EQ(corpus.documents()[0].id, "art/c.txt");
  EXPECT_EQ(corpus.documents()[1].tokens, (std::vector<std::string>{"brush", "canvas"}));
}

TEST(Ingest, RecordFileErrors) {
  TempDir dir;
  auto dup = dir.write("dup.jsonl", R"({"id":"1","text":"a","label":"x"}
{"id":"1","text":"b","label":"y"}
)");
  EXPECT_THROW(ingest(dup), DataError);
  auto nolabel = dir.write("nolabel.jsonl", R"({"id":"1","text":"a"}
{"id":"2","text":"b","label":"y"}
)");
  EXPECT_THROW(ingest(nolabel), DataError);
  EXPECT_THROW(ingest(dir / "missing"), DataError);
  EXPECT_THROW(ingest(dir.write("empty.jsonl", "")), DataError);
}

TEST(Ingest, NewsgroupTreeGroupsIntoFive) {
  TempDir dir;
  const std::vector<std::string> groups{"comp.graphics", "comp.sys.mac.hardware", "sci.space", "rec.sport.baseball",
                                        "alt.atheism", "talk.politics.guns", "soc.religion.christian", "misc.forsale"};
  for (const auto& g : groups) dir.write("news/" + g + "/1", "Subject: about " + g + "\n\nbody words");
  IngestOptions opts;
  opts.grouping = newsgroups_grouping();
  auto corpus = ingest(dir / "news", opts);
  EXPECT_EQ(corpus.categories().names(),
            (std::vector<std::string>{"Computers", "Hobbies", "Misc", "Science", "Society"}));
  EXPECT_EQ(corpus.label_histogram(), (std::vector<std::size_t>{2, 1, 1, 1, 3}));
}

TEST(Snapshot, RoundTripsCorpus) {
  auto corpus = two_class_corpus();
  std::stringstream ss;
  write_corpus_snapshot(corpus, ss);
  auto back = read_corpus_snapshot(ss);
  EXPECT_EQ(back.categories(), corpus.categories());
  EXPECT_EQ(back.documents(), corpus.documents());
  EXPECT_EQ(back.vocabulary(), corpus.vocabulary());
}

TEST(PruneVocabulary, DropsRareTerms) {
  CategorySet cats({"A", "B"});
  Corpus c(cats, {doc("1", {"rare", "often"}, 0), doc("2", {"rare", "often"}, 1), doc("3", {"often"}, 0)});
  EXPECT_EQ(prune_vocabulary(c, 3, 0), (std::vector<std::string>{"often"}));
}

TEST(PruneVocabulary, IdentityAtMinimumSettings) {
  auto c = two_class_corpus();
  EXPECT_EQ(prune_vocabulary(c, 1, 0), c.vocabulary());
}

TEST(PruneVocabulary, DropsTopFrequentWithLexicographicTies) {
  auto c = two_class_corpus();
  // df: common 4; shared, x, y 2.
  EXPECT_EQ(prune_vocabulary(c, 1, 1), (std::vector<std::string>{"shared", "x", "y"}));
  EXPECT_EQ(prune_vocabulary(c, 1, 2), (std::vector<std::string>{"x", "y"}));
  EXPECT_THROW(prune_vocabulary(c, 1, 4), DataError);
  EXPECT_THROW(prune_vocabulary(c, 5, 0), DataError);
}

TEST(FeatureSelection, ClassIndependentTermsScoreZero) {
  // "common" and "shared" appear at the same rate in both classes.
  for (const auto& s : feature_scores(two_class_corpus())) {
    if (s.term == "common" || s.term == "shared") {
      EXPECT_NEAR(s.score, 0.0, 1e-15) << s.term;
    } else {
      EXPECT_GT(s.score, 0.0) << s.term;
    }
  }
}

TEST(FeatureSelection, ClassIndependentTermsScoreZeroWithUnbalancedPrior) {
  CategorySet cats({"A", "B", "C"});
  std::vector<Document> docs;
  // Prior (6, 3, 3); "flat" appears in exactly one third of each class.
  for (int i = 0; i < 6; ++i) docs.push_back(doc("a" + std::to_string(i), i < 2 ? std::vector<std::string>{"flat", "a"} : std::vector<std::string>{"a"}, 0));
  for (int i = 0; i < 3; ++i) docs.push_back(doc("b" + std::to_string(i), i < 1 ? std::vector<std::string>{"flat", "b"} : std::vector<std::string>{"b"}, 1));
  for (int i = 0; i < 3; ++i) docs.push_back(doc("c" + std::to_string(i), i < 1 ? std::vector<std::string>{"flat", "c"} : std::vector<std::string>{"c"}, 2));
  for (const auto& s : feature_scores(Corpus(cats, docs))) {
    if (s.term == "flat") {
      EXPECT_NEAR(s.score, 0.0, 1e-15);
    }
  }
}

TEST(FeatureSelection, MatchesHandComputedScore) {
  // x: in both class-A docs only. df = 2, N = 4, prior (1/2, 1/2), k = 2.
  // P(A|x) = (2 + 1) / (2 + 2) = 3/4, P(B|x) = 1/4.
  const double kl = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
  for (const auto& s : feature_scores(two_class_corpus())) {
    if (s.term == "x") {
      EXPECT_NEAR(s.score, 0.5 * kl, 1e-12);
    }
  }
}

TEST(FeatureSelection, ClassSpecificOutranksUniform) {
  auto ranked = terms_of(select_features(two_class_corpus(), 4));
  auto pos = [&](const std::string& t) { return std::find(ranked.begin(), ranked.end(), t) - ranked.begin(); };
  EXPECT_LT(pos("x"), pos("common"));
  EXPECT_LT(pos("y"), pos("shared"));
  // Equal scores fall back to lexicographic order.
  EXPECT_LT(pos("x"), pos("y"));
}

TEST(FeatureSelection, TargetEqualToSizeKeepsEveryTerm) {
  auto c = two_class_corpus();
  auto kept = terms_of(select_features(c, c.vocabulary().size()));
  std::sort(kept.begin(), kept.end());
  EXPECT_EQ(kept, c.vocabulary());
  EXPECT_THROW(select_features(c, c.vocabulary().size() + 1), ConfigError);
}

TEST(FeatureSelection, NeverReintroducesPrunedTerms) {
  auto c = two_class_corpus();
  auto pruned = c.with_vocabulary(prune_vocabulary(c, 1, 1));
  for (const auto& t : terms_of(select_features(pruned, pruned.vocabulary().size()))) EXPECT_NE(t, "common");
}

TEST(Split, HalvesAndDeterminism) {
  std::vector<Document> docs;
  for (int i = 0; i < 200; ++i) docs.push_back(doc(std::to_string(i), {"t" + std::to_string(i % 7)}, i % 2));
  Corpus c(CategorySet({"A", "B"}), docs);
  auto [train, test] = split(c, 0.5, 9);
  EXPECT_EQ(train.size(), 100u);
  EXPECT_EQ(test.size(), 100u);
  auto [train2, test2] = split(c, 0.5, 9);
  EXPECT_EQ(train.documents(), train2.documents());
  EXPECT_EQ(test.documents(), test2.documents());
  EXPECT_EQ(train.vocabulary(), c.vocabulary());
  EXPECT_EQ(test.categories(), c.categories());
}

TEST(Split, ExhaustiveOnFourDocuments) {
  Corpus c(CategorySet({"A", "B"}), {doc("a", {"w"}, 0), doc("b", {"w"}, 1), doc("c", {"w"}, 0), doc("d", {"w"}, 1)});
  std::set<std::set<std::string>> seen;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    auto [train, test] = split(c, 0.5, seed);
    std::set<std::string> tr, te, all;
    for (const auto& d : train.documents()) tr.insert(d.id);
    for (const auto& d : test.documents()) te.insert(d.id);
    ASSERT_EQ(tr.size(), 2u);
    ASSERT_EQ(te.size(), 2u);
    all.insert(tr.begin(), tr.end());
    all.insert(te.begin(), te.end());
    EXPECT_EQ(all, (std::set<std::string>{"a", "b", "c", "d"}));
    seen.insert(tr);
  }
  // Every one of the C(4,2) = 6 partitions is reachable.
  EXPECT_EQ(seen.size(), 6u);
}

TEST(Split, RejectsEmptySide) {
  Corpus c(CategorySet({"A", "B"}), {doc("a", {"w"}, 0), doc("b", {"w"}, 1)});
  EXPECT_THROW(split(c, 0.1, 1), DataError);
  EXPECT_THROW(split(c, 1.0, 1), ConfigError);
}
