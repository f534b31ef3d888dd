#include <gtest/gtest.h>

#include "qprobe/rules.hpp"
#include "support/oracle.hpp"
#include "support/synthetic.hpp"

using namespace qprobe;

namespace {

RuleSet example_rules() {
  return parse_rules(
      "Computers IF mac\n"
      "Computers IF graphics windows\n"
      "Religion IF god christian\n"
      "Hobbies IF baseball\n",
      CategorySet({"Computers", "Religion", "Hobbies"}));
}

Corpus topical_corpus(std::size_t docs, std::uint64_t seed) {
  auto model = synthetic::TopicModel::make(4, 25, 30);
  auto records = synthetic::topical_records(model, {0.4, 0.3, 0.2, 0.1}, docs, seed, "d");
  CategorySet cats(model.names);
  std::vector<Document> out;
  for (auto& r : records) out.push_back({r.id, r.tokens, cats.index_of(*r.label)});
  return Corpus(cats, out);
}

}  // namespace

TEST(Rule, AccuracyFromCounts) {
  Rule r;
  r.positive_terms = {"mac"};
  r.covered_correct = 90;
  r.covered_incorrect = 10;
  EXPECT_DOUBLE_EQ(*r.accuracy(), 0.9);
  r.covered_correct = r.covered_incorrect = 0;
  EXPECT_FALSE(r.accuracy());
}

TEST(Classify, FirstMatchingRuleDecides) {
  auto rules = example_rules();
  EXPECT_EQ(classify_document(rules, TermSet({"mac", "graphics", "windows"})), 0u);
  EXPECT_EQ(classify_document(rules, TermSet({"baseball"})), 2u);
  EXPECT_EQ(classify_document(rules, TermSet(std::vector<std::string>{})), std::nullopt);
  EXPECT_EQ(classify_document(rules, TermSet({"god", "baseball"})), 2u);
  EXPECT_EQ(classify_document(rules, TermSet({"god", "christian", "baseball"})), 1u);
}

TEST(Classify, UnorderedMajorityVoteWithEarliestTieBreak) {
  auto rules = parse_rules("A IF x\nB IF y\nB IF z\nA IF w\n#mode unordered\n");
  EXPECT_FALSE(rules.ordered);
  EXPECT_EQ(classify_document(rules, TermSet({"x", "y", "z"})), 1u);  // 2 votes to 1
  EXPECT_EQ(classify_document(rules, TermSet({"x", "y"})), 0u);       // tie, A fires first
  EXPECT_EQ(classify_document(rules, TermSet({"y", "w"})), 1u);       // tie, B fires first
}

TEST(Classify, PrependingASatisfiedRuleTakesOver) {
  auto rules = example_rules();
  Rule front;
  front.category = 2;
  front.positive_terms = {"windows"};
  rules.rules.insert(rules.rules.begin(), front);
  EXPECT_EQ(classify_document(rules, TermSet({"mac", "graphics", "windows"})), 2u);
}

TEST(ApplyToCorpus, AllComputersDocuments) {
  std::vector<Document> docs;
  for (int i = 0; i < 500; ++i) docs.push_back({std::to_string(i), i % 2 ? std::vector<std::string>{"mac"} : std::vector<std::string>{"graphics", "windows"}, 0});
  EXPECT_EQ(apply_to_corpus(example_rules(), docs).values, (std::vector<double>{500, 0, 0}));
  EXPECT_EQ(apply_to_corpus(example_rules(), std::vector<Document>{}).values, (std::vector<double>{0, 0, 0}));
}

TEST(ApplyToCorpus, MatchesBruteForceOnRandomData) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto trial = synthetic::topical_trial(seed);
    std::vector<Document> docs;
    for (const auto& r : trial.records) docs.push_back({r.id, r.tokens, std::nullopt});
    auto per_rule = oracle::first_match(trial.rules, oracle::bags(trial.records));
    EXPECT_EQ(apply_to_corpus(trial.rules, docs).values, oracle::category_totals(trial.rules, per_rule));
    std::vector<std::size_t> lib = first_match_counts(trial.rules, docs);
    EXPECT_EQ(std::vector<std::uint64_t>(lib.begin(), lib.end()), per_rule);

    // Unordered: the histogram is the sum of per-document decisions.
    auto unordered = trial.rules;
    unordered.ordered = false;
    std::vector<double> sum(unordered.categories.size(), 0.0);
    for (const auto& d : docs) {
      if (auto c = classify_document(unordered, d)) sum[*c] += 1;
    }
    EXPECT_EQ(apply_to_corpus(unordered, docs).values, sum);
  }
}

TEST(Train, SeparableCorpusYieldsPerfectRule) {
  CategorySet cats({"cat1", "cat2"});
  std::vector<Document> docs;
  for (int i = 0; i < 20; ++i) docs.push_back({"a" + std::to_string(i), {"mac", "w" + std::to_string(i % 3)}, 0});
  for (int i = 0; i < 30; ++i) docs.push_back({"b" + std::to_string(i), {"pc", "w" + std::to_string(i % 3)}, 1});
  auto result = train(Corpus(cats, docs), {});
  ASSERT_FALSE(result.rule_set.rules.empty());
  const auto& first = result.rule_set.rules.front();
  EXPECT_EQ(first.category, 0u);
  EXPECT_EQ(first.positive_terms, (std::vector<std::string>{"mac"}));
  EXPECT_DOUBLE_EQ(*first.accuracy(), 1.0);
  EXPECT_DOUBLE_EQ(*result.rule_set.category_recall[0], 1.0);
  EXPECT_DOUBLE_EQ(*result.rule_set.category_recall[1], 1.0);
}

TEST(Train, RecallOfTwoThirds) {
  // 150 category-A docs, 100 of them carrying "alpha"; 150 B docs with "beta".
  CategorySet cats({"A", "B"});
  std::vector<Document> docs;
  for (int i = 0; i < 150; ++i) docs.push_back({"a" + std::to_string(i), i < 100 ? std::vector<std::string>{"alpha"} : std::vector<std::string>{"other"}, 0});
  for (int i = 0; i < 150; ++i) docs.push_back({"b" + std::to_string(i), {"beta"}, 1});
  RuleSet rules = parse_rules("A IF alpha\nB IF beta\n", cats);
  auto stats = evaluate(rules, Corpus(cats, docs));
  EXPECT_NEAR(*stats.recall(0), 0.67, 0.005);
  EXPECT_DOUBLE_EQ(*stats.recall(0), 100.0 / 150.0);
  EXPECT_EQ(stats.unclassified[0], 50u);
}

TEST(Train, StatisticsInvariants) {
  auto corpus = topical_corpus(800, 3);
  for (std::size_t min_cov : {1, 4, 10}) {
    TrainOptions opts;
    opts.min_rule_coverage = min_cov;
    auto result = train(corpus, opts);
    const auto& s = result.stats;
    std::size_t recalled = 0, diagonal = 0;
    for (std::size_t c = 0; c < s.training_docs.size(); ++c) {
      EXPECT_LE(s.recalled_docs[c], s.training_docs[c]);
      std::size_t row = s.unclassified[c];
      for (auto v : s.confusion[c]) row += v;
      EXPECT_EQ(row, s.training_docs[c]);
      recalled += s.recalled_docs[c];
      diagonal += s.confusion[c][c];
    }
    EXPECT_EQ(recalled, diagonal);
    for (const auto& r : result.rule_set.rules) {
      EXPECT_GE(r.coverage(), min_cov);
      EXPECT_LE(r.positive_terms.size() + r.negative_terms.size(), 4u);
    }
  }
}

TEST(Train, NegationCanBeEnabled) {
  // "x" marks A unless "y" is present.
  CategorySet cats({"A", "B"});
  std::vector<Document> docs;
  // A is the rarer category, so it is learned first against every B document.
  for (int i = 0; i < 20; ++i) docs.push_back({"a" + std::to_string(i), {"x", "n" + std::to_string(i % 4)}, 0});
  for (int i = 0; i < 30; ++i) docs.push_back({"b" + std::to_string(i), {"x", "y", "n" + std::to_string(i % 4)}, 1});
  for (int i = 0; i < 30; ++i) docs.push_back({"c" + std::to_string(i), {"z", "n" + std::to_string(i % 4)}, 1});
  TrainOptions opts;
  opts.allow_negation = true;
  opts.min_rule_coverage = 5;
  auto result = train(Corpus(cats, docs), opts);
  bool saw_negation = false;
  for (const auto& r : result.rule_set.rules) saw_negation = saw_negation || !r.negative_terms.empty();
  EXPECT_TRUE(saw_negation);
  EXPECT_DOUBLE_EQ(*result.rule_set.category_recall[0], 1.0);
}

TEST(Train, EmptyCategoryWarnsAndLeavesRecallUndefined) {
  CategorySet cats({"A", "B", "C"});
  std::vector<Document> docs;
  for (int i = 0; i < 10; ++i) docs.push_back({std::to_string(i), {i % 2 ? "p" : "q"}, static_cast<CategoryIndex>(i % 2)});
  auto result = train(Corpus(cats, docs), {});
  EXPECT_EQ(result.warnings.size(), 1u);
  EXPECT_FALSE(result.rule_set.category_recall[2].has_value());
}

TEST(Train, Errors) {
  CategorySet cats({"A", "B"});
  EXPECT_THROW(train(Corpus(cats, {}), {}), DataError);
  EXPECT_THROW(train(Corpus(cats, {{"1", {"a"}, std::nullopt}}), {}), DataError);
}

TEST(Train, DefaultMinimumCoverageScalesWithCorpus) {
  EXPECT_EQ(default_min_rule_coverage(10000), 50u);
  EXPECT_EQ(default_min_rule_coverage(1250), 6u);
  EXPECT_EQ(default_min_rule_coverage(10), 1u);
}

TEST(Train, RuleCountNonIncreasingInMinimumCoverage) {
  auto corpus = topical_corpus(1000, 11);
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (std::size_t min_cov : {1, 2, 3, 5, 8, 13, 21, 34, 55}) {
    TrainOptions opts;
    opts.min_rule_coverage = min_cov;
    auto n = train(corpus, opts).rule_set.size();
    EXPECT_LE(n, previous) << "min coverage " << min_cov;
    previous = n;
  }
}

TEST(Train, IsDeterministic) {
  auto corpus = topical_corpus(400, 5);
  EXPECT_EQ(train(corpus, {}).rule_set, train(corpus, {}).rule_set);
}

TEST(RuleFile, ParsesExampleLine) {
  auto rules = parse_rules("Computers IF graphics windows # correct=288 incorrect=12\n", CategorySet({"Computers", "Other"}));
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_EQ(rules.rules[0].positive_terms, (std::vector<std::string>{"graphics", "windows"}));
  EXPECT_EQ(rules.rules[0].covered_correct, 288u);
  EXPECT_EQ(rules.rules[0].covered_incorrect, 12u);
}

TEST(RuleFile, RoundTrip) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto rules = synthetic::topical_trial(seed).rules;
    rules.ordered = seed % 2 == 0;
    if (seed % 3 == 0) rules.category_recall[0] = std::nullopt;
    EXPECT_EQ(parse_rules(serialize_rules(rules)), rules);
  }
  auto trained = train(topical_corpus(300, 2), {}).rule_set;
  EXPECT_EQ(parse_rules(serialize_rules(trained)), trained);
}

TEST(RuleFile, ErrorsNameTheLine) {
  auto message = [](const std::string& text) {
    try {
      parse_rules(text, CategorySet({"Computers", "Other"}));
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("Computers IF\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("Computers IF a\nNope IF b\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("Computers IF a # correct=x incorrect=1\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("Computers IF a NOT\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("Computers a b\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("Computers IF a NOT a\n").find("line 1"), std::string::npos);
}
