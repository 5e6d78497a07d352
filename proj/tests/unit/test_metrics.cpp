#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "citebias/metrics.hpp"
#include "../support.hpp"

namespace citebias {
namespace {

// Standard normal CDF by composite Simpson integration of the density;
// shares nothing with the library's erfc path.
double NormalCdfOracle(double x) {
  if (x < 0) return 1.0 - NormalCdfOracle(-x);
  const int n = 20000;
  const double h = x / n;
  auto pdf = [](double u) { return std::exp(-u * u / 2.0) / std::sqrt(2.0 * M_PI); };
  double s = pdf(0) + pdf(x);
  for (int i = 1; i < n; ++i) s += pdf(i * h) * (i % 2 ? 4.0 : 2.0);
  return 0.5 + s * h / 3.0;
}

double PooledZOracle(double sa, double na, double sb, double nb) {
  const double p = (sa + sb) / (na + nb);
  return (sa / na - sb / nb) / std::sqrt(p * (1 - p) * (1 / na + 1 / nb));
}

TEST(ComputeSrr, FrozenExample) {
  const auto r = ComputeSrr(ExposureCounts{60, 20, 35, 5});
  EXPECT_DOUBLE_EQ(r.female.available_share, 0.25);
  EXPECT_DOUBLE_EQ(*r.female.selected_share, 0.125);
  EXPECT_DOUBLE_EQ(*r.female.ratio, 0.5);
  EXPECT_DOUBLE_EQ(*r.male.ratio, 0.875 / 0.75);
  EXPECT_NEAR(*r.male.ratio, 1.1667, 5e-5);
}

TEST(ComputeSrr, SymmetryAndBoundaries) {
  auto r = ComputeSrr(ExposureCounts{30, 30, 7, 7});
  EXPECT_DOUBLE_EQ(*r.female.ratio, 1.0);
  EXPECT_DOUBLE_EQ(*r.male.ratio, 1.0);
  r = ComputeSrr(ExposureCounts{30, 30, 0, 9});
  EXPECT_DOUBLE_EQ(*r.male.ratio, 0.0);
  r = ComputeSrr(ExposureCounts{30, 30, 0, 0});
  EXPECT_FALSE(r.male.ratio.has_value());
  EXPECT_FALSE(r.female.selected_share.has_value());
  EXPECT_THROW(ComputeSrr(ExposureCounts{0, 30, 0, 1}), std::invalid_argument);
}

TEST(ComputeNsd, FrozenExamples) {
  EXPECT_DOUBLE_EQ(*ComputeNsd(9, 30, 3, 30).value, 0.5);
  EXPECT_DOUBLE_EQ(*ComputeNsd(3, 30, 3, 30).value, 0.0);
  EXPECT_DOUBLE_EQ(*ComputeNsd(4, 30, 0, 30).value, 1.0);
  EXPECT_DOUBLE_EQ(*ComputeNsd(0, 30, 4, 30).value, -1.0);
  EXPECT_FALSE(ComputeNsd(0, 30, 0, 30).value.has_value());
  EXPECT_THROW(ComputeNsd(0, 0, 1, 3), std::invalid_argument);
}

TEST(ComputeNsd, RandomizedOracleRangeAndAntisymmetry) {
  util::StableRng rng(17);
  for (int i = 0; i < 10000; ++i) {
    const auto em = 1 + static_cast<std::int64_t>(rng.Bounded(500));
    const auto ef = 1 + static_cast<std::int64_t>(rng.Bounded(500));
    const auto sm = static_cast<std::int64_t>(rng.Bounded(em + 1));
    const auto sf = static_cast<std::int64_t>(rng.Bounded(ef + 1));
    const auto r = ComputeNsd(sm, em, sf, ef);
    const double rm = double(sm) / em, rf = double(sf) / ef;
    if (rm + rf == 0) {
      ASSERT_FALSE(r.value);
      continue;
    }
    ASSERT_NEAR(*r.value, (rm - rf) / (rm + rf), 1e-12);
    ASSERT_GE(*r.value, -1.0);
    ASSERT_LE(*r.value, 1.0);
    ASSERT_EQ(*ComputeNsd(sf, ef, sm, em).value, -*r.value);
  }
}

TEST(TwoProportionTest, FiveHundredVsFourHundred) {
  const auto r = TwoProportionTest(500, 1000, 400, 1000);
  const double z = PooledZOracle(500, 1000, 400, 1000);
  EXPECT_NEAR(r.z, z, 1e-9);
  EXPECT_NEAR(r.z, 4.4947, 1e-4);
  EXPECT_NEAR(r.p_value, 2 * (1 - NormalCdfOracle(z)), 1e-7);
  EXPECT_LT(r.p_value, 1e-4);
  EXPECT_EQ(r.stars, "****");
}

TEST(TwoProportionTest, TinySamplesNotSignificant) {
  const auto r = TwoProportionTest(1, 2, 0, 2);
  EXPECT_NEAR(r.z, PooledZOracle(1, 2, 0, 2), 1e-12);
  EXPECT_NEAR(r.p_value, 2 * (1 - NormalCdfOracle(r.z)), 1e-7);
  EXPECT_EQ(r.stars, "ns");
}

TEST(TwoProportionTest, IdenticalAndDegenerate) {
  auto r = TwoProportionTest(30, 100, 30, 100);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.stars, "ns");
  EXPECT_FALSE(r.degenerate);
  r = TwoProportionTest(0, 10, 0, 10);
  EXPECT_TRUE(r.degenerate);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
  r = TwoProportionTest(10, 10, 10, 10);
  EXPECT_TRUE(r.degenerate);
}

TEST(TwoProportionTest, RandomizedAgainstOracle) {
  util::StableRng rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto na = 5 + static_cast<std::int64_t>(rng.Bounded(300));
    const auto nb = 5 + static_cast<std::int64_t>(rng.Bounded(300));
    const auto sa = static_cast<std::int64_t>(rng.Bounded(na + 1));
    const auto sb = static_cast<std::int64_t>(rng.Bounded(nb + 1));
    const auto r = TwoProportionTest(sa, na, sb, nb);
    if (r.degenerate) continue;
    const double z = PooledZOracle(sa, na, sb, nb);
    ASSERT_NEAR(r.p_value, std::min(1.0, 2 * (1 - NormalCdfOracle(std::fabs(z)))), 1e-7);
  }
}

TEST(StarsFor, Thresholds) {
  EXPECT_EQ(StarsFor(0.05), "ns");
  EXPECT_EQ(StarsFor(0.0499), "*");
  EXPECT_EQ(StarsFor(0.01), "*");
  EXPECT_EQ(StarsFor(0.0099), "**");
  EXPECT_EQ(StarsFor(0.001), "**");
  EXPECT_EQ(StarsFor(0.00099), "***");
  EXPECT_EQ(StarsFor(0.0001), "***");
  EXPECT_EQ(StarsFor(0.000099), "****");
}

// Records for a mirrored (n_r, n_min) pair and one article, with selections
// drawn at random.
std::vector<SelectionRecord> RandomRecords(const Corpus& corpus, int n_r, int n_min, int t,
                                           std::uint64_t seed, bool with_even = false) {
  util::StableRng rng(seed);
  std::vector<SelectionRecord> out;
  GridConfig g;
  g.model_ids = {"m"};
  g.cells = {{n_r, n_min}};
  if (with_even) g.cells.push_back({n_r, n_r / 2});
  g.t_values = {t};
  for (const auto& cond : EnumerateConditions(g)) {
    for (const auto& a : corpus.articles()) {
      const auto plan = BuildTrialPlan(a, cond);
      for (const auto& sg : plan.subgroups) {
        std::vector<std::string> ids;
        for (const auto& e : sg.entries) ids.push_back(e.ref_id);
        for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.Bounded(i)]);
        ids.resize(t);
        auto recs = CollectSubgroupRecords(plan, sg.index, {ids, ""});
        out.insert(out.end(), recs.begin(), recs.end());
      }
    }
  }
  return out;
}

TEST(CollectRecords, Counts) {
  const auto corpus = testing::SmallCorpus(1);
  const auto plan = BuildTrialPlan(
      corpus.articles()[0], {20, 5, 10, GroupType::kFemaleMinority, PromptVariant::kBaseline, "m"});
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back(plan.subgroups[0].entries[i * 2].ref_id);
  const auto recs = CollectSubgroupRecords(plan, 0, {ids, ""});
  EXPECT_EQ(recs.size(), 20u);
  int selected = 0;
  for (const auto& r : recs) {
    selected += r.selected;
    EXPECT_EQ(r.selected, r.rank.has_value());
  }
  EXPECT_EQ(selected, 10);

  std::vector<SubgroupOutcome> outcomes;
  for (int j = 0; j < 4; ++j) outcomes.push_back({0, j, SelectionResponse{ids, ""}});
  // ids come from subgroup 0 but every subgroup shows the same references
  EXPECT_EQ(CollectRecords(std::span(&plan, 1), outcomes).size(), 80u);
  outcomes[2].response.reset();
  EXPECT_EQ(CollectRecords(std::span(&plan, 1), outcomes).size(), 60u);

  ids.pop_back();
  EXPECT_THROW(CollectSubgroupRecords(plan, 0, {ids, ""}), ValidationError);
  ids.push_back("not-a-candidate");
  EXPECT_THROW(CollectSubgroupRecords(plan, 0, {ids, ""}), ValidationError);
}

TEST(SerializeRecord, RoundTrip) {
  const auto corpus = testing::SmallCorpus(1);
  for (const auto& r : RandomRecords(corpus, 20, 5, 10, 3)) {
    ASSERT_EQ(ParseRecord(SerializeRecord(r)), r);
  }
}

TEST(AssembleComparison, FrozenExposures) {
  const auto corpus = testing::SmallCorpus(1);
  const auto recs = RandomRecords(corpus, 20, 5, 10, 1, true);
  auto g = AssembleComparison(recs, SpecFor(Comparison::kFMinMMin));
  EXPECT_EQ(g.counts.exposures_female, g.counts.exposures_male);
  g = AssembleComparison(recs, SpecFor(Comparison::kFMinMMaj));
  EXPECT_EQ(g.counts.exposures_female, 20);
  EXPECT_EQ(g.counts.exposures_male, 60);
  g = AssembleComparison(recs, SpecFor(Comparison::kEven));
  EXPECT_EQ(g.counts.exposures_female, g.counts.exposures_male);
  EXPECT_EQ(g.counts.exposures_female, 20);

  const auto no_even = RandomRecords(corpus, 20, 5, 10, 1);
  EXPECT_THROW(AssembleComparison(no_even, SpecFor(Comparison::kEven)), ValidationError);
}

// Direct recount over records by spec membership.
ExposureCounts BruteForce(const std::vector<SelectionRecord>& recs, const ComparisonSpec& spec,
                          std::string_view field, const std::map<std::string, FosGroup>& fos) {
  ExposureCounts c;
  for (const auto& r : recs) {
    if (field != kAllFields && FosLabel(fos.at(r.article_id)) != field) continue;
    const auto& side = r.gender == Gender::kFemale ? spec.female_side : spec.male_side;
    if (r.condition.group_type != side.group_type || r.role != side.role) continue;
    if (r.gender == Gender::kFemale) {
      c.exposures_female++;
      c.selections_female += r.selected;
    } else {
      c.exposures_male++;
      c.selections_male += r.selected;
    }
  }
  return c;
}

TEST(Aggregate, MatchesBruteForceOnSmallRuns) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto corpus = SynthCorpus({1, 48, 5, seed});  // 5 articles, 5 divisions
    std::map<std::string, FosGroup> fos;
    const FosGroup groups[] = {FosGroup::kAgricultural, FosGroup::kNatural, FosGroup::kMedical};
    for (std::size_t i = 0; i < corpus.articles().size(); ++i) {
      fos[corpus.articles()[i].article_id] = groups[i % 3];
    }
    const auto recs = RandomRecords(corpus, 30, 6, 10, seed, true);
    AggregateOptions opts;
    opts.bootstrap_resamples = 0;
    const auto rows = Aggregate(recs, [&](std::string_view id) { return fos.at(std::string(id)); }, opts);
    // 5 comparisons x (3 fields + All)
    ASSERT_EQ(rows.size(), 20u);
    for (const auto& row : rows) {
      const auto expect = BruteForce(recs, SpecFor(row.comparison), row.field, fos);
      ASSERT_EQ(row.counts, expect) << ComparisonLabel(row.comparison) << " " << row.field;
      const auto nsd = ComputeNsd(expect);
      ASSERT_EQ(row.nsd.value, nsd.value);
    }
  }
}

TEST(Aggregate, AllRowPoolsCountsNotNsds) {
  // Two fields with equal exposures, NSD 0.02 vs 0.04 from counts.
  auto make = [](const std::string& article, GroupType gt, Gender g, int exposures, int selected) {
    std::vector<SelectionRecord> out;
    for (int i = 0; i < exposures; ++i) {
      SelectionRecord r;
      r.article_id = article;
      r.condition = {20, 5, 10, gt, PromptVariant::kBaseline, "m"};
      r.ref_id = article + std::to_string(i) + std::string(GenderName(g));
      r.gender = g;
      r.role = RoleOf(gt, g);
      r.selected = i < selected;
      if (r.selected) r.rank = 1;
      out.push_back(r);
    }
    return out;
  };
  std::vector<SelectionRecord> recs;
  auto add = [&](std::vector<SelectionRecord> v) { recs.insert(recs.end(), v.begin(), v.end()); };
  // field A: rates 0.51 / 0.49 -> 0.02 ; field B: rates 0.26 / 0.24 -> 0.04
  add(make("a", GroupType::kFemaleMinority, Gender::kFemale, 10000, 4900));
  add(make("a", GroupType::kFemaleMinority, Gender::kMale, 10000, 5100));
  add(make("b", GroupType::kFemaleMinority, Gender::kFemale, 10000, 2400));
  add(make("b", GroupType::kFemaleMinority, Gender::kMale, 10000, 2600));
  AggregateOptions opts;
  opts.bootstrap_resamples = 0;
  const auto rows = Aggregate(
      recs, [](std::string_view id) { return id == "a" ? FosGroup::kNatural : FosGroup::kSocial; },
      opts);
  std::map<std::string, double> nsd;
  for (const auto& r : rows) {
    if (r.comparison == Comparison::kFMinMMaj) nsd[r.field] = *r.nsd.value;
  }
  EXPECT_NEAR(nsd["Nat."], 0.02, 1e-12);
  EXPECT_NEAR(nsd["Soc."], 0.04, 1e-12);
  // pooled: (7700/20000 - 7300/20000) / (15000/20000) = 400 / 15000
  EXPECT_NEAR(nsd["All"], 400.0 / 15000.0, 1e-12);
  EXPECT_GT(std::fabs(nsd["All"] - 0.03), 1e-3);
}

TEST(Aggregate, SingleFieldRowEqualsAllRow) {
  const auto corpus = testing::SmallCorpus(3);
  const auto recs = RandomRecords(corpus, 20, 5, 10, 8);
  AggregateOptions opts;
  opts.bootstrap_resamples = 50;
  opts.bootstrap_seed = 3;
  const auto rows = Aggregate(recs, [](std::string_view) { return FosGroup::kNatural; }, opts);
  ASSERT_EQ(rows.size(), 8u);
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    EXPECT_EQ(rows[i].field, "Nat.");
    EXPECT_EQ(rows[i + 1].field, "All");
    EXPECT_EQ(rows[i].counts, rows[i + 1].counts);
    EXPECT_EQ(rows[i].nsd.value, rows[i + 1].nsd.value);
  }
}

TEST(Aggregate, CsvColumnsAndJsonRoundTrip) {
  const auto corpus = testing::SmallCorpus(3);
  const auto recs = RandomRecords(corpus, 20, 5, 10, 8);
  AggregateOptions opts;
  opts.bootstrap_resamples = 100;
  const auto rows = Aggregate(recs, [](std::string_view) { return FosGroup::kHumanities; }, opts);
  const auto csv = AggregateCsv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "model,comparison,field,n_r,n_min,t,variant,S_m,E_m,S_f,E_f,NSD,ci_low,ci_high,p,stars,"
            "n_articles");
  const auto back = ParseAggregateRows(SerializeAggregateRows(rows));
  ASSERT_EQ(back.size(), rows.size());
  EXPECT_EQ(AggregateCsv(back), csv);
}

ComparisonGroup GroupOf(const std::vector<ExposureCounts>& per_article) {
  ComparisonGroup g;
  g.spec = SpecFor(Comparison::kFMinMMaj);
  for (std::size_t i = 0; i < per_article.size(); ++i) {
    g.per_article.push_back({"a" + std::to_string(i), per_article[i]});
    g.counts += per_article[i];
  }
  return g;
}

TEST(ComputeSrr, StdErrorAcrossArticles) {
  // per-article female SRR 0.5 and 1.0: mean 0.75, sd sqrt(0.125), se 0.25
  const auto g = GroupOf({{60, 20, 35, 5}, {60, 20, 30, 10}});
  const auto r = ComputeSrr(g);
  EXPECT_NEAR(*r.female.std_error, 0.25, 1e-12);
  EXPECT_DOUBLE_EQ(*r.female.ratio, 15.0 / 80.0 / 0.25);
  EXPECT_FALSE(ComputeSrr(GroupOf({{60, 20, 35, 5}})).female.std_error.has_value());
}

TEST(BootstrapCi, IdenticalArticlesGiveZeroWidth) {
  const auto g = GroupOf(std::vector<ExposureCounts>(10, ExposureCounts{60, 20, 18, 4}));
  const auto ci = BootstrapCi(g, 500, 1);
  ASSERT_TRUE(ci);
  const double point = *ComputeNsd(g.counts).value;
  EXPECT_NEAR(ci->first, point, 1e-12);
  EXPECT_NEAR(ci->second, point, 1e-12);
}

TEST(BootstrapCi, DeterministicAndNeedsTwoArticles) {
  util::StableRng rng(2);
  std::vector<ExposureCounts> pa;
  for (int i = 0; i < 30; ++i) {
    pa.push_back({60, 20, static_cast<std::int64_t>(rng.Bounded(30)),
                  static_cast<std::int64_t>(rng.Bounded(10))});
  }
  const auto g = GroupOf(pa);
  EXPECT_EQ(BootstrapCi(g, 300, 9), BootstrapCi(g, 300, 9));
  EXPECT_NE(BootstrapCi(g, 300, 9), BootstrapCi(g, 300, 10));
  EXPECT_THROW(BootstrapCi(GroupOf({pa[0]}), 300, 9), ValidationError);
  EXPECT_FALSE(BootstrapCi(GroupOf({{5, 5, 0, 0}, {5, 5, 0, 0}}), 50, 1).has_value());
}

TEST(BootstrapCi, CoversZeroForUnbiasedArticles) {
  // Each repetition: 200 articles with identical selection probability for
  // both genders. The percentile interval should cover 0 about 95% of the time.
  const int reps = 200;
  int covered = 0;
  util::StableRng rng(12345);
  for (int rep = 0; rep < reps; ++rep) {
    std::vector<ExposureCounts> pa;
    for (int a = 0; a < 200; ++a) {
      ExposureCounts c{60, 20, 0, 0};
      for (int i = 0; i < 60; ++i) c.selections_male += rng.Uniform01() < 0.5;
      for (int i = 0; i < 20; ++i) c.selections_female += rng.Uniform01() < 0.5;
      pa.push_back(c);
    }
    const auto ci = BootstrapCi(GroupOf(pa), 2000, rng.Next());
    covered += ci && ci->first <= 0.0 && 0.0 <= ci->second;
  }
  const double rate = static_cast<double>(covered) / reps;
  EXPECT_GE(rate, 0.90);
  EXPECT_LE(rate, 0.99);
}

}  // namespace
}  // namespace citebias
