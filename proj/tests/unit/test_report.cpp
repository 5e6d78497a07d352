#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "citebias/report.hpp"
#include "citebias/util.hpp"

namespace citebias {
namespace {

const std::filesystem::path kGolden = CITEBIAS_GOLDEN_DIR;

TEST(ShadeFor, FrozenBuckets) {
  EXPECT_EQ(ShadeFor(0.042), (Shade{BiasDirection::kMale, 3}));
  EXPECT_EQ(ShadeFor(-0.030).direction, BiasDirection::kFemale);
  EXPECT_EQ(ShadeFor(-0.030).level, 2);
  EXPECT_EQ(ShadeFor(0.005), Shade{});
  EXPECT_EQ(ShadeFor(0.01), Shade{});
  EXPECT_EQ(ShadeFor(0.0101), (Shade{BiasDirection::kMale, 1}));
  EXPECT_EQ(ShadeFor(0.193), (Shade{BiasDirection::kMale, 4}));
  EXPECT_EQ(ShadeFor(std::nullopt), Shade{});
  EXPECT_EQ(ShadeName(ShadeFor(0.042)), "male3");
  EXPECT_EQ(ShadeName(ShadeFor(-0.06)), "female4");
  EXPECT_EQ(ShadeName(Shade{}), "none");
}

TEST(ShadeFor, DirectionFollowsSignAndLevelIsMonotone) {
  int prev = 0;
  for (int i = 0; i <= 1000; ++i) {
    const double v = i / 1000.0;
    const auto pos = ShadeFor(v);
    const auto neg = ShadeFor(-v);
    ASSERT_EQ(pos.level, neg.level);
    ASSERT_GE(pos.level, prev);
    prev = pos.level;
    if (pos.level > 0) {
      ASSERT_EQ(pos.direction, BiasDirection::kMale);
      ASSERT_EQ(neg.direction, BiasDirection::kFemale);
    } else {
      ASSERT_EQ(pos.direction, BiasDirection::kNone);
    }
  }
}

TEST(ShadeFor, CustomEdges) {
  ShadeConfig c{{0.1, 0.2}};
  EXPECT_EQ(ShadeFor(0.15, c), (Shade{BiasDirection::kMale, 1}));
  EXPECT_EQ(ShadeFor(0.05, c), Shade{});
}

TEST(FormatNsd, Forms) {
  EXPECT_EQ(FormatNsd(0.042), ".042");
  EXPECT_EQ(FormatNsd(-0.030), "-.030");
  EXPECT_EQ(FormatNsd(-0.0001), "-.000");
  EXPECT_EQ(FormatNsd(0.1934), ".193");
  EXPECT_EQ(FormatNsd(1.0), "1.000");
  EXPECT_EQ(FormatNsd(std::nullopt), "NA");
}

// Model "m" with one row per (comparison, field); values cover every
// shading level and both directions.
std::vector<ReportRow> SampleRows() {
  const Comparison comps[] = {Comparison::kFMinMMin, Comparison::kFMajMMaj, Comparison::kFMajMMin,
                              Comparison::kFMinMMaj};
  const char* fields[] = {"Nat.", "Eng.", "Med.", "Agr.", "Soc.", "Hum.", "All"};
  const int articles[] = {210, 60, 60, 30, 180, 120, 660};
  const double base[] = {0.193, 0.042, 0.028, 0.207};
  std::vector<ReportRow> out;
  for (int c = 0; c < 4; ++c) {
    for (int f = 0; f < 7; ++f) {
      ReportRow r;
      r.model = "m";
      r.comparison = comps[c];
      r.field = fields[f];
      r.nsd = base[c] - 0.012 * f;
      r.shade = ShadeFor(r.nsd);
      r.stars = "****";
      r.n_articles = articles[f];
      out.push_back(r);
    }
  }
  return out;
}

TEST(RenderNsdTable, MatchesGoldenLayout) {
  const auto t = RenderNsdTable(SampleRows());
  const auto golden = util::ReadFile(kGolden / "nsd_table.txt");
  if (t.text != golden) {
    std::ofstream(std::filesystem::temp_directory_path() / "nsd_table.actual.txt") << t.text;
  }
  EXPECT_EQ(t.text, golden);
}

TEST(RenderNsdTable, CsvHasOneLinePerCell) {
  const auto t = RenderNsdTable(SampleRows());
  EXPECT_EQ(t.csv.substr(0, t.csv.find('\n')), "model,comparison,field,nsd,shade,stars,n_articles");
  EXPECT_EQ(std::count(t.csv.begin(), t.csv.end(), '\n'), 1 + 28);
  EXPECT_NE(t.csv.find("m,F Maj-M Maj,Nat.,.042,male3,****,210"), std::string::npos)
      << t.csv;
}

TEST(RenderNsdTable, MissingCellShowsNa) {
  auto rows = SampleRows();
  rows.erase(rows.begin() + 3);  // F Min-M Min, Agr.
  const auto t = RenderNsdTable(rows);
  const auto line_start = t.text.find("F Min-M Min");
  const auto line = t.text.substr(line_start, t.text.find('\n', line_start) - line_start);
  EXPECT_NE(line.find("NA"), std::string::npos) << line;
}

TEST(RenderNsdTable, ModelsInFirstAppearanceOrder) {
  auto rows = SampleRows();
  auto second = rows;
  for (auto& r : second) r.model = "a-model";
  second.insert(second.end(), rows.begin(), rows.end());
  const auto t = RenderNsdTable(second);
  EXPECT_LT(t.text.find("a-model"), t.text.find("\nm\n"));
}

TEST(ToReportRows, CarriesShadeAndStars) {
  AggregateRow a;
  a.model = "m";
  a.comparison = Comparison::kFMajMMaj;
  a.field = "All";
  a.nsd.value = -0.04;
  a.significance.stars = "**";
  a.n_articles = 12;
  const auto r = ToReportRows(std::span(&a, 1));
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(ShadeName(r[0].shade), "female3");
  EXPECT_EQ(r[0].stars, "**");
  EXPECT_EQ(r[0].n_articles, 12);
}

TEST(ExportSrrPlotData, AllRowsOnlyAndDefinedRatios) {
  AggregateRow a;
  a.model = "m";
  a.comparison = Comparison::kFMinMMaj;
  a.field = "All";
  a.n_r = "20";
  a.n_min = "5";
  a.t = "10";
  a.variant = "baseline";
  a.srr = ComputeSrr(ExposureCounts{60, 20, 35, 5});
  a.srr.female.std_error = 0.05;
  a.srr.male.std_error = 0.025;
  a.significance.stars = "*";
  a.n_articles = 3;
  auto field_row = a;
  field_row.field = "Nat.";
  auto undefined = a;
  undefined.srr = ComputeSrr(ExposureCounts{60, 20, 0, 0});
  const std::vector<AggregateRow> rows = {a, field_row, undefined};
  const auto csv = ExportSrrPlotData(rows);
  EXPECT_EQ(csv,
            "comparison,model,n_min,n_r,t,variant,gender,srr,stderr,stars,n_articles\n"
            "F Min-M Maj,m,5,20,10,baseline,female,0.5,0.05,*,3\n"
            "F Min-M Maj,m,5,20,10,baseline,male," +
                util::FormatDouble(*a.srr.male.ratio) + ",0.025,*,3\n");
}

TEST(Manifest, RoundTripWithExclusions) {
  RunManifest m;
  m.config_json = R"({"run_dir":"/tmp/x","seeds":{"assignment":7}})";
  m.corpus_digest = std::string(64, 'a');
  m.seeds = {{"assignment", 7}, {"bootstrap", 11}, {"simulation", 20240601}};
  m.per_model["sim"] = {100, 20, 3, 1};
  m.per_model["remote"] = {5, 0, 0, 2};
  m.planned_subgroups = 120;
  m.completed_subgroups = 118;
  m.exclusions = {{"A31-001", "sim|20|5|10|fmin|baseline", 2, "parse failure: wrong_count: 9"},
                  {"A31-002", "sim|20|5|10|fmin|baseline", 0, "backend failure: timeout"}};
  m.timestamps = {"2026-01-01T00:00:00Z", "2026-01-01T00:05:00Z"};
  const auto text = WriteManifest(m);
  EXPECT_EQ(ParseManifest(text), m);
  EXPECT_EQ(WriteManifest(ParseManifest(text)), text);
}

}  // namespace
}  // namespace citebias
