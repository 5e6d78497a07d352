#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "citebias/corpus.hpp"
#include "citebias/design.hpp"
#include "citebias/prompting.hpp"

namespace citebias {

// One (presentation, gender, selected?, rank) observation.
struct SelectionRecord {
  std::string article_id;
  ExperimentCondition condition;
  int subgroup_index = 0;
  std::string ref_id;
  Gender gender = Gender::kMale;
  Role role = Role::kEven;
  bool selected = false;
  std::optional<int> rank;  // 1..t, present iff selected

  bool operator==(const SelectionRecord&) const = default;
};

std::string SerializeRecord(const SelectionRecord& r);  // one JSON line, no newline
SelectionRecord ParseRecord(std::string_view line);

// Records for one answered subgroup. Throws ValidationError when the
// response does not match the subgroup (unknown id, wrong count).
std::vector<SelectionRecord> CollectSubgroupRecords(const TrialPlan& plan, int subgroup_index,
                                                    const SelectionResponse& response);

struct SubgroupOutcome {
  std::size_t plan_index = 0;
  int subgroup_index = 0;
  std::optional<SelectionResponse> response;  // nullopt: excluded trial
};

std::vector<SelectionRecord> CollectRecords(std::span<const TrialPlan> plans,
                                            std::span<const SubgroupOutcome> outcomes);

struct ArticleCounts {
  std::string article_id;
  ExposureCounts counts;
};

struct ComparisonGroup {
  ComparisonSpec spec;
  ExposureCounts counts;
  std::vector<ArticleCounts> per_article;  // sorted by article_id

  int n_articles() const { return static_cast<int>(per_article.size()); }
};

// Female side from records matching spec.female_side, male side from
// spec.male_side. Callers pass records of one (model, cell, t, variant)
// slice. Throws ValidationError when either side has no exposures.
ComparisonGroup AssembleComparison(std::span<const SelectionRecord> records,
                                   const ComparisonSpec& spec);
ComparisonGroup AssembleComparison(std::span<const SelectionRecord* const> records,
                                   const ComparisonSpec& spec);

struct GenderSrr {
  double available_share = 0.0;
  std::optional<double> selected_share;  // undefined when nothing was selected
  std::optional<double> ratio;
  std::optional<double> std_error;  // across articles
};

struct SrrResult {
  GenderSrr female;
  GenderSrr male;
};

// Throws std::invalid_argument on zero exposures for either gender.
SrrResult ComputeSrr(const ExposureCounts& counts);
// Adds the per-article standard error of each ratio.
SrrResult ComputeSrr(const ComparisonGroup& group);

struct NsdResult {
  std::optional<double> value;  // undefined when both rates are zero
  double male_rate = 0.0;
  double female_rate = 0.0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
};

// (S_m/E_m - S_f/E_f) / (S_m/E_m + S_f/E_f). Throws std::invalid_argument
// when either exposure count is zero.
NsdResult ComputeNsd(std::int64_t selections_male, std::int64_t exposures_male,
                     std::int64_t selections_female, std::int64_t exposures_female);
NsdResult ComputeNsd(const ExposureCounts& counts);

struct SignificanceResult {
  double p_value = 1.0;
  double z = 0.0;
  std::string stars = "ns";
  std::string test_name = "two-proportion z-test (pooled, two-sided)";
  bool degenerate = false;  // pooled proportion 0 or 1; p set to 1
};

// ns p>=0.05, * p<0.05, ** p<0.01, *** p<0.001, **** p<0.0001
std::string_view StarsFor(double p);

SignificanceResult TwoProportionTest(std::int64_t successes_a, std::int64_t trials_a,
                                     std::int64_t successes_b, std::int64_t trials_b);

// Percentile interval of NSD over article resamples. Throws
// ValidationError with fewer than two articles; nullopt when every
// resample is undefined.
std::optional<std::pair<double, double>> BootstrapCi(const ComparisonGroup& group, int resamples,
                                                     std::uint64_t seed);

inline constexpr int kDefaultBootstrapResamples = 2000;
inline constexpr std::string_view kAllFields = "All";
inline constexpr std::string_view kPooled = "*";

struct AggregateOptions {
  bool by_field = true;
  bool by_cell = true;  // (n_r, n_min)
  bool by_t = true;
  bool by_variant = true;
  int bootstrap_resamples = kDefaultBootstrapResamples;  // 0 disables intervals
  std::uint64_t bootstrap_seed = 0;
};

struct AggregateRow {
  std::string model;
  Comparison comparison = Comparison::kEven;
  std::string field;    // FOS label or "All"
  std::string n_r;      // number or "*" when pooled
  std::string n_min;
  std::string t;
  std::string variant;
  ExposureCounts counts;
  NsdResult nsd;
  SrrResult srr;
  SignificanceResult significance;
  int n_articles = 0;
};

using ArticleFieldFn = std::function<FosGroup(std::string_view article_id)>;

// One row per key combination and applicable comparison. The "All" row is
// computed from summed counts across fields, never from field NSDs.
std::vector<AggregateRow> Aggregate(std::span<const SelectionRecord> records,
                                    const ArticleFieldFn& field_of, const AggregateOptions& options);

// Stable column order: model, comparison, field, n_r, n_min, t, variant,
// S_m, E_m, S_f, E_f, NSD, ci_low, ci_high, p, stars, n_articles.
std::string AggregateCsv(std::span<const AggregateRow> rows);

// Lossless JSON-lines form used between the analyze and report stages.
std::string SerializeAggregateRows(std::span<const AggregateRow> rows);
std::vector<AggregateRow> ParseAggregateRows(std::string_view text);

}  // namespace citebias
