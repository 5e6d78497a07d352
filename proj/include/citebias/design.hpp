#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "citebias/corpus.hpp"
#include "citebias/pseudonyms.hpp"

namespace citebias {

enum class GroupType { kMaleMinority, kFemaleMinority, kGenderEven };
enum class PromptVariant { kBaseline, kMitigation };
enum class Role { kMinority, kMajority, kEven };

std::string_view GroupTypeName(GroupType g);  // male_minority / female_minority / gender_even
GroupType ParseGroupType(std::string_view name);
std::string_view VariantName(PromptVariant v);  // baseline / mitigation
PromptVariant ParseVariant(std::string_view name);
std::string_view RoleName(Role r);  // minority / majority / even
Role ParseRole(std::string_view name);

// Role played by a presentation of gender `g` in a pool of type `group`.
Role RoleOf(GroupType group, Gender g);

struct ExperimentCondition {
  int n_r = 20;
  int n_min = 5;
  int t = 10;
  GroupType group_type = GroupType::kFemaleMinority;
  PromptVariant variant = PromptVariant::kBaseline;
  std::string model_id;

  int n_female() const;
  int n_male() const;
  int n_subgroups() const { return n_r / n_min; }
  // Stable identifier, e.g. "female_minority/n20/min5/t10/baseline/gpt-4o".
  std::string Fingerprint() const;

  bool operator==(const ExperimentCondition&) const = default;
};

// Throws ValidationError when a condition violates divisibility, the
// even/half relation, or 1 <= t <= n_r.
void ValidateCondition(const ExperimentCondition& c);

struct GridCell {
  int n_r = 0;
  int n_min = 0;
  bool operator==(const GridCell&) const = default;
};

struct GridConfig {
  std::vector<GridCell> cells;
  std::vector<int> t_values = {10};
  std::vector<PromptVariant> variants = {PromptVariant::kBaseline};
  std::vector<std::string> model_ids;
};

// Six paired imbalanced cells, t = 10.
GridConfig StandardGrid();
// StandardGrid() plus the three gender-even cells (10/20, 15/30, 24/48).
GridConfig StandardGridWithEvens();

// For every imbalanced cell emits the female-minority condition followed by
// its mirror; a cell with n_min = n_r / 2 yields one gender-even condition.
// Order: model, variant, t, cell.
std::vector<ExperimentCondition> EnumerateConditions(const GridConfig& grid);

// Swaps male_minority and female_minority. Throws on gender_even.
ExperimentCondition Mirror(const ExperimentCondition& c);

struct Presentation {
  std::string ref_id;
  Gender gender = Gender::kMale;
  bool operator==(const Presentation&) const = default;
};

struct Subgroup {
  int index = 0;
  std::vector<Presentation> entries;
  bool operator==(const Subgroup&) const = default;
};

enum class MinorityGender { kMale, kFemale, kNoneEven };

// Block rotation: the ordered ids are cut into k = n_r / n_min consecutive
// blocks and subgroup j shows block j with the minority gender, every other
// block with the majority gender. kNoneEven requires n_min = n_r / 2 and
// shows block j as female, the other block as male.
std::vector<Subgroup> BuildSubgroups(const std::vector<std::string>& candidate_ids, int n_min,
                                     MinorityGender minority);

MinorityGender MinorityOf(GroupType g);

struct ExposureCounts {
  std::int64_t exposures_male = 0;
  std::int64_t exposures_female = 0;
  std::int64_t selections_male = 0;
  std::int64_t selections_female = 0;

  ExposureCounts& operator+=(const ExposureCounts& o);
  bool operator==(const ExposureCounts&) const = default;
};

struct TrialPlan {
  std::string article_id;
  ExperimentCondition condition;
  std::vector<Subgroup> subgroups;
  ExposureCounts exposure;  // selections zeroed

  bool operator==(const TrialPlan&) const = default;
};

// Truncates the article's candidates to the first n_r (optionally after a
// seeded shuffle) and builds the rotation for the condition.
TrialPlan BuildTrialPlan(const FocalArticle& article, const ExperimentCondition& condition,
                         std::optional<std::uint64_t> shuffle_seed = std::nullopt);

ExposureCounts ExposureLedger(const TrialPlan& plan);

enum class Comparison { kFMinMMin, kFMajMMaj, kFMajMMin, kFMinMMaj, kEven };

// NSD table row order followed by kEven.
inline constexpr std::array<Comparison, 5> kAllComparisons = {
    Comparison::kFMinMMin, Comparison::kFMajMMaj, Comparison::kFMajMMin, Comparison::kFMinMMaj,
    Comparison::kEven};

std::string_view ComparisonLabel(Comparison c);  // "F Min-M Min", ..., "Even"
Comparison ParseComparison(std::string_view label);

struct ComparisonSide {
  GroupType group_type;
  Role role;
};

struct ComparisonSpec {
  Comparison label;
  ComparisonSide female_side;
  ComparisonSide male_side;
};

ComparisonSpec SpecFor(Comparison c);

std::string SerializePlan(const TrialPlan& plan);  // one JSON line, no newline
TrialPlan ParsePlan(std::string_view json_line);

}  // namespace citebias
