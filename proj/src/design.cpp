#include "citebias/design.hpp"

#include <algorithm>

#include "citebias/util.hpp"
#include "json.hpp"

namespace citebias {
namespace {

using nlohmann::json;

std::string ConditionWhere(const ExperimentCondition& c) {
  return "condition (n_r=" + std::to_string(c.n_r) + ", n_min=" + std::to_string(c.n_min) +
         ", t=" + std::to_string(c.t) + ")";
}

}  // namespace

std::string_view GroupTypeName(GroupType g) {
  switch (g) {
    case GroupType::kMaleMinority: return "male_minority";
    case GroupType::kFemaleMinority: return "female_minority";
    case GroupType::kGenderEven: return "gender_even";
  }
  return "?";
}

GroupType ParseGroupType(std::string_view name) {
  for (auto g : {GroupType::kMaleMinority, GroupType::kFemaleMinority, GroupType::kGenderEven}) {
    if (GroupTypeName(g) == name) return g;
  }
  throw ValidationError("unknown group type '" + std::string(name) + "'");
}

std::string_view VariantName(PromptVariant v) {
  return v == PromptVariant::kBaseline ? "baseline" : "mitigation";
}

PromptVariant ParseVariant(std::string_view name) {
  if (name == "baseline") return PromptVariant::kBaseline;
  if (name == "mitigation") return PromptVariant::kMitigation;
  throw ValidationError("unknown prompt variant '" + std::string(name) + "'");
}

std::string_view RoleName(Role r) {
  switch (r) {
    case Role::kMinority: return "minority";
    case Role::kMajority: return "majority";
    case Role::kEven: return "even";
  }
  return "?";
}

Role ParseRole(std::string_view name) {
  for (auto r : {Role::kMinority, Role::kMajority, Role::kEven}) {
    if (RoleName(r) == name) return r;
  }
  throw ValidationError("unknown role '" + std::string(name) + "'");
}

Role RoleOf(GroupType group, Gender g) {
  switch (group) {
    case GroupType::kGenderEven: return Role::kEven;
    case GroupType::kFemaleMinority: return g == Gender::kFemale ? Role::kMinority : Role::kMajority;
    case GroupType::kMaleMinority: return g == Gender::kMale ? Role::kMinority : Role::kMajority;
  }
  return Role::kEven;
}

int ExperimentCondition::n_female() const {
  switch (group_type) {
    case GroupType::kFemaleMinority: return n_min;
    case GroupType::kMaleMinority: return n_r - n_min;
    case GroupType::kGenderEven: return n_r / 2;
  }
  return 0;
}

int ExperimentCondition::n_male() const { return n_r - n_female(); }

std::string ExperimentCondition::Fingerprint() const {
  return std::string(GroupTypeName(group_type)) + "/n" + std::to_string(n_r) + "/min" +
         std::to_string(n_min) + "/t" + std::to_string(t) + "/" + std::string(VariantName(variant)) +
         "/" + model_id;
}

void ValidateCondition(const ExperimentCondition& c) {
  if (c.n_r <= 0 || c.n_min <= 0 || c.n_min > c.n_r) {
    throw ValidationError(ConditionWhere(c) + ": sizes out of range");
  }
  if (c.n_r % c.n_min != 0) {
    throw ValidationError(ConditionWhere(c) + ": n_min does not divide n_r");
  }
  const bool half = 2 * c.n_min == c.n_r;
  if (half != (c.group_type == GroupType::kGenderEven)) {
    throw ValidationError(ConditionWhere(c) + ": gender_even requires n_min = n_r / 2");
  }
  if (c.t < 1 || c.t > c.n_r) {
    throw ValidationError(ConditionWhere(c) + ": t out of range [1, n_r]");
  }
}

GridConfig StandardGrid() {
  GridConfig g;
  g.cells = {{20, 2}, {20, 5}, {30, 6}, {30, 10}, {48, 8}, {48, 16}};
  return g;
}

GridConfig StandardGridWithEvens() {
  GridConfig g = StandardGrid();
  g.cells.insert(g.cells.end(), {{20, 10}, {30, 15}, {48, 24}});
  return g;
}

std::vector<ExperimentCondition> EnumerateConditions(const GridConfig& grid) {
  std::vector<ExperimentCondition> out;
  for (const auto& model : grid.model_ids) {
    for (auto variant : grid.variants) {
      for (int t : grid.t_values) {
        for (const auto& cell : grid.cells) {
          ExperimentCondition c{cell.n_r, cell.n_min, t, GroupType::kFemaleMinority, variant, model};
          if (cell.n_min > 0 && 2 * cell.n_min == cell.n_r) {
            c.group_type = GroupType::kGenderEven;
            ValidateCondition(c);
            out.push_back(c);
            continue;
          }
          ValidateCondition(c);
          out.push_back(c);
          out.push_back(Mirror(c));
        }
      }
    }
  }
  return out;
}

ExperimentCondition Mirror(const ExperimentCondition& c) {
  ExperimentCondition m = c;
  switch (c.group_type) {
    case GroupType::kFemaleMinority: m.group_type = GroupType::kMaleMinority; break;
    case GroupType::kMaleMinority: m.group_type = GroupType::kFemaleMinority; break;
    case GroupType::kGenderEven:
      throw ValidationError("mirror is undefined for gender_even conditions");
  }
  return m;
}

MinorityGender MinorityOf(GroupType g) {
  switch (g) {
    case GroupType::kMaleMinority: return MinorityGender::kMale;
    case GroupType::kFemaleMinority: return MinorityGender::kFemale;
    case GroupType::kGenderEven: return MinorityGender::kNoneEven;
  }
  return MinorityGender::kNoneEven;
}

std::vector<Subgroup> BuildSubgroups(const std::vector<std::string>& candidate_ids, int n_min,
                                     MinorityGender minority) {
  const int n_r = static_cast<int>(candidate_ids.size());
  if (n_min <= 0 || n_r == 0 || n_r % n_min != 0) {
    throw ValidationError("n_min=" + std::to_string(n_min) + " does not divide n_r=" +
                          std::to_string(n_r));
  }
  if (minority == MinorityGender::kNoneEven && 2 * n_min != n_r) {
    throw ValidationError("gender-even rotation requires n_min = n_r / 2");
  }
  // In the even case block j is shown female, so female acts as "minority".
  const Gender flipped = minority == MinorityGender::kMale ? Gender::kMale : Gender::kFemale;
  const Gender rest = Opposite(flipped);
  const int k = n_r / n_min;
  std::vector<Subgroup> out(k);
  for (int j = 0; j < k; ++j) {
    out[j].index = j;
    out[j].entries.reserve(n_r);
    for (int i = 0; i < n_r; ++i) {
      out[j].entries.push_back({candidate_ids[i], i / n_min == j ? flipped : rest});
    }
  }
  return out;
}

ExposureCounts& ExposureCounts::operator+=(const ExposureCounts& o) {
  exposures_male += o.exposures_male;
  exposures_female += o.exposures_female;
  selections_male += o.selections_male;
  selections_female += o.selections_female;
  return *this;
}

ExposureCounts ExposureLedger(const TrialPlan& plan) {
  ExposureCounts e;
  for (const auto& sg : plan.subgroups) {
    for (const auto& p : sg.entries) {
      (p.gender == Gender::kMale ? e.exposures_male : e.exposures_female) += 1;
    }
  }
  return e;
}

TrialPlan BuildTrialPlan(const FocalArticle& article, const ExperimentCondition& condition,
                         std::optional<std::uint64_t> shuffle_seed) {
  ValidateCondition(condition);
  if (article.candidate_ref_ids.size() < static_cast<std::size_t>(condition.n_r)) {
    throw ValidationError("article " + article.article_id + ": " +
                          std::to_string(article.candidate_ref_ids.size()) +
                          " candidates < n_r=" + std::to_string(condition.n_r));
  }
  std::vector<std::string> ids = article.candidate_ref_ids;
  if (shuffle_seed) {
    util::StableRng rng(*shuffle_seed, article.article_id);
    for (std::size_t i = ids.size(); i > 1; --i) {
      std::swap(ids[i - 1], ids[rng.Bounded(i)]);
    }
  }
  ids.resize(condition.n_r);
  TrialPlan plan;
  plan.article_id = article.article_id;
  plan.condition = condition;
  plan.subgroups = BuildSubgroups(ids, condition.n_min, MinorityOf(condition.group_type));
  plan.exposure = ExposureLedger(plan);
  return plan;
}

std::string_view ComparisonLabel(Comparison c) {
  switch (c) {
    case Comparison::kFMinMMin: return "F Min-M Min";
    case Comparison::kFMajMMaj: return "F Maj-M Maj";
    case Comparison::kFMajMMin: return "F Maj-M Min";
    case Comparison::kFMinMMaj: return "F Min-M Maj";
    case Comparison::kEven: return "Even";
  }
  return "?";
}

Comparison ParseComparison(std::string_view label) {
  for (auto c : kAllComparisons) {
    if (ComparisonLabel(c) == label) return c;
  }
  throw ValidationError("unknown comparison '" + std::string(label) + "'");
}

ComparisonSpec SpecFor(Comparison c) {
  using G = GroupType;
  switch (c) {
    // Cross-pool: each side comes from the pool where that gender has the role.
    case Comparison::kFMinMMin:
      return {c, {G::kFemaleMinority, Role::kMinority}, {G::kMaleMinority, Role::kMinority}};
    case Comparison::kFMajMMaj:
      return {c, {G::kMaleMinority, Role::kMajority}, {G::kFemaleMinority, Role::kMajority}};
    // Within-pool.
    case Comparison::kFMajMMin:
      return {c, {G::kMaleMinority, Role::kMajority}, {G::kMaleMinority, Role::kMinority}};
    case Comparison::kFMinMMaj:
      return {c, {G::kFemaleMinority, Role::kMinority}, {G::kFemaleMinority, Role::kMajority}};
    case Comparison::kEven:
      return {c, {G::kGenderEven, Role::kEven}, {G::kGenderEven, Role::kEven}};
  }
  throw ValidationError("unknown comparison");
}

std::string SerializePlan(const TrialPlan& plan) {
  const auto& c = plan.condition;
  json subgroups = json::array();
  for (const auto& sg : plan.subgroups) {
    json entries = json::array();
    for (const auto& p : sg.entries) entries.push_back({p.ref_id, GenderName(p.gender)});
    subgroups.push_back({{"index", sg.index}, {"entries", std::move(entries)}});
  }
  json doc = {
      {"article_id", plan.article_id},
      {"condition",
       {{"n_r", c.n_r},
        {"n_min", c.n_min},
        {"t", c.t},
        {"group_type", GroupTypeName(c.group_type)},
        {"variant", VariantName(c.variant)},
        {"model_id", c.model_id}}},
      {"subgroups", std::move(subgroups)},
      {"exposure", {{"E_m", plan.exposure.exposures_male}, {"E_f", plan.exposure.exposures_female}}}};
  return doc.dump();
}

TrialPlan ParsePlan(std::string_view json_line) {
  json doc = json::parse(json_line, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) throw ValidationError("plan: malformed line");
  try {
    TrialPlan plan;
    plan.article_id = doc.at("article_id").get<std::string>();
    const auto& c = doc.at("condition");
    plan.condition = {c.at("n_r").get<int>(),
                      c.at("n_min").get<int>(),
                      c.at("t").get<int>(),
                      ParseGroupType(c.at("group_type").get<std::string>()),
                      ParseVariant(c.at("variant").get<std::string>()),
                      c.at("model_id").get<std::string>()};
    for (const auto& sg : doc.at("subgroups")) {
      Subgroup s;
      s.index = sg.at("index").get<int>();
      for (const auto& e : sg.at("entries")) {
        s.entries.push_back({e.at(0).get<std::string>(), ParseGender(e.at(1).get<std::string>())});
      }
      plan.subgroups.push_back(std::move(s));
    }
    plan.exposure = ExposureLedger(plan);
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("plan: ") + e.what());
  }
}

}  // namespace citebias
