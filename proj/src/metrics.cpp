#include "citebias/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

#include "citebias/util.hpp"
#include "json.hpp"

namespace citebias {
namespace {

using nlohmann::json;

const SelectionRecord& Deref(const SelectionRecord& r) { return r; }
const SelectionRecord& Deref(const SelectionRecord* r) { return *r; }

bool Matches(const SelectionRecord& r, const ComparisonSide& side, Gender g) {
  return r.gender == g && r.condition.group_type == side.group_type && r.role == side.role;
}

template <typename Range>
ComparisonGroup AssembleImpl(const Range& records, const ComparisonSpec& spec) {
  ComparisonGroup group;
  group.spec = spec;
  std::map<std::string, ExposureCounts> by_article;
  for (const auto& item : records) {
    const SelectionRecord& r = Deref(item);
    ExposureCounts* slot = nullptr;
    if (Matches(r, spec.female_side, Gender::kFemale)) {
      slot = &by_article[r.article_id];
      slot->exposures_female++;
      if (r.selected) slot->selections_female++;
    } else if (Matches(r, spec.male_side, Gender::kMale)) {
      slot = &by_article[r.article_id];
      slot->exposures_male++;
      if (r.selected) slot->selections_male++;
    }
  }
  for (auto& [id, counts] : by_article) {
    group.counts += counts;
    group.per_article.push_back({id, counts});
  }
  if (group.counts.exposures_female == 0 || group.counts.exposures_male == 0) {
    throw ValidationError("comparison " + std::string(ComparisonLabel(spec.label)) +
                          ": missing condition coverage");
  }
  return group;
}

std::optional<double> SampleStdError(const std::vector<double>& xs) {
  if (xs.size() < 2) return std::nullopt;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double var = ss / static_cast<double>(xs.size() - 1);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

double Quantile(const std::vector<double>& sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string OptNum(const std::optional<double>& v) { return v ? util::FormatDouble(*v) : ""; }

}  // namespace

std::string SerializeRecord(const SelectionRecord& r) {
  const auto& c = r.condition;
  json doc = {{"article_id", r.article_id},
              {"condition", c.Fingerprint()},
              {"model_id", c.model_id},
              {"group_type", GroupTypeName(c.group_type)},
              {"n_r", c.n_r},
              {"n_min", c.n_min},
              {"t", c.t},
              {"variant", VariantName(c.variant)},
              {"subgroup_index", r.subgroup_index},
              {"ref_id", r.ref_id},
              {"presented_gender", GenderName(r.gender)},
              {"role", RoleName(r.role)},
              {"selected", r.selected},
              {"rank", r.rank ? json(*r.rank) : json(nullptr)}};
  return doc.dump();
}

SelectionRecord ParseRecord(std::string_view line) {
  json doc = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) throw ValidationError("record: malformed line");
  try {
    SelectionRecord r;
    r.article_id = doc.at("article_id").get<std::string>();
    r.condition = {doc.at("n_r").get<int>(),
                   doc.at("n_min").get<int>(),
                   doc.at("t").get<int>(),
                   ParseGroupType(doc.at("group_type").get<std::string>()),
                   ParseVariant(doc.at("variant").get<std::string>()),
                   doc.at("model_id").get<std::string>()};
    r.subgroup_index = doc.at("subgroup_index").get<int>();
    r.ref_id = doc.at("ref_id").get<std::string>();
    r.gender = ParseGender(doc.at("presented_gender").get<std::string>());
    r.role = ParseRole(doc.at("role").get<std::string>());
    r.selected = doc.at("selected").get<bool>();
    if (!doc.at("rank").is_null()) r.rank = doc.at("rank").get<int>();
    if (r.selected != r.rank.has_value()) {
      throw ValidationError("record: rank must be present iff selected");
    }
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("record: ") + e.what());
  }
}

std::vector<SelectionRecord> CollectSubgroupRecords(const TrialPlan& plan, int subgroup_index,
                                                    const SelectionResponse& response) {
  if (subgroup_index < 0 || static_cast<std::size_t>(subgroup_index) >= plan.subgroups.size()) {
    throw ValidationError("response/plan mismatch: no subgroup " + std::to_string(subgroup_index));
  }
  const auto& sg = plan.subgroups[subgroup_index];
  if (response.selected_ids.size() != static_cast<std::size_t>(plan.condition.t)) {
    throw ValidationError("response/plan mismatch: selection count differs from t");
  }
  std::unordered_map<std::string_view, int> rank_of;
  for (std::size_t i = 0; i < response.selected_ids.size(); ++i) {
    rank_of.emplace(response.selected_ids[i], static_cast<int>(i) + 1);
  }
  std::vector<SelectionRecord> out;
  out.reserve(sg.entries.size());
  std::size_t matched = 0;
  for (const auto& e : sg.entries) {
    SelectionRecord r;
    r.article_id = plan.article_id;
    r.condition = plan.condition;
    r.subgroup_index = sg.index;
    r.ref_id = e.ref_id;
    r.gender = e.gender;
    r.role = RoleOf(plan.condition.group_type, e.gender);
    if (auto it = rank_of.find(e.ref_id); it != rank_of.end()) {
      r.selected = true;
      r.rank = it->second;
      ++matched;
    }
    out.push_back(std::move(r));
  }
  if (matched != response.selected_ids.size()) {
    throw ValidationError("response/plan mismatch: selection names a non-candidate or repeats");
  }
  return out;
}

std::vector<SelectionRecord> CollectRecords(std::span<const TrialPlan> plans,
                                            std::span<const SubgroupOutcome> outcomes) {
  std::vector<SelectionRecord> out;
  for (const auto& o : outcomes) {
    if (!o.response) continue;
    if (o.plan_index >= plans.size()) throw ValidationError("response/plan mismatch: no plan");
    auto recs = CollectSubgroupRecords(plans[o.plan_index], o.subgroup_index, *o.response);
    out.insert(out.end(), std::make_move_iterator(recs.begin()),
               std::make_move_iterator(recs.end()));
  }
  return out;
}

ComparisonGroup AssembleComparison(std::span<const SelectionRecord> records,
                                   const ComparisonSpec& spec) {
  return AssembleImpl(records, spec);
}

ComparisonGroup AssembleComparison(std::span<const SelectionRecord* const> records,
                                   const ComparisonSpec& spec) {
  return AssembleImpl(records, spec);
}

SrrResult ComputeSrr(const ExposureCounts& c) {
  if (c.exposures_female <= 0 || c.exposures_male <= 0) {
    throw std::invalid_argument("SRR requires positive exposures for both genders");
  }
  const double total_e = static_cast<double>(c.exposures_female + c.exposures_male);
  const auto total_s = c.selections_female + c.selections_male;
  SrrResult r;
  r.female.available_share = static_cast<double>(c.exposures_female) / total_e;
  r.male.available_share = static_cast<double>(c.exposures_male) / total_e;
  if (total_s > 0) {
    r.female.selected_share = static_cast<double>(c.selections_female) / total_s;
    r.male.selected_share = static_cast<double>(c.selections_male) / total_s;
    r.female.ratio = *r.female.selected_share / r.female.available_share;
    r.male.ratio = *r.male.selected_share / r.male.available_share;
  }
  return r;
}

SrrResult ComputeSrr(const ComparisonGroup& group) {
  SrrResult r = ComputeSrr(group.counts);
  std::vector<double> female, male;
  for (const auto& a : group.per_article) {
    const auto& c = a.counts;
    if (c.exposures_female <= 0 || c.exposures_male <= 0) continue;
    const auto per = ComputeSrr(c);
    if (per.female.ratio) female.push_back(*per.female.ratio);
    if (per.male.ratio) male.push_back(*per.male.ratio);
  }
  r.female.std_error = SampleStdError(female);
  r.male.std_error = SampleStdError(male);
  return r;
}

NsdResult ComputeNsd(std::int64_t selections_male, std::int64_t exposures_male,
                     std::int64_t selections_female, std::int64_t exposures_female) {
  if (exposures_male <= 0 || exposures_female <= 0) {
    throw std::invalid_argument("NSD requires positive exposures for both genders");
  }
  NsdResult r;
  r.male_rate = static_cast<double>(selections_male) / static_cast<double>(exposures_male);
  r.female_rate = static_cast<double>(selections_female) / static_cast<double>(exposures_female);
  const double denom = r.male_rate + r.female_rate;
  if (denom > 0.0) r.value = (r.male_rate - r.female_rate) / denom;
  return r;
}

NsdResult ComputeNsd(const ExposureCounts& c) {
  return ComputeNsd(c.selections_male, c.exposures_male, c.selections_female, c.exposures_female);
}

std::string_view StarsFor(double p) {
  if (p < 0.0001) return "****";
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "ns";
}

SignificanceResult TwoProportionTest(std::int64_t successes_a, std::int64_t trials_a,
                                     std::int64_t successes_b, std::int64_t trials_b) {
  if (trials_a <= 0 || trials_b <= 0) {
    throw std::invalid_argument("two-proportion test requires positive trial counts");
  }
  SignificanceResult r;
  const double na = static_cast<double>(trials_a);
  const double nb = static_cast<double>(trials_b);
  const double pooled = static_cast<double>(successes_a + successes_b) / (na + nb);
  if (pooled <= 0.0 || pooled >= 1.0) {
    r.degenerate = true;
    r.p_value = 1.0;
    r.stars = StarsFor(r.p_value);
    return r;
  }
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb));
  r.z = (static_cast<double>(successes_a) / na - static_cast<double>(successes_b) / nb) / se;
  r.p_value = std::min(1.0, std::erfc(std::fabs(r.z) / std::sqrt(2.0)));
  r.stars = StarsFor(r.p_value);
  return r;
}

std::optional<std::pair<double, double>> BootstrapCi(const ComparisonGroup& group, int resamples,
                                                     std::uint64_t seed) {
  const auto n = group.per_article.size();
  if (n < 2) throw ValidationError("bootstrap needs at least two articles");
  util::StableRng rng(seed, ComparisonLabel(group.spec.label));
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(std::max(resamples, 0)));
  for (int b = 0; b < resamples; ++b) {
    ExposureCounts sum;
    for (std::size_t i = 0; i < n; ++i) sum += group.per_article[rng.Bounded(n)].counts;
    if (sum.exposures_male <= 0 || sum.exposures_female <= 0) continue;
    if (auto v = ComputeNsd(sum).value) values.push_back(*v);
  }
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  return std::make_pair(Quantile(values, 0.025), Quantile(values, 0.975));
}

std::vector<AggregateRow> Aggregate(std::span<const SelectionRecord> records,
                                    const ArticleFieldFn& field_of,
                                    const AggregateOptions& options) {
  using SliceKey = std::tuple<std::string, std::string, std::string, std::string, std::string>;
  std::map<SliceKey, std::vector<const SelectionRecord*>> slices;
  std::unordered_map<std::string, FosGroup> field_cache;
  for (const auto& r : records) {
    const auto& c = r.condition;
    SliceKey key{c.model_id,
                 options.by_cell ? std::to_string(c.n_r) : std::string(kPooled),
                 options.by_cell ? std::to_string(c.n_min) : std::string(kPooled),
                 options.by_t ? std::to_string(c.t) : std::string(kPooled),
                 options.by_variant ? std::string(VariantName(c.variant)) : std::string(kPooled)};
    slices[key].push_back(&r);
    if (options.by_field && !field_cache.contains(r.article_id)) {
      field_cache.emplace(r.article_id, field_of(r.article_id));
    }
  }

  std::vector<AggregateRow> rows;
  for (const auto& [key, slice] : slices) {
    std::map<FosGroup, std::vector<const SelectionRecord*>> by_field;
    if (options.by_field) {
      for (const auto* r : slice) by_field[field_cache.at(r->article_id)].push_back(r);
    }
    for (Comparison cmp : kAllComparisons) {
      const auto spec = SpecFor(cmp);
      auto emit = [&](std::string field, const std::vector<const SelectionRecord*>& subset) {
        ComparisonGroup group;
        try {
          group = AssembleComparison(std::span<const SelectionRecord* const>(subset), spec);
        } catch (const ValidationError&) {
          return;  // comparison not covered by this slice
        }
        AggregateRow row;
        std::tie(row.model, row.n_r, row.n_min, row.t, row.variant) = key;
        row.comparison = cmp;
        row.field = std::move(field);
        row.counts = group.counts;
        row.nsd = ComputeNsd(group.counts);
        row.srr = ComputeSrr(group);
        row.significance =
            TwoProportionTest(group.counts.selections_male, group.counts.exposures_male,
                              group.counts.selections_female, group.counts.exposures_female);
        row.n_articles = group.n_articles();
        if (options.bootstrap_resamples > 0 && group.n_articles() >= 2) {
          const auto row_seed = util::Mix64(options.bootstrap_seed ^
                                            util::Fnv1a(row.model + "|" + row.n_r + "|" + row.n_min +
                                                        "|" + row.t + "|" + row.variant + "|" +
                                                        row.field));
          if (auto ci = BootstrapCi(group, options.bootstrap_resamples, row_seed)) {
            row.nsd.ci_low = ci->first;
            row.nsd.ci_high = ci->second;
          }
        }
        rows.push_back(std::move(row));
      };
      for (FosGroup g : kAllFosGroups) {
        if (auto it = by_field.find(g); it != by_field.end()) emit(std::string(FosLabel(g)), it->second);
      }
      emit(std::string(kAllFields), slice);
    }
  }
  return rows;
}

std::string AggregateCsv(std::span<const AggregateRow> rows) {
  std::ostringstream out;
  out << "model,comparison,field,n_r,n_min,t,variant,S_m,E_m,S_f,E_f,NSD,ci_low,ci_high,p,stars,"
         "n_articles\n";
  for (const auto& r : rows) {
    out << r.model << ',' << ComparisonLabel(r.comparison) << ',' << r.field << ',' << r.n_r << ','
        << r.n_min << ',' << r.t << ',' << r.variant << ',' << r.counts.selections_male << ','
        << r.counts.exposures_male << ',' << r.counts.selections_female << ','
        << r.counts.exposures_female << ',' << OptNum(r.nsd.value) << ',' << OptNum(r.nsd.ci_low)
        << ',' << OptNum(r.nsd.ci_high) << ',' << util::FormatDouble(r.significance.p_value) << ','
        << r.significance.stars << ',' << r.n_articles << '\n';
  }
  return out.str();
}

namespace {

json OptJson(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> OptFrom(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

json SrrJson(const GenderSrr& g) {
  return {{"available_share", g.available_share},
          {"selected_share", OptJson(g.selected_share)},
          {"ratio", OptJson(g.ratio)},
          {"std_error", OptJson(g.std_error)}};
}

GenderSrr SrrFrom(const json& v) {
  return {v.at("available_share").get<double>(), OptFrom(v.at("selected_share")),
          OptFrom(v.at("ratio")), OptFrom(v.at("std_error"))};
}

}  // namespace

std::string SerializeAggregateRows(std::span<const AggregateRow> rows) {
  std::string out;
  for (const auto& r : rows) {
    json doc = {{"model", r.model},
                {"comparison", ComparisonLabel(r.comparison)},
                {"field", r.field},
                {"n_r", r.n_r},
                {"n_min", r.n_min},
                {"t", r.t},
                {"variant", r.variant},
                {"S_m", r.counts.selections_male},
                {"E_m", r.counts.exposures_male},
                {"S_f", r.counts.selections_female},
                {"E_f", r.counts.exposures_female},
                {"nsd", OptJson(r.nsd.value)},
                {"male_rate", r.nsd.male_rate},
                {"female_rate", r.nsd.female_rate},
                {"ci_low", OptJson(r.nsd.ci_low)},
                {"ci_high", OptJson(r.nsd.ci_high)},
                {"srr_female", SrrJson(r.srr.female)},
                {"srr_male", SrrJson(r.srr.male)},
                {"p", r.significance.p_value},
                {"z", r.significance.z},
                {"stars", r.significance.stars},
                {"test", r.significance.test_name},
                {"degenerate", r.significance.degenerate},
                {"n_articles", r.n_articles}};
    out += doc.dump();
    out += '\n';
  }
  return out;
}

std::vector<AggregateRow> ParseAggregateRows(std::string_view text) {
  std::vector<AggregateRow> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    json d = json::parse(line, nullptr, false);
    if (d.is_discarded()) throw ValidationError("aggregate rows: malformed line");
    try {
      AggregateRow r;
      r.model = d.at("model").get<std::string>();
      r.comparison = ParseComparison(d.at("comparison").get<std::string>());
      r.field = d.at("field").get<std::string>();
      r.n_r = d.at("n_r").get<std::string>();
      r.n_min = d.at("n_min").get<std::string>();
      r.t = d.at("t").get<std::string>();
      r.variant = d.at("variant").get<std::string>();
      r.counts = {d.at("E_m").get<std::int64_t>(), d.at("E_f").get<std::int64_t>(),
                  d.at("S_m").get<std::int64_t>(), d.at("S_f").get<std::int64_t>()};
      r.nsd.value = OptFrom(d.at("nsd"));
      r.nsd.male_rate = d.at("male_rate").get<double>();
      r.nsd.female_rate = d.at("female_rate").get<double>();
      r.nsd.ci_low = OptFrom(d.at("ci_low"));
      r.nsd.ci_high = OptFrom(d.at("ci_high"));
      r.srr.female = SrrFrom(d.at("srr_female"));
      r.srr.male = SrrFrom(d.at("srr_male"));
      r.significance.p_value = d.at("p").get<double>();
      r.significance.z = d.at("z").get<double>();
      r.significance.stars = d.at("stars").get<std::string>();
      r.significance.test_name = d.at("test").get<std::string>();
      r.significance.degenerate = d.at("degenerate").get<bool>();
      r.n_articles = d.at("n_articles").get<int>();
      rows.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ValidationError(std::string("aggregate rows: ") + e.what());
    }
  }
  return rows;
}

}  // namespace citebias
