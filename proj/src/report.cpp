#include "citebias/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "citebias/util.hpp"
#include "json.hpp"

namespace citebias {
namespace {

using nlohmann::json;

constexpr int kLabelWidth = 14;
constexpr int kCellWidth = 10;

std::string Cell(const ReportRow* row) {
  if (row == nullptr) return "NA";
  std::string s = FormatNsd(row->nsd);
  switch (row->shade.direction) {
    case BiasDirection::kMale: s += " M" + std::to_string(row->shade.level); break;
    case BiasDirection::kFemale: s += " F" + std::to_string(row->shade.level); break;
    case BiasDirection::kNone: break;
  }
  return s;
}

std::vector<std::string> TableColumns() {
  std::vector<std::string> cols;
  for (FosGroup g : kAllFosGroups) cols.emplace_back(FosLabel(g));
  cols.emplace_back(kAllFields);
  return cols;
}

}  // namespace

Shade ShadeFor(std::optional<double> nsd, const ShadeConfig& config) {
  if (!nsd || config.edges.empty()) return {};
  const double a = std::fabs(*nsd);
  if (a <= config.edges.front()) return {};
  int level = 0;
  for (double e : config.edges) {
    if (a >= e) ++level;
  }
  return {*nsd > 0 ? BiasDirection::kMale : BiasDirection::kFemale, level};
}

std::string ShadeName(const Shade& s) {
  switch (s.direction) {
    case BiasDirection::kMale: return "male" + std::to_string(s.level);
    case BiasDirection::kFemale: return "female" + std::to_string(s.level);
    case BiasDirection::kNone: break;
  }
  return "none";
}

std::vector<ReportRow> ToReportRows(std::span<const AggregateRow> rows, const ShadeConfig& config) {
  std::vector<ReportRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    out.push_back({r.model, r.comparison, r.field, r.nsd.value, ShadeFor(r.nsd.value, config),
                   r.significance.stars, r.n_articles});
  }
  return out;
}

std::string FormatNsd(std::optional<double> v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", *v);
  std::string s(buf);
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  else if (s.rfind("-0.", 0) == 0) s.erase(1, 1);
  return s;
}

NsdTable RenderNsdTable(std::span<const ReportRow> rows) {
  const auto columns = TableColumns();
  std::vector<std::string> models;
  for (const auto& r : rows) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
  }
  auto find = [&](const std::string& model, Comparison c, const std::string& field) -> const ReportRow* {
    for (const auto& r : rows) {
      if (r.model == model && r.comparison == c && r.field == field) return &r;
    }
    return nullptr;
  };

  std::ostringstream text;
  std::ostringstream csv;
  csv << "model,comparison,field,nsd,shade,stars,n_articles\n";
  const std::size_t width = kLabelWidth + columns.size() * kCellWidth;
  const std::string rule(width, '-');

  text << std::left << std::setw(kLabelWidth) << "Comparisons";
  for (const auto& c : columns) text << std::right << std::setw(kCellWidth) << c;
  text << "\n";
  for (const auto& model : models) {
    text << rule << "\n" << model << "\n";
    for (Comparison cmp : {Comparison::kFMinMMin, Comparison::kFMajMMaj, Comparison::kFMajMMin,
                           Comparison::kFMinMMaj}) {
      text << std::left << std::setw(kLabelWidth) << ComparisonLabel(cmp);
      for (const auto& field : columns) {
        const ReportRow* row = find(model, cmp, field);
        text << std::right << std::setw(kCellWidth) << Cell(row);
        csv << model << ',' << ComparisonLabel(cmp) << ',' << field << ','
            << (row ? FormatNsd(row->nsd) : "NA") << ',' << (row ? ShadeName(row->shade) : "none")
            << ',' << (row ? row->stars : "") << ',' << (row ? row->n_articles : 0) << "\n";
      }
      text << "\n";
    }
  }
  text << rule << "\n" << std::left << std::setw(kLabelWidth) << "Article Count";
  for (const auto& field : columns) {
    int count = 0;
    for (const auto& r : rows) {
      if (r.field == field) count = std::max(count, r.n_articles);
    }
    text << std::right << std::setw(kCellWidth) << count;
  }
  text << "\n";
  return {text.str(), csv.str()};
}

std::string ExportSrrPlotData(std::span<const AggregateRow> rows) {
  std::ostringstream out;
  out << "comparison,model,n_min,n_r,t,variant,gender,srr,stderr,stars,n_articles\n";
  for (const auto& r : rows) {
    if (r.field != kAllFields) continue;
    for (Gender g : {Gender::kFemale, Gender::kMale}) {
      const auto& s = g == Gender::kFemale ? r.srr.female : r.srr.male;
      if (!s.ratio) continue;
      out << ComparisonLabel(r.comparison) << ',' << r.model << ',' << r.n_min << ',' << r.n_r << ','
          << r.t << ',' << r.variant << ',' << GenderName(g) << ','
          << util::FormatDouble(*s.ratio) << ','
          << (s.std_error ? util::FormatDouble(*s.std_error) : "") << ',' << r.significance.stars
          << ',' << r.n_articles << "\n";
    }
  }
  return out.str();
}

std::string WriteManifest(const RunManifest& m) {
  json per_model = json::object();
  for (const auto& [id, c] : m.per_model) {
    per_model[id] = {{"requests", c.requests},
                     {"cache_hits", c.cache_hits},
                     {"retries", c.retries},
                     {"exclusions", c.exclusions}};
  }
  json excl = json::array();
  for (const auto& e : m.exclusions) {
    excl.push_back({{"article_id", e.article_id},
                    {"condition", e.condition},
                    {"subgroup_index", e.subgroup_index},
                    {"reason", e.reason}});
  }
  json config = json::parse(m.config_json, nullptr, false);
  if (config.is_discarded()) config = m.config_json;
  json doc = {{"config", std::move(config)},
              {"corpus_digest", m.corpus_digest},
              {"seeds", m.seeds},
              {"per_model", std::move(per_model)},
              {"planned_subgroups", m.planned_subgroups},
              {"completed_subgroups", m.completed_subgroups},
              {"exclusions", std::move(excl)},
              {"timestamps", m.timestamps}};
  return doc.dump(2) + "\n";
}

RunManifest ParseManifest(std::string_view text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ValidationError("manifest: malformed");
  try {
    RunManifest m;
    m.config_json = doc.at("config").is_string() ? doc.at("config").get<std::string>()
                                                 : doc.at("config").dump();
    m.corpus_digest = doc.at("corpus_digest").get<std::string>();
    m.seeds = doc.at("seeds").get<std::map<std::string, std::uint64_t>>();
    for (const auto& [id, c] : doc.at("per_model").items()) {
      m.per_model[id] = {c.at("requests").get<std::int64_t>(), c.at("cache_hits").get<std::int64_t>(),
                         c.at("retries").get<std::int64_t>(), c.at("exclusions").get<std::int64_t>()};
    }
    m.planned_subgroups = doc.at("planned_subgroups").get<std::int64_t>();
    m.completed_subgroups = doc.at("completed_subgroups").get<std::int64_t>();
    for (const auto& e : doc.at("exclusions")) {
      m.exclusions.push_back({e.at("article_id").get<std::string>(),
                              e.at("condition").get<std::string>(),
                              e.at("subgroup_index").get<int>(), e.at("reason").get<std::string>()});
    }
    m.timestamps = doc.at("timestamps").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
}

}  // namespace citebias
