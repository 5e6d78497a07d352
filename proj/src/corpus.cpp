#include "citebias/corpus.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "citebias/util.hpp"
#include "json.hpp"

namespace citebias {
namespace {

using nlohmann::json;

std::string RecordName(std::string_view kind, std::size_t index, const json& record,
                       std::string_view id_key) {
  std::string name = std::string(kind) + "[" + std::to_string(index) + "]";
  if (record.is_object()) {
    auto it = record.find(id_key);
    if (it != record.end() && it->is_string()) {
      name += " (" + std::string(id_key) + "=" + it->get<std::string>() + ")";
    }
  }
  return name;
}

std::string RequireText(const json& record, std::string_view key, const std::string& where) {
  auto it = record.find(key);
  if (it == record.end()) {
    throw ValidationError(where + ": missing field '" + std::string(key) + "'");
  }
  if (!it->is_string()) {
    throw ValidationError(where + ": field '" + std::string(key) + "' must be a string");
  }
  auto value = it->get<std::string>();
  if (value.empty()) {
    throw ValidationError(where + ": field '" + std::string(key) + "' is empty");
  }
  return value;
}

}  // namespace

std::string_view FosLabel(FosGroup group) {
  switch (group) {
    case FosGroup::kNatural: return "Nat.";
    case FosGroup::kEngineering: return "Eng.";
    case FosGroup::kMedical: return "Med.";
    case FosGroup::kAgricultural: return "Agr.";
    case FosGroup::kSocial: return "Soc.";
    case FosGroup::kHumanities: return "Hum.";
  }
  return "?";
}

FosGroup ParseFosLabel(std::string_view label) {
  for (FosGroup g : kAllFosGroups) {
    if (FosLabel(g) == label) return g;
  }
  throw ValidationError("unknown field group label '" + std::string(label) + "'");
}

const std::vector<std::string>& AnzsrcDivisions() {
  static const std::vector<std::string> kCodes = {
      "30", "31", "32", "33", "34", "35", "36", "37", "38", "39", "40",
      "41", "42", "43", "44", "46", "47", "48", "49", "50", "51", "52"};
  return kCodes;
}

FieldMapping::FieldMapping(std::map<std::string, FosGroup> entries)
    : entries_(std::move(entries)) {
  for (const auto& code : AnzsrcDivisions()) {
    if (!entries_.contains(code)) {
      throw ValidationError("field mapping: division " + code + " is not mapped");
    }
  }
  if (entries_.size() != AnzsrcDivisions().size()) {
    for (const auto& [code, group] : entries_) {
      if (std::find(AnzsrcDivisions().begin(), AnzsrcDivisions().end(), code) ==
          AnzsrcDivisions().end()) {
        throw ValidationError("field mapping: unknown division code " + code);
      }
    }
  }
}

FieldMapping ParseFieldMapping(std::string_view json_text) {
  json doc = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ValidationError("field mapping: document must be an object of code -> label");
  }
  std::map<std::string, FosGroup> entries;
  for (const auto& [code, label] : doc.items()) {
    if (!label.is_string()) {
      throw ValidationError("field mapping: label for " + code + " must be a string");
    }
    entries.emplace(code, ParseFosLabel(label.get<std::string>()));
  }
  return FieldMapping(std::move(entries));
}

FieldMapping LoadFieldMapping(const std::filesystem::path& path) {
  return ParseFieldMapping(util::ReadFile(path));
}

FosGroup MapField(std::string_view for_division, const FieldMapping& mapping) {
  auto it = mapping.entries().find(std::string(for_division));
  if (it == mapping.entries().end()) {
    throw ValidationError("unknown division code " + std::string(for_division));
  }
  return it->second;
}

Corpus::Corpus(std::string provenance, std::vector<FocalArticle> articles,
               std::vector<CandidateReference> references)
    : provenance_(std::move(provenance)),
      articles_(std::move(articles)),
      references_(std::move(references)) {
  for (std::size_t i = 0; i < references_.size(); ++i) {
    const auto& ref = references_[i];
    if (ref.ref_id.empty() || ref.title.empty() || ref.abstract.empty()) {
      throw ValidationError("references[" + std::to_string(i) + "]: empty field");
    }
    if (!ref_index_.emplace(ref.ref_id, i).second) {
      throw ValidationError("duplicate ref_id " + ref.ref_id);
    }
  }
  for (std::size_t i = 0; i < articles_.size(); ++i) {
    const auto& art = articles_[i];
    if (!article_index_.emplace(art.article_id, i).second) {
      throw ValidationError("duplicate article_id " + art.article_id);
    }
    std::unordered_set<std::string_view> seen;
    for (const auto& id : art.candidate_ref_ids) {
      if (!seen.insert(id).second) {
        throw ValidationError("article " + art.article_id + ": duplicate candidate ref_id " + id);
      }
      if (!ref_index_.contains(id)) {
        throw ValidationError("article " + art.article_id + ": unknown ref_id " + id);
      }
    }
  }
}

const CandidateReference& Corpus::Reference(std::string_view ref_id) const {
  auto it = ref_index_.find(std::string(ref_id));
  if (it == ref_index_.end()) {
    throw ValidationError("unknown ref_id " + std::string(ref_id));
  }
  return references_[it->second];
}

const FocalArticle& Corpus::Article(std::string_view article_id) const {
  auto it = article_index_.find(std::string(article_id));
  if (it == article_index_.end()) {
    throw ValidationError("unknown article_id " + std::string(article_id));
  }
  return articles_[it->second];
}

bool Corpus::HasReference(std::string_view ref_id) const {
  return ref_index_.contains(std::string(ref_id));
}

Corpus ParseCorpus(std::string_view json_text) {
  json doc = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw ValidationError("corpus: malformed document");
  if (!doc.is_object()) throw ValidationError("corpus: top level must be an object");

  std::string provenance;
  if (auto it = doc.find("provenance"); it != doc.end()) {
    if (!it->is_string()) throw ValidationError("corpus: field 'provenance' must be a string");
    provenance = it->get<std::string>();
  } else {
    throw ValidationError("corpus: missing field 'provenance'");
  }
  for (const char* key : {"articles", "references"}) {
    if (!doc.contains(key) || !doc[key].is_array()) {
      throw ValidationError(std::string("corpus: field '") + key + "' must be an array");
    }
  }

  std::vector<CandidateReference> refs;
  refs.reserve(doc["references"].size());
  std::size_t i = 0;
  for (const auto& rec : doc["references"]) {
    const auto where = RecordName("references", i++, rec, "ref_id");
    if (!rec.is_object()) throw ValidationError(where + ": must be an object");
    refs.push_back({RequireText(rec, "ref_id", where), RequireText(rec, "title", where),
                    RequireText(rec, "abstract", where)});
  }

  std::vector<FocalArticle> articles;
  articles.reserve(doc["articles"].size());
  i = 0;
  for (const auto& rec : doc["articles"]) {
    const auto where = RecordName("articles", i++, rec, "article_id");
    if (!rec.is_object()) throw ValidationError(where + ": must be an object");
    FocalArticle art;
    art.article_id = RequireText(rec, "article_id", where);
    art.title = RequireText(rec, "title", where);
    art.abstract = RequireText(rec, "abstract", where);
    art.for_division = RequireText(rec, "for_division", where);
    auto it = rec.find("candidate_ref_ids");
    if (it == rec.end() || !it->is_array()) {
      throw ValidationError(where + ": field 'candidate_ref_ids' must be an array");
    }
    for (const auto& id : *it) {
      if (!id.is_string() || id.get<std::string>().empty()) {
        throw ValidationError(where + ": field 'candidate_ref_ids' must hold nonempty strings");
      }
      art.candidate_ref_ids.push_back(id.get<std::string>());
    }
    articles.push_back(std::move(art));
  }
  return Corpus(std::move(provenance), std::move(articles), std::move(refs));
}

Corpus LoadCorpus(const std::filesystem::path& path) {
  return ParseCorpus(util::ReadFile(path));
}

std::string SerializeCorpus(const Corpus& corpus) {
  json articles = json::array();
  for (const auto& a : corpus.articles()) {
    articles.push_back({{"article_id", a.article_id},
                        {"title", a.title},
                        {"abstract", a.abstract},
                        {"for_division", a.for_division},
                        {"candidate_ref_ids", a.candidate_ref_ids}});
  }
  json refs = json::array();
  for (const auto& r : corpus.references()) {
    refs.push_back({{"ref_id", r.ref_id}, {"title", r.title}, {"abstract", r.abstract}});
  }
  json doc = {{"provenance", corpus.provenance()}, {"articles", std::move(articles)},
              {"references", std::move(refs)}};
  return doc.dump(1) + "\n";
}

void SaveCorpus(const Corpus& corpus, const std::filesystem::path& path) {
  util::WriteFileAtomic(path, SerializeCorpus(corpus));
}

std::vector<std::string> ValidateFocal(const FocalArticle& article, std::size_t min_candidates) {
  std::vector<std::string> out;
  if (article.title.empty()) out.push_back("empty title");
  if (article.abstract.empty()) out.push_back("empty abstract");
  if (article.candidate_ref_ids.size() < min_candidates) {
    out.push_back("insufficient candidates: " + std::to_string(article.candidate_ref_ids.size()) +
                  " < " + std::to_string(min_candidates));
  }
  std::set<std::string_view> seen;
  for (const auto& id : article.candidate_ref_ids) {
    if (!seen.insert(id).second) out.push_back("duplicate candidate: " + id);
  }
  return out;
}

}  // namespace citebias
