#include "citebias/pseudonyms.hpp"

#include <set>
#include <unordered_set>

#include "citebias/util.hpp"
#include "json.hpp"

namespace citebias {
namespace {

using nlohmann::json;

void CheckList(const std::vector<std::string>& names, std::string_view key) {
  if (names.empty()) {
    throw ValidationError("name pool: list '" + std::string(key) + "' is empty");
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& n : names) {
    if (n.empty()) {
      throw ValidationError("name pool: list '" + std::string(key) + "' has an empty name");
    }
    if (!seen.insert(n).second) {
      throw ValidationError("name pool: duplicate name '" + n + "' in '" + std::string(key) + "'");
    }
  }
}

std::vector<std::string> ReadList(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end() || !it->is_array()) {
    throw ValidationError(std::string("name pool: field '") + key + "' must be an array");
  }
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) {
      throw ValidationError(std::string("name pool: field '") + key + "' must hold strings");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

AuthorSet DrawSet(Gender g, int count, const std::vector<std::string>& first,
                  const std::vector<std::string>& surnames, util::StableRng& rng) {
  // Partial Fisher-Yates over first-name indices: distinct first names
  // make every full name in the set distinct.
  std::vector<std::size_t> idx(first.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  AuthorSet set{g, {}};
  for (int k = 0; k < count; ++k) {
    const std::size_t j = k + rng.Bounded(idx.size() - k);
    std::swap(idx[k], idx[j]);
    const auto& surname = surnames[rng.Bounded(surnames.size())];
    set.authors.push_back(first[idx[k]] + " " + surname);
  }
  return set;
}

json SetToJson(const AuthorSet& s) { return s.authors; }

}  // namespace

std::string_view GenderName(Gender g) { return g == Gender::kMale ? "male" : "female"; }

Gender ParseGender(std::string_view name) {
  if (name == "male") return Gender::kMale;
  if (name == "female") return Gender::kFemale;
  throw ValidationError("unknown gender '" + std::string(name) + "'");
}

void ValidateNamePool(const NamePool& pool) {
  CheckList(pool.male_first, "male_first");
  CheckList(pool.female_first, "female_first");
  CheckList(pool.male_surnames, "male_surnames");
  CheckList(pool.female_surnames, "female_surnames");
  std::set<std::string_view> male(pool.male_first.begin(), pool.male_first.end());
  for (const auto& n : pool.female_first) {
    if (male.contains(n)) {
      throw ValidationError("name pool: first name '" + n + "' appears in both genders");
    }
  }
}

NamePool ParseNamePool(std::string_view json_text) {
  json doc = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ValidationError("name pool: document must be an object");
  }
  NamePool pool{ReadList(doc, "male_first"), ReadList(doc, "female_first"),
                ReadList(doc, "male_surnames"), ReadList(doc, "female_surnames")};
  ValidateNamePool(pool);
  return pool;
}

NamePool LoadNamePool(const std::filesystem::path& path) {
  return ParseNamePool(util::ReadFile(path));
}

const AuthorSet& PseudonymAssignment::Lookup(std::string_view ref_id, Gender g) const {
  auto it = per_reference.find(std::string(ref_id));
  if (it == per_reference.end()) {
    throw ValidationError("no author set for ref_id " + std::string(ref_id));
  }
  return it->second.For(g);
}

AuthorPair AssignAuthorPair(std::string_view ref_id, const NamePool& pool, std::uint64_t seed) {
  util::StableRng rng(seed, ref_id);
  const int count = kMinAuthors + static_cast<int>(rng.Bounded(kMaxAuthors - kMinAuthors + 1));
  const auto needed = static_cast<std::size_t>(count);
  if (pool.male_first.size() < needed || pool.female_first.size() < needed) {
    throw ValidationError("name pool too small to draw " + std::to_string(count) +
                          " distinct names for " + std::string(ref_id));
  }
  AuthorPair pair;
  pair.male = DrawSet(Gender::kMale, count, pool.male_first, pool.male_surnames, rng);
  pair.female = DrawSet(Gender::kFemale, count, pool.female_first, pool.female_surnames, rng);
  return pair;
}

PseudonymAssignment AssignAuthorSets(const Corpus& corpus, const NamePool& pool,
                                     std::uint64_t seed) {
  ValidateNamePool(pool);
  PseudonymAssignment out;
  out.seed = seed;
  for (const auto& ref : corpus.references()) {
    out.per_reference.emplace(ref.ref_id, AssignAuthorPair(ref.ref_id, pool, seed));
  }
  return out;
}

std::string AuthorLine(const AuthorSet& set) {
  std::string line;
  for (std::size_t i = 0; i < set.authors.size(); ++i) {
    if (i) line += ", ";
    line += set.authors[i];
  }
  return line;
}

std::string SerializeAssignment(const PseudonymAssignment& assignment) {
  json refs = json::object();
  for (const auto& [id, pair] : assignment.per_reference) {
    refs[id] = {{"male", SetToJson(pair.male)}, {"female", SetToJson(pair.female)}};
  }
  json doc = {{"seed", assignment.seed}, {"per_reference", std::move(refs)}};
  return doc.dump() + "\n";
}

PseudonymAssignment ParseAssignment(std::string_view json_text) {
  json doc = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("per_reference")) {
    throw ValidationError("assignment: malformed document");
  }
  PseudonymAssignment out;
  out.seed = doc.value("seed", std::uint64_t{0});
  for (const auto& [id, pair] : doc["per_reference"].items()) {
    AuthorPair p;
    p.male = {Gender::kMale, pair.at("male").get<std::vector<std::string>>()};
    p.female = {Gender::kFemale, pair.at("female").get<std::vector<std::string>>()};
    if (p.male.authors.size() != p.female.authors.size()) {
      throw ValidationError("assignment: unequal author counts for " + id);
    }
    out.per_reference.emplace(id, std::move(p));
  }
  return out;
}

}  // namespace citebias
