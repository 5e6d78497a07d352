#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "citebias/util.hpp"

namespace citebias {

struct CandidateReference {
  std::string ref_id;
  std::string title;
  std::string abstract;

  bool operator==(const CandidateReference&) const = default;
};

struct FocalArticle {
  std::string article_id;
  std::string title;
  std::string abstract;
  std::string for_division;  // ANZSRC 2020 division code, e.g. "31"
  // Canonical presentation order. Never re-sorted downstream.
  std::vector<std::string> candidate_ref_ids;

  bool operator==(const FocalArticle&) const = default;
};

// OECD Fields of Science and Technology, in NSD table column order.
enum class FosGroup { kNatural, kEngineering, kMedical, kAgricultural, kSocial, kHumanities };

inline constexpr std::array<FosGroup, 6> kAllFosGroups = {
    FosGroup::kNatural, FosGroup::kEngineering, FosGroup::kMedical,
    FosGroup::kAgricultural, FosGroup::kSocial, FosGroup::kHumanities};

// "Nat.", "Eng.", "Med.", "Agr.", "Soc.", "Hum."
std::string_view FosLabel(FosGroup group);
FosGroup ParseFosLabel(std::string_view label);

// The 22 ANZSRC 2020 divisions indexed by the harvest (30-52 minus 45).
const std::vector<std::string>& AnzsrcDivisions();

class FieldMapping {
 public:
  FieldMapping() = default;
  // Throws ValidationError unless the map is total over AnzsrcDivisions()
  // and contains no other codes.
  explicit FieldMapping(std::map<std::string, FosGroup> entries);

  const std::map<std::string, FosGroup>& entries() const { return entries_; }

 private:
  std::map<std::string, FosGroup> entries_;
};

FieldMapping LoadFieldMapping(const std::filesystem::path& path);
FieldMapping ParseFieldMapping(std::string_view json_text);

// Throws ValidationError("unknown division code ...") when absent.
FosGroup MapField(std::string_view for_division, const FieldMapping& mapping);

class Corpus {
 public:
  Corpus() = default;
  // Validates identifier uniqueness and referential integrity.
  Corpus(std::string provenance, std::vector<FocalArticle> articles,
         std::vector<CandidateReference> references);

  const std::string& provenance() const { return provenance_; }
  const std::vector<FocalArticle>& articles() const { return articles_; }
  const std::vector<CandidateReference>& references() const { return references_; }

  const CandidateReference& Reference(std::string_view ref_id) const;
  const FocalArticle& Article(std::string_view article_id) const;
  bool HasReference(std::string_view ref_id) const;

 private:
  std::string provenance_;
  std::vector<FocalArticle> articles_;
  std::vector<CandidateReference> references_;
  std::unordered_map<std::string, std::size_t> ref_index_;
  std::unordered_map<std::string, std::size_t> article_index_;
};

inline constexpr std::size_t kDefaultMinCandidates = 48;

Corpus LoadCorpus(const std::filesystem::path& path);
Corpus ParseCorpus(std::string_view json_text);
std::string SerializeCorpus(const Corpus& corpus);
void SaveCorpus(const Corpus& corpus, const std::filesystem::path& path);

// Violations are data: an empty result means the article is usable.
std::vector<std::string> ValidateFocal(const FocalArticle& article,
                                       std::size_t min_candidates = kDefaultMinCandidates);

}  // namespace citebias
