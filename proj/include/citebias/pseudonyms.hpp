#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "citebias/corpus.hpp"

namespace citebias {

enum class Gender { kMale, kFemale };

std::string_view GenderName(Gender g);  // "male" / "female"
Gender ParseGender(std::string_view name);
constexpr Gender Opposite(Gender g) { return g == Gender::kMale ? Gender::kFemale : Gender::kMale; }

struct NamePool {
  std::vector<std::string> male_first;
  std::vector<std::string> female_first;
  std::vector<std::string> male_surnames;
  std::vector<std::string> female_surnames;
};

// Throws ValidationError on an empty list, a duplicate within a list, or a
// first name shared between the two genders.
void ValidateNamePool(const NamePool& pool);
NamePool ParseNamePool(std::string_view json_text);
NamePool LoadNamePool(const std::filesystem::path& path);

inline constexpr int kMinAuthors = 2;
inline constexpr int kMaxAuthors = 5;

struct AuthorSet {
  Gender gender = Gender::kMale;
  std::vector<std::string> authors;  // "First Last", 2..5 distinct entries

  bool operator==(const AuthorSet&) const = default;
};

struct AuthorPair {
  AuthorSet male;
  AuthorSet female;

  const AuthorSet& For(Gender g) const { return g == Gender::kMale ? male : female; }
  bool operator==(const AuthorPair&) const = default;
};

struct PseudonymAssignment {
  std::map<std::string, AuthorPair> per_reference;
  std::uint64_t seed = 0;

  // Throws ValidationError when the reference was never assigned.
  const AuthorSet& Lookup(std::string_view ref_id, Gender g) const;
  bool operator==(const PseudonymAssignment&) const = default;
};

// Pure function of (reference ids, pool, seed). Each reference gets an
// author count drawn uniformly from {2..5} and that many names per gender.
PseudonymAssignment AssignAuthorSets(const Corpus& corpus, const NamePool& pool,
                                     std::uint64_t seed);
AuthorPair AssignAuthorPair(std::string_view ref_id, const NamePool& pool, std::uint64_t seed);

// "First Last, First Last, ..." in set order.
std::string AuthorLine(const AuthorSet& set);

std::string SerializeAssignment(const PseudonymAssignment& assignment);
PseudonymAssignment ParseAssignment(std::string_view json_text);

}  // namespace citebias
