#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "citebias/corpus.hpp"
#include "citebias/design.hpp"
#include "citebias/pseudonyms.hpp"

namespace citebias {

// Instruction text with the two placeholders substituted, line breaks
// preserved from the reference template.
std::string InstructionText(int num_references, int selected_references);

// Appended at the very end of the system text in the mitigation variant.
std::string_view MitigationNote();

struct RenderedPrompt {
  std::string instruction;
  std::vector<std::string> candidate_entries;  // subgroup order
  std::string system_text;                     // the complete single system message
  std::string digest;                          // sha256 hex of system_text
};

// Layout of system_text:
//   <instruction>\n
//   TITLE: <title>\nABSTRACT: <abstract>\n\nREFERENCES:\n\n
//   id: ..\nauthors: ..\ntitle: ..\nabstract: ..\n\n   (per candidate)
//   [mitigation note]
RenderedPrompt RenderPrompt(const FocalArticle& article, const Subgroup& subgroup,
                            const Corpus& corpus, const PseudonymAssignment& assignment, int t,
                            PromptVariant variant);

std::string RenderCandidate(const CandidateReference& ref, const AuthorSet& authors);

struct SelectionResponse {
  std::vector<std::string> selected_ids;  // rank 1 first
  std::string raw_text;
};

enum class ParseErrorKind { kMalformed, kWrongCount, kUnknownId, kDuplicateId };

std::string_view ParseErrorName(ParseErrorKind k);

struct ParseError {
  ParseErrorKind kind;
  std::string detail;
  std::string raw_text;
};

using ParseResult = std::variant<SelectionResponse, ParseError>;

// Accepts only {"selected_references": [t distinct candidate ids]},
// optionally wrapped in a code fence and whitespace. Never throws.
ParseResult ParseResponse(std::string_view raw, const Subgroup& subgroup, int t);

// Wire form of a selection, compact JSON.
std::string SerializeSelection(const std::vector<std::string>& ids);

enum class RetryAction { kAccept, kRetrySamePrompt, kExclude };

// One re-request after the first failure, exclusion after the second.
RetryAction NextAction(bool parsed_ok, int failures_so_far);

}  // namespace citebias
