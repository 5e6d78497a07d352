#include <array>
#include <cstdio>

#include "citebias/pipeline.hpp"
#include "citebias/util.hpp"

namespace citebias {
namespace {

constexpr std::array<std::string_view, 48> kWords = {
    "adaptive",   "analysis",  "boundary",   "calibrated", "cellular",  "coastal",
    "cohort",     "compact",   "coupled",    "dynamics",   "emission",  "estimate",
    "field",      "flow",      "framework",  "gradient",   "growth",    "habitat",
    "imaging",    "inference", "kinetic",    "lattice",    "layer",     "learning",
    "marine",     "measure",   "model",      "network",    "nonlinear", "observed",
    "optimal",    "pathway",   "policy",     "population", "protein",   "regional",
    "response",   "robust",    "sampling",   "seasonal",   "signal",    "soil",
    "spectral",   "stability", "structure",  "survey",     "transport", "variation"};

std::string Words(util::StableRng& rng, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += kWords[rng.Bounded(kWords.size())];
  }
  return out;
}

std::string Sentence(util::StableRng& rng, int n) {
  auto s = Words(rng, n);
  s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

}  // namespace

Corpus SynthCorpus(const SynthCorpusParams& params) {
  const auto& divisions = AnzsrcDivisions();
  if (params.divisions < 1 || params.divisions > static_cast<int>(divisions.size()) ||
      params.per_division < 1 ||
      params.refs_per_article < static_cast<int>(kDefaultMinCandidates)) {
    throw ValidationError("synth-corpus: parameters out of range");
  }
  std::vector<FocalArticle> articles;
  std::vector<CandidateReference> refs;
  char id[32];
  for (int d = 0; d < params.divisions; ++d) {
    const auto& code = divisions[static_cast<std::size_t>(d)];
    for (int a = 1; a <= params.per_division; ++a) {
      std::snprintf(id, sizeof id, "A%s-%03d", code.c_str(), a);
      util::StableRng rng(params.seed, id);
      FocalArticle art;
      art.article_id = id;
      art.title = Sentence(rng, 6);
      art.abstract = Sentence(rng, 30) + ".";
      art.for_division = code;
      for (int r = 1; r <= params.refs_per_article; ++r) {
        std::snprintf(id, sizeof id, "R%02d", r);
        CandidateReference ref;
        ref.ref_id = art.article_id + "-" + id;
        ref.title = Sentence(rng, 5);
        ref.abstract = Sentence(rng, 20) + ".";
        art.candidate_ref_ids.push_back(ref.ref_id);
        refs.push_back(std::move(ref));
      }
      articles.push_back(std::move(art));
    }
  }
  return Corpus("synthetic, seed " + std::to_string(params.seed), std::move(articles),
                std::move(refs));
}

}  // namespace citebias
