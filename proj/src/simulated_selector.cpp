#include <algorithm>
#include <numeric>

#include "citebias/selectors.hpp"
#include "citebias/util.hpp"

namespace citebias {

double RelevanceScore(std::uint64_t relevance_seed, std::string_view ref_id) {
  util::StableRng rng(relevance_seed, std::string("relevance:") + std::string(ref_id));
  return rng.Normal();
}

double PresentationNoise(std::uint64_t relevance_seed, std::string_view ref_id,
                         int subgroup_index) {
  const auto stream = util::Mix64(relevance_seed) + static_cast<std::uint64_t>(subgroup_index);
  util::StableRng rng(stream, std::string("noise:") + std::string(ref_id));
  return rng.Normal();
}

SelectionResponse SimulateSelect(const SimulatedSelectorParams& params, const Subgroup& subgroup,
                                 const FocalArticle& /*article*/, int t) {
  const auto& entries = subgroup.entries;
  const auto n_male = std::count_if(entries.begin(), entries.end(),
                                    [](const Presentation& p) { return p.gender == Gender::kMale; });
  const auto n_female = static_cast<std::ptrdiff_t>(entries.size()) - n_male;
  std::optional<Gender> majority;
  if (n_male > n_female) majority = Gender::kMale;
  if (n_female > n_male) majority = Gender::kFemale;

  std::vector<double> score(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& p = entries[i];
    double s = RelevanceScore(params.relevance_seed, p.ref_id);
    if (p.gender == Gender::kMale) s += params.beta_male;
    if (majority && p.gender == *majority) s += params.gamma_majority;
    if (params.noise_sigma != 0.0) {
      s += params.noise_sigma * PresentationNoise(params.relevance_seed, p.ref_id, subgroup.index);
    }
    score[i] = s;
  }
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(std::max(t, 0)), order.size());
  SelectionResponse out;
  for (std::size_t k = 0; k < take; ++k) out.selected_ids.push_back(entries[order[k]].ref_id);
  out.raw_text = SerializeSelection(out.selected_ids);
  return out;
}

std::string SimulatedSelector::Select(const SelectionRequest& request) {
  return SimulateSelect(params_, request.subgroup, request.article, request.t).raw_text;
}

}  // namespace citebias
