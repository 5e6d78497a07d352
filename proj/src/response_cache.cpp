#include <spdlog/spdlog.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "citebias/selectors.hpp"
#include "citebias/util.hpp"

namespace citebias {
namespace {

void AppendField(std::string& out, std::string_view field) {
  out += std::to_string(field.size());
  out += ':';
  out += field;
}

}  // namespace

std::string CacheKey(std::string_view model_id, std::string_view prompt_digest,
                     PromptVariant variant, double temperature) {
  std::string material;
  AppendField(material, model_id);
  AppendField(material, prompt_digest);
  AppendField(material, VariantName(variant));
  AppendField(material, util::FormatDouble(temperature));
  return util::Sha256Hex(material);
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::optional<std::string> ResponseCache::Get(const std::string& key) const {
  std::ifstream in(dir_ / key, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool ResponseCache::Contains(const std::string& key) const {
  return std::filesystem::exists(dir_ / key);
}

bool ResponseCache::Put(const std::string& key, std::string_view raw_text) {
  std::lock_guard lock(write_mu_);
  try {
    util::WriteFileAtomic(dir_ / key, raw_text);
    return true;
  } catch (const std::exception& e) {
    spdlog::error("cache write failed for {}: {}", key, e.what());
    return false;
  }
}

std::string CachingSelector::KeyFor(const SelectionRequest& request) const {
  return CacheKey(model_id_, request.prompt.digest, request.variant, temperature_);
}

std::string CachingSelector::Select(const SelectionRequest& request) {
  bool ignored = false;
  return Select(request, ignored);
}

std::string CachingSelector::Select(const SelectionRequest& request, bool& served_from_cache) {
  const auto key = KeyFor(request);
  if (auto hit = cache_.Get(key)) {
    hits_++;
    served_from_cache = true;
    return *std::move(hit);
  }
  served_from_cache = false;
  return SelectFresh(request);
}

std::string CachingSelector::SelectFresh(const SelectionRequest& request) {
  misses_++;
  auto raw = inner_.Select(request);
  cache_.Put(KeyFor(request), raw);
  return raw;
}

}  // namespace citebias
