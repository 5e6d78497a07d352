#include <set>

#include "citebias/pipeline.hpp"
#include "citebias/util.hpp"
#include "json.hpp"

namespace citebias {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path Resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

template <typename T>
T Get(const json& doc, const char* key, const T& fallback) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("config: field '") + key + "' has the wrong type");
  }
}

std::optional<std::uint64_t> OptSeed(const json& seeds, const char* key) {
  auto it = seeds.find(key);
  if (it == seeds.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_unsigned() && !it->is_number_integer()) {
    throw ValidationError(std::string("config: seed '") + key + "' must be an integer");
  }
  return it->get<std::uint64_t>();
}

SelectorConfig ParseModel(const json& m, const fs::path& base) {
  if (!m.is_object()) throw ValidationError("config: each model must be an object");
  SelectorConfig c;
  c.model_id = Get<std::string>(m, "id", "");
  const auto kind = Get<std::string>(m, "kind", "simulated");
  if (kind == "simulated") {
    c.kind = SelectorKind::kSimulated;
  } else if (kind == "remote") {
    c.kind = SelectorKind::kRemote;
  } else {
    throw ValidationError("config: model '" + c.model_id + "' has unknown kind '" + kind + "'");
  }
  c.temperature = Get<double>(m, "temperature", 0.0);
  c.endpoint = Get<std::string>(m, "endpoint", "");
  c.api_key_env = Get<std::string>(m, "api_key_env", "");
  c.timeout_seconds = Get<int>(m, "timeout_seconds", 120);
  c.max_in_flight = Get<int>(m, "max_in_flight", 4);
  if (auto it = m.find("retry"); it != m.end()) {
    c.retry.max_attempts = Get<int>(*it, "max_attempts", c.retry.max_attempts);
    c.retry.backoff_ms = Get<std::vector<int>>(*it, "backoff_ms", c.retry.backoff_ms);
  }
  c.cache_dir = Resolve(base, Get<std::string>(m, "cache_dir", ""));
  if (auto it = m.find("simulated"); it != m.end()) {
    c.simulated.beta_male = Get<double>(*it, "beta_male", 0.0);
    c.simulated.gamma_majority = Get<double>(*it, "gamma_majority", 0.0);
    c.simulated.noise_sigma = Get<double>(*it, "noise_sigma", 0.0);
    if (auto s = OptSeed(*it, "relevance_seed")) c.simulated.relevance_seed = *s;
  }
  return c;
}

}  // namespace

RunConfig ParseRunConfig(std::string_view json_text, const fs::path& base_dir) {
  json doc = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ValidationError("config: document must be a JSON object");
  }
  RunConfig c;
  c.corpus_path = Resolve(base_dir, Get<std::string>(doc, "corpus", ""));
  c.name_pool_path = Resolve(base_dir, Get<std::string>(doc, "name_pool", ""));
  c.field_mapping_path = Resolve(base_dir, Get<std::string>(doc, "field_mapping", ""));
  c.run_dir = Resolve(base_dir, Get<std::string>(doc, "run_dir", ""));
  c.cache_dir = Resolve(base_dir, Get<std::string>(doc, "cache_dir", ""));
  if (c.cache_dir.empty() && !c.run_dir.empty()) c.cache_dir = c.run_dir / "cache";
  c.max_in_flight = Get<int>(doc, "max_in_flight", 4);
  c.bootstrap_resamples = Get<int>(doc, "bootstrap_resamples", kDefaultBootstrapResamples);

  if (auto it = doc.find("seeds"); it != doc.end()) {
    if (!it->is_object()) throw ValidationError("config: 'seeds' must be an object");
    c.seeds.assignment = OptSeed(*it, "assignment");
    c.seeds.bootstrap = OptSeed(*it, "bootstrap");
    c.seeds.simulation = OptSeed(*it, "simulation");
    c.seeds.shuffle = OptSeed(*it, "shuffle");
  }

  if (auto it = doc.find("grid"); it != doc.end()) {
    const auto& g = *it;
    if (!g.is_object()) throw ValidationError("config: 'grid' must be an object");
    for (const auto& cell : Get<json>(g, "cells", json::array())) {
      if (cell.is_array() && cell.size() == 2 && cell[0].is_number_integer() &&
          cell[1].is_number_integer()) {
        c.grid.cells.push_back({cell[0].get<int>(), cell[1].get<int>()});
      } else if (cell.is_object()) {
        c.grid.cells.push_back({Get<int>(cell, "n_r", 0), Get<int>(cell, "n_min", 0)});
      } else {
        throw ValidationError("config: grid cells must be [n_r, n_min] pairs");
      }
    }
    c.grid.t_values = Get<std::vector<int>>(g, "t", {10});
    c.grid.variants.clear();
    for (const auto& v : Get<std::vector<std::string>>(g, "variants", {"baseline"})) {
      c.grid.variants.push_back(ParseVariant(v));
    }
    c.shuffle_candidates = Get<bool>(g, "shuffle_candidates", false);
  }
  c.table_t = c.grid.t_values.empty() ? 10 : c.grid.t_values.front();
  if (auto it = doc.find("report"); it != doc.end()) {
    c.table_t = Get<int>(*it, "table_t", c.table_t);
    c.shade.edges = Get<std::vector<double>>(*it, "shade_edges", c.shade.edges);
  }

  for (const auto& m : Get<json>(doc, "models", json::array())) {
    auto model = ParseModel(m, base_dir);
    const bool has_seed = m.contains("simulated") && m["simulated"].contains("relevance_seed");
    if (!has_seed && c.seeds.simulation) model.simulated.relevance_seed = *c.seeds.simulation;
    if (model.cache_dir.empty()) model.cache_dir = c.cache_dir;
    c.grid.model_ids.push_back(model.model_id);
    c.models.push_back(std::move(model));
  }
  return c;
}

RunConfig LoadRunConfig(const fs::path& path) {
  const auto base = fs::absolute(path).parent_path();
  return ParseRunConfig(util::ReadFile(path), base);
}

std::string SerializeRunConfig(const RunConfig& c) {
  json cells = json::array();
  for (const auto& cell : c.grid.cells) cells.push_back({cell.n_r, cell.n_min});
  json variants = json::array();
  for (auto v : c.grid.variants) variants.push_back(VariantName(v));
  json models = json::array();
  for (const auto& m : c.models) {
    models.push_back({{"id", m.model_id},
                      {"kind", m.kind == SelectorKind::kRemote ? "remote" : "simulated"},
                      {"temperature", m.temperature},
                      {"endpoint", m.endpoint},
                      {"api_key_env", m.api_key_env},
                      {"timeout_seconds", m.timeout_seconds},
                      {"max_in_flight", m.max_in_flight},
                      {"retry", {{"max_attempts", m.retry.max_attempts},
                                 {"backoff_ms", m.retry.backoff_ms}}},
                      {"cache_dir", m.cache_dir.string()},
                      {"simulated", {{"beta_male", m.simulated.beta_male},
                                     {"gamma_majority", m.simulated.gamma_majority},
                                     {"noise_sigma", m.simulated.noise_sigma},
                                     {"relevance_seed", m.simulated.relevance_seed}}}});
  }
  json seeds = json::object();
  auto put_seed = [&](const char* k, const std::optional<std::uint64_t>& v) {
    seeds[k] = v ? json(*v) : json(nullptr);
  };
  put_seed("assignment", c.seeds.assignment);
  put_seed("bootstrap", c.seeds.bootstrap);
  put_seed("simulation", c.seeds.simulation);
  put_seed("shuffle", c.seeds.shuffle);
  json doc = {{"corpus", c.corpus_path.string()},
              {"name_pool", c.name_pool_path.string()},
              {"field_mapping", c.field_mapping_path.string()},
              {"run_dir", c.run_dir.string()},
              {"cache_dir", c.cache_dir.string()},
              {"max_in_flight", c.max_in_flight},
              {"bootstrap_resamples", c.bootstrap_resamples},
              {"seeds", std::move(seeds)},
              {"grid", {{"cells", std::move(cells)},
                        {"t", c.grid.t_values},
                        {"variants", std::move(variants)},
                        {"shuffle_candidates", c.shuffle_candidates}}},
              {"report", {{"table_t", c.table_t}, {"shade_edges", c.shade.edges}}},
              {"models", std::move(models)}};
  return doc.dump();
}

std::vector<std::string> ValidateSetup(const RunConfig& c) {
  std::vector<std::string> findings;
  auto add = [&](std::string f) { findings.push_back(std::move(f)); };

  if (!c.seeds.assignment) add("seeds: 'assignment' is required");
  if (!c.seeds.bootstrap) add("seeds: 'bootstrap' is required");
  if (!c.seeds.simulation) add("seeds: 'simulation' is required");
  if (c.shuffle_candidates && !c.seeds.shuffle) {
    add("seeds: 'shuffle' is required when shuffle_candidates is set");
  }
  if (c.run_dir.empty()) add("run_dir: not set");
  if (c.max_in_flight < 1) add("max_in_flight: must be >= 1");
  if (c.bootstrap_resamples < 0) add("bootstrap_resamples: must be >= 0");

  if (c.models.empty()) add("models: at least one model is required");
  std::set<std::string> ids;
  for (const auto& m : c.models) {
    if (m.model_id.empty()) add("models: a model has no id");
    if (!ids.insert(m.model_id).second) add("models: duplicate id '" + m.model_id + "'");
    if (m.model_id.find_first_of(",\n\"") != std::string::npos) {
      add("models: id '" + m.model_id + "' contains a reserved character");
    }
    if (m.temperature != 0.0) add("models: '" + m.model_id + "' temperature must be 0.0");
    if (m.max_in_flight < 1) add("models: '" + m.model_id + "' max_in_flight must be >= 1");
    if (m.kind == SelectorKind::kRemote && m.endpoint.empty()) {
      add("models: remote model '" + m.model_id + "' has no endpoint");
    }
  }

  int max_n_r = 0;
  if (c.grid.cells.empty()) add("grid: no cells");
  if (c.grid.t_values.empty()) add("grid: no t values");
  if (c.grid.variants.empty()) add("grid: no variants");
  for (const auto& cell : c.grid.cells) {
    const std::string where =
        "grid: cell (n_r=" + std::to_string(cell.n_r) + ", n_min=" + std::to_string(cell.n_min) + ")";
    if (cell.n_r <= 0 || cell.n_min <= 0 || cell.n_min > cell.n_r / 2) {
      add(where + " sizes out of range");
      continue;
    }
    if (cell.n_r % cell.n_min != 0) {
      add(where + " divisibility: n_min does not divide n_r");
      continue;
    }
    max_n_r = std::max(max_n_r, cell.n_r);
    for (int t : c.grid.t_values) {
      if (t < 1 || t > cell.n_r) add(where + " t=" + std::to_string(t) + " out of range");
    }
  }

  std::optional<FieldMapping> mapping;
  auto check_path = [&](const fs::path& p, const char* what) {
    if (p.empty()) {
      add(std::string("path: ") + what + " not set");
      return false;
    }
    if (!fs::exists(p)) {
      add(std::string("path: ") + what + " not found: " + p.string());
      return false;
    }
    return true;
  };
  if (check_path(c.name_pool_path, "name_pool")) {
    try {
      LoadNamePool(c.name_pool_path);
    } catch (const std::exception& e) {
      add(std::string("name_pool: ") + e.what());
    }
  }
  if (check_path(c.field_mapping_path, "field_mapping")) {
    try {
      mapping = LoadFieldMapping(c.field_mapping_path);
    } catch (const std::exception& e) {
      add(std::string("field_mapping: ") + e.what());
    }
  }
  if (check_path(c.corpus_path, "corpus")) {
    try {
      const auto corpus = LoadCorpus(c.corpus_path);
      if (corpus.articles().empty()) add("corpus: no articles");
      const auto min_candidates =
          static_cast<std::size_t>(std::max<int>(max_n_r, kDefaultMinCandidates));
      for (const auto& a : corpus.articles()) {
        for (const auto& v : ValidateFocal(a, min_candidates)) {
          add("corpus: article " + a.article_id + ": " + v);
        }
        if (mapping && !mapping->entries().contains(a.for_division)) {
          add("corpus: article " + a.article_id + ": unknown division code " + a.for_division);
        }
      }
    } catch (const std::exception& e) {
      add(std::string("corpus: ") + e.what());
    }
  }
  return findings;
}

}  // namespace citebias
