#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "citebias/corpus.hpp"
#include "citebias/design.hpp"
#include "citebias/metrics.hpp"
#include "citebias/prompting.hpp"
#include "citebias/pseudonyms.hpp"
#include "citebias/report.hpp"
#include "citebias/selectors.hpp"

namespace citebias {

struct Seeds {
  std::optional<std::uint64_t> assignment;
  std::optional<std::uint64_t> bootstrap;
  std::optional<std::uint64_t> simulation;
  std::optional<std::uint64_t> shuffle;  // only used when shuffle_candidates is set
};

struct RunConfig {
  std::filesystem::path corpus_path;
  std::filesystem::path name_pool_path;
  std::filesystem::path field_mapping_path;
  std::filesystem::path run_dir;
  std::filesystem::path cache_dir;  // defaults to <run_dir>/cache
  GridConfig grid;                  // model_ids filled from `models`
  bool shuffle_candidates = false;
  std::vector<SelectorConfig> models;
  Seeds seeds;
  int bootstrap_resamples = kDefaultBootstrapResamples;
  int table_t = 10;
  ShadeConfig shade;
  int max_in_flight = 4;
};

// Relative paths resolve against `base_dir`. Structural problems throw
// ValidationError; semantic ones are reported by ValidateSetup.
RunConfig ParseRunConfig(std::string_view json_text, const std::filesystem::path& base_dir);
RunConfig LoadRunConfig(const std::filesystem::path& path);
// Canonical compact JSON with absolute paths; stored as the run snapshot.
std::string SerializeRunConfig(const RunConfig& config);

// Empty result iff the setup is usable.
std::vector<std::string> ValidateSetup(const RunConfig& config);

struct PlanSummary {
  std::int64_t plans = 0;
  std::int64_t requests = 0;  // subgroups x conditions x models x variants
};

// Pure planning step (no files). Plans are ordered by condition, then article.
std::vector<TrialPlan> BuildPlans(const Corpus& corpus, const RunConfig& config);
std::int64_t EstimateRequests(std::span<const TrialPlan> plans);

// Validates, then writes <run_dir>/config.json, plan/plans.jsonl,
// plan/assignment.json and plan/summary.json. Throws ValidationError
// listing the findings when validation fails.
PlanSummary CmdPlan(const RunConfig& config);

struct SubgroupResolution {
  std::optional<SelectionResponse> response;  // nullopt when excluded
  int backend_calls = 0;
  int cache_hits = 0;
  bool retried = false;
  std::string exclusion_reason;
};

// Render, select, parse; one re-request of the same prompt after a parse
// failure, exclusion after the second. Backend failures exclude directly.
// With a CachingSelector the retry bypasses the cached text.
SubgroupResolution ResolveSubgroup(const TrialPlan& plan, int subgroup_index, const Corpus& corpus,
                                   const PseudonymAssignment& assignment, Selector& selector,
                                   CachingSelector* cache = nullptr);

// In-memory execution of plans, no persistence. Records come out in plan
// order regardless of worker count.
struct InMemoryRun {
  std::vector<SelectionRecord> records;
  std::vector<SubgroupOutcome> outcomes;
  std::int64_t exclusions = 0;
  std::int64_t retries = 0;
};

InMemoryRun RunInMemory(const Corpus& corpus, const PseudonymAssignment& assignment,
                        std::span<const TrialPlan> plans,
                        const std::function<Selector&(const std::string& model_id)>& selector_for,
                        int workers = 1);

using SelectorFactory = std::function<std::unique_ptr<Selector>(const SelectorConfig&)>;

// Builds SimulatedSelector or RemoteSelector from the config.
std::unique_ptr<Selector> MakeSelector(const SelectorConfig& config);

struct RunOptions {
  bool resume = false;
  bool dry_run = false;
  // Stop dispatching after this many subgroups complete in this session.
  std::optional<std::int64_t> stop_after;
  SelectorFactory factory;  // defaults to MakeSelector
};

struct RunSummary {
  std::int64_t planned = 0;
  std::int64_t completed = 0;       // cumulative, including earlier sessions
  std::int64_t pending_requests = 0;  // dry-run: requests that would be sent
  std::int64_t exclusions = 0;
  bool finished = false;            // records and manifest written
};

RunSummary CmdRun(const RunConfig& config, const RunOptions& options);

// Reads run/records.jsonl; writes analysis/aggregate.csv, analysis/aggregate.jsonl
// (every slice) and analysis/table_rows.jsonl (baseline, t = table_t, cells pooled).
void CmdAnalyze(const std::filesystem::path& run_dir);
// Reads analysis outputs; writes report/nsd_table.txt, report/nsd_table.csv,
// report/srr_plotdata.csv, report/manifest.json.
void CmdReport(const std::filesystem::path& run_dir);

RunConfig LoadRunSnapshot(const std::filesystem::path& run_dir);
RunManifest LoadRunManifest(const std::filesystem::path& run_dir);
std::vector<SelectionRecord> LoadRecords(const std::filesystem::path& records_path);

struct SynthCorpusParams {
  int per_division = 30;
  int refs_per_article = 50;
  int divisions = 22;  // the first N of AnzsrcDivisions()
  std::uint64_t seed = 0;
};

// Deterministic stand-in for the harvested corpus.
Corpus SynthCorpus(const SynthCorpusParams& params);

}  // namespace citebias
