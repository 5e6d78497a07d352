#include "citebias/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "citebias/util.hpp"
#include "json.hpp"

namespace citebias {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kConfigFile = "config.json";
constexpr const char* kPlansFile = "plan/plans.jsonl";
constexpr const char* kAssignmentFile = "plan/assignment.json";
constexpr const char* kSummaryFile = "plan/summary.json";
constexpr const char* kProgressFile = "run/progress.jsonl";
constexpr const char* kSessionsFile = "run/sessions.jsonl";
constexpr const char* kRecordsFile = "run/records.jsonl";
constexpr const char* kManifestFile = "run/manifest.json";
constexpr const char* kAggregateCsv = "analysis/aggregate.csv";
constexpr const char* kAggregateRows = "analysis/aggregate.jsonl";
constexpr const char* kTableRows = "analysis/table_rows.jsonl";

std::string NowUtc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void WriteText(const fs::path& path, std::string_view text) {
  try {
    fs::create_directories(path.parent_path());
    util::WriteFileAtomic(path, text);
  } catch (const std::exception& e) {
    throw RuntimeFailure("cannot write " + path.string() + ": " + e.what());
  }
}

std::string ReadRequired(const fs::path& path, std::string_view hint) {
  if (!fs::exists(path)) {
    throw ValidationError("missing " + path.string() + "; run `" + std::string(hint) + "` first");
  }
  return util::ReadFile(path);
}

std::vector<std::string> SplitLines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

std::string ProgressKey(const std::string& fingerprint, const std::string& article_id, int subgroup) {
  return fingerprint + "|" + article_id + "|" + std::to_string(subgroup);
}

struct ProgressEntry {
  std::string model;
  bool ok = false;
  std::vector<std::string> selected;
  int backend_calls = 0;
  int cache_hits = 0;
  bool retried = false;
  std::string reason;
  std::string article_id;
  std::string condition;
  int subgroup = 0;
};

// Later lines win, so a re-recorded subgroup replaces the earlier one.
std::map<std::string, ProgressEntry> ReadProgress(const fs::path& path) {
  std::map<std::string, ProgressEntry> out;
  if (!fs::exists(path)) return out;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      // a torn final line from an interrupted write
      spdlog::warn("ignoring unreadable progress line");
      continue;
    }
    ProgressEntry e;
    e.condition = j.at("plan").get<std::string>();
    e.article_id = j.at("article").get<std::string>();
    e.subgroup = j.at("subgroup").get<int>();
    e.model = j.at("model").get<std::string>();
    e.ok = j.at("status").get<std::string>() == "ok";
    e.selected = j.value("selected", std::vector<std::string>{});
    e.backend_calls = j.value("backend_calls", 0);
    e.cache_hits = j.value("cache_hits", 0);
    e.retried = j.value("retried", false);
    e.reason = j.value("reason", "");
    out[ProgressKey(e.condition, e.article_id, e.subgroup)] = std::move(e);
  }
  return out;
}

std::string ProgressLine(const TrialPlan& plan, int subgroup, const SubgroupResolution& r) {
  json j = {{"plan", plan.condition.Fingerprint()},
            {"article", plan.article_id},
            {"subgroup", subgroup},
            {"model", plan.condition.model_id},
            {"status", r.response ? "ok" : "excluded"},
            {"selected", r.response ? r.response->selected_ids : std::vector<std::string>{}},
            {"backend_calls", r.backend_calls},
            {"cache_hits", r.cache_hits},
            {"retried", r.retried},
            {"reason", r.exclusion_reason}};
  return j.dump();
}

struct Task {
  std::size_t plan_index;
  int subgroup;
};

// Runs fn over tasks on `workers` threads; stops dispatching once
// should_stop() turns true. The first exception is rethrown.
void RunPool(const std::vector<Task>& tasks, int workers, const std::function<void(const Task&)>& fn,
             const std::function<bool()>& should_stop) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&] {
    for (;;) {
      if (should_stop()) return;
      {
        std::lock_guard lock(error_mu);
        if (error) return;
      }
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        fn(tasks[i]);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(tasks.size())));
  std::vector<std::thread> threads;
  for (int i = 1; i < n; ++i) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

std::optional<std::uint64_t> ShuffleSeed(const RunConfig& c) {
  if (!c.shuffle_candidates) return std::nullopt;
  return c.seeds.shuffle;
}

void RequireValid(const RunConfig& config) {
  const auto findings = ValidateSetup(config);
  if (findings.empty()) return;
  std::string msg = "setup has " + std::to_string(findings.size()) + " problem(s):";
  for (const auto& f : findings) msg += "\n  " + f;
  throw ValidationError(msg);
}

std::map<std::string, std::uint64_t> SeedMap(const Seeds& s) {
  std::map<std::string, std::uint64_t> m;
  if (s.assignment) m["assignment"] = *s.assignment;
  if (s.bootstrap) m["bootstrap"] = *s.bootstrap;
  if (s.simulation) m["simulation"] = *s.simulation;
  if (s.shuffle) m["shuffle"] = *s.shuffle;
  return m;
}

}  // namespace

std::vector<TrialPlan> BuildPlans(const Corpus& corpus, const RunConfig& config) {
  GridConfig grid = config.grid;
  grid.model_ids.clear();
  for (const auto& m : config.models) grid.model_ids.push_back(m.model_id);
  std::vector<TrialPlan> plans;
  for (const auto& cond : EnumerateConditions(grid)) {
    for (const auto& article : corpus.articles()) {
      plans.push_back(BuildTrialPlan(article, cond, ShuffleSeed(config)));
    }
  }
  return plans;
}

std::int64_t EstimateRequests(std::span<const TrialPlan> plans) {
  std::int64_t n = 0;
  for (const auto& p : plans) n += static_cast<std::int64_t>(p.subgroups.size());
  return n;
}

PlanSummary CmdPlan(const RunConfig& config) {
  RequireValid(config);
  const auto corpus = LoadCorpus(config.corpus_path);
  const auto pool = LoadNamePool(config.name_pool_path);
  const auto assignment = AssignAuthorSets(corpus, pool, *config.seeds.assignment);
  const auto plans = BuildPlans(corpus, config);

  std::string lines;
  for (const auto& p : plans) lines += SerializePlan(p) + "\n";
  PlanSummary summary{static_cast<std::int64_t>(plans.size()), EstimateRequests(plans)};

  WriteText(config.run_dir / kConfigFile, SerializeRunConfig(config) + "\n");
  WriteText(config.run_dir / kPlansFile, lines);
  WriteText(config.run_dir / kAssignmentFile, SerializeAssignment(assignment));
  json s = {{"plans", summary.plans},
            {"requests", summary.requests},
            {"articles", corpus.articles().size()},
            {"models", config.models.size()}};
  WriteText(config.run_dir / kSummaryFile, s.dump(2) + "\n");
  return summary;
}

SubgroupResolution ResolveSubgroup(const TrialPlan& plan, int subgroup_index, const Corpus& corpus,
                                   const PseudonymAssignment& assignment, Selector& selector,
                                   CachingSelector* cache) {
  const auto& cond = plan.condition;
  const auto& article = corpus.Article(plan.article_id);
  const auto& subgroup = plan.subgroups.at(static_cast<std::size_t>(subgroup_index));
  const auto prompt = RenderPrompt(article, subgroup, corpus, assignment, cond.t, cond.variant);
  const SelectionRequest request{prompt, subgroup, article, cond.t, cond.variant};

  SubgroupResolution res;
  int failures = 0;
  for (;;) {
    std::string raw;
    try {
      if (cache == nullptr) {
        res.backend_calls++;
        raw = selector.Select(request);
      } else if (failures == 0) {
        bool hit = false;
        raw = cache->Select(request, hit);
        (hit ? res.cache_hits : res.backend_calls)++;
      } else {
        res.backend_calls++;
        raw = cache->SelectFresh(request);
      }
    } catch (const RuntimeFailure& e) {
      res.exclusion_reason = std::string("backend failure: ") + e.what();
      spdlog::error("{} {} subgroup {}: {}", cond.Fingerprint(), plan.article_id, subgroup_index,
                    res.exclusion_reason);
      return res;
    }
    auto parsed = ParseResponse(raw, subgroup, cond.t);
    if (auto* ok = std::get_if<SelectionResponse>(&parsed)) {
      res.response = std::move(*ok);
      return res;
    }
    const auto& err = std::get<ParseError>(parsed);
    failures++;
    spdlog::warn("{} {} subgroup {}: unparseable response ({}: {}); raw: {}", cond.Fingerprint(),
                 plan.article_id, subgroup_index, ParseErrorName(err.kind), err.detail, err.raw_text);
    if (NextAction(false, failures) == RetryAction::kRetrySamePrompt) {
      res.retried = true;
      continue;
    }
    res.exclusion_reason =
        "parse failure: " + std::string(ParseErrorName(err.kind)) + ": " + err.detail;
    return res;
  }
}

InMemoryRun RunInMemory(const Corpus& corpus, const PseudonymAssignment& assignment,
                        std::span<const TrialPlan> plans,
                        const std::function<Selector&(const std::string& model_id)>& selector_for,
                        int workers) {
  std::vector<Task> tasks;
  std::vector<std::size_t> offset(plans.size());
  for (std::size_t i = 0; i < plans.size(); ++i) {
    offset[i] = tasks.size();
    for (int j = 0; j < static_cast<int>(plans[i].subgroups.size()); ++j) tasks.push_back({i, j});
  }
  std::vector<SubgroupOutcome> outcomes(tasks.size());
  std::atomic<std::int64_t> exclusions{0}, retries{0};
  RunPool(
      tasks, workers,
      [&](const Task& task) {
        const auto& plan = plans[task.plan_index];
        auto res = ResolveSubgroup(plan, task.subgroup, corpus, assignment,
                                   selector_for(plan.condition.model_id));
        if (!res.response) exclusions++;
        if (res.retried) retries++;
        outcomes[offset[task.plan_index] + static_cast<std::size_t>(task.subgroup)] = {
            task.plan_index, task.subgroup, std::move(res.response)};
      },
      [] { return false; });
  InMemoryRun run;
  run.records = CollectRecords(plans, outcomes);
  run.outcomes = std::move(outcomes);
  run.exclusions = exclusions.load();
  run.retries = retries.load();
  return run;
}

std::unique_ptr<Selector> MakeSelector(const SelectorConfig& config) {
  if (config.kind == SelectorKind::kRemote) return std::make_unique<RemoteSelector>(config);
  return std::make_unique<SimulatedSelector>(config.simulated);
}

RunSummary CmdRun(const RunConfig& config, const RunOptions& options) {
  RequireValid(config);
  const fs::path& dir = config.run_dir;
  const auto snapshot = SerializeRunConfig(config) + "\n";

  if (options.resume && fs::exists(dir / kConfigFile) &&
      util::ReadFile(dir / kConfigFile) != snapshot) {
    throw ValidationError("config differs from the snapshot in " + (dir / kConfigFile).string() +
                          "; resume needs the original config");
  }

  const auto corpus = LoadCorpus(config.corpus_path);
  const auto pool = LoadNamePool(config.name_pool_path);
  const auto assignment = AssignAuthorSets(corpus, pool, *config.seeds.assignment);
  const auto plans = BuildPlans(corpus, config);

  std::map<std::string, ProgressEntry> done;
  if (options.resume) done = ReadProgress(dir / kProgressFile);

  std::vector<Task> pending;
  std::int64_t planned = 0;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto fp = plans[i].condition.Fingerprint();
    for (int j = 0; j < static_cast<int>(plans[i].subgroups.size()); ++j) {
      planned++;
      if (!done.contains(ProgressKey(fp, plans[i].article_id, j))) pending.push_back({i, j});
    }
  }

  std::map<std::string, const SelectorConfig*> model_cfg;
  for (const auto& m : config.models) model_cfg[m.model_id] = &m;

  RunSummary summary;
  summary.planned = planned;

  if (options.dry_run) {
    // Count subgroups whose first request would miss the cache.
    std::map<std::string, std::unique_ptr<ResponseCache>> caches;
    for (const auto& task : pending) {
      const auto& plan = plans[task.plan_index];
      const auto& cond = plan.condition;
      const auto* mc = model_cfg.at(cond.model_id);
      const auto& article = corpus.Article(plan.article_id);
      const auto& sg = plan.subgroups[static_cast<std::size_t>(task.subgroup)];
      const auto prompt = RenderPrompt(article, sg, corpus, assignment, cond.t, cond.variant);
      const auto key = CacheKey(cond.model_id, prompt.digest, cond.variant, mc->temperature);
      if (!fs::exists(mc->cache_dir / key)) summary.pending_requests++;
    }
    summary.completed = static_cast<std::int64_t>(done.size());
    return summary;
  }

  if (!options.resume && fs::exists(dir / kProgressFile)) {
    throw ValidationError(dir.string() + " already holds a run; pass --resume or use a new run_dir");
  }
  CmdPlan(config);
  fs::create_directories(dir / "run");

  const auto factory = options.factory ? options.factory : SelectorFactory(MakeSelector);
  struct Backend {
    std::unique_ptr<Selector> inner;
    std::unique_ptr<ResponseCache> cache;
    std::unique_ptr<CachingSelector> caching;
  };
  std::map<std::string, Backend> backends;
  for (const auto& m : config.models) {
    Backend b;
    b.inner = factory(m);
    b.cache = std::make_unique<ResponseCache>(m.cache_dir);
    b.caching = std::make_unique<CachingSelector>(*b.inner, *b.cache, m.model_id, m.temperature);
    backends.emplace(m.model_id, std::move(b));
  }

  const std::string started = NowUtc();
  // An interrupted write can leave a partial last line; start on a fresh one.
  bool torn_tail = false;
  if (fs::exists(dir / kProgressFile) && fs::file_size(dir / kProgressFile) > 0) {
    const auto text = util::ReadFile(dir / kProgressFile);
    torn_tail = text.back() != '\n';
  }
  std::ofstream progress(dir / kProgressFile, std::ios::app);
  if (!progress) throw RuntimeFailure("cannot open " + (dir / kProgressFile).string());
  if (torn_tail) progress << '\n';
  std::mutex progress_mu;
  std::atomic<std::int64_t> session_done{0};

  spdlog::info("run: {} subgroups planned, {} pending", planned, pending.size());
  RunPool(
      pending, config.max_in_flight,
      [&](const Task& task) {
        const auto& plan = plans[task.plan_index];
        auto& backend = backends.at(plan.condition.model_id);
        const auto res = ResolveSubgroup(plan, task.subgroup, corpus, assignment, *backend.inner,
                                         backend.caching.get());
        const auto line = ProgressLine(plan, task.subgroup, res);
        {
          std::lock_guard lock(progress_mu);
          progress << line << '\n';
          progress.flush();
          if (!progress) throw RuntimeFailure("cannot append to progress log");
        }
        session_done++;
      },
      [&] { return options.stop_after && session_done.load() >= *options.stop_after; });
  progress.close();

  {
    json s = {{"started", started},
              {"finished", NowUtc()},
              {"resume", options.resume},
              {"subgroups", session_done.load()}};
    std::ofstream sessions(dir / kSessionsFile, std::ios::app);
    sessions << s.dump() << '\n';
  }

  done = ReadProgress(dir / kProgressFile);
  summary.completed = 0;
  std::vector<SubgroupOutcome> outcomes;
  RunManifest manifest;
  for (const auto& m : config.models) manifest.per_model[m.model_id] = {};
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto fp = plans[i].condition.Fingerprint();
    for (int j = 0; j < static_cast<int>(plans[i].subgroups.size()); ++j) {
      auto it = done.find(ProgressKey(fp, plans[i].article_id, j));
      if (it == done.end()) continue;
      summary.completed++;
      const auto& e = it->second;
      auto& counters = manifest.per_model[e.model];
      counters.requests += e.backend_calls;
      counters.cache_hits += e.cache_hits;
      counters.retries += e.retried ? 1 : 0;
      SubgroupOutcome outcome{i, j, std::nullopt};
      if (e.ok) {
        outcome.response = SelectionResponse{e.selected, ""};
      } else {
        counters.exclusions++;
        summary.exclusions++;
        manifest.exclusions.push_back({e.article_id, e.condition, j, e.reason});
      }
      outcomes.push_back(std::move(outcome));
    }
  }
  if (summary.completed < planned) {
    spdlog::info("run: {}/{} subgroups complete; continue with --resume", summary.completed,
                 planned);
    return summary;
  }

  std::string records;
  for (const auto& r : CollectRecords(plans, outcomes)) records += SerializeRecord(r) + "\n";
  WriteText(dir / kRecordsFile, records);

  manifest.config_json = json::parse(snapshot).dump();
  manifest.corpus_digest = util::Sha256Hex(util::ReadFile(config.corpus_path));
  manifest.seeds = SeedMap(config.seeds);
  manifest.planned_subgroups = planned;
  manifest.completed_subgroups = summary.completed;
  std::sort(manifest.exclusions.begin(), manifest.exclusions.end(),
            [](const Exclusion& a, const Exclusion& b) {
              return std::tie(a.condition, a.article_id, a.subgroup_index) <
                     std::tie(b.condition, b.article_id, b.subgroup_index);
            });
  for (const auto& line : SplitLines(util::ReadFile(dir / kSessionsFile))) {
    json s = json::parse(line, nullptr, false);
    if (s.is_discarded()) continue;
    manifest.timestamps.push_back(s.value("started", "") + "/" + s.value("finished", ""));
  }
  WriteText(dir / kManifestFile, WriteManifest(manifest));
  summary.finished = true;
  spdlog::info("run: complete, {} exclusions", summary.exclusions);
  return summary;
}

RunConfig LoadRunSnapshot(const fs::path& run_dir) {
  const auto text = ReadRequired(run_dir / kConfigFile, "plan");
  return ParseRunConfig(text, run_dir);
}

RunManifest LoadRunManifest(const fs::path& run_dir) {
  return ParseManifest(ReadRequired(run_dir / kManifestFile, "run"));
}

std::vector<SelectionRecord> LoadRecords(const fs::path& records_path) {
  std::vector<SelectionRecord> out;
  for (const auto& line : SplitLines(ReadRequired(records_path, "run"))) {
    out.push_back(ParseRecord(line));
  }
  return out;
}

void CmdAnalyze(const fs::path& run_dir) {
  const auto config = LoadRunSnapshot(run_dir);
  const auto records = LoadRecords(run_dir / kRecordsFile);
  if (records.empty()) throw ValidationError("run has no records");
  const auto corpus = LoadCorpus(config.corpus_path);
  const auto mapping = LoadFieldMapping(config.field_mapping_path);
  ArticleFieldFn field_of = [&](std::string_view id) {
    return MapField(corpus.Article(id).for_division, mapping);
  };

  AggregateOptions full;
  full.bootstrap_resamples = config.bootstrap_resamples;
  full.bootstrap_seed = config.seeds.bootstrap.value_or(0);
  const auto rows = Aggregate(records, field_of, full);

  std::vector<SelectionRecord> table_records;
  for (const auto& r : records) {
    if (r.condition.variant == PromptVariant::kBaseline && r.condition.t == config.table_t) {
      table_records.push_back(r);
    }
  }
  AggregateOptions pooled = full;
  pooled.by_cell = false;
  const auto table_rows = Aggregate(table_records, field_of, pooled);

  WriteText(run_dir / kAggregateCsv, AggregateCsv(rows));
  WriteText(run_dir / kAggregateRows, SerializeAggregateRows(rows));
  WriteText(run_dir / kTableRows, SerializeAggregateRows(table_rows));
  spdlog::info("analyze: {} records, {} rows, {} table rows", records.size(), rows.size(),
               table_rows.size());
}

void CmdReport(const fs::path& run_dir) {
  const auto config = LoadRunSnapshot(run_dir);
  const auto table_rows = ParseAggregateRows(ReadRequired(run_dir / kTableRows, "analyze"));
  const auto rows = ParseAggregateRows(ReadRequired(run_dir / kAggregateRows, "analyze"));
  const auto manifest = LoadRunManifest(run_dir);

  const auto report_rows = ToReportRows(table_rows, config.shade);
  const auto table = RenderNsdTable(report_rows);

  std::vector<AggregateRow> all_rows;
  for (const auto& r : rows) {
    if (r.field == kAllFields) all_rows.push_back(r);
  }

  WriteText(run_dir / "report/nsd_table.txt", table.text);
  WriteText(run_dir / "report/nsd_table.csv", table.csv);
  WriteText(run_dir / "report/srr_plotdata.csv", ExportSrrPlotData(all_rows));
  WriteText(run_dir / "report/manifest.json", WriteManifest(manifest));
}

}  // namespace citebias
