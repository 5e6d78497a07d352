#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "citebias/metrics.hpp"

namespace citebias {

// Luminance buckets for the NSD matrix. A cell is shaded only when
// |nsd| > edges[0]; its level is the number of edges e with |nsd| >= e.
// The default edges are approximate; override them per run.
struct ShadeConfig {
  std::vector<double> edges = {0.01, 0.02, 0.035, 0.05};
};

enum class BiasDirection { kNone, kMale, kFemale };

struct Shade {
  BiasDirection direction = BiasDirection::kNone;
  int level = 0;
  bool operator==(const Shade&) const = default;
};

Shade ShadeFor(std::optional<double> nsd, const ShadeConfig& config = {});
std::string ShadeName(const Shade& s);  // "none", "male3", "female2"

struct ReportRow {
  std::string model;
  Comparison comparison = Comparison::kFMinMMin;
  std::string field;  // FOS label or "All"
  std::optional<double> nsd;
  Shade shade;
  std::string stars;
  int n_articles = 0;
};

std::vector<ReportRow> ToReportRows(std::span<const AggregateRow> rows,
                                    const ShadeConfig& config = {});

// ".042", "-.030", "-.000"; "NA" when undefined.
std::string FormatNsd(std::optional<double> v);

struct NsdTable {
  std::string text;
  std::string csv;
};

// Models in first-appearance order, four comparison rows per model, six
// field columns plus All, then the article-count row.
NsdTable RenderNsdTable(std::span<const ReportRow> rows);

// One row per (comparison, model, n_min, n_r, t, variant, gender) marker.
// Expects by-cell "All" rows; rows with an undefined ratio are skipped.
std::string ExportSrrPlotData(std::span<const AggregateRow> rows);

struct ModelCounters {
  std::int64_t requests = 0;    // backend calls actually issued
  std::int64_t cache_hits = 0;
  std::int64_t retries = 0;     // parse retries
  std::int64_t exclusions = 0;
  bool operator==(const ModelCounters&) const = default;
};

struct Exclusion {
  std::string article_id;
  std::string condition;  // fingerprint
  int subgroup_index = 0;
  std::string reason;
  bool operator==(const Exclusion&) const = default;
};

struct RunManifest {
  std::string config_json;  // resolved config snapshot
  std::string corpus_digest;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, ModelCounters> per_model;
  std::int64_t planned_subgroups = 0;
  std::int64_t completed_subgroups = 0;
  std::vector<Exclusion> exclusions;  // sorted
  std::vector<std::string> timestamps;
  bool operator==(const RunManifest&) const = default;
};

std::string WriteManifest(const RunManifest& m);
RunManifest ParseManifest(std::string_view text);

}  // namespace citebias
