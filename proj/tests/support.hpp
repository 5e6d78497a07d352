#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "citebias/pipeline.hpp"
#include "json.hpp"

namespace citebias::testing {

inline NamePool SmallPool() {
  NamePool p;
  p.male_first = {"James", "John", "Robert", "Michael", "William", "David", "Richard", "Thomas"};
  p.female_first = {"Mary", "Patricia", "Jennifer", "Linda", "Elizabeth", "Susan", "Sarah", "Karen"};
  p.male_surnames = {"Johnson", "Richardson", "Watson", "Harrison"};
  p.female_surnames = {"Marriott", "Beaton", "Tillotson", "Emmott"};
  return p;
}

// `articles` focal articles in division 31, each with `refs` private candidates.
inline Corpus SmallCorpus(int articles, int refs = 48, std::uint64_t seed = 1) {
  SynthCorpusParams p;
  p.per_division = articles;
  p.refs_per_article = refs;
  p.divisions = 1;
  p.seed = seed;
  auto c = SynthCorpus(p);
  return c;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("citebias_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Config document for a simulated run over `corpus_path` with the shipped
// name pool and field mapping. Callers adjust fields before writing.
inline nlohmann::json SimulatedRunConfig(const std::filesystem::path& corpus_path,
                                         const std::filesystem::path& run_dir) {
  const std::filesystem::path data = std::filesystem::path(CITEBIAS_SOURCE_DIR) / "data";
  return {
      {"corpus", corpus_path.string()},
      {"name_pool", (data / "name_pool.json").string()},
      {"field_mapping", (data / "field_mapping.json").string()},
      {"run_dir", run_dir.string()},
      {"grid", {{"cells", {{20, 5}}}, {"t", {10}}, {"variants", {"baseline"}}}},
      {"models",
       {{{"id", "sim"},
         {"kind", "simulated"},
         {"temperature", 0.0},
         {"simulated", {{"beta_male", 0.5}, {"gamma_majority", 0.1}, {"noise_sigma", 0.5}}}}}},
      {"seeds", {{"assignment", 3}, {"bootstrap", 5}, {"simulation", 9}}},
      {"bootstrap_resamples", 200},
      {"max_in_flight", 3}};
}

inline std::filesystem::path WriteConfig(const nlohmann::json& doc,
                                         const std::filesystem::path& path) {
  util::WriteFileAtomic(path, doc.dump(2));
  return path;
}

inline std::string ReadAll(const std::filesystem::path& p) { return util::ReadFile(p); }

}  // namespace citebias::testing
