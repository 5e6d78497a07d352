// citebias: plan, run, analyze and report citation-selection bias audits.
#include <spdlog/spdlog.h>

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "citebias/pipeline.hpp"
#include "citebias/util.hpp"

namespace {

using namespace citebias;

constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kRuntimeFailure = 2;

// analyze/report accept either the run directory or the config naming it.
std::filesystem::path RunDirFrom(const std::string& run_dir, const std::string& config) {
  if (!run_dir.empty()) return run_dir;
  if (config.empty()) throw ValidationError("pass --run-dir or --config");
  return LoadRunConfig(config).run_dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual author-gender audit of LLM citation selection"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  std::string config_path;
  std::string run_dir;

  auto* validate = app.add_subcommand("validate", "check config, corpus, name pool and mapping");
  validate->add_option("-c,--config", config_path, "run config")->required();

  auto* plan = app.add_subcommand("plan", "write trial plans and the request estimate");
  plan->add_option("-c,--config", config_path, "run config")->required();

  bool resume = false;
  bool dry_run = false;
  std::int64_t stop_after = 0;
  auto* run = app.add_subcommand("run", "dispatch planned subgroups to the selectors");
  run->add_option("-c,--config", config_path, "run config")->required();
  run->add_flag("--resume", resume, "continue an interrupted run");
  run->add_flag("--dry-run", dry_run, "count requests that would be sent, send none");
  run->add_option("--stop-after", stop_after, "stop after N subgroups in this session");

  auto* analyze = app.add_subcommand("analyze", "compute NSD, SRR and significance");
  analyze->add_option("-c,--config", config_path, "run config");
  analyze->add_option("-r,--run-dir", run_dir, "run directory");

  auto* report = app.add_subcommand("report", "render the NSD table, SRR plot data and manifest");
  report->add_option("-c,--config", config_path, "run config");
  report->add_option("-r,--run-dir", run_dir, "run directory");

  SynthCorpusParams synth;
  std::string out_path;
  auto* synth_cmd = app.add_subcommand("synth-corpus", "write a deterministic synthetic corpus");
  synth_cmd->add_option("-o,--out", out_path, "output corpus file")->required();
  synth_cmd->add_option("--per-division", synth.per_division)->capture_default_str();
  synth_cmd->add_option("--refs", synth.refs_per_article)->capture_default_str();
  synth_cmd->add_option("--divisions", synth.divisions)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_default_logger(spdlog::default_logger()->clone("citebias"));

  try {
    if (validate->parsed()) {
      const auto findings = ValidateSetup(LoadRunConfig(config_path));
      for (const auto& f : findings) std::cout << f << "\n";
      std::cout << findings.size() << " finding(s)\n";
      return findings.empty() ? kOk : kValidationFailure;
    }
    if (plan->parsed()) {
      const auto s = CmdPlan(LoadRunConfig(config_path));
      std::cout << "plans: " << s.plans << "\nrequests: " << s.requests << "\n";
      return kOk;
    }
    if (run->parsed()) {
      RunOptions opts;
      opts.resume = resume;
      opts.dry_run = dry_run;
      if (stop_after > 0) opts.stop_after = stop_after;
      const auto s = CmdRun(LoadRunConfig(config_path), opts);
      std::cout << "planned: " << s.planned << "\ncompleted: " << s.completed << "\n";
      if (dry_run) std::cout << "requests to send: " << s.pending_requests << "\n";
      else std::cout << "exclusions: " << s.exclusions << "\nfinished: " << s.finished << "\n";
      return kOk;
    }
    if (analyze->parsed()) {
      CmdAnalyze(RunDirFrom(run_dir, config_path));
      return kOk;
    }
    if (report->parsed()) {
      CmdReport(RunDirFrom(run_dir, config_path));
      return kOk;
    }
    if (synth_cmd->parsed()) {
      const auto corpus = SynthCorpus(synth);
      SaveCorpus(corpus, out_path);
      std::cout << corpus.articles().size() << " articles, " << corpus.references().size()
                << " references\n";
      return kOk;
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidationFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kOk;
}
