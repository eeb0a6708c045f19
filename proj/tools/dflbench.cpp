// dflbench: generate data, train, tune, evaluate and summarize from config files.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dflbench/benchcli.hpp"

using namespace dflbench;

namespace {

struct CommonOptions {
  std::string config;
  std::string preset;
  std::string out;
  std::string seeds;
  long long seed = -1;
  int parallel = 1;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "TOML or JSON experiment config");
  cmd->add_option("--preset", o.preset, "built-in preset, overlaid by --config");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "run a single seed");
  cmd->add_option("--seeds", o.seeds, "seed list such as 0-9 or 0,3,5");
  cmd->add_option("--parallel", o.parallel, "worker threads")->check(CLI::PositiveNumber);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfigError, path + ": cannot read file");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Json parse_seeds(const std::string& text) {
  Json out = Json::array();
  std::stringstream ss(text);
  std::string part;
  try {
    while (std::getline(ss, part, ',')) {
      const auto dash = part.find('-');
      if (dash == std::string::npos) {
        out.push_back(std::stoull(part));
        continue;
      }
      const unsigned long long lo = std::stoull(part.substr(0, dash)), hi = std::stoull(part.substr(dash + 1));
      if (hi < lo) throw std::invalid_argument("descending range");
      for (unsigned long long s = lo; s <= hi; ++s) out.push_back(s);
    }
  } catch (const std::exception&) {
    fail(ErrorCode::kConfigError, "--seeds: expected a list such as 0-9 or 0,3,5");
  }
  if (out.empty()) fail(ErrorCode::kConfigError, "--seeds: empty list");
  return out;
}

ExperimentConfig load_config(const CommonOptions& o) {
  if (o.config.empty() && o.preset.empty()) fail(ErrorCode::kConfigError, "config: give --config or --preset");
  Json doc = o.preset.empty() ? Json::object() : preset_config(o.preset);
  if (!o.config.empty()) merge_json(doc, parse_config_document(read_text(o.config), o.config));
  if (o.seed >= 0) doc["training"]["seeds"] = Json::array({o.seed});
  if (!o.seeds.empty()) doc["training"]["seeds"] = parse_seeds(o.seeds);
  if (!o.out.empty()) doc["output"]["dir"] = o.out;
  return parse_config_json(doc);
}

void print_summary(const Json& summary) {
  for (const Json& g : summary.at("groups")) {
    std::cout << g.at("problem").get<std::string>() << " [" << g.at("instance_setting").get<std::string>() << "] "
              << g.at("method").get<std::string>() << ": " << g.at("metric").get<std::string>()
              << " mean=" << format_number(g.at("mean").get<double>())
              << " median=" << format_number(g.at("median").get<double>()) << " n=" << g.at("n").get<int>() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-focused learning benchmark"};
  app.require_subcommand(1);

  CommonOptions gen_o, train_o, grid_o, eval_o;
  CLI::App* gen = app.add_subcommand("gen", "generate a problem's datasets into an archive");
  add_common(gen, gen_o);
  CLI::App* trn = app.add_subcommand("train", "train every configured method over every seed");
  add_common(trn, train_o);
  CLI::App* grid = app.add_subcommand("grid", "tune on the Table A1 grid, then train the best configuration");
  add_common(grid, grid_o);
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the validation and test splits");
  add_common(eval, eval_o);
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  CLI::App* report = app.add_subcommand("report", "summarize a results CSV");
  std::string report_in, report_out;
  report->add_option("--in", report_in, "results.csv")->required();
  report->add_option("--out", report_out, "summary JSON path (stdout when omitted)");
  CLI::App* presets = app.add_subcommand("presets", "list built-in presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  // Known before config parsing so config errors still leave an error.json behind.
  std::string out_dir;
  for (const auto& [cmd, o] : {std::pair{gen, &gen_o}, {trn, &train_o}, {grid, &grid_o}, {eval, &eval_o}})
    if (cmd->parsed()) out_dir = o->out;
  try {
    if (presets->parsed()) {
      for (const std::string& name : preset_names()) std::cout << name << "\n";
    } else if (gen->parsed()) {
      const ExperimentConfig cfg = load_config(gen_o);
      out_dir = cfg.output_dir;
      if (out_dir.empty()) fail(ErrorCode::kConfigError, "output.dir: required for gen");
      const ProblemSetup setup = build_problem(cfg);
      write_dataset_archive(out_dir, setup.meta.dump(2), {&setup.train, &setup.validation, &setup.test});
      std::cout << "wrote " << setup.train.size() << "/" << setup.validation.size() << "/" << setup.test.size()
                << " instances to " << out_dir << "\n";
    } else if (trn->parsed() || grid->parsed()) {
      const CommonOptions& o = trn->parsed() ? train_o : grid_o;
      const ExperimentConfig cfg = load_config(o);
      out_dir = cfg.output_dir;
      RunOptions ro;
      ro.parallel = o.parallel;
      ro.force_grid = grid->parsed();
      const ExperimentResult res = run_experiment(cfg, ro);
      print_summary(res.summary);
    } else if (eval->parsed()) {
      const ExperimentConfig cfg = load_config(eval_o);
      out_dir = cfg.output_dir;
      const ProblemSetup setup = build_problem(cfg);
      const PredictorModel model = load_checkpoint(checkpoint);
      Json out = Json::object();
      for (const Dataset* d : {&setup.validation, &setup.test}) {
        const EvalMetrics m = evaluate(*d, *setup.oracle, model, setup.monitor);
        auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(); };
        out[to_string(d->split)] = {{"relative_regret", num(m.relative_regret)},
                                    {"absolute_regret", num(m.absolute_regret)},
                                    {"mse", num(m.mse)},
                                    {"mismatch", num(m.mismatch)}};
      }
      std::cout << out.dump(2) << "\n";
    } else if (report->parsed()) {
      const Json summary = emit_summary(parse_results_csv(read_text(report_in)));
      if (report_out.empty()) {
        std::cout << summary.dump(2) << "\n";
      } else {
        std::ofstream(report_out) << summary.dump(2) << "\n";
        print_summary(summary);
      }
    }
  } catch (const std::exception& e) {
    const Json rec = error_record(e);
    std::cerr << rec.dump() << "\n";
    if (!out_dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(out_dir, ec);
      std::ofstream(std::filesystem::path(out_dir) / "error.json") << rec.dump(2) << "\n";
    }
    const auto* err = dynamic_cast<const Error*>(&e);
    return err && err->code() == ErrorCode::kConfigError ? kExitConfig : kExitRuntime;
  }
  return kExitOk;
}
