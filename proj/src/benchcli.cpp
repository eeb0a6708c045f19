#include "dflbench/benchcli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <toml.hpp>

namespace dflbench {
namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kDataStream = 0x64617461;    // "data"
constexpr std::uint64_t kModelStream = 0x6d6f64656c;  // "model"

[[noreturn]] void config_error(const std::string& path, const std::string& reason) {
  fail(ErrorCode::kConfigError, path + ": " + reason);
}

// ---------------------------------------------------------------------------
// Schema

enum class FieldType { kInt, kDouble, kBool, kString, kStringList, kIntList };

struct Field {
  const char* key;
  FieldType type;
  Json def;  // null: optional without default
};

const char* type_name(FieldType t) {
  switch (t) {
    case FieldType::kInt: return "an integer";
    case FieldType::kDouble: return "a number";
    case FieldType::kBool: return "a boolean";
    case FieldType::kString: return "a string";
    case FieldType::kStringList: return "a string or a list of strings";
    case FieldType::kIntList: return "an integer or a list of integers";
  }
  return "?";
}

Json coerce(const Json& v, FieldType t, const std::string& path) {
  auto bad = [&]() -> Json { config_error(path, std::string("expected ") + type_name(t)); };
  switch (t) {
    case FieldType::kInt:
      if (v.is_number_integer()) return v;
      if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()) return Json(v.get<std::int64_t>());
      return bad();
    case FieldType::kDouble:
      if (v.is_number()) return Json(v.get<double>());
      return bad();
    case FieldType::kBool:
      if (v.is_boolean()) return v;
      return bad();
    case FieldType::kString:
      if (v.is_string()) return v;
      return bad();
    case FieldType::kStringList: {
      if (v.is_string()) return Json::array({v});
      if (!v.is_array() || v.empty()) return bad();
      for (const Json& e : v)
        if (!e.is_string()) return bad();
      return v;
    }
    case FieldType::kIntList: {
      if (v.is_number_integer()) return Json::array({v});
      if (!v.is_array() || v.empty()) return bad();
      for (const Json& e : v)
        if (!e.is_number_integer() || e.get<std::int64_t>() < 0) return bad();
      return v;
    }
  }
  return bad();
}

Json check_block(const Json& in, const std::string& block, const std::vector<Field>& fields) {
  if (!in.is_object()) config_error(block, "expected a table");
  Json out = Json::object();
  for (const auto& [key, value] : in.items()) {
    const auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return key == f.key; });
    if (it == fields.end()) config_error(block + "." + key, "unknown key");
    out[key] = coerce(value, it->type, block + "." + key);
  }
  for (const Field& f : fields)
    if (!out.contains(f.key) && !f.def.is_null()) out[f.key] = f.def;
  return out;
}

const std::vector<std::string>& problem_kinds() {
  static const std::vector<std::string> kinds = {"shortest_path", "portfolio", "knapsack",
                                                 "scheduling",    "matching",  "topk"};
  return kinds;
}

std::vector<Field> problem_fields(const std::string& kind) {
  std::vector<Field> f{{"kind", FieldType::kString, Json()}, {"data_seed", FieldType::kInt, 0}};
  auto sized = [&](int train, int val, int test) {
    f.push_back({"n_train", FieldType::kInt, train});
    f.push_back({"n_validation", FieldType::kInt, val});
    f.push_back({"n_test", FieldType::kInt, test});
  };
  auto energy = [&] {
    f.push_back({"energy_csv", FieldType::kString, ""});
    f.push_back({"n_days", FieldType::kInt, 789});
    f.push_back({"n_train", FieldType::kInt, 552});
    f.push_back({"n_validation", FieldType::kInt, 79});
  };
  if (kind == "shortest_path") {
    f.insert(f.end(), {{"grid_side", FieldType::kInt, 5},
                       {"features", FieldType::kInt, 5},
                       {"deg", FieldType::kInt, 1},
                       {"noise", FieldType::kDouble, 0.5}});
    sized(1000, 250, 10000);
  } else if (kind == "portfolio") {
    f.insert(f.end(), {{"assets", FieldType::kInt, 50},
                       {"features", FieldType::kInt, 5},
                       {"deg", FieldType::kInt, 1},
                       {"noise", FieldType::kDouble, 1.0}});
    sized(1000, 250, 1000);
  } else if (kind == "knapsack") {
    f.push_back({"capacity", FieldType::kInt, 60});
    energy();
  } else if (kind == "scheduling") {
    f.insert(f.end(), {{"machines", FieldType::kInt, 2},
                       {"tasks", FieldType::kInt, 5},
                       {"slots", FieldType::kInt, 12},
                       {"resources", FieldType::kInt, 1}});
    energy();
  } else if (kind == "matching") {
    f.insert(f.end(), {{"nodes", FieldType::kInt, 10},
                       {"feature_dim", FieldType::kInt, 16},
                       {"rho1", FieldType::kDouble, 0.25},
                       {"rho2", FieldType::kDouble, 0.25}});
    sized(100, 25, 50);
  } else if (kind == "topk") {
    f.insert(f.end(), {{"n", FieldType::kInt, 25}, {"k", FieldType::kInt, 5}});
    sized(1000, 250, 1000);
  } else {
    std::string list;
    for (const auto& k : problem_kinds()) list += (list.empty() ? "" : ", ") + k;
    config_error("problem.kind", "unknown problem '" + kind + "' (expected one of " + list + ")");
  }
  return f;
}

const std::vector<Field>& method_fields() {
  static const std::vector<Field> f = {
      {"name", FieldType::kStringList, Json()},  {"grid", FieldType::kString, "none"},
      {"delta", FieldType::kDouble, Json()},     {"epsilon", FieldType::kDouble, Json()},
      {"kappa", FieldType::kInt, Json()},        {"tau", FieldType::kDouble, Json()},
      {"theta", FieldType::kDouble, Json()},     {"mu", FieldType::kDouble, Json()},
      {"mc_samples", FieldType::kInt, 16},       {"p_solve", FieldType::kDouble, 0.05},
      {"cost_difference", FieldType::kBool, false},
  };
  return f;
}

const std::vector<Field>& training_fields() {
  static const std::vector<Field> f = {
      {"epochs", FieldType::kInt, 20},
      {"patience", FieldType::kInt, 5},
      {"batch_size", FieldType::kInt, 1},
      {"lr", FieldType::kDouble, 0.01},
      {"model", FieldType::kString, ""},
      {"hidden", FieldType::kInt, 64},
      {"seeds", FieldType::kIntList, Json::array({0, 1, 2, 3, 4, 5, 6, 7, 8, 9})},
      {"tuning_seeds", FieldType::kIntList, Json()},
      {"eval_train", FieldType::kBool, true},
      {"scheduler", FieldType::kBool, true},
  };
  return f;
}

const std::vector<Field>& output_fields() {
  static const std::vector<Field> f = {
      {"dir", FieldType::kString, ""},
      {"timing", FieldType::kBool, false},
      {"checkpoints", FieldType::kBool, false},
  };
  return f;
}

GridMode grid_mode_from_string(const std::string& s) {
  if (s == "none") return GridMode::kNone;
  if (s == "lr") return GridMode::kLr;
  if (s == "full") return GridMode::kFull;
  config_error("method.grid", "expected none, lr or full");
}

std::vector<std::uint64_t> seed_list(const Json& v) {
  std::vector<std::uint64_t> out;
  for (const Json& e : v) out.push_back(e.get<std::uint64_t>());
  return out;
}

// Hyperparameters a method is tuned on (Table A1), which a config must give unless tuned by grid.
std::vector<std::string> tuned_hyperparams(Method m) {
  std::vector<std::string> out;
  for (const std::string& name : method_hyperparams(m))
    if (name != "p_solve" && name != "mc_samples") out.push_back(name);
  return out;
}

Json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    Json out = Json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    Json out = Json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (const auto* v = node.as_string()) return Json(v->get());
  if (const auto* v = node.as_integer()) return Json(v->get());
  if (const auto* v = node.as_floating_point()) return Json(v->get());
  if (const auto* v = node.as_boolean()) return Json(v->get());
  fail(ErrorCode::kConfigError, "config: date and time values are not supported");
}

// ---------------------------------------------------------------------------
// Problems

std::string join_setting(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += (out.empty() ? "" : ";") + k + "=" + v;
  return out;
}

int get_int(const Json& block, const char* key) { return block.at(key).get<int>(); }
double get_double(const Json& block, const char* key) { return block.at(key).get<double>(); }

std::size_t positive(const Json& block, const char* key) {
  const int v = get_int(block, key);
  if (v < 1) config_error(std::string("problem.") + key, "must be >= 1");
  return static_cast<std::size_t>(v);
}

Dataset slice(const Dataset& d, std::size_t from, std::size_t to, Split split) {
  Dataset out;
  out.split = split;
  out.instances.assign(d.instances.begin() + static_cast<std::ptrdiff_t>(from),
                       d.instances.begin() + static_cast<std::ptrdiff_t>(to));
  return out;
}

// Chronological train / validation / test split of day instances.
void split_days(const Dataset& days, const Json& p, ProblemSetup& s) {
  const std::size_t n_train = positive(p, "n_train"), n_val = positive(p, "n_validation");
  if (days.size() <= n_train + n_val)
    config_error("problem.n_days", "needs more days than n_train + n_validation");
  s.train = slice(days, 0, n_train, Split::kTrain);
  s.validation = slice(days, n_train, n_train + n_val, Split::kValidation);
  s.test = slice(days, n_train + n_val, days.size(), Split::kTest);
}

Dataset energy_days(const Json& p, RngStream& rng) {
  const std::string path = p.at("energy_csv").get<std::string>();
  if (!path.empty()) return load_energy_csv(path);
  return synthetic_energy_days(static_cast<int>(positive(p, "n_days")), rng);
}

std::string fmt(double v) { return format_number(v); }

}  // namespace

std::string to_string(GridMode g) {
  switch (g) {
    case GridMode::kNone: return "none";
    case GridMode::kLr: return "lr";
    case GridMode::kFull: return "full";
  }
  return "none";
}

void merge_json(Json& base, const Json& patch) {
  if (!base.is_object() || !patch.is_object()) {
    base = patch;
    return;
  }
  for (const auto& [k, v] : patch.items()) {
    if (base.contains(k) && base[k].is_object() && v.is_object()) merge_json(base[k], v);
    else base[k] = v;
  }
}

Json parse_config_document(const std::string& text, const std::string& origin) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return Json::parse(text);
    } catch (const Json::parse_error& e) {
      fail(ErrorCode::kConfigError, origin + ": invalid JSON: " + e.what());
    }
  }
  try {
    return toml_to_json(toml::parse(text, origin));
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << origin << ":" << e.source().begin.line << ": " << e.description();
    fail(ErrorCode::kConfigError, os.str());
  }
}

ExperimentConfig parse_config_json(const Json& doc) {
  if (!doc.is_object()) config_error("config", "expected a table at the top level");
  for (const auto& [k, v] : doc.items())
    if (k != "problem" && k != "method" && k != "training" && k != "output") config_error(k, "unknown block");
  if (!doc.contains("problem")) config_error("problem", "missing block");
  if (!doc.contains("method")) config_error("method", "missing block");
  const Json& pin = doc.at("problem");
  if (!pin.is_object()) config_error("problem", "expected a table");
  if (!pin.contains("kind")) config_error("problem.kind", "required");
  if (!pin.at("kind").is_string()) config_error("problem.kind", "expected a string");

  ExperimentConfig cfg;
  cfg.problem_kind = pin.at("kind").get<std::string>();
  Json problem = check_block(pin, "problem", problem_fields(cfg.problem_kind));
  Json method = check_block(doc.at("method"), "method", method_fields());
  Json training = check_block(doc.value("training", Json::object()), "training", training_fields());
  Json output = check_block(doc.value("output", Json::object()), "output", output_fields());

  if (!method.contains("name")) config_error("method.name", "required");
  for (const Json& n : method.at("name")) {
    try {
      cfg.methods.push_back(method_from_string(n.get<std::string>()));
    } catch (const Error&) {
      config_error("method.name", "unknown method '" + n.get<std::string>() + "'");
    }
  }
  cfg.grid = grid_mode_from_string(method.at("grid").get<std::string>());

  StrategyConfig& s = cfg.strategy;
  if (method.contains("delta")) s.delta = method["delta"].get<double>();
  if (method.contains("epsilon")) s.epsilon = method["epsilon"].get<double>();
  if (method.contains("kappa")) s.kappa = method["kappa"].get<int>();
  if (method.contains("tau")) s.tau = method["tau"].get<double>();
  if (method.contains("theta")) s.theta = method["theta"].get<double>();
  if (method.contains("mu")) s.mu = method["mu"].get<double>();
  s.mc_samples = method["mc_samples"].get<int>();
  s.p_solve = method["p_solve"].get<double>();
  s.cost_difference = method["cost_difference"].get<bool>();

  const bool subset = cfg.problem_kind == "topk";
  for (Method m : cfg.methods) {
    if (cfg.grid != GridMode::kFull)
      for (const std::string& name : tuned_hyperparams(m))
        if (!method.contains(name)) config_error("method." + name, "required for " + to_string(m));
    StrategyConfig probe = s;
    probe.method = m;
    try {
      probe.validate();
    } catch (const Error& e) {
      const std::string what = e.what();
      const auto colon = what.find(": ");
      const std::string detail = colon == std::string::npos ? what : what.substr(colon + 2);
      config_error("method." + detail.substr(0, detail.find(' ')), detail);
    }
    if (subset && needs_true_cost(probe))
      config_error("method.name", to_string(m) + " needs true cost vectors, which subset selection does not provide");
    if (cfg.problem_kind == "portfolio" && m == Method::kQPTL)
      config_error("method.name", "QPTL needs a linear relaxation, which portfolio does not have");
  }

  TrainConfig& t = cfg.training;
  t.epochs = training["epochs"].get<int>();
  t.patience = training["patience"].get<int>();
  t.batch_size = training["batch_size"].get<int>();
  t.lr = training["lr"].get<double>();
  t.eval_train = training["eval_train"].get<bool>();
  t.use_scheduler = training["scheduler"].get<bool>();
  if (t.epochs < 0) config_error("training.epochs", "must be >= 0");
  if (t.batch_size < 1) config_error("training.batch_size", "must be >= 1");
  if (!(t.lr >= 0.0)) config_error("training.lr", "must be >= 0");
  cfg.model = training["model"].get<std::string>();
  if (!cfg.model.empty() && cfg.model != "linear" && cfg.model != "mlp")
    config_error("training.model", "expected linear or mlp");
  if (training["hidden"].get<int>() < 1) config_error("training.hidden", "must be >= 1");
  cfg.hidden = training["hidden"].get<std::size_t>();
  cfg.seeds = seed_list(training["seeds"]);
  if (!training.contains("tuning_seeds")) training["tuning_seeds"] = training["seeds"];
  cfg.tuning_seeds = seed_list(training["tuning_seeds"]);

  cfg.output_dir = output["dir"].get<std::string>();
  cfg.timing = output["timing"].get<bool>();
  cfg.checkpoints = output["checkpoints"].get<bool>();

  cfg.resolved = Json{{"problem", problem}, {"method", method}, {"training", training}, {"output", output}};
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text) { return parse_config_json(parse_config_document(text)); }

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfigError, path.string() + ": cannot read config file");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config_json(parse_config_document(os.str(), path.string()));
}

std::string serialize_config(const ExperimentConfig& config) { return config.resolved.dump(2) + "\n"; }

std::vector<std::string> preset_names() {
  return {"shortest_path_deg1", "shortest_path_deg2", "shortest_path_deg4", "shortest_path_deg6",
          "shortest_path_deg8", "portfolio_deg1",     "portfolio_deg4",     "portfolio_deg8",
          "knapsack_60",        "knapsack_120",       "knapsack_180",       "scheduling_desk",
          "matching_10",        "matching_25",        "matching_50",        "topk_25"};
}

Json preset_config(const std::string& name) {
  auto all_for = [](const std::string& kind) {
    Json names = Json::array();
    for (Method m : all_methods()) {
      StrategyConfig probe;
      probe.method = m;
      if (kind == "topk" && needs_true_cost(probe)) continue;
      if (kind == "portfolio" && m == Method::kQPTL) continue;
      names.push_back(to_string(m));
    }
    return names;
  };
  auto make = [&](Json problem) {
    const std::string kind = problem.at("kind").get<std::string>();
    return Json{{"problem", std::move(problem)}, {"method", {{"name", all_for(kind)}, {"grid", "full"}}}};
  };
  for (int deg : {1, 2, 4, 6, 8})
    if (name == "shortest_path_deg" + std::to_string(deg))
      return make({{"kind", "shortest_path"}, {"deg", deg}, {"noise", 0.5}, {"n_train", 1000}, {"n_test", 10000}});
  for (int deg : {1, 4, 8})
    if (name == "portfolio_deg" + std::to_string(deg))
      return make({{"kind", "portfolio"}, {"deg", deg}, {"noise", 1.0}, {"n_train", 1000}});
  for (int cap : kReproductionCapacities)
    if (name == "knapsack_" + std::to_string(cap)) return make({{"kind", "knapsack"}, {"capacity", cap}});
  if (name == "scheduling_desk") return make({{"kind", "scheduling"}, {"machines", 2}, {"tasks", 5}, {"slots", 12}});
  for (int rho : {10, 25, 50})
    if (name == "matching_" + std::to_string(rho))
      return make({{"kind", "matching"}, {"rho1", rho / 100.0}, {"rho2", rho / 100.0}});
  if (name == "topk_25") return make({{"kind", "topk"}, {"n", 25}, {"k", 5}});
  fail(ErrorCode::kConfigError, "preset: unknown preset '" + name + "'");
}

ProblemSetup build_problem(const ExperimentConfig& config) {
  const Json& p = config.resolved.at("problem");
  ProblemSetup s;
  s.kind = config.problem_kind;
  RngStream rng(static_cast<std::uint64_t>(get_int(p, "data_seed")), kDataStream);
  ModelKind default_kind = ModelKind::kLinear;

  if (s.kind == "shortest_path") {
    const GridSpec grid{static_cast<int>(positive(p, "grid_side"))};
    const std::size_t feats = positive(p, "features");
    const double noise = get_double(p, "noise");
    const int deg = static_cast<int>(positive(p, "deg"));
    const auto truth = make_shortest_path_truth(grid, feats, deg, noise, rng);
    s.train = sample_shortest_path(truth, positive(p, "n_train"), rng, Split::kTrain);
    s.validation = sample_shortest_path(truth, positive(p, "n_validation"), rng, Split::kValidation);
    s.test = sample_shortest_path(truth, positive(p, "n_test"), rng, Split::kTest);
    s.oracle = make_shortest_path_oracle(grid);
    s.model = {ModelKind::kLinear, feats, grid.edge_count()};
    s.instance_setting = join_setting({{"grid", std::to_string(grid.grid_side)}, {"deg", std::to_string(deg)},
                                       {"noise", fmt(noise)}});
    s.meta = {{"grid_side", grid.grid_side}};
  } else if (s.kind == "portfolio") {
    const std::size_t assets = positive(p, "assets"), feats = positive(p, "features");
    const int deg = static_cast<int>(positive(p, "deg"));
    const double noise = get_double(p, "noise");
    const PortfolioTruth truth = make_portfolio_truth(assets, feats, deg, noise, rng);
    s.train = sample_portfolio(truth, positive(p, "n_train"), rng, Split::kTrain);
    s.validation = sample_portfolio(truth, positive(p, "n_validation"), rng, Split::kValidation);
    s.test = sample_portfolio(truth, positive(p, "n_test"), rng, Split::kTest);
    s.oracle = make_portfolio_oracle(truth.spec);
    s.model = {ModelKind::kLinear, feats, assets};
    s.monitor = Metric::kAbsoluteRegret;
    s.instance_setting = join_setting({{"assets", std::to_string(assets)}, {"deg", std::to_string(deg)},
                                       {"noise", fmt(noise)}});
    s.meta = {{"gamma", truth.spec.gamma}, {"sigma", truth.spec.sigma.values()}, {"degenerate", truth.spec.degenerate}};
  } else if (s.kind == "knapsack") {
    const Dataset days = energy_days(p, rng);
    ProblemSetup parts;
    split_days(days, p, parts);
    const int capacity = static_cast<int>(positive(p, "capacity"));
    auto [train, spec] = gen_knapsack_data(parts.train, capacity, rng);
    s.train = std::move(train);
    s.validation = knapsack_from_prices(parts.validation, spec, rng);
    s.test = knapsack_from_prices(parts.test, spec, rng);
    s.validation.split = Split::kValidation;
    s.test.split = Split::kTest;
    s.oracle = make_knapsack_oracle(spec);
    s.model = {ModelKind::kLinear, static_cast<std::size_t>(kEnergyFeatures), 1, true};
    s.instance_setting = join_setting({{"capacity", std::to_string(capacity)}});
    s.meta = {{"weights", spec.weights}, {"capacity", spec.capacity}};
  } else if (s.kind == "scheduling") {
    const int slots = static_cast<int>(positive(p, "slots"));
    if (kSlotsPerDay % slots != 0) config_error("problem.slots", "must divide 48");
    const Dataset days = aggregate_slots(energy_days(p, rng), slots);
    split_days(days, p, s);
    const int machines = static_cast<int>(positive(p, "machines")), tasks = static_cast<int>(positive(p, "tasks"));
    const SchedulingSpec spec =
        gen_scheduling_instance(machines, tasks, slots, rng, static_cast<int>(positive(p, "resources")));
    s.oracle = make_scheduling_oracle(spec);
    s.model = {ModelKind::kLinear, static_cast<std::size_t>(kEnergyFeatures), 1, true};
    s.instance_setting = join_setting(
        {{"machines", std::to_string(machines)}, {"tasks", std::to_string(tasks)}, {"slots", std::to_string(slots)}});
    Json jt = Json::array();
    for (const SchedulingTask& t : spec.tasks)
      jt.push_back({{"duration", t.duration}, {"earliest_start", t.earliest_start}, {"latest_end", t.latest_end},
                    {"power", t.power}, {"usage", t.usage}});
    s.meta = {{"machines", spec.machines}, {"slots", spec.slots}, {"tasks", jt}, {"capacity", spec.capacity.values()}};
  } else if (s.kind == "matching") {
    const int nodes = static_cast<int>(positive(p, "nodes"));
    const std::size_t fdim = positive(p, "feature_dim");
    const double rho1 = get_double(p, "rho1"), rho2 = get_double(p, "rho2");
    const std::size_t n_train = positive(p, "n_train"), n_val = positive(p, "n_validation"),
                      n_test = positive(p, "n_test");
    auto [all, spec] = gen_matching_data(nodes, fdim, rho1, rho2, n_train + n_val + n_test, rng);
    s.train = slice(all, 0, n_train, Split::kTrain);
    s.validation = slice(all, n_train, n_train + n_val, Split::kValidation);
    s.test = slice(all, n_train + n_val, all.size(), Split::kTest);
    s.oracle = make_matching_oracle(spec);
    default_kind = ModelKind::kMlp;
    s.model = {ModelKind::kMlp, 2 * fdim, 1, true, config.hidden, true};
    s.instance_setting =
        join_setting({{"nodes", std::to_string(nodes)}, {"rho1", fmt(rho1)}, {"rho2", fmt(rho2)}});
    Json same = Json::array();
    for (auto v : spec.same_field) same.push_back(static_cast<int>(v));
    s.meta = {{"nodes_per_side", spec.nodes_per_side}, {"same_field", same}, {"rho1", rho1}, {"rho2", rho2}};
  } else if (s.kind == "topk") {
    const int n = static_cast<int>(positive(p, "n")), k = static_cast<int>(positive(p, "k"));
    auto [train, spec] = gen_topk_data(n, k, positive(p, "n_train"), rng);
    s.train = std::move(train);
    s.validation = sample_topk(spec, positive(p, "n_validation"), rng, Split::kValidation);
    s.test = sample_topk(spec, positive(p, "n_test"), rng, Split::kTest);
    s.oracle = make_topk_oracle(spec);
    s.model = {ModelKind::kLinear, static_cast<std::size_t>(n), static_cast<std::size_t>(n)};
    s.task = TaskLoss::kNegInnerProduct;
    s.monitor = Metric::kMismatch;
    s.instance_setting = join_setting({{"n", std::to_string(n)}, {"k", std::to_string(k)}});
    s.meta = {{"n", n}, {"k", k}};
  }
  if (s.kind == "knapsack" || s.kind == "scheduling")
    standardize_features(s.train, {&s.train, &s.validation, &s.test});

  if (!config.model.empty()) s.model.kind = model_kind_from_string(config.model);
  else s.model.kind = default_kind;
  s.model.hidden = config.hidden;
  for (Dataset* d : {&s.train, &s.validation, &s.test}) attach_solutions(*d, *s.oracle);
  s.meta["kind"] = s.kind;
  s.meta["instance_setting"] = s.instance_setting;
  return s;
}

// ---------------------------------------------------------------------------
// Results

const char* const kResultsCsvHeader =
    "problem,instance_setting,method,hyperparams,seed,split,epoch,relative_regret,absolute_regret,mse,mismatch,"
    "solver_calls,epoch_time_ms";

std::string format_number(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string to_csv(const std::vector<ResultRow>& rows) {
  std::string out = std::string(kResultsCsvHeader) + "\n";
  for (const ResultRow& r : rows) {
    out += r.problem + "," + r.instance_setting + "," + r.method + "," + r.hyperparams + "," + std::to_string(r.seed) +
           "," + to_string(r.split) + "," + std::to_string(r.epoch) + "," + format_number(r.relative_regret) + "," +
           format_number(r.absolute_regret) + "," + format_number(r.mse) + "," + format_number(r.mismatch) + "," +
           std::to_string(r.solver_calls) + "," + format_number(r.epoch_time_ms) + "\n";
  }
  return out;
}

std::vector<ResultRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kResultsCsvHeader)
    fail(ErrorCode::kIngestError, "results CSV: unexpected header");
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  auto num = [](const std::string& s) { return s.empty() ? kNaN : std::stod(s); };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 13) fail(ErrorCode::kIngestError, "results CSV line " + std::to_string(line_no) + ": expected 13 fields");
    try {
      ResultRow r;
      r.problem = f[0];
      r.instance_setting = f[1];
      r.method = f[2];
      r.hyperparams = f[3];
      r.seed = std::stoull(f[4]);
      r.split = split_from_string(f[5]);
      r.epoch = std::stoi(f[6]);
      r.relative_regret = num(f[7]);
      r.absolute_regret = num(f[8]);
      r.mse = num(f[9]);
      r.mismatch = num(f[10]);
      r.solver_calls = std::stoull(f[11]);
      r.epoch_time_ms = num(f[12]);
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      fail(ErrorCode::kIngestError, "results CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

SummaryStats summarize(std::vector<double> values) {
  require(!values.empty(), ErrorCode::kEmptyInput, "summary: no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  auto quantile = [&](double q) {
    const double h = q * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  SummaryStats s;
  s.n = n;
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  return s;
}

Json emit_summary(const std::vector<ResultRow>& rows) {
  struct Run {
    std::map<int, const ResultRow*> test, validation;
  };
  struct Group {
    std::string problem, setting, method;
    std::vector<std::string> run_keys;
    std::map<std::string, Run> runs;
  };
  std::vector<Group> groups;
  for (const ResultRow& r : rows) {
    if (r.split == Split::kTrain) continue;
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.problem == r.problem && g.setting == r.instance_setting && g.method == r.method;
    });
    if (it == groups.end()) {
      groups.push_back({r.problem, r.instance_setting, r.method, {}, {}});
      it = groups.end() - 1;
    }
    const std::string key = r.hyperparams + "|" + std::to_string(r.seed);
    auto [run, inserted] = it->runs.try_emplace(key);
    if (inserted) it->run_keys.push_back(key);
    (r.split == Split::kTest ? run->second.test : run->second.validation)[r.epoch] = &r;
  }
  std::erase_if(groups, [](Group& g) {
    std::erase_if(g.runs, [](const auto& kv) { return kv.second.test.empty(); });
    std::erase_if(g.run_keys, [&](const std::string& k) { return !g.runs.contains(k); });
    return g.runs.empty();
  });
  require(!groups.empty(), ErrorCode::kEmptyInput, "summary: no test rows");
  Json out = {{"quantiles", "linear"},
              {"statistic", "test metric at the best validation epoch, across seeds"},
              {"groups", Json::array()}};
  for (const Group& g : groups) {
    const ResultRow& first = *g.runs.at(g.run_keys.front()).test.rbegin()->second;
    std::string metric = "relative_regret";
    double ResultRow::*field = &ResultRow::relative_regret;
    if (!std::isfinite(first.relative_regret)) {
      metric = std::isfinite(first.absolute_regret) ? "absolute_regret" : "mismatch";
      field = std::isfinite(first.absolute_regret) ? &ResultRow::absolute_regret : &ResultRow::mismatch;
    }
    std::vector<double> values;
    for (const std::string& key : g.run_keys) {
      const Run& run = g.runs.at(key);
      // Earliest epoch with the lowest validation value; the last test epoch without validation rows.
      int epoch = run.test.rbegin()->first;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& [e, row] : run.validation)
        if (row->*field < best && run.test.contains(e)) {
          best = row->*field;
          epoch = e;
        }
      values.push_back(run.test.at(epoch)->*field);
    }
    const SummaryStats s = summarize(values);
    out["groups"].push_back({{"problem", g.problem},
                             {"instance_setting", g.setting},
                             {"method", g.method},
                             {"metric", metric},
                             {"n", s.n},
                             {"min", s.min},
                             {"q1", s.q1},
                             {"median", s.median},
                             {"q3", s.q3},
                             {"max", s.max},
                             {"mean", s.mean},
                             {"stddev", s.stddev},
                             {"values", values}});
  }
  return out;
}

std::string hyperparam_string(const TrainConfig& cfg) {
  std::string out = "lr=" + format_number(cfg.lr);
  const StrategyConfig& s = cfg.strategy;
  for (const std::string& name : method_hyperparams(s.method)) {
    double v = 0.0;
    if (name == "delta") v = s.delta;
    else if (name == "epsilon") v = s.epsilon;
    else if (name == "kappa") v = s.kappa;
    else if (name == "tau") v = s.tau;
    else if (name == "theta") v = s.theta;
    else if (name == "mu") v = s.mu;
    else if (name == "mc_samples") v = s.mc_samples;
    else if (name == "p_solve") v = s.p_solve;
    out += ";" + name + "=" + format_number(v);
  }
  if ((s.method == Method::kNCE || s.method == Method::kMAP) && s.cost_difference) out += ";cost_difference=1";
  return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

std::vector<ResultRow> report_rows(const ProblemSetup& setup, const TrainConfig& cfg, const RegretReport& report,
                                   bool timing) {
  std::vector<ResultRow> rows;
  for (const EpochRow& e : report.rows) {
    ResultRow r;
    r.problem = setup.kind;
    r.instance_setting = setup.instance_setting;
    r.method = to_string(cfg.strategy.method);
    r.hyperparams = hyperparam_string(cfg);
    r.seed = cfg.seed;
    r.split = e.split;
    r.epoch = e.epoch;
    r.relative_regret = e.metrics.relative_regret;
    r.absolute_regret = e.metrics.absolute_regret;
    r.mse = e.metrics.mse;
    r.mismatch = e.metrics.mismatch;
    r.solver_calls = e.solver_calls;
    r.epoch_time_ms = timing ? e.epoch_time_ms : kNaN;
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& opts) {
  const ProblemSetup setup = build_problem(config);
  const std::filesystem::path out_dir = config.output_dir;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file(out_dir / "resolved_config.json", serialize_config(config));
    if (config.checkpoints) std::filesystem::create_directories(out_dir / "checkpoints");
  }
  const TrainData data{&setup.train, &setup.validation, &setup.test};
  const TrainData tuning_data{&setup.train, &setup.validation, nullptr};
  auto init_model = [&](std::uint64_t seed) {
    RngStream rng(seed, kModelStream);
    return PredictorModel::init(setup.model, rng);
  };

  ExperimentResult result;
  result.grid = Json::object();
  std::string timing_csv = "problem,method,hyperparams,seed,epoch,epoch_time_ms\n";
  std::string grid_csv = "problem,method,cell,params,mean_validation,failed,error\n";
  for (Method m : config.methods) {
    TrainConfig base = config.training;
    base.strategy = config.strategy;
    base.strategy.method = m;
    base.task = setup.task;
    base.monitor = setup.monitor;

    GridMode mode = config.grid;
    if (opts.force_grid && mode == GridMode::kNone) mode = GridMode::kFull;
    if (mode != GridMode::kNone) {
      const std::vector<GridAxis> axes =
          mode == GridMode::kLr ? std::vector<GridAxis>{{"lr", table_a1_values("lr")}} : table_a1_grid(m);
      TrainConfig tb = base;
      tb.eval_test = false;
      tb.eval_train = false;
      const GridResult g = grid_search(
          tb, axes, config.tuning_seeds,
          [&](const TrainConfig& cfg) {
            PredictorModel model = init_model(cfg.seed);
            return train(tuning_data, *setup.oracle, model, cfg);
          },
          opts.parallel);
      Json cells = Json::array();
      for (const GridCell& c : g.cells) {
        Json params = Json::object();
        std::string ptext;
        for (const auto& [k, v] : c.params) {
          params[k] = v;
          ptext += (ptext.empty() ? "" : ";") + k + "=" + format_number(v);
        }
        cells.push_back({{"cell", c.index},
                         {"params", params},
                         {"mean_validation", c.failed ? Json() : Json(c.mean_validation)},
                         {"failed", c.failed},
                         {"error", c.error}});
        std::string err = c.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        grid_csv += setup.kind + "," + to_string(m) + "," + std::to_string(c.index) + "," + ptext + "," +
                    (c.failed ? "" : format_number(c.mean_validation)) + "," + (c.failed ? "1" : "0") + "," + err +
                    "\n";
      }
      result.grid[to_string(m)] = {{"best_cell", g.best_cell}, {"metric", to_string(setup.monitor)}, {"cells", cells}};
      for (const auto& [k, v] : g.cells[g.best_cell].params) set_hyperparam(base, k, v);
    }

    std::vector<RegretReport> reports(config.seeds.size());
    std::vector<PredictorModel> models(config.seeds.size());
    parallel_for(config.seeds.size(), opts.parallel, [&](std::size_t i) {
      TrainConfig cfg = base;
      cfg.seed = config.seeds[i];
      models[i] = init_model(cfg.seed);
      reports[i] = train(data, *setup.oracle, models[i], cfg);
    });
    for (std::size_t i = 0; i < config.seeds.size(); ++i) {
      TrainConfig cfg = base;
      cfg.seed = config.seeds[i];
      std::vector<ResultRow> rows = report_rows(setup, cfg, reports[i], config.timing);
      for (const EpochRow& e : reports[i].rows)
        if (e.split == Split::kTrain || (!cfg.eval_train && e.split == Split::kValidation))
          timing_csv += setup.kind + "," + to_string(m) + "," + hyperparam_string(cfg) + "," +
                        std::to_string(cfg.seed) + "," + std::to_string(e.epoch) + "," +
                        format_number(e.epoch_time_ms) + "\n";
      result.rows.insert(result.rows.end(), rows.begin(), rows.end());
      if (!out_dir.empty() && config.checkpoints)
        save_checkpoint(out_dir / "checkpoints" / (to_string(m) + "_seed" + std::to_string(cfg.seed) + ".model"),
                        models[i]);
    }
  }
  result.summary = emit_summary(result.rows);
  if (!out_dir.empty()) {
    write_file(out_dir / "results.csv", to_csv(result.rows));
    write_file(out_dir / "summary.json", result.summary.dump(2) + "\n");
    write_file(out_dir / "timing.csv", timing_csv);
    if (!result.grid.empty()) {
      write_file(out_dir / "grid.csv", grid_csv);
      write_file(out_dir / "grid.json", result.grid.dump(2) + "\n");
    }
  }
  return result;
}

Json error_record(const std::exception& e) {
  Json rec = {{"status", "error"}, {"message", e.what()}};
  if (const auto* err = dynamic_cast<const Error*>(&e)) rec["code"] = std::string(to_string(err->code()));
  else rec["code"] = "Internal";
  return rec;
}

}  // namespace dflbench
