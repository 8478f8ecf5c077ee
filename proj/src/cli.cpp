#include "gcm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>

#include "CLI11.hpp"
#include "gcm/attribution.hpp"
#include "gcm/data.hpp"
#include "gcm/discovery.hpp"
#include "gcm/error.hpp"
#include "gcm/graph.hpp"
#include "gcm/model.hpp"
#include "gcm/sampling.hpp"
#include "gcm/stats.hpp"
#include "gcm/validation.hpp"

namespace gcm::cli {

namespace {

struct Options {
  std::string graph;
  std::string model;
  std::string data;
  std::string old_data;
  std::string new_data;
  std::string target;
  std::string parent;
  std::string treatment;
  std::string value_a;
  std::string value_b;
  std::string measure = "auto";
  std::string method = "auto";
  std::string x;
  std::string y;
  std::string out;
  std::vector<std::string> given;
  std::vector<std::string> sets;
  std::vector<std::string> shifts;
  std::size_t n = 0;
  std::size_t row = 0;
  std::size_t outer = 100;
  std::size_t inner = 500;
  std::size_t permutations = 0;
  std::size_t max_cond = kDefaultMaxConditioningSize;
  std::uint64_t seed = 0;
  double alpha = 0.05;
};

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// Wraps input errors with the file they came from.
template <typename F>
auto from_file(const std::string& what, const std::string& path, F&& parse) {
  const std::string text = read_file(path);
  try {
    return parse(text);
  } catch (const Error& e) {
    throw Error(e.code(), what + " '" + path + "': " + e.what());
  }
}

CausalGraph load_graph(const std::string& path) {
  return from_file("graph", path, [&](const std::string& text) {
    return parse_graph(text, graph_format_for_path(path));
  });
}

Dataset load_data(const std::string& path) {
  return from_file("data", path, [](const std::string& text) { return read_csv(text); });
}

GcmModel load_model_file(const std::string& path) {
  return from_file("model", path, [](const std::string& text) { return load_model(text); });
}

void require_finite(double value, const std::string& what) {
  if (!std::isfinite(value)) throw Error(ErrorCode::kNonFinite, what + " is not finite");
}

Json envelope(const std::string& command, const Options& opt) {
  Json j;
  j["schema_version"] = kModelSchemaVersion;
  j["command"] = command;
  j["seed"] = opt.seed;
  return j;
}

Json column_json(const Column& col) {
  if (col.is_continuous()) return Json(col.reals());
  return Json(col.labels());
}

Json columns_json(const Dataset& data) {
  Json j = Json::object();
  for (const auto& col : data.columns()) j[col.name] = column_json(col);
  return j;
}

// "NODE=VALUE" split at the first '='.
std::pair<std::string, std::string> split_assignment(const std::string& text, const char* flag) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::kInvalidArgument, std::string(flag) + " expects NODE=VALUE, got '" + text + "'");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

// Real if the text parses as one, else a category; checked against the node.
Cell parse_value(const GcmModel& model, const std::string& node, const std::string& text) {
  const bool continuous = model.is_continuous_node(model.graph().index_of(node));
  double real = 0.0;
  if (parse_real(text, real)) {
    if (continuous) return real;
    return text;
  }
  if (continuous) {
    throw Error(ErrorCode::kTypeMismatch, "node '" + node + "' is continuous; '" + text + "' is not a real");
  }
  return text;
}

std::vector<Intervention> parse_interventions(const GcmModel& model, const Options& opt) {
  std::vector<Intervention> out;
  for (const auto& s : opt.sets) {
    auto [node, value] = split_assignment(s, "--set");
    Cell cell = parse_value(model, node, value);
    out.push_back(Intervention::atomic(node, std::move(cell)));
  }
  for (const auto& s : opt.shifts) {
    auto [node, value] = split_assignment(s, "--shift");
    double delta = 0.0;
    if (!parse_real(value, delta)) {
      throw Error(ErrorCode::kInvalidArgument, "--shift needs a real delta, got '" + value + "'");
    }
    out.push_back(Intervention::shift(node, delta));
  }
  return out;
}

Json interventions_json(const Options& opt) {
  Json j = Json::object();
  j["set"] = opt.sets;
  j["shift"] = opt.shifts;
  return j;
}

ShapleyConfig shapley_config(const Options& opt) {
  ShapleyConfig config;
  config.seed = derive_seed(opt.seed, "shapley");
  if (opt.permutations > 0) {
    config.method = ShapleyMethod::kPermutation;
    config.num_permutations = opt.permutations;
  }
  return config;
}

Json attribution_json(const std::string& command, const Options& opt, const AttributionResult& r) {
  for (std::size_t i = 0; i < r.scores.size(); ++i) require_finite(r.scores[i], "score of " + r.players[i]);
  Json j = envelope(command, opt);
  j["target"] = opt.target;
  const Json body = to_json(r);
  for (const auto& [key, value] : body.items()) {
    if (key != "seed") j[key] = value;
  }
  return j;
}

// Mean and spread of a continuous column, or category frequencies.
Json summary_json(const Column& col) {
  Json j;
  if (col.is_continuous()) {
    j["mean"] = mean(col.reals());
    j["std"] = std::sqrt(variance(col.reals()));
    return j;
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& label : col.labels()) ++counts[label];
  Json freq = Json::object();
  for (const auto& [label, count] : counts) {
    freq[label] = static_cast<double>(count) / static_cast<double>(col.size());
  }
  j["frequencies"] = std::move(freq);
  return j;
}

// ---------------------------------------------------------------------------
// Commands. Each returns the text written to stdout or --out.

using Handler = std::function<std::string(const Options&)>;

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string cmd_fit(const Options& opt) {
  const CausalGraph graph = load_graph(opt.graph);
  const Dataset data = load_data(opt.data);
  return save_model(fit(auto_assign(graph, data), data)) + "\n";
}

std::string cmd_sample(const Options& opt) {
  const GcmModel model = load_model_file(opt.model);
  const Dataset samples = draw_samples(model, opt.n, opt.seed);
  if (ends_with(opt.out, ".csv")) return write_csv(samples);
  Json j = envelope("sample", opt);
  j["n"] = opt.n;
  j["columns"] = columns_json(samples);
  return dump(j);
}

std::string cmd_intervene(const Options& opt) {
  const GcmModel model = load_model_file(opt.model);
  const auto interventions = parse_interventions(model, opt);
  const Dataset samples = interventional_samples(model, interventions, opt.n, opt.seed);
  Json j = envelope("intervene", opt);
  j["n"] = opt.n;
  j["interventions"] = interventions_json(opt);
  if (!opt.target.empty()) {
    j["target"] = opt.target;
    j.update(summary_json(samples.column(opt.target)));
    if (j.contains("mean")) require_finite(j["mean"].get<double>(), "mean");
  } else {
    Json nodes = Json::object();
    for (const auto& col : samples.columns()) nodes[col.name] = summary_json(col);
    j["nodes"] = std::move(nodes);
  }
  return dump(j);
}

std::string cmd_counterfactual(const Options& opt) {
  const GcmModel model = load_model_file(opt.model);
  const Dataset observed = load_data(opt.data);
  const auto interventions = parse_interventions(model, opt);
  const Dataset cf = counterfactual(model, observed, interventions);
  if (ends_with(opt.out, ".csv")) return write_csv(cf);
  Json j = envelope("counterfactual", opt);
  j["interventions"] = interventions_json(opt);
  j["rows"] = cf.num_rows();
  j["columns"] = columns_json(cf);
  return dump(j);
}

std::string cmd_ace(const Options& opt) {
  const GcmModel model = load_model_file(opt.model);
  const Cell a = parse_value(model, opt.treatment, opt.value_a);
  const Cell b = parse_value(model, opt.treatment, opt.value_b);
  const double ace = average_causal_effect(model, opt.treatment, a, b, opt.target, opt.n, opt.seed);
  require_finite(ace, "average causal effect");
  Json j = envelope("ace", opt);
  j["treatment"] = opt.treatment;
  j["value_a"] = opt.value_a;
  j["value_b"] = opt.value_b;
  j["target"] = opt.target;
  j["n"] = opt.n;
  j["ace"] = ace;
  return dump(j);
}

std::string cmd_attribute_outlier(const Options& opt) {
  const GcmModel model = load_model_file(opt.model);
  const Dataset data = load_data(opt.data);
  if (opt.row >= data.num_rows()) {
    throw Error(ErrorCode::kInvalidArgument, "--row " + std::to_string(opt.row) + " is out of range");
  }
  const std::vector<std::size_t> rows{opt.row};
  AnomalyConfig config;
  config.shapley = shapley_config(opt);
  config.num_samples = opt.n;
  const auto result = attribute_anomaly(model, opt.target, data.take_rows(rows), config, opt.seed);
  Json j = attribution_json("attribute-outlier", opt, result);
  j["row"] = opt.row;
  return dump(j);
}

ChangeMeasure parse_change_measure(const std::string& s) {
  if (s == "auto") return ChangeMeasure::kAuto;
  if (s == "mean_diff") return ChangeMeasure::kMeanDiff;
  return ChangeMeasure::kKl;
}

std::string cmd_attribute_change(const Options& opt) {
  const CausalGraph graph = load_graph(opt.graph);
  const Dataset old_data = load_data(opt.old_data);
  const Dataset new_data = load_data(opt.new_data);
  ChangeConfig config;
  config.shapley = shapley_config(opt);
  config.num_samples = opt.n;
  const auto result = distribution_change(graph, old_data, new_data, opt.target,
                                          parse_change_measure(opt.measure), config, opt.seed);
  return dump(attribution_json("attribute-change", opt, result));
}

std::string cmd_icc(const Options& opt) {
  const GcmModel model = load_model_file(opt.model);
  InfluenceConfig config;
  config.shapley = shapley_config(opt);
  config.outer_samples = opt.outer;
  config.inner_samples = opt.inner;
  return dump(attribution_json("icc", opt, intrinsic_influence(model, opt.target, config, opt.seed)));
}

std::string cmd_arrow_strength(const Options& opt) {
  const GcmModel model = load_model_file(opt.model);
  const CausalGraph& g = model.graph();
  const ArrowMeasure measure = opt.measure == "auto"          ? ArrowMeasure::kAuto
                               : opt.measure == "coupled_msd" ? ArrowMeasure::kCoupledMsd
                                                              : ArrowMeasure::kKl;
  std::vector<std::string> parents = g.parents(opt.target);
  if (!opt.parent.empty()) {
    if (!g.has_edge(opt.parent, opt.target)) {
      throw Error(ErrorCode::kUnknownNode, "no edge " + opt.parent + " -> " + opt.target);
    }
    parents = {opt.parent};
  }
  Json strengths = Json::object();
  for (const auto& p : parents) {
    const double s = arrow_strength(model, p, opt.target, measure, opt.n, derive_seed(opt.seed, p));
    require_finite(s, "arrow strength " + p + " -> " + opt.target);
    strengths[p + " -> " + opt.target] = s;
  }
  Json j = envelope("arrow-strength", opt);
  j["target"] = opt.target;
  j["measure"] = arrow_measure_name(measure, model.is_continuous_node(g.index_of(opt.target)));
  j["n"] = opt.n;
  j["scores"] = std::move(strengths);
  return dump(j);
}

std::string cmd_discover(const Options& opt) {
  const Cpdag cpdag = pc(load_data(opt.data), opt.alpha, opt.max_cond);
  if (ends_with(opt.out, ".dot") || ends_with(opt.out, ".gv")) return to_dot(cpdag);
  Json j = envelope("discover", opt);
  j["alpha"] = opt.alpha;
  j["max_cond_set_size"] = opt.max_cond;
  j.update(to_json(cpdag));
  return dump(j);
}

std::string cmd_refute(const Options& opt) {
  const CausalGraph graph = load_graph(opt.graph);
  const Dataset data = load_data(opt.data);
  Json j = envelope("refute", opt);
  j.update(to_json(refute_graph(graph, data, opt.alpha)));
  return dump(j);
}

std::string cmd_evaluate(const Options& opt) {
  const GcmModel model = load_model_file(opt.model);
  const Dataset data = load_data(opt.data);
  Json j = envelope("evaluate", opt);
  j.update(to_json(evaluate_mechanisms(model, data, opt.seed)));
  return dump(j);
}

std::string cmd_test(const Options& opt) {
  const Dataset data = load_data(opt.data);
  std::string method = opt.method;
  if (method == "auto") method = opt.given.empty() ? "dcor" : "fisher_z";
  TestResult result;
  if (method == "dcor") {
    if (!opt.given.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "the dcor test is unconditional; drop --given or use fisher_z");
    }
    const std::size_t b = opt.permutations == 0 ? kDefaultPermutations : opt.permutations;
    result = pairwise_independence_test(data.column(opt.x), data.column(opt.y), b, opt.seed);
  } else {
    result = fisher_z_test(data, opt.x, opt.y, opt.given);
  }
  require_finite(result.statistic, "test statistic");
  Json j = envelope("test", opt);
  j["x"] = opt.x;
  j["y"] = opt.y;
  j["given"] = opt.given;
  j["method"] = result.method;
  j["statistic"] = result.statistic;
  j["p_value"] = result.p_value;
  if (method == "dcor") j["permutations"] = result.num_permutations;
  return dump(j);
}

struct Command {
  const char* name;
  const char* description;
  Handler handler;
  std::function<void(CLI::App&, Options&)> bind;
};

void bind_model(CLI::App& c, Options& o) { c.add_option("--model", o.model, "fitted model JSON")->required(); }
void bind_data(CLI::App& c, Options& o) { c.add_option("--data", o.data, "CSV data")->required(); }
void bind_graph(CLI::App& c, Options& o) { c.add_option("--graph", o.graph, "graph (.json or .dot)")->required(); }
void bind_target(CLI::App& c, Options& o, bool required) {
  auto* opt = c.add_option("--target", o.target, "target node");
  if (required) opt->required();
}
// Subcommands share one Options, so the default is applied after parsing.
void bind_n(CLI::App& c, Options& o, std::size_t fallback, const char* what) {
  c.add_option("-n", o.n, what)->default_str(std::to_string(fallback))->check(CLI::PositiveNumber);
}
void bind_permutations(CLI::App& c, Options& o) {
  c.add_option("--permutations", o.permutations, "Shapley permutations (0: exact)")->capture_default_str();
}
const CLI::Validator kAssignment(
    [](std::string& text) {
      const auto eq = text.find('=');
      return eq == 0 || eq == std::string::npos ? "expects NODE=VALUE, got '" + text + "'" : std::string();
    },
    "NODE=VALUE");

void bind_interventions(CLI::App& c, Options& o) {
  c.add_option("--set", o.sets, "atomic intervention NODE=VALUE")
      ->take_all()
      ->allow_extra_args(false)
      ->check(kAssignment);
  c.add_option("--shift", o.shifts, "shift intervention NODE=DELTA")
      ->take_all()
      ->allow_extra_args(false)
      ->check(kAssignment);
}
void bind_alpha(CLI::App& c, Options& o) {
  c.add_option("--alpha", o.alpha, "significance level")->capture_default_str()->check(CLI::Range(0.0, 1.0));
}

std::vector<Command> commands() {
  return {
      {"fit", "fit mechanisms for a graph from data", cmd_fit,
       [](CLI::App& c, Options& o) { bind_graph(c, o); bind_data(c, o); }},
      {"sample", "draw observational samples", cmd_sample,
       [](CLI::App& c, Options& o) { bind_model(c, o); bind_n(c, o, 1000, "sample count"); }},
      {"intervene", "draw interventional samples and summarise them", cmd_intervene,
       [](CLI::App& c, Options& o) {
         bind_model(c, o);
         bind_interventions(c, o);
         bind_target(c, o, false);
         bind_n(c, o, 10000, "sample count");
       }},
      {"counterfactual", "counterfactual values for observed rows", cmd_counterfactual,
       [](CLI::App& c, Options& o) { bind_model(c, o); bind_data(c, o); bind_interventions(c, o); }},
      {"ace", "average causal effect of two treatment values", cmd_ace,
       [](CLI::App& c, Options& o) {
         bind_model(c, o);
         c.add_option("--treatment", o.treatment, "treatment node")->required();
         c.add_option("--value-a", o.value_a, "treatment value a")->required();
         c.add_option("--value-b", o.value_b, "treatment value b")->required();
         bind_target(c, o, true);
         bind_n(c, o, 10000, "samples per arm");
       }},
      {"attribute-outlier", "attribute an anomalous row to upstream noises", cmd_attribute_outlier,
       [](CLI::App& c, Options& o) {
         bind_model(c, o);
         bind_data(c, o);
         bind_target(c, o, true);
         c.add_option("--row", o.row, "row of --data to explain")->capture_default_str();
         bind_n(c, o, 5000, "samples per coalition");
         bind_permutations(c, o);
       }},
      {"attribute-change", "attribute a distribution change to mechanisms", cmd_attribute_change,
       [](CLI::App& c, Options& o) {
         bind_graph(c, o);
         c.add_option("--old", o.old_data, "CSV before the change")->required();
         c.add_option("--new", o.new_data, "CSV after the change")->required();
         bind_target(c, o, true);
         c.add_option("--measure", o.measure, "auto, mean_diff or kl")
             ->capture_default_str()
             ->check(CLI::IsMember({"auto", "mean_diff", "kl"}));
         bind_n(c, o, 10000, "samples per coalition");
         bind_permutations(c, o);
       }},
      {"icc", "intrinsic causal influence on a target's variance", cmd_icc,
       [](CLI::App& c, Options& o) {
         bind_model(c, o);
         bind_target(c, o, true);
         c.add_option("--outer", o.outer, "outer samples")->capture_default_str()->check(CLI::PositiveNumber);
         c.add_option("--inner", o.inner, "inner samples")->capture_default_str()->check(CLI::PositiveNumber);
         bind_permutations(c, o);
       }},
      {"arrow-strength", "strength of the edges into a target", cmd_arrow_strength,
       [](CLI::App& c, Options& o) {
         bind_model(c, o);
         bind_target(c, o, true);
         c.add_option("--parent", o.parent, "single parent (default: all)");
         c.add_option("--measure", o.measure, "auto, coupled_msd or kl")
             ->capture_default_str()
             ->check(CLI::IsMember({"auto", "coupled_msd", "kl"}));
         bind_n(c, o, 10000, "sample count");
       }},
      {"discover", "PC structure search", cmd_discover,
       [](CLI::App& c, Options& o) {
         bind_data(c, o);
         bind_alpha(c, o);
         c.add_option("--max-cond", o.max_cond, "largest conditioning set")->capture_default_str();
       }},
      {"refute", "test the local Markov conditions of a graph", cmd_refute,
       [](CLI::App& c, Options& o) { bind_graph(c, o); bind_data(c, o); bind_alpha(c, o); }},
      {"evaluate", "evaluate fitted mechanisms on held-out data", cmd_evaluate,
       [](CLI::App& c, Options& o) { bind_model(c, o); bind_data(c, o); }},
      {"test", "independence test between two columns", cmd_test,
       [](CLI::App& c, Options& o) {
         bind_data(c, o);
         c.add_option("--x", o.x, "first column")->required();
         c.add_option("--y", o.y, "second column")->required();
         c.add_option("--given", o.given, "conditioning columns")->take_all()->allow_extra_args(false);
         c.add_option("--method", o.method, "auto, dcor or fisher_z")
             ->capture_default_str()
             ->check(CLI::IsMember({"auto", "dcor", "fisher_z"}));
         c.add_option("--permutations", o.permutations, "dcor permutations (0: default 199)");
       }},
  };
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graphical causal models: fit, query and validate"};
  app.name("gcm");
  app.require_subcommand(1, 1);
  Options opt;
  std::map<const CLI::App*, Handler> handlers;
  const auto table = commands();
  for (const auto& cmd : table) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.description);
    cmd.bind(*sub, opt);
    sub->add_option("--seed", opt.seed, "master seed")->capture_default_str();
    sub->add_option("--out", opt.out, "write the result to this file instead of stdout");
    handlers[sub] = cmd.handler;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  if (chosen->get_option_no_throw("-n") != nullptr && chosen->count("-n") == 0) {
    opt.n = std::stoull(chosen->get_option("-n")->get_default_str());
  }
  try {
    const std::string text = handlers.at(chosen)(opt);
    if (opt.out.empty()) {
      out << text;
    } else {
      write_file(opt.out, text);
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_numeric_failure(e.code()) ? kExitNumeric : kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace gcm::cli
