#include "nroy/config.hpp"

#include <initializer_list>
#include <string>
#include <vector>

#include "nroy/common.hpp"
#include "nroy/correlation.hpp"

namespace nroy {

namespace {

[[noreturn]] void bad(const std::string& msg) { fail(ErrorKind::schema, msg); }

void check_object(const ojson& j, const std::string& path) {
  if (!j.is_object()) bad("config: '" + path + "' must be an object");
}

void check_keys(const ojson& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  check_object(j, path);
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known) bad("config: unknown key '" + path + "." + item.key() + "'");
  }
}

double as_number(const ojson& v, const std::string& path) {
  if (!v.is_number()) bad("config: '" + path + "' must be a number");
  return v.get<double>();
}

int as_int(const ojson& v, const std::string& path) {
  if (!v.is_number_integer() && !v.is_number_unsigned())
    bad("config: '" + path + "' must be an integer");
  return v.get<int>();
}

std::uint64_t as_u64(const ojson& v, const std::string& path) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    bad("config: '" + path + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::size_t as_size(const ojson& v, const std::string& path) {
  return static_cast<std::size_t>(as_u64(v, path));
}

bool as_bool(const ojson& v, const std::string& path) {
  if (!v.is_boolean()) bad("config: '" + path + "' must be true or false");
  return v.get<bool>();
}

std::string as_string(const ojson& v, const std::string& path) {
  if (!v.is_string()) bad("config: '" + path + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> as_numbers(const ojson& v, const std::string& path) {
  if (!v.is_array()) bad("config: '" + path + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(as_number(x, path));
  return out;
}

std::vector<std::string> as_strings(const ojson& v, const std::string& path) {
  if (!v.is_array()) bad("config: '" + path + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto& x : v) out.push_back(as_string(x, path));
  return out;
}

ParameterSpace parse_space(const ojson& j) {
  check_object(j, "space");
  if (j.empty()) bad("config: 'space' needs at least one parameter");
  std::vector<std::string> names;
  std::vector<std::pair<double, double>> ranges;
  for (const auto& item : j.items()) {
    const ojson& r = item.value();
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
      bad("config: 'space." + item.key() + "' must be a [low, high] number pair");
    names.push_back(item.key());
    ranges.emplace_back(r[0].get<double>(), r[1].get<double>());
  }
  return ParameterSpace(std::move(names), std::move(ranges));
}

void parse_discrepancies(const ojson& j, Config& cfg) {
  check_object(j, "discrepancies");
  for (const auto& item : j.items()) {
    const std::string path = "discrepancies." + item.key();
    check_keys(item.value(), path, {"internal", "external"});
    Discrepancy d;
    if (item.value().contains("internal"))
      d.internal = as_number(item.value().at("internal"), path + ".internal");
    if (item.value().contains("external"))
      d.external = as_number(item.value().at("external"), path + ".external");
    cfg.discrepancies[item.key()] = d;
  }
}

void parse_training(const ojson& j, TrainingOptions& t) {
  check_keys(j, "training",
             {"beta_mode", "variance_explained_threshold", "theta_lower", "theta_upper",
              "nugget_lower", "nugget_upper", "nugget_barrier", "nugget_barrier_log_sd", "kernel",
              "nu", "alpha", "kurtosis_multiplier"});
  if (j.contains("beta_mode")) {
    const std::string mode = as_string(j.at("beta_mode"), "training.beta_mode");
    if (mode == "known")
      t.beta_mode = TrainingOptions::BetaMode::known;
    else if (mode == "noninformative")
      t.beta_mode = TrainingOptions::BetaMode::noninformative;
    else
      bad("config: 'training.beta_mode' must be \"known\" or \"noninformative\"");
  }
  if (j.contains("variance_explained_threshold"))
    t.variance_explained_threshold =
        as_number(j.at("variance_explained_threshold"), "training.variance_explained_threshold");
  if (j.contains("theta_lower")) t.theta_lower = as_number(j.at("theta_lower"), "training.theta_lower");
  if (j.contains("theta_upper")) t.theta_upper = as_number(j.at("theta_upper"), "training.theta_upper");
  if (j.contains("nugget_lower"))
    t.nugget_lower = as_number(j.at("nugget_lower"), "training.nugget_lower");
  if (j.contains("nugget_upper"))
    t.nugget_upper = as_number(j.at("nugget_upper"), "training.nugget_upper");
  if (j.contains("nugget_barrier"))
    t.nugget_barrier = as_number(j.at("nugget_barrier"), "training.nugget_barrier");
  if (j.contains("nugget_barrier_log_sd"))
    t.nugget_barrier_log_sd =
        as_number(j.at("nugget_barrier_log_sd"), "training.nugget_barrier_log_sd");
  if (j.contains("kernel")) t.kernel = kernel_from_name(as_string(j.at("kernel"), "training.kernel"));
  if (j.contains("nu")) t.nu = as_number(j.at("nu"), "training.nu");
  if (j.contains("alpha")) t.alpha = as_number(j.at("alpha"), "training.alpha");
  if (j.contains("kurtosis_multiplier"))
    t.kurtosis_multiplier = as_number(j.at("kurtosis_multiplier"), "training.kurtosis_multiplier");
}

void parse_proposal(const ojson& j, ProposalOptions& p) {
  check_keys(j, "proposal",
             {"lhd_multiplier", "lhd_cap", "n_lines", "points_per_line", "burn_in_batch",
              "oversample", "resample", "ladder"});
  if (j.contains("lhd_multiplier"))
    p.lhd_multiplier = as_size(j.at("lhd_multiplier"), "proposal.lhd_multiplier");
  if (j.contains("lhd_cap")) p.lhd_cap = as_size(j.at("lhd_cap"), "proposal.lhd_cap");
  if (j.contains("n_lines")) p.n_lines = as_size(j.at("n_lines"), "proposal.n_lines");
  if (j.contains("points_per_line"))
    p.points_per_line = as_size(j.at("points_per_line"), "proposal.points_per_line");
  if (j.contains("burn_in_batch"))
    p.burn_in_batch = as_size(j.at("burn_in_batch"), "proposal.burn_in_batch");
  if (j.contains("oversample")) p.oversample = as_number(j.at("oversample"), "proposal.oversample");
  if (j.contains("resample")) p.resample = as_int(j.at("resample"), "proposal.resample");
  if (j.contains("ladder")) p.ladder = as_numbers(j.at("ladder"), "proposal.ladder");
}

void parse_wave(const ojson& j, Config& cfg) {
  check_keys(j, "wave",
             {"n_train", "n_valid", "cutoff", "nth", "max_type1_fraction", "retain_previous",
              "advance_flagged"});
  if (j.contains("n_train")) cfg.n_train = as_size(j.at("n_train"), "wave.n_train");
  if (j.contains("n_valid")) cfg.n_valid = as_size(j.at("n_valid"), "wave.n_valid");
  if (j.contains("cutoff")) cfg.cutoff = as_number(j.at("cutoff"), "wave.cutoff");
  if (j.contains("nth")) cfg.nth = as_int(j.at("nth"), "wave.nth");
  if (j.contains("max_type1_fraction"))
    cfg.max_type1_fraction = as_number(j.at("max_type1_fraction"), "wave.max_type1_fraction");
  if (j.contains("retain_previous"))
    cfg.retain_previous = as_bool(j.at("retain_previous"), "wave.retain_previous");
  if (j.contains("advance_flagged"))
    cfg.advance_flagged = as_bool(j.at("advance_flagged"), "wave.advance_flagged");
}

void parse_stopping(const ojson& j, StoppingRule& s) {
  check_keys(j, "stopping", {"variance_ratio", "max_waves", "target_matches"});
  if (j.contains("variance_ratio"))
    s.variance_ratio = as_number(j.at("variance_ratio"), "stopping.variance_ratio");
  if (j.contains("max_waves")) s.max_waves = as_int(j.at("max_waves"), "stopping.max_waves");
  if (j.contains("target_matches"))
    s.target_matches = as_int(j.at("target_matches"), "stopping.target_matches");
}

void parse_analysis(const ojson& j, Config& cfg) {
  check_keys(j, "analysis", {"ppd", "budget", "modified", "multipliers", "cutoffs", "fixed"});
  if (j.contains("ppd")) cfg.sweep.ppd = as_int(j.at("ppd"), "analysis.ppd");
  if (j.contains("budget")) cfg.sweep.budget = as_number(j.at("budget"), "analysis.budget");
  if (j.contains("modified"))
    cfg.sweep.modified =
        modified_quantity_from_name(as_string(j.at("modified"), "analysis.modified"));
  if (j.contains("multipliers"))
    cfg.sweep.multipliers = as_numbers(j.at("multipliers"), "analysis.multipliers");
  if (j.contains("cutoffs")) cfg.sweep.cutoffs = as_numbers(j.at("cutoffs"), "analysis.cutoffs");
  if (j.contains("fixed")) {
    check_object(j.at("fixed"), "analysis.fixed");
    for (const auto& item : j.at("fixed").items())
      cfg.fixed[item.key()] = as_number(item.value(), "analysis.fixed." + item.key());
  }
}

}  // namespace

WaveOptions Config::wave_options() const {
  WaveOptions w;
  w.n_train = n_train;
  w.n_valid = n_valid;
  w.cutoff = cutoff;
  w.nth = nth;
  w.max_type1_fraction = max_type1_fraction;
  w.retain_previous = retain_previous;
  w.advance_flagged = advance_flagged;
  w.outputs = outputs;
  w.discrepancies = discrepancies;
  w.seed = seed;
  w.training = training;
  w.training.workers = workers;
  w.proposal = proposal;
  return w;
}

std::vector<std::string> Config::emulated_outputs() const {
  if (!outputs.empty()) return outputs;
  std::vector<std::string> names;
  for (const auto& [name, t] : targets) names.push_back(name);
  return names;
}

std::vector<std::string> Config::simulator_outputs() const {
  if (!sim_outputs.empty()) return sim_outputs;
  if (simulator.rfind("sirs-", 0) == 0) return {"nS", "nI", "nR"};
  return emulated_outputs();
}

Config config_from_json(const ojson& j) {
  check_keys(j, "<root>",
             {"space", "targets", "discrepancies", "outputs", "sim_outputs", "simulator", "seed",
              "workers", "variance_mode", "training", "proposal", "wave", "stopping", "analysis"});
  if (!j.contains("space")) bad("config: the 'space' section is required");

  Config cfg;
  cfg.space = parse_space(j.at("space"));
  if (j.contains("targets")) cfg.targets = targets_from_json(j.at("targets"));
  if (j.contains("discrepancies")) parse_discrepancies(j.at("discrepancies"), cfg);
  if (j.contains("outputs")) cfg.outputs = as_strings(j.at("outputs"), "outputs");
  if (j.contains("sim_outputs")) cfg.sim_outputs = as_strings(j.at("sim_outputs"), "sim_outputs");
  if (j.contains("simulator")) cfg.simulator = as_string(j.at("simulator"), "simulator");
  if (j.contains("seed")) cfg.seed = as_u64(j.at("seed"), "seed");
  if (j.contains("workers")) {
    cfg.workers = as_int(j.at("workers"), "workers");
    if (cfg.workers < 1) bad("config: 'workers' must be at least 1");
  }
  if (j.contains("variance_mode")) cfg.variance_mode = as_bool(j.at("variance_mode"), "variance_mode");
  if (j.contains("training")) parse_training(j.at("training"), cfg.training);
  if (j.contains("proposal")) parse_proposal(j.at("proposal"), cfg.proposal);
  if (j.contains("wave")) parse_wave(j.at("wave"), cfg);
  if (j.contains("stopping")) parse_stopping(j.at("stopping"), cfg.stopping);
  if (j.contains("analysis")) parse_analysis(j.at("analysis"), cfg);

  for (const auto& name : cfg.outputs)
    if (!cfg.targets.empty() && !cfg.targets.count(name))
      bad("config: output '" + name + "' has no target");
  for (const auto& [name, d] : cfg.discrepancies)
    if (!cfg.targets.count(name))
      bad("config: discrepancy for '" + name + "' has no matching target");
  for (const auto& [name, v] : cfg.fixed)
    if (cfg.space.index_of(name) < 0)
      bad("config: fixed value for unknown parameter '" + name + "'");
  return cfg;
}

Config read_config(const std::string& path) { return config_from_json(parse_json_file(path)); }

}  // namespace nroy
