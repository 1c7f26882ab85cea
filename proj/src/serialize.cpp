#include "nroy/serialize.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nroy/common.hpp"
#include "nroy/correlation.hpp"

namespace nroy {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& msg) { fail(ErrorKind::schema, msg); }

const ojson& need(const ojson& j, const char* key, const char* what) {
  const auto it = j.find(key);
  if (it == j.end()) bad(std::string(what) + " is missing the key '" + key + "'");
  return *it;
}

double need_number(const ojson& j, const char* key, const char* what) {
  const ojson& v = need(j, key, what);
  if (!v.is_number()) bad(std::string(what) + " key '" + key + "' must be a number");
  return v.get<double>();
}

ojson vec_to_json(const Eigen::VectorXd& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const ojson& j, const char* what) {
  if (!j.is_array()) bad(std::string(what) + " must be an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& x : j) {
    if (!x.is_number()) bad(std::string(what) + " must contain only numbers");
    v[i++] = x.get<double>();
  }
  return v;
}

ojson mat_to_json(const Eigen::MatrixXd& m) {
  ojson rows = ojson::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_to_json(m.row(r).transpose()));
  return rows;
}

Eigen::MatrixXd mat_from_json(const ojson& j, Eigen::Index cols, const char* what) {
  if (!j.is_array()) bad(std::string(what) + " must be an array of rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  Eigen::Index r = 0;
  for (const auto& row : j) {
    const Eigen::VectorXd v = vec_from_json(row, what);
    if (v.size() != cols) bad(std::string(what) + " rows must all have the same width");
    m.row(r++) = v.transpose();
  }
  return m;
}

const char* basis_kind_name(BasisTerm::Kind k) {
  switch (k) {
    case BasisTerm::Kind::constant: return "constant";
    case BasisTerm::Kind::linear: return "linear";
    case BasisTerm::Kind::quadratic: return "quadratic";
    case BasisTerm::Kind::interaction: return "interaction";
  }
  return "constant";
}

BasisTerm::Kind basis_kind_from_name(const std::string& name) {
  if (name == "constant") return BasisTerm::Kind::constant;
  if (name == "linear") return BasisTerm::Kind::linear;
  if (name == "quadratic") return BasisTerm::Kind::quadratic;
  if (name == "interaction") return BasisTerm::Kind::interaction;
  bad("unknown basis term kind '" + name + "'");
}

ojson emulator_to_json(const TrainedEmulator& em) {
  const EmulatorPrior& p = em.prior();
  ojson j;
  j["output"] = p.output_name;
  j["space"] = space_to_json(p.space);
  ojson basis = ojson::array();
  for (const BasisTerm& t : p.basis) {
    ojson term;
    term["kind"] = basis_kind_name(t.kind);
    term["i"] = t.i;
    term["j"] = t.j;
    basis.push_back(std::move(term));
  }
  j["basis"] = std::move(basis);
  j["beta_mean"] = vec_to_json(p.beta_mean);
  j["beta_var"] = mat_to_json(p.beta_var);
  j["sigma_sq"] = p.sigma_sq;
  ojson corr;
  corr["kind"] = kernel_name(p.corr.kind);
  corr["theta"] = p.corr.theta;
  corr["nu"] = p.corr.nu;
  corr["alpha"] = p.corr.alpha;
  corr["nugget"] = p.corr.nugget;
  j["correlation"] = std::move(corr);
  ojson actives = ojson::array();
  for (bool a : p.actives) actives.push_back(a);
  j["actives"] = std::move(actives);
  ojson disc;
  disc["internal"] = p.disc.internal;
  disc["external"] = p.disc.external;
  j["discrepancy"] = std::move(disc);
  j["inputs"] = mat_to_json(em.train_inputs());
  j["outputs"] = vec_to_json(em.train_outputs());
  j["noise"] = vec_to_json(em.obs_noise_var());
  j["flags"] = em.flags();
  return j;
}

TrainedEmulator emulator_from_json(const ojson& j) {
  if (!j.is_object()) bad("an emulator entry must be an object");
  EmulatorPrior p;
  p.output_name = need(j, "output", "emulator").get<std::string>();
  p.space = space_from_json(need(j, "space", "emulator"));
  const Eigen::Index d = static_cast<Eigen::Index>(p.space.dim());
  for (const auto& term : need(j, "basis", "emulator")) {
    BasisTerm t;
    t.kind = basis_kind_from_name(need(term, "kind", "basis term").get<std::string>());
    t.i = need(term, "i", "basis term").get<int>();
    t.j = need(term, "j", "basis term").get<int>();
    p.basis.push_back(t);
  }
  p.beta_mean = vec_from_json(need(j, "beta_mean", "emulator"), "beta_mean");
  p.beta_var = mat_from_json(need(j, "beta_var", "emulator"), p.beta_mean.size(), "beta_var");
  p.sigma_sq = need_number(j, "sigma_sq", "emulator");
  const ojson& corr = need(j, "correlation", "emulator");
  p.corr.kind = kernel_from_name(need(corr, "kind", "correlation").get<std::string>());
  p.corr.theta = need_number(corr, "theta", "correlation");
  p.corr.nu = need_number(corr, "nu", "correlation");
  p.corr.alpha = need_number(corr, "alpha", "correlation");
  p.corr.nugget = need_number(corr, "nugget", "correlation");
  for (const auto& a : need(j, "actives", "emulator")) {
    if (!a.is_boolean()) bad("actives must contain only booleans");
    p.actives.push_back(a.get<bool>());
  }
  const ojson& disc = need(j, "discrepancy", "emulator");
  p.disc.internal = need_number(disc, "internal", "discrepancy");
  p.disc.external = need_number(disc, "external", "discrepancy");

  const Eigen::MatrixXd X = mat_from_json(need(j, "inputs", "emulator"), d, "inputs");
  const Eigen::VectorXd y = vec_from_json(need(j, "outputs", "emulator"), "outputs");
  const Eigen::VectorXd noise = vec_from_json(need(j, "noise", "emulator"), "noise");
  TrainedEmulator em(std::move(p), X, y, noise);
  for (const auto& f : need(j, "flags", "emulator")) {
    if (!f.is_string()) bad("flags must contain only strings");
    em.flags().push_back(f.get<std::string>());
  }
  return em;
}

std::string stop_reason_from_string_check(const std::string& s, StopReason* out) {
  for (StopReason r : {StopReason::none, StopReason::variance_dominated, StopReason::empty_space,
                       StopReason::enough_matches, StopReason::wave_limit})
    if (s == to_string(r)) {
      *out = r;
      return s;
    }
  bad("unknown stop reason '" + s + "'");
}

template <typename T>
ojson index_vector_to_json(const std::vector<T>& v) {
  ojson a = ojson::array();
  for (T x : v) a.push_back(static_cast<std::uint64_t>(x));
  return a;
}

std::vector<std::size_t> index_vector_from_json(const ojson& j, const char* what) {
  if (!j.is_array()) bad(std::string(what) + " must be an array of indices");
  std::vector<std::size_t> v;
  for (const auto& x : j) {
    if (!x.is_number_unsigned() && !x.is_number_integer())
      bad(std::string(what) + " must contain only non-negative integers");
    v.push_back(x.get<std::size_t>());
  }
  return v;
}

}  // namespace

ojson space_to_json(const ParameterSpace& space) {
  ojson j;
  j["names"] = space.names();
  ojson ranges = ojson::array();
  for (std::size_t i = 0; i < space.dim(); ++i)
    ranges.push_back(ojson::array({space.range(i).first, space.range(i).second}));
  j["ranges"] = std::move(ranges);
  return j;
}

ParameterSpace space_from_json(const ojson& j) {
  if (!j.is_object()) bad("a parameter space must be an object");
  std::vector<std::string> names;
  for (const auto& n : need(j, "names", "parameter space")) {
    if (!n.is_string()) bad("parameter names must be strings");
    names.push_back(n.get<std::string>());
  }
  std::vector<std::pair<double, double>> ranges;
  for (const auto& r : need(j, "ranges", "parameter space")) {
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
      bad("parameter ranges must be [low, high] number pairs");
    ranges.emplace_back(r[0].get<double>(), r[1].get<double>());
  }
  if (names.size() != ranges.size()) bad("parameter names and ranges must have equal length");
  return ParameterSpace(std::move(names), std::move(ranges));
}

ojson target_to_json(const Target& t) {
  ojson j;
  if (t.kind == Target::Kind::value) {
    j["val"] = t.val;
    j["sigma"] = t.sigma;
  } else {
    j = ojson::array({t.lo, t.hi});
  }
  return j;
}

Target target_from_json(const ojson& j) {
  if (j.is_array()) {
    if (j.size() != 2 || !j[0].is_number() || !j[1].is_number())
      bad("an interval target must be a [low, high] number pair");
    const double lo = j[0].get<double>(), hi = j[1].get<double>();
    if (!(lo < hi)) bad("an interval target needs low < high");
    return Target::interval(lo, hi);
  }
  if (j.is_object()) {
    if (j.size() != 2 || !j.contains("val") || !j.contains("sigma"))
      bad("a value target must be an object with exactly the keys 'val' and 'sigma'");
    const double val = need_number(j, "val", "value target");
    const double sigma = need_number(j, "sigma", "value target");
    if (!(sigma > 0.0)) bad("a value target needs a positive sigma");
    return Target::value(val, sigma);
  }
  bad("a target must be either [low, high] or {\"val\": ..., \"sigma\": ...}");
}

ojson targets_to_json(const TargetMap& targets) {
  ojson j = ojson::object();
  for (const auto& [name, t] : targets) j[name] = target_to_json(t);
  return j;
}

TargetMap targets_from_json(const ojson& j) {
  if (!j.is_object()) bad("targets must be an object keyed by output name");
  TargetMap out;
  for (const auto& [name, t] : j.items()) out[name] = target_from_json(t);
  return out;
}

ojson emulator_set_to_json(const EmulatorSet& ems) {
  ojson j;
  j["format"] = "emulator-set/1";
  j["variance_mode"] = ems.variance_mode;
  j["names"] = ems.names;
  ojson expectation = ojson::object();
  for (const auto& name : ems.names) expectation[name] = emulator_to_json(ems.at(name));
  j["expectation"] = std::move(expectation);
  ojson variance = ojson::object();
  for (const auto& name : ems.names) {
    const auto it = ems.variance.find(name);
    if (it != ems.variance.end()) variance[name] = emulator_to_json(it->second);
  }
  j["variance"] = std::move(variance);
  return j;
}

EmulatorSet emulator_set_from_json(const ojson& j) {
  if (!j.is_object()) bad("an emulator set must be an object");
  const std::string format = need(j, "format", "emulator set").get<std::string>();
  if (format != "emulator-set/1") bad("unsupported emulator set format '" + format + "'");
  EmulatorSet ems;
  const ojson& vm = need(j, "variance_mode", "emulator set");
  if (!vm.is_boolean()) bad("variance_mode must be a boolean");
  ems.variance_mode = vm.get<bool>();
  for (const auto& n : need(j, "names", "emulator set")) {
    if (!n.is_string()) bad("emulator set names must be strings");
    ems.names.push_back(n.get<std::string>());
  }
  const ojson& expectation = need(j, "expectation", "emulator set");
  const ojson& variance = need(j, "variance", "emulator set");
  for (const auto& name : ems.names) {
    if (!expectation.contains(name)) bad("emulator set is missing the expectation entry '" + name + "'");
    ems.expectation.emplace(name, emulator_from_json(expectation.at(name)));
    if (variance.contains(name)) ems.variance.emplace(name, emulator_from_json(variance.at(name)));
  }
  if (ems.variance_mode && ems.variance.size() != ems.names.size())
    bad("a variance-mode emulator set needs a variance emulator per output");
  return ems;
}

void write_emulator_set(const std::string& path, const EmulatorSet& ems) {
  write_text_file(path, emulator_set_to_json(ems).dump(2) + "\n");
}

EmulatorSet read_emulator_set(const std::string& path) {
  return emulator_set_from_json(parse_json_file(path));
}

ojson diagnostics_to_json(const DiagnosticReport& report) {
  ojson j;
  j["format"] = "diagnostics/1";
  j["passed"] = report.passed();
  j["n_points"] = static_cast<std::uint64_t>(report.inputs.rows());
  j["leave_one_out"] = report.leave_one_out;
  j["failing_rows"] = index_vector_to_json(report.failing_rows);
  ojson per = ojson::object();
  for (const auto& d : report.per_emulator) {
    ojson e;
    e["comparison_failures"] = index_vector_to_json(d.comparison_failures);
    e["classification_failures"] = index_vector_to_json(d.classification_failures);
    e["standardized_failures"] = index_vector_to_json(d.standardized_failures);
    e["underconfident"] = d.underconfident;
    per[d.output_name] = std::move(e);
  }
  j["per_output"] = std::move(per);
  return j;
}

void save_wave_state(const std::string& dir, const WaveState& state) {
  fs::create_directories(dir);
  ojson index;
  index["format"] = "wave-state/1";
  index["space"] = space_to_json(state.space);
  index["targets"] = targets_to_json(state.targets);
  index["sim_outputs"] = state.sim_outputs;
  ojson stop;
  stop["reason"] = to_string(state.stop.reason);
  stop["at_wave"] = state.stop.at_wave;
  stop["detail"] = state.stop.detail;
  index["stop"] = std::move(stop);
  ojson waves = ojson::array();
  for (const auto& w : state.waves) {
    const std::string wave_dir = "wave_" + std::to_string(w.wave);
    ojson e;
    e["wave"] = w.wave;
    e["dir"] = wave_dir;
    e["box"] = space_to_json(w.box);
    e["outputs"] = w.outputs;
    e["has_emulators"] = w.has_emulators();
    e["failed_rows"] = index_vector_to_json(w.failed_rows);
    e["train_rows"] = index_vector_to_json(w.train_rows);
    e["valid_rows"] = index_vector_to_json(w.valid_rows);
    e["n_retained"] = static_cast<std::uint64_t>(w.n_retained);
    e["type1_fraction"] = w.type1_fraction;
    e["flagged"] = w.flagged;
    waves.push_back(std::move(e));

    const fs::path wpath = fs::path(dir) / wave_dir;
    if (fs::exists(wpath)) continue;  // earlier waves keep their files as written
    fs::create_directories(wpath);
    write_run_table((wpath / "design.csv").string(), w.design);
    write_run_table((wpath / "runs.csv").string(), w.runs);
    if (w.has_emulators()) {
      write_emulator_set((wpath / "emulators.json").string(), w.emulators);
      write_text_file((wpath / "diagnostics.json").string(),
                      diagnostics_to_json(w.validation).dump(2) + "\n");
      write_diagnostic_csvs(w.validation, wpath.string());
    }
  }
  index["waves"] = std::move(waves);
  write_text_file((fs::path(dir) / "state.json").string(), index.dump(2) + "\n");
}

WaveState load_wave_state(const std::string& dir) {
  const ojson index = parse_json_file((fs::path(dir) / "state.json").string());
  const std::string format = need(index, "format", "wave state").get<std::string>();
  if (format != "wave-state/1") bad("unsupported wave state format '" + format + "'");
  WaveState state;
  state.space = space_from_json(need(index, "space", "wave state"));
  state.targets = targets_from_json(need(index, "targets", "wave state"));
  for (const auto& n : need(index, "sim_outputs", "wave state"))
    state.sim_outputs.push_back(n.get<std::string>());
  const ojson& stop = need(index, "stop", "wave state");
  stop_reason_from_string_check(need(stop, "reason", "stop record").get<std::string>(),
                                &state.stop.reason);
  state.stop.at_wave = need(stop, "at_wave", "stop record").get<int>();
  state.stop.detail = need(stop, "detail", "stop record").get<std::string>();

  for (const auto& e : need(index, "waves", "wave state")) {
    WaveRecord w;
    w.wave = need(e, "wave", "wave entry").get<int>();
    w.box = space_from_json(need(e, "box", "wave entry"));
    for (const auto& n : need(e, "outputs", "wave entry")) w.outputs.push_back(n.get<std::string>());
    w.failed_rows = index_vector_from_json(need(e, "failed_rows", "wave entry"), "failed_rows");
    w.train_rows = index_vector_from_json(need(e, "train_rows", "wave entry"), "train_rows");
    w.valid_rows = index_vector_from_json(need(e, "valid_rows", "wave entry"), "valid_rows");
    w.n_retained = need(e, "n_retained", "wave entry").get<std::size_t>();
    w.type1_fraction = need_number(e, "type1_fraction", "wave entry");
    const ojson& fl = need(e, "flagged", "wave entry");
    if (!fl.is_boolean()) bad("flagged must be a boolean");
    w.flagged = fl.get<bool>();

    const fs::path wpath = fs::path(dir) / need(e, "dir", "wave entry").get<std::string>();
    w.design = read_run_table((wpath / "design.csv").string(), w.box);
    w.runs = read_run_table((wpath / "runs.csv").string(), w.box);
    if (need(e, "has_emulators", "wave entry").get<bool>())
      w.emulators = read_emulator_set((wpath / "emulators.json").string());
    state.waves.push_back(std::move(w));
  }
  return state;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ojson parse_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return ojson::parse(text);
  } catch (const std::exception& e) {
    bad("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) bad("cannot write '" + path + "'");
  out << text;
  if (!out) bad("failed while writing '" + path + "'");
}

}  // namespace nroy
