#include "pinc/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "pinc/error.hpp"
#include "pinc/format.hpp"

namespace pinc::config {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  double x = 0.0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size()) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
  return x;
}

template <class I>
I to_integer(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  I x = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size()) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true") return true;
  if (t == "false") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs, const std::function<std::string(const T&)>& f,
                 const char* sep = ", ") {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? sep : "") + f(xs[i]);
  return s;
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

// Accessors project a RunConfig onto one member.
template <class T>
using Ref = std::function<T&(RunConfig&)>;

Field real(std::string sec, std::string key, Ref<double> ref) {
  return {sec, key,
          [ref](const RunConfig& c) { return format_double(ref(const_cast<RunConfig&>(c))); },
          [ref, key](RunConfig& c, const std::string& v) { ref(c) = to_double(key, v); }};
}

Field integer(std::string sec, std::string key, Ref<int> ref) {
  return {sec, key,
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); },
          [ref, key](RunConfig& c, const std::string& v) { ref(c) = to_integer<int>(key, v); }};
}

Field seed(std::string sec, std::string key, Ref<std::uint64_t> ref) {
  return {sec, key,
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); },
          [ref, key](RunConfig& c, const std::string& v) {
            ref(c) = to_integer<std::uint64_t>(key, v);
          }};
}

Field boolean(std::string sec, std::string key, Ref<bool> ref) {
  return {sec, key,
          [ref](const RunConfig& c) {
            return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false");
          },
          [ref, key](RunConfig& c, const std::string& v) { ref(c) = to_bool(key, v); }};
}

Field optional_real(std::string sec, std::string key, Ref<std::optional<double>> ref) {
  return {sec, key,
          [ref](const RunConfig& c) {
            const auto& o = ref(const_cast<RunConfig&>(c));
            return o ? format_double(*o) : std::string();
          },
          [ref, key](RunConfig& c, const std::string& v) {
            if (trim(v).empty()) {
              ref(c).reset();
            } else {
              ref(c) = to_double(key, v);
            }
          }};
}

void architecture_fields(std::vector<Field>& f, const std::string& p,
                         net::Architecture RunConfig::*arch) {
  auto a = [arch](RunConfig& c) -> net::Architecture& { return c.*arch; };
  f.push_back(integer("network", p + "n_layers", [a](RunConfig& c) -> int& { return a(c).n_layers; }));
  f.push_back(integer("network", p + "hidden_size",
                      [a](RunConfig& c) -> int& { return a(c).hidden_size; }));
  f.push_back({"network", p + "activation",
               [a](const RunConfig& c) {
                 return net::to_string(a(const_cast<RunConfig&>(c)).activation);
               },
               [a](RunConfig& c, const std::string& v) {
                 a(c).activation = net::activation_from_string(trim(v));
               }});
  f.push_back(boolean("network", p + "skip_connections",
                      [a](RunConfig& c) -> bool& { return a(c).skip_connections; }));
}

void training_fields(std::vector<Field>& f, const std::string& p,
                     training::TrainingConfig RunConfig::*tc) {
  using training::TrainingConfig;
  auto t = [tc](RunConfig& c) -> TrainingConfig& { return c.*tc; };
  const std::string s = "training";
  f.push_back(integer(s, p + "n_f", [t](RunConfig& c) -> int& { return t(c).sizes.n_f; }));
  f.push_back(integer(s, p + "n_b", [t](RunConfig& c) -> int& { return t(c).sizes.n_b; }));
  f.push_back(integer(s, p + "n_i", [t](RunConfig& c) -> int& { return t(c).sizes.n_i; }));
  f.push_back(integer(s, p + "adam_epochs", [t](RunConfig& c) -> int& { return t(c).adam.epochs; }));
  f.push_back(real(s, p + "learning_rate",
                   [t](RunConfig& c) -> double& { return t(c).adam.learning_rate; }));
  f.push_back(real(s, p + "beta1", [t](RunConfig& c) -> double& { return t(c).adam.beta1; }));
  f.push_back(real(s, p + "beta2", [t](RunConfig& c) -> double& { return t(c).adam.beta2; }));
  f.push_back(real(s, p + "adam_epsilon", [t](RunConfig& c) -> double& { return t(c).adam.epsilon; }));
  f.push_back(integer(s, p + "lbfgs_memory", [t](RunConfig& c) -> int& { return t(c).lbfgs.memory; }));
  f.push_back(integer(s, p + "lbfgs_max_iters",
                      [t](RunConfig& c) -> int& { return t(c).lbfgs.max_iters; }));
  f.push_back(real(s, p + "lbfgs_grad_tol",
                   [t](RunConfig& c) -> double& { return t(c).lbfgs.grad_tol; }));
  f.push_back(real(s, p + "lbfgs_tol_change",
                   [t](RunConfig& c) -> double& { return t(c).lbfgs.tol_change; }));
  f.push_back(real(s, p + "wolfe_c1", [t](RunConfig& c) -> double& { return t(c).lbfgs.c1; }));
  f.push_back(real(s, p + "wolfe_c2", [t](RunConfig& c) -> double& { return t(c).lbfgs.c2; }));
  f.push_back(integer(s, p + "line_search_evals",
                      [t](RunConfig& c) -> int& { return t(c).lbfgs.max_line_search_evals; }));
  f.push_back(real(s, p + "lambda_f", [t](RunConfig& c) -> double& { return t(c).weights.lambda_f; }));
  f.push_back(real(s, p + "lambda_b", [t](RunConfig& c) -> double& { return t(c).weights.lambda_b; }));
  f.push_back(real(s, p + "lambda_i", [t](RunConfig& c) -> double& { return t(c).weights.lambda_i; }));
  f.push_back(real(s, p + "lambda_d", [t](RunConfig& c) -> double& { return t(c).weights.lambda_d; }));
  f.push_back(seed(s, p + "sampling_seed",
                   [t](RunConfig& c) -> std::uint64_t& { return t(c).sampling_seed; }));
  f.push_back(seed(s, p + "weight_seed", [t](RunConfig& c) -> std::uint64_t& { return t(c).weight_seed; }));
  f.push_back(seed(s, p + "validation_seed",
                   [t](RunConfig& c) -> std::uint64_t& { return t(c).validation_seed; }));
  f.push_back(integer(s, p + "validation_every",
                      [t](RunConfig& c) -> int& { return t(c).validation_every; }));
  f.push_back(real(s, p + "u_low", [t](RunConfig& c) -> double& { return t(c).u_low; }));
  f.push_back(real(s, p + "u_high", [t](RunConfig& c) -> double& { return t(c).u_high; }));
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    using R = RunConfig;
    const std::string sy = "system";
    f.push_back({sy, "fluid", [](const R& c) { return physics::to_string(c.system.fluid); },
                 [](R& c, const std::string& v) { c.system.fluid = physics::fluid_from_string(trim(v)); }});
    f.push_back({sy, "friction", [](const R& c) { return physics::to_string(c.system.friction); },
                 [](R& c, const std::string& v) {
                   c.system.friction = physics::friction_from_string(trim(v));
                 }});
    f.push_back(real(sy, "D", [](R& c) -> double& { return c.system.D; }));
    f.push_back(real(sy, "L", [](R& c) -> double& { return c.system.L; }));
    f.push_back(real(sy, "mu", [](R& c) -> double& { return c.system.mu; }));
    f.push_back(real(sy, "theta", [](R& c) -> double& { return c.system.theta; }));
    f.push_back(real(sy, "g", [](R& c) -> double& { return c.system.g; }));
    f.push_back(real(sy, "eps", [](R& c) -> double& { return c.system.eps; }));
    f.push_back(real(sy, "rho", [](R& c) -> double& { return c.system.rho; }));
    f.push_back(real(sy, "M", [](R& c) -> double& { return c.system.M; }));
    f.push_back(real(sy, "R", [](R& c) -> double& { return c.system.R; }));
    f.push_back(real(sy, "T", [](R& c) -> double& { return c.system.T; }));
    f.push_back(real(sy, "P_reservoir", [](R& c) -> double& { return c.system.P_reservoir; }));
    f.push_back(real(sy, "k", [](R& c) -> double& { return c.system.k; }));
    f.push_back(real(sy, "PI", [](R& c) -> double& { return c.system.PI; }));
    f.push_back(real(sy, "re_min", [](R& c) -> double& { return c.system.re_min; }));
    f.push_back(real(sy, "re_max", [](R& c) -> double& { return c.system.re_max; }));

    const std::string no = "normalization";
    f.push_back(real(no, "t_ref", [](R& c) -> double& { return c.norm.t_ref; }));
    f.push_back(real(no, "x_ref", [](R& c) -> double& { return c.norm.x_ref; }));
    f.push_back(real(no, "P_ref", [](R& c) -> double& { return c.norm.P_ref; }));
    f.push_back(real(no, "V_ref", [](R& c) -> double& { return c.norm.V_ref; }));
    f.push_back(real(no, "rho_ref", [](R& c) -> double& { return c.norm.rho_ref; }));

    f.push_back({"network", "preset", [](const R& c) { return c.preset; },
                 [](R& c, const std::string& v) { c.preset = trim(v); }});
    architecture_fields(f, "steady_", &RunConfig::steady_arch);
    architecture_fields(f, "transient_", &RunConfig::transient_arch);

    training_fields(f, "steady_", &RunConfig::steady_training);
    training_fields(f, "transient_", &RunConfig::transient_training);

    const std::string pl = "plant";
    f.push_back(integer(pl, "n_cells", [](R& c) -> int& { return c.plant.n_cells; }));
    f.push_back(real(pl, "dt", [](R& c) -> double& { return c.plant_dt; }));
    f.push_back(real(pl, "steady_tol", [](R& c) -> double& { return c.plant.steady_tol; }));
    f.push_back(real(pl, "transient_tol", [](R& c) -> double& { return c.plant.transient_tol; }));
    f.push_back(integer(pl, "max_newton", [](R& c) -> int& { return c.plant.max_newton; }));
    f.push_back(integer(pl, "max_halvings", [](R& c) -> int& { return c.plant.max_halvings; }));

    const std::string mp = "mpc";
    auto m = [](R& c) -> mpc::MpcConfig& { return c.mpc.controller; };
    f.push_back(integer(mp, "n_p", [m](R& c) -> int& { return m(c).n_p; }));
    f.push_back(integer(mp, "n_c", [m](R& c) -> int& { return m(c).n_c; }));
    f.push_back(real(mp, "T_s", [m](R& c) -> double& { return m(c).T_s; }));
    f.push_back(real(mp, "lambda", [m](R& c) -> double& { return m(c).lambda; }));
    f.push_back(real(mp, "dy_max", [m](R& c) -> double& { return m(c).dy_max; }));
    f.push_back(real(mp, "y_target", [m](R& c) -> double& { return m(c).y_target; }));
    f.push_back(optional_real(mp, "y_min", [m](R& c) -> std::optional<double>& { return m(c).y_min; }));
    f.push_back(optional_real(mp, "du_max", [m](R& c) -> std::optional<double>& { return m(c).du_max; }));
    f.push_back(real(mp, "x_probe", [m](R& c) -> double& { return m(c).x_probe; }));
    f.push_back(boolean(mp, "first_step_constraint",
                        [m](R& c) -> bool& { return m(c).first_step_constraint; }));
    f.push_back(boolean(mp, "move_constraints", [m](R& c) -> bool& { return m(c).move_constraints; }));
    f.push_back(real(mp, "tol", [m](R& c) -> double& { return m(c).tol; }));
    f.push_back(integer(mp, "max_outer", [m](R& c) -> int& { return m(c).max_outer; }));
    f.push_back(integer(mp, "max_inner", [m](R& c) -> int& { return m(c).max_inner; }));
    f.push_back(integer(mp, "init_grid", [m](R& c) -> int& { return m(c).init_grid; }));
    f.push_back(real(mp, "u0", [](R& c) -> double& { return c.mpc.u0; }));
    f.push_back(real(mp, "duration", [](R& c) -> double& { return c.mpc.duration; }));
    f.push_back({mp, "y_min_schedule",
                 [](const R& c) {
                   return join<std::pair<double, double>>(
                       c.mpc.y_min_schedule,
                       [](const auto& e) { return format_double(e.first) + ":" + format_double(e.second); });
                 },
                 [](R& c, const std::string& v) {
                   c.mpc.y_min_schedule.clear();
                   for (const auto& item : split(v, ',')) {
                     const auto parts = split(item, ':');
                     if (parts.size() != 2) {
                       throw ConfigError("y_min_schedule entries take the form time:value");
                     }
                     c.mpc.y_min_schedule.emplace_back(to_double("y_min_schedule", parts[0]),
                                                       to_double("y_min_schedule", parts[1]));
                   }
                 }});

    const std::string ru = "run";
    f.push_back({ru, "output_dir", [](const R& c) { return c.run.output_dir; },
                 [](R& c, const std::string& v) { c.run.output_dir = trim(v); }});
    f.push_back(real(ru, "window_seconds", [](R& c) -> double& { return c.run.window_seconds; }));
    f.push_back(integer(ru, "steps_per_window", [](R& c) -> int& { return c.run.steps_per_window; }));
    f.push_back({ru, "probes",
                 [](const R& c) { return join<double>(c.run.probes, [](const double& x) { return format_double(x); }); },
                 [](R& c, const std::string& v) {
                   c.run.probes.clear();
                   for (const auto& s : split(v, ',')) c.run.probes.push_back(to_double("probes", s));
                 }});
    f.push_back({ru, "seeds",
                 [](const R& c) {
                   return join<std::uint64_t>(c.run.seeds,
                                              [](const std::uint64_t& x) { return std::to_string(x); });
                 },
                 [](R& c, const std::string& v) {
                   c.run.seeds.clear();
                   for (const auto& s : split(v, ',')) {
                     c.run.seeds.push_back(to_integer<std::uint64_t>("seeds", s));
                   }
                 }});
    f.push_back({ru, "eval_controls",
                 [](const R& c) {
                   return join<double>(c.run.eval_controls, [](const double& x) { return format_double(x); });
                 },
                 [](R& c, const std::string& v) {
                   c.run.eval_controls.clear();
                   for (const auto& s : split(v, ',')) {
                     c.run.eval_controls.push_back(to_double("eval_controls", s));
                   }
                 }});
    f.push_back(integer(ru, "eval_positions", [](R& c) -> int& { return c.run.eval_positions; }));
    return f;
  }();
  return all;
}

const char* const kSections[] = {"system", "normalization", "network", "training",
                                 "plant",  "mpc",           "run"};

}  // namespace

void RunConfig::validate() const {
  system.validate();
  norm.validate();
  for (const auto* a : {&steady_arch, &transient_arch}) {
    if (a->n_layers < 1 || a->hidden_size < 1) throw ConfigError("network sizes must be >= 1");
  }
  steady_training.validate();
  transient_training.validate();
  if (transient_training.sizes.n_i < 1) throw ConfigError("transient training needs n_i >= 1");
  plant.validate();
  if (!(plant_dt > 0)) throw ConfigError("plant dt must be positive");
  mpc.controller.validate(norm);
  if (!(mpc.u0 >= 0 && mpc.u0 <= 1)) throw ConfigError("mpc u0 must lie in [0, 1]");
  if (!(mpc.duration >= 0)) throw ConfigError("mpc duration must be >= 0");
  if (run.window_seconds < 0) throw ConfigError("window_seconds must be >= 0");
  if (run.steps_per_window < 2) throw ConfigError("steps_per_window must be >= 2");
  if (run.probes.empty()) throw ConfigError("at least one probe is required");
  for (double x : run.probes) {
    if (!(x >= 0 && x <= 1)) throw ConfigError("probe positions must lie in [0, 1]");
  }
  for (double u : run.eval_controls) {
    if (!(u >= 0 && u <= 1)) throw ConfigError("evaluation controls must lie in [0, 1]");
  }
  if (run.eval_positions < 2) throw ConfigError("eval_positions must be >= 2");
}

RunConfig preset(const std::string& name) {
  RunConfig c;
  c.preset = name;
  c.steady_arch = net::Architecture{2, 2, 4, 20, net::Activation::tanh, false};
  if (name == "table1-incompressible") {
    c.system = physics::table1_system();
    c.norm = physics::table1_refs();
    c.transient_arch = net::Architecture{4, 2, 4, 20, net::Activation::tanh, false};
    c.steady_training.sizes = {1000, 200, 0};
    c.steady_training.adam.epochs = 200;
    c.steady_training.lbfgs.max_iters = 20000;
    c.transient_training.sizes = {10000, 2000, 1000};
    c.transient_training.adam.epochs = 300;
    c.transient_training.lbfgs.max_iters = 4000;
    c.plant_dt = 0.1;
    c.mpc.controller.n_p = 10;
    c.mpc.controller.n_c = 2;
    c.mpc.controller.T_s = 1.0;
    c.mpc.controller.dy_max = 4e5 / 60.0 * 1.0 / 1e5;  // 4 bar/min over T_s
    c.mpc.controller.y_target = 0.0;
    c.mpc.controller.x_probe = 0.1;
    c.mpc.u0 = 0.9;
    c.mpc.duration = 30.0;
    c.mpc.y_min_schedule = {{0.0, 0.6}, {15.0, 0.45}};
  } else if (name == "table2-compressible") {
    c.system = physics::table2_system();
    c.norm = physics::table2_refs();
    c.steady_arch = net::Architecture{2, 2, 8, 43, net::Activation::tanh, false};
    c.transient_arch = net::Architecture{4, 2, 8, 93, net::Activation::swish, true};
    c.steady_training.sizes = {8723, 434, 0};
    c.steady_training.adam.epochs = 1095;
    c.steady_training.lbfgs.max_iters = 4000;
    c.transient_training.sizes = {4608, 1449, 1213};
    c.transient_training.adam.epochs = 699;
    c.transient_training.lbfgs.max_iters = 1500;
    c.plant_dt = 1.0;
    c.mpc.controller.n_p = 10;
    c.mpc.controller.n_c = 2;
    c.mpc.controller.T_s = 10.0;
    c.mpc.controller.dy_max = 4e5 / 60.0 * 10.0 / 5e6;
    c.mpc.controller.du_max = 4e5 / 60.0 * 10.0 / 5e6;
    c.mpc.controller.y_target = 0.0;
    c.mpc.controller.x_probe = 0.1;
    c.mpc.u0 = 0.7;
    c.mpc.duration = 600.0;
    c.mpc.y_min_schedule = {{0.0, 0.95}, {200.0, 0.945}, {400.0, 0.94}};
    c.run.eval_controls = {0.3, 0.4, 0.5, 0.6, 0.7};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  c.run.probes = {0.1};
  return c;
}

RunConfig parse(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  std::set<std::string> known_sections(std::begin(kSections), std::end(kSections));
  for (const auto& [name, sec] : tree) {
    if (!known_sections.count(name)) throw ConfigError("unknown config section [" + name + "]");
    if (sec.empty() && !sec.data().empty()) throw ConfigError("key '" + name + "' outside a section");
  }
  RunConfig cfg;
  if (auto p = tree.get_optional<std::string>("network.preset"); p && !trim(*p).empty()) {
    cfg = preset(trim(*p));
  }
  for (const auto& [name, sec] : tree) {
    for (const auto& [key, node] : sec) {
      const Field* match = nullptr;
      for (const auto& f : fields()) {
        if (f.section == name && f.key == key) match = &f;
      }
      if (!match) throw ConfigError("unknown key '" + key + "' in [" + name + "]");
      if (key == "preset") continue;
      match->set(cfg, node.data());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string serialize(const RunConfig& cfg) {
  std::string out;
  for (const char* sec : kSections) {
    out += std::string(out.empty() ? "" : "\n") + "[" + sec + "]\n";
    for (const auto& f : fields()) {
      if (f.section == sec) out += f.key + " = " + f.get(cfg) + "\n";
    }
  }
  return out;
}

void save(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << serialize(cfg);
  if (!out) throw IoError("failed writing " + path);
}

bool equivalent(const RunConfig& a, const RunConfig& b) { return serialize(a) == serialize(b); }

}  // namespace pinc::config
