// Command-line front end. Links only the C interface.
#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "pinc/pinc.h"

namespace {

// Exit code contract: 0 success, 2 numerical failure, 1 for every other error.
int exit_code(int status) {
  if (status == PINC_OK) return 0;
  return status == PINC_ERR_NUMERICAL ? 2 : 1;
}

int fail(int status, const char* what) {
  std::fprintf(stderr, "pinc: %s: %s\n", what, pinc_last_error());
  return exit_code(status);
}

struct ConfigSource {
  std::string path;
  std::string preset;
  std::vector<std::string> overrides;  // section.key=value
};

void add_config_options(CLI::App* cmd, ConfigSource& src) {
  auto* file = cmd->add_option("--config", src.path, "INI configuration file");
  auto* pre = cmd->add_option("--preset", src.preset,
                              "table1-incompressible or table2-compressible");
  file->excludes(pre);
  cmd->add_option("--set", src.overrides, "Override section.key=value (repeatable)");
}

int open_config(const ConfigSource& src, pinc_config** cfg) {
  int st = PINC_OK;
  if (!src.path.empty()) {
    st = pinc_config_load(src.path.c_str(), cfg);
  } else if (!src.preset.empty()) {
    st = pinc_config_preset(src.preset.c_str(), cfg);
  } else {
    std::fprintf(stderr, "pinc: one of --config or --preset is required\n");
    return 1;
  }
  if (st != PINC_OK) return fail(st, "config");
  for (const auto& o : src.overrides) {
    const auto dot = o.find('.');
    const auto eq = o.find('=');
    if (dot == std::string::npos || eq == std::string::npos || eq < dot) {
      std::fprintf(stderr, "pinc: --set expects section.key=value, got '%s'\n", o.c_str());
      pinc_config_free(*cfg);
      *cfg = nullptr;
      return 1;
    }
    st = pinc_config_set(*cfg, o.substr(0, dot).c_str(), o.substr(dot + 1, eq - dot - 1).c_str(),
                         o.substr(eq + 1).c_str());
    if (st != PINC_OK) {
      pinc_config_free(*cfg);
      *cfg = nullptr;
      return fail(st, "config");
    }
  }
  return 0;
}

// Handles release automatically so every early return is leak free.
struct Handles {
  pinc_config* cfg = nullptr;
  pinc_model* model = nullptr;
  pinc_model* aux = nullptr;
  ~Handles() {
    pinc_config_free(cfg);
    pinc_model_free(model);
    pinc_model_free(aux);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed neural control of single-phase pipe flow"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads; 1 gives bitwise reproducible output")
      ->check(CLI::PositiveNumber);

  ConfigSource train_src, sim_src, mpc_src, cfg_src;

  auto* train = app.add_subcommand("train", "Train a steady-state or transient network");
  add_config_options(train, train_src);
  std::string regime = "steady", ss_model, out_model, loss_csv;
  bool verbose = false;
  train->add_option("--regime", regime)->check(CLI::IsMember({"steady", "transient"}));
  train->add_option("--ss-model", ss_model, "Steady-state model (transient regime)");
  train->add_option("--out", out_model, "Model file to write")->required();
  train->add_option("--loss-csv", loss_csv, "Per-epoch loss CSV");
  train->add_flag("--verbose", verbose);

  auto* sim = app.add_subcommand("simulate", "Simulate a control schedule");
  add_config_options(sim, sim_src);
  std::string source = "plant", sim_model, schedule, sim_out;
  sim->add_option("--source", source)->check(CLI::IsMember({"plant", "pinc"}));
  sim->add_option("--model", sim_model, "Transient model (source pinc)");
  sim->add_option("--schedule", schedule, "Schedule file: u0 then one control per window")
      ->required();
  sim->add_option("--out", sim_out, "Trajectory CSV")->required();

  auto* mpc = app.add_subcommand("mpc", "Run the closed loop against the plant");
  add_config_options(mpc, mpc_src);
  std::string mpc_model, mpc_out;
  bool perfect = false;
  auto* model_opt = mpc->add_option("--model", mpc_model, "Transient model used as predictor");
  auto* perfect_opt = mpc->add_flag("--perfect-model", perfect, "Use the plant as predictor");
  model_opt->excludes(perfect_opt);
  mpc->add_option("--out", mpc_out, "Closed-loop CSV")->required();

  auto* eval = app.add_subcommand("evaluate", "Compare two trajectory CSVs");
  std::string true_csv, est_csv, eval_out;
  eval->add_option("--true", true_csv)->required();
  eval->add_option("--est", est_csv)->required();
  eval->add_option("--out", eval_out, "Metric CSV")->required();

  auto* dump = app.add_subcommand("config", "Write the canonical form of a configuration");
  add_config_options(dump, cfg_src);
  std::string cfg_out;
  dump->add_option("--out", cfg_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  Handles h;
  if (*train) {
    if (int rc = open_config(train_src, &h.cfg)) return rc;
    if (regime == "transient") {
      if (ss_model.empty()) {
        std::fprintf(stderr, "pinc: transient training needs --ss-model\n");
        return 1;
      }
      if (int st = pinc_model_load(ss_model.c_str(), &h.aux)) return fail(st, "steady model");
    }
    const int st = pinc_train(h.cfg, regime.c_str(), h.aux, threads, verbose ? 1 : 0,
                              loss_csv.empty() ? nullptr : loss_csv.c_str(), &h.model);
    if (st != PINC_OK) return fail(st, "train");
    if (int s2 = pinc_model_save(h.model, out_model.c_str())) return fail(s2, "save");
    return 0;
  }
  if (*sim) {
    if (int rc = open_config(sim_src, &h.cfg)) return rc;
    if (source == "pinc") {
      if (sim_model.empty()) {
        std::fprintf(stderr, "pinc: source pinc needs --model\n");
        return 1;
      }
      if (int st = pinc_model_load(sim_model.c_str(), &h.model)) return fail(st, "model");
    }
    const int st = pinc_simulate(h.cfg, source.c_str(), h.model, schedule.c_str(), sim_out.c_str());
    return st == PINC_OK ? 0 : fail(st, "simulate");
  }
  if (*mpc) {
    if (int rc = open_config(mpc_src, &h.cfg)) return rc;
    if (!perfect) {
      if (mpc_model.empty()) {
        std::fprintf(stderr, "pinc: mpc needs --model or --perfect-model\n");
        return 1;
      }
      if (int st = pinc_model_load(mpc_model.c_str(), &h.model)) return fail(st, "model");
    }
    int violations = 0, failed = 0;
    const int st = pinc_mpc(h.cfg, h.model, mpc_out.c_str(), &violations, &failed);
    if (st != PINC_OK) return fail(st, "mpc");
    std::printf("rate_violations=%d failed_steps=%d\n", violations, failed);
    return 0;
  }
  if (*eval) {
    const int st = pinc_evaluate(true_csv.c_str(), est_csv.c_str(), eval_out.c_str());
    return st == PINC_OK ? 0 : fail(st, "evaluate");
  }
  if (*dump) {
    if (int rc = open_config(cfg_src, &h.cfg)) return rc;
    const int st = pinc_config_save(h.cfg, cfg_out.c_str());
    return st == PINC_OK ? 0 : fail(st, "config");
  }
  return 1;
}
