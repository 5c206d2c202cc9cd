#include "pinc/pinc.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "pinc/config.hpp"
#include "pinc/error.hpp"
#include "pinc/workflows.hpp"

struct pinc_config {
  pinc::config::RunConfig value;
};

struct pinc_model {
  pinc::net::NetworkModel value;
};

namespace {

thread_local std::string g_last_error;

int status_of(pinc::ErrorKind k) {
  switch (k) {
    case pinc::ErrorKind::config: return PINC_ERR_CONFIG;
    case pinc::ErrorKind::numerical: return PINC_ERR_NUMERICAL;
    case pinc::ErrorKind::dimension: return PINC_ERR_DIMENSION;
    case pinc::ErrorKind::format: return PINC_ERR_FORMAT;
    case pinc::ErrorKind::version: return PINC_ERR_VERSION;
    case pinc::ErrorKind::io: return PINC_ERR_IO;
    case pinc::ErrorKind::argument: return PINC_ERR_ARGUMENT;
  }
  return PINC_ERR_INTERNAL;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return PINC_OK;
  } catch (const pinc::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return PINC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PINC_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw pinc::Error(pinc::ErrorKind::argument, std::string(what) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* pinc_version(void) { return "1.0.0"; }

const char* pinc_last_error(void) { return g_last_error.c_str(); }

int pinc_config_preset(const char* name, pinc_config** out) {
  return guarded([&] {
    need(name, "name");
    need(out, "out");
    *out = new pinc_config{pinc::config::preset(name)};
  });
}

int pinc_config_load(const char* path, pinc_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new pinc_config{pinc::config::load(path)};
  });
}

int pinc_config_parse(const char* text, pinc_config** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    *out = new pinc_config{pinc::config::parse(text)};
  });
}

int pinc_config_save(const pinc_config* cfg, const char* path) {
  return guarded([&] {
    need(cfg, "cfg");
    need(path, "path");
    pinc::config::save(cfg->value, path);
  });
}

int pinc_config_serialize(const pinc_config* cfg, char* buf, size_t size, size_t* needed) {
  return guarded([&] {
    need(cfg, "cfg");
    const std::string s = pinc::config::serialize(cfg->value);
    if (needed) *needed = s.size() + 1;
    if (buf && size > 0) {
      const size_t n = std::min(size - 1, s.size());
      std::memcpy(buf, s.data(), n);
      buf[n] = '\0';
    }
  });
}

int pinc_config_set(pinc_config* cfg, const char* section, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(section, "section");
    need(key, "key");
    need(value, "value");
    const std::string text = pinc::config::serialize(cfg->value);
    // Replace the line in the canonical text and re-parse, so validation applies.
    std::string patched;
    std::string current;
    bool done = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
      const std::size_t end = text.find('\n', pos);
      std::string line = text.substr(pos, end - pos);
      pos = end == std::string::npos ? text.size() : end + 1;
      if (!line.empty() && line.front() == '[') current = line.substr(1, line.size() - 2);
      const std::string prefix = std::string(key) + " = ";
      if (current == section && line.rfind(prefix, 0) == 0) {
        line = prefix + value;
        done = true;
      }
      patched += line + "\n";
    }
    if (!done) {
      throw pinc::ConfigError("unknown key '" + std::string(key) + "' in [" + section + "]");
    }
    cfg->value = pinc::config::parse(patched);
  });
}

void pinc_config_free(pinc_config* cfg) { delete cfg; }

int pinc_model_load(const char* path, pinc_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new pinc_model{pinc::net::load_model(path)};
  });
}

int pinc_model_save(const pinc_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    pinc::net::save_model(model->value, path);
  });
}

void pinc_model_free(pinc_model* model) { delete model; }

int pinc_model_dims(const pinc_model* model, int* input_dim, int* output_dim) {
  return guarded([&] {
    need(model, "model");
    if (input_dim) *input_dim = model->value.arch.input_dim;
    if (output_dim) *output_dim = model->value.arch.output_dim;
  });
}

int pinc_model_eval(const pinc_model* model, const double* inputs, size_t n, double* outputs) {
  return guarded([&] {
    need(model, "model");
    if (n == 0) return;
    need(inputs, "inputs");
    need(outputs, "outputs");
    const auto& m = model->value;
    const Eigen::Map<const Eigen::MatrixXd> in(inputs, m.arch.input_dim,
                                               static_cast<Eigen::Index>(n));
    const Eigen::MatrixXd out = pinc::net::evaluate_batch(m.arch, m.params, in, {}).value;
    Eigen::Map<Eigen::MatrixXd>(outputs, m.arch.output_dim, static_cast<Eigen::Index>(n)) = out;
  });
}

int pinc_train(const pinc_config* cfg, const char* regime, const pinc_model* steady_model,
               int threads, int verbose, const char* loss_csv, pinc_model** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(regime, "regime");
    need(out, "out");
    if (threads < 1) throw pinc::ConfigError("threads must be >= 1");
    const auto r = pinc::physics::regime_from_string(regime);
    const pinc::net::NetworkModel* ss = steady_model ? &steady_model->value : nullptr;
    if (r == pinc::physics::Regime::steady) ss = nullptr;
    auto res = pinc::workflows::train(cfg->value, r, ss, threads, verbose != 0);
    if (loss_csv) pinc::training::write_loss_csv(res.result.report, loss_csv);
    *out = new pinc_model{std::move(res.result.model)};
  });
}

int pinc_simulate(const pinc_config* cfg, const char* source, const pinc_model* model,
                  const char* schedule_path, const char* out_csv) {
  return guarded([&] {
    need(cfg, "cfg");
    need(source, "source");
    need(schedule_path, "schedule_path");
    need(out_csv, "out_csv");
    const auto sched = pinc::workflows::read_schedule(cfg->value, schedule_path);
    const std::string src = source;
    pinc::Trajectory traj;
    if (src == "plant") {
      traj = pinc::workflows::simulate_plant(cfg->value, sched);
    } else if (src == "pinc") {
      if (!model) throw pinc::ConfigError("source pinc needs a transient model");
      traj = pinc::workflows::simulate_pinc(cfg->value, model->value, sched);
    } else {
      throw pinc::ConfigError("source must be plant or pinc");
    }
    pinc::write_trajectory_csv(traj, out_csv);
  });
}

int pinc_mpc(const pinc_config* cfg, const pinc_model* model, const char* out_csv,
             int* violations, int* failed_steps) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out_csv, "out_csv");
    const auto res = pinc::workflows::run_mpc(cfg->value, model ? &model->value : nullptr);
    pinc::mpc::write_closed_loop_csv(res, out_csv);
    if (violations) *violations = res.violations;
    if (failed_steps) {
      int n = 0;
      for (const auto& r : res.history) n += r.solve_status == "failed" ? 1 : 0;
      *failed_steps = n;
    }
  });
}

int pinc_evaluate(const char* true_csv, const char* est_csv, const char* out_csv) {
  return guarded([&] {
    need(true_csv, "true_csv");
    need(est_csv, "est_csv");
    need(out_csv, "out_csv");
    const auto a = pinc::read_trajectory_csv(true_csv);
    const auto b = pinc::read_trajectory_csv(est_csv);
    pinc::metrics::write_metric_csv(pinc::workflows::evaluate(a, b), out_csv);
  });
}

}  // extern "C"
