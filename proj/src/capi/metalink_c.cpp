#include "metalink/metalink.h"

#include <atomic>
#include <cstring>
#include <fstream>
#include <memory>
#include <mutex>
#include <new>
#include <string>
#include <variant>

#include "metalink/checkpoint.hpp"
#include "metalink/errors.hpp"
#include "metalink/harness/config.hpp"
#include "metalink/harness/experiment.hpp"
#include "metalink/oracles/suites.hpp"
#include "metalink/version.hpp"

struct mtl_config {
  metalink::harness::ExperimentConfig cfg;
};

struct mtl_model {
  std::variant<metalink::link::EncoderModel, metalink::link::DecoderModel> model;
};

namespace {

using namespace metalink;

thread_local std::string g_error;
thread_local std::string g_error_key;

static_assert(std::atomic<bool>::is_always_lock_free);
std::atomic<bool> g_stop{false};

std::mutex g_log_mutex;
mtl_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

void log_line(std::string_view line) {
  const std::lock_guard lock(g_log_mutex);
  if (g_log_fn) g_log_fn(std::string(line).c_str(), g_log_user);
}

mtl_status fail(mtl_status status, const char* what, const std::string& key = {}) {
  g_error = what;
  g_error_key = key;
  return status;
}

template <class F>
mtl_status guarded(F&& body) noexcept {
  try {
    body();
    g_error.clear();
    g_error_key.clear();
    return MTL_OK;
  } catch (const ConfigError& e) {
    return fail(MTL_ERR_CONFIG, e.what(), e.key());
  } catch (const NumericError& e) {
    return fail(MTL_ERR_NUMERIC, e.what());
  } catch (const IoError& e) {
    return fail(MTL_ERR_IO, e.what());
  } catch (const harness::Interrupted& e) {
    return fail(MTL_ERR_INTERRUPTED, e.what());
  } catch (const ShapeError& e) {
    return fail(MTL_ERR_ARGUMENT, e.what());
  } catch (const ArgumentError& e) {
    return fail(MTL_ERR_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MTL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MTL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MTL_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw ArgumentError(what);
}

mtl_status make_config(mtl_config** out, harness::ExperimentConfig cfg) {
  *out = new mtl_config{std::move(cfg)};
  return MTL_OK;
}

// Writes outputs, then reports an interruption as a status.
void finish(const char* out_dir, const harness::ExperimentConfig& cfg,
            const harness::ExperimentResult& result, std::string_view verb) {
  harness::write_outputs(out_dir, cfg, result, verb);
  if (result.interrupted) throw harness::Interrupted{};
}

}  // namespace

extern "C" {

MTL_API const char* mtl_version(void) { return metalink::version().data(); }
MTL_API const char* mtl_git_describe(void) { return metalink::git_describe().data(); }
MTL_API const char* mtl_last_error(void) { return g_error.c_str(); }
MTL_API const char* mtl_last_error_key(void) { return g_error_key.c_str(); }

MTL_API mtl_status mtl_config_default(mtl_config** out) {
  return guarded([&] {
    require(out != nullptr, "out must not be null");
    make_config(out, {});
  });
}

MTL_API mtl_status mtl_config_load(const char* path, mtl_config** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out must not be null");
    make_config(out, harness::load_config(path));
  });
}

MTL_API mtl_status mtl_config_parse(const char* text, mtl_config** out) {
  return guarded([&] {
    require(text != nullptr && out != nullptr, "text and out must not be null");
    make_config(out, harness::parse_config(text));
  });
}

MTL_API mtl_status mtl_config_set(mtl_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg != nullptr && key != nullptr && value != nullptr, "null argument");
    harness::set_key(cfg->cfg, key, value);
  });
}

MTL_API mtl_status mtl_config_get(const mtl_config* cfg, const char* key, char* buf, size_t cap,
                                  size_t* needed) {
  return guarded([&] {
    require(cfg != nullptr && key != nullptr, "null argument");
    for (const auto& [name, value] : harness::config_entries(cfg->cfg)) {
      if (name != key) continue;
      if (needed) *needed = value.size() + 1;
      require(buf != nullptr && cap > value.size(), "buffer too small");
      std::memcpy(buf, value.c_str(), value.size() + 1);
      return;
    }
    throw ConfigError(std::string("unknown key '") + key + "'", key);
  });
}

MTL_API mtl_status mtl_config_validate(const mtl_config* cfg) {
  return guarded([&] {
    require(cfg != nullptr, "cfg must not be null");
    cfg->cfg.validate();
  });
}

MTL_API void mtl_config_free(mtl_config* cfg) { delete cfg; }

MTL_API void mtl_set_log(mtl_log_fn fn, void* user) {
  const std::lock_guard lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user;
}

MTL_API mtl_status mtl_train(const mtl_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(cfg != nullptr && out_dir != nullptr, "null argument");
    cfg->cfg.validate();
    finish(out_dir, cfg->cfg, harness::train_and_save(cfg->cfg, out_dir, &g_stop, log_line),
           "train");
  });
}

MTL_API mtl_status mtl_eval(const mtl_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(cfg != nullptr && out_dir != nullptr, "null argument");
    cfg->cfg.validate();
    finish(out_dir, cfg->cfg, harness::evaluate_saved(cfg->cfg, out_dir, &g_stop, log_line),
           "eval");
  });
}

MTL_API mtl_status mtl_sweep(const mtl_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(cfg != nullptr && out_dir != nullptr, "null argument");
    cfg->cfg.validate();
    finish(out_dir, cfg->cfg, harness::run_experiment(cfg->cfg, &g_stop, log_line), "sweep");
  });
}

MTL_API void mtl_request_stop(void) { g_stop.store(true, std::memory_order_relaxed); }
MTL_API void mtl_clear_stop(void) { g_stop.store(false, std::memory_order_relaxed); }

MTL_API mtl_status mtl_selftest(uint64_t seed, mtl_check_fn fn, void* user, int* failures) {
  return guarded([&] {
    int failed = 0;
    oracles::run_all(seed, [&](const oracles::CheckResult& r) {
      if (!r.passed) ++failed;
      if (fn) {
        const mtl_check c{r.name.c_str(), r.passed ? 1 : 0, r.detail.c_str(), r.seconds};
        fn(&c, user);
      }
    });
    if (failures) *failures = failed;
  });
}

MTL_API mtl_status mtl_model_load(const char* path, mtl_model** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out must not be null");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(std::string("cannot open ") + path);
    const link::Checkpoint ckpt = link::read_checkpoint(in);
    if (ckpt.kind == "encoder") {
      *out = new mtl_model{link::encoder_from_checkpoint(ckpt)};
    } else {
      *out = new mtl_model{link::decoder_from_checkpoint(ckpt)};
    }
  });
}

MTL_API mtl_status mtl_model_save(const mtl_model* model, const char* path) {
  return guarded([&] {
    require(model != nullptr && path != nullptr, "null argument");
    std::visit([&](const auto& m) {
      using T = std::decay_t<decltype(m)>;
      if constexpr (std::is_same_v<T, link::EncoderModel>) {
        link::save_encoder(path, m);
      } else {
        link::save_decoder(path, m);
      }
    }, model->model);
  });
}

MTL_API void mtl_model_free(mtl_model* model) { delete model; }

MTL_API mtl_status mtl_model_info_get(const mtl_model* model, mtl_model_info* out) {
  return guarded([&] {
    require(model != nullptr && out != nullptr, "null argument");
    *out = {};
    if (const auto* enc = std::get_if<link::EncoderModel>(&model->model)) {
      *out = {MTL_MODEL_ENCODER, enc->k, enc->n, 0, enc->hidden, enc->es, enc->sigma,
              enc->params.size()};
    } else {
      const auto& dec = std::get<link::DecoderModel>(model->model);
      *out = {MTL_MODEL_DECODER, dec.k, dec.n, dec.taps, dec.hidden, 0.0, 0.0, dec.params.size()};
    }
  });
}

MTL_API mtl_status mtl_model_encode(const mtl_model* model, int message, double* out, size_t len) {
  return guarded([&] {
    require(model != nullptr && out != nullptr, "null argument");
    const auto* enc = std::get_if<link::EncoderModel>(&model->model);
    require(enc != nullptr, "model is not an encoder");
    require(len == 2 * static_cast<std::size_t>(enc->n), "output length must be 2n");
    require(enc->messages().contains(message), "message out of range");
    const auto v = link::interleave(link::encode(*enc, message));
    std::copy(v.begin(), v.end(), out);
  });
}

MTL_API mtl_status mtl_model_decode_probs(const mtl_model* model, const double* y, size_t y_len,
                                          double* probs, size_t probs_len) {
  return guarded([&] {
    require(model != nullptr && y != nullptr && probs != nullptr, "null argument");
    const auto* dec = std::get_if<link::DecoderModel>(&model->model);
    require(dec != nullptr, "model is not a decoder");
    require(y_len == 2 * dec->input_len(), "input length must be 2(n+L-1)");
    require(probs_len == dec->messages().size(), "output length must be 2^k");
    const auto p = link::decode_probs(*dec, link::deinterleave({y, y_len}));
    std::copy(p.begin(), p.end(), probs);
  });
}

}  // extern "C"
