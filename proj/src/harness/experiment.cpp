#include "metalink/harness/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "config_json.hpp"
#include "metalink/checkpoint.hpp"
#include "metalink/errors.hpp"
#include "metalink/random.hpp"
#include "metalink/version.hpp"

namespace metalink::harness {

namespace {

// Stream tags; each purpose gets an independent generator per run.
constexpr std::uint64_t kTrainTag = 1;
constexpr std::uint64_t kSelectTag = 2;
constexpr std::uint64_t kTestTag = 3;
constexpr std::uint64_t kArchTag = 4;

std::string number_text(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void check(const StopFn& stop) {
  if (stop && stop()) throw Interrupted{};
}

StopFn stop_from(const std::atomic<bool>* flag, const std::atomic<bool>& halt) {
  return [flag, &halt] { return halt.load() || (flag && flag->load()); };
}

// Runs fn(0..count-1) on up to `threads` workers. Interrupted jobs mark the
// result; the first other exception stops remaining jobs and is rethrown.
template <class Fn>
bool run_pool(std::size_t count, std::size_t threads, std::atomic<bool>& halt, Fn fn) {
  std::atomic<std::size_t> next{0};
  std::atomic<bool> interrupted{false};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    while (!halt.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (const Interrupted&) {
        interrupted = true;
      } catch (...) {
        const std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        halt = true;
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, count));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return interrupted.load() || next.load() < count;
}

struct Job {
  Scheme scheme;
  std::uint64_t run_seed;
  std::size_t point;
  double rho;
};

struct Collector {
  std::mutex mu;
  ExperimentResult result;

  void add(std::vector<BlerRecord> rows, std::optional<RunHistory> history,
           std::optional<Selection> selection) {
    const std::lock_guard lock(mu);
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
    if (history) result.histories.push_back(std::move(*history));
    if (selection) result.selections.push_back(*selection);
  }
};

std::string describe(const Job& job) {
  return std::string(scheme_name(job.scheme)) + " run " + std::to_string(job.run_seed) + " rho " +
         number_text(job.rho);
}

void log_line(const LogFn& log, const std::string& line) {
  if (log) log(line);
}

link::DecoderModel arch_for(const ExperimentConfig& cfg) {
  Rng rng = make_rng(0, {kArchTag});
  return link::DecoderModel::init(cfg.train.k, cfg.train.n, cfg.train.taps, rng, cfg.train.hidden);
}

void sort_histories(ExperimentResult& r, const ExperimentConfig& cfg) {
  auto order = [&](Scheme s) {
    return std::find(cfg.schemes.begin(), cfg.schemes.end(), s) - cfg.schemes.begin();
  };
  std::sort(r.histories.begin(), r.histories.end(), [&](const RunHistory& a, const RunHistory& b) {
    return std::tuple(a.run_seed, a.point, order(a.scheme)) <
           std::tuple(b.run_seed, b.point, order(b.scheme));
  });
  std::sort(r.selections.begin(), r.selections.end(), [&](const Selection& a, const Selection& b) {
    return std::tuple(a.run_seed, a.rho, order(a.scheme)) <
           std::tuple(b.run_seed, b.rho, order(b.scheme));
  });
}

}  // namespace

TrainedScheme train_scheme(const ExperimentConfig& cfg, Scheme scheme, std::uint64_t run_seed,
                           double rho, std::size_t point, const training::FrameCallback& snapshot,
                           const StopFn& stop) {
  if (!needs_training(scheme)) {
    throw ArgumentError(std::string(scheme_name(scheme)) + " has no training phase");
  }
  training::TrainConfig tc = cfg.train_for(scheme);
  tc.rho = rho;
  tc.seed = run_seed;

  TrainedScheme out;
  out.selection = {scheme, run_seed, rho, tc.frames, std::numeric_limits<double>::quiet_NaN()};
  std::optional<std::pair<link::EncoderModel, link::DecoderModel>> best;
  double best_bler = std::numeric_limits<double>::infinity();
  const std::size_t select_p = cfg.select_pilots > 0 ? cfg.select_pilots : tc.pilots;

  const training::FrameCallback on_frame = [&](std::uint64_t frame,
                                               const training::TrainResult& current) {
    check(stop);
    if (snapshot) snapshot(frame, current);
    if (cfg.select_every == 0) return;
    if (frame % cfg.select_every != 0 && frame != tc.frames) return;
    const auto test_scheme = make_test_scheme(cfg, scheme, &current, select_p);
    TestConfig val;
    val.pilots = select_p;
    val.payload_blocks = cfg.select_blocks;
    val.test_frames = cfg.select_frames;
    val.fading = cfg.test_fading;
    Rng rng = make_rng(run_seed, {kSelectTag, point});
    const double b = evaluate_bler(*test_scheme, cfg.link(), val, rng).bler;
    if (b < best_bler) {
      best_bler = b;
      best.emplace(current.encoder, current.decoder);
      out.selection.frame = frame;
      out.selection.validation_bler = b;
    }
  };

  Rng rng = make_rng(run_seed, {kTrainTag, point});
  out.models = is_meta_trained(scheme) ? training::run_meta_training(tc, rng, on_frame)
                                       : training::run_joint_training(tc, rng, on_frame);
  if (best) {
    out.models.encoder = std::move(best->first);
    out.models.decoder = std::move(best->second);
  }
  return out;
}

std::unique_ptr<TestScheme> make_test_scheme(const ExperimentConfig& cfg, Scheme scheme,
                                             const training::TrainResult* models,
                                             std::size_t pilots) {
  const auto& t = cfg.train;
  switch (scheme) {
    case Scheme::BpskMlMmse:
      return make_bpsk_ml_scheme(t.k, t.n, t.taps, t.es, cfg.csi);
    case Scheme::BpskNeuralScratch:
      return make_scratch_scheme(arch_for(cfg), cfg.scratch_eta, cfg.scratch_steps, t.es);
    default:
      break;
  }
  if (!models) throw ArgumentError(std::string(scheme_name(scheme)) + " needs trained models");
  const double eta = is_meta_trained(scheme) ? cfg.test_eta_meta : cfg.test_eta_other;
  const double normalizer =
      t.normalize_by_pilots ? static_cast<double>(std::max<std::size_t>(pilots, 1))
                            : static_cast<double>(t.frame_len);
  std::optional<link::EncoderModel> enc;
  if (transmitter_of(scheme) == training::Transmitter::Neural) enc = models->encoder;
  return make_neural_scheme(std::move(enc), models->decoder, eta, cfg.test_adapt_steps, normalizer,
                            t.es);
}

double test_bler(const ExperimentConfig& cfg, const TestScheme& scheme, std::uint64_t run_seed,
                 std::size_t pilots, std::size_t point) {
  TestConfig test;
  test.pilots = pilots;
  test.payload_blocks = cfg.payload_blocks;
  test.test_frames = cfg.test_frames;
  test.fading = cfg.test_fading;
  Rng rng = make_rng(run_seed, {kTestTag, pilots, point});
  return evaluate_bler(scheme, cfg.link(), test, rng).bler;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::atomic<bool>* stop,
                                const LogFn& log) {
  cfg.validate();
  std::vector<double> rhos{cfg.train.rho};
  if (cfg.axis == SweepAxis::Rho) rhos = cfg.rho_values;
  std::vector<std::size_t> frame_points{cfg.train.frames};
  if (cfg.axis == SweepAxis::TrainFrames) {
    frame_points = cfg.frame_values;
    std::sort(frame_points.begin(), frame_points.end());
    frame_points.erase(std::unique(frame_points.begin(), frame_points.end()), frame_points.end());
  }

  std::vector<Job> jobs;
  for (Scheme s : cfg.schemes) {
    for (auto seed : cfg.run_seeds()) {
      for (std::size_t p = 0; p < rhos.size(); ++p) jobs.push_back({s, seed, p, rhos[p]});
    }
  }

  std::atomic<bool> halt{false};
  const StopFn stopped = stop_from(stop, halt);
  Collector out;

  auto run_job = [&](std::size_t i) {
    const Job& job = jobs[i];
    std::vector<BlerRecord> rows;
    auto emit = [&](std::size_t pilots, std::size_t frames, double bler) {
      rows.push_back({job.scheme, pilots, job.rho, frames, job.run_seed, bler, 0.0});
    };

    if (!needs_training(job.scheme)) {
      for (auto pilots : cfg.test_pilots) {
        check(stopped);
        const auto scheme = make_test_scheme(cfg, job.scheme, nullptr, pilots);
        const double b = test_bler(cfg, *scheme, job.run_seed, pilots, job.point);
        for (auto f : frame_points) emit(pilots, f, b);
      }
      out.add(std::move(rows), std::nullopt, std::nullopt);
      log_line(log, "evaluated " + describe(job));
      return;
    }

    if (cfg.axis == SweepAxis::TrainFrames) {
      // Snapshots at the requested frame counts; the reported BLER at f is
      // the best test BLER among snapshots up to f.
      std::map<std::uint64_t, training::TrainResult> snaps;
      const training::FrameCallback keep = [&](std::uint64_t f, const training::TrainResult& r) {
        if (std::binary_search(frame_points.begin(), frame_points.end(), f)) {
          training::TrainResult copy;
          copy.transmitter = r.transmitter;
          copy.encoder = r.encoder;
          copy.decoder = r.decoder;
          snaps.emplace(f, std::move(copy));
        }
      };
      ExperimentConfig plain = cfg;
      plain.select_every = 0;
      plain.train.frames = frame_points.back();
      TrainedScheme trained = train_scheme(plain, job.scheme, job.run_seed, job.rho, job.point, keep,
                                           stopped);
      for (auto pilots : cfg.test_pilots) {
        double best = std::numeric_limits<double>::infinity();
        for (auto f : frame_points) {
          check(stopped);
          const auto scheme = make_test_scheme(cfg, job.scheme, &snaps.at(f), pilots);
          best = std::min(best, test_bler(cfg, *scheme, job.run_seed, pilots, job.point));
          emit(pilots, f, best);
        }
      }
      out.add(std::move(rows),
              RunHistory{job.scheme, job.run_seed, job.point, std::move(trained.models.history)},
              std::nullopt);
      log_line(log, "trained and evaluated " + describe(job));
      return;
    }

    TrainedScheme trained = train_scheme(cfg, job.scheme, job.run_seed, job.rho, job.point, {},
                                         stopped);
    for (auto pilots : cfg.test_pilots) {
      check(stopped);
      const auto scheme = make_test_scheme(cfg, job.scheme, &trained.models, pilots);
      emit(pilots, cfg.train.frames, test_bler(cfg, *scheme, job.run_seed, pilots, job.point));
    }
    std::string msg = "trained and evaluated " + describe(job);
    if (cfg.select_every > 0) {
      msg += " (selected frame " + std::to_string(trained.selection.frame) + ", validation BLER " +
             number_text(trained.selection.validation_bler) + ")";
    }
    out.add(std::move(rows),
            RunHistory{job.scheme, job.run_seed, job.point, std::move(trained.models.history)},
            cfg.select_every > 0 ? std::optional(trained.selection) : std::nullopt);
    log_line(log, msg);
  };

  out.result.interrupted = run_pool(jobs.size(), cfg.threads, halt, run_job);
  finalize_rows(out.result.rows);
  sort_histories(out.result, cfg);
  return std::move(out.result);
}

std::filesystem::path encoder_checkpoint_path(const std::filesystem::path& dir, Scheme s,
                                              std::uint64_t run_seed) {
  return dir / "checkpoints" /
         (std::string(scheme_name(s)) + "-run" + std::to_string(run_seed) + ".encoder.ckpt");
}

std::filesystem::path decoder_checkpoint_path(const std::filesystem::path& dir, Scheme s,
                                              std::uint64_t run_seed) {
  return dir / "checkpoints" /
         (std::string(scheme_name(s)) + "-run" + std::to_string(run_seed) + ".decoder.ckpt");
}

ExperimentResult train_and_save(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                                const std::atomic<bool>* stop, const LogFn& log) {
  cfg.validate();
  std::vector<Job> jobs;
  for (Scheme s : cfg.schemes) {
    if (!needs_training(s)) {
      log_line(log, std::string(scheme_name(s)) + " has no training phase, skipped");
      continue;
    }
    for (auto seed : cfg.run_seeds()) jobs.push_back({s, seed, 0, cfg.train.rho});
  }
  std::filesystem::create_directories(dir / "checkpoints");

  std::atomic<bool> halt{false};
  const StopFn stopped = stop_from(stop, halt);
  Collector out;
  auto run_job = [&](std::size_t i) {
    const Job& job = jobs[i];
    TrainedScheme trained = train_scheme(cfg, job.scheme, job.run_seed, job.rho, 0, {}, stopped);
    if (transmitter_of(job.scheme) == training::Transmitter::Neural) {
      link::save_encoder(encoder_checkpoint_path(dir, job.scheme, job.run_seed).string(),
                         trained.models.encoder);
    }
    link::save_decoder(decoder_checkpoint_path(dir, job.scheme, job.run_seed).string(),
                       trained.models.decoder);
    out.add({}, RunHistory{job.scheme, job.run_seed, 0, std::move(trained.models.history)},
            cfg.select_every > 0 ? std::optional(trained.selection) : std::nullopt);
    log_line(log, "trained " + describe(job));
  };
  out.result.interrupted = run_pool(jobs.size(), cfg.threads, halt, run_job);
  sort_histories(out.result, cfg);
  return std::move(out.result);
}

ExperimentResult evaluate_saved(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                                const std::atomic<bool>* stop, const LogFn& log) {
  cfg.validate();
  std::vector<Job> jobs;
  for (Scheme s : cfg.schemes) {
    for (auto seed : cfg.run_seeds()) jobs.push_back({s, seed, 0, cfg.train.rho});
  }

  auto load = [&](const Job& job) {
    training::TrainResult models;
    models.transmitter = transmitter_of(job.scheme);
    const auto dec_path = decoder_checkpoint_path(dir, job.scheme, job.run_seed);
    if (!std::filesystem::exists(dec_path)) throw IoError("missing checkpoint " + dec_path.string());
    models.decoder = link::load_decoder(dec_path.string());
    if (models.decoder.k != cfg.train.k || models.decoder.n != cfg.train.n ||
        models.decoder.taps != cfg.train.taps) {
      throw ArgumentError("checkpoint " + dec_path.string() + " does not match the configured k, n, L");
    }
    if (models.transmitter == training::Transmitter::Neural) {
      const auto enc_path = encoder_checkpoint_path(dir, job.scheme, job.run_seed);
      if (!std::filesystem::exists(enc_path)) {
        throw IoError("missing checkpoint " + enc_path.string());
      }
      models.encoder = link::load_encoder(enc_path.string());
      if (models.encoder.k != cfg.train.k || models.encoder.n != cfg.train.n) {
        throw ArgumentError("checkpoint " + enc_path.string() + " does not match the configured k, n");
      }
    }
    return models;
  };

  // Fail on missing checkpoints before spending time on evaluation.
  std::vector<std::optional<training::TrainResult>> loaded(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (needs_training(jobs[i].scheme)) loaded[i] = load(jobs[i]);
  }

  std::atomic<bool> halt{false};
  const StopFn stopped = stop_from(stop, halt);
  Collector out;
  auto run_job = [&](std::size_t i) {
    const Job& job = jobs[i];
    std::vector<BlerRecord> rows;
    const training::TrainResult* models = loaded[i] ? &*loaded[i] : nullptr;
    for (auto pilots : cfg.test_pilots) {
      check(stopped);
      const auto scheme = make_test_scheme(cfg, job.scheme, models, pilots);
      rows.push_back({job.scheme, pilots, job.rho, cfg.train.frames, job.run_seed,
                      test_bler(cfg, *scheme, job.run_seed, pilots, 0), 0.0});
    }
    out.add(std::move(rows), std::nullopt, std::nullopt);
    log_line(log, "evaluated " + describe(job));
  };
  out.result.interrupted = run_pool(jobs.size(), cfg.threads, halt, run_job);
  finalize_rows(out.result.rows);
  return std::move(out.result);
}

void finalize_rows(std::vector<BlerRecord>& rows) {
  auto point = [](const BlerRecord& r) {
    return std::tuple(scheme_name(r.scheme), r.pilots, r.rho, r.train_frames);
  };
  std::sort(rows.begin(), rows.end(), [&](const BlerRecord& a, const BlerRecord& b) {
    return std::tuple_cat(point(a), std::tuple(a.run_seed)) <
           std::tuple_cat(point(b), std::tuple(b.run_seed));
  });
  for (std::size_t begin = 0; begin < rows.size();) {
    std::size_t end = begin + 1;
    while (end < rows.size() && point(rows[end]) == point(rows[begin])) ++end;
    const double count = static_cast<double>(end - begin);
    double mean = 0.0;
    for (std::size_t i = begin; i < end; ++i) mean += rows[i].bler;
    mean /= count;
    double ss = 0.0;
    for (std::size_t i = begin; i < end; ++i) ss += (rows[i].bler - mean) * (rows[i].bler - mean);
    const double sd = end - begin > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
    for (std::size_t i = begin; i < end; ++i) rows[i].std = sd;
    begin = end;
  }
}

void write_results_csv(std::ostream& out, std::span<const BlerRecord> rows) {
  out << kResultsHeader << '\n';
  for (const auto& r : rows) {
    out << scheme_name(r.scheme) << ',' << r.pilots << ',' << number_text(r.rho) << ','
        << r.train_frames << ',' << r.run_seed << ',' << number_text(r.bler) << ','
        << number_text(r.std) << '\n';
  }
}

std::vector<BlerRecord> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) {
    throw ArgumentError("results.csv: header must be '" + std::string(kResultsHeader) + "'");
  }
  std::vector<BlerRecord> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "results.csv:" + std::to_string(line_no) + ": ";
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 7) throw ArgumentError(where + "expected 7 fields");
    auto number = [&]<class T>(std::string_view f, T& v) {
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size() || f.empty()) {
        throw ArgumentError(where + "bad number '" + std::string(f) + "'");
      }
    };
    BlerRecord r;
    const auto scheme = parse_scheme(fields[0]);
    if (!scheme) throw ArgumentError(where + "unknown scheme '" + std::string(fields[0]) + "'");
    r.scheme = *scheme;
    number(fields[1], r.pilots);
    number(fields[2], r.rho);
    number(fields[3], r.train_frames);
    number(fields[4], r.run_seed);
    number(fields[5], r.bler);
    number(fields[6], r.std);
    if (!(r.bler >= 0.0 && r.bler <= 1.0)) throw ArgumentError(where + "bler outside [0, 1]");
    if (!(r.std >= 0.0)) throw ArgumentError(where + "negative std");
    rows.push_back(r);
  }
  return rows;
}

std::string manifest_json(const ExperimentConfig& cfg, const ExperimentResult& result,
                          std::string_view verb) {
  nlohmann::json j;
  j["tool"] = "metalink";
  j["version"] = std::string(version());
  j["git_describe"] = std::string(git_describe());
  j["verb"] = std::string(verb);
  j["config"] = config_to_json(cfg);
  j["run_seeds"] = cfg.run_seeds();
  j["interrupted"] = result.interrupted;
  j["rows"] = result.rows.size();
  auto sel = nlohmann::json::array();
  for (const auto& s : result.selections) {
    sel.push_back({{"scheme", std::string(scheme_name(s.scheme))},
                   {"run_seed", s.run_seed},
                   {"rho", s.rho},
                   {"frame", s.frame},
                   {"validation_bler", s.validation_bler}});
  }
  j["selected_checkpoints"] = std::move(sel);
  return j.dump(2) + "\n";
}

void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                   const ExperimentResult& result, std::string_view verb) {
  std::filesystem::create_directories(dir);
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + p.string());
    return f;
  };
  if (verb != "train") {
    auto f = open(dir / "results.csv");
    write_results_csv(f, result.rows);
    if (!f) throw IoError("failed writing results.csv");
  }

  std::map<std::pair<std::uint64_t, std::size_t>, std::vector<const RunHistory*>> by_run;
  for (const auto& h : result.histories) by_run[{h.run_seed, h.point}].push_back(&h);
  for (const auto& [key, group] : by_run) {
    std::string name = "history-run" + std::to_string(key.first);
    if (cfg.axis == SweepAxis::Rho && verb == "sweep") name += "-p" + std::to_string(key.second);
    auto f = open(dir / (name + ".csv"));
    bool header = true;
    for (const auto* h : group) {
      training::write_history_csv(f, h->rows, scheme_name(h->scheme), header);
      header = false;
    }
    if (!f) throw IoError("failed writing " + name + ".csv");
  }

  auto f = open(dir / "manifest.json");
  f << manifest_json(cfg, result, verb);
  if (!f) throw IoError("failed writing manifest.json");
}

}  // namespace metalink::harness
