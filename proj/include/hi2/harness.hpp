#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hi2/datasets.hpp"
#include "hi2/error.hpp"
#include "hi2/hi2f.hpp"
#include "hi2/learner.hpp"
#include "hi2/metrics.hpp"
#include "hi2/palette.hpp"
#include "hi2/raster.hpp"
#include "hi2/rng.hpp"
#include "hi2/streamstats.hpp"

namespace hi2 {

enum class data_format { dense, sparse };

inline std::string to_string(data_format f) {
  return f == data_format::dense ? "dense" : "sparse";
}

struct run_config {
  std::string data_path;
  data_format format = data_format::dense;
  dense_options dense;  // label column, positive label, header flag
  double p = 1.0;
  std::uint64_t seed = 0;
  normalization norm = normalization::zscore;
  representation rep = representation::bar;
  double ff = default_ff;
  std::string model = "desknet";
  double lr = 1e-3;
  std::size_t runs = 1;
  std::string output_path;

  void validate() const {
    if (!(p > 0.0 && p <= 1.0)) throw error("p must lie in (0, 1]");
    if (!(ff > 0.0) || !std::isfinite(ff)) throw error("ff must be > 0");
    if (runs < 1) throw error("runs must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw error("lr must be > 0");
    if (model != "desknet") throw error("unknown model '" + model + "'");
  }
};

inline std::unique_ptr<record_source> open_source(const run_config& cfg) {
  if (cfg.format == data_format::dense) {
    return std::make_unique<dense_reader>(cfg.data_path, cfg.dense);
  }
  return std::make_unique<sparse_reader>(cfg.data_path);
}

// Mask, color, normalize and render, one record at a time. Holds no record
// beyond the one being processed.
class frame_pipeline {
 public:
  struct step {
    instance inst;
    image_frame frame;
  };

  frame_pipeline(const run_config& cfg, std::uint64_t run_seed)
      : norm_(cfg.norm),
        rep_(cfg.rep),
        ff_(cfg.ff),
        simulator_({cfg.p, stream_seed(run_seed, stream::mask)}),
        palette_(stream_seed(run_seed, stream::palette)) {}

  step process(const raw_record& rec) {
    instance inst = simulator_.apply(rec);
    for (const auto& fv : inst.observed) {
      if (!palette_.contains(fv.id)) {
        palette_.color_for(fv.id);
        known_.push_back(fv.id);
      }
    }
    const auto normalized = stats_.update_and_normalize(inst.observed, norm_);
    image_frame frame = render(rep_, known_, normalized, palette_, norm_, ff_);
    return {std::move(inst), std::move(frame)};
  }

  const color_registry& palette() const noexcept { return palette_; }
  const stats_table& stats() const noexcept { return stats_; }
  const std::vector<std::uint64_t>& known_features() const noexcept {
    return known_;
  }

 private:
  normalization norm_;
  representation rep_;
  double ff_;
  haphazard_simulator simulator_;
  color_registry palette_;
  stats_table stats_;
  std::vector<std::uint64_t> known_;
};

struct metric_triple {
  std::optional<double> balanced_accuracy, auroc, auprc;
};

struct summary {
  double mean = 0.0;
  double std = 0.0;
};

// Arithmetic mean and sample standard deviation (n - 1; 0 for one value).
inline summary aggregate(std::span<const double> values) {
  if (values.empty()) throw error("cannot aggregate an empty list");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (const double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  return {mean, values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

struct aggregated_metrics {
  std::optional<summary> balanced_accuracy, auroc, auprc;
};

// A metric is summarized only if every run produced it.
inline aggregated_metrics aggregate_runs(std::span<const metric_triple> runs) {
  if (runs.empty()) throw error("cannot aggregate zero runs");
  const auto one = [&](auto member) -> std::optional<summary> {
    std::vector<double> vals;
    for (const auto& r : runs) {
      if (!(r.*member)) return std::nullopt;
      vals.push_back(*(r.*member));
    }
    return aggregate(vals);
  };
  return {one(&metric_triple::balanced_accuracy), one(&metric_triple::auroc),
          one(&metric_triple::auprc)};
}

struct run_result {
  std::uint64_t seed = 0;
  std::uint64_t n_instances = 0;
  metric_triple metrics;
  std::vector<std::string> errors;
  double wall_time_seconds = 0.0;
  evaluation_log log;
};

inline metric_triple score(const evaluation_log& log,
                           std::vector<std::string>& errors) {
  metric_triple m;
  const auto attempt = [&](std::optional<double>& slot, auto fn) {
    try {
      slot = fn(log);
    } catch (const error& e) {
      errors.emplace_back(e.what());
    }
  };
  attempt(m.balanced_accuracy,
          [](const evaluation_log& l) { return balanced_accuracy(l); });
  attempt(m.auroc, [](const evaluation_log& l) { return auroc(l); });
  attempt(m.auprc, [](const evaluation_log& l) { return auprc(l); });
  return m;
}

// Test-then-train over one stream.
inline run_result run_prequential(const run_config& cfg, std::uint64_t run_seed,
                                  record_source& source, classifier& model) {
  const auto start = std::chrono::steady_clock::now();
  run_result out;
  out.seed = run_seed;
  frame_pipeline pipe(cfg, run_seed);
  while (auto rec = source.next()) {
    auto st = pipe.process(*rec);
    const auto res = model.learn(st.frame, st.inst.label, st.inst.timestep);
    out.log.append(st.inst.timestep, st.inst.label, res.probability);
    ++out.n_instances;
  }
  out.metrics = score(out.log, out.errors);
  out.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return out;
}

using model_factory =
    std::function<std::unique_ptr<classifier>(std::uint64_t weight_seed)>;

inline model_factory default_model(const run_config& cfg) {
  const double lr = cfg.lr;
  return [lr](std::uint64_t seed) -> std::unique_ptr<classifier> {
    return std::make_unique<desknet<float>>(seed, lr);
  };
}

struct report {
  run_config config;
  std::uint64_t n_instances = 0;
  aggregated_metrics metrics;
  std::vector<run_result> runs;

  nlohmann::json to_json() const {
    using nlohmann::json;
    const auto metric = [](const std::optional<summary>& s) {
      if (!s) return json{{"mean", nullptr}, {"std", nullptr}};
      return json{{"mean", s->mean}, {"std", s->std}};
    };
    json j;
    j["dataset"] = config.data_path;
    j["format"] = to_string(config.format);
    j["p"] = config.p;
    j["seed"] = config.seed;
    j["runs"] = config.runs;
    j["normalization"] = to_string(config.norm);
    j["representation"] = to_string(config.rep);
    j["ff"] = config.ff;
    j["model"] = config.model;
    j["lr"] = config.lr;
    j["n_instances"] = n_instances;
    j["balanced_accuracy"] = metric(metrics.balanced_accuracy);
    j["auroc"] = metric(metrics.auroc);
    j["auprc"] = metric(metrics.auprc);
    json seeds = json::array(), walls = json::array(), per_run = json::array(),
         errors = json::array();
    for (const auto& r : runs) {
      seeds.push_back(r.seed);
      walls.push_back(r.wall_time_seconds);
      const auto opt = [](const std::optional<double>& v) {
        return v ? json(*v) : json(nullptr);
      };
      per_run.push_back({{"seed", r.seed},
                         {"balanced_accuracy", opt(r.metrics.balanced_accuracy)},
                         {"auroc", opt(r.metrics.auroc)},
                         {"auprc", opt(r.metrics.auprc)}});
      for (const auto& e : r.errors) {
        errors.push_back("run seed " + std::to_string(r.seed) + ": " + e);
      }
    }
    j["run_seeds"] = seeds;
    j["per_run"] = per_run;
    j["errors"] = errors;
    j["wall_time_seconds"] = walls;
    return j;
  }
};

// Each run r re-reads the stream with seed cfg.seed + r and a fresh model.
inline report run_experiment(const run_config& cfg,
                             const model_factory& make_model) {
  cfg.validate();
  report rep;
  rep.config = cfg;
  std::vector<metric_triple> triples;
  for (std::size_t r = 0; r < cfg.runs; ++r) {
    const std::uint64_t run_seed = cfg.seed + r;
    auto source = open_source(cfg);
    auto model = make_model(stream_seed(run_seed, stream::weights));
    rep.runs.push_back(run_prequential(cfg, run_seed, *source, *model));
    triples.push_back(rep.runs.back().metrics);
  }
  rep.n_instances = rep.runs.front().n_instances;
  rep.metrics = aggregate_runs(triples);
  return rep;
}

inline report run_experiment(const run_config& cfg) {
  return run_experiment(cfg, default_model(cfg));
}

inline void write_report(const report& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw error("cannot open " + path + " for writing");
  out << rep.to_json().dump(2) << '\n';
  if (!out) throw error("failed writing " + path);
}

// Renders the stream of run seed cfg.seed into an HI2F file, no learner.
inline std::uint64_t export_frames(const run_config& cfg,
                                   const std::string& out_path,
                                   frame_pipeline* keep = nullptr) {
  if (!(cfg.p > 0.0 && cfg.p <= 1.0)) throw error("p must lie in (0, 1]");
  if (!(cfg.ff > 0.0)) throw error("ff must be > 0");
  auto source = open_source(cfg);
  frame_pipeline pipe(cfg, cfg.seed);
  hi2f::writer out(out_path);
  while (auto rec = source->next()) {
    const auto st = pipe.process(*rec);
    out.write(st.inst.timestep, st.inst.label, st.frame);
  }
  out.close();
  if (keep) *keep = std::move(pipe);
  return out.count();
}

}  // namespace hi2
