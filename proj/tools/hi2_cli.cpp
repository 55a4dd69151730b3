#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "hi2/harness.hpp"

namespace {

void add_stream_options(CLI::App& app, hi2::run_config& cfg) {
  app.add_option("--data", cfg.data_path, "input stream file")->required();
  app.add_option("--format", cfg.format, "dense or sparse")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, hi2::data_format>{
              {"dense", hi2::data_format::dense},
              {"sparse", hi2::data_format::sparse}},
          CLI::ignore_case));
  app.add_option("--label-column", cfg.dense.label_column,
                 "dense label column, negative counts from the end");
  app.add_option("--positive-label", cfg.dense.positive_label,
                 "dense label token mapped to 1");
  app.add_flag("--header", cfg.dense.header, "dense file has a header row");
  app.add_option("--p", cfg.p, "availability probability in (0, 1]");
  app.add_option("--seed", cfg.seed, "run seed");
  app.add_option("--normalization", cfg.norm, "zscore or minmax")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, hi2::normalization>{
              {"zscore", hi2::normalization::zscore},
              {"minmax", hi2::normalization::minmax}},
          CLI::ignore_case));
  app.add_option("--representation", cfg.rep, "bar, bar_x or pie")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, hi2::representation>{
              {"bar", hi2::representation::bar},
              {"bar_x", hi2::representation::bar_x},
              {"pie", hi2::representation::pie}},
          CLI::ignore_case));
  app.add_option("--ff", cfg.ff, "bar spacing as a fraction of bar width");
}

template <typename Fn>
void write_file(const std::string& path, Fn fn) {
  std::ofstream out(path);
  if (!out) throw hi2::error("cannot open " + path + " for writing");
  fn(out);
  if (!out) throw hi2::error("failed writing " + path);
}

void print_metric(const char* name, const std::optional<hi2::summary>& s) {
  if (s) {
    std::printf("%-18s %.4f +/- %.4f\n", name, s->mean, s->std);
  } else {
    std::printf("%-18s n/a\n", name);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Haphazard-input streams rendered as images for an online CNN"};
  app.require_subcommand(1);

  hi2::run_config run_cfg;
  std::string log_out;
  auto* run = app.add_subcommand("run", "prequential test-then-train experiment");
  add_stream_options(*run, run_cfg);
  run->add_option("--model", run_cfg.model, "classifier")->capture_default_str();
  run->add_option("--lr", run_cfg.lr, "SGD learning rate")->capture_default_str();
  run->add_option("--runs", run_cfg.runs, "independent runs, seeds seed..seed+runs-1");
  run->add_option("--out", run_cfg.output_path, "JSON report path")->required();
  run->add_option("--log-out", log_out,
                  "prequential log; run r > 0 goes to <path>.<r>");

  hi2::run_config export_cfg;
  std::string frames_out, palette_out, stats_out;
  auto* exp = app.add_subcommand("export", "render a stream to an HI2F frame file");
  add_stream_options(*exp, export_cfg);
  exp->add_option("--out", frames_out, "HI2F output path")->required();
  exp->add_option("--palette-out", palette_out, "palette dump path");
  exp->add_option("--stats-out", stats_out, "final running statistics path");

  std::string log_in;
  auto* met = app.add_subcommand("metrics", "score a prequential log dump");
  met->add_option("log", log_in, "log file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto rep = hi2::run_experiment(run_cfg);
      hi2::write_report(rep, run_cfg.output_path);
      if (!log_out.empty()) {
        for (std::size_t r = 0; r < rep.runs.size(); ++r) {
          const auto path = r == 0 ? log_out : log_out + "." + std::to_string(r);
          write_file(path, [&](std::ostream& o) { rep.runs[r].log.dump(o); });
        }
      }
      std::printf("%llu instances, %zu run(s)\n",
                  static_cast<unsigned long long>(rep.n_instances), rep.runs.size());
      print_metric("balanced_accuracy", rep.metrics.balanced_accuracy);
      print_metric("auroc", rep.metrics.auroc);
      print_metric("auprc", rep.metrics.auprc);
      for (const auto& r : rep.runs) {
        for (const auto& e : r.errors) std::fprintf(stderr, "seed %llu: %s\n",
            static_cast<unsigned long long>(r.seed), e.c_str());
      }
    } else if (*exp) {
      hi2::frame_pipeline pipe(export_cfg, export_cfg.seed);
      const auto n = hi2::export_frames(export_cfg, frames_out, &pipe);
      if (!palette_out.empty()) {
        write_file(palette_out, [&](std::ostream& o) { pipe.palette().save(o); });
      }
      if (!stats_out.empty()) {
        write_file(stats_out, [&](std::ostream& o) { pipe.stats().dump(o); });
      }
      std::printf("wrote %llu frames to %s\n", static_cast<unsigned long long>(n),
                  frames_out.c_str());
    } else if (*met) {
      std::ifstream in(log_in);
      if (!in) throw hi2::error("cannot open " + log_in);
      const auto log = hi2::evaluation_log::load(in);
      std::vector<std::string> errors;
      const auto m = hi2::score(log, errors);
      const auto show = [](const char* name, const std::optional<double>& v) {
        if (v) std::printf("%-18s %.6f\n", name, *v);
        else std::printf("%-18s n/a\n", name);
      };
      std::printf("%zu entries\n", log.size());
      show("balanced_accuracy", m.balanced_accuracy);
      show("auroc", m.auroc);
      show("auprc", m.auprc);
      for (const auto& e : errors) std::fprintf(stderr, "%s\n", e.c_str());
    }
  } catch (const hi2::divergence_error& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
