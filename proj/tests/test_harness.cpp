#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "hi2/harness.hpp"
#include "test_util.hpp"

namespace hi2 {
namespace {

using testing::temp_file;

class constant_model final : public classifier {
 public:
  explicit constant_model(double p) : p_(p) {}
  double predict(const image_frame&) const override { return p_; }
  step_result learn(const image_frame&, int label, std::uint64_t) override {
    return {p_, bce_loss(label, p_)};
  }

 private:
  double p_;
};

// Picks up its answer from the sum of the frame so runs differ.
class frame_sum_model final : public classifier {
 public:
  double predict(const image_frame& f) const override {
    double s = 0.0;
    for (const float v : f.pixels()) s += v;
    return std::fmod(s, 1.0);
  }
  step_result learn(const image_frame& f, int label, std::uint64_t) override {
    const double p = predict(f);
    return {p, bce_loss(label, p)};
  }
};

std::string dense_csv(const std::vector<raw_record>& recs) {
  std::ostringstream out;
  for (const auto& r : recs) write_dense(out, r, "1", "0");
  return out.str();
}

run_config config_for(const std::string& path) {
  run_config cfg;
  cfg.data_path = path;
  cfg.p = 0.5;
  cfg.seed = 7;
  return cfg;
}

TEST(Aggregate, SampleStandardDeviation) {
  const std::vector<double> one{0.6};
  EXPECT_EQ(aggregate(one).mean, 0.6);
  EXPECT_EQ(aggregate(one).std, 0.0);
  const std::vector<double> two{0.5, 0.7};
  EXPECT_NEAR(aggregate(two).mean, 0.6, 1e-15);
  EXPECT_NEAR(aggregate(two).std, 0.1414213562373095, 1e-12);
  const std::vector<double> same(5, 0.8);
  EXPECT_EQ(aggregate(same).std, 0.0);
  EXPECT_THROW(aggregate(std::vector<double>{}), error);
}

TEST(Aggregate, MissingMetricInAnyRunIsNull) {
  std::vector<metric_triple> runs(2);
  runs[0] = {0.6, 0.7, 0.8};
  runs[1] = {0.5, std::nullopt, 0.9};
  const auto agg = aggregate_runs(runs);
  ASSERT_TRUE(agg.balanced_accuracy);
  EXPECT_FALSE(agg.auroc);
  ASSERT_TRUE(agg.auprc);
  EXPECT_NEAR(agg.auprc->mean, 0.85, 1e-15);
}

TEST(RunConfig, Validation) {
  run_config cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.p = 0.0;
  EXPECT_THROW(cfg.validate(), error);
  cfg.p = 1.5;
  EXPECT_THROW(cfg.validate(), error);
  cfg = {};
  cfg.runs = 0;
  EXPECT_THROW(cfg.validate(), error);
  cfg = {};
  cfg.ff = -1;
  EXPECT_THROW(cfg.validate(), error);
  cfg = {};
  cfg.model = "resnet";
  EXPECT_THROW(cfg.validate(), error);
}

TEST(Experiment, ConstantModelHasZeroSpread) {
  temp_file data("const", dense_csv(testing::gaussian_stream(60, 3, 1)));
  auto cfg = config_for(data.str());
  cfg.runs = 5;
  const auto rep = run_experiment(
      cfg, [](std::uint64_t) { return std::make_unique<constant_model>(0.3); });
  ASSERT_EQ(rep.runs.size(), 5u);
  EXPECT_EQ(rep.n_instances, 60u);
  ASSERT_TRUE(rep.metrics.balanced_accuracy);
  EXPECT_EQ(rep.metrics.balanced_accuracy->mean, 0.5);
  EXPECT_EQ(rep.metrics.balanced_accuracy->std, 0.0);
  EXPECT_EQ(rep.metrics.auroc->mean, 0.5);
  EXPECT_EQ(rep.metrics.auroc->std, 0.0);
  for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(rep.runs[r].seed, 7 + r);
}

TEST(Experiment, ReportKeys) {
  temp_file data("keys", dense_csv(testing::gaussian_stream(30, 2, 2)));
  const auto cfg = config_for(data.str());
  const auto j = run_experiment(cfg, [](std::uint64_t) {
                   return std::make_unique<frame_sum_model>();
                 }).to_json();
  for (const char* key :
       {"dataset", "p", "seed", "runs", "normalization", "representation", "ff",
        "model", "lr", "n_instances", "balanced_accuracy", "auroc", "auprc",
        "wall_time_seconds"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["normalization"], "zscore");
  EXPECT_EQ(j["representation"], "bar");
  EXPECT_EQ(j["n_instances"], 30);
  EXPECT_TRUE(j["auroc"]["mean"].is_number());
  EXPECT_TRUE(j["auroc"]["std"].is_number());
}

TEST(Experiment, SingleClassReportsNullMetrics) {
  auto recs = testing::gaussian_stream(20, 2, 3);
  for (auto& r : recs) r.label = 0;
  temp_file data("single", dense_csv(recs));
  const auto rep = run_experiment(config_for(data.str()), [](std::uint64_t) {
    return std::make_unique<constant_model>(0.4);
  });
  EXPECT_FALSE(rep.metrics.balanced_accuracy);
  EXPECT_FALSE(rep.metrics.auroc);
  EXPECT_FALSE(rep.metrics.auprc);
  const auto j = rep.to_json();
  EXPECT_TRUE(j["auroc"]["mean"].is_null());
  ASSERT_FALSE(j["errors"].empty());
  EXPECT_NE(j["errors"][0].get<std::string>().find("no positive"),
            std::string::npos);
}

TEST(Experiment, DeterministicApartFromWallTime) {
  temp_file data("det", dense_csv(testing::gaussian_stream(40, 4, 4)));
  auto cfg = config_for(data.str());
  cfg.runs = 2;
  auto a = run_experiment(cfg).to_json();
  auto b = run_experiment(cfg).to_json();
  a.erase("wall_time_seconds");
  b.erase("wall_time_seconds");
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_EQ(a["run_seeds"], nlohmann::json::array({7, 8}));
}

TEST(Experiment, WriteReportProducesParsableJson) {
  temp_file data("wr", dense_csv(testing::gaussian_stream(20, 2, 5)));
  temp_file out("wr_out");
  const auto rep = run_experiment(config_for(data.str()), [](std::uint64_t) {
    return std::make_unique<constant_model>(0.7);
  });
  write_report(rep, out.str());
  const auto j = nlohmann::json::parse(testing::slurp(out.str()));
  EXPECT_EQ(j["balanced_accuracy"]["mean"], 0.5);
}

TEST(Pipeline, ColorsOnlyObservedFeaturesInFirstSeenOrder) {
  run_config cfg;
  cfg.p = 1.0;
  frame_pipeline pipe(cfg, 3);
  raw_record a{0, {{2, 1.0}, {5, 2.0}}, 1};
  raw_record b{1, {{0, 1.0}, {2, 3.0}, {9, 0.5}}, 0};
  pipe.process(a);
  pipe.process(b);
  EXPECT_EQ(pipe.known_features(), (std::vector<std::uint64_t>{2, 5, 0, 9}));
  EXPECT_EQ(pipe.palette().size(), 4u);
  EXPECT_EQ(pipe.stats().find(2)->k, 2u);
  EXPECT_EQ(pipe.stats().find(0)->k, 1u);
}

TEST(Pipeline, MaskedFeaturesNeverColored) {
  run_config cfg;
  cfg.p = 0.5;
  frame_pipeline pipe(cfg, 11);
  std::size_t observed = 0;
  for (std::uint64_t t = 0; t < 3; ++t) {
    const auto st = pipe.process({t, {{0, 1.0}, {1, 2.0}, {2, 3.0}}, 0});
    for (const auto& fv : st.inst.observed) {
      EXPECT_TRUE(pipe.palette().contains(fv.id));
      ++observed;
    }
  }
  EXPECT_LE(pipe.palette().size(), 3u);
  EXPECT_GE(observed, pipe.palette().size());
  for (std::uint64_t f = 0; f < 3; ++f) {
    EXPECT_EQ(pipe.palette().contains(f), pipe.stats().find(f) != nullptr);
  }
}

TEST(Export, FileSizeAndBitIdenticalRoundTrip) {
  const auto recs = testing::gaussian_stream(5, 6, 6);
  temp_file data("exp", dense_csv(recs));
  temp_file out("exp_out");
  auto cfg = config_for(data.str());
  cfg.rep = representation::bar_x;
  EXPECT_EQ(export_frames(cfg, out.str()), 5u);
  EXPECT_EQ(std::filesystem::file_size(out.str()), 32u + 5u * (9u + 602112u));
  EXPECT_EQ(hi2f::file_size(5), 32u + 5u * (9u + 602112u));

  frame_pipeline pipe(cfg, cfg.seed);
  hi2f::reader in(out.str());
  for (const auto& rec : recs) {
    const auto st = pipe.process(rec);
    const auto got = in.next();
    ASSERT_TRUE(got);
    EXPECT_EQ(got->timestep, rec.timestep);
    EXPECT_EQ(got->label, rec.label);
    EXPECT_TRUE(std::ranges::equal(got->frame.pixels(), st.frame.pixels()));
  }
  EXPECT_FALSE(in.next());
  EXPECT_EQ(in.count(), 5u);
}

TEST(Export, HeaderBytes) {
  temp_file data("hdr", dense_csv(testing::gaussian_stream(1, 2, 7)));
  temp_file out("hdr_out");
  export_frames(config_for(data.str()), out.str());
  const auto bytes = testing::slurp(out.str());
  const unsigned char expect[32] = {'H', 'I', '2', 'F', 1, 0, 0, 0, 3, 0, 0,
                                    0,   224, 0, 0, 0, 224, 0, 0, 0, 1};
  ASSERT_GE(bytes.size(), 32u);
  for (int i = 0; i < 32; ++i) {
    EXPECT_EQ(static_cast<unsigned char>(bytes[i]), expect[i]) << i;
  }
}

TEST(Export, EmptyStreamIsHeaderOnly) {
  temp_file data("empty", "");
  temp_file out("empty_out");
  EXPECT_EQ(export_frames(config_for(data.str()), out.str()), 0u);
  EXPECT_EQ(std::filesystem::file_size(out.str()), 32u);
  hi2f::reader in(out.str());
  EXPECT_FALSE(in.next());
}

TEST(Export, UnwritablePathRaises) {
  temp_file data("unw", dense_csv(testing::gaussian_stream(1, 2, 8)));
  try {
    export_frames(config_for(data.str()), "/nonexistent-dir/x.hi2f");
    FAIL();
  } catch (const write_error& e) {
    EXPECT_EQ(e.frames_written(), 0u);
  }
}

TEST(Hi2fReader, RejectsBadHeaders) {
  temp_file magic("magic", std::string("HI2X") + std::string(28, '\0'));
  EXPECT_THROW(hi2f::reader{magic.str()}, parse_error);
  std::string v2 = "HI2F";
  v2 += std::string("\x02\0\0\0", 4) + std::string(24, '\0');
  temp_file version("version", v2);
  EXPECT_THROW(hi2f::reader{version.str()}, parse_error);
}

TEST(Hi2fReader, TruncatedFrameNamesLastCompleteIndex) {
  temp_file data("trunc", dense_csv(testing::gaussian_stream(2, 2, 9)));
  temp_file out("trunc_out");
  export_frames(config_for(data.str()), out.str());
  const auto bytes = testing::slurp(out.str());
  temp_file cut("trunc_cut", bytes.substr(0, bytes.size() - 100));
  hi2f::reader in(cut.str());
  ASSERT_TRUE(in.next());
  try {
    in.next();
    FAIL();
  } catch (const parse_error& e) {
    EXPECT_NE(std::string(e.what()).find("last complete frame index 0"),
              std::string::npos);
  }
}

TEST(Hi2fWriter, LabelMustBeBinary) {
  temp_file out("lab");
  hi2f::writer w(out.str());
  EXPECT_THROW(w.write(0, 2, image_frame{}), error);
}

}  // namespace
}  // namespace hi2
