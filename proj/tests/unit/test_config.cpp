#include <gtest/gtest.h>

#include "patcnn/config.hpp"
#include "patcnn/csv.hpp"
#include "patcnn/kv.hpp"
#include "test_support.hpp"

using namespace patcnn;

TEST(KeyValue, ParseCommentsAndTypes) {
  const auto doc = KeyValueDoc::parse(
      "# comment\n"
      "a.x = 1.5\n"
      "a.n = 42   # trailing\n"
      "\n"
      "a.flag = true\n"
      "a.list = 1, 2, 3\n"
      "a.s = hello world\n");
  EXPECT_EQ(doc.get_double("a.x", 0), 1.5);
  EXPECT_EQ(doc.get_int("a.n", 0), 42);
  EXPECT_TRUE(doc.get_bool("a.flag", false));
  EXPECT_EQ(doc.get_doubles("a.list", {}), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(doc.get_string("a.s", ""), "hello world");
  EXPECT_EQ(doc.get_double("missing", 7), 7);
}

TEST(KeyValue, MalformedLinesAndValues) {
  EXPECT_THROW(KeyValueDoc::parse("no equals sign\n"), FormatError);
  const auto doc = KeyValueDoc::parse("x = abc\n");
  EXPECT_THROW(doc.get_double("x", 0), DomainError);
  EXPECT_THROW(doc.get_bool("x", false), DomainError);
}

TEST(KeyValue, DoublesRoundTripExactly) {
  KeyValueDoc doc;
  const double vals[] = {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 6.02214076e23};
  for (double v : vals) {
    doc.set_double("v", v);
    EXPECT_EQ(KeyValueDoc::parse(doc.dump()).get_double("v", 0), v);
  }
}

TEST(KeyValue, MergeAndUnused) {
  auto base = KeyValueDoc::parse("a = 1\nb = 2\n");
  base.merge(KeyValueDoc::parse("b = 3\nc = 4\n"));
  EXPECT_EQ(base.get_int("b", 0), 3);
  base.get_int("a", 0);
  EXPECT_EQ(base.unused_keys(), (std::vector<std::string>{"c"}));
}

TEST(PipelineConfig, DefaultHyperparameters) {
  const auto cfg = read_pipeline_config(KeyValueDoc{});
  EXPECT_EQ(cfg.train.batch_size, 8u);
  EXPECT_EQ(cfg.train.learning_rate, 1e-4);
  EXPECT_EQ(cfg.train.epochs, 60u);
  EXPECT_EQ(cfg.train.augment.p_each, 0.1);
  EXPECT_EQ(cfg.train.loss.variant, LossVariant::AsWritten);
  EXPECT_EQ(cfg.phantom.spacing, (Spacing{1.4, 1.4, 6.0}));
}

TEST(PipelineConfig, RoundTripThroughText) {
  PipelineConfig cfg;
  cfg.seed = 99;
  cfg.train.batch_size = 2;
  cfg.train.learning_rate = 3e-4;
  cfg.train.loss.variant = LossVariant::FullBce;
  cfg.train.augment.transforms = kFlip | kBlur;
  cfg.train.augment.flip_axes = {false, true, true};
  cfg.train.model.channels = {4, 8, 12, 16};
  cfg.train.model.bottleneck = 20;
  cfg.train.model.residual = false;
  cfg.phantom.noise_sigma = 0.07;
  cfg.phantom.fluid_present = true;
  cfg.effects = EffectSpec::null_effects();
  cfg.groundtruth.margin_mm = 12.5;
  const auto text = to_doc(cfg).dump();
  const auto back = read_pipeline_config(KeyValueDoc::parse(text));
  EXPECT_EQ(to_doc(back).dump(), text);
  EXPECT_EQ(back.train.model, cfg.train.model);
  EXPECT_EQ(back.train.augment.transforms, unsigned(kFlip | kBlur));
  EXPECT_EQ(back.train.loss.variant, LossVariant::FullBce);
}

TEST(PipelineConfig, GlobalSeedPropagates) {
  const auto cfg = read_pipeline_config(KeyValueDoc::parse("seed = 17\n"));
  EXPECT_EQ(cfg.train.seed, 17u);
  EXPECT_EQ(cfg.train.augment.seed, 17u);
  EXPECT_EQ(cfg.phantom.seed, 17u);
  const auto explicit_seed = read_pipeline_config(KeyValueDoc::parse("seed = 17\ntrain.seed = 3\n"));
  EXPECT_EQ(explicit_seed.train.seed, 3u);
}

TEST(PipelineConfig, RejectsUnknownAndInvalid) {
  EXPECT_THROW(read_pipeline_config(KeyValueDoc::parse("train.batchsize = 4\n")), DomainError);
  EXPECT_THROW(read_pipeline_config(KeyValueDoc::parse("train.epochs = 0\n")), DomainError);
  EXPECT_THROW(read_pipeline_config(KeyValueDoc::parse("augment.p_each = 2\n")), DomainError);
  EXPECT_THROW(read_pipeline_config(KeyValueDoc::parse("augment.transforms = twist\n")), DomainError);
  EXPECT_THROW(read_pipeline_config(KeyValueDoc::parse("loss.variant = focal\n")), DomainError);
  EXPECT_THROW(read_pipeline_config(KeyValueDoc::parse("model.channels = 4, 8\n")), DomainError);
}

TEST(Csv, RecordsRoundTripAndJoin) {
  patcnn::testing::TempDir dir("csv");
  std::vector<PatientRecord> recs;
  for (int i = 0; i < 3; ++i) {
    PatientRecord r;
    r.case_id = "case_00" + std::to_string(i);
    r.age = 40 + i;
    r.sex = i % 2;
    r.bmi = 25.5;
    r.deceased = i == 2;
    r.cvd_diagnosis = i;
    recs.push_back(r);
  }
  write_text(dir / "r.csv", format_records_csv(recs));
  const auto back = read_records_csv(dir / "r.csv");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[2].case_id, "case_002");
  EXPECT_EQ(back[1].sex, 1);
  EXPECT_EQ(back[2].deceased, 1);

  write_text(dir / "p.csv", format_patv_csv({{"case_000", 1.5}, {"case_001", 2.5}, {"case_002", 3.5}}));
  const auto joined = join_patv(back, read_patv_csv(dir / "p.csv"));
  EXPECT_EQ(joined[1].patv, 2.5);
  EXPECT_THROW(join_patv(back, {{"case_000", 1.0}}), Error);
}

TEST(Csv, RaggedRowIsFormatError) {
  EXPECT_THROW(parse_csv("a,b\n1,2,3\n"), FormatError);
  EXPECT_THROW(parse_csv("a,b\n1,2\n").column("c"), FormatError);
}
