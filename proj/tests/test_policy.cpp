#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "syngen/gen/generator.hpp"
#include "syngen/gen/policy.hpp"

using syngen::EarlyStopper;
using syngen::TrainingLog;
using syngen::TrainingPolicy;

TEST(Batches, SizesCoverEverySampleOnce) {
    const auto batches = syngen::make_batches(13, 0.33, 7);
    ASSERT_EQ(batches.size(), 4u);
    EXPECT_EQ(batches[0].size(), 4u);
    EXPECT_EQ(batches[1].size(), 4u);
    EXPECT_EQ(batches[2].size(), 4u);
    EXPECT_EQ(batches[3].size(), 1u);

    std::vector<int> seen;
    for (const auto& b : batches) {
        seen.insert(seen.end(), b.begin(), b.end());
    }
    std::sort(seen.begin(), seen.end());
    for (int i = 0; i < 13; ++i) {
        EXPECT_EQ(seen[static_cast<std::size_t>(i)], i);
    }
}

TEST(Batches, TinyFractionStillYieldsWork) {
    const auto batches = syngen::make_batches(5, 0.01, 1);
    ASSERT_EQ(batches.size(), 5u);
    for (const auto& b : batches) {
        EXPECT_EQ(b.size(), 1u);
    }
}

TEST(Batches, DeterministicPerSeed) {
    EXPECT_EQ(syngen::make_batches(20, 0.25, 5), syngen::make_batches(20, 0.25, 5));
    EXPECT_NE(syngen::make_batches(20, 0.25, 5), syngen::make_batches(20, 0.25, 6));
}

TEST(EarlyStopping, StopsPatienceEpochsAfterBestLoss) {
    // Best value lands at epoch 5; with patience 2 the run ends at epoch 7.
    const std::vector<double> losses = {5.0, 4.0, 3.0, 2.0, 1.0, 1.0, 1.0, 1.0};
    EXPECT_EQ(syngen::early_stopper(losses, 2), 7);
}

TEST(EarlyStopping, RequiresStrictImprovement) {
    const std::vector<double> losses = {3.0, 3.0, 3.0, 3.0, 3.0};
    EXPECT_EQ(syngen::early_stopper(losses, 3), 4);
}

TEST(EarlyStopping, RunsOutWithoutTriggering) {
    const std::vector<double> losses = {5.0, 4.0, 3.0};
    EXPECT_EQ(syngen::early_stopper(losses, 30), 3);
}

TEST(EarlyStopping, StatefulTrackerReportsBest) {
    EarlyStopper s(2);
    EXPECT_FALSE(s.update(5.0));
    EXPECT_FALSE(s.update(2.0));
    EXPECT_FALSE(s.update(2.0));
    EXPECT_TRUE(s.update(2.0));
    EXPECT_EQ(s.best_epoch(), 2);
    EXPECT_DOUBLE_EQ(s.best_loss(), 2.0);
}

TEST(EarlyStopping, EmptyLossesRejected) {
    EXPECT_THROW(syngen::early_stopper({}, 5), syngen::validation_error);
}

TEST(Policy, ValidationCatchesBadSettings) {
    TrainingPolicy p;
    p.strategy = TrainingPolicy::Strategy::fixed;
    EXPECT_THROW(p.validate(), syngen::validation_error);

    p.epochs = 10;
    p.batch_fraction = 1.5;
    EXPECT_THROW(p.validate(), syngen::validation_error);

    p.batch_fraction = 0.2;
    p.learning_rate = -1.0;
    EXPECT_THROW(p.validate(), syngen::validation_error);
}

TEST(Policy, ResolvesFamilyDefaults) {
    TrainingPolicy p;
    p.strategy = TrainingPolicy::Strategy::early_stop;
    EXPECT_DOUBLE_EQ(p.resolve_batch_fraction(0.2), 0.2);
    p.batch_fraction = 0.35;
    EXPECT_DOUBLE_EQ(p.resolve_batch_fraction(0.2), 0.35);
    EXPECT_EQ(p.resolve_epochs(1000), 1000);
    p.epochs = 64;
    EXPECT_EQ(p.resolve_epochs(1000), 64);
}

TEST(TrainingLogFile, ColumnsKeepFirstSeenOrderWithNaFill) {
    TrainingLog log;
    log.add("pretrain", 1, {{"nll", 2.5}, {"val_nll", 3.0}});
    log.add("finetune", 1, {{"nll", 2.0}});
    log.add("finetune", 2, {{"nll", 1.5}, {"extra", 9.0}});

    const std::string path = "policy_log_test.tsv";
    syngen::write_training_log_tsv(log, path);
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::remove(path.c_str());

    EXPECT_EQ(buf.str(),
              "phase\tepoch\tnll\tval_nll\textra\n"
              "pretrain\t1\t2.5\t3\tNA\n"
              "finetune\t1\t2\tNA\tNA\n"
              "finetune\t2\t1.5\tNA\t9\n");
}

TEST(ModelSpecParse, AcceptsFamiliesAndRatios) {
    const auto vae = syngen::ModelSpec::parse("vae:1-10");
    EXPECT_EQ(vae.family, syngen::Family::vae);
    EXPECT_DOUBLE_EQ(vae.w_rec, 1.0);
    EXPECT_DOUBLE_EQ(vae.w_kl, 10.0);
    EXPECT_FALSE(vae.conditional());

    const auto cvae = syngen::ModelSpec::parse("cvae:1-100");
    EXPECT_TRUE(cvae.conditional());
    EXPECT_DOUBLE_EQ(cvae.w_kl, 100.0);

    EXPECT_EQ(syngen::ModelSpec::parse("wgangp").family, syngen::Family::wgangp);
    EXPECT_EQ(syngen::ModelSpec::parse("maf").family, syngen::Family::maf);
    EXPECT_EQ(syngen::ModelSpec::parse("vae").w_kl, 1.0);

    EXPECT_THROW(syngen::ModelSpec::parse("vae:0-10"), syngen::validation_error);
    EXPECT_THROW(syngen::ModelSpec::parse("wgan:1-10"), syngen::validation_error);
    EXPECT_THROW(syngen::ModelSpec::parse("vae:1-10-3"), syngen::validation_error);
    EXPECT_THROW(syngen::ModelSpec::parse("mystery"), syngen::validation_error);
}

TEST(ModelSpecParse, RoundTripsText) {
    EXPECT_EQ(syngen::ModelSpec::parse("vae:1-10").text(), "vae:1-10");
    EXPECT_EQ(syngen::ModelSpec::parse("glow").text(), "glow");
}
