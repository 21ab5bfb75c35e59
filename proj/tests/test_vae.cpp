#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "support/builders.hpp"
#include "syngen/core/rng.hpp"
#include "syngen/gen/policy.hpp"
#include "syngen/gen/vae.hpp"

using syngen::CountMatrix;
using syngen::Rng;
using syngen::Scale;
using syngen::TrainingPolicy;
using syngen::VaeConfig;
using syngen::VaeGenerator;
using syngen::nn::Mat;

namespace {

CountMatrix blob_data(int markers, int samples, std::uint64_t seed, bool two_groups = false) {
    Rng rng(seed);
    Mat x(markers, samples);
    std::vector<std::string> groups;
    for (int j = 0; j < samples; ++j) {
        const bool second = two_groups && j % 2 == 1;
        for (int i = 0; i < markers; ++i) {
            const double base = second ? 6.0 : 2.0;
            x(i, j) = std::max(0.0, base + rng.normal(0.0, 0.5));
        }
        if (two_groups) {
            groups.push_back(second ? "case" : "control");
        }
    }
    CountMatrix m;
    m.marker_ids = tests::default_ids("m", markers);
    m.sample_ids = tests::default_ids("s", samples);
    m.values = x;
    m.scale = Scale::log2p1;
    if (two_groups) {
        m.groups = groups;
    }
    m.validate();
    return m;
}

TrainingPolicy fixed_policy(int epochs, std::uint64_t seed) {
    TrainingPolicy p;
    p.strategy = TrainingPolicy::Strategy::fixed;
    p.epochs = epochs;
    p.seed = seed;
    return p;
}

}

TEST(KlDivergence, HandValue) {
    Eigen::VectorXd mu(2), lv(2);
    mu << 1.0, 0.0;
    lv << 0.0, 0.0;
    EXPECT_DOUBLE_EQ(syngen::kl_gaussian(mu, lv), 0.5);
}

TEST(KlDivergence, ZeroWhenDistributionsMatch) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(4);
    Eigen::VectorXd lv = Eigen::VectorXd::Zero(4);
    EXPECT_DOUBLE_EQ(syngen::kl_gaussian(mu, lv), 0.0);
}

// Monte Carlo estimate of E_q[log q(z) - log p(z)] as an independent oracle
// for the closed-form divergence.
TEST(KlDivergence, MatchesMonteCarloEstimate) {
    Eigen::VectorXd mu(3), lv(3);
    mu << 0.7, -0.4, 1.1;
    lv << 0.3, -0.5, 0.1;
    const double analytic = syngen::kl_gaussian(mu, lv);

    Rng rng(99);
    const int draws = 500000;
    double acc = 0.0;
    for (int s = 0; s < draws; ++s) {
        double diff = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double sd = std::exp(0.5 * lv[i]);
            const double z = mu[i] + sd * rng.normal();
            const double log_q = -0.5 * (std::log(2.0 * 3.14159265358979323846) + lv[i]) -
                                 0.5 * (z - mu[i]) * (z - mu[i]) / std::exp(lv[i]);
            const double log_p = -0.5 * std::log(2.0 * 3.14159265358979323846) - 0.5 * z * z;
            diff += log_q - log_p;
        }
        acc += diff;
    }
    const double mc = acc / draws;
    EXPECT_NEAR(mc, analytic, 0.01 * std::fabs(analytic));
}

TEST(Reparameterize, ExactAffineMap) {
    Eigen::VectorXd mu(1), lv(1), eps(1);
    mu << 1.0;
    lv << std::log(4.0);
    eps << 0.5;
    const Eigen::VectorXd z = syngen::reparameterize(mu, lv, eps);
    EXPECT_DOUBLE_EQ(z[0], 2.0);
}

TEST(VaeLoss, AssemblesWeightedParts) {
    // Per-sample squared error 2.0 and divergence 0.3, identical across the
    // batch, so the weighted total is w_rec * 2 + w_kl * 0.3.
    const double root2 = std::sqrt(2.0);
    Mat x(1, 2), xhat(1, 2), mu(1, 2), lv(1, 2);
    x << 0.0, 0.0;
    xhat << root2, root2;
    const double m = std::sqrt(0.6);
    mu << m, m;
    lv << 0.0, 0.0;

    const auto parts = syngen::vae_loss(x, xhat, mu, lv, 1.0, 10.0);
    EXPECT_NEAR(parts.recon, 2.0, 1e-12);
    EXPECT_NEAR(parts.kl, 0.3, 1e-12);
    EXPECT_NEAR(parts.total, 5.0, 1e-12);
}

TEST(VaeGradient, MatchesFiniteDifferences) {
    VaeConfig cfg;
    cfg.hidden = {8, 6};
    cfg.latent = 3;
    cfg.w_rec = 1.0;
    cfg.w_kl = 10.0;
    VaeGenerator model(cfg, tests::default_ids("m", 5), {}, 42);

    const CountMatrix data = blob_data(5, 4, 7);
    syngen::TrainingData td = syngen::prepare_training_data(data, false);
    std::vector<int> batch = {0, 1, 2, 3};

    Rng erng(5);
    Mat eps(3, 4);
    for (Eigen::Index j = 0; j < 4; ++j) {
        for (Eigen::Index i = 0; i < 3; ++i) {
            eps(i, j) = erng.normal();
        }
    }

    std::vector<Mat> grads;
    const double base = model.loss_and_gradients(td, batch, eps, &grads).total;
    auto params = model.parameters();
    ASSERT_EQ(grads.size(), params.size());
    EXPECT_TRUE(std::isfinite(base));

    const double h = 1e-5;
    for (std::size_t k = 0; k < params.size(); ++k) {
        for (Eigen::Index j = 0; j < params[k]->cols(); ++j) {
            for (Eigen::Index i = 0; i < params[k]->rows(); ++i) {
                const double keep = (*params[k])(i, j);
                (*params[k])(i, j) = keep + h;
                const double up = model.loss_and_gradients(td, batch, eps, nullptr).total;
                (*params[k])(i, j) = keep - h;
                const double down = model.loss_and_gradients(td, batch, eps, nullptr).total;
                (*params[k])(i, j) = keep;
                const double fd = (up - down) / (2.0 * h);
                EXPECT_NEAR(grads[k](i, j), fd, 1e-4 * std::max(1.0, std::fabs(fd)))
                    << "param " << k << " entry (" << i << "," << j << ")";
            }
        }
    }
}

TEST(VaeGradient, LinearInDivergenceWeight) {
    const CountMatrix data = blob_data(6, 5, 8);
    syngen::TrainingData td = syngen::prepare_training_data(data, false);
    std::vector<int> batch = {0, 1, 2, 3, 4};

    Rng erng(6);
    Mat eps(2, 5);
    for (Eigen::Index j = 0; j < 5; ++j) {
        for (Eigen::Index i = 0; i < 2; ++i) {
            eps(i, j) = erng.normal();
        }
    }

    auto grads_for = [&](double w_kl, syngen::VaeLossParts* parts) {
        VaeConfig cfg;
        cfg.hidden = {7, 5};
        cfg.latent = 2;
        cfg.w_rec = 1.0;
        cfg.w_kl = w_kl;
        VaeGenerator model(cfg, tests::default_ids("m", 6), {}, 77);
        std::vector<Mat> grads;
        auto p = model.loss_and_gradients(td, batch, eps, &grads);
        if (parts) *parts = p;
        return grads;
    };

    syngen::VaeLossParts p1, p4, p10;
    const auto g1 = grads_for(1.0, &p1);
    const auto g4 = grads_for(4.0, &p4);
    const auto g10 = grads_for(10.0, &p10);

    // Same initialization and noise: the loss and its gradient are affine in
    // the divergence weight.
    EXPECT_NEAR(p10.total - p1.total, 9.0 * p1.kl, 1e-9);
    EXPECT_NEAR(p4.total - p1.total, 3.0 * p1.kl, 1e-9);
    for (std::size_t k = 0; k < g1.size(); ++k) {
        const Mat predicted = g1[k] + 3.0 * (g4[k] - g1[k]);
        EXPECT_TRUE(g10[k].isApprox(predicted, 1e-7)) << "param " << k;
    }
}

TEST(VaeTraining, LossDecreasesAcrossSeeds) {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
        VaeConfig cfg;
        cfg.hidden = {32, 16};
        cfg.latent = 4;
        VaeGenerator model(cfg, tests::default_ids("m", 20), {}, seed);
        const CountMatrix data = blob_data(20, 30, seed * 31 + 1);
        model.train(data, fixed_policy(10, seed), "train");
        const auto total = model.training_log().column("total");
        ASSERT_EQ(total.size(), 10u);
        EXPECT_LT(total.back(), total.front()) << "seed " << seed;
    }
}

TEST(VaeTraining, LogIsDeterministicPerSeed) {
    const CountMatrix data = blob_data(12, 16, 321);
    auto run = [&]() {
        VaeConfig cfg;
        cfg.hidden = {16, 8};
        cfg.latent = 3;
        VaeGenerator model(cfg, data.marker_ids, {}, 5);
        model.train(data, fixed_policy(6, 99), "train");
        return model.training_log();
    };
    EXPECT_TRUE(run() == run());
}

TEST(VaeTraining, RejectsMismatchedMarkerPanel) {
    VaeConfig cfg;
    cfg.hidden = {8};
    cfg.latent = 2;
    VaeGenerator model(cfg, tests::default_ids("m", 4), {}, 1);
    const CountMatrix data = blob_data(5, 6, 11);
    EXPECT_THROW(model.train(data, fixed_policy(2, 1), "train"), syngen::validation_error);
}

TEST(VaeTraining, RejectsRawCounts) {
    VaeConfig cfg;
    cfg.hidden = {8};
    cfg.latent = 2;
    VaeGenerator model(cfg, tests::default_ids("m", 3), {}, 1);
    CountMatrix raw = tests::matrix({{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}, {7.0, 8.0, 9.0}});
    EXPECT_THROW(model.train(raw, fixed_policy(2, 1), "train"), syngen::state_error);
}

TEST(VaeGeneration, DeterministicClampedAndLabelled) {
    VaeConfig cfg;
    cfg.hidden = {16, 8};
    cfg.latent = 3;
    VaeGenerator model(cfg, tests::default_ids("m", 12), {}, 9);
    const CountMatrix data = blob_data(12, 14, 55);
    model.train(data, fixed_policy(5, 3), "train");

    const CountMatrix a = model.generate(8, 7);
    const CountMatrix b = model.generate(8, 7);
    const CountMatrix c = model.generate(8, 8);
    EXPECT_TRUE(a.values.isApprox(b.values));
    EXPECT_FALSE(a.values.isApprox(c.values));
    EXPECT_EQ(a.scale, Scale::log2p1);
    EXPECT_GE(a.values.minCoeff(), 0.0);
    EXPECT_EQ(a.sample_ids.front(), "gen_1");
    EXPECT_EQ(a.sample_ids.back(), "gen_8");
    EXPECT_FALSE(a.groups.has_value());

    std::vector<std::string> labels(8, "case");
    EXPECT_THROW(model.generate(8, 7, &labels), syngen::validation_error);
}

TEST(ConditionalVae, GeneratesPerLabel) {
    VaeConfig cfg;
    cfg.hidden = {16, 8};
    cfg.latent = 3;
    cfg.conditional = true;
    VaeGenerator model(cfg, tests::default_ids("m", 10), {"case", "control"}, 4);
    const CountMatrix data = blob_data(10, 20, 77, true);
    model.train(data, fixed_policy(5, 2), "train");

    std::vector<std::string> labels = {"case", "control", "case"};
    const CountMatrix out = model.generate(3, 11, &labels);
    ASSERT_TRUE(out.groups.has_value());
    EXPECT_EQ(*out.groups, labels);

    EXPECT_THROW(model.generate(3, 11), syngen::validation_error);
    std::vector<std::string> unknown = {"case", "zebra", "case"};
    EXPECT_THROW(model.generate(3, 11, &unknown), syngen::validation_error);
    std::vector<std::string> short_labels = {"case"};
    EXPECT_THROW(model.generate(3, 11, &short_labels), syngen::validation_error);
}

TEST(ConditionalVae, LearnsGroupSeparation) {
    VaeConfig cfg;
    cfg.hidden = {16, 8};
    cfg.latent = 2;
    cfg.conditional = true;
    VaeGenerator model(cfg, tests::default_ids("m", 10), {"case", "control"}, 21);
    const CountMatrix data = blob_data(10, 24, 131, true);
    TrainingPolicy policy = fixed_policy(300, 17);
    policy.learning_rate = 0.01;
    model.train(data, policy, "train");

    std::vector<std::string> cases(25, "case"), controls(25, "control");
    const double mean_case = model.generate(25, 5, &cases).values.mean();
    const double mean_control = model.generate(25, 5, &controls).values.mean();
    // Training data puts "case" about 4 log-units above "control".
    EXPECT_GT(mean_case - mean_control, 1.0);
}

TEST(VaeSerialization, RoundTripPreservesBehaviour) {
    VaeConfig cfg;
    cfg.hidden = {12, 6};
    cfg.latent = 2;
    cfg.w_kl = 3.0;
    VaeGenerator model(cfg, tests::default_ids("m", 8), {}, 2);
    const CountMatrix data = blob_data(8, 12, 44);
    model.train(data, fixed_policy(4, 6), "train");

    const auto j = model.to_json();
    const auto restored = VaeGenerator::from_json(j);
    EXPECT_TRUE(restored->generate(5, 123).values.isApprox(model.generate(5, 123).values));
    EXPECT_TRUE(restored->training_log() == model.training_log());
    EXPECT_EQ(restored->config().w_kl, 3.0);

    auto bad = j;
    bad["weights"].erase(0);
    EXPECT_THROW(VaeGenerator::from_json(bad), syngen::serialize_error);
}
