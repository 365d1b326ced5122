#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "fd_oracle.hpp"
#include "hve/errors.hpp"
#include "hve/fewshot.hpp"
#include "hve/ops.hpp"
#include "hve/rng.hpp"

using namespace hve;
namespace o = hve::ops;

namespace {

// Uniform point in the ball of the given radius.
std::vector<double> ball_point(Rng& rng, std::size_t d, double radius) {
    std::vector<double> v(d);
    double n2 = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        n2 += x * x;
    }
    const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) / std::sqrt(n2);
    for (auto& x : v) x *= r;
    return v;
}

// The Poincare distance evaluated directly, without the tensor library.
double reference_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double gap = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        gap += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::acosh(1.0 + 2.0 * gap / ((1.0 - na) * (1.0 - nb)));
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    return hyperbolic_distance(Tensor::vector(a), Tensor::vector(b)).item();
}

}  // namespace

TEST(Hyperbolic, KnownValues) {
    EXPECT_NEAR(dist({0.5, 0.0}, {0.0, 0.0}), std::log(3.0), 1e-9);
    EXPECT_EQ(dist({0.3, -0.2, 0.1}, {0.3, -0.2, 0.1}), 0.0);
    const auto w = weighted_distance(Tensor::vector({0.5, 0.5}), Tensor::vector({0.5, 0.0}),
                                     Tensor::vector({0.0, 0.0}));
    EXPECT_NEAR(w.item(), std::acosh(17.0 / 15.0), 1e-12);
    // acosh(17/15) = ln(17/15 + 8/15) = ln(5/3)
    EXPECT_NEAR(w.item(), std::log(5.0 / 3.0), 1e-12);
}

TEST(Hyperbolic, MetricAxiomsOnSeededTriples) {
    Rng rng(2024);
    double worst_slack = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t d = 2 + t % 7;
        const auto x = ball_point(rng, d, 0.9);
        const auto y = ball_point(rng, d, 0.9);
        const auto z = ball_point(rng, d, 0.9);
        const double xy = dist(x, y), yx = dist(y, x), yz = dist(y, z), xz = dist(x, z);
        ASSERT_GE(xy, 0.0);
        ASSERT_EQ(dist(x, x), 0.0);
        ASSERT_EQ(xy, yx);
        worst_slack = std::max(worst_slack, xz - (xy + yz));
        ASSERT_NEAR(xy, reference_distance(x, y), 1e-9 * std::max(1.0, xy));
    }
    EXPECT_LE(worst_slack, 1e-9);
}

TEST(Hyperbolic, UnitWeightsAreBitExact) {
    Rng rng(5);
    for (int t = 0; t < 200; ++t) {
        const auto q = Tensor::vector(ball_point(rng, 6, 0.95));
        const auto p = Tensor::vector(ball_point(rng, 6, 0.95));
        EXPECT_EQ(weighted_distance(Tensor::ones({6}), q, p).item(), hyperbolic_distance(q, p).item());
    }
}

TEST(Hyperbolic, Gradients) {
    Rng rng(6);
    auto a = Tensor::parameter({4}, ball_point(rng, 4, 0.8));
    auto b = Tensor::parameter({4}, ball_point(rng, 4, 0.8));
    auto alpha = Tensor::parameter({4}, {0.3, 0.9, 0.5, 0.7});
    EXPECT_LT(fd::check({a, b}, [&] { return hyperbolic_distance(a, b); }), 1e-6);
    EXPECT_LT(fd::check({alpha, a, b}, [&] { return weighted_distance(alpha, a, b); }), 1e-6);
}

TEST(BallProject, Branches) {
    const auto out = ball_project(Tensor::vector({2.0, 0.0}));
    EXPECT_NEAR(out[0], 0.99999, 1e-15);
    EXPECT_EQ(out[1], 0.0);
    const auto in = Tensor::vector({0.3, 0.4});
    const auto same = ball_project(in);
    EXPECT_EQ(same.node(), in.node());

    auto outside = Tensor::parameter({3}, {1.5, -0.7, 0.4});
    auto inside = Tensor::parameter({3}, {0.2, -0.1, 0.3});
    const auto probe = Tensor::vector({0.4, 1.0, -2.0});
    EXPECT_LT(fd::check({outside}, [&] { return o::dot(ball_project(outside), probe); }), 1e-6);
    EXPECT_LT(fd::check({inside}, [&] { return o::dot(ball_project(inside), probe); }), 1e-6);
}

TEST(Prototypes, MeanProjectionAndPermutation) {
    const auto single = build_prototypes({{Tensor::vector({3.0, 4.0})}}, FusionMode::text_only, nullptr);
    EXPECT_NEAR(single.prototypes[0][0], 0.6 * (1 - kBallEps), 1e-15);

    const auto two = build_prototypes({{Tensor::vector({0.2, 0.0}), Tensor::vector({0.4, 0.0})}},
                                      FusionMode::concat, nullptr);
    EXPECT_NEAR(two.prototypes[0][0], 0.3, 1e-15);
    EXPECT_EQ(two.prototypes[0][1], 0.0);
    for (double w : two.weights[0].data()) EXPECT_EQ(w, 1.0);

    Rng rng(7);
    std::vector<Tensor> shots;
    for (int k = 0; k < 5; ++k) shots.push_back(Tensor::vector(ball_point(rng, 4, 0.9)));
    auto shuffled = shots;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto a = build_prototypes({shots}, FusionMode::image_object, nullptr);
    const auto b = build_prototypes({shuffled}, FusionMode::image_object, nullptr);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a.prototypes[0][i], b.prototypes[0][i], 1e-15);

    EXPECT_THROW(build_prototypes({shots}, FusionMode::full, nullptr), ContractError);
}

TEST(Classify, ProbabilitiesFromDistances) {
    PrototypeSet protos;
    protos.prototypes = {Tensor::vector({0.0, 0.0}), Tensor::vector({0.5, 0.0})};
    protos.weights = {Tensor::ones({2}), Tensor::ones({2})};
    const auto q = Tensor::vector({0.0, 0.0});
    const auto d = prototype_distances(q, protos, DistanceVariant::weighted_embeddings);
    EXPECT_EQ(d[0], 0.0);
    EXPECT_NEAR(d[1], std::log(3.0), 1e-12);
    const auto p = classify(q, protos, DistanceVariant::weighted_embeddings);
    EXPECT_NEAR(p[0], 0.75, 1e-9);
    EXPECT_NEAR(p[1], 0.25, 1e-9);
    const auto s = classify(q, protos, DistanceVariant::scalar_mean_alpha);
    EXPECT_NEAR(s[0], 0.75, 1e-9);
}

TEST(Classify, SumToOneAndShiftInvariantArgmax) {
    Rng rng(8);
    for (int t = 0; t < 300; ++t) {
        std::vector<double> d(2 + t % 9);
        for (auto& x : d) x = std::abs(rng.normal(0.0, 3.0));
        const auto p = o::softmax(o::scale(Tensor::vector(d), -1.0), 0);
        double total = 0.0;
        for (double v : p.data()) total += v;
        EXPECT_NEAR(total, 1.0, 1e-12);
        const auto shifted = o::softmax(o::scale(o::add_scalar(Tensor::vector(d), rng.uniform(-5, 50)), -1.0), 0);
        const auto arg = [](const Tensor& x) {
            return std::max_element(x.data().begin(), x.data().end()) - x.data().begin();
        };
        EXPECT_EQ(arg(p), arg(shifted));
        EXPECT_EQ(arg(p), std::min_element(d.begin(), d.end()) - d.begin());
    }

    PrototypeSet protos;
    for (int i = 0; i < 4; ++i) {
        protos.prototypes.push_back(Tensor::vector(ball_point(rng, 3, 0.5)));
        protos.weights.push_back(Tensor::ones({3}));
    }
    const auto p = classify(protos.prototypes[2], protos, DistanceVariant::weighted_embeddings);
    EXPECT_EQ(std::max_element(p.data().begin(), p.data().end()) - p.data().begin(), 2);
}

TEST(Loss, ChanceAndCertainty) {
    std::vector<Tensor> uniform(3, Tensor::vector(std::vector<double>(5, std::log(0.2))));
    EXPECT_NEAR(nll_loss(uniform, {0, 3, 4}).item(), std::log(5.0), 1e-12);
    std::vector<Tensor> sure = {Tensor::vector({0.0, -1e300}), Tensor::vector({-1e300, 0.0})};
    EXPECT_EQ(nll_loss(sure, {0, 1}).item(), 0.0);

    // equal distances to all prototypes
    PrototypeSet protos;
    for (int i = 0; i < 5; ++i) {
        std::vector<double> v(5, 0.0);
        v[i] = 0.4;
        protos.prototypes.push_back(Tensor::vector(v));
        protos.weights.push_back(Tensor::ones({5}));
    }
    const auto l = episode_loss({Tensor::zeros({5})}, {2}, protos, DistanceVariant::weighted_embeddings);
    EXPECT_NEAR(l.item(), std::log(5.0), 1e-12);
}

TEST(Loss, GradientThroughPrototypes) {
    Rng rng(9);
    std::vector<Tensor> leaves;
    std::vector<std::vector<Tensor>> support(3);
    for (auto& s : support)
        for (int k = 0; k < 2; ++k) {
            s.push_back(Tensor::parameter({4}, ball_point(rng, 4, 0.7)));
            leaves.push_back(s.back());
        }
    std::vector<Tensor> queries;
    for (int i = 0; i < 3; ++i) {
        queries.push_back(Tensor::parameter({4}, ball_point(rng, 4, 0.7)));
        leaves.push_back(queries.back());
    }
    for (auto variant : {DistanceVariant::weighted_embeddings, DistanceVariant::scalar_mean_alpha}) {
        EXPECT_LT(fd::check(leaves,
                            [&] {
                                const auto protos = build_prototypes(support, FusionMode::concat, nullptr);
                                return episode_loss(queries, {0, 1, 2}, protos, variant);
                            }),
                  1e-6);
    }
}

namespace {

std::map<std::string, std::vector<std::size_t>> random_groups(Rng& rng, std::size_t relations,
                                                              std::size_t max_size) {
    std::map<std::string, std::vector<std::size_t>> groups;
    std::size_t next = 0;
    for (std::size_t r = 0; r < relations; ++r) {
        const std::size_t n = rng.below(max_size + 1);
        auto& g = groups["rel" + std::to_string(1000 + r)];
        for (std::size_t i = 0; i < n; ++i) g.push_back(next++);
    }
    return groups;
}

}  // namespace

TEST(Sampler, PropertySuite) {
    Rng rng(77);
    std::size_t feasible = 0, infeasible = 0;
    for (int c = 0; c < 600; ++c) {
        const auto groups = random_groups(rng, 2 + rng.below(15), 12);
        EpisodeConfig cfg;
        cfg.n_way = 1 + rng.below(8);
        cfg.k_shot = 1 + rng.below(5);
        cfg.q_query = 1 + rng.below(3);
        std::size_t eligible = 0;
        for (const auto& [_, g] : groups) eligible += g.size() >= cfg.k_shot + cfg.q_query;
        Rng draw(c);
        if (eligible < cfg.n_way) {
            EXPECT_THROW(sample_episode(groups, cfg, draw), SamplingError);
            ++infeasible;
            continue;
        }
        ++feasible;
        const auto ep = sample_episode(groups, cfg, draw);
        ASSERT_EQ(ep.ways(), cfg.n_way);
        ASSERT_EQ(ep.query.size(), cfg.n_way * cfg.q_query);
        ASSERT_EQ(ep.query_labels.size(), ep.query.size());
        ASSERT_TRUE(std::is_sorted(ep.relations.begin(), ep.relations.end()));
        std::set<std::string> names(ep.relations.begin(), ep.relations.end());
        ASSERT_EQ(names.size(), cfg.n_way);
        std::set<std::size_t> seen;
        for (std::size_t r = 0; r < cfg.n_way; ++r) {
            ASSERT_EQ(ep.support[r].size(), cfg.k_shot);
            const auto& members = groups.at(ep.relations[r]);
            for (auto idx : ep.support[r]) {
                ASSERT_TRUE(std::count(members.begin(), members.end(), idx));
                ASSERT_TRUE(seen.insert(idx).second);
            }
        }
        for (std::size_t i = 0; i < ep.query.size(); ++i) {
            ASSERT_EQ(ep.query_labels[i], i / cfg.q_query);
            const auto& members = groups.at(ep.relations[ep.query_labels[i]]);
            ASSERT_TRUE(std::count(members.begin(), members.end(), ep.query[i]));
            ASSERT_TRUE(seen.insert(ep.query[i]).second);
        }
        Rng again(c);
        const auto twin = sample_episode(groups, cfg, again);
        ASSERT_EQ(twin.support, ep.support);
        ASSERT_EQ(twin.query, ep.query);
    }
    EXPECT_GE(feasible + infeasible, 500u);
    EXPECT_GT(feasible, 100u);
    EXPECT_GT(infeasible, 50u);
}

TEST(Sampler, StructuralAndFiveShotInfeasibility) {
    std::map<std::string, std::vector<std::size_t>> ten;
    for (std::size_t r = 0; r < 10; ++r) ten["r" + std::to_string(r)] = {2 * r, 2 * r + 1};
    Rng rng(1);
    const auto ep = sample_episode(ten, {5, 1, 1, 0}, rng);
    EXPECT_EQ(ep.support.size(), 5u);
    EXPECT_EQ(ep.query.size(), 5u);

    std::map<std::string, std::vector<std::size_t>> four;
    for (std::size_t r = 0; r < 8; ++r) four["r" + std::to_string(r)] = {4 * r, 4 * r + 1, 4 * r + 2, 4 * r + 3};
    try {
        sample_episode(four, {5, 5, 1, 0}, rng);
        FAIL();
    } catch (const SamplingError& e) {
        EXPECT_NE(std::string(e.what()).find("only 0 of 8"), std::string::npos) << e.what();
    }
}
