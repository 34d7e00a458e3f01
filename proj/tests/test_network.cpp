#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sga/network.hpp"
#include "support.hpp"

using namespace sga;
using sga::test::central_difference;
using sga::test::relative_error;

namespace {

NetworkParams linear_like(const std::vector<double>& w1, std::size_t in, std::size_t hidden,
                          const std::vector<double>& w2, std::size_t classes) {
    NetworkSpec spec{in, {hidden}, classes, Activation::relu};
    NetworkParams p{spec, {}};
    p.layers.push_back({Tensor({hidden, in}, w1), Tensor({hidden})});
    p.layers.push_back({Tensor({classes, hidden}, w2), Tensor({classes})});
    return p;
}

NetworkParams zero_network(std::size_t in, std::size_t hidden, std::size_t classes) {
    NetworkSpec spec{in, {hidden}, classes, Activation::relu};
    NetworkParams p{spec, {}};
    p.layers.push_back({Tensor({hidden, in}), Tensor({hidden})});
    p.layers.push_back({Tensor({classes, hidden}), Tensor({classes})});
    return p;
}

/// Random network and batch with every hidden pre-activation at least the kink margin away from 0.
struct Instance {
    NetworkParams params;
    Tensor x;
    Tensor x_prime;
    std::vector<int> labels;
};

Instance kink_free_instance(Rng& rng, std::size_t rows) {
    for (;;) {
        NetworkParams p = test::random_network(rng);
        const std::size_t d = p.spec.input_dim;
        Tensor x = test::random_matrix(rng, rows, d);
        Tensor xp = test::random_matrix(rng, rows, d);
        if (test::min_abs_preactivation(p, x) < test::kKinkMargin ||
            test::min_abs_preactivation(p, xp) < test::kKinkMargin) {
            continue;
        }
        std::vector<int> labels(rows);
        for (int& y : labels) y = static_cast<int>(rng.below(p.spec.num_classes));
        return {std::move(p), std::move(x), std::move(xp), std::move(labels)};
    }
}

void expect_param_grads_match(Instance inst, const ObjectiveSpec& objective) {
    const GradientBundle g = loss_and_param_grads(inst.params, inst.x, inst.labels, objective, &inst.x_prime);
    auto loss = [&] { return loss_and_param_grads(inst.params, inst.x, inst.labels, objective, &inst.x_prime).loss_value; };
    for (std::size_t l = 0; l < inst.params.layers.size(); ++l) {
        auto w = inst.params.layers[l].weight.data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double fd = central_difference(loss, w[i]);
            EXPECT_LE(relative_error(g.param_grads[l].weight[i], fd), test::kFdTolerance) << "layer " << l << " w" << i;
        }
        auto b = inst.params.layers[l].bias.data();
        for (std::size_t i = 0; i < b.size(); ++i) {
            const double fd = central_difference(loss, b[i]);
            EXPECT_LE(relative_error(g.param_grads[l].bias[i], fd), test::kFdTolerance) << "layer " << l << " b" << i;
        }
    }
}

}  // namespace

TEST(NetworkSpec, Validation) {
    EXPECT_THROW((NetworkSpec{0, {4}, 2}).validate(), ValidationError);
    EXPECT_THROW((NetworkSpec{3, {}, 2}).validate(), ValidationError);
    EXPECT_THROW((NetworkSpec{3, {0}, 2}).validate(), ValidationError);
    EXPECT_THROW((NetworkSpec{3, {4}, 1}).validate(), ValidationError);
    EXPECT_EQ((NetworkSpec{3, {4, 5}, 2}).layer_dims(), (std::vector<std::size_t>{3, 4, 5, 2}));
}

TEST(Init, DeterministicAndZeroBias) {
    const NetworkSpec spec{2, {3}, 2};
    const auto a = init_params(spec, 7);
    const auto b = init_params(spec, 7);
    EXPECT_EQ(encode_model(a), encode_model(b));
    EXPECT_NE(encode_model(a), encode_model(init_params(spec, 8)));
    for (const auto& layer : a.layers) {
        for (double v : layer.bias.data()) EXPECT_EQ(v, 0.0);
    }
}

TEST(Init, WeightVarianceMatchesFanIn) {
    const NetworkSpec spec{4, {8}, 2};
    std::vector<double> w;
    for (std::uint64_t seed = 1; w.size() < 2000; ++seed) {
        const auto p = init_params(spec, seed);
        const auto first = p.layers[0].weight.data();
        w.insert(w.end(), first.begin(), first.end());
    }
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= static_cast<double>(w.size());
    double var = 0.0;
    for (double v : w) var += (v - mean) * (v - mean);
    var /= static_cast<double>(w.size() - 1);
    EXPECT_NEAR(mean, 0.0, 0.05);
    EXPECT_GT(var, 0.5 * 0.25);
    EXPECT_LT(var, 1.5 * 0.25);
}

TEST(Forward, ZeroWeightsGiveZeroLogits) {
    const auto p = zero_network(3, 4, 2);
    const Tensor out = forward(p, Tensor({2, 3}, 0.7));
    for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Forward, IdentityMap) {
    const auto p = linear_like({1, 0, 0, 1}, 2, 2, {1, 0, 0, 1}, 2);
    EXPECT_EQ(forward(p, Tensor::row_vector({1, 2})).values(), (std::vector<double>{1, 2}));
}

TEST(Forward, RowIndependence) {
    Rng rng(9);
    const auto p = test::random_network(rng);
    const Tensor x = test::random_matrix(rng, 2, p.spec.input_dim);
    const Tensor both = forward(p, x);
    const std::vector<std::size_t> r0{0}, r1{1};
    const Tensor a = forward(p, gather_rows(x, r0));
    const Tensor b = forward(p, gather_rows(x, r1));
    std::vector<double> cat = a.values();
    cat.insert(cat.end(), b.values().begin(), b.values().end());
    EXPECT_EQ(both.values(), cat);
    const std::vector<std::size_t> swapped{1, 0};
    EXPECT_EQ(gather_rows(forward(p, gather_rows(x, swapped)), swapped), both);
}

TEST(Forward, ShapeMismatch) {
    const auto p = zero_network(3, 4, 2);
    EXPECT_THROW(forward(p, Tensor({1, 4})), ShapeError);
    EXPECT_THROW(input_gradient(p, Tensor({2, 3}), 0), ShapeError);
}

TEST(Gradients, UniformOutputBiasGradient) {
    const auto p = zero_network(2, 3, 2);
    const Tensor x({2, 2}, std::vector<double>{0.5, 0.5, 0.5, 0.5});
    const std::vector<int> labels{0, 1};
    const auto g = loss_and_param_grads(p, x, labels);
    // sum over the batch of (p - onehot) / m with p = [0.5, 0.5]
    EXPECT_DOUBLE_EQ(g.param_grads[1].bias[0], ((0.5 - 1.0) + 0.5) / 2.0);
    EXPECT_DOUBLE_EQ(g.param_grads[1].bias[1], (0.5 + (0.5 - 1.0)) / 2.0);
    const std::vector<int> both_zero{0, 0};
    const auto g0 = loss_and_param_grads(p, x, both_zero);
    EXPECT_DOUBLE_EQ(g0.param_grads[1].bias[0], -0.5);
    EXPECT_DOUBLE_EQ(g0.param_grads[1].bias[1], 0.5);
}

TEST(Gradients, DuplicatedSample) {
    Rng rng(10);
    const auto p = test::random_network(rng);
    const Tensor one = test::random_matrix(rng, 1, p.spec.input_dim);
    const std::vector<std::size_t> twice{0, 0};
    const std::vector<int> l1{1}, l2{1, 1};
    const auto a = loss_and_param_grads(p, one, l1);
    const auto b = loss_and_param_grads(p, gather_rows(one, twice), l2);
    for (std::size_t l = 0; l < a.param_grads.size(); ++l) {
        EXPECT_EQ(a.param_grads[l].weight, b.param_grads[l].weight);
        EXPECT_EQ(a.param_grads[l].bias, b.param_grads[l].bias);
    }
}

TEST(Gradients, InvalidInputs) {
    const auto p = zero_network(2, 3, 2);
    const Tensor x({1, 2}, 0.5);
    EXPECT_THROW(loss_and_param_grads(p, x, std::vector<int>{2}), ValidationError);
    EXPECT_THROW(loss_and_param_grads(p, x, std::vector<int>{0, 1}), ShapeError);
    EXPECT_THROW(loss_and_param_grads(p, x, std::vector<int>{0}, ObjectiveSpec::composite(1.0)), ValidationError);
    const Tensor wrong({1, 3}, 0.5);
    EXPECT_THROW(loss_and_param_grads(p, x, std::vector<int>{0}, ObjectiveSpec::composite(1.0), &wrong), ShapeError);
}

TEST(Gradients, ParamsMatchFiniteDifferencesCe) {
    Rng rng(11);
    for (int t = 0; t < 10; ++t) expect_param_grads_match(kink_free_instance(rng, 3), ObjectiveSpec::cross_entropy());
}

TEST(Gradients, ParamsMatchFiniteDifferencesKl) {
    Rng rng(12);
    for (int t = 0; t < 10; ++t) expect_param_grads_match(kink_free_instance(rng, 3), {ObjectiveKind::kl_only, 1.0});
}

TEST(Gradients, ParamsMatchFiniteDifferencesComposite) {
    Rng rng(13);
    for (int t = 0; t < 10; ++t) expect_param_grads_match(kink_free_instance(rng, 3), ObjectiveSpec::composite(0.7));
}

TEST(Gradients, InputsMatchFiniteDifferences) {
    Rng rng(14);
    for (int t = 0; t < 20; ++t) {
        Instance inst = kink_free_instance(rng, 1);
        const int y = inst.labels[0];
        const Tensor g_logit = input_gradient(inst.params, inst.x, y);
        const Tensor g_ce = input_gradient_of_loss(inst.params, inst.x, y);
        const ObjectiveSpec objective = ObjectiveSpec::composite(1.3);
        const auto pair = objective_input_gradients(inst.params, inst.x, y, inst.x_prime, objective);
        auto xs = inst.x.data();
        auto xps = inst.x_prime.data();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double fd_logit = central_difference([&] { return forward(inst.params, inst.x).at(0, y); }, xs[i]);
            EXPECT_LE(relative_error(g_logit[i], fd_logit), test::kFdTolerance);
            const double fd_ce = central_difference([&] { return cross_entropy(forward(inst.params, inst.x).row(0), y); }, xs[i]);
            EXPECT_LE(relative_error(g_ce[i], fd_ce), test::kFdTolerance);
            auto obj = [&] { return sga_objective(inst.params, inst.x, y, inst.x_prime, 1.3); };
            EXPECT_LE(relative_error(pair.clean[i], central_difference(obj, xs[i])), test::kFdTolerance);
            EXPECT_LE(relative_error(pair.paired[i], central_difference(obj, xps[i])), test::kFdTolerance);
        }
    }
}

TEST(InputGradient, LinearModelGivesWeightRow) {
    // Identity hidden layer on positive inputs keeps every unit active.
    const auto p = linear_like({1, 0, 0, 0, 1, 0, 0, 0, 1}, 3, 3, {1, -2, 3, 0.5, 0.25, -1}, 2);
    const Tensor x = Tensor::row_vector({0.2, 0.4, 0.6});
    EXPECT_EQ(input_gradient(p, x, 0).values(), (std::vector<double>{1, -2, 3}));
    EXPECT_EQ(input_gradient(p, x, 1).values(), (std::vector<double>{0.5, 0.25, -1}));
    EXPECT_THROW(input_gradient(p, x, 2), ValidationError);
}

TEST(InputGradient, InactiveUnitContributesNothing) {
    // Hidden unit 1 reads -x0 and is inactive for positive inputs.
    const auto p = linear_like({1, 0, -1, 0}, 2, 2, {1, 5, 0, 0}, 2);
    EXPECT_EQ(input_gradient(p, Tensor::row_vector({0.5, 0.5}), 0).values(), (std::vector<double>{1, 0}));
}

TEST(InputGradientOfLoss, SaturatedPrediction) {
    const auto p = linear_like({1, 0, 0, 1}, 2, 2, {60, 0, 0, 0}, 2);
    const Tensor g = input_gradient_of_loss(p, Tensor::row_vector({1.0, 0.5}), 0);
    for (double v : g.data()) EXPECT_LT(std::abs(v), 1e-20);
}

TEST(SgaObjective, Collapses) {
    Rng rng(15);
    const auto p = test::random_network(rng);
    const Tensor x = test::random_matrix(rng, 1, p.spec.input_dim);
    const Tensor xp = test::random_matrix(rng, 1, p.spec.input_dim);
    const double ce = cross_entropy(forward(p, x).row(0), 1);
    EXPECT_EQ(sga_objective(p, x, 1, xp, 0.0), ce);
    EXPECT_EQ(sga_objective(p, x, 1, x, 2.0), ce);
    double prev = sga_objective(p, x, 1, xp, 0.0);
    for (double lambda : {0.5, 1.0, 2.0}) {
        const double v = sga_objective(p, x, 1, xp, lambda);
        EXPECT_GE(v, prev);
        prev = v;
    }
}

TEST(SgdStep, Arithmetic) {
    auto p = linear_like({1.0}, 1, 1, {1.0, 1.0}, 2);
    GradientBundle g{detail::zero_like(p), 0.0};
    g.param_grads[0].weight[0] = 2.0;
    const auto next = sgd_step(p, g, 0.1);
    EXPECT_DOUBLE_EQ(next.layers[0].weight[0], 0.8);
    EXPECT_EQ(p.layers[0].weight[0], 1.0);
    EXPECT_EQ(encode_model(sgd_step(p, g, 0.0)), encode_model(p));
    const auto twice = sgd_step(sgd_step(p, g, 0.05), g, 0.05);
    EXPECT_NEAR(twice.layers[0].weight[0], next.layers[0].weight[0], 1e-15);
    EXPECT_THROW(sgd_step(p, g, -1.0), ValidationError);
    GradientBundle bad{{}, 0.0};
    EXPECT_THROW(sgd_step(p, bad, 0.1), ShapeError);
}

TEST(ModelFile, RoundTrip) {
    Rng rng(16);
    const auto p = test::random_network(rng);
    test::TempDir dir("model");
    save_model(p, dir / "m.sgam");
    const auto q = load_model(dir / "m.sgam");
    EXPECT_EQ(q.spec, p.spec);
    EXPECT_EQ(encode_model(q), encode_model(p));
    for (std::size_t l = 0; l < p.layers.size(); ++l) EXPECT_EQ(q.layers[l].weight, p.layers[l].weight);
}

TEST(ModelFile, Errors) {
    Rng rng(17);
    const auto bytes = encode_model(test::random_network(rng));
    auto truncated = bytes;
    truncated.resize(bytes.size() - 3);
    try {
        decode_model(io::ByteReader(truncated));
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.kind(), FormatError::Kind::truncated);
    }
    auto magic = bytes;
    magic[0] = 'X';
    try {
        decode_model(io::ByteReader(magic));
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.kind(), FormatError::Kind::bad_magic);
        EXPECT_NE(std::string(e.what()).find("SGAM"), std::string::npos);
    }
    auto version = bytes;
    version[4] = 9;
    try {
        decode_model(io::ByteReader(version));
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.kind(), FormatError::Kind::bad_version);
    }
    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(decode_model(io::ByteReader(trailing)), FormatError);
}
