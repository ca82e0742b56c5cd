#include <doctest.h>

#include "ctforge/nn/net.hpp"
#include "ctforge/nn/ops.hpp"
#include "fd_check.hpp"

using namespace ctforge;
using namespace ctforge::nn;
using fd::DTensor;

TEST_CASE("1x1x1 identity kernel convolution is the identity map") {
    Rng rng(1);
    DTensor input = fd::random_tensor({1, 4, 4, 4}, rng);
    DTensor weight({1, 1, 1, 1, 1});
    weight.data[0] = 1.0;
    DTensor bias({1});
    DTensor out = conv3d_forward(input, weight, bias, 1, 0);
    REQUIRE(out.shape == input.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        CHECK(out.data[i] == doctest::Approx(input.data[i]));
    }
}

TEST_CASE("delta input through a 3^3 ones kernel echoes the value at center") {
    DTensor input({1, 5, 5, 5});
    input.data[input.numel() / 2] = 7.5;  // center voxel (2,2,2)
    DTensor weight({1, 1, 3, 3, 3});
    weight.fill(1.0);
    DTensor bias({1});
    DTensor out = conv3d_forward(input, weight, bias, 1, 1);
    REQUIRE(out.shape == input.shape);
    // Center output sums the whole (single-voxel) mass.
    CHECK(out.data[out.numel() / 2] == doctest::Approx(7.5));
    // A corner sees nothing.
    CHECK(out.data[0] == doctest::Approx(0.0));
}

TEST_CASE("deconv k4 s2 p1 doubles the grid") {
    Rng rng(2);
    DTensor input = fd::random_tensor({2, 4, 4, 4}, rng);
    DTensor weight = fd::random_tensor({2, 3, 4, 4, 4}, rng);
    DTensor bias = fd::random_tensor({3}, rng);
    DTensor out = deconv3d_forward(input, weight, bias, 2, 1);
    CHECK(out.shape == std::vector<int>{3, 8, 8, 8});
}

TEST_CASE("conv/deconv shape validation") {
    DTensor input({2, 4, 4, 4});
    DTensor weight({3, 1, 3, 3, 3});  // expects 1 input channel
    DTensor bias({3});
    CHECK_THROWS_AS(conv3d_forward(input, weight, bias, 1, 1), ShapeMismatch);
}

TEST_CASE("gradient checks: all primitives on randomized small shapes") {
    const auto rep = fd::run_primitive_checks(6, 2024);
    CHECK(rep.conv < 1e-3);
    CHECK(rep.deconv < 1e-3);
    CHECK(rep.norm < 1e-3);
    CHECK(rep.act_leaky < 1e-3);
    CHECK(rep.act_relu < 1e-3);
    CHECK(rep.act_tanh < 1e-3);
    CHECK(rep.act_sigmoid < 1e-3);
    CHECK(rep.dropout < 1e-3);
    CHECK(rep.bce < 1e-3);
}

TEST_CASE("gradient checks: composite generator and discriminator graphs") {
    CHECK(fd::run_generator_composite_check(3, 77) < 1e-3);
    CHECK(fd::run_discriminator_composite_check(3, 78) < 1e-3);
}

TEST_CASE("instance norm standardizes each channel") {
    Rng rng(5);
    DTensor input = fd::random_tensor({2, 4, 4, 4}, rng);
    DTensor gamma({2});
    gamma.fill(1.0);
    DTensor beta({2});
    DTensor out = norm_forward(input, gamma, beta,
                               static_cast<NormCache<double>*>(nullptr));
    for (int c = 0; c < 2; ++c) {
        double mean = 0.0;
        for (int i = 0; i < 64; ++i) mean += out.data[static_cast<std::size_t>(c * 64 + i)];
        mean /= 64.0;
        CHECK(std::fabs(mean) < 1e-10);
    }
}
