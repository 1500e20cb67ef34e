#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "capepde/errors.hpp"
#include "capepde/ops.hpp"
#include "capepde/rng.hpp"
#include "capepde/tensor.hpp"

using namespace capepde;

TEST_CASE("shape bookkeeping and invariants") {
    Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.numel() == 6);
    CHECK(t.rank() == 2);
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0}), ShapeError);
    CHECK_THROWS_AS(Tensor::from({0, 2}, {}), ShapeError);
    CHECK_THROWS_AS(t.item(), ShapeError);
    CHECK(Tensor::scalar(4.5).item() == 4.5);
}

TEST_CASE("elementwise forward values") {
    Tensor a = Tensor::from({3}, {1, 2, 3});
    Tensor b = Tensor::from({3}, {2, 2, 2});
    auto m = mul(a, b);
    CHECK(m.value()[0] == 2);
    CHECK(m.value()[1] == 4);
    CHECK(m.value()[2] == 6);
    CHECK(gelu(Tensor::scalar(0.0)).item() == 0.0);
    CHECK(sub(a, b).value()[0] == -1);
    CHECK(add(a, b).value()[2] == 5);
    CHECK(scale(a, -2.0).value()[1] == -4);
}

TEST_CASE("channel broadcast multiply") {
    // (2,4) field gated by a (2,) mask: zero mask annihilates its channel.
    Tensor a = Tensor::from({2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
    Tensor mask = Tensor::from({2}, {1, 0});
    auto v = mul(a, mask);
    for (int s = 0; s < 4; ++s) {
        CHECK(v.value()[s] == a.value()[s]);
        CHECK(v.value()[4 + s] == 0.0);
    }
    Tensor bad = Tensor::from({3}, {1, 2, 3});
    CHECK_THROWS_AS(mul(a, bad), ShapeError);
    CHECK_THROWS_AS(add(a, bad), ShapeError);
}

TEST_CASE("non-finite propagation is an error") {
    Tensor a = Tensor::from({2}, {1e308, 1e308});
    CHECK_THROWS_AS(add(a, a), NumericError);
    Tensor z = Tensor::from({1}, {-1.0});
    CHECK_THROWS_AS(sqrt(z), NumericError);
}

TEST_CASE("backward: sum gives ones, quadratic gives 2x") {
    Tensor x = Tensor::from({2, 2}, {1, -2, 3, 0.5}, true);
    {
        Tape tape;
        Tensor loss = sum(x);
        tape.backward(loss);
        for (double g : x.grad()) CHECK(g == 1.0);
    }
    x.zero_grad();
    {
        Tensor y = Tensor::from({2}, {1, 2}, true);
        Tape tape;
        Tensor loss = sum(mul(y, y));
        tape.backward(loss);
        CHECK(y.grad()[0] == doctest::Approx(2.0).epsilon(1e-14));
        CHECK(y.grad()[1] == doctest::Approx(4.0).epsilon(1e-14));
    }
}

TEST_CASE("backward contract: scalar only, single pass per tape") {
    Tensor x = Tensor::from({2}, {1, 2}, true);
    Tape tape;
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
    Tensor loss = sum(y);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), UnsupportedError);
}

TEST_CASE("gradients accumulate across tapes until zeroed") {
    Tensor x = Tensor::from({2}, {3, 4}, true);
    for (int rep = 0; rep < 2; ++rep) {
        Tape tape;
        tape.backward(sum(x));
    }
    CHECK(x.grad()[0] == 2.0);
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("no recording without an active tape") {
    Tensor x = Tensor::from({2}, {1, 2}, true);
    Tensor y = mul(x, x);  // eager
    CHECK(y.value()[1] == 4.0);
    CHECK_FALSE(y.requires_grad());
}

TEST_CASE("constants never get gradients") {
    Tensor x = Tensor::from({2}, {1, 2}, true);
    Tensor c = Tensor::from({2}, {5, 5});
    Tape tape;
    Tensor loss = sum(mul(x, c));
    tape.backward(loss);
    CHECK_FALSE(c.has_grad());
    CHECK(x.grad()[0] == 5.0);
}

TEST_CASE("clone is an independent deep copy") {
    Tensor x = Tensor::from({2}, {1, 2}, true);
    Tensor y = x.clone();
    y.raw_value()[0] = 99;
    CHECK(x.value()[0] == 1.0);
    CHECK(y.requires_grad());
}

TEST_CASE("tanh and gelu backward against closed forms") {
    Tensor x = Tensor::from({3}, {-1.2, 0.3, 2.0}, true);
    {
        Tape tape;
        tape.backward(sum(tanh(x)));
        for (int i = 0; i < 3; ++i) {
            const double t = std::tanh(x.value()[i]);
            CHECK(x.grad()[i] == doctest::Approx(1.0 - t * t).epsilon(1e-12));
        }
    }
    x.zero_grad();
    {
        Tape tape;
        tape.backward(sum(gelu(x)));
        for (int i = 0; i < 3; ++i) {
            const double v = x.value()[i];
            const double cdf = 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
            const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
            CHECK(x.grad()[i] == doctest::Approx(cdf + v * pdf).epsilon(1e-12));
        }
    }
}

TEST_CASE("concat and slice are exact inverses") {
    Rng rng(11);
    Tensor a = Tensor::randn({2, 5}, rng, 1.0, false);
    Tensor b = Tensor::randn({3, 5}, rng, 1.0, false);
    const Tensor parts[] = {a, b};
    Tensor cat = concat_channels(parts);
    CHECK(cat.dim(0) == 5);
    Tensor a2 = slice_channels(cat, 0, 2);
    Tensor b2 = slice_channels(cat, 2, 3);
    for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a2.value()[i] == a.value()[i]);
    for (std::int64_t i = 0; i < b.numel(); ++i) CHECK(b2.value()[i] == b.value()[i]);
    CHECK_THROWS_AS(slice_channels(cat, 4, 3), ShapeError);
}
