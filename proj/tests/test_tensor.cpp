#include <doctest.h>

#include "flowsteer/errors.hpp"
#include "flowsteer/rng.hpp"
#include "flowsteer/tensor.hpp"

using namespace flowsteer;

TEST_CASE("tensor construction validates extents") {
    CHECK_THROWS_AS(Tensor(Dims{2, 0}), ShapeError);
    CHECK_THROWS_AS(Tensor(Dims{2, 2}, std::vector<double>(3)), ShapeError);
    const Tensor t(Dims{2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(t[5] == 1.5);
}

TEST_CASE("image accessors are row-major per channel") {
    Tensor img = Tensor::image(3, 2, 4);
    img.at(2, 1, 3) = 7.0;
    CHECK(img[(2 * 2 + 1) * 4 + 3] == 7.0);
    CHECK(img.is_image());
    CHECK_FALSE(Tensor(Dims{2, 4, 4}).is_image());
}

TEST_CASE("arithmetic and norms") {
    const Tensor a(Dims{3}, std::vector<double>{1, -2, 2});
    const Tensor b(Dims{3}, std::vector<double>{0, 1, 0});
    CHECK(norm_l2(a) == doctest::Approx(3.0));
    CHECK(norm_linf(a) == 2.0);
    CHECK((a + b)[1] == -1.0);
    CHECK((a - b)[1] == -3.0);
    CHECK((2.0 * a)[2] == 4.0);
    CHECK(lincomb(0.5, a, 2.0, b)[1] == doctest::Approx(1.0));
    CHECK(max_abs_diff(a, b) == 3.0);
    CHECK(mean(a) == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(a + Tensor(Dims{4}), ShapeError);
}

TEST_CASE("reshape keeps data and checks element count") {
    const Tensor t(Dims{2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    const Tensor r = t.reshaped(Dims{3, 2});
    CHECK(r.dims() == Dims{3, 2});
    CHECK(r[4] == 5.0);
    CHECK_THROWS_AS(t.reshaped(Dims{4}), ShapeError);
}

TEST_CASE("finiteness check") {
    Tensor t(Dims{2}, 0.0);
    CHECK(t.all_finite());
    t[1] = std::nan("");
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("derived seeds are stable and distinct") {
    static_assert(derive_seed(1, 2) == derive_seed(1, 2));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
    Rng a(5), b(5);
    CHECK(a.normal() == b.normal());
}
