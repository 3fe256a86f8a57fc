#include <doctest.h>

#include "pedcast/tensor.hpp"

using namespace pedcast;

TEST_CASE("tensor shape and data stay consistent") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);
    t(1, 2) = 5.0;
    CHECK(t[5] == 5.0);

    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
}

TEST_CASE("row-major indexing, last axis fastest") {
    Tensor t({2, 2, 2});
    for (std::size_t i = 0; i < 8; ++i) t[i] = static_cast<double>(i);
    CHECK(t(0, 0, 1) == 1.0);
    CHECK(t(0, 1, 0) == 2.0);
    CHECK(t(1, 0, 0) == 4.0);
}

TEST_CASE("reshape preserves data and validates counts") {
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor r = t.reshaped({3, 2});
    CHECK(r(2, 1) == 6.0);
    CHECK_THROWS_AS(t.reshaped({4, 2}), DimensionError);
}

TEST_CASE("non-finite entries are a contract violation") {
    Tensor t({2}, {1.0, std::nan("")});
    CHECK_THROWS_AS(t.require_finite("test"), NumericError);
    Tensor ok({2}, {1.0, 2.0});
    CHECK_NOTHROW(ok.require_finite("test"));
}
