#include <catch2/catch_amalgamated.hpp>

#include <inkline/inkline.hpp>

TEST_CASE("headers compile and basic plumbing works") {
    inkline::Tensor t({2, 3});
    REQUIRE(t.size() == 6);
    inkline::GrayImage img(4, 4, 1.0);
    REQUIRE(img.at(3, 3) == 1.0);
}
