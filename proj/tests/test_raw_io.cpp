#include <doctest.h>

#include "ctforge/error.hpp"
#include "ctforge/raw_io.hpp"
#include "ctforge/rng.hpp"

using namespace ctforge;

TEST_CASE("raw round trip preserves everything") {
    Rng rng(7);
    std::vector<std::int16_t> voxels(5 * 4 * 3);
    for (auto& v : voxels) {
        v = static_cast<std::int16_t>(rng.uniform_int(kHuMin, kHuMax));
    }
    Volume v({5, 4, 3}, {0.7, 0.7, 2.5}, voxels, "series-xyz");
    Volume back = read_raw(write_raw(v));
    CHECK(back == v);
}

TEST_CASE("header is human readable") {
    Volume v({2, 2, 2}, {1, 1, 1}, std::int16_t(-1000), "abc");
    const auto bytes = write_raw(v);
    const std::string head(bytes.begin(), bytes.begin() + 40);
    CHECK(head.find("dims=2,2,2") != std::string::npos);
    CHECK(head.find("spacing=1,1,1") != std::string::npos);
}

TEST_CASE("constant payload decodes to constant volume") {
    Volume v({2, 2, 2}, {1, 1, 1}, std::int16_t(-1000), "c");
    Volume back = read_raw(write_raw(v));
    for (auto x : back.voxels()) CHECK(x == -1000);
}

TEST_CASE("truncated payload raises HeaderMismatch") {
    Volume v({4, 4, 4}, {1, 1, 1}, std::int16_t(0), "t");
    auto bytes = write_raw(v);
    bytes.resize(bytes.size() - 2);
    CHECK_THROWS_AS(read_raw(bytes), HeaderMismatch);
}

TEST_CASE("corrupt headers raise HeaderMismatch") {
    Volume v({2, 2, 2}, {1, 1, 1}, std::int16_t(0), "t");
    auto good = write_raw(v);

    auto bad = good;
    bad[0] = 'x';
    CHECK_THROWS_AS(read_raw(bad), HeaderMismatch);

    // Unknown voxel type.
    std::string s(good.begin(), good.end());
    const auto at = s.find("int16le");
    s.replace(at, 7, "float32");
    std::vector<std::uint8_t> bad2(s.begin(), s.end());
    CHECK_THROWS_AS(read_raw(bad2), HeaderMismatch);
}

TEST_CASE("spacing survives the text round trip bit-exactly") {
    const double tricky = 0.1 + 0.2;  // 0.30000000000000004
    Volume v({2, 2, 2}, {tricky, 1.0 / 3.0, 2.5}, std::int16_t(0), "t");
    Volume back = read_raw(write_raw(v));
    CHECK(back.spacing().x == tricky);
    CHECK(back.spacing().y == 1.0 / 3.0);
    CHECK(back.spacing().z == 2.5);
}
