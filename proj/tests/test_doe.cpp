#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "moddiff/doe/design.hpp"

using namespace moddiff;
using namespace moddiff::doe;

TEST_CASE("full factorial shape and balance") {
    SUBCASE("m=4 gives 16 rows") {
        auto d = full_factorial(4);
        CHECK(d.n_rows() == 16);
    }
    SUBCASE("m=0 gives a single empty row") {
        auto d = full_factorial(0);
        REQUIRE(d.n_rows() == 1);
        CHECK(d.rows[0].empty());
    }
    SUBCASE("m=2 enumerates binary counting with balanced columns") {
        auto d = full_factorial(2);
        REQUIRE(d.n_rows() == 4);
        CHECK(d.rows[0] == std::vector<std::uint8_t>{0, 0});
        CHECK(d.rows[1] == std::vector<std::uint8_t>{1, 0}); // module 1 = LSB
        CHECK(d.rows[2] == std::vector<std::uint8_t>{0, 1});
        CHECK(d.rows[3] == std::vector<std::uint8_t>{1, 1});
        for (std::size_t j = 0; j < 2; ++j) {
            int ones = 0;
            for (const auto& row : d.rows) ones += row[j];
            CHECK(ones == 2);
        }
    }
    SUBCASE("each column of a full factorial has 2^(m-1) ones, rows distinct") {
        for (std::size_t m : {1u, 3u, 5u}) {
            auto d = full_factorial(m);
            std::set<std::vector<std::uint8_t>> uniq(d.rows.begin(), d.rows.end());
            CHECK(uniq.size() == d.n_rows());
            for (std::size_t j = 0; j < m; ++j) {
                std::size_t ones = 0;
                for (const auto& row : d.rows) ones += row[j];
                CHECK(ones == (std::size_t(1) << (m - 1)));
            }
        }
    }
    SUBCASE("row cap raises") { CHECK_THROWS_AS(full_factorial(25), ConfigError); }
}

TEST_CASE("complement") {
    auto d = full_factorial(3);
    SUBCASE("involution") {
        auto cc = complement(complement(d));
        CHECK(cc.rows == d.rows);
    }
    SUBCASE("all-zeros row maps to all-ones") {
        auto c = complement(d);
        CHECK(c.rows[0] == std::vector<std::uint8_t>{1, 1, 1});
    }
    SUBCASE("complement of a full factorial is a row permutation of it") {
        auto c = complement(d);
        auto a = d.rows, b = c.rows;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
    }
}

TEST_CASE("schedule layout") {
    auto d = full_factorial(4);

    SUBCASE("16 rows x 20 steps over 5960: 18 full repetitions plus 10 rows") {
        auto s = make_schedule(d, 5960, 20);
        REQUIRE(s.n_steps() == 5960);
        // 18 complete repetitions fill 5760 steps; the 19th stops after 10 rows.
        for (std::size_t t = 0; t < 5760; ++t) {
            const std::size_t row = (t / 20) % 16;
            CHECK(s.steps[t] == d.rows[row]);
        }
        for (std::size_t t = 5760; t < 5960; ++t) {
            const std::size_t row = (t - 5760) / 20;
            REQUIRE(row < 10);
            CHECK(s.steps[t] == d.rows[row]);
        }
        // vectors change exactly at segment boundaries
        for (std::size_t t = 1; t < 5960; ++t) {
            if (t % 20 != 0) CHECK(s.steps[t] == s.steps[t - 1]);
        }
    }

    SUBCASE("16 rows x 186 steps: remainder shorter than a segment holds last vector") {
        auto s = make_schedule(d, 5960, 186);
        REQUIRE(s.n_steps() == 5960);
        // 32 whole segments cover 5952 steps; the last 8 hold segment 32's vector.
        const auto& hold = d.rows[31 % 16];
        for (std::size_t t = 5952; t < 5960; ++t) CHECK(s.steps[t] == hold);
    }

    SUBCASE("segment_length = n with a 1-row design gives a constant schedule") {
        DoeDesign one;
        one.module_names = {"A"};
        one.rows = {{1}};
        auto s = make_schedule(one, 50, 50);
        for (const auto& v : s.steps) CHECK(v == std::vector<std::uint8_t>{1});
    }
}

TEST_CASE("schedule properties") {
    auto d = full_factorial(3);

    SUBCASE("sequential occurrence counts differ by at most 1") {
        auto s = make_schedule(d, 1000, 7);
        std::map<std::vector<std::uint8_t>, int> seg_count;
        // whole segments only; the <segment tail repeats the last vector
        for (std::size_t t = 0; t + 7 <= s.n_steps(); t += 7) seg_count[s.steps[t]]++;
        int lo = 1 << 30, hi = 0;
        for (auto& [row, c] : seg_count) {
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        CHECK(hi - lo <= 1);
        CHECK(lo >= static_cast<int>(1000 / (8 * 7)));
    }

    SUBCASE("seeded random ordering reproduces") {
        auto a = make_schedule(d, 500, 5, Ordering::random, 42);
        auto b = make_schedule(d, 500, 5, Ordering::random, 42);
        auto c = make_schedule(d, 500, 5, Ordering::random, 43);
        CHECK(a.steps == b.steps);
        CHECK(a.steps != c.steps);
    }

    SUBCASE("every step vector equals some design row") {
        auto s = make_schedule(d, 321, 9, Ordering::random, 1);
        for (const auto& v : s.steps)
            CHECK(std::find(d.rows.begin(), d.rows.end(), v) != d.rows.end());
    }
}
