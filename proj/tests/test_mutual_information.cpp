#include <doctest.h>

#include <cmath>

#include "re3val/error.hpp"
#include "re3val/mutual_information.hpp"
#include "re3val/random.hpp"

using namespace re3val;

TEST_CASE("independent uniform joint") {
    JointDistribution j({{0.25, 0.25}, {0.25, 0.25}});
    CHECK(std::abs(mutual_information(j)) <= 1e-12);
}

TEST_CASE("perfectly dependent joint") {
    JointDistribution j({{0.5, 0.0}, {0.0, 0.5}});
    CHECK(std::abs(mutual_information(j) - std::log(2.0)) <= 1e-12);
}

TEST_CASE("term-by-term evaluation") {
    JointDistribution j({{0.4, 0.1}, {0.1, 0.4}});
    const double expected = 2 * 0.4 * std::log(0.4 / 0.25) + 2 * 0.1 * std::log(0.1 / 0.25);
    CHECK(std::abs(mutual_information(j) - expected) <= 1e-15);
}

TEST_CASE("validation") {
    CHECK_THROWS_AS(JointDistribution({{0.5, 0.4}}), ValidationError);
    CHECK_THROWS_AS(JointDistribution({{1.5, -0.5}}), ValidationError);
    CHECK_THROWS_AS(JointDistribution({{0.5}, {0.25, 0.25}}), ValidationError);
    CHECK_THROWS_AS(JointDistribution({}), ValidationError);
    CHECK_THROWS_AS(JointDistribution::from_counts({{0, 0}}), ValidationError);
}

TEST_CASE("marginals and counts") {
    auto j = JointDistribution::from_counts({{1, 3}, {2, 2}});
    CHECK(j(0, 1) == 3.0 / 8.0);
    auto mx = j.marginal_x();
    auto my = j.marginal_y();
    CHECK(mx[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(my[1] == doctest::Approx(5.0 / 8.0).epsilon(1e-15));
}

TEST_CASE("factorized joints have zero information; random joints are non-negative") {
    Rng rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t r = 1 + rng.below(5), c = 1 + rng.below(5);
        std::vector<double> px(r), py(c);
        double sx = 0, sy = 0;
        for (auto& x : px) sx += (x = rng.uniform());
        for (auto& y : py) sy += (y = rng.uniform());
        std::vector<std::vector<double>> indep(r, std::vector<double>(c)), counts(r, std::vector<double>(c));
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t k = 0; k < c; ++k) {
                indep[i][k] = px[i] / sx * py[k] / sy;
                counts[i][k] = rng.below(4) == 0 ? 0.0 : rng.uniform();
            }
        counts[0][0] += 0.1;
        CHECK(std::abs(mutual_information(JointDistribution(indep, 1e-9))) <= 1e-12);
        CHECK(mutual_information(JointDistribution::from_counts(counts)) >= -1e-12);
    }
}
