#include <doctest.h>

#include <algorithm>
#include <set>

#include "postratio/error.hpp"
#include "postratio/generators.hpp"
#include "postratio/knn.hpp"
#include "postratio/random.hpp"
#include "support.hpp"

using namespace postratio;

TEST_CASE("substreams are reproducible and distinct") {
    Rng a(42, 1), b(42, 1), c(42, 2), d(43, 1);
    const double va = a.normal();
    CHECK(va == b.normal());
    CHECK(va != c.normal());
    CHECK(va != d.normal());
    CHECK(substream_seed(1, 2) != substream_seed(2, 1));
}

TEST_CASE("fold assignment") {
    const auto folds = assign_folds(23, 5, 9);
    REQUIRE(folds.size() == 23);
    std::vector<int> counts(5, 0);
    for (auto f : folds) ++counts.at(f);
    CHECK(*std::max_element(counts.begin(), counts.end()) -
              *std::min_element(counts.begin(), counts.end()) <=
          1);
    CHECK(folds == assign_folds(23, 5, 9));
    CHECK(folds != assign_folds(23, 5, 10));
}

TEST_CASE("gaussian shift generator") {
    const auto [p, q] = gen_gaussian_shift(11, 300, 5);
    CHECK(p.size() == 11);
    CHECK(q.size() == 300);
    CHECK(p.dim() == 1);
    std::size_t pos = 0;
    for (auto y : p.labels()) pos += y == Label::Positive;
    CHECK(pos == 6);

    const auto [p2, q2] = gen_gaussian_shift(11, 300, 5);
    CHECK(p2 == p);
    CHECK(q2 == q);

    // Class means.
    const auto [big, unused] = gen_gaussian_shift(200000, 4, 8);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < big.size(); ++i)
        if (big.label(i) == Label::Positive) {
            sum += big.x(i)[0];
            ++n;
        }
    CHECK(sum / static_cast<double>(n) == doctest::Approx(1.5).epsilon(0.01));
}

TEST_CASE("four gaussian generator") {
    const auto [p, q] = gen_four_gaussian(40, 5000, 1.0, 3);
    CHECK(p.dim() == 2);
    CHECK(p.size() == 40);

    // Shift 0: identical to the source draw under the same stream.
    Rng r1(3, 1), r2(3, 1);
    CHECK(four_gaussian_sample(100, 0.0, r1) == four_gaussian_sample(100, 0.0, r2));

    Rng big_rng(17, 2);
    const auto big = four_gaussian_sample(1000000, 1.0, big_rng);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < big.size(); ++i)
        if (big.label(i) == Label::Positive) {
            sum += big.x(i)[1];
            ++n;
        }
    CHECK(std::abs(sum / static_cast<double>(n) - 1.0) < 0.01);
    CHECK_THROWS_AS(gen_four_gaussian(3, 100, 1.0, 1), ConfigError);
}

TEST_CASE("knn matches flat scan on random clouds") {
    std::mt19937_64 gen(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t dim = trial % 2 == 0 ? 2 : 5;
        const auto data = testing::random_dataset(50 + trial, dim, gen);
        const KnnIndex index(data);
        const auto queries = testing::random_dataset(10, dim, gen);
        for (std::size_t i = 0; i < queries.size(); ++i)
            for (std::size_t k : {1, 3, 17}) {
                const auto nb = index.query(queries.x(i), k);
                CHECK(nb.indices == testing::scan_knn(data, testing::all_rows(data), queries.x(i), k));
                CHECK(std::is_sorted(nb.distances.begin(), nb.distances.end()));
            }
    }
}

TEST_CASE("knn ties resolve to lower index") {
    LabeledDataset data(2);
    // A ring of equidistant points plus duplicates.
    const double pts[][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {1, 0}, {0, 1}};
    for (const auto& p : pts) data.add(Label::Positive, p);
    const KnnIndex index(data);
    const double origin[] = {0.0, 0.0};
    const auto nb = index.query(origin, 4);
    CHECK(nb.indices == std::vector<std::size_t>{0, 1, 2, 3});
    const double at[] = {1.0, 0.0};
    CHECK(index.query(at, 2).indices == std::vector<std::size_t>{0, 4});
}

TEST_CASE("knn truncation and errors") {
    std::mt19937_64 gen(1);
    const auto data = testing::random_dataset(5, 2, gen);
    const KnnIndex index(data);
    const auto nb = index.query(data.x(0), 9);
    CHECK(nb.size() == 5);
    CHECK(nb.truncated);
    CHECK_FALSE(index.query(data.x(0), 5).truncated);
    CHECK_THROWS_AS(index.query(data.x(0), 0), ConfigError);
    const double wrong[] = {1.0};
    CHECK_THROWS_AS(index.query(wrong, 1), DimensionMismatch);
}

TEST_CASE("knn over row subset reports original indices") {
    std::mt19937_64 gen(77);
    const auto data = testing::random_dataset(60, 3, gen);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); i += 3) rows.push_back(i);
    const KnnIndex index(data, rows);
    CHECK(index.size() == rows.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        CHECK(index.query(data.x(i), 4).indices == testing::scan_knn(data, rows, data.x(i), 4));
}

TEST_CASE("conditional mean") {
    std::mt19937_64 gen(8);
    const auto data = testing::random_dataset(30, 2, gen);
    std::vector<double> z(data.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = static_cast<double>(i);
    const KnnIndex index(data);
    const auto nn = testing::scan_knn(data, testing::all_rows(data), data.x(3), 6);
    double expect = 0.0;
    for (auto j : nn) expect += z[j];
    CHECK(index.conditional_mean(data.x(3), 6, z) == doctest::Approx(expect / 6.0));
}

TEST_CASE("zero-shift four-gaussian draws match the source distribution") {
    Rng a(17), b(17);
    const auto target = four_gaussian_sample(60, 0.0, a);
    const auto source = four_gaussian_sample(60, 0.0, b);
    CHECK(target == source);
}
