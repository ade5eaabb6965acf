#include "abstain/core.hpp"

#include "doctest.h"

#include <thread>

using namespace abstain;

TEST_SUITE("core") {

TEST_CASE("rank counts entries strictly below, plus one") {
    const std::vector<double> table{0.1, 0.2, 0.3};
    CHECK(rank(0.2, table) == 2);
    CHECK(rank(0.05, table) == 1);
    CHECK(rank(0.9, table) == 4);
    const RankTable t({0.3, 0.1, 0.2, 0.2});
    CHECK(t(0.2) == 2);
    CHECK(t(0.25) == 4);
    CHECK_THROWS_AS(rank(0.5, std::vector<double>{}), Error);
}

TEST_CASE("rng streams are reproducible") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(Rng(1).next_u64() != Rng(2).next_u64());

    Rng zero(0);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double u = zero.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    CHECK(sum / 10000 == doctest::Approx(0.5).epsilon(0.02));

    Rng n(3);
    double m = 0.0, s = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double z = n.normal();
        m += z;
        s += z * z;
    }
    m /= 20000;
    CHECK(std::abs(m) < 0.03);
    CHECK(s / 20000 - m * m == doctest::Approx(1.0).epsilon(0.03));

    Rng idx(5);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) ++hits[idx.index(7)];
    for (int h : hits) CHECK(h > 800);
}

TEST_CASE("probability validation") {
    Vector p(3);
    p << 0.2, 0.3, 0.5;
    CHECK_NOTHROW(validate_probability(p, Task::multiclass));
    p << 0.2, 0.3, 0.6;
    CHECK_THROWS_AS(validate_probability(p, Task::multiclass), Error);
    CHECK_NOTHROW(validate_probability(p, Task::multilabel));
    p << 0.2, 0.3, 1.2;
    CHECK_THROWS_AS(validate_probability(p, Task::multilabel), Error);
    Vector one(1);
    one << 1.0;
    CHECK_THROWS_AS(validate_probability(one, Task::multiclass), Error);
    Vector close(2);
    close << 0.5, 0.5 + 5e-7;
    CHECK_NOTHROW(validate_probability(close, Task::multiclass));
}

TEST_CASE("split validation catches shape and label errors") {
    LabeledSplit s;
    s.probs = Matrix::Constant(4, 2, 0.5);
    s.labels = IntVector::Zero(4);
    CHECK_NOTHROW(s.validate());
    s.labels(2) = 2;
    CHECK_THROWS_AS(s.validate(), Error);
    s.labels(2) = 1;
    s.embeddings = Matrix::Zero(3, 5);
    CHECK_THROWS_AS(s.validate(), Error);
    s.embeddings = Matrix::Zero(4, 5);
    s.mc = std::vector<McSampleTensor>(4, Matrix::Constant(3, 2, 0.5));
    CHECK_NOTHROW(s.validate());
    s.mc[1] = Matrix::Constant(2, 2, 0.5);
    CHECK_THROWS_AS(s.validate(), Error);

    LabeledSplit ml;
    ml.task = Task::multilabel;
    ml.probs = Matrix::Constant(2, 3, 0.9);
    ml.label_bits = IntMatrix::Ones(2, 3);
    CHECK_NOTHROW(ml.validate());
    ml.label_bits(0, 0) = 2;
    CHECK_THROWS_AS(ml.validate(), Error);
}

TEST_CASE("quantile is an order statistic") {
    const std::vector<double> v{5, 1, 4, 2, 3, 10, 9, 8, 7, 6};
    CHECK(quantile(v, 0.0) == 1);
    CHECK(quantile(v, 0.5) == 5);
    CHECK(quantile(v, 0.7) == 7);
    CHECK(quantile(v, 0.95) == 10);
    CHECK(quantile(v, 1.0) == 10);
    CHECK_THROWS_AS(quantile({}, 0.5), Error);
}

TEST_CASE("parallel_for visits each index once and propagates errors") {
    std::vector<int> seen(1000, 0);
    parallel_for(seen.size(), [&](std::size_t i) { seen[i] += 1; });
    for (int s : seen) CHECK(s == 1);
    CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                        if (i == 7) fail(ErrorCode::data, "boom");
                    }),
                    Error);
}

TEST_CASE("ABSTAIN_THREADS caps the worker count") {
    unsetenv("ABSTAIN_THREADS");
    const unsigned all = thread_count();
    CHECK(all >= 1);
    setenv("ABSTAIN_THREADS", "1", 1);
    CHECK(thread_count() == 1);
    setenv("ABSTAIN_THREADS", "3", 1);
    CHECK(thread_count() == std::min(all, 3u));
    setenv("ABSTAIN_THREADS", "0", 1);
    CHECK(thread_count() == all);
    unsetenv("ABSTAIN_THREADS");
}

}
