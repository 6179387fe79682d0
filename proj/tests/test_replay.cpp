#include <doctest.h>

#include <algorithm>
#include <set>
#include <stdexcept>
#include <vector>

#include "gradguide/model.hpp"
#include "gradguide/replay.hpp"
#include "gradguide/rng.hpp"
#include "gradguide/serialize.hpp"
#include "test_helpers.hpp"

using namespace gradguide;
using testing::TempDir;

namespace {

// Inputs encode (task, index) so every sample is traceable after pooling.
Batch tagged_batch(int task_id, int n, int dim = 3) {
    Batch b;
    b.inputs = Tensor({n, dim});
    for (int i = 0; i < n; ++i) {
        b.inputs.at(i, 0) = task_id;
        b.inputs.at(i, 1) = i;
    }
    for (int i = 0; i < n; ++i) b.labels.push_back(i % 2);
    b.task_id = task_id;
    return b;
}

std::multiset<std::pair<double, double>> sample_keys(const std::vector<Sample>& samples) {
    std::multiset<std::pair<double, double>> keys;
    for (const Sample& s : samples) keys.insert({s.input[0], s.input[1]});
    return keys;
}

}  // namespace

TEST_CASE("store keeps a uniform subset within capacity") {
    Rng rng(1);
    ReplayBuffer buf(10);
    buf.store(0, tagged_batch(0, 1000), rng);

    REQUIRE(buf.has_task(0));
    const auto& stored = buf.per_task().at(0);
    CHECK(stored.size() == 10);

    // Without replacement: all picks distinct, all from the source.
    auto keys = sample_keys(stored);
    CHECK(keys.size() == 10);
    std::set<std::pair<double, double>> unique(keys.begin(), keys.end());
    CHECK(unique.size() == 10);
    for (const auto& [task, index] : unique) {
        CHECK(task == 0);
        CHECK(index >= 0);
        CHECK(index < 1000);
    }

    // A different seed picks a different subset.
    Rng rng2(2);
    ReplayBuffer buf2(10);
    buf2.store(0, tagged_batch(0, 1000), rng2);
    CHECK(sample_keys(buf2.per_task().at(0)) != keys);
}

TEST_CASE("store edge cases") {
    Rng rng(3);
    ReplayBuffer empty_cap(0);
    empty_cap.store(0, tagged_batch(0, 50), rng);
    CHECK(empty_cap.has_task(0));
    CHECK(empty_cap.per_task().at(0).empty());
    CHECK(empty_cap.total_samples() == 0);

    ReplayBuffer big_cap(100);
    Batch src = tagged_batch(1, 7);
    big_cap.store(1, src, rng);
    CHECK(big_cap.per_task().at(1).size() == 7);  // whole dataset, order-shuffled
    auto keys = sample_keys(big_cap.per_task().at(1));
    for (int i = 0; i < 7; ++i) CHECK(keys.count({1.0, i}) == 1);

    CHECK_THROWS_AS(big_cap.store(1, src, rng), std::invalid_argument);  // one store per task
    CHECK_THROWS_AS(ReplayBuffer(-1), std::invalid_argument);
}

TEST_CASE("stored samples are bit-identical to their source rows") {
    Rng data_rng(4);
    Batch src;
    src.inputs = gaussian(data_rng, {40, 5}, 0.0, 1.0);
    for (int i = 0; i < 40; ++i) src.labels.push_back(static_cast<int>(data_rng.next_below(6)));
    src.task_id = 2;

    Rng rng(5);
    ReplayBuffer buf(40);
    buf.store(2, src, rng);
    for (const Sample& s : buf.per_task().at(2)) {
        bool found = false;
        for (int i = 0; i < 40 && !found; ++i) {
            bool same = s.label == src.labels[static_cast<std::size_t>(i)];
            for (int d = 0; d < 5 && same; ++d) {
                same = s.input[static_cast<std::size_t>(d)] == src.inputs.at(i, d);
            }
            found = same;
        }
        CHECK(found);
    }
}

TEST_CASE("sample_replay draws uniformly with replacement from the union") {
    Rng rng(6);
    ReplayBuffer buf(100);
    buf.store(0, tagged_batch(0, 100), rng);
    buf.store(1, tagged_batch(1, 100), rng);
    CHECK(buf.total_samples() == 200);

    Batch draw = buf.sample_replay(100000, rng);
    CHECK(draw.size() == 100000);
    int from_first = 0;
    for (int i = 0; i < draw.size(); ++i) {
        if (draw.inputs.at(i, 0) == 0.0) ++from_first;
    }
    CHECK(from_first / 100000.0 >= 0.49);
    CHECK(from_first / 100000.0 <= 0.51);
}

TEST_CASE("sample_replay per-sample frequencies pass a chi-square sanity check") {
    Rng rng(7);
    ReplayBuffer buf(100);
    buf.store(0, tagged_batch(0, 100), rng);
    buf.store(1, tagged_batch(1, 100), rng);

    const int n = 20000;
    Batch draw = buf.sample_replay(n, rng);
    std::map<std::pair<double, double>, int> counts;
    for (int i = 0; i < n; ++i) {
        ++counts[{draw.inputs.at(i, 0), draw.inputs.at(i, 1)}];
    }
    CHECK(counts.size() == 200);  // every stored sample shows up at n >> cells
    const double expected = n / 200.0;
    double chi2 = 0.0;
    for (const auto& [key, observed] : counts) {
        chi2 += (observed - expected) * (observed - expected) / expected;
    }
    CHECK(chi2 < 280.0);  // dof 199; this bound sits past the 1e-4 tail
}

TEST_CASE("sample_replay forced and error cases") {
    Rng rng(8);
    ReplayBuffer buf(1);
    buf.store(0, tagged_batch(0, 30), rng);
    REQUIRE(buf.per_task().at(0).size() == 1);
    const Sample& only = buf.per_task().at(0)[0];

    Batch four = buf.sample_replay(4, rng);
    CHECK(four.size() == 4);
    for (int i = 0; i < 4; ++i) {
        CHECK(four.inputs.at(i, 0) == only.input[0]);
        CHECK(four.inputs.at(i, 1) == only.input[1]);
        CHECK(four.labels[static_cast<std::size_t>(i)] == only.label);
    }

    CHECK_THROWS_AS(buf.sample_replay(0, rng), std::invalid_argument);
    ReplayBuffer empty(5);
    CHECK_THROWS_AS(empty.sample_replay(1, rng), std::invalid_argument);

    Rng r1(9), r2(9);
    CHECK(buf.sample_replay(16, r1) == buf.sample_replay(16, r2));
}

TEST_CASE("restore_task enforces the same rules as store") {
    ReplayBuffer buf(2);
    buf.restore_task(0, {Sample{{1, 2, 3}, 1}});
    CHECK(buf.per_task().at(0).size() == 1);
    CHECK_THROWS_AS(buf.restore_task(0, {}), std::invalid_argument);
    CHECK_THROWS_AS(buf.restore_task(1, {Sample{{1}, 0}, Sample{{2}, 0}, Sample{{3}, 0}}),
                    std::invalid_argument);  // beyond capacity
}

TEST_CASE("mix concatenates and keeps the live task id") {
    Batch a = tagged_batch(3, 16);
    Batch none;
    CHECK(mix(a, none) == a);

    Batch b = tagged_batch(0, 16);
    Batch m = mix(a, b);
    CHECK(m.size() == 32);
    CHECK(m.task_id == 3);
    CHECK(m.inputs.at(0, 0) == 3.0);
    CHECK(m.inputs.at(16, 0) == 0.0);
    CHECK(m.labels[0] == a.labels[0]);
    CHECK(m.labels[16] == b.labels[0]);

    Batch wrong;
    wrong.inputs = Tensor({2, 5});
    wrong.labels = {0, 0};
    CHECK_THROWS_AS(mix(a, wrong), std::invalid_argument);
}

TEST_CASE("mixed-batch gradients average the two halves") {
    Model model({.input_dim = 3, .hidden_dims = {4}, .num_classes = 2, .seed = 10});
    ParameterSet params = model.init();

    Batch a = tagged_batch(0, 16);
    Batch b = tagged_batch(1, 16);
    auto ga = model.loss_and_grad(params, a);
    auto gb = model.loss_and_grad(params, b);
    auto gm = model.loss_and_grad(params, mix(a, b));

    for (const auto& [name, g] : gm.grads.entries) {
        const Tensor& t1 = ga.grads.at(name);
        const Tensor& t2 = gb.grads.at(name);
        for (std::int64_t i = 0; i < g.size(); ++i) {
            CHECK(g[i] == doctest::Approx(0.5 * t1[i] + 0.5 * t2[i]).epsilon(1e-10));
        }
    }
}

TEST_CASE("buffer files round-trip exactly") {
    Rng rng(11);
    ReplayBuffer buf(10);
    Rng data_rng(12);
    Batch b0;
    b0.inputs = gaussian(data_rng, {25, 4}, 0.0, 1.0);
    for (int i = 0; i < 25; ++i) b0.labels.push_back(static_cast<int>(data_rng.next_below(3)));
    buf.store(0, b0, rng);
    buf.store(4, tagged_batch(4, 30, 4), rng);

    TempDir dir("replay_io");
    const std::string path = dir.file("buffer.bin");
    save_buffer(buf, path);
    CHECK(load_buffer(path) == buf);
}

TEST_CASE("buffer loading rejects damaged and future files") {
    Rng rng(13);
    ReplayBuffer buf(3);
    buf.store(0, tagged_batch(0, 9), rng);

    TempDir dir("replay_bad");
    const std::string path = dir.file("buffer.bin");
    save_buffer(buf, path);

    std::string bytes = testing::read_file(path);
    testing::write_file(dir.file("cut.bin"), bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_WITH_AS(load_buffer(dir.file("cut.bin")),
                         doctest::Contains("malformed file"), std::runtime_error);

    // Version field follows the 4-byte magic; bump it to a future value.
    std::string future = bytes;
    future[4] = 9;
    testing::write_file(dir.file("future.bin"), future);
    try {
        load_buffer(dir.file("future.bin"));
        FAIL("expected a version error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("9") != std::string::npos);
        CHECK(msg.find("1") != std::string::npos);
    }

    CHECK_THROWS_AS(load_buffer(dir.file("missing.bin")), std::runtime_error);
}
