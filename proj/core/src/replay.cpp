#include "gradguide/replay.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "gradguide/serialize.hpp"

namespace gradguide {

namespace {

constexpr char kBufferMagic[4] = {'G', 'G', 'R', 'B'};
constexpr std::uint32_t kBufferFormatVersion = 1;

}  // namespace

ReplayBuffer::ReplayBuffer(int capacity_per_task) : capacity_per_task_(capacity_per_task) {
    if (capacity_per_task < 0) {
        throw std::invalid_argument("ReplayBuffer: capacity must be nonnegative");
    }
}

std::size_t ReplayBuffer::total_samples() const {
    std::size_t n = 0;
    for (const auto& [task, samples] : per_task_) {
        n += samples.size();
    }
    return n;
}

void ReplayBuffer::store(int task_id, const Batch& dataset, Rng& rng) {
    if (has_task(task_id)) {
        throw std::invalid_argument("ReplayBuffer: task " + std::to_string(task_id) +
                                    " already stored");
    }
    const int n = dataset.size();
    const int keep = std::min(capacity_per_task_, n);

    // Shuffle indices and take the first `keep`: a uniform subset without
    // replacement, order-shuffled.
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    std::vector<Sample> kept;
    kept.reserve(static_cast<std::size_t>(keep));
    const int dim = dataset.inputs.cols();
    for (int i = 0; i < keep; ++i) {
        const int row = order[static_cast<std::size_t>(i)];
        Sample s;
        s.input.resize(static_cast<std::size_t>(dim));
        for (int c = 0; c < dim; ++c) {
            s.input[static_cast<std::size_t>(c)] = dataset.inputs.at(row, c);
        }
        s.label = dataset.labels[static_cast<std::size_t>(row)];
        kept.push_back(std::move(s));
    }
    per_task_.emplace(task_id, std::move(kept));
}

void ReplayBuffer::restore_task(int task_id, std::vector<Sample> samples) {
    if (has_task(task_id)) {
        throw std::invalid_argument("ReplayBuffer: task " + std::to_string(task_id) +
                                    " already stored");
    }
    if (static_cast<int>(samples.size()) > capacity_per_task_) {
        throw std::invalid_argument("ReplayBuffer: sample list exceeds per-task capacity");
    }
    per_task_.emplace(task_id, std::move(samples));
}

Batch ReplayBuffer::sample_replay(int n, Rng& rng) const {
    if (n < 1) {
        throw std::invalid_argument("ReplayBuffer::sample_replay: n must be at least 1");
    }
    const std::size_t total = total_samples();
    if (total == 0) {
        throw std::invalid_argument("ReplayBuffer::sample_replay: buffer is empty");
    }

    // Flatten in task order for a deterministic indexing of the union.
    std::vector<const Sample*> pool;
    pool.reserve(total);
    for (const auto& [task, samples] : per_task_) {
        for (const Sample& s : samples) {
            pool.push_back(&s);
        }
    }

    const int dim = static_cast<int>(pool.front()->input.size());
    Batch batch;
    batch.inputs = Tensor({n, dim});
    batch.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const Sample& s = *pool[static_cast<std::size_t>(rng.next_below(total))];
        for (int c = 0; c < dim; ++c) {
            batch.inputs.at(i, c) = s.input[static_cast<std::size_t>(c)];
        }
        batch.labels[static_cast<std::size_t>(i)] = s.label;
    }
    return batch;
}

Batch mix(const Batch& new_batch, const Batch& replay_batch) {
    if (replay_batch.empty()) {
        return new_batch;
    }
    if (new_batch.empty()) {
        return replay_batch;
    }
    if (new_batch.inputs.cols() != replay_batch.inputs.cols()) {
        throw std::invalid_argument("mix: feature dimension mismatch " +
                                    shape_string(new_batch.inputs) + " vs " +
                                    shape_string(replay_batch.inputs));
    }
    const int n = new_batch.size();
    const int m = replay_batch.size();
    const int dim = new_batch.inputs.cols();
    Batch out;
    out.task_id = new_batch.task_id;
    out.inputs = Tensor({n + m, dim});
    out.labels.reserve(static_cast<std::size_t>(n + m));
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < dim; ++c) {
            out.inputs.at(i, c) = new_batch.inputs.at(i, c);
        }
    }
    for (int i = 0; i < m; ++i) {
        for (int c = 0; c < dim; ++c) {
            out.inputs.at(n + i, c) = replay_batch.inputs.at(i, c);
        }
    }
    out.labels.insert(out.labels.end(), new_batch.labels.begin(), new_batch.labels.end());
    out.labels.insert(out.labels.end(), replay_batch.labels.begin(), replay_batch.labels.end());
    return out;
}

void save_buffer(const ReplayBuffer& buffer, const std::string& path) {
    BinaryWriter writer(path);
    writer.magic(kBufferMagic);
    writer.u32(kBufferFormatVersion);
    writer.i32(buffer.capacity_per_task());
    writer.u32(static_cast<std::uint32_t>(buffer.per_task().size()));
    for (const auto& [task, samples] : buffer.per_task()) {
        writer.i32(task);
        writer.u32(static_cast<std::uint32_t>(samples.size()));
        for (const Sample& s : samples) {
            writer.u32(static_cast<std::uint32_t>(s.input.size()));
            writer.f64_array(s.input);
            writer.i32(s.label);
        }
    }
}

ReplayBuffer load_buffer(const std::string& path) {
    BinaryReader reader(path);
    reader.expect_magic(kBufferMagic, "replay buffer");
    check_format_version(reader, reader.u32(), kBufferFormatVersion, "replay buffer");
    ReplayBuffer buffer(reader.i32());
    const std::uint32_t tasks = reader.u32();
    for (std::uint32_t t = 0; t < tasks; ++t) {
        const int task_id = reader.i32();
        const std::uint32_t count = reader.u32();
        std::vector<Sample> samples;
        samples.reserve(count);
        for (std::uint32_t i = 0; i < count; ++i) {
            const std::uint32_t dim = reader.u32();
            Sample s;
            s.input = reader.f64_array(dim);
            s.label = reader.i32();
            samples.push_back(std::move(s));
        }
        buffer.restore_task(task_id, std::move(samples));
    }
    reader.expect_eof("replay buffer");
    return buffer;
}

}  // namespace gradguide
