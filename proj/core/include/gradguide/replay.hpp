#pragma once

#include <map>
#include <string>
#include <vector>

#include "gradguide/model.hpp"
#include "gradguide/rng.hpp"

namespace gradguide {

struct Sample {
    std::vector<double> input;
    int label = 0;

    bool operator==(const Sample& other) const = default;
};

/// Capacity-bounded per-task sample store. Samples go in bit-identical to
/// their source and come out pooled across all stored tasks.
class ReplayBuffer {
public:
    explicit ReplayBuffer(int capacity_per_task = 0);

    int capacity_per_task() const { return capacity_per_task_; }
    bool has_task(int task_id) const { return per_task_.count(task_id) > 0; }
    std::size_t total_samples() const;
    const std::map<int, std::vector<Sample>>& per_task() const { return per_task_; }

    /// Stores a uniform random subset of size min(capacity, |batch|) drawn
    /// without replacement. Each task may be stored once.
    void store(int task_id, const Batch& dataset, Rng& rng);

    /// n samples drawn uniformly with replacement from the union of all
    /// stored tasks. The returned batch carries task_id 0; callers tag it
    /// by mixing with a live batch.
    Batch sample_replay(int n, Rng& rng) const;

    /// Installs an already-selected sample list (deserialization path).
    /// Subject to the same capacity and one-store-per-task rules.
    void restore_task(int task_id, std::vector<Sample> samples);

    bool operator==(const ReplayBuffer& other) const = default;

private:
    std::map<int, std::vector<Sample>> per_task_;
    int capacity_per_task_ = 0;
};

/// Concatenation of two batches; the result keeps new_batch's task id.
/// An empty replay batch returns new_batch unchanged. Downstream mean
/// reduction makes the combined gradient the sample-weighted average of
/// the two parts.
Batch mix(const Batch& new_batch, const Batch& replay_batch);

void save_buffer(const ReplayBuffer& buffer, const std::string& path);
ReplayBuffer load_buffer(const std::string& path);

}  // namespace gradguide
