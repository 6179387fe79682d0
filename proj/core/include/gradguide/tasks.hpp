#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gradguide/model.hpp"

namespace gradguide {

struct Task {
    int task_id = 0;
    Batch train;
    Batch test;
    std::string name;

    bool operator==(const Task& other) const = default;
};

enum class Regime { homogeneous, shifted };

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& s);

/// Synthetic continual sequence: Gaussian class clusters, one disjoint
/// class subset per task. The homogeneous regime keeps every task in the
/// same input distribution; the shifted regime translates each task's
/// cluster means by shift_magnitude along a task-specific direction.
struct SequenceSpec {
    Regime regime = Regime::homogeneous;
    int num_tasks = 5;
    int samples_per_task = 2000;
    int test_per_task = 500;
    int input_dim = 32;
    int classes_per_task = 2;
    double shift_magnitude = 0.0;
    std::uint64_t seed = 0;

    int total_classes() const { return num_tasks * classes_per_task; }
    bool operator==(const SequenceSpec& other) const = default;
};

/// Standard deviation of each class cluster.
inline constexpr double kClusterStd = 1.0;
/// Norm of every class mean; fixed by a joint-training pilot so that the
/// pooled-data model clears 0.9 test accuracy on the default sequence.
inline constexpr double kClassSeparation = 4.0;
/// Upper bound on num_tasks * classes_per_task.
inline constexpr int kGlobalClassBudget = 64;

void validate(const SequenceSpec& spec);

std::vector<Task> generate(const SequenceSpec& spec);

/// Cluster mean of a global class under a spec (before any task shift);
/// exposed for distribution checks.
std::vector<double> class_mean(const SequenceSpec& spec, int global_class);
/// Translation applied to a task's clusters; zero in the homogeneous regime.
std::vector<double> task_shift(const SequenceSpec& spec, int task_id);

inline constexpr std::uint32_t kTaskFormatVersion = 1;

/// Self-describing binary container: magic, version, spec echo, then
/// per-task arrays. Round-trips are bit-exact.
void save_tasks(const std::vector<Task>& tasks, const SequenceSpec& spec,
                const std::string& path);

struct TaskFile {
    SequenceSpec spec;
    std::vector<Task> tasks;
};

TaskFile load_tasks(const std::string& path);

}  // namespace gradguide
