#include "gradguide/tasks.hpp"

#include <cmath>
#include <stdexcept>

#include "gradguide/rng.hpp"
#include "gradguide/serialize.hpp"

namespace gradguide {

namespace {

constexpr char kTaskMagic[4] = {'G', 'G', 'T', 'K'};

// Substream ids off the sequence seed. Keeping shift direction draws on
// their own stream makes a zero-magnitude shifted sequence bit-identical
// to the homogeneous one.
enum Stream : std::uint64_t {
    kMeansStream = 0,
    kShiftStream = 1,
    kTrainStream = 2,
    kTestStream = 3,
};

std::vector<double> unit_vector(Rng& rng, int dim) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double norm_sq = 0.0;
    for (double& x : v) {
        x = rng.gaussian(0.0, 1.0);
        norm_sq += x * x;
    }
    const double norm = std::sqrt(norm_sq);
    for (double& x : v) {
        x /= norm;
    }
    return v;
}

}  // namespace

void validate(const SequenceSpec& spec) {
    if (spec.num_tasks < 2) {
        throw std::invalid_argument("SequenceSpec: num_tasks must be at least 2");
    }
    if (spec.samples_per_task <= 0 || spec.test_per_task <= 0 || spec.input_dim <= 0 ||
        spec.classes_per_task <= 0) {
        throw std::invalid_argument("SequenceSpec: all counts must be positive");
    }
    if (spec.shift_magnitude < 0.0) {
        throw std::invalid_argument("SequenceSpec: shift_magnitude must be nonnegative");
    }
    if (spec.total_classes() > kGlobalClassBudget) {
        throw std::invalid_argument("SequenceSpec: num_tasks * classes_per_task = " +
                                    std::to_string(spec.total_classes()) +
                                    " exceeds the global class budget of " +
                                    std::to_string(kGlobalClassBudget));
    }
}

namespace {

Batch make_batch(const SequenceSpec& spec, int task_id, int count, Rng rng,
                 const std::vector<std::vector<double>>& means,
                 const std::vector<double>& shift) {
    Batch batch;
    batch.task_id = task_id;
    batch.inputs = Tensor({count, spec.input_dim});
    batch.labels.resize(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const int local = static_cast<int>(rng.next_below(
            static_cast<std::uint64_t>(spec.classes_per_task)));
        const int global = task_id * spec.classes_per_task + local;
        const auto& mean = means[static_cast<std::size_t>(global)];
        for (int c = 0; c < spec.input_dim; ++c) {
            batch.inputs.at(i, c) = mean[static_cast<std::size_t>(c)] +
                                    shift[static_cast<std::size_t>(c)] +
                                    rng.gaussian(0.0, kClusterStd);
        }
        batch.labels[static_cast<std::size_t>(i)] = global;
    }
    return batch;
}

void write_batch(BinaryWriter& writer, const Batch& batch) {
    writer.u32(static_cast<std::uint32_t>(batch.size()));
    writer.u32(static_cast<std::uint32_t>(batch.inputs.cols()));
    writer.f64_array(batch.inputs.data());
    writer.i32_array(batch.labels);
    writer.i32(batch.task_id);
}

Batch read_batch(BinaryReader& reader) {
    const std::uint32_t n = reader.u32();
    const std::uint32_t dim = reader.u32();
    if (n == 0 || dim == 0 || n > (1u << 24) || dim > (1u << 20)) {
        reader.fail("invalid batch dimensions");
    }
    Batch batch;
    batch.inputs = Tensor({static_cast<int>(n), static_cast<int>(dim)},
                          reader.f64_array(static_cast<std::size_t>(n) * dim));
    batch.labels = reader.i32_array(n);
    batch.task_id = reader.i32();
    return batch;
}

}  // namespace

std::string to_string(Regime regime) {
    return regime == Regime::homogeneous ? "homogeneous" : "shifted";
}

Regime regime_from_string(const std::string& s) {
    if (s == "homogeneous") return Regime::homogeneous;
    if (s == "shifted") return Regime::shifted;
    throw std::invalid_argument("unknown regime '" + s + "' (expected homogeneous or shifted)");
}

std::vector<double> class_mean(const SequenceSpec& spec, int global_class) {
    Rng means_rng = Rng(spec.seed).split(kMeansStream);
    std::vector<double> mean;
    for (int k = 0; k <= global_class; ++k) {
        mean = unit_vector(means_rng, spec.input_dim);
    }
    for (double& x : mean) {
        x *= kClassSeparation;
    }
    return mean;
}

std::vector<double> task_shift(const SequenceSpec& spec, int task_id) {
    if (spec.regime == Regime::homogeneous) {
        return std::vector<double>(static_cast<std::size_t>(spec.input_dim), 0.0);
    }
    Rng shift_rng = Rng(spec.seed).split(kShiftStream);
    std::vector<double> shift;
    for (int t = 0; t <= task_id; ++t) {
        shift = unit_vector(shift_rng, spec.input_dim);
    }
    for (double& x : shift) {
        x *= spec.shift_magnitude;
    }
    return shift;
}

std::vector<Task> generate(const SequenceSpec& spec) {
    validate(spec);
    const Rng root(spec.seed);

    std::vector<std::vector<double>> means;
    Rng means_rng = root.split(kMeansStream);
    for (int k = 0; k < spec.total_classes(); ++k) {
        auto mean = unit_vector(means_rng, spec.input_dim);
        for (double& x : mean) {
            x *= kClassSeparation;
        }
        means.push_back(std::move(mean));
    }

    Rng shift_rng = root.split(kShiftStream);
    std::vector<Task> tasks;
    tasks.reserve(static_cast<std::size_t>(spec.num_tasks));
    for (int t = 0; t < spec.num_tasks; ++t) {
        std::vector<double> shift(static_cast<std::size_t>(spec.input_dim), 0.0);
        if (spec.regime == Regime::shifted) {
            shift = unit_vector(shift_rng, spec.input_dim);
            for (double& x : shift) {
                x *= spec.shift_magnitude;
            }
        }
        Task task;
        task.task_id = t;
        task.name = "task" + std::to_string(t);
        task.train = make_batch(spec, t, spec.samples_per_task,
                                root.split(kTrainStream).split(static_cast<std::uint64_t>(t)),
                                means, shift);
        task.test = make_batch(spec, t, spec.test_per_task,
                               root.split(kTestStream).split(static_cast<std::uint64_t>(t)),
                               means, shift);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

void save_tasks(const std::vector<Task>& tasks, const SequenceSpec& spec,
                const std::string& path) {
    BinaryWriter writer(path);
    writer.magic(kTaskMagic);
    writer.u32(kTaskFormatVersion);
    writer.u32(spec.regime == Regime::homogeneous ? 0 : 1);
    writer.i32(spec.num_tasks);
    writer.i32(spec.samples_per_task);
    writer.i32(spec.test_per_task);
    writer.i32(spec.input_dim);
    writer.i32(spec.classes_per_task);
    writer.f64(spec.shift_magnitude);
    writer.u64(spec.seed);
    writer.u32(static_cast<std::uint32_t>(tasks.size()));
    for (const Task& task : tasks) {
        writer.i32(task.task_id);
        writer.str(task.name);
        write_batch(writer, task.train);
        write_batch(writer, task.test);
    }
}

TaskFile load_tasks(const std::string& path) {
    BinaryReader reader(path);
    reader.expect_magic(kTaskMagic, "task sequence");
    check_format_version(reader, reader.u32(), kTaskFormatVersion, "task sequence");
    TaskFile file;
    const std::uint32_t regime = reader.u32();
    if (regime > 1) {
        reader.fail("invalid regime tag " + std::to_string(regime));
    }
    file.spec.regime = regime == 0 ? Regime::homogeneous : Regime::shifted;
    file.spec.num_tasks = reader.i32();
    file.spec.samples_per_task = reader.i32();
    file.spec.test_per_task = reader.i32();
    file.spec.input_dim = reader.i32();
    file.spec.classes_per_task = reader.i32();
    file.spec.shift_magnitude = reader.f64();
    file.spec.seed = reader.u64();
    const std::uint32_t count = reader.u32();
    if (count > (1u << 16)) {
        reader.fail("task count " + std::to_string(count) + " exceeds limit");
    }
    for (std::uint32_t i = 0; i < count; ++i) {
        Task task;
        task.task_id = reader.i32();
        task.name = reader.str();
        task.train = read_batch(reader);
        task.test = read_batch(reader);
        file.tasks.push_back(std::move(task));
    }
    reader.expect_eof("task sequence");
    return file;
}

}  // namespace gradguide
