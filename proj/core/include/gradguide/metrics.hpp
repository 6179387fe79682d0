#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace gradguide {

/// Marks matrix entries for task/time pairs that were never evaluated.
/// Exported as "NA", never as a number.
inline constexpr double kNotEvaluated = std::numeric_limits<double>::quiet_NaN();

bool is_evaluated(double value);

/// Per-task accuracy over time. Row r holds the accuracy on every task
/// measured after training phase r; entries for tasks not yet seen stay
/// at the sentinel.
class AccuracyMatrix {
public:
    AccuracyMatrix() = default;
    explicit AccuracyMatrix(std::vector<int> test_sizes);

    void add_row(std::vector<double> row);

    int num_tasks() const { return static_cast<int>(test_sizes_.size()); }
    int num_rows() const { return static_cast<int>(rows_.size()); }
    const std::vector<int>& test_sizes() const { return test_sizes_; }
    const std::vector<std::vector<double>>& rows() const { return rows_; }
    const std::vector<double>& final_row() const;

    bool operator==(const AccuracyMatrix& other) const;

private:
    std::vector<int> test_sizes_;
    std::vector<std::vector<double>> rows_;
};

/// Final average accuracy: test-size-weighted mean of the last row.
double faa(const AccuracyMatrix& m);

/// Plain mean of the last row, kept alongside the weighted value as a
/// cross-check column.
double faa_unweighted(const AccuracyMatrix& m);

/// Mean drop from each task's best accuracy to its final accuracy,
/// over all tasks but the last. Needs at least two rows and two tasks.
double forgetting(const AccuracyMatrix& m);

/// 6 significant digits, '.' decimal separator.
std::string format_real(double value);

void save_matrix_csv(const AccuracyMatrix& m, const std::string& path);
AccuracyMatrix load_matrix_csv(const std::string& path);

struct RunSummary {
    std::string ablation = "none";
    std::string variant;
    std::uint64_t seed = 0;
    std::vector<double> final_acc;
    double faa = 0.0;
    double faa_unweighted = 0.0;
    std::optional<double> forgetting;  // absent when a single phase saw all tasks

    bool operator==(const RunSummary& other) const = default;
};

/// Stable sort by (ablation, variant, seed), then one CSV row each.
/// The ablation column is emitted only when requested (the variant grid
/// uses it; plain runs do not).
void save_summary_csv(std::vector<RunSummary> rows, const std::string& path,
                      bool with_ablation = false);
std::vector<RunSummary> load_summary_csv(const std::string& path);

}  // namespace gradguide
