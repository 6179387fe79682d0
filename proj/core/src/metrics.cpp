#include "gradguide/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace gradguide {

namespace {

[[noreturn]] void malformed(const std::string& path, const std::string& message) {
    throw std::runtime_error("malformed file '" + path + "': " + message);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream stream(line);
    while (std::getline(stream, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

double parse_real(const std::string& text, const std::string& path) {
    std::size_t consumed = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &consumed);
    } catch (const std::exception&) {
        malformed(path, "expected a number, got '" + text + "'");
    }
    if (consumed != text.size()) {
        malformed(path, "trailing characters in number '" + text + "'");
    }
    return value;
}

long long parse_int(const std::string& text, const std::string& path) {
    std::size_t consumed = 0;
    long long value = 0;
    try {
        value = std::stoll(text, &consumed);
    } catch (const std::exception&) {
        malformed(path, "expected an integer, got '" + text + "'");
    }
    if (consumed != text.size()) {
        malformed(path, "trailing characters in integer '" + text + "'");
    }
    return value;
}

std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    return out;
}

}  // namespace

bool is_evaluated(double value) { return !std::isnan(value); }

AccuracyMatrix::AccuracyMatrix(std::vector<int> test_sizes)
    : test_sizes_(std::move(test_sizes)) {
    if (test_sizes_.empty()) {
        throw std::invalid_argument("AccuracyMatrix: test_sizes must be nonempty");
    }
    for (int size : test_sizes_) {
        if (size <= 0) {
            throw std::invalid_argument("AccuracyMatrix: test_sizes must be positive");
        }
    }
}

void AccuracyMatrix::add_row(std::vector<double> row) {
    if (static_cast<int>(row.size()) != num_tasks()) {
        throw std::invalid_argument("AccuracyMatrix: row has " + std::to_string(row.size()) +
                                    " entries, expected " + std::to_string(num_tasks()));
    }
    for (double value : row) {
        if (is_evaluated(value) && (value < 0.0 || value > 1.0)) {
            throw std::invalid_argument("AccuracyMatrix: accuracy " + format_real(value) +
                                        " outside [0, 1]");
        }
    }
    rows_.push_back(std::move(row));
}

const std::vector<double>& AccuracyMatrix::final_row() const {
    if (rows_.empty()) {
        throw std::invalid_argument("AccuracyMatrix: no rows recorded");
    }
    return rows_.back();
}

bool AccuracyMatrix::operator==(const AccuracyMatrix& other) const {
    if (test_sizes_ != other.test_sizes_ || rows_.size() != other.rows_.size()) {
        return false;
    }
    for (std::size_t r = 0; r < rows_.size(); ++r) {
        for (std::size_t c = 0; c < rows_[r].size(); ++c) {
            const double a = rows_[r][c];
            const double b = other.rows_[r][c];
            if (is_evaluated(a) != is_evaluated(b)) return false;
            if (is_evaluated(a) && a != b) return false;
        }
    }
    return true;
}

double faa(const AccuracyMatrix& m) {
    const std::vector<double>& row = m.final_row();
    double weighted_sum = 0.0;
    double total_size = 0.0;
    for (int i = 0; i < m.num_tasks(); ++i) {
        if (!is_evaluated(row[static_cast<std::size_t>(i)])) {
            throw std::invalid_argument("faa: final row is undefined for task " +
                                        std::to_string(i));
        }
        weighted_sum += static_cast<double>(m.test_sizes()[static_cast<std::size_t>(i)]) *
                        row[static_cast<std::size_t>(i)];
        total_size += static_cast<double>(m.test_sizes()[static_cast<std::size_t>(i)]);
    }
    return weighted_sum / total_size;
}

double faa_unweighted(const AccuracyMatrix& m) {
    const std::vector<double>& row = m.final_row();
    double sum = 0.0;
    for (int i = 0; i < m.num_tasks(); ++i) {
        if (!is_evaluated(row[static_cast<std::size_t>(i)])) {
            throw std::invalid_argument("faa: final row is undefined for task " +
                                        std::to_string(i));
        }
        sum += row[static_cast<std::size_t>(i)];
    }
    return sum / static_cast<double>(m.num_tasks());
}

double forgetting(const AccuracyMatrix& m) {
    if (m.num_tasks() < 2) {
        throw std::invalid_argument("forgetting: needs at least 2 tasks");
    }
    if (m.num_rows() < 2) {
        throw std::invalid_argument("forgetting: needs at least 2 evaluation rows");
    }
    const std::vector<double>& last = m.final_row();
    double sum = 0.0;
    for (int i = 0; i + 1 < m.num_tasks(); ++i) {
        const std::size_t col = static_cast<std::size_t>(i);
        if (!is_evaluated(last[col])) {
            throw std::invalid_argument("forgetting: final row is undefined for task " +
                                        std::to_string(i));
        }
        double best = last[col];
        for (const auto& row : m.rows()) {
            if (is_evaluated(row[col])) {
                best = std::max(best, row[col]);
            }
        }
        sum += best - last[col];
    }
    return sum / static_cast<double>(m.num_tasks() - 1);
}

std::string format_real(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.6g", value);
    return buffer;
}

void save_matrix_csv(const AccuracyMatrix& m, const std::string& path) {
    std::ofstream out = open_for_write(path);
    out << "row";
    for (int i = 0; i < m.num_tasks(); ++i) {
        out << ",task" << i;
    }
    out << "\n";
    out << "test_size";
    for (int size : m.test_sizes()) {
        out << "," << size;
    }
    out << "\n";
    for (int r = 0; r < m.num_rows(); ++r) {
        out << "phase" << r;
        for (double value : m.rows()[static_cast<std::size_t>(r)]) {
            out << ",";
            if (is_evaluated(value)) {
                out << format_real(value);
            } else {
                out << "NA";
            }
        }
        out << "\n";
    }
    if (!out) {
        throw std::runtime_error("failed to write '" + path + "'");
    }
}

AccuracyMatrix load_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        malformed(path, "missing header");
    }
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "row") {
        malformed(path, "unexpected header '" + line + "'");
    }
    const std::size_t num_tasks = header.size() - 1;
    if (!std::getline(in, line)) {
        malformed(path, "missing test_size row");
    }
    auto size_fields = split_csv_line(line);
    if (size_fields.size() != num_tasks + 1 || size_fields[0] != "test_size") {
        malformed(path, "unexpected test_size row '" + line + "'");
    }
    std::vector<int> sizes;
    for (std::size_t i = 1; i < size_fields.size(); ++i) {
        sizes.push_back(static_cast<int>(parse_int(size_fields[i], path)));
    }
    AccuracyMatrix m(std::move(sizes));
    int expected_phase = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != num_tasks + 1 ||
            fields[0] != "phase" + std::to_string(expected_phase)) {
            malformed(path, "unexpected row '" + line + "'");
        }
        std::vector<double> row;
        for (std::size_t i = 1; i < fields.size(); ++i) {
            row.push_back(fields[i] == "NA" ? kNotEvaluated : parse_real(fields[i], path));
        }
        m.add_row(std::move(row));
        ++expected_phase;
    }
    return m;
}

void save_summary_csv(std::vector<RunSummary> rows, const std::string& path,
                      bool with_ablation) {
    std::stable_sort(rows.begin(), rows.end(), [](const RunSummary& a, const RunSummary& b) {
        return std::tie(a.ablation, a.variant, a.seed) <
               std::tie(b.ablation, b.variant, b.seed);
    });
    const std::size_t num_tasks = rows.empty() ? 0 : rows.front().final_acc.size();
    for (const RunSummary& row : rows) {
        if (row.final_acc.size() != num_tasks) {
            throw std::invalid_argument("summary rows disagree on task count");
        }
    }
    std::ofstream out = open_for_write(path);
    if (with_ablation) {
        out << "ablation,";
    }
    out << "variant,seed";
    for (std::size_t i = 0; i < num_tasks; ++i) {
        out << ",final_acc_task" << i;
    }
    out << ",faa,faa_unweighted,forgetting\n";
    for (const RunSummary& row : rows) {
        if (with_ablation) {
            out << row.ablation << ",";
        }
        out << row.variant << "," << row.seed;
        for (double acc : row.final_acc) {
            out << "," << format_real(acc);
        }
        out << "," << format_real(row.faa) << "," << format_real(row.faa_unweighted) << ",";
        if (row.forgetting.has_value()) {
            out << format_real(*row.forgetting);
        } else {
            out << "NA";
        }
        out << "\n";
    }
    if (!out) {
        throw std::runtime_error("failed to write '" + path + "'");
    }
}

std::vector<RunSummary> load_summary_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        malformed(path, "missing header");
    }
    const auto header = split_csv_line(line);
    const bool with_ablation = !header.empty() && header[0] == "ablation";
    const std::size_t base = with_ablation ? 1 : 0;
    if (header.size() < base + 5 || header[base] != "variant" || header[base + 1] != "seed") {
        malformed(path, "unexpected header '" + line + "'");
    }
    std::size_t num_tasks = 0;
    while (base + 2 + num_tasks < header.size() &&
           header[base + 2 + num_tasks] == "final_acc_task" + std::to_string(num_tasks)) {
        ++num_tasks;
    }
    if (header.size() != base + 5 + num_tasks ||
        header[base + 2 + num_tasks] != "faa" ||
        header[base + 3 + num_tasks] != "faa_unweighted" ||
        header[base + 4 + num_tasks] != "forgetting") {
        malformed(path, "unexpected header '" + line + "'");
    }
    std::vector<RunSummary> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            malformed(path, "row has " + std::to_string(fields.size()) +
                                " fields, expected " + std::to_string(header.size()));
        }
        RunSummary row;
        std::size_t k = 0;
        if (with_ablation) {
            row.ablation = fields[k++];
        }
        row.variant = fields[k++];
        row.seed = static_cast<std::uint64_t>(parse_int(fields[k++], path));
        for (std::size_t i = 0; i < num_tasks; ++i) {
            row.final_acc.push_back(parse_real(fields[k++], path));
        }
        row.faa = parse_real(fields[k++], path);
        row.faa_unweighted = parse_real(fields[k++], path);
        if (fields[k] != "NA") {
            row.forgetting = parse_real(fields[k], path);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace gradguide
