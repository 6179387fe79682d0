#include "experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <utility>

namespace gradguide {

namespace {

// Streams 0..3 belong to the trainer; the model draw gets its own.
constexpr std::uint64_t kModelStream = 4;

std::uint64_t model_seed_for(std::uint64_t run_seed) {
    return Rng(run_seed).split(kModelStream).seed();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    out << text;
    if (!out) {
        throw std::runtime_error("failed to write '" + path + "'");
    }
}

RunSummary summarize(const std::string& ablation, Variant variant, std::uint64_t seed,
                     const AccuracyMatrix& matrix) {
    RunSummary row;
    row.ablation = ablation;
    row.variant = to_string(variant);
    row.seed = seed;
    row.final_acc = matrix.final_row();
    row.faa = faa(matrix);
    row.faa_unweighted = faa_unweighted(matrix);
    if (matrix.num_rows() >= 2 && matrix.num_tasks() >= 2) {
        row.forgetting = forgetting(matrix);
    }
    return row;
}

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides) {
    KvMap kv = parse_kv_file(path);
    apply_overrides(kv, overrides);
    return experiment_from_kv(kv);
}

struct Band {
    double sum = 0.0;
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
    int n = 0;

    void add(double v) {
        sum += v;
        min = std::min(min, v);
        max = std::max(max, v);
        ++n;
    }
    double mean() const { return sum / n; }
};

std::string svg_header(int width, int height, const std::string& title) {
    std::stringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n"
      << "<text x=\"" << width / 2 << "\" y=\"24\" font-family=\"sans-serif\" "
         "font-size=\"15\" text-anchor=\"middle\">"
      << title << "</text>\n";
    return s.str();
}

std::string svg_axes(int left, int top, int right, int bottom) {
    std::stringstream s;
    s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << bottom << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\""
      << bottom << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double frac = tick / 4.0;
        const double y = bottom - frac * (bottom - top);
        s << "<line x1=\"" << left - 4 << "\" y1=\"" << y << "\" x2=\"" << left << "\" y2=\""
          << y << "\" stroke=\"black\"/>\n"
          << "<text x=\"" << left - 8 << "\" y=\"" << y + 4
          << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">"
          << format_real(frac) << "</text>\n";
    }
    return s.str();
}

/// Accuracy-style bar chart on a fixed [0,1] axis with min-max whiskers.
std::string svg_bars(const std::string& title, const std::vector<std::string>& labels,
                     const std::vector<Band>& bands) {
    const int n = static_cast<int>(labels.size());
    const int left = 60, top = 50, bottom = 320;
    const int bar_span = 92;
    const int width = left + 30 + bar_span * std::max(n, 1);
    const int height = 380;
    std::stringstream s;
    s << svg_header(width, height, title) << svg_axes(left, top, width - 10, bottom);
    for (int i = 0; i < n; ++i) {
        const Band& band = bands[static_cast<std::size_t>(i)];
        const int x = left + 20 + i * bar_span;
        const double scale = bottom - top;
        const double y_mean = bottom - band.mean() * scale;
        const double y_min = bottom - band.min * scale;
        const double y_max = bottom - band.max * scale;
        const int cx = x + 26;
        s << "<rect x=\"" << x << "\" y=\"" << y_mean << "\" width=\"52\" height=\""
          << bottom - y_mean << "\" fill=\"#4878a8\"/>\n"
          << "<line x1=\"" << cx << "\" y1=\"" << y_min << "\" x2=\"" << cx << "\" y2=\""
          << y_max << "\" stroke=\"black\"/>\n"
          << "<text x=\"" << cx << "\" y=\"" << y_max - 6
          << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
          << format_real(band.mean()) << "</text>\n"
          << "<text x=\"" << cx << "\" y=\"" << bottom + 16
          << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
          << labels[static_cast<std::size_t>(i)] << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

std::string svg_line(const std::string& title, const std::map<double, Band>& points) {
    const int left = 60, top = 50, bottom = 320, right = 580;
    const int width = 640, height = 380;
    const double x_lo = points.begin()->first;
    const double x_hi = points.rbegin()->first;
    const double x_span = x_hi > x_lo ? x_hi - x_lo : 1.0;
    const auto px = [&](double alpha) {
        return left + (alpha - x_lo) / x_span * (right - left);
    };
    const auto py = [&](double value) { return bottom - value * (bottom - top); };
    std::stringstream s;
    s << svg_header(width, height, title) << svg_axes(left, top, right, bottom);
    std::stringstream mean_path, min_path, max_path;
    bool first = true;
    for (const auto& [alpha, band] : points) {
        const char* sep = first ? "" : " ";
        mean_path << sep << px(alpha) << "," << py(band.mean());
        min_path << sep << px(alpha) << "," << py(band.min);
        max_path << sep << px(alpha) << "," << py(band.max);
        first = false;
    }
    s << "<polyline points=\"" << min_path.str()
      << "\" fill=\"none\" stroke=\"#a0a0a0\" stroke-dasharray=\"4 3\"/>\n"
      << "<polyline points=\"" << max_path.str()
      << "\" fill=\"none\" stroke=\"#a0a0a0\" stroke-dasharray=\"4 3\"/>\n"
      << "<polyline points=\"" << mean_path.str()
      << "\" fill=\"none\" stroke=\"#c05040\" stroke-width=\"2\"/>\n";
    for (const auto& [alpha, band] : points) {
        s << "<circle cx=\"" << px(alpha) << "\" cy=\"" << py(band.mean())
          << "\" r=\"3\" fill=\"#c05040\"/>\n"
          << "<text x=\"" << px(alpha) << "\" y=\"" << bottom + 16
          << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
          << format_real(alpha) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace

std::string default_output_root() {
    if (const char* env = std::getenv("GRADGUIDE_OUT"); env != nullptr && *env != '\0') {
        return env;
    }
    return "./out";
}

std::string resolve_output_root(const ExperimentConfig& cfg) {
    return cfg.output_dir.empty() ? default_output_root() : cfg.output_dir;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path, overrides);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    try {
        const std::string root = resolve_output_root(cfg);
        std::filesystem::create_directories(root);
        const std::vector<Task> tasks = generate(cfg.sequence);
        std::vector<RunSummary> rows;
        for (const std::uint64_t seed : cfg.seeds) {
            TrainConfig train = cfg.train;
            train.seed = seed;
            ModelConfig model = cfg.model;
            model.seed = model_seed_for(seed);
            const std::string seed_dir = root + "/seed" + std::to_string(seed);
            std::filesystem::create_directories(seed_dir);
            write_text(seed_dir + "/run.json", experiment_json(cfg, seed, model.seed));
            RunResult result = run_sequence(tasks, model, train, seed_dir);
            rows.push_back(summarize("none", cfg.train.variant, seed, result.matrix));
        }
        save_summary_csv(rows, root + "/summary.csv", false);
        std::cout << "wrote " << root << "/summary.csv (" << rows.size() << " runs)\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_ablate(const std::string& config_path, const std::vector<std::string>& overrides) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path, overrides);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    try {
        const std::string root = resolve_output_root(cfg);
        std::filesystem::create_directories(root);
        const std::vector<Task> tasks = generate(cfg.sequence);
        std::vector<RunSummary> rows;

        const auto run_cell = [&](const std::string& ablation, const TrainConfig& base) {
            for (const std::uint64_t seed : cfg.seeds) {
                TrainConfig train = base;
                train.seed = seed;
                ModelConfig model = cfg.model;
                model.seed = model_seed_for(seed);
                RunResult result = run_sequence(tasks, model, train, "");
                rows.push_back(summarize(ablation, base.variant, seed, result.matrix));
            }
        };

        for (const Variant variant :
             {Variant::full, Variant::guidance_only, Variant::replay_only,
              Variant::sequential, Variant::multitask}) {
            TrainConfig train = cfg.train;
            train.variant = variant;
            run_cell("none", train);
        }
        {
            TrainConfig train = cfg.train;
            train.variant = Variant::full;
            train.guidance.scaling_enabled = false;
            run_cell("no_scaling", train);
        }
        {
            TrainConfig train = cfg.train;
            train.variant = Variant::full;
            train.guidance.gate_enabled = false;
            run_cell("no_gate", train);
        }
        for (const double alpha : cfg.alpha_sweep) {
            TrainConfig train = cfg.train;
            train.variant = Variant::guidance_only;
            train.guidance.alpha = alpha;
            train.per_task_alpha.clear();  // the sweep varies one shared alpha
            run_cell("alpha_" + format_real(alpha), train);
        }

        save_summary_csv(rows, root + "/ablation_summary.csv", true);
        std::cout << "wrote " << root << "/ablation_summary.csv (" << rows.size()
                  << " runs)\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_plot(const std::string& summary_csv, const std::string& out_dir) {
    std::vector<RunSummary> rows;
    try {
        rows = load_summary_csv(summary_csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    if (rows.empty()) {
        std::cerr << "error: no data rows in '" << summary_csv << "'\n";
        return 2;
    }
    try {
        std::filesystem::create_directories(out_dir);

        std::map<std::pair<std::string, std::string>, Band> by_variant;
        std::map<std::pair<std::string, std::string>, std::vector<Band>> by_task;
        std::map<double, Band> by_alpha;
        for (const RunSummary& row : rows) {
            const auto key = std::make_pair(row.ablation, row.variant);
            by_variant[key].add(row.faa);
            auto& bands = by_task[key];
            bands.resize(row.final_acc.size());
            for (std::size_t i = 0; i < row.final_acc.size(); ++i) {
                bands[i].add(row.final_acc[i]);
            }
            if (row.ablation.rfind("alpha_", 0) == 0) {
                by_alpha[std::stod(row.ablation.substr(6))].add(row.faa);
            }
        }

        std::stringstream variant_csv;
        variant_csv << "ablation,variant,num_seeds,mean_faa,min_faa,max_faa\n";
        for (const auto& [key, band] : by_variant) {
            variant_csv << key.first << "," << key.second << "," << band.n << ","
                        << format_real(band.mean()) << "," << format_real(band.min) << ","
                        << format_real(band.max) << "\n";
        }
        write_text(out_dir + "/faa_by_variant.csv", variant_csv.str());

        std::stringstream task_csv;
        task_csv << "ablation,variant,task,num_seeds,mean_acc,min_acc,max_acc\n";
        for (const auto& [key, bands] : by_task) {
            for (std::size_t i = 0; i < bands.size(); ++i) {
                task_csv << key.first << "," << key.second << "," << i << "," << bands[i].n
                         << "," << format_real(bands[i].mean()) << ","
                         << format_real(bands[i].min) << "," << format_real(bands[i].max)
                         << "\n";
            }
        }
        write_text(out_dir + "/per_task_final_acc.csv", task_csv.str());

        std::stringstream alpha_csv;
        alpha_csv << "alpha,num_seeds,mean_faa,min_faa,max_faa\n";
        for (const auto& [alpha, band] : by_alpha) {
            alpha_csv << format_real(alpha) << "," << band.n << ","
                      << format_real(band.mean()) << "," << format_real(band.min) << ","
                      << format_real(band.max) << "\n";
        }
        write_text(out_dir + "/faa_vs_alpha.csv", alpha_csv.str());

        std::vector<std::string> labels;
        std::vector<Band> bands;
        for (const auto& [key, band] : by_variant) {
            if (key.first == "none") {
                labels.push_back(key.second);
                bands.push_back(band);
            }
        }
        if (labels.empty()) {  // toggle- or sweep-only summaries
            for (const auto& [key, band] : by_variant) {
                labels.push_back(key.first + ":" + key.second);
                bands.push_back(band);
            }
        }
        write_text(out_dir + "/faa_by_variant.svg",
                   svg_bars("final average accuracy by variant", labels, bands));
        if (!by_alpha.empty()) {
            write_text(out_dir + "/faa_vs_alpha.svg",
                       svg_line("final average accuracy vs alpha", by_alpha));
        }
        std::cout << "wrote plot data to " << out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace gradguide
