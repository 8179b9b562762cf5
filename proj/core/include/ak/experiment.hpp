#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ak/dataset.hpp"
#include "ak/kernel.hpp"
#include "ak/network.hpp"
#include "ak/svm.hpp"
#include "ak/train.hpp"

namespace ak {

enum class Metric {
    svm_error,
    nn_error,
    swap_invariance,
    translation_invariance,
    rotation_invariance,
    zoom_invariance,
    ck_alignment,
    ck_svm_error,
    effective_rank,
};

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view name);

// Where the SVM rescaling scalar is fitted.
enum class RescaleFit {
    train,  // fitted on training rows, applied to train and test
    joint,  // fitted on train and test rows together
};

struct DatasetSpec {
    // "mnist" (IDX files), "cifar10" (binary batches) or "synth".
    std::string name = "mnist";
    std::filesystem::path path = "data/mnist";
    int class_a = 3;
    int class_b = 8;
    // First n examples of the binary task.
    std::size_t train_size = 2000;
    std::size_t test_size = 2000;
    // synth only
    int synth_side = 8;
    double synth_separation = 2.0;
    std::uint64_t synth_seed = 0;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    ArchitectureId arch;
    TrainConfig train{.epochs = 10, .checkpoint_epochs = {0, 1, 3, 10}};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::vector<Metric> metrics{Metric::svm_error};
    SvmOptions svm;
    RescaleFit rescale = RescaleFit::train;
    std::size_t gram_block = kDefaultGramBlock;
    std::filesystem::path output_dir = "out";

    void validate() const;
};

// Flat "key = value" text with dotted section names; '#' starts a comment.
// Unknown keys are configuration errors. See docs/config.md.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Applies one key/value as if it appeared in a config file.
void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value);

struct MetricRecord {
    // Empty for seed-mean rows.
    std::optional<std::uint64_t> seed;
    std::string arch;
    std::string dataset;
    int epoch = 0;
    Metric metric = Metric::svm_error;
    double value = 0.0;
    // ';'-joined warnings, e.g. "svm_not_converged".
    std::string flags;
};

struct DataSplit {
    Dataset train;
    Dataset test;
};

// Loads the binary task and takes the first train_size / test_size examples.
DataSplit load_data(const DatasetSpec& spec);

// Every requested metric at one checkpoint, in Metric enum order. Gram-based metrics
// and invariances use the test split.
std::vector<MetricRecord> evaluate_checkpoint(const Checkpoint& cp, const ExperimentConfig& cfg,
                                              const DataSplit& data);

// Receives one human-readable line per finished training run or checkpoint.
using ProgressFn = std::function<void(const std::string&)>;

// Trains every seed, evaluates each metric at every checkpoint and returns per-seed
// records followed by per-epoch seed means, ordered by (seed, epoch, metric).
std::vector<MetricRecord> run_experiment(const ExperimentConfig& cfg, const DataSplit& data,
                                         const ProgressFn& progress = {});
std::vector<MetricRecord> run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {});

// Header plus one line per record; values with 17 significant digits, LF endings.
std::string to_csv(const std::vector<MetricRecord>& records);
void write_csv(const std::filesystem::path& path, const std::vector<MetricRecord>& records);

struct WidthChoice {
    double target = 0;
    ArchitectureId arch;
    std::size_t parameters = 0;
};

// Width (channel count for the VGG family) whose parameter count is closest to each
// target; ties go to the larger width.
std::vector<WidthChoice> choose_widths(const ArchitectureId& base, Shape input, const std::vector<double>& targets);

// Runs nn_error for each chosen width and returns the table
// "target,arch,parameters,epoch,nn_error_mean,nn_error_std".
std::string sweep_width(const ExperimentConfig& cfg, const std::vector<double>& targets,
                        const ProgressFn& progress = {});

// One whitespace-delimited "epoch mean std" file per (metric, arch, dataset) curve and
// a manifest listing them. Returns the written series paths.
std::vector<std::filesystem::path> emit_plotdata(const std::vector<MetricRecord>& records,
                                                 std::string_view figure_id, const std::filesystem::path& dir);

// Metrics each named figure needs; empty for unknown ids.
std::vector<Metric> figure_metrics(std::string_view figure_id);

}  // namespace ak
