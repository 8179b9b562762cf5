#include "ak/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "ak/error.hpp"
#include "ak/perturb.hpp"
#include "ak/rng.hpp"

namespace ak {

namespace {

constexpr Metric kAllMetrics[] = {
    Metric::svm_error,    Metric::nn_error,     Metric::swap_invariance,
    Metric::translation_invariance, Metric::rotation_invariance, Metric::zoom_invariance,
    Metric::ck_alignment, Metric::ck_svm_error, Metric::effective_rank,
};

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    while (true) {
        const auto comma = s.find(',');
        const auto item = trim(s.substr(0, comma));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigError("'" + std::string(key) + "': cannot parse '" + std::string(value) + "' as a number");
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "on" || value == "1") return true;
    if (value == "false" || value == "off" || value == "0") return false;
    throw ConfigError("'" + std::string(key) + "': expected true or false, got '" + std::string(value) + "'");
}

AugmentConfig& augmentation(ExperimentConfig& cfg) {
    if (!cfg.train.augmentation) cfg.train.augmentation.emplace();
    return *cfg.train.augmentation;
}

// Rethrows `f`'s library errors with `context` prefixed, keeping the error type.
template <class F>
auto with_context(const std::string& context, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(context + ": " + e.what());
    } catch (const InputError& e) {
        throw InputError(context + ": " + e.what());
    } catch (const PreconditionError& e) {
        throw PreconditionError(context + ": " + e.what());
    } catch (const DegenerateError& e) {
        throw DegenerateError(context + ": " + e.what());
    }
}

std::filesystem::path existing(const std::filesystem::path& dir, const std::string& stem) {
    for (const std::string suffix : {"", ".gz"}) {
        const auto p = dir / (stem + suffix);
        if (std::filesystem::exists(p)) return p;
    }
    throw InputError("missing data file " + (dir / stem).string() + "[.gz]");
}

std::vector<int> signed_labels(const Dataset& d) {
    std::vector<int> y(d.labels.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = d.labels[i] == 1 ? 1 : -1;
    return y;
}

void add_flag(std::string& flags, std::string_view flag) {
    if (!flags.empty()) flags += ';';
    flags += flag;
}

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Sum of row norms, in row order.
double norm_sum(const EmbeddingMatrix& e) { return mean_row_norm(e) * static_cast<double>(e.rows()); }

// SVM test error of `model` on rows of `test` multiplied by `scale`, one row at a time.
double scaled_test_error(const LinearModel& model, const EmbeddingMatrix& test, double scale,
                         std::span<const int> labels) {
    std::vector<double> row(test.cols());
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < test.rows(); ++i) {
        const auto src = test.row(i);
        for (std::size_t k = 0; k < row.size(); ++k) row[k] = src[k] * scale;
        wrong += model.predict(row) != labels[i] ? 1 : 0;
    }
    return static_cast<double>(wrong) / static_cast<double>(test.rows());
}

struct SvmOutcome {
    double error = 0.0;
    bool converged = true;
};

// Trains on rescaled `train` rows and evaluates on `test` with the same scalar.
SvmOutcome svm_metric(EmbeddingMatrix train, const EmbeddingMatrix& test, const DataSplit& data,
                      const ExperimentConfig& cfg) {
    double mean_norm = mean_row_norm(train);
    if (cfg.rescale == RescaleFit::joint) {
        mean_norm = (norm_sum(train) + norm_sum(test)) / static_cast<double>(train.rows() + test.rows());
    }
    if (mean_norm == 0.0) throw DegenerateError("all SVM feature rows are zero");
    const double scale = 1.0 / mean_norm;
    const auto y_train = signed_labels(data.train);
    const auto y_test = signed_labels(data.test);
    const LinearModel model = train_svm(apply_scale(std::move(train), scale), y_train, cfg.svm);
    return {scaled_test_error(model, test, scale, y_test), model.diagnostics.converged};
}

bool wants(const ExperimentConfig& cfg, Metric m) {
    return std::find(cfg.metrics.begin(), cfg.metrics.end(), m) != cfg.metrics.end();
}

std::vector<Transform> transforms_for(Metric m) {
    switch (m) {
        case Metric::swap_invariance: return swap_transforms();
        case Metric::translation_invariance: return translation_transforms();
        case Metric::rotation_invariance: return rotation_transforms();
        case Metric::zoom_invariance: return zoom_transforms();
        default: return {};
    }
}

std::string sanitize(std::string_view s) {
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') ? c : '_';
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw Error("write failed for " + path.string());
}

}  // namespace

std::string_view to_string(Metric m) {
    switch (m) {
        case Metric::svm_error: return "svm_error";
        case Metric::nn_error: return "nn_error";
        case Metric::swap_invariance: return "swap_invariance";
        case Metric::translation_invariance: return "translation_invariance";
        case Metric::rotation_invariance: return "rotation_invariance";
        case Metric::zoom_invariance: return "zoom_invariance";
        case Metric::ck_alignment: return "ck_alignment";
        case Metric::ck_svm_error: return "ck_svm_error";
        case Metric::effective_rank: return "effective_rank";
    }
    return "?";
}

Metric parse_metric(std::string_view name) {
    for (Metric m : kAllMetrics) {
        if (to_string(m) == name) return m;
    }
    throw ConfigError("unknown metric '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw ConfigError("seeds must be distinct");
    }
    if (metrics.empty()) throw ConfigError("at least one metric is required");
    if (dataset.train_size == 0 || dataset.test_size == 0) throw ConfigError("subsample sizes must be positive");
    if (dataset.class_a == dataset.class_b) throw ConfigError("dataset classes must differ");
    if (dataset.name != "mnist" && dataset.name != "cifar10" && dataset.name != "synth") {
        throw ConfigError("unknown dataset '" + dataset.name + "' (expected mnist, cifar10 or synth)");
    }
    if (gram_block == 0) throw ConfigError("kernel.gram_block must be positive");
    TrainConfig t = train;
    t.epochs = t.checkpoint_epochs.empty() ? 0 : t.checkpoint_epochs.back();
    t.validate();
}

void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
    key = trim(key);
    value = trim(value);
    const std::string k(key);
    auto num = [&]<class T>(T& field) { field = parse_number<T>(key, value); };

    if (k == "dataset.name") cfg.dataset.name = std::string(value);
    else if (k == "dataset.path") cfg.dataset.path = std::string(value);
    else if (k == "dataset.classes") {
        const auto items = split_list(value);
        if (items.size() != 2) throw ConfigError("'dataset.classes' needs two class ids");
        cfg.dataset.class_a = parse_number<int>(key, items[0]);
        cfg.dataset.class_b = parse_number<int>(key, items[1]);
    } else if (k == "dataset.train_size") num(cfg.dataset.train_size);
    else if (k == "dataset.test_size") num(cfg.dataset.test_size);
    else if (k == "dataset.synth.side") num(cfg.dataset.synth_side);
    else if (k == "dataset.synth.separation") num(cfg.dataset.synth_separation);
    else if (k == "dataset.synth.seed") num(cfg.dataset.synth_seed);
    else if (k == "arch") cfg.arch = ArchitectureId::parse(value);
    else if (k == "arch.kind") cfg.arch.kind = parse_arch_kind(value);
    else if (k == "arch.width") cfg.arch.width = parse_number<int>(key, value);
    else if (k == "arch.head_width") cfg.arch.head_width = parse_number<int>(key, value);
    else if (k == "arch.padding") {
        if (value == "same") cfg.arch.padding = Padding::same;
        else if (value == "valid") cfg.arch.padding = Padding::valid;
        else throw ConfigError("'arch.padding' must be same or valid");
    } else if (k == "train.learning_rate") num(cfg.train.learning_rate);
    else if (k == "train.momentum") num(cfg.train.momentum);
    else if (k == "train.batch_size") num(cfg.train.batch_size);
    else if (k == "train.checkpoints") {
        cfg.train.checkpoint_epochs.clear();
        for (auto item : split_list(value)) cfg.train.checkpoint_epochs.push_back(parse_number<int>(key, item));
        if (!cfg.train.checkpoint_epochs.empty()) cfg.train.epochs = cfg.train.checkpoint_epochs.back();
    } else if (k == "train.loss") {
        if (value != "logistic") throw ConfigError("'train.loss' supports only logistic");
        cfg.train.loss = LossKind::logistic;
    } else if (k == "train.augment") {
        if (parse_bool(key, value)) augmentation(cfg);
        else cfg.train.augmentation.reset();
    } else if (k == "train.augment.rotation_range") num(augmentation(cfg).rotation_range_deg);
    else if (k == "train.augment.width_shift_range") num(augmentation(cfg).width_shift_range);
    else if (k == "train.augment.height_shift_range") num(augmentation(cfg).height_shift_range);
    else if (k == "seeds") {
        cfg.seeds.clear();
        for (auto item : split_list(value)) cfg.seeds.push_back(parse_number<std::uint64_t>(key, item));
    } else if (k == "metrics") {
        cfg.metrics.clear();
        for (auto item : split_list(value)) cfg.metrics.push_back(parse_metric(item));
    } else if (k == "svm.c") num(cfg.svm.c);
    else if (k == "svm.tolerance") num(cfg.svm.tolerance);
    else if (k == "svm.max_sweeps") num(cfg.svm.max_sweeps);
    else if (k == "svm.seed") num(cfg.svm.seed);
    else if (k == "kernel.rescale") {
        if (value == "train") cfg.rescale = RescaleFit::train;
        else if (value == "joint") cfg.rescale = RescaleFit::joint;
        else throw ConfigError("'kernel.rescale' must be train or joint");
    } else if (k == "kernel.gram_block") num(cfg.gram_block);
    else if (k == "output.dir") cfg.output_dir = std::string(value);
    else throw ConfigError("unknown configuration key '" + k + "'");
}

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig cfg;
    int line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        try {
            set_config_value(cfg, line.substr(0, eq), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return with_context(path.string(), [&] { return parse_config(ss.str()); });
}

DataSplit load_data(const DatasetSpec& spec) {
    DataSplit out;
    Dataset train;
    Dataset test;
    if (spec.name == "synth") {
        const Shape shape{spec.synth_side, spec.synth_side, 1};
        train = synth_dataset(spec.train_size, shape, spec.synth_separation, spec.synth_seed);
        test = synth_dataset(spec.test_size, shape, spec.synth_separation, rng::derive(spec.synth_seed, 1));
        test.split = Split::test;
        out.train = std::move(train);
        out.test = std::move(test);
        out.train.name = out.test.name = "synth";
        return out;
    }
    if (spec.name == "mnist") {
        train = load_idx(existing(spec.path, "train-images-idx3-ubyte"), existing(spec.path, "train-labels-idx1-ubyte"),
                         Split::train);
        test = load_idx(existing(spec.path, "t10k-images-idx3-ubyte"), existing(spec.path, "t10k-labels-idx1-ubyte"),
                        Split::test);
    } else if (spec.name == "cifar10") {
        std::vector<std::filesystem::path> batches;
        for (int i = 1; i <= 5; ++i) batches.push_back(existing(spec.path, "data_batch_" + std::to_string(i) + ".bin"));
        train = load_cifar10(batches, Split::train);
        const std::filesystem::path test_batch[] = {existing(spec.path, "test_batch.bin")};
        test = load_cifar10(test_batch, Split::test);
    } else {
        throw ConfigError("unknown dataset '" + spec.name + "'");
    }
    train.name = test.name = spec.name;
    out.train = binary_task(train, spec.class_a, spec.class_b).head(spec.train_size);
    out.test = with_context("test split", [&] { return binary_task(test, spec.class_a, spec.class_b).head(spec.test_size); });
    return out;
}

std::vector<MetricRecord> evaluate_checkpoint(const Checkpoint& cp, const ExperimentConfig& cfg,
                                              const DataSplit& data) {
    const Network net = restore_network(cp, data.train.shape());
    std::map<Metric, MetricRecord> out;
    auto record = [&](Metric m, double value, std::string flags = {}) {
        MetricRecord r;
        r.seed = cp.seed;
        r.arch = cfg.arch.name();
        r.dataset = data.train.name;
        r.epoch = cp.epoch;
        r.metric = m;
        r.value = value;
        r.flags = std::move(flags);
        out[m] = std::move(r);
    };

    // Full-tangent test embeddings are shared by the SVM, the Gram-based metrics and
    // nothing else; they are released as soon as those are done.
    const bool need_test_gram = wants(cfg, Metric::effective_rank) || wants(cfg, Metric::ck_alignment);
    if (wants(cfg, Metric::svm_error) || need_test_gram) {
        EmbeddingMatrix test = extract_embeddings(net, data.test.images, EmbeddingKind::full_tangent);
        if (wants(cfg, Metric::svm_error)) {
            const auto r = svm_metric(extract_embeddings(net, data.train.images, EmbeddingKind::full_tangent), test,
                                      data, cfg);
            record(Metric::svm_error, r.error, r.converged ? "" : "svm_not_converged");
        }
        if (need_test_gram) {
            const GramMatrix g = gram(test, cfg.gram_block);
            test = EmbeddingMatrix();
            if (wants(cfg, Metric::effective_rank)) {
                const auto er = effective_rank(g);
                record(Metric::effective_rank, er.value, er.converged ? "" : "power_iteration_not_converged");
            }
            if (wants(cfg, Metric::ck_alignment)) {
                const auto c = extract_embeddings(net, data.test.images, EmbeddingKind::conjugate);
                record(Metric::ck_alignment, alignment(g, gram(c, cfg.gram_block)));
            }
        }
    }
    if (wants(cfg, Metric::ck_svm_error)) {
        const auto test = extract_embeddings(net, data.test.images, EmbeddingKind::conjugate);
        const auto r =
            svm_metric(extract_embeddings(net, data.train.images, EmbeddingKind::conjugate), test, data, cfg);
        record(Metric::ck_svm_error, r.error, r.converged ? "" : "svm_not_converged");
    }
    if (wants(cfg, Metric::nn_error)) {
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < data.test.size(); ++i) {
            wrong += predict_class(net, data.test.images[i]) != data.test.labels[i] ? 1 : 0;
        }
        record(Metric::nn_error, static_cast<double>(wrong) / static_cast<double>(data.test.size()));
    }
    for (Metric m : {Metric::swap_invariance, Metric::translation_invariance, Metric::rotation_invariance,
                     Metric::zoom_invariance}) {
        if (!wants(cfg, m)) continue;
        const auto ts = transforms_for(m);
        const auto inv = invariance(net, data.test.images, ts, EmbeddingKind::full_tangent);
        record(m, inv.value, inv.warning ? "zero_embeddings_skipped" : "");
    }

    std::vector<MetricRecord> rows;
    for (Metric m : kAllMetrics) {
        if (auto it = out.find(m); it != out.end()) rows.push_back(std::move(it->second));
    }
    return rows;
}

std::vector<MetricRecord> run_experiment(const ExperimentConfig& cfg, const DataSplit& data,
                                         const ProgressFn& progress) {
    cfg.validate();
    if (data.train.empty() || data.test.empty()) throw InputError("experiment needs train and test examples");
    if (data.train.shape() != data.test.shape()) throw InputError("train and test image shapes differ");

    std::vector<MetricRecord> per_seed;
    for (std::uint64_t seed : cfg.seeds) {
        const std::string context = cfg.arch.name() + " seed " + std::to_string(seed);
        Network net = with_context(context, [&] { return build_network(cfg.arch, data.train.shape(), seed); });
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        tc.epochs = tc.checkpoint_epochs.back();
        const auto checkpoints = with_context(context, [&] { return train_sgd(net, data.train, tc); });
        if (progress) progress(context + ": trained " + std::to_string(tc.epochs) + " epochs");
        for (const auto& cp : checkpoints) {
            const std::string where = context + " epoch " + std::to_string(cp.epoch);
            auto rows = with_context(where, [&] { return evaluate_checkpoint(cp, cfg, data); });
            if (progress) progress(where + ": evaluated " + std::to_string(rows.size()) + " metrics");
            for (auto& r : rows) per_seed.push_back(std::move(r));
        }
    }

    std::vector<MetricRecord> out = per_seed;
    for (int epoch : cfg.train.checkpoint_epochs) {
        for (Metric m : kAllMetrics) {
            if (!wants(cfg, m)) continue;
            MetricRecord mean;
            mean.arch = cfg.arch.name();
            mean.dataset = data.train.name;
            mean.epoch = epoch;
            mean.metric = m;
            double sum = 0.0;
            std::size_t count = 0;
            std::set<std::string> flags;
            for (const auto& r : per_seed) {
                if (r.epoch != epoch || r.metric != m) continue;
                sum += r.value;
                ++count;
                if (!r.flags.empty()) flags.insert(r.flags);
            }
            mean.value = sum / static_cast<double>(count);
            for (const auto& f : flags) add_flag(mean.flags, f);
            out.push_back(std::move(mean));
        }
    }
    return out;
}

std::vector<MetricRecord> run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
    cfg.validate();
    return run_experiment(cfg, load_data(cfg.dataset), progress);
}

std::string to_csv(const std::vector<MetricRecord>& records) {
    std::string out = "seed,arch,dataset,epoch,metric,value,flags\n";
    for (const auto& r : records) {
        out += r.seed ? std::to_string(*r.seed) : std::string("mean");
        out += ',' + r.arch + ',' + r.dataset + ',' + std::to_string(r.epoch) + ',' + std::string(to_string(r.metric)) +
               ',' + format_value(r.value) + ',' + r.flags + '\n';
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const std::vector<MetricRecord>& records) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_text(path, to_csv(records));
}

std::vector<WidthChoice> choose_widths(const ArchitectureId& base, Shape input, const std::vector<double>& targets) {
    if (targets.empty()) throw ConfigError("no parameter targets given");
    constexpr int kMaxWidth = 4096;
    auto count_at = [&](int w) {
        ArchitectureId a = base;
        a.width = w;
        return static_cast<double>(parameter_count(a, input));
    };
    const double lo = count_at(1);
    const double hi = count_at(kMaxWidth);
    std::vector<WidthChoice> out;
    for (double target : targets) {
        if (!(target >= lo && target <= hi)) {
            std::string listing;
            for (int w : {1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, kMaxWidth}) {
                listing += (listing.empty() ? "" : ", ") + std::to_string(static_cast<std::uint64_t>(count_at(w))) +
                           " (width " + std::to_string(w) + ")";
            }
            throw ConfigError("parameter target " + format_value(target) + " is out of reach for " +
                              std::string(to_string(base.kind)) + "; achievable counts include " + listing);
        }
        // Counts grow monotonically with width: binary search for the first width at or above target.
        int a = 1;
        int b = kMaxWidth;
        while (a < b) {
            const int mid = a + (b - a) / 2;
            if (count_at(mid) < target) a = mid + 1;
            else b = mid;
        }
        int best = a;
        if (a > 1 && target - count_at(a - 1) < count_at(a) - target) best = a - 1;
        WidthChoice c;
        c.target = target;
        c.arch = base;
        if (best != base.effective_width()) c.arch.width = best;
        c.parameters = parameter_count(c.arch, input);
        out.push_back(std::move(c));
    }
    return out;
}

std::string sweep_width(const ExperimentConfig& cfg, const std::vector<double>& targets, const ProgressFn& progress) {
    cfg.validate();
    const DataSplit data = load_data(cfg.dataset);
    const auto choices = choose_widths(cfg.arch, data.train.shape(), targets);
    std::string out = "target,arch,parameters,epoch,nn_error_mean,nn_error_std\n";
    for (const auto& choice : choices) {
        ExperimentConfig c = cfg;
        c.arch = choice.arch;
        c.metrics = {Metric::nn_error};
        const auto records = run_experiment(c, data, progress);
        for (int epoch : c.train.checkpoint_epochs) {
            std::vector<double> values;
            for (const auto& r : records) {
                if (r.seed && r.epoch == epoch) values.push_back(r.value);
            }
            double mean = 0.0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(values.size());
            double var = 0.0;
            for (double v : values) var += (v - mean) * (v - mean);
            const double sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
            out += format_value(choice.target) + ',' + choice.arch.name() + ',' + std::to_string(choice.parameters) +
                   ',' + std::to_string(epoch) + ',' + format_value(mean) + ',' + format_value(sd) + '\n';
        }
    }
    return out;
}

std::vector<Metric> figure_metrics(std::string_view id) {
    using M = Metric;
    if (id == "fig1a" || id == "fig1b") return {M::svm_error};
    if (id == "fig2a" || id == "fig2b" || id == "fig2c") return {M::svm_error, M::nn_error};
    if (id == "fig3") return {M::swap_invariance};
    if (id == "fig4" || id == "fig6") return {M::translation_invariance, M::zoom_invariance, M::rotation_invariance};
    if (id == "fig5") return {M::ck_alignment, M::svm_error, M::ck_svm_error};
    if (id == "fig8") return {M::effective_rank};
    if (id == "fig9") return {M::nn_error};
    return {};
}

std::vector<std::filesystem::path> emit_plotdata(const std::vector<MetricRecord>& records, std::string_view figure_id,
                                                 const std::filesystem::path& dir) {
    if (records.empty()) throw InputError("no records to plot");
    if (figure_id.empty()) throw ConfigError("figure id must not be empty");
    std::vector<Metric> needed = figure_metrics(figure_id);
    if (needed.empty()) {
        // Unknown figure: plot whatever the records contain.
        for (Metric m : kAllMetrics) {
            if (std::any_of(records.begin(), records.end(), [&](const MetricRecord& r) { return r.metric == m; })) {
                needed.push_back(m);
            }
        }
    }
    for (Metric m : needed) {
        if (std::none_of(records.begin(), records.end(), [&](const MetricRecord& r) { return r.metric == m; })) {
            throw InputError("figure " + std::string(figure_id) + " needs metric '" + std::string(to_string(m)) +
                             "', which is absent from the records");
        }
    }

    // curve key -> epoch -> per-seed values (seed-mean rows are recomputed, not read)
    using Key = std::tuple<Metric, std::string, std::string>;
    std::map<Key, std::map<int, std::vector<double>>> curves;
    for (const auto& r : records) {
        if (!r.seed || std::find(needed.begin(), needed.end(), r.metric) == needed.end()) continue;
        curves[{r.metric, r.arch, r.dataset}][r.epoch].push_back(r.value);
    }
    if (curves.empty()) throw InputError("records hold only seed means; per-seed rows are required");

    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    std::string manifest = "# file metric arch dataset\n";
    for (const auto& [key, by_epoch] : curves) {
        const auto& [metric, arch, dataset] = key;
        const std::string name = sanitize(figure_id) + "_" + std::string(to_string(metric)) + "_" + sanitize(arch) +
                                 "_" + sanitize(dataset) + ".dat";
        std::string body = "# epoch mean std\n";
        for (const auto& [epoch, values] : by_epoch) {
            double mean = 0.0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(values.size());
            double var = 0.0;
            for (double v : values) var += (v - mean) * (v - mean);
            const double sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
            body += std::to_string(epoch) + ' ' + format_value(mean) + ' ' + format_value(sd) + '\n';
        }
        write_text(dir / name, body);
        written.push_back(dir / name);
        manifest += name + ' ' + std::string(to_string(metric)) + ' ' + arch + ' ' + dataset + '\n';
    }
    write_text(dir / (sanitize(figure_id) + ".manifest"), manifest);
    return written;
}

}  // namespace ak
