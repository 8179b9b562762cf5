#include "ak/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ak/error.hpp"
#include "ak/rng.hpp"
#include "detail/binio.hpp"
#include "detail/vec.hpp"

namespace ak {

namespace {

constexpr std::uint32_t kModelVersion = 1;

void check_labels(std::span<const int> labels) {
    bool pos = false;
    bool neg = false;
    for (int y : labels) {
        if (y == 1) {
            pos = true;
        } else if (y == -1) {
            neg = true;
        } else {
            throw InputError("SVM labels must be -1 or +1, got " + std::to_string(y));
        }
    }
    if (!pos || !neg) throw InputError("SVM training labels contain a single class");
}

}  // namespace

double LinearModel::decision(std::span<const double> x) const {
    if (x.size() != weights.size()) {
        throw InputError("model has dimension " + std::to_string(weights.size()) + ", input has " +
                         std::to_string(x.size()));
    }
    return detail::dot(weights.data(), x.data(), x.size()) + intercept;
}

int LinearModel::predict(std::span<const double> x) const { return decision(x) >= 0.0 ? 1 : -1; }

std::vector<double> solve_svm_dual(const GramMatrix& k, std::span<const int> labels, const SvmOptions& opts,
                                   SvmDiagnostics* diag) {
    if (!k.square()) throw InputError("SVM needs a square Gram matrix");
    if (labels.size() != k.rows) throw InputError("label count does not match the Gram matrix");
    if (k.rows < 2) throw InputError("SVM needs at least two examples");
    if (!(opts.c > 0.0)) throw ConfigError("SVM penalty C must be positive");
    if (!(opts.tolerance > 0.0)) throw ConfigError("SVM tolerance must be positive");
    if (opts.max_sweeps < 1) throw ConfigError("SVM needs at least one sweep");
    check_labels(labels);

    const std::size_t n = k.rows;
    // Squared hinge: the dual Hessian gains 1/(2C) on its diagonal and alpha has no upper bound.
    const double d_ii = 1.0 / (2.0 * opts.c);
    std::vector<double> alpha(n, 0.0);
    // f[i] = sum_j alpha_j y_j (K_ij + 1): the decision value of example i, intercept included.
    std::vector<double> f(n, 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng::Engine engine(rng::derive(opts.seed, 0x5356));

    SvmDiagnostics d;
    while (d.sweeps < opts.max_sweeps) {
        rng::shuffle(std::span<std::size_t>(order), engine);
        double worst = 0.0;
        for (std::size_t i : order) {
            const double y = labels[i];
            const double g = y * f[i] + d_ii * alpha[i] - 1.0;
            const double pg = alpha[i] == 0.0 ? std::min(g, 0.0) : g;
            worst = std::max(worst, std::abs(pg));
            if (pg == 0.0) continue;
            const double q_ii = k(i, i) + 1.0 + d_ii;
            const double next = std::max(alpha[i] - g / q_ii, 0.0);
            const double delta = (next - alpha[i]) * y;
            alpha[i] = next;
            if (delta == 0.0) continue;
            const double* row = &k.values[i * n];
            for (std::size_t j = 0; j < n; ++j) f[j] += delta * (row[j] + 1.0);
        }
        ++d.sweeps;
        d.max_violation = worst;
        if (worst < opts.tolerance) {
            d.converged = true;
            break;
        }
    }
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) obj += 0.5 * alpha[i] * (labels[i] * f[i] + d_ii * alpha[i]) - alpha[i];
    d.dual_objective = obj;
    if (diag != nullptr) *diag = d;
    return alpha;
}

LinearModel train_svm(const EmbeddingMatrix& e, std::span<const int> labels, const SvmOptions& opts) {
    if (!e.rescaled()) throw PreconditionError("SVM features must be rescaled before training");
    if (labels.size() != e.rows()) throw InputError("label count does not match the embedding rows");
    if (e.rows() < 2) throw InputError("SVM needs at least two examples");
    check_labels(labels);

    const GramMatrix k = gram(e);
    LinearModel m;
    const auto alpha = solve_svm_dual(k, labels, opts, &m.diagnostics);
    m.weights.assign(e.cols(), 0.0);
    for (std::size_t i = 0; i < e.rows(); ++i) {
        if (alpha[i] == 0.0) continue;
        const double coef = alpha[i] * labels[i];
        detail::axpy(coef, e.row(i).data(), m.weights.data(), e.cols());
        m.intercept += coef;
    }
    return m;
}

double svm_test_error(const LinearModel& model, const EmbeddingMatrix& e, std::span<const int> labels) {
    if (e.cols() != model.weights.size()) {
        throw InputError("model has dimension " + std::to_string(model.weights.size()) + ", test features have " +
                         std::to_string(e.cols()));
    }
    if (labels.size() != e.rows()) throw InputError("label count does not match the embedding rows");
    if (e.rows() == 0) throw InputError("no test examples");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < e.rows(); ++i) wrong += model.predict(e.row(i)) != labels[i] ? 1 : 0;
    return static_cast<double>(wrong) / static_cast<double>(e.rows());
}

void write_model(const std::filesystem::path& path, const LinearModel& m) {
    detail::ByteWriter w;
    w.bytes("AKSV");
    w.u32(kModelVersion);
    w.u64(m.weights.size());
    for (double v : m.weights) w.f64(v);
    w.f64(m.intercept);
    w.save(path);
}

LinearModel read_model(const std::filesystem::path& path) {
    detail::ByteReader r(path);
    r.expect_magic("AKSV");
    const auto version_at = r.position();
    if (r.u32() != kModelVersion) throw FormatError(r.name() + ": unsupported model version", version_at);
    const std::uint64_t d = r.u64();
    if (d > r.remaining() / 8) throw FormatError(r.name() + ": model larger than file", r.position());
    LinearModel m;
    m.weights.resize(d);
    for (double& v : m.weights) v = r.f64();
    m.intercept = r.f64();
    r.expect_end();
    return m;
}

}  // namespace ak
