#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ak/kernel.hpp"

namespace ak {

struct SvmOptions {
    double c = 100.0;
    double tolerance = 1e-4;  // max projected-gradient violation over a sweep
    int max_sweeps = 1000;
    std::uint64_t seed = 0;   // permutation of each sweep
};

struct SvmDiagnostics {
    int sweeps = 0;
    double max_violation = 0.0;
    double dual_objective = 0.0;
    bool converged = false;
};

struct LinearModel {
    std::vector<double> weights;
    double intercept = 0.0;
    SvmDiagnostics diagnostics;

    double decision(std::span<const double> x) const;
    // +1 when decision >= 0.
    int predict(std::span<const double> x) const;
};

// Dual coordinate descent for the L2-regularized squared hinge loss
//   1/2 (|w|^2 + b^2) + C sum_i max(0, 1 - y_i (w.x_i + b))^2,
// the intercept treated as a feature of constant value 1.
// Returns the dual coefficients alpha_i (w = sum_i alpha_i y_i x_i).
std::vector<double> solve_svm_dual(const GramMatrix& k, std::span<const int> labels,
                                   const SvmOptions& opts, SvmDiagnostics* diag = nullptr);

// Requires rescaled features and labels in {-1, +1} with both classes present.
LinearModel train_svm(const EmbeddingMatrix& e, std::span<const int> labels, const SvmOptions& opts = {});

// Fraction of rows whose predicted sign disagrees with the label.
double svm_test_error(const LinearModel& model, const EmbeddingMatrix& e, std::span<const int> labels);

// "AKSV" model file.
void write_model(const std::filesystem::path& path, const LinearModel& m);
LinearModel read_model(const std::filesystem::path& path);

}  // namespace ak
