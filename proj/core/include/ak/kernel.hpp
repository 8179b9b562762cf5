#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ak/image.hpp"
#include "ak/network.hpp"

namespace ak {

struct Checkpoint;

enum class EmbeddingKind : std::uint8_t {
    full_tangent = 0,  // gradient of the output with respect to every parameter
    conjugate = 1,     // activations of the last hidden layer
};

std::string_view to_string(EmbeddingKind kind);
EmbeddingKind parse_embedding_kind(std::string_view name);

// Row-major n x d matrix of embeddings; row i belongs to example i.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::size_t rows, std::size_t cols, EmbeddingKind kind);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    EmbeddingKind kind() const noexcept { return kind_; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    const std::vector<double>& data() const noexcept { return data_; }
    std::vector<double>& data() noexcept { return data_; }

    bool rescaled() const noexcept { return rescaled_; }
    // Factor applied by the last rescale (1 when never rescaled).
    double scale() const noexcept { return scale_; }
    void mark_rescaled(double scale) noexcept {
        rescaled_ = true;
        scale_ = scale;
    }

    // Free-form provenance, e.g. "fully_connected seed=0 epoch=3".
    std::string source;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    EmbeddingKind kind_ = EmbeddingKind::full_tangent;
    bool rescaled_ = false;
    double scale_ = 1.0;
    std::vector<double> data_;
};

// Symmetric n x n (or rectangular cross) matrix of inner products, 64-bit.
struct GramMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::string source;

    double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
    double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
    bool square() const noexcept { return rows == cols; }
};

// Computes one embedding at a time, reusing the forward/backward buffers.
class Embedder {
public:
    Embedder(const Network& net, EmbeddingKind kind);

    std::size_t dimension() const noexcept { return dim_; }
    // The returned view stays valid until the next call.
    std::span<const double> operator()(const Image& image);

private:
    const Network* net_;
    EmbeddingKind kind_;
    Tape tape_;
    std::size_t hidden_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> buffer_;
};

EmbeddingMatrix extract_embeddings(const Network& net, std::span<const Image> images, EmbeddingKind kind);
EmbeddingMatrix extract_embeddings(const Checkpoint& checkpoint, std::span<const Image> images,
                                   EmbeddingKind kind);

// Mean L2 norm of the rows.
double mean_row_norm(const EmbeddingMatrix& e);
// Multiplies every row by 1 / mean_row_norm(e) and sets the rescaled flag. A matrix
// that is already flagged comes back unchanged with scale 1.
EmbeddingMatrix rescale_embeddings(EmbeddingMatrix e);
// Multiplies every row by `factor` (e.g. the factor fitted on training rows) and sets the flag.
EmbeddingMatrix apply_scale(EmbeddingMatrix e, double factor);

inline constexpr std::size_t kDefaultGramBlock = 256;

// G[i][j] = a_i . b_j. Entries use a fixed accumulation order independent of the
// blocking; gram(A) computes the upper triangle and mirrors it.
GramMatrix gram(const EmbeddingMatrix& a, const EmbeddingMatrix& b, std::size_t block = kDefaultGramBlock);
GramMatrix gram(const EmbeddingMatrix& a, std::size_t block = kDefaultGramBlock);

// vec(G) . vec(H) / (|vec(G)| |vec(H)|)
double alignment(const GramMatrix& g, const GramMatrix& h);

struct EffectiveRank {
    double value = 0.0;
    double trace = 0.0;
    double lambda_max = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct PowerIterationOptions {
    double relative_tolerance = 1e-10;  // on successive Rayleigh quotients, relative to trace
    int max_iterations = 10000;
};

// trace(G) / lambda_max(G), lambda_max by power iteration from the all-ones vector.
EffectiveRank effective_rank(const GramMatrix& g, const PowerIterationOptions& opts = {});

// Binary files. Embeddings are stored as 32-bit floats ("AKEM"); Gram matrices as
// 64-bit ("AKGM").
void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& e);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);
void write_gram(const std::filesystem::path& path, const GramMatrix& g);
GramMatrix read_gram(const std::filesystem::path& path);

}  // namespace ak
