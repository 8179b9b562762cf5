#include "ak/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ak/error.hpp"
#include "ak/train.hpp"
#include "detail/binio.hpp"
#include "detail/vec.hpp"

namespace ak {

namespace {

constexpr std::uint32_t kEmbeddingVersion = 1;
constexpr std::uint32_t kGramVersion = 1;

// Depth of one k-chunk in the Gram kernel; a multiple of the lane count so chunk
// boundaries never change which lane a column lands in.
constexpr std::size_t kChunk = 512;
constexpr std::size_t kTile = 4;
using detail::kLanes;

// Eight lanes as one vector value; element-wise arithmetic keeps the lane order of
// detail::dot on any instruction set.
typedef double Lanes __attribute__((vector_size(kLanes * sizeof(double))));

inline Lanes load(const double* p) {
    Lanes v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

// Accumulates lanes for a kTile x kTile block of entries over columns [k0, k1).
// Rows past the end of the matrix point at a zero row and their results are dropped.
void tile_update(const double* const* a, const double* const* b, std::size_t k0, std::size_t k1, double* store) {
    Lanes acc[kTile][kTile];
    std::memcpy(acc, store, sizeof acc);
    std::size_t k = k0;
    for (; k + kLanes <= k1; k += kLanes) {
        const Lanes b0 = load(b[0] + k);
        const Lanes b1 = load(b[1] + k);
        const Lanes b2 = load(b[2] + k);
        const Lanes b3 = load(b[3] + k);
        for (std::size_t i = 0; i < kTile; ++i) {
            const Lanes ai = load(a[i] + k);
            acc[i][0] += ai * b0;
            acc[i][1] += ai * b1;
            acc[i][2] += ai * b2;
            acc[i][3] += ai * b3;
        }
    }
    for (std::size_t l = 0; k < k1; ++k, ++l) {
        for (std::size_t i = 0; i < kTile; ++i) {
            for (std::size_t j = 0; j < kTile; ++j) acc[i][j][l] += a[i][k] * b[j][k];
        }
    }
    std::memcpy(store, acc, sizeof acc);
}

// Computes G[i][j] for i in [i0, i1), j in [j0, j1); with `upper_only`, tiles
// entirely below the diagonal are skipped.
void gram_block(const EmbeddingMatrix& a, const EmbeddingMatrix& b, std::size_t i0, std::size_t i1, std::size_t j0,
                std::size_t j1, bool upper_only, const std::vector<double>& zero_row, GramMatrix& g) {
    const std::size_t d = a.cols();
    const std::size_t ti_count = (i1 - i0 + kTile - 1) / kTile;
    const std::size_t tj_count = (j1 - j0 + kTile - 1) / kTile;
    std::vector<double> lanes(ti_count * tj_count * kTile * kTile * kLanes, 0.0);

    auto row_ptr = [&](const EmbeddingMatrix& m, std::size_t r, std::size_t end) {
        return r < end ? m.row(r).data() : zero_row.data();
    };
    auto skip = [&](std::size_t ti, std::size_t tj) {
        // whole tile strictly below the diagonal
        return upper_only && j0 + tj * kTile + kTile - 1 < i0 + ti * kTile;
    };

    for (std::size_t k0 = 0; k0 < d || k0 == 0; k0 += kChunk) {
        const std::size_t k1 = std::min(d, k0 + kChunk);
        for (std::size_t ti = 0; ti < ti_count; ++ti) {
            const double* ar[kTile];
            for (std::size_t i = 0; i < kTile; ++i) ar[i] = row_ptr(a, i0 + ti * kTile + i, i1);
            for (std::size_t tj = 0; tj < tj_count; ++tj) {
                if (skip(ti, tj)) continue;
                const double* br[kTile];
                for (std::size_t j = 0; j < kTile; ++j) br[j] = row_ptr(b, j0 + tj * kTile + j, j1);
                double* store = lanes.data() + (ti * tj_count + tj) * kTile * kTile * kLanes;
                tile_update(ar, br, k0, k1, store);
            }
        }
        if (d == 0) break;
    }

    for (std::size_t ti = 0; ti < ti_count; ++ti) {
        for (std::size_t tj = 0; tj < tj_count; ++tj) {
            if (skip(ti, tj)) continue;
            const double* store = lanes.data() + (ti * tj_count + tj) * kTile * kTile * kLanes;
            for (std::size_t i = 0; i < kTile; ++i) {
                const std::size_t gi = i0 + ti * kTile + i;
                if (gi >= i1) break;
                for (std::size_t j = 0; j < kTile; ++j) {
                    const std::size_t gj = j0 + tj * kTile + j;
                    if (gj >= j1) break;
                    const double* acc = store + (i * kTile + j) * kLanes;
                    double s = acc[0];
                    for (std::size_t l = 1; l < kLanes; ++l) s += acc[l];
                    g(gi, gj) = s;
                }
            }
        }
    }
}

GramMatrix gram_impl(const EmbeddingMatrix& a, const EmbeddingMatrix& b, std::size_t block, bool symmetric) {
    if (a.cols() != b.cols()) {
        throw InputError("gram of embeddings with dimensions " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.cols()));
    }
    if (block == 0) throw ConfigError("gram block size must be positive");
    GramMatrix g;
    g.rows = a.rows();
    g.cols = b.rows();
    g.values.assign(g.rows * g.cols, 0.0);
    g.source = a.source;
    const std::vector<double> zero_row(a.cols(), 0.0);
    for (std::size_t i0 = 0; i0 < a.rows(); i0 += block) {
        const std::size_t i1 = std::min(a.rows(), i0 + block);
        for (std::size_t j0 = symmetric ? i0 : 0; j0 < b.rows(); j0 += block) {
            const std::size_t j1 = std::min(b.rows(), j0 + block);
            gram_block(a, b, i0, i1, j0, j1, symmetric && i0 == j0, zero_row, g);
        }
    }
    if (symmetric) {
        for (std::size_t i = 0; i < g.rows; ++i) {
            for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
        }
    }
    return g;
}

}  // namespace

std::string_view to_string(EmbeddingKind kind) {
    return kind == EmbeddingKind::full_tangent ? "full_tangent" : "conjugate";
}

EmbeddingKind parse_embedding_kind(std::string_view name) {
    if (name == "full_tangent") return EmbeddingKind::full_tangent;
    if (name == "conjugate") return EmbeddingKind::conjugate;
    throw ConfigError("unknown embedding kind '" + std::string(name) + "'");
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t cols, EmbeddingKind kind)
    : rows_(rows), cols_(cols), kind_(kind), data_(rows * cols, 0.0) {}

Embedder::Embedder(const Network& net, EmbeddingKind kind) : net_(&net), kind_(kind), tape_(net) {
    if (kind == EmbeddingKind::full_tangent) {
        dim_ = net.parameter_count();
    } else {
        const auto hidden = net.last_hidden_layer();
        if (!hidden) throw ConfigError("conjugate embedding needs a hidden layer; the network has none");
        hidden_ = *hidden;
        dim_ = net.layer_shape(hidden_).size();
    }
    buffer_.assign(dim_, 0.0);
}

std::span<const double> Embedder::operator()(const Image& image) {
    tape_.forward(image);
    if (kind_ == EmbeddingKind::conjugate) return tape_.activation(hidden_);
    std::fill(buffer_.begin(), buffer_.end(), 0.0);
    tape_.backward(1.0, buffer_);
    return buffer_;
}

EmbeddingMatrix extract_embeddings(const Network& net, std::span<const Image> images, EmbeddingKind kind) {
    if (images.empty()) throw InputError("no images to embed");
    Embedder embed(net, kind);
    EmbeddingMatrix e(images.size(), embed.dimension(), kind);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto row = embed(images[i]);
        std::copy(row.begin(), row.end(), e.row(i).begin());
    }
    return e;
}

EmbeddingMatrix extract_embeddings(const Checkpoint& checkpoint, std::span<const Image> images, EmbeddingKind kind) {
    if (images.empty()) throw InputError("no images to embed");
    const Network net = restore_network(checkpoint, images.front().shape);
    EmbeddingMatrix e = extract_embeddings(net, images, kind);
    e.source = checkpoint.arch + " seed=" + std::to_string(checkpoint.seed) + " epoch=" + std::to_string(checkpoint.epoch);
    return e;
}

double mean_row_norm(const EmbeddingMatrix& e) {
    if (e.rows() == 0) throw DegenerateError("embedding matrix has no rows");
    double s = 0.0;
    for (std::size_t i = 0; i < e.rows(); ++i) {
        const auto r = e.row(i);
        s += std::sqrt(detail::dot(r.data(), r.data(), r.size()));
    }
    return s / static_cast<double>(e.rows());
}

EmbeddingMatrix apply_scale(EmbeddingMatrix e, double factor) {
    if (!(factor > 0.0) || !std::isfinite(factor)) throw DegenerateError("scale factor must be positive and finite");
    for (double& v : e.data()) v *= factor;
    e.mark_rescaled(factor);
    return e;
}

EmbeddingMatrix rescale_embeddings(EmbeddingMatrix e) {
    if (e.rescaled()) {
        e.mark_rescaled(1.0);
        return e;
    }
    const double m = mean_row_norm(e);
    if (m == 0.0) throw DegenerateError("all embedding rows are zero");
    return apply_scale(std::move(e), 1.0 / m);
}

GramMatrix gram(const EmbeddingMatrix& a, const EmbeddingMatrix& b, std::size_t block) {
    if (&a == &b) return gram_impl(a, a, block, true);
    return gram_impl(a, b, block, false);
}

GramMatrix gram(const EmbeddingMatrix& a, std::size_t block) { return gram_impl(a, a, block, true); }

double alignment(const GramMatrix& g, const GramMatrix& h) {
    if (g.rows != h.rows || g.cols != h.cols) throw InputError("alignment of Gram matrices with different shapes");
    const std::size_t n = g.values.size();
    const double gh = detail::dot(g.values.data(), h.values.data(), n);
    const double gg = detail::dot(g.values.data(), g.values.data(), n);
    const double hh = detail::dot(h.values.data(), h.values.data(), n);
    if (gg == 0.0 || hh == 0.0) throw DegenerateError("alignment with an all-zero Gram matrix");
    return gh / std::sqrt(gg * hh);
}

EffectiveRank effective_rank(const GramMatrix& g, const PowerIterationOptions& opts) {
    if (!g.square() || g.rows == 0) throw InputError("effective rank needs a non-empty square Gram matrix");
    const std::size_t n = g.rows;
    EffectiveRank res;
    for (std::size_t i = 0; i < n; ++i) res.trace += g(i, i);
    if (!(res.trace > 0.0)) throw DegenerateError("Gram matrix has non-positive trace");

    auto matvec = [&](const std::vector<double>& v, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i) out[i] = detail::dot(&g.values[i * n], v.data(), n);
    };
    auto normalize = [](std::vector<double>& v) {
        const double norm = std::sqrt(detail::dot(v.data(), v.data(), v.size()));
        for (double& x : v) x /= norm;
        return norm;
    };

    std::vector<double> v(n, 1.0);
    std::vector<double> w(n, 0.0);
    normalize(v);
    matvec(v, w);
    if (detail::dot(w.data(), w.data(), n) == 0.0) {
        // all-ones direction lies in the null space; restart from the largest diagonal entry
        std::size_t k = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (g(i, i) > g(k, k)) k = i;
        }
        std::fill(v.begin(), v.end(), 0.0);
        v[k] = 1.0;
        matvec(v, w);
    }
    double rho = detail::dot(v.data(), w.data(), n);
    res.iterations = 1;
    while (res.iterations < opts.max_iterations) {
        v = w;
        normalize(v);
        matvec(v, w);
        const double next = detail::dot(v.data(), w.data(), n);
        ++res.iterations;
        const bool done = std::abs(next - rho) < opts.relative_tolerance * res.trace;
        rho = next;
        if (done) {
            res.converged = true;
            break;
        }
    }
    res.lambda_max = rho;
    res.value = res.trace / rho;
    return res;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& e) {
    detail::ByteWriter w;
    w.bytes("AKEM");
    w.u32(kEmbeddingVersion);
    w.u8(static_cast<std::uint8_t>(e.kind()));
    w.u64(e.rows());
    w.u64(e.cols());
    w.u8(e.rescaled() ? 1 : 0);
    for (double v : e.data()) w.f32(static_cast<float>(v));
    w.save(path);
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
    detail::ByteReader r(path);
    r.expect_magic("AKEM");
    const auto version_at = r.position();
    if (r.u32() != kEmbeddingVersion) throw FormatError(r.name() + ": unsupported embedding version", version_at);
    const auto kind_at = r.position();
    const std::uint8_t kind = r.u8();
    if (kind > 1) throw FormatError(r.name() + ": unknown embedding kind", kind_at);
    const std::uint64_t n = r.u64();
    const std::uint64_t d = r.u64();
    const bool rescaled = r.u8() != 0;
    if (d != 0 && n > r.remaining() / 4 / d) throw FormatError(r.name() + ": matrix larger than file", r.position());
    r.need(n * d * 4, "embedding values");
    EmbeddingMatrix e(n, d, static_cast<EmbeddingKind>(kind));
    for (double& v : e.data()) v = r.f32();
    r.expect_end();
    if (rescaled) e.mark_rescaled(1.0);
    return e;
}

void write_gram(const std::filesystem::path& path, const GramMatrix& g) {
    detail::ByteWriter w;
    w.bytes("AKGM");
    w.u32(kGramVersion);
    w.u64(g.rows);
    w.u64(g.cols);
    for (double v : g.values) w.f64(v);
    w.save(path);
}

GramMatrix read_gram(const std::filesystem::path& path) {
    detail::ByteReader r(path);
    r.expect_magic("AKGM");
    const auto version_at = r.position();
    if (r.u32() != kGramVersion) throw FormatError(r.name() + ": unsupported Gram version", version_at);
    GramMatrix g;
    g.rows = r.u64();
    g.cols = r.u64();
    if (g.cols != 0 && g.rows > r.remaining() / 8 / g.cols) {
        throw FormatError(r.name() + ": matrix larger than file", r.position());
    }
    r.need(g.rows * g.cols * 8, "Gram values");
    g.values.resize(g.rows * g.cols);
    for (double& v : g.values) v = r.f64();
    r.expect_end();
    return g;
}

}  // namespace ak
