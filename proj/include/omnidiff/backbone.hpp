#pragma once

#include <cmath>
#include <functional>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "omnidiff/rng.hpp"
#include "omnidiff/tensor.hpp"
#include "omnidiff/vocab.hpp"

namespace omnidiff {

struct ModelConfig {
    std::size_t dim = 64;
    std::size_t layers = 3;
    std::size_t heads = 4;
    std::size_t max_len = 96;
    VocabLayout vocab;
    std::uint64_t seed = 0;

    void validate() const {
        if (dim == 0 || heads == 0) throw std::invalid_argument("dim and heads must be positive");
        if (dim % heads != 0) throw std::invalid_argument("dim must be divisible by heads");
        if (max_len == 0) throw std::invalid_argument("max_len must be positive");
        if (vocab.total_size() == 0) throw std::invalid_argument("empty vocabulary");
    }
};

template <typename T>
struct ModelParams {
    ModelConfig config;
    NamedTensors<T> tensors;

    Tensor<T>& at(const std::string& name) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw std::invalid_argument("missing tensor: " + name);
        return it->second;
    }
    const Tensor<T>& at(const std::string& name) const {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw std::invalid_argument("missing tensor: " + name);
        return it->second;
    }

    template <typename U>
    ModelParams<U> cast() const {
        ModelParams<U> out;
        out.config = config;
        for (const auto& [name, t] : tensors) out.tensors[name] = t.template cast<U>();
        return out;
    }
};

inline std::string layer_prefix(std::size_t l) { return "layer" + std::to_string(l) + "."; }

// Tensor name -> shape for a config. The registry order (alphabetical via
// NamedTensors) also fixes serialization order.
inline std::vector<std::pair<std::string, std::vector<std::size_t>>> tensor_registry(
    const ModelConfig& cfg) {
    const std::size_t d = cfg.dim;
    const std::size_t v = cfg.vocab.total_size();
    std::vector<std::pair<std::string, std::vector<std::size_t>>> reg;
    reg.push_back({"embed", {v, d}});
    reg.push_back({"pos", {cfg.max_len, d}});
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string p = layer_prefix(l);
        reg.push_back({p + "ln1.gain", {d}});
        reg.push_back({p + "ln1.bias", {d}});
        reg.push_back({p + "attn.wq", {d, d}});
        reg.push_back({p + "attn.wk", {d, d}});
        reg.push_back({p + "attn.wv", {d, d}});
        reg.push_back({p + "attn.wo", {d, d}});
        reg.push_back({p + "ln2.gain", {d}});
        reg.push_back({p + "ln2.bias", {d}});
        reg.push_back({p + "mlp.w1", {d, 4 * d}});
        reg.push_back({p + "mlp.w2", {4 * d, d}});
    }
    reg.push_back({"ln_f.gain", {d}});
    reg.push_back({"ln_f.bias", {d}});
    reg.push_back({"head", {d, v}});
    return reg;
}

namespace detail {

inline bool is_gain(const std::string& name) { return name.ends_with(".gain"); }
inline bool is_bias(const std::string& name) { return name.ends_with(".bias"); }

template <typename T>
void fill_tensor(const std::string& name, Tensor<T>& t, const ModelConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, name));
    if (is_gain(name)) {
        for (auto& v : t.data) v = T(1);
    } else if (is_bias(name)) {
        for (auto& v : t.data) v = T(0);
    } else {
        // fan-in scaled normal init; embeddings use 1/sqrt(dim)
        std::size_t fan_in = (t.rank() == 2 && (name == "embed" || name == "pos"))
                                 ? cfg.dim
                                 : t.shape[0];
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (auto& v : t.data) v = static_cast<T>(rng.normal() * scale);
    }
}

}  // namespace detail

template <typename T = float>
ModelParams<T> init_params(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams<T> params;
    params.config = cfg;
    for (const auto& [name, shape] : tensor_registry(cfg)) {
        Tensor<T> t{shape};
        detail::fill_tensor(name, t, cfg);
        params.tensors.emplace(name, std::move(t));
    }
    return params;
}

template <typename T>
std::size_t count_params(const ModelParams<T>& p) {
    std::size_t n = 0;
    for (const auto& [name, t] : p.tensors) n += t.numel();
    return n;
}

// ---------------------------------------------------------------------------
// Forward pass with cached activations (bidirectional attention, pre-LN).
// ---------------------------------------------------------------------------

template <typename T>
struct LayerCache {
    Tensor<T> x_in;                     // residual stream entering the block [L,d]
    Tensor<T> ln1_hat, ln1_out;         // [L,d]
    std::vector<double> ln1_inv_std;    // [L]
    Tensor<T> q, k, v;                  // [L,d]
    Tensor<T> att_probs;                // [H*L, L]
    Tensor<T> att_concat;               // [L,d] heads merged, before wo
    Tensor<T> x_mid;                    // after attention residual [L,d]
    Tensor<T> ln2_hat, ln2_out;
    std::vector<double> ln2_inv_std;
    Tensor<T> mlp_pre, mlp_act;         // [L,4d]
};

template <typename T>
struct ForwardCache {
    std::vector<TokenId> tokens;
    std::vector<LayerCache<T>> layers;
    Tensor<T> x_final;                  // residual stream before final LN [L,d]
    Tensor<T> lnf_hat, lnf_out;
    std::vector<double> lnf_inv_std;
    Tensor<T> logits;                   // [L,V]
};

inline constexpr double kLayerNormEps = 1e-5;

namespace detail {

// y = gain*(x-mean)/sqrt(var+eps)+bias ; keeps x_hat and 1/sqrt(var+eps)
template <typename T>
void layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, Tensor<T>& hat,
                Tensor<T>& out, std::vector<double>& inv_std) {
    const std::size_t rows = x.rows(), d = x.cols();
    hat = Tensor<T>({rows, d});
    out = Tensor<T>({rows, d});
    inv_std.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const T* xi = x.row_ptr(i);
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += static_cast<double>(xi[j]);
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = static_cast<double>(xi[j]) - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std[i] = is;
        T* hi = hat.row_ptr(i);
        T* oi = out.row_ptr(i);
        for (std::size_t j = 0; j < d; ++j) {
            const double h = (static_cast<double>(xi[j]) - mean) * is;
            hi[j] = static_cast<T>(h);
            oi[j] = static_cast<T>(h * static_cast<double>(gain(j)) + static_cast<double>(bias(j)));
        }
    }
}

// dx += backprop of layer_norm; accumulates parameter grads.
template <typename T>
void layer_norm_backward(const Tensor<T>& dy, const Tensor<T>& hat,
                         const std::vector<double>& inv_std, const Tensor<T>& gain, Tensor<T>& dx,
                         Tensor<T>& dgain, Tensor<T>& dbias) {
    const std::size_t rows = dy.rows(), d = dy.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        const T* dyi = dy.row_ptr(i);
        const T* hi = hat.row_ptr(i);
        T* dxi = dx.row_ptr(i);
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double dh = static_cast<double>(dyi[j]) * static_cast<double>(gain(j));
            m1 += dh;
            m2 += dh * static_cast<double>(hi[j]);
        }
        m1 /= static_cast<double>(d);
        m2 /= static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j) {
            const double dh = static_cast<double>(dyi[j]) * static_cast<double>(gain(j));
            dxi[j] += static_cast<T>(inv_std[i] * (dh - m1 - static_cast<double>(hi[j]) * m2));
            dgain(j) += static_cast<T>(static_cast<double>(dyi[j]) * static_cast<double>(hi[j]));
            dbias(j) += dyi[j];
        }
    }
}

inline double gelu_scalar(double u) { return 0.5 * u * (1.0 + std::erf(u / std::numbers::sqrt2)); }
inline double gelu_grad_scalar(double u) {
    const double phi = std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
    return 0.5 * (1.0 + std::erf(u / std::numbers::sqrt2)) + u * phi;
}

}  // namespace detail

template <typename T>
Tensor<T> forward_with_cache(const ModelParams<T>& params, const std::vector<TokenId>& tokens,
                             ForwardCache<T>* cache_out) {
    const ModelConfig& cfg = params.config;
    const std::size_t L = tokens.size();
    const std::size_t d = cfg.dim;
    const std::size_t H = cfg.heads;
    const std::size_t dh = d / H;
    const std::size_t V = cfg.vocab.total_size();
    if (L == 0) throw std::invalid_argument("empty token sequence");
    if (L > cfg.max_len)
        throw std::invalid_argument("sequence length " + std::to_string(L) + " exceeds max_len " +
                                    std::to_string(cfg.max_len));
    for (TokenId id : tokens)
        if (id >= V)
            throw std::invalid_argument("token id " + std::to_string(id) +
                                        " outside vocabulary of size " + std::to_string(V));

    ForwardCache<T> local;
    ForwardCache<T>& cache = cache_out ? *cache_out : local;
    cache.tokens = tokens;
    cache.layers.assign(cfg.layers, LayerCache<T>{});

    const Tensor<T>& embed = params.at("embed");
    const Tensor<T>& pos = params.at("pos");
    Tensor<T> x({L, d});
    for (std::size_t i = 0; i < L; ++i) {
        const T* e = embed.row_ptr(tokens[i]);
        const T* p = pos.row_ptr(i);
        T* xi = x.row_ptr(i);
        for (std::size_t j = 0; j < d; ++j) xi[j] = e[j] + p[j];
    }

    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        LayerCache<T>& lc = cache.layers[l];
        const std::string p = layer_prefix(l);
        lc.x_in = x;
        detail::layer_norm(x, params.at(p + "ln1.gain"), params.at(p + "ln1.bias"), lc.ln1_hat,
                           lc.ln1_out, lc.ln1_inv_std);
        lc.q = Tensor<T>({L, d});
        lc.k = Tensor<T>({L, d});
        lc.v = Tensor<T>({L, d});
        gemm_nn(lc.ln1_out.data.data(), params.at(p + "attn.wq").data.data(), lc.q.data.data(), L,
                d, d);
        gemm_nn(lc.ln1_out.data.data(), params.at(p + "attn.wk").data.data(), lc.k.data.data(), L,
                d, d);
        gemm_nn(lc.ln1_out.data.data(), params.at(p + "attn.wv").data.data(), lc.v.data.data(), L,
                d, d);

        lc.att_probs = Tensor<T>({H * L, L});
        lc.att_concat = Tensor<T>({L, d});
        for (std::size_t h = 0; h < H; ++h) {
            const std::size_t off = h * dh;
            // scores then row softmax
            for (std::size_t i = 0; i < L; ++i) {
                T* srow = lc.att_probs.row_ptr(h * L + i);
                const T* qi = lc.q.row_ptr(i) + off;
                for (std::size_t j = 0; j < L; ++j) {
                    const T* kj = lc.k.row_ptr(j) + off;
                    double acc = 0.0;
                    for (std::size_t pdim = 0; pdim < dh; ++pdim)
                        acc += static_cast<double>(qi[pdim]) * static_cast<double>(kj[pdim]);
                    srow[j] = static_cast<T>(acc * att_scale);
                }
            }
            for (std::size_t i = 0; i < L; ++i) {
                T* srow = lc.att_probs.row_ptr(h * L + i);
                double mx = -1e300;
                for (std::size_t j = 0; j < L; ++j) mx = std::max(mx, static_cast<double>(srow[j]));
                double sum = 0.0;
                for (std::size_t j = 0; j < L; ++j) {
                    const double e = std::exp(static_cast<double>(srow[j]) - mx);
                    srow[j] = static_cast<T>(e);
                    sum += e;
                }
                const double inv = 1.0 / sum;
                for (std::size_t j = 0; j < L; ++j)
                    srow[j] = static_cast<T>(static_cast<double>(srow[j]) * inv);
            }
            // concat output: P_h * v_h
            for (std::size_t i = 0; i < L; ++i) {
                const T* prow = lc.att_probs.row_ptr(h * L + i);
                T* orow = lc.att_concat.row_ptr(i) + off;
                for (std::size_t pdim = 0; pdim < dh; ++pdim) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < L; ++j)
                        acc += static_cast<double>(prow[j]) *
                               static_cast<double>(lc.v.row_ptr(j)[off + pdim]);
                    orow[pdim] = static_cast<T>(acc);
                }
            }
        }
        // residual add of output projection
        Tensor<T> att_out({L, d});
        gemm_nn(lc.att_concat.data.data(), params.at(p + "attn.wo").data.data(),
                att_out.data.data(), L, d, d);
        lc.x_mid = Tensor<T>({L, d});
        for (std::size_t i = 0; i < L * d; ++i) lc.x_mid.data[i] = lc.x_in.data[i] + att_out.data[i];

        detail::layer_norm(lc.x_mid, params.at(p + "ln2.gain"), params.at(p + "ln2.bias"),
                           lc.ln2_hat, lc.ln2_out, lc.ln2_inv_std);
        lc.mlp_pre = Tensor<T>({L, 4 * d});
        gemm_nn(lc.ln2_out.data.data(), params.at(p + "mlp.w1").data.data(),
                lc.mlp_pre.data.data(), L, d, 4 * d);
        lc.mlp_act = Tensor<T>({L, 4 * d});
        for (std::size_t i = 0; i < L * 4 * d; ++i)
            lc.mlp_act.data[i] =
                static_cast<T>(detail::gelu_scalar(static_cast<double>(lc.mlp_pre.data[i])));
        Tensor<T> mlp_out({L, d});
        gemm_nn(lc.mlp_act.data.data(), params.at(p + "mlp.w2").data.data(), mlp_out.data.data(),
                L, 4 * d, d);
        x = Tensor<T>({L, d});
        for (std::size_t i = 0; i < L * d; ++i) x.data[i] = lc.x_mid.data[i] + mlp_out.data[i];
    }

    cache.x_final = x;
    detail::layer_norm(x, params.at("ln_f.gain"), params.at("ln_f.bias"), cache.lnf_hat,
                       cache.lnf_out, cache.lnf_inv_std);
    cache.logits = Tensor<T>({L, V});
    gemm_nn(cache.lnf_out.data.data(), params.at("head").data.data(), cache.logits.data.data(), L,
            d, V);
    if (cache_out) return cache_out->logits;
    return std::move(cache.logits);
}

template <typename T>
Tensor<T> forward(const ModelParams<T>& params, const std::vector<TokenId>& tokens) {
    return forward_with_cache(params, tokens, static_cast<ForwardCache<T>*>(nullptr));
}

// ---------------------------------------------------------------------------
// Training example: corrupted tokens plus the (position, ground truth)
// pairs that contribute to the masked-denoising loss, weighted by 1/t.
// ---------------------------------------------------------------------------

struct LossTerm {
    std::size_t position = 0;
    TokenId target = 0;
};

struct TrainingExample {
    std::vector<TokenId> tokens;  // corrupted sequence x_t
    std::vector<LossTerm> terms;  // masked AND supervised positions
    double weight = 1.0;          // 1/t
};

template <typename T>
struct BackwardResult {
    double loss = 0.0;
    NamedTensors<T> grads;
};

namespace detail {

template <typename T>
NamedTensors<T> zero_grads(const ModelParams<T>& params) {
    NamedTensors<T> g;
    for (const auto& [name, t] : params.tensors) g.emplace(name, Tensor<T>{t.shape});
    return g;
}

// Loss and gradients of one example, scaled by `scale` (1/batch).
// Accumulates into `grads`.
template <typename T>
double backward_one(const ModelParams<T>& params, const TrainingExample& ex, double scale,
                    NamedTensors<T>& grads) {
    if (ex.terms.empty()) throw std::invalid_argument("training example with no contributing positions");
    const ModelConfig& cfg = params.config;
    const std::size_t d = cfg.dim;
    const std::size_t H = cfg.heads;
    const std::size_t dh = d / H;
    const std::size_t V = cfg.vocab.total_size();
    const std::size_t L = ex.tokens.size();

    ForwardCache<T> cache;
    forward_with_cache(params, ex.tokens, &cache);

    // Eq. 1 contribution and logits gradient, sparse over contributing rows.
    Tensor<T> dlnf_out({L, d});
    Tensor<T>& dhead = grads.at("head");
    double loss = 0.0;
    std::vector<double> prob(V);
    for (const LossTerm& term : ex.terms) {
        const T* row = cache.logits.row_ptr(term.position);
        double mx = -1e300;
        for (std::size_t j = 0; j < V; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        double sum = 0.0;
        for (std::size_t j = 0; j < V; ++j) {
            prob[j] = std::exp(static_cast<double>(row[j]) - mx);
            sum += prob[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < V; ++j) prob[j] *= inv;
        loss += -std::log(std::max(prob[term.target], 1e-300));
        const double gscale = ex.weight * scale;
        const T* frow = cache.lnf_out.row_ptr(term.position);
        T* dfrow = dlnf_out.row_ptr(term.position);
        const Tensor<T>& head = params.at("head");
        for (std::size_t j = 0; j < V; ++j) {
            const double dl = gscale * (prob[j] - (j == term.target ? 1.0 : 0.0));
            // dhead[:, j] += f^T dl ; df += dl * head[:, j]
            for (std::size_t c = 0; c < d; ++c) {
                dhead(c, j) += static_cast<T>(dl * static_cast<double>(frow[c]));
                dfrow[c] += static_cast<T>(dl * static_cast<double>(head(c, j)));
            }
        }
    }
    loss *= ex.weight;

    Tensor<T> dx({L, d});
    detail::layer_norm_backward(dlnf_out, cache.lnf_hat, cache.lnf_inv_std, params.at("ln_f.gain"),
                                dx, grads.at("ln_f.gain"), grads.at("ln_f.bias"));

    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t l = cfg.layers; l-- > 0;) {
        const LayerCache<T>& lc = cache.layers[l];
        const std::string p = layer_prefix(l);
        // MLP backward: dx is the gradient at x_out = x_mid + mlp_out
        Tensor<T> dmlp_act({L, 4 * d});
        gemm_nt(dx.data.data(), params.at(p + "mlp.w2").data.data(), dmlp_act.data.data(), L, d,
                4 * d);
        gemm_tn(lc.mlp_act.data.data(), dx.data.data(), grads.at(p + "mlp.w2").data.data(), 4 * d,
                L, d, /*accumulate=*/true);
        Tensor<T>& dmlp_pre = dmlp_act;  // reuse in place
        for (std::size_t i = 0; i < L * 4 * d; ++i)
            dmlp_pre.data[i] = static_cast<T>(
                static_cast<double>(dmlp_act.data[i]) *
                detail::gelu_grad_scalar(static_cast<double>(lc.mlp_pre.data[i])));
        Tensor<T> dln2_out({L, d});
        gemm_nt(dmlp_pre.data.data(), params.at(p + "mlp.w1").data.data(), dln2_out.data.data(), L,
                4 * d, d);
        gemm_tn(lc.ln2_out.data.data(), dmlp_pre.data.data(), grads.at(p + "mlp.w1").data.data(), d,
                L, 4 * d, /*accumulate=*/true);
        // dx now becomes gradient at x_mid: residual passes dx through, and
        // layer-norm backward adds its contribution in place.
        detail::layer_norm_backward(dln2_out, lc.ln2_hat, lc.ln2_inv_std, params.at(p + "ln2.gain"),
                                    dx, grads.at(p + "ln2.gain"), grads.at(p + "ln2.bias"));

        // Attention backward from datt = dx (gradient at attention residual output)
        Tensor<T> dconcat({L, d});
        gemm_nt(dx.data.data(), params.at(p + "attn.wo").data.data(), dconcat.data.data(), L, d, d);
        gemm_tn(lc.att_concat.data.data(), dx.data.data(), grads.at(p + "attn.wo").data.data(), d,
                L, d, /*accumulate=*/true);

        Tensor<T> dq({L, d}), dk({L, d}), dv({L, d});
        std::vector<double> dp_row(L);
        for (std::size_t h = 0; h < H; ++h) {
            const std::size_t off = h * dh;
            for (std::size_t i = 0; i < L; ++i) {
                const T* prow = lc.att_probs.row_ptr(h * L + i);
                const T* doi = dconcat.row_ptr(i) + off;
                // dP = dO_h v_h^T ; dv_h += P^T dO_h
                for (std::size_t j = 0; j < L; ++j) {
                    const T* vj = lc.v.row_ptr(j) + off;
                    T* dvj = dv.row_ptr(j) + off;
                    double acc = 0.0;
                    const double pij = static_cast<double>(prow[j]);
                    for (std::size_t pdim = 0; pdim < dh; ++pdim) {
                        acc += static_cast<double>(doi[pdim]) * static_cast<double>(vj[pdim]);
                        dvj[pdim] += static_cast<T>(pij * static_cast<double>(doi[pdim]));
                    }
                    dp_row[j] = acc;
                }
                // softmax backward on the row
                double dot = 0.0;
                for (std::size_t j = 0; j < L; ++j) dot += dp_row[j] * static_cast<double>(prow[j]);
                // dS -> dq_i and dk rows
                const T* qi = lc.q.row_ptr(i) + off;
                T* dqi = dq.row_ptr(i) + off;
                for (std::size_t j = 0; j < L; ++j) {
                    const double ds = static_cast<double>(prow[j]) * (dp_row[j] - dot) * att_scale;
                    const T* kj = lc.k.row_ptr(j) + off;
                    T* dkj = dk.row_ptr(j) + off;
                    for (std::size_t pdim = 0; pdim < dh; ++pdim) {
                        dqi[pdim] += static_cast<T>(ds * static_cast<double>(kj[pdim]));
                        dkj[pdim] += static_cast<T>(ds * static_cast<double>(qi[pdim]));
                    }
                }
            }
        }
        Tensor<T> dln1_out({L, d});
        gemm_nt(dq.data.data(), params.at(p + "attn.wq").data.data(), dln1_out.data.data(), L, d,
                d);
        gemm_nt(dk.data.data(), params.at(p + "attn.wk").data.data(), dln1_out.data.data(), L, d, d,
                /*accumulate=*/true);
        gemm_nt(dv.data.data(), params.at(p + "attn.wv").data.data(), dln1_out.data.data(), L, d, d,
                /*accumulate=*/true);
        gemm_tn(lc.ln1_out.data.data(), dq.data.data(), grads.at(p + "attn.wq").data.data(), d, L,
                d, /*accumulate=*/true);
        gemm_tn(lc.ln1_out.data.data(), dk.data.data(), grads.at(p + "attn.wk").data.data(), d, L,
                d, /*accumulate=*/true);
        gemm_tn(lc.ln1_out.data.data(), dv.data.data(), grads.at(p + "attn.wv").data.data(), d, L,
                d, /*accumulate=*/true);
        detail::layer_norm_backward(dln1_out, lc.ln1_hat, lc.ln1_inv_std, params.at(p + "ln1.gain"),
                                    dx, grads.at(p + "ln1.gain"), grads.at(p + "ln1.bias"));
    }

    Tensor<T>& dembed = grads.at("embed");
    Tensor<T>& dpos = grads.at("pos");
    for (std::size_t i = 0; i < L; ++i) {
        const T* dxi = dx.row_ptr(i);
        T* de = dembed.row_ptr(ex.tokens[i]);
        T* dp = dpos.row_ptr(i);
        for (std::size_t j = 0; j < d; ++j) {
            de[j] += dxi[j];
            dp[j] += dxi[j];
        }
    }
    return loss;
}

}  // namespace detail

// Batch-mean loss of Eq.-style masked denoising and its exact gradient.
// Per-example grads are reduced over a fixed shard structure so the result
// does not depend on the number of worker threads.
template <typename T>
BackwardResult<T> forward_backward(const ModelParams<T>& params,
                                   const std::vector<TrainingExample>& batch,
                                   unsigned n_threads = 0) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    constexpr std::size_t kShards = 8;
    const std::size_t n_shards = std::min<std::size_t>(kShards, batch.size());
    const double scale = 1.0 / static_cast<double>(batch.size());

    std::vector<NamedTensors<T>> shard_grads(n_shards);
    std::vector<double> shard_loss(n_shards, 0.0);
    std::vector<std::string> shard_error(n_shards);

    auto run_shard = [&](std::size_t s) {
        try {
            shard_grads[s] = detail::zero_grads(params);
            const std::size_t lo = s * batch.size() / n_shards;
            const std::size_t hi = (s + 1) * batch.size() / n_shards;
            for (std::size_t i = lo; i < hi; ++i)
                shard_loss[s] += detail::backward_one(params, batch[i], scale, shard_grads[s]);
        } catch (const std::exception& e) {
            shard_error[s] = e.what();
        }
    };

    unsigned hw = n_threads ? n_threads : std::thread::hardware_concurrency();
    if (hw <= 1 || n_shards == 1) {
        for (std::size_t s = 0; s < n_shards; ++s) run_shard(s);
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(n_shards));
        std::mutex mu;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (;;) {
                    std::size_t s;
                    {
                        std::lock_guard<std::mutex> lock(mu);
                        if (next >= n_shards) return;
                        s = next++;
                    }
                    run_shard(s);
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (std::size_t s = 0; s < n_shards; ++s)
        if (!shard_error[s].empty()) throw std::invalid_argument(shard_error[s]);

    BackwardResult<T> result;
    result.grads = std::move(shard_grads[0]);
    result.loss = shard_loss[0];
    for (std::size_t s = 1; s < n_shards; ++s) {
        result.loss += shard_loss[s];
        for (auto& [name, g] : result.grads) {
            const Tensor<T>& gs = shard_grads[s].at(name);
            for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += gs.data[i];
        }
    }
    result.loss *= scale;
    return result;
}

}  // namespace omnidiff
