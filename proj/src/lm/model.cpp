#include "lm/model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <random>

namespace ttarag {

namespace {

std::atomic<std::uint64_t> g_generation{1};

std::uint64_t fresh_generation() { return g_generation.fetch_add(1, std::memory_order_relaxed); }

std::vector<double> normal_values(std::mt19937_64& rng, std::size_t n, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

}  // namespace

void LmConfig::validate() const {
    if (vocab_size < 5) throw std::invalid_argument("LmConfig: vocab_size must be at least 5");
    if (embed_dim == 0 || heads == 0 || layers == 0 || context == 0) {
        throw std::invalid_argument("LmConfig: embed_dim, heads, layers and context must be positive");
    }
    if (embed_dim % heads != 0) {
        throw std::invalid_argument("LmConfig: embed_dim " + std::to_string(embed_dim) +
                                    " is not divisible by heads " + std::to_string(heads));
    }
}

bool ParameterSnapshot::same_values(const ParameterSnapshot& other) const {
    if (entries.size() != other.entries.size()) return false;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& a = entries[i];
        const auto& b = other.entries[i];
        if (a.name != b.name || a.shape != b.shape || a.values.size() != b.values.size()) return false;
        if (std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) != 0) return false;
    }
    return true;
}

Tensor& TransformerLm::add_param(std::string name, Shape shape, std::vector<double> values) {
    names_.push_back(std::move(name));
    params_.push_back(Tensor::parameter(std::move(shape), std::move(values)));
    return params_.back();
}

TransformerLm::TransformerLm(LmConfig config) : config_(config) {
    config_.validate();
    const std::size_t d = config_.embed_dim;
    const std::size_t v = config_.vocab_size;
    std::mt19937_64 rng(config_.seed);
    const double std_w = 0.02;
    const double std_resid = 0.02 / std::sqrt(2.0 * static_cast<double>(config_.layers));
    auto ones = [](std::size_t n) { return std::vector<double>(n, 1.0); };
    auto zeros = [](std::size_t n) { return std::vector<double>(n, 0.0); };

    tok_emb_ = params_.size();
    add_param("tok_emb", {v, d}, normal_values(rng, v * d, std_w));
    pos_emb_ = params_.size();
    add_param("pos_emb", {config_.context, d}, normal_values(rng, config_.context * d, std_w));
    for (std::size_t l = 0; l < config_.layers; ++l) {
        const std::string p = "block" + std::to_string(l) + ".";
        Block b{};
        b.ln1_gain = params_.size();
        add_param(p + "ln1.gain", {d}, ones(d));
        b.ln1_bias = params_.size();
        add_param(p + "ln1.bias", {d}, zeros(d));
        b.qkv_w = params_.size();
        add_param(p + "attn.qkv.weight", {d, 3 * d}, normal_values(rng, d * 3 * d, std_w));
        b.qkv_b = params_.size();
        add_param(p + "attn.qkv.bias", {3 * d}, zeros(3 * d));
        b.proj_w = params_.size();
        add_param(p + "attn.proj.weight", {d, d}, normal_values(rng, d * d, std_resid));
        b.proj_b = params_.size();
        add_param(p + "attn.proj.bias", {d}, zeros(d));
        b.ln2_gain = params_.size();
        add_param(p + "ln2.gain", {d}, ones(d));
        b.ln2_bias = params_.size();
        add_param(p + "ln2.bias", {d}, zeros(d));
        b.fc_w = params_.size();
        add_param(p + "mlp.fc.weight", {d, 4 * d}, normal_values(rng, d * 4 * d, std_w));
        b.fc_b = params_.size();
        add_param(p + "mlp.fc.bias", {4 * d}, zeros(4 * d));
        b.out_w = params_.size();
        add_param(p + "mlp.out.weight", {4 * d, d}, normal_values(rng, 4 * d * d, std_resid));
        b.out_b = params_.size();
        add_param(p + "mlp.out.bias", {d}, zeros(d));
        blocks_.push_back(b);
    }
    lnf_gain_ = params_.size();
    add_param("ln_f.gain", {d}, ones(d));
    lnf_bias_ = params_.size();
    add_param("ln_f.bias", {d}, zeros(d));
    head_b_ = params_.size();
    add_param("head.bias", {v}, zeros(v));
    generation_ = fresh_generation();
}

Tensor TransformerLm::hidden_states(std::span<const TokenId> ids) const {
    const std::size_t t = ids.size();
    if (t == 0) throw std::invalid_argument("forward: empty token sequence");
    if (t > config_.context) {
        throw ContextLengthError("forward: sequence of " + std::to_string(t) + " tokens exceeds context length " +
                                 std::to_string(config_.context));
    }
    const std::size_t d = config_.embed_dim;
    const std::size_t dh = d / config_.heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<TokenId> positions(t);
    for (std::size_t i = 0; i < t; ++i) positions[i] = static_cast<TokenId>(i);
    Tensor x = add(embedding(params_[tok_emb_], ids), embedding(params_[pos_emb_], positions));

    for (const Block& b : blocks_) {
        Tensor h = layer_norm(x, params_[b.ln1_gain], params_[b.ln1_bias]);
        Tensor qkv = add_row(matmul(h, params_[b.qkv_w]), params_[b.qkv_b]);
        std::vector<Tensor> heads;
        heads.reserve(config_.heads);
        for (std::size_t hd = 0; hd < config_.heads; ++hd) {
            Tensor q = slice_cols(qkv, hd * dh, (hd + 1) * dh);
            Tensor k = slice_cols(qkv, d + hd * dh, d + (hd + 1) * dh);
            Tensor v = slice_cols(qkv, 2 * d + hd * dh, 2 * d + (hd + 1) * dh);
            Tensor att = causal_softmax(scale(matmul_nt(q, k), inv_sqrt));
            heads.push_back(matmul(att, v));
        }
        Tensor attn = add_row(matmul(concat_cols(heads), params_[b.proj_w]), params_[b.proj_b]);
        x = add(x, attn);
        Tensor h2 = layer_norm(x, params_[b.ln2_gain], params_[b.ln2_bias]);
        Tensor mlp = gelu(add_row(matmul(h2, params_[b.fc_w]), params_[b.fc_b]));
        x = add(x, add_row(matmul(mlp, params_[b.out_w]), params_[b.out_b]));
    }
    return x;
}

Tensor TransformerLm::output_logits(const Tensor& hidden) const {
    Tensor x = layer_norm(hidden, params_[lnf_gain_], params_[lnf_bias_]);
    return add_row(matmul_nt(x, params_[tok_emb_]), params_[head_b_]);
}

Tensor TransformerLm::forward_logits(std::span<const TokenId> ids) const { return output_logits(hidden_states(ids)); }

std::vector<TokenId> TransformerLm::greedy_generate(std::span<const TokenId> prompt, std::size_t max_new_tokens,
                                                    TokenId eos) const {
    if (prompt.size() > config_.context) {
        throw ContextLengthError("generate: prompt of " + std::to_string(prompt.size()) +
                                 " tokens exceeds context length " + std::to_string(config_.context));
    }
    NoGradGuard no_grad;
    std::vector<TokenId> seq(prompt.begin(), prompt.end());
    std::vector<TokenId> out;
    while (out.size() < max_new_tokens && seq.size() < config_.context) {
        Tensor h = hidden_states(seq);
        Tensor logits = output_logits(slice_rows(h, seq.size() - 1, seq.size()));
        const auto row = logits.data();
        // max_element returns the first maximum, i.e. the lowest id on ties.
        const auto best = static_cast<TokenId>(std::max_element(row.begin(), row.end()) - row.begin());
        if (best == eos) break;
        out.push_back(best);
        seq.push_back(best);
    }
    return out;
}

ParameterSnapshot TransformerLm::snapshot() const {
    ParameterSnapshot snap;
    snap.generation = generation_;
    snap.entries.reserve(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        snap.entries.push_back({names_[i], params_[i].shape(),
                                std::vector<double>(params_[i].data().begin(), params_[i].data().end())});
    }
    return snap;
}

void TransformerLm::restore(const ParameterSnapshot& snap) {
    if (snap.entries.size() != params_.size()) {
        throw std::invalid_argument("restore: snapshot has " + std::to_string(snap.entries.size()) +
                                    " parameters, model has " + std::to_string(params_.size()));
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& e = snap.entries[i];
        if (e.name != names_[i] || e.shape != params_[i].shape()) {
            throw std::invalid_argument("restore: parameter '" + e.name + "' " + shape_to_string(e.shape) +
                                        " does not match '" + names_[i] + "' " +
                                        shape_to_string(params_[i].shape()));
        }
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        std::copy(snap.entries[i].values.begin(), snap.entries[i].values.end(), params_[i].data().begin());
    }
    generation_ = snap.generation;
}

TransformerLm TransformerLm::clone() const {
    TransformerLm copy(config_);
    copy.restore(snapshot());
    return copy;
}

Tensor& TransformerLm::parameter(std::string_view name) {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw std::out_of_range("no parameter named '" + std::string(name) + "'");
    return params_[static_cast<std::size_t>(it - names_.begin())];
}

std::size_t TransformerLm::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.numel();
    return n;
}

void TransformerLm::mark_modified() { generation_ = fresh_generation(); }

void TransformerLm::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace ttarag
