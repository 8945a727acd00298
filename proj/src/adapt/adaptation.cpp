#include "adapt/adaptation.hpp"

#include <chrono>
#include <cmath>

namespace ttarag {

void AdaptationConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("adaptation: learning_rate must be a finite value >= 0");
    }
    if (accumulation_steps < 1) throw std::invalid_argument("adaptation: accumulation_steps must be >= 1");
    if (!(clip_norm >= 0.0)) throw std::invalid_argument("adaptation: clip_norm must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("adaptation: betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw std::invalid_argument("adaptation: epsilon must be > 0");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("adaptation: weight_decay must be >= 0");
}

OptimizerSettings AdaptationConfig::optimizer_settings() const {
    return OptimizerSettings{optimizer, learning_rate, beta1, beta2, epsilon, weight_decay};
}

EncodedPair encode_pair(const Vocab& vocab, std::string_view query, const PrefixSuffixPair& pair,
                        std::size_t context) {
    const auto suffix = vocab.encode(pair.suffix);
    if (suffix.empty()) throw AdaptationError("adaptation: suffix of '" + pair.source_id + "' encodes to no tokens");
    std::vector<TokenId> full = vocab.encode(query);
    full.push_back(Vocab::kSep);
    const auto prefix = vocab.encode(pair.prefix);
    full.insert(full.end(), prefix.begin(), prefix.end());
    const std::size_t suffix_start = full.size();
    full.insert(full.end(), suffix.begin(), suffix.end());
    if (full.size() - 1 > context) {
        throw ContextLengthError("adaptation: example of " + std::to_string(full.size() - 1) +
                                 " input tokens exceeds context length " + std::to_string(context));
    }
    EncodedPair enc;
    enc.inputs.assign(full.begin(), full.end() - 1);
    enc.targets.assign(full.begin() + 1, full.end());
    enc.mask.resize(enc.targets.size());
    for (std::size_t t = 0; t < enc.targets.size(); ++t) enc.mask[t] = t + 1 >= suffix_start;
    enc.suffix_tokens = suffix.size();
    return enc;
}

Tensor pair_loss(const TransformerLm& model, const Vocab& vocab, std::string_view query,
                 const PrefixSuffixPair& pair) {
    const auto enc = encode_pair(vocab, query, pair, model.config().context);
    return masked_cross_entropy(model.forward_logits(enc.inputs), enc.targets, enc.mask);
}

Tensor adaptation_loss(const TransformerLm& model, const Vocab& vocab, std::string_view query,
                       std::span<const PrefixSuffixPair> pairs) {
    if (pairs.empty()) throw std::invalid_argument("adaptation_loss: no prefix-suffix pairs");
    Tensor total = pair_loss(model, vocab, query, pairs[0]);
    for (std::size_t i = 1; i < pairs.size(); ++i) total = add(total, pair_loss(model, vocab, query, pairs[i]));
    return total;
}

AdaptationTrace adapt(TransformerLm& model, const ParameterSnapshot& pristine, const Vocab& vocab,
                      std::string_view query, std::span<const PrefixSuffixPair> pairs,
                      const AdaptationConfig& config) {
    config.validate();
    if (pairs.empty()) throw std::invalid_argument("adapt: no prefix-suffix pairs");
    if (model.generation() != pristine.generation) {
        throw AdaptationError("adapt: model does not hold the pristine parameter snapshot");
    }
    const auto start = std::chrono::steady_clock::now();
    AdaptationTrace trace;
    Optimizer optimizer(model.parameters().size(), config.optimizer_settings());
    model.zero_grad();
    std::size_t pending = 0;

    auto apply_update = [&] {
        const double inv = 1.0 / static_cast<double>(pending);
        for (auto& p : model.parameters()) {
            for (double& g : p.grad()) g *= inv;
        }
        trace.grad_norms.push_back(global_grad_norm(model.parameters()));
        trace.clip_factors.push_back(clip_global_norm(model.parameters(), config.clip_norm));
        trace.clipped_norms.push_back(global_grad_norm(model.parameters()));
        optimizer.step(model.parameters());
        model.mark_modified();
        model.zero_grad();
        pending = 0;
    };

    try {
        for (const auto& pair : pairs) {
            Tensor loss = pair_loss(model, vocab, query, pair);
            if (!std::isfinite(loss.item())) throw NumericError("adapt: non-finite loss on '" + pair.source_id + "'");
            trace.pair_losses.push_back(loss.item());
            loss.backward();
            if (++pending == config.accumulation_steps) apply_update();
        }
        if (pending > 0) apply_update();
    } catch (const NumericError& e) {
        model.restore(pristine);
        model.zero_grad();
        trace.failed = true;
        trace.failure = e.what();
    }
    trace.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return trace;
}

}  // namespace ttarag
