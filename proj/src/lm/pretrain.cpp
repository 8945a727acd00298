#include "lm/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "adapt/optimizer.hpp"

namespace ttarag {

namespace {

struct Window {
    std::vector<TokenId> inputs;
    std::vector<TokenId> targets;
};

Window make_window(const std::vector<TokenId>& doc, TokenId eos, std::size_t context, std::size_t start) {
    std::vector<TokenId> seq(doc);
    seq.push_back(eos);
    const std::size_t len = std::min(seq.size() - 1, context);
    Window w;
    w.inputs.assign(seq.begin() + static_cast<std::ptrdiff_t>(start),
                    seq.begin() + static_cast<std::ptrdiff_t>(start + len));
    w.targets.assign(seq.begin() + static_cast<std::ptrdiff_t>(start + 1),
                     seq.begin() + static_cast<std::ptrdiff_t>(start + len + 1));
    return w;
}

double cosine_lr(const PretrainOptions& o, std::size_t step) {
    if (step < o.warmup_steps) {
        return o.learning_rate * static_cast<double>(step + 1) / static_cast<double>(o.warmup_steps);
    }
    const double span = static_cast<double>(std::max<std::size_t>(1, o.steps - o.warmup_steps));
    const double progress = static_cast<double>(step - o.warmup_steps) / span;
    return o.learning_rate * (0.1 + 0.9 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

}  // namespace

double mean_document_loss(const TransformerLm& model, std::span<const std::vector<TokenId>> documents,
                          TokenId eos) {
    NoGradGuard no_grad;
    double total = 0.0;
    std::size_t tokens = 0;
    const std::size_t ctx = model.config().context;
    for (const auto& doc : documents) {
        if (doc.empty()) continue;
        std::vector<TokenId> seq(doc);
        seq.push_back(eos);
        for (std::size_t begin = 0; begin + 1 < seq.size(); begin += ctx) {
            const std::size_t end = std::min(begin + ctx, seq.size() - 1);
            std::vector<TokenId> inputs(seq.begin() + static_cast<std::ptrdiff_t>(begin),
                                        seq.begin() + static_cast<std::ptrdiff_t>(end));
            std::vector<TokenId> targets(seq.begin() + static_cast<std::ptrdiff_t>(begin + 1),
                                         seq.begin() + static_cast<std::ptrdiff_t>(end + 1));
            Tensor logits = model.forward_logits(inputs);
            std::vector<bool> mask(targets.size(), true);
            total += masked_cross_entropy(logits, targets, mask).item() * static_cast<double>(targets.size());
            tokens += targets.size();
        }
    }
    return tokens ? total / static_cast<double>(tokens) : 0.0;
}

PretrainResult pretrain(TransformerLm& model, std::span<const std::vector<TokenId>> documents,
                        const PretrainOptions& options, TokenId eos) {
    std::vector<std::vector<TokenId>> docs;
    for (const auto& d : documents) {
        if (!d.empty()) docs.push_back(d);
    }
    if (docs.empty()) throw std::invalid_argument("pretrain: no non-empty documents");

    std::mt19937_64 rng(options.seed);
    std::shuffle(docs.begin(), docs.end(), rng);
    std::size_t heldout = static_cast<std::size_t>(std::floor(options.heldout_fraction * static_cast<double>(docs.size())));
    if (options.heldout_fraction > 0.0 && docs.size() > 1) heldout = std::max<std::size_t>(heldout, 1);
    heldout = std::min(heldout, docs.size() - 1);
    const std::span<const std::vector<TokenId>> train(docs.data(), docs.size() - heldout);
    const std::span<const std::vector<TokenId>> held(docs.data() + train.size(), heldout);

    PretrainResult result;
    result.train_documents = train.size();
    result.heldout_documents = held.size();
    result.initial_heldout_loss = held.empty() ? 0.0 : mean_document_loss(model, held, eos);

    OptimizerSettings settings;
    settings.kind = OptimizerKind::adamw;
    settings.learning_rate = options.learning_rate;
    settings.weight_decay = options.weight_decay;
    Optimizer opt(model.parameters().size(), settings);
    std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
    const std::size_t ctx = model.config().context;
    const std::size_t batch = std::max<std::size_t>(1, options.batch_size);

    for (std::size_t step = 0; step < options.steps; ++step) {
        model.zero_grad();
        double step_loss = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const auto& doc = train[pick(rng)];
            const std::size_t full = doc.size();  // inputs+targets span full+1 tokens
            std::size_t start = 0;
            if (full > ctx) start = std::uniform_int_distribution<std::size_t>(0, full - ctx)(rng);
            Window w = make_window(doc, eos, ctx, start);
            Tensor logits = model.forward_logits(w.inputs);
            std::vector<bool> mask(w.targets.size(), true);
            Tensor loss = scale(masked_cross_entropy(logits, w.targets, mask), 1.0 / static_cast<double>(batch));
            step_loss += loss.item();
            loss.backward();
        }
        if (!std::isfinite(step_loss)) {
            std::ostringstream os;
            os << "pretrain: non-finite loss at step " << step << "; recent losses:";
            const std::size_t from = result.loss_curve.size() > 5 ? result.loss_curve.size() - 5 : 0;
            for (std::size_t i = from; i < result.loss_curve.size(); ++i) os << ' ' << result.loss_curve[i];
            throw TrainingDiverged(os.str());
        }
        result.loss_curve.push_back(step_loss);
        clip_global_norm(model.parameters(), options.clip_norm);
        opt.set_learning_rate(cosine_lr(options, step));
        opt.step(model.parameters());
        model.mark_modified();
    }
    model.zero_grad();
    result.heldout_loss = held.empty() ? 0.0 : mean_document_loss(model, held, eos);
    result.snapshot = model.snapshot();
    return result;
}

}  // namespace ttarag
