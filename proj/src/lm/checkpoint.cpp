#include "lm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace ttarag {

namespace {

constexpr char kMagic[8] = {'T', 'T', 'A', 'R', 'A', 'G', 'C', 'K'};

class Writer {
public:
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void raw(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
    const std::vector<char>& bytes() const { return buf_; }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
    std::vector<char> buf_;
};

class Reader {
public:
    explicit Reader(std::vector<char> data) : data_(std::move(data)) {}
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    double f64() { return std::bit_cast<double>(le(8)); }
    std::string str() {
        const auto n = u32();
        need(n);
        std::string s(data_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    void expect_magic() {
        need(sizeof(kMagic));
        if (std::memcmp(data_.data(), kMagic, sizeof(kMagic)) != 0) throw CheckpointError("checkpoint: bad magic");
        pos_ += sizeof(kMagic);
    }
    bool at_end() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw CheckpointError("checkpoint: truncated file");
    }
    std::uint64_t le(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)]))
                 << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::vector<char> data_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    Writer w;
    w.raw(kMagic, sizeof(kMagic));
    w.u32(kCheckpointVersion);
    w.u64(ckpt.config.vocab_size);
    w.u64(ckpt.config.embed_dim);
    w.u64(ckpt.config.layers);
    w.u64(ckpt.config.heads);
    w.u64(ckpt.config.context);
    w.u64(ckpt.config.seed);
    w.u32(static_cast<std::uint32_t>(ckpt.vocab.size()));
    for (const auto& tok : ckpt.vocab.tokens()) w.str(tok);
    w.u32(static_cast<std::uint32_t>(ckpt.snapshot.entries.size()));
    for (const auto& e : ckpt.snapshot.entries) {
        w.str(e.name);
        w.u32(static_cast<std::uint32_t>(e.shape.size()));
        for (auto d : e.shape) w.u64(d);
        for (double v : e.values) w.f64(v);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("checkpoint: cannot open '" + path.string() + "' for writing");
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw CheckpointError("checkpoint: write to '" + path.string() + "' failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("checkpoint: cannot open '" + path.string() + "'");
    Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));
    r.expect_magic();
    const auto version = r.u32();
    if (version != kCheckpointVersion) {
        throw CheckpointError("checkpoint: unsupported format version " + std::to_string(version));
    }
    LmConfig cfg;
    cfg.vocab_size = r.u64();
    cfg.embed_dim = r.u64();
    cfg.layers = r.u64();
    cfg.heads = r.u64();
    cfg.context = r.u64();
    cfg.seed = r.u64();
    std::vector<std::string> tokens(r.u32());
    for (auto& t : tokens) t = r.str();
    ParameterSnapshot snap;
    snap.entries.resize(r.u32());
    for (auto& e : snap.entries) {
        e.name = r.str();
        e.shape.resize(r.u32());
        for (auto& d : e.shape) d = r.u64();
        e.values.resize(shape_numel(e.shape));
        for (auto& v : e.values) v = r.f64();
    }
    if (!r.at_end()) throw CheckpointError("checkpoint: trailing bytes after parameter data");
    if (tokens.size() != cfg.vocab_size) {
        throw CheckpointError("checkpoint: vocab has " + std::to_string(tokens.size()) +
                              " tokens but config says " + std::to_string(cfg.vocab_size));
    }
    return Checkpoint{cfg, Vocab::from_tokens(std::move(tokens)), std::move(snap)};
}

TransformerLm instantiate(const Checkpoint& ckpt) {
    TransformerLm model(ckpt.config);
    try {
        model.restore(ckpt.snapshot);
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(std::string("checkpoint: ") + e.what());
    }
    model.mark_modified();
    return model;
}

}  // namespace ttarag
