#include "hqmv/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "hqmv/activations.hpp"

namespace hqmv::harness {

namespace {

constexpr std::uint16_t kCheckpointVersion = 1;

void init_gaussian(std::vector<double>& w, Rng& rng, double std) {
    for (auto& v : w) v = rng.normal(0.0, std);
}

}  // namespace

void ModelConfig::validate() const {
    if (patch == 0 || H % patch != 0 || W % patch != 0)
        throw std::invalid_argument("ModelConfig: H and W must be divisible by patch");
    if (D < 1 || n_blocks < 1 || N < 1 || conv_k < 1)
        throw std::invalid_argument("ModelConfig: counts must be >= 1");
    if (use_qca && (n_qubits < 1 || qca_layers < 1))
        throw std::invalid_argument("ModelConfig: QCA dims must be >= 1");
    if (use_lora && lora_rank < 1)
        throw std::invalid_argument("ModelConfig: LoRA rank must be >= 1");
}

Model Model::build(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    const std::size_t D = cfg.D, N = cfg.N, K = cfg.conv_k;

    // Each component draws from its own derived stream, so classical and
    // hybrid builds share identical classical parameters for a given seed.
    {
        Rng rng = Rng::derive(seed, 1);
        m.stem = peft::LinearWeights::zeros(3, D, true);
        init_gaussian(m.stem.W, rng, 1.0 / std::sqrt(3.0));
    }
    for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
        Rng rng = Rng::derive(seed, 10 + b);
        auto p = ssm::MambaBlockParams::zeros(D, N, K);
        const double sd = 1.0 / std::sqrt(double(D));
        init_gaussian(p.W_in.W, rng, sd);
        init_gaussian(p.conv_k, rng, 1.0 / std::sqrt(double(K)));
        init_gaussian(p.W_proj.W, rng, sd);
        for (std::size_t d = 0; d < D; ++d)
            for (std::size_t n = 0; n < N; ++n)
                p.A_log[d * N + n] = std::log(double(n + 1));
        for (std::size_t d = 0; d < D; ++d) {
            // softplus(delta_raw + bias) lands in [0.001, 0.1] at init
            const double target = rng.uniform(0.001, 0.1);
            p.delta_bias[d] = std::log(std::expm1(target));
        }
        init_gaussian(p.W_out.W, rng, sd);
        m.blocks.push_back(std::move(p));
    }
    if (cfg.use_qca) {
        Rng rng = Rng::derive(seed, 1000);
        m.qca_params.channels = D;
        m.qca_params.W_red.resize(cfg.n_qubits * D);
        init_gaussian(m.qca_params.W_red, rng, 1.0 / std::sqrt(double(D)));
        m.qca_params.W_exp.resize(D * cfg.n_qubits);
        init_gaussian(m.qca_params.W_exp, rng, 1.0 / std::sqrt(double(cfg.n_qubits)));
        m.qca_params.circuit.n_qubits = cfg.n_qubits;
        m.qca_params.circuit.n_layers = cfg.qca_layers;
        m.qca_params.circuit.theta.resize(m.qca_params.circuit.theta_count());
        const double pi = 3.14159265358979323846;
        for (auto& t : m.qca_params.circuit.theta) t = rng.uniform(-pi, pi);
        m.qca_params.lambda = 0.0;
    }
    {
        Rng rng = Rng::derive(seed, 2000);
        m.head = peft::LinearWeights::zeros(D, ModelConfig::C, true);
        init_gaussian(m.head.W, rng, 1.0 / std::sqrt(double(D)));
    }
    if (cfg.use_lora) {
        std::size_t idx = 0;
        for (auto& blk : m.blocks) {
            Rng r0 = Rng::derive(seed, 3000 + idx++);
            blk.W_in.attach_lora(cfg.lora_rank, cfg.lora_alpha, r0);
            Rng r1 = Rng::derive(seed, 3000 + idx++);
            blk.W_proj.attach_lora(cfg.lora_rank, cfg.lora_alpha, r1);
            Rng r2 = Rng::derive(seed, 3000 + idx++);
            blk.W_out.attach_lora(cfg.lora_rank, cfg.lora_alpha, r2);
        }
        Rng rh = Rng::derive(seed, 3000 + idx);
        m.head.attach_lora(cfg.lora_rank, cfg.lora_alpha, rh);
    }
    return m;
}

std::vector<ParamRef> Model::param_refs() {
    std::vector<ParamRef> refs;
    auto add = [&](const std::string& name, std::vector<double>& v, bool trainable,
                   bool quantum = false) {
        refs.push_back({name, v.data(), v.size(), trainable, quantum});
    };
    auto add_linear = [&](const std::string& name, peft::LinearWeights& lw) {
        add(name + ".W", lw.W, !lw.lora.has_value());
        if (lw.lora) {
            add(name + ".lora_A", lw.lora->A, true);
            add(name + ".lora_B", lw.lora->B, true);
        }
        if (!lw.bias.empty()) add(name + ".bias", lw.bias, true);
    };
    add_linear("stem", stem);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const std::string pre = "block" + std::to_string(b);
        add_linear(pre + ".W_in", blocks[b].W_in);
        add(pre + ".conv_k", blocks[b].conv_k, true);
        add_linear(pre + ".W_proj", blocks[b].W_proj);
        add(pre + ".A_log", blocks[b].A_log, true);
        add(pre + ".delta_bias", blocks[b].delta_bias, true);
        add_linear(pre + ".W_out", blocks[b].W_out);
    }
    if (cfg.use_qca) {
        add("qca.W_red", qca_params.W_red, true, true);
        add("qca.W_exp", qca_params.W_exp, true);
        add("qca.theta", qca_params.circuit.theta, true, true);
        refs.push_back({"qca.lambda", &qca_params.lambda, 1, true, false});
    }
    add_linear("head", head);
    return refs;
}

std::size_t Model::param_count() {
    std::size_t n = 0;
    for (const auto& r : param_refs()) n += r.n;
    return n;
}

std::size_t Model::trainable_count() {
    std::size_t n = 0;
    for (const auto& r : param_refs())
        if (r.trainable) n += r.n;
    return n;
}

std::vector<double> Model::forward(const wafer::WaferSample& s,
                                   SampleCache* cache) const {
    if (s.H != cfg.H || s.W != cfg.W)
        throw std::invalid_argument("Model::forward: wafer size mismatch");
    const std::size_t L = cfg.n_tokens(), D = cfg.D, P = cfg.patch;
    const std::size_t TW = cfg.tokens_w();

    // One-hot {0,1,2} -> 3 channels, non-overlapping patch mean.
    Tensor tokens_in = Tensor::zeros({L, 3});
    const double inv = 1.0 / double(P * P);
    for (std::size_t t = 0; t < L; ++t) {
        const std::size_t r0 = (t / TW) * P, c0 = (t % TW) * P;
        for (std::size_t dr = 0; dr < P; ++dr)
            for (std::size_t dc = 0; dc < P; ++dc) {
                const std::uint8_t v = s.grid[(r0 + dr) * cfg.W + (c0 + dc)];
                tokens_in.at(t, v) += inv;
            }
    }

    Tensor cur = stem.forward(tokens_in);
    SampleCache local;
    SampleCache& cc = cache ? *cache : local;
    cc.tokens_in = tokens_in;
    cc.tokens0 = cur;
    cc.blocks.assign(blocks.size(), {});
    for (std::size_t b = 0; b < blocks.size(); ++b)
        cur = ssm::mamba_block_forward(cur, blocks[b], &cc.blocks[b]);
    cc.pre_qca = cur;

    if (cfg.use_qca) {
        Tensor fmap = Tensor::zeros({1, D, cfg.tokens_h(), TW});
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t d = 0; d < D; ++d)
                fmap.data[d * L + t] = cur.at(t, d);
        const Tensor out_map = qca::qca_forward(fmap, qca_params, &cc.qca);
        Tensor post = Tensor::zeros({L, D});
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t d = 0; d < D; ++d)
                post.at(t, d) = out_map.data[d * L + t];
        cur = post;
    }
    cc.post = cur;

    cc.pooled.assign(D, 0.0);
    for (std::size_t t = 0; t < L; ++t)
        for (std::size_t d = 0; d < D; ++d) cc.pooled[d] += cur.at(t, d);
    for (auto& v : cc.pooled) v /= double(L);

    const Tensor logits_t = head.forward(Tensor({1, D}, cc.pooled));
    cc.logits = logits_t.data;
    cc.scores.resize(ModelConfig::C);
    for (std::size_t c = 0; c < ModelConfig::C; ++c)
        cc.scores[c] = sigmoid(cc.logits[c]);
    return cc.scores;
}

void Model::backward(const SampleCache& cache, const std::vector<double>& glogits,
                     ModelGrads& g) const {
    const std::size_t L = cfg.n_tokens(), D = cfg.D;
    Model& self = const_cast<Model&>(*this);
    auto refs = self.param_refs();
    std::size_t total = 0;
    for (const auto& r : refs) total += r.n;
    if (g.flat.size() != total) g.flat.assign(total, 0.0);

    // Flat accumulation follows param_refs order exactly.
    std::size_t cursor = 0;
    auto emit = [&](const std::vector<double>& src) {
        for (std::size_t i = 0; i < src.size(); ++i) g.flat[cursor + i] += src[i];
        cursor += src.size();
    };
    auto emit1 = [&](double v) { g.flat[cursor++] += v; };
    auto skip = [&](std::size_t n) { cursor += n; };

    // head
    Tensor gpooled_t = Tensor::zeros({1, D});
    const peft::LinearGrads ghead = peft::linear_backward(
        head, Tensor({1, D}, cache.pooled), Tensor({1, ModelConfig::C}, glogits),
        gpooled_t);

    Tensor gtokens = Tensor::zeros({L, D});
    for (std::size_t t = 0; t < L; ++t)
        for (std::size_t d = 0; d < D; ++d)
            gtokens.at(t, d) = gpooled_t.data[d] / double(L);

    qca::QcaGrads gqca;
    if (cfg.use_qca) {
        Tensor fmap = Tensor::zeros({1, D, cfg.tokens_h(), cfg.tokens_w()});
        Tensor gmap = Tensor::zeros(fmap.shape);
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t d = 0; d < D; ++d) {
                fmap.data[d * L + t] = cache.pre_qca.at(t, d);
                gmap.data[d * L + t] = gtokens.at(t, d);
            }
        gqca = qca::qca_backward(fmap, qca_params, cache.qca, gmap);
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t d = 0; d < D; ++d)
                gtokens.at(t, d) = gqca.gX.data[d * L + t];
    }

    std::vector<ssm::MambaBlockGrads> gblocks(blocks.size());
    Tensor upstream = gtokens;
    for (std::size_t b = blocks.size(); b-- > 0;) {
        gblocks[b] = ssm::mamba_block_backward(cache.blocks[b].X, blocks[b],
                                               cache.blocks[b], upstream);
        upstream = gblocks[b].gX;
    }

    Tensor gin = Tensor::zeros({L, 3});
    const peft::LinearGrads gstem =
        peft::linear_backward(stem, cache.tokens_in, upstream, gin);

    auto emit_linear = [&](const peft::LinearWeights& lw, const peft::LinearGrads& lg) {
        if (lw.lora) {
            skip(lw.W.size());  // frozen base
            emit(lg.gA);
            emit(lg.gB);
        } else {
            emit(lg.gW);
        }
        if (!lw.bias.empty()) emit(lg.gbias);
    };

    emit_linear(stem, gstem);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        emit_linear(blocks[b].W_in, gblocks[b].gW_in);
        emit(gblocks[b].g_conv_k);
        emit_linear(blocks[b].W_proj, gblocks[b].gW_proj);
        emit(gblocks[b].gA_log);
        emit(gblocks[b].g_delta_bias);
        emit_linear(blocks[b].W_out, gblocks[b].gW_out);
    }
    if (cfg.use_qca) {
        emit(gqca.gW_red);
        emit(gqca.gW_exp);
        emit(gqca.gtheta);
        emit1(gqca.glambda);
    }
    emit_linear(head, ghead);
    if (cursor != total)
        throw std::logic_error("Model::backward: gradient layout mismatch");
}

double Model::gate_activation_mean(const wafer::WaferSample& s) const {
    if (!cfg.use_qca) return 0.0;
    SampleCache cache;
    forward(s, &cache);
    double acc = 0.0;
    for (std::size_t d = 0; d < cfg.D; ++d) acc += cache.qca.G.data[d];
    return std::fabs(qca_params.lambda) * acc / double(cfg.D);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void put(std::string& b, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        b.push_back(char((std::uint64_t(v) >> (8 * i)) & 0xff));
}
void put_f64(std::string& b, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put(b, bits);
}
template <typename T>
T get(const std::string& b, std::size_t& off) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= std::uint64_t(std::uint8_t(b[off + i])) << (8 * i);
    off += sizeof(T);
    return T(v);
}
double get_f64(const std::string& b, std::size_t& off) {
    const std::uint64_t bits = get<std::uint64_t>(b, off);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void Model::save(const std::string& path) {
    std::string buf = "HQMV";
    put<std::uint16_t>(buf, kCheckpointVersion);
    put<std::uint16_t>(buf, cfg.H);
    put<std::uint16_t>(buf, cfg.W);
    put<std::uint32_t>(buf, std::uint32_t(cfg.patch));
    put<std::uint32_t>(buf, std::uint32_t(cfg.D));
    put<std::uint32_t>(buf, std::uint32_t(cfg.n_blocks));
    put<std::uint32_t>(buf, std::uint32_t(cfg.N));
    buf.push_back(cfg.use_qca ? 1 : 0);
    put<std::uint32_t>(buf, std::uint32_t(cfg.n_qubits));
    put<std::uint32_t>(buf, std::uint32_t(cfg.qca_layers));
    buf.push_back(cfg.use_lora ? 1 : 0);
    put<std::uint32_t>(buf, std::uint32_t(cfg.lora_rank));
    put_f64(buf, cfg.lora_alpha);
    put<std::uint32_t>(buf, std::uint32_t(cfg.conv_k));
    for (const auto& r : param_refs())
        for (std::size_t i = 0; i < r.n; ++i) put_f64(buf, r.p[i]);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(buf.data(), std::streamsize(buf.size()));
}

Model Model::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    if (buf.size() < 6 || buf.compare(0, 4, "HQMV") != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    std::size_t off = 4;
    const auto version = get<std::uint16_t>(buf, off);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " +
                                 std::to_string(version));
    ModelConfig cfg;
    cfg.H = get<std::uint16_t>(buf, off);
    cfg.W = get<std::uint16_t>(buf, off);
    cfg.patch = get<std::uint32_t>(buf, off);
    cfg.D = get<std::uint32_t>(buf, off);
    cfg.n_blocks = get<std::uint32_t>(buf, off);
    cfg.N = get<std::uint32_t>(buf, off);
    cfg.use_qca = buf[off++] != 0;
    cfg.n_qubits = get<std::uint32_t>(buf, off);
    cfg.qca_layers = get<std::uint32_t>(buf, off);
    cfg.use_lora = buf[off++] != 0;
    cfg.lora_rank = get<std::uint32_t>(buf, off);
    cfg.lora_alpha = get_f64(buf, off);
    cfg.conv_k = get<std::uint32_t>(buf, off);

    Model m = Model::build(cfg, 0);
    for (const auto& r : m.param_refs()) {
        if (off + 8 * r.n > buf.size())
            throw std::runtime_error("checkpoint: truncated parameters in " + path);
        for (std::size_t i = 0; i < r.n; ++i) r.p[i] = get_f64(buf, off);
    }
    if (off != buf.size())
        throw std::runtime_error("checkpoint: trailing bytes in " + path);
    return m;
}

}  // namespace hqmv::harness
