#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "salsa/core.hpp"
#include "salsa/nn.hpp"
#include "salsa/smiles.hpp"

namespace salsa::model {

using nn::Mat;
using nn::RowVec;
using nn::Tensor;
using nn::Vec;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

// Desk-scale defaults; paper-scale reference is 8 layers, hidden 512,
// 8 heads, latent 32 with temperature 0.7.
struct ModelConfig {
    int layers = 2;
    int hidden = 64;
    int heads = 4;
    int latent = 16;
    int max_len = 32;
    int vocab = smiles::kVocabSize;
    int ff_mult = 4;
    double temperature = 0.7;
    double lambda = 0.5;  // 0 = Naive, 1 = Contra, 0.5 = SALSA
    double dropout = 0.0;
    std::uint64_t seed = 1;

    void check() const {
        if (layers < 1) throw UsageError("ModelConfig: layers must be >= 1");
        if (hidden < 1 || heads < 1 || hidden % heads != 0)
            throw UsageError("ModelConfig: hidden must be divisible by heads");
        if (latent < 1) throw UsageError("ModelConfig: latent must be >= 1");
        if (max_len < 4 || max_len > smiles::kMaxTokenPositions)
            throw UsageError("ModelConfig: max_len outside [4, 112]");
        if (vocab != smiles::kVocabSize)
            throw UsageError("ModelConfig: vocab must be 39");
        if (lambda < 0.0 || lambda > 1.0) throw UsageError("ModelConfig: lambda outside [0,1]");
        if (temperature <= 0.0) throw UsageError("ModelConfig: temperature must be positive");
        if (dropout < 0.0 || dropout >= 1.0) throw UsageError("ModelConfig: dropout outside [0,1)");
        if (ff_mult < 1) throw UsageError("ModelConfig: ff_mult must be >= 1");
    }

    std::string model_tag() const {
        std::string base = lambda == 0.0 ? "naive" : (lambda == 1.0 ? "contra" : "salsa");
        return base + "-" + std::to_string(latent);
    }
};

struct TrainOptions {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip = 1.0;  // global grad-norm clip; 0 disables
    int steps = 2000;
    int batch_anchors = 8;  // anchors per batch, each with its positive set
    std::uint64_t seed = 1;
};

// ---------------------------------------------------------------------------
// Token batches
// ---------------------------------------------------------------------------

// Rows are whole sequences (START ... END PAD*), padded to a common length.
// anchor_slot groups rows into anchors with their positive sets.
struct TrainingBatch {
    int rows = 0;
    int len = 0;
    std::vector<int> ids;         // rows*len
    std::vector<int> lengths;     // true length per row (incl START/END)
    std::vector<int> anchor_slot; // group index per row; -1 for plain inference
    std::vector<char> is_anchor;

    int id_at(int r, int t) const {
        return ids[static_cast<std::size_t>(r) * static_cast<std::size_t>(len) +
                   static_cast<std::size_t>(t)];
    }

    void check(const ModelConfig& cfg) const {
        if (rows <= 0) throw DataError("TrainingBatch: empty");
        if (len > cfg.max_len) throw DataError("TrainingBatch: sequence longer than max_len");
        for (int id : ids)
            if (id < 0 || id >= cfg.vocab) throw DataError("TrainingBatch: token id out of range");
        for (int r = 0; r < rows; ++r) {
            if (lengths[static_cast<std::size_t>(r)] < 2 ||
                lengths[static_cast<std::size_t>(r)] > len)
                throw DataError("TrainingBatch: bad row length");
        }
    }
};

// Anchor together with its positive set, as canonical SMILES.
struct AnchorGroup {
    std::string anchor;
    std::vector<std::string> positives;
};

inline TrainingBatch assemble_batch(const std::vector<AnchorGroup>& groups) {
    TrainingBatch b;
    std::vector<smiles::TokenSequence> seqs;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].positives.empty())
            throw DataError("assemble_batch: anchor without positives");
        seqs.push_back(smiles::tokenize(groups[g].anchor));
        b.anchor_slot.push_back(static_cast<int>(g));
        b.is_anchor.push_back(1);
        for (const auto& m : groups[g].positives) {
            seqs.push_back(smiles::tokenize(m));
            b.anchor_slot.push_back(static_cast<int>(g));
            b.is_anchor.push_back(0);
        }
    }
    b.rows = static_cast<int>(seqs.size());
    for (const auto& s : seqs) b.len = std::max(b.len, static_cast<int>(s.size()));
    b.ids.assign(static_cast<std::size_t>(b.rows) * static_cast<std::size_t>(b.len),
                 smiles::kPadId);
    for (int r = 0; r < b.rows; ++r) {
        const auto& s = seqs[static_cast<std::size_t>(r)];
        b.lengths.push_back(static_cast<int>(s.size()));
        for (std::size_t t = 0; t < s.size(); ++t)
            b.ids[static_cast<std::size_t>(r) * static_cast<std::size_t>(b.len) + t] = s[t];
    }
    return b;
}

inline TrainingBatch inference_batch(const std::vector<std::string>& smiles_rows) {
    TrainingBatch b;
    std::vector<smiles::TokenSequence> seqs;
    for (const auto& s : smiles_rows) seqs.push_back(smiles::tokenize(s));
    b.rows = static_cast<int>(seqs.size());
    for (const auto& s : seqs) b.len = std::max(b.len, static_cast<int>(s.size()));
    b.ids.assign(static_cast<std::size_t>(b.rows) * static_cast<std::size_t>(b.len),
                 smiles::kPadId);
    for (int r = 0; r < b.rows; ++r) {
        const auto& s = seqs[static_cast<std::size_t>(r)];
        b.lengths.push_back(static_cast<int>(s.size()));
        b.anchor_slot.push_back(-1);
        b.is_anchor.push_back(0);
        for (std::size_t t = 0; t < s.size(); ++t)
            b.ids[static_cast<std::size_t>(r) * static_cast<std::size_t>(b.len) + t] = s[t];
    }
    return b;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Supervised contrastive loss over unit-norm codes (sum over anchors; the
// anchor's positives are its in-batch mutants, every other row is a
// negative). Optionally accumulates dL/dz into *dz.
inline double supcon_loss(const Mat& z, const std::vector<int>& anchor_slot,
                          const std::vector<char>& is_anchor, double temperature,
                          Mat* dz = nullptr, double weight = 1.0) {
    const auto n = z.rows();
    if (n < 2) throw DataError("supcon_loss: need at least two rows");
    Mat sims = z * z.transpose() / temperature;

    Mat g = Mat::Zero(n, n);  // dL/d sims
    double loss = 0.0;
    bool any_anchor = false;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!is_anchor[static_cast<std::size_t>(i)]) continue;
        any_anchor = true;
        std::vector<Eigen::Index> positives;
        for (Eigen::Index p = 0; p < n; ++p)
            if (p != i && !is_anchor[static_cast<std::size_t>(p)] &&
                anchor_slot[static_cast<std::size_t>(p)] ==
                    anchor_slot[static_cast<std::size_t>(i)])
                positives.push_back(p);
        if (positives.empty()) throw DataError("supcon_loss: anchor with empty positive set");

        // log-sum-exp over all rows a != i, max-subtracted.
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index a = 0; a < n; ++a)
            if (a != i) mx = std::max(mx, sims(i, a));
        double lse = 0.0;
        for (Eigen::Index a = 0; a < n; ++a)
            if (a != i) lse += std::exp(sims(i, a) - mx);
        double log_denom = mx + std::log(lse);

        const double inv_p = 1.0 / static_cast<double>(positives.size());
        for (Eigen::Index p : positives) {
            loss += -(sims(i, p) - log_denom) * inv_p;
            g(i, p) -= inv_p;
        }
        for (Eigen::Index a = 0; a < n; ++a)
            if (a != i) g(i, a) += std::exp(sims(i, a) - log_denom);
    }
    if (!any_anchor) throw DataError("supcon_loss: batch has no anchor rows");

    if (dz) {
        dz->resize(z.rows(), z.cols());
        dz->noalias() = (g + g.transpose()) * z * (weight / temperature);
    }
    return loss;
}

// Causally-masked reconstruction loss: per-sequence mean of
// -log p(s_t | z, s_<t) over non-pad targets (END included), averaged over
// the batch. logits rows follow the decoder layout (rows*(len-1), vocab).
inline double reconstruction_loss(const Mat& logits, const TrainingBatch& batch,
                                  Mat* dlogits = nullptr, double weight = 1.0) {
    const int ld = batch.len - 1;
    if (logits.rows() != static_cast<Eigen::Index>(batch.rows) * ld)
        throw DataError("reconstruction_loss: logits shape mismatch");
    if (dlogits) dlogits->setZero(logits.rows(), logits.cols());

    double total = 0.0;
    for (int r = 0; r < batch.rows; ++r) {
        const int targets = batch.lengths[static_cast<std::size_t>(r)] - 1;
        double seq_loss = 0.0;
        for (int t = 0; t < targets; ++t) {
            Eigen::Index row = static_cast<Eigen::Index>(r) * ld + t;
            int target = batch.id_at(r, t + 1);
            double mx = logits.row(row).maxCoeff();
            RowVec ex = (logits.row(row).array() - mx).exp();
            double denom = ex.sum();
            double logp = logits(row, target) - mx - std::log(denom);
            seq_loss -= logp;
            if (dlogits) {
                double scale = weight / (static_cast<double>(targets) * batch.rows);
                dlogits->row(row) += (ex / denom) * scale;
                (*dlogits)(row, target) -= scale;
            }
        }
        total += seq_loss / targets;
    }
    return total / batch.rows;
}

inline double combined_loss(double contrastive, double reconstruction, double lambda) {
    return lambda * contrastive + (1.0 - lambda) * reconstruction;
}

// ---------------------------------------------------------------------------
// The network
// ---------------------------------------------------------------------------

struct EncoderLayer {
    nn::LayerNorm ln1;
    nn::MultiHeadAttention attn;
    nn::LayerNorm ln2;
    nn::FeedForward ff;
};

struct EncoderLayerTrace {
    nn::LayerNormTrace ln1;
    nn::AttentionTrace attn;
    nn::LayerNormTrace ln2;
    nn::FeedForwardTrace ff;
};

struct DecoderLayer {
    nn::LayerNorm ln1;
    nn::MultiHeadAttention self_attn;
    nn::LayerNorm ln2;
    nn::MultiHeadAttention cross_attn;
    nn::LayerNorm ln3;
    nn::FeedForward ff;
};

struct DecoderLayerTrace {
    nn::LayerNormTrace ln1;
    nn::AttentionTrace self_attn;
    nn::LayerNormTrace ln2;
    nn::AttentionTrace cross_attn;
    nn::LayerNormTrace ln3;
    nn::FeedForwardTrace ff;
};

struct EncodeTrace {
    Mat x0;
    std::vector<EncoderLayerTrace> layers;
    nn::LayerNormTrace final_ln;
    Mat xf;      // final encoder states
    Mat pooled;  // B x H masked means
    Mat pool_x;  // cache for the pooling projection
    Mat u;       // B x S pre-normalization
    Vec u_norm;
    Mat z;       // B x S unit rows
};

struct DecodeTrace {
    Mat up_x;      // cache for the upsample projection
    Mat mem;       // (B*max_len) x H memory
    Mat y0;
    std::vector<DecoderLayerTrace> layers;
    nn::LayerNormTrace final_ln;
    Mat yf;
    Mat out_x;     // cache for the output projection
    std::vector<int> dec_ids;  // rows*(len-1)
};

struct StepStats {
    double loss = 0.0;
    double contrastive = 0.0;
    double reconstruction = 0.0;
    double grad_norm = 0.0;
};

class SalsaNet {
  public:
    ModelConfig cfg;
    Tensor tok_emb;  // vocab x H, shared by encoder and decoder inputs
    std::vector<EncoderLayer> enc;
    nn::LayerNorm enc_final;
    nn::Linear pool;      // H -> S
    nn::Linear upsample;  // S -> max_len*H
    std::vector<DecoderLayer> dec;
    nn::LayerNorm dec_final;
    nn::Linear out_proj;  // H -> vocab
    Mat pos_enc;          // buffer, not a parameter

    explicit SalsaNet(ModelConfig config) : cfg(config) {
        cfg.check();
        Rng rng(cfg.seed, /*stream=*/0x6d6f64656cULL);
        tok_emb.name = "tok_emb";
        tok_emb.value.resize(cfg.vocab, cfg.hidden);
        nn::init_glorot(tok_emb, rng);
        for (int l = 0; l < cfg.layers; ++l) {
            std::string p = "enc." + std::to_string(l);
            enc.push_back({nn::LayerNorm(p + ".ln1", cfg.hidden),
                           nn::MultiHeadAttention(p + ".attn", cfg.hidden, cfg.heads, rng),
                           nn::LayerNorm(p + ".ln2", cfg.hidden),
                           nn::FeedForward(p + ".ff", cfg.hidden,
                                           cfg.hidden * cfg.ff_mult, rng)});
        }
        enc_final = nn::LayerNorm("enc.final_ln", cfg.hidden);
        pool = nn::Linear("pool", cfg.hidden, cfg.latent, rng);
        upsample = nn::Linear("upsample", cfg.latent,
                              static_cast<Eigen::Index>(cfg.max_len) * cfg.hidden, rng);
        for (int l = 0; l < cfg.layers; ++l) {
            std::string p = "dec." + std::to_string(l);
            dec.push_back({nn::LayerNorm(p + ".ln1", cfg.hidden),
                           nn::MultiHeadAttention(p + ".self", cfg.hidden, cfg.heads, rng),
                           nn::LayerNorm(p + ".ln2", cfg.hidden),
                           nn::MultiHeadAttention(p + ".cross", cfg.hidden, cfg.heads, rng),
                           nn::LayerNorm(p + ".ln3", cfg.hidden),
                           nn::FeedForward(p + ".ff", cfg.hidden,
                                           cfg.hidden * cfg.ff_mult, rng)});
        }
        dec_final = nn::LayerNorm("dec.final_ln", cfg.hidden);
        out_proj = nn::Linear("out", cfg.hidden, cfg.vocab, rng);
        pos_enc = nn::sinusoidal_positions(cfg.max_len, cfg.hidden);
    }

    std::vector<Tensor*> parameters() {
        std::vector<Tensor*> out;
        out.push_back(&tok_emb);
        for (auto& l : enc) {
            l.ln1.collect(out);
            l.attn.collect(out);
            l.ln2.collect(out);
            l.ff.collect(out);
        }
        enc_final.collect(out);
        pool.collect(out);
        upsample.collect(out);
        for (auto& l : dec) {
            l.ln1.collect(out);
            l.self_attn.collect(out);
            l.ln2.collect(out);
            l.cross_attn.collect(out);
            l.ln3.collect(out);
            l.ff.collect(out);
        }
        dec_final.collect(out);
        out_proj.collect(out);
        return out;
    }

    void zero_grads() {
        for (Tensor* t : parameters()) t->zero_grad();
    }

    // ---- encoder -----------------------------------------------------------

    // Bidirectional encoder over the padding mask, masked mean pooling,
    // projection to the latent space and L2 normalization. Rows of the
    // returned matrix live on the unit hypersphere.
    Mat encode_forward(const TrainingBatch& batch, EncodeTrace& t) const {
        batch.check(cfg);
        const int B = batch.rows, L = batch.len, H = cfg.hidden;
        t.x0.resize(static_cast<Eigen::Index>(B) * L, H);
        for (int r = 0; r < B; ++r)
            for (int p = 0; p < L; ++p)
                t.x0.row(static_cast<Eigen::Index>(r) * L + p) =
                    tok_emb.value.row(batch.id_at(r, p)) + pos_enc.row(p);

        nn::AttentionMask mask{&batch.lengths, /*causal=*/false};
        Mat x = t.x0;
        t.layers.resize(enc.size());
        for (std::size_t l = 0; l < enc.size(); ++l) {
            auto& lt = t.layers[l];
            Mat a = enc[l].ln1.forward(x, lt.ln1);
            Mat sa = enc[l].attn.forward(a, a, B, L, L, mask, lt.attn);
            x += sa;
            Mat f = enc[l].ln2.forward(x, lt.ln2);
            Mat ff = enc[l].ff.forward(f, lt.ff);
            x += ff;
        }
        t.xf = enc_final.forward(x, t.final_ln);

        t.pooled.setZero(B, H);
        for (int r = 0; r < B; ++r) {
            int len = batch.lengths[static_cast<std::size_t>(r)];
            for (int p = 0; p < len; ++p)
                t.pooled.row(r) += t.xf.row(static_cast<Eigen::Index>(r) * L + p);
            t.pooled.row(r) /= static_cast<double>(len);
        }
        t.u = pool.forward(t.pooled, t.pool_x);
        t.u_norm.resize(B);
        t.z.resize(B, cfg.latent);
        for (int r = 0; r < B; ++r) {
            double nrm = t.u.row(r).norm();
            if (nrm < 1e-12) throw NumericError("encode: zero-norm latent");
            t.u_norm(r) = nrm;
            t.z.row(r) = t.u.row(r) / nrm;
        }
        return t.z;
    }

    // Backward from dL/dz through pooling and the encoder stack; accumulates
    // parameter gradients.
    void encode_backward(const TrainingBatch& batch, const EncodeTrace& t, const Mat& dz) {
        const int B = batch.rows, L = batch.len;
        Mat du(B, cfg.latent);
        for (int r = 0; r < B; ++r) {
            double dot = t.z.row(r).dot(dz.row(r));
            du.row(r) = (dz.row(r) - t.z.row(r) * dot) / t.u_norm(r);
        }
        Mat dpooled = pool.backward(du, t.pool_x);
        Mat dx = Mat::Zero(static_cast<Eigen::Index>(B) * L, cfg.hidden);
        for (int r = 0; r < B; ++r) {
            int len = batch.lengths[static_cast<std::size_t>(r)];
            for (int p = 0; p < len; ++p)
                dx.row(static_cast<Eigen::Index>(r) * L + p) =
                    dpooled.row(r) / static_cast<double>(len);
        }
        dx = enc_final.backward(dx, t.final_ln);
        for (std::size_t l = enc.size(); l-- > 0;) {
            auto& lt = t.layers[l];
            Mat dff_in = enc[l].ff.backward(dx, lt.ff);
            dx += enc[l].ln2.backward(dff_in, lt.ln2);
            auto [dattn_q, dattn_kv] = enc[l].attn.backward(dx, lt.attn);
            dx += enc[l].ln1.backward(dattn_q + dattn_kv, lt.ln1);
        }
        for (int r = 0; r < B; ++r)
            for (int p = 0; p < L; ++p)
                tok_emb.grad.row(batch.id_at(r, p)) +=
                    dx.row(static_cast<Eigen::Index>(r) * L + p);
    }

    // ---- decoder -----------------------------------------------------------

    // Upsample memory injection plus causally masked decoding; logits at
    // position t depend only on z and tokens strictly before t.
    Mat decode_forward(const Mat& z, const TrainingBatch& batch, DecodeTrace& t) const {
        const int B = batch.rows, Ld = batch.len - 1, H = cfg.hidden, Lm = cfg.max_len;
        if (z.rows() != B || z.cols() != cfg.latent)
            throw DataError("decode_forward: latent shape mismatch");

        Mat mem_flat = upsample.forward(z, t.up_x);  // B x (Lm*H)
        t.mem.resize(static_cast<Eigen::Index>(B) * Lm, H);
        for (int r = 0; r < B; ++r)
            for (int p = 0; p < Lm; ++p)
                t.mem.row(static_cast<Eigen::Index>(r) * Lm + p) =
                    mem_flat.row(r).segment(static_cast<Eigen::Index>(p) * H, H);

        t.dec_ids.resize(static_cast<std::size_t>(B) * static_cast<std::size_t>(Ld));
        t.y0.resize(static_cast<Eigen::Index>(B) * Ld, H);
        for (int r = 0; r < B; ++r)
            for (int p = 0; p < Ld; ++p) {
                int id = batch.id_at(r, p);
                t.dec_ids[static_cast<std::size_t>(r) * static_cast<std::size_t>(Ld) +
                          static_cast<std::size_t>(p)] = id;
                t.y0.row(static_cast<Eigen::Index>(r) * Ld + p) =
                    tok_emb.value.row(id) + pos_enc.row(p);
            }

        nn::AttentionMask causal{nullptr, /*causal=*/true};
        nn::AttentionMask full{nullptr, /*causal=*/false};
        Mat y = t.y0;
        t.layers.resize(dec.size());
        for (std::size_t l = 0; l < dec.size(); ++l) {
            auto& lt = t.layers[l];
            Mat a = dec[l].ln1.forward(y, lt.ln1);
            y += dec[l].self_attn.forward(a, a, B, Ld, Ld, causal, lt.self_attn);
            Mat c = dec[l].ln2.forward(y, lt.ln2);
            y += dec[l].cross_attn.forward(c, t.mem, B, Ld, Lm, full, lt.cross_attn);
            Mat f = dec[l].ln3.forward(y, lt.ln3);
            y += dec[l].ff.forward(f, lt.ff);
        }
        t.yf = dec_final.forward(y, t.final_ln);
        return out_proj.forward(t.yf, t.out_x);
    }

    // Backward from dL/dlogits; returns dL/dz accumulated through the
    // upsample path.
    Mat decode_backward(const TrainingBatch& batch, const DecodeTrace& t, const Mat& dlogits) {
        const int B = batch.rows, Ld = batch.len - 1, H = cfg.hidden, Lm = cfg.max_len;
        Mat dy = out_proj.backward(dlogits, t.out_x);
        dy = dec_final.backward(dy, t.final_ln);
        Mat dmem = Mat::Zero(static_cast<Eigen::Index>(B) * Lm, H);
        for (std::size_t l = dec.size(); l-- > 0;) {
            auto& lt = t.layers[l];
            Mat dff_in = dec[l].ff.backward(dy, lt.ff);
            dy += dec[l].ln3.backward(dff_in, lt.ln3);
            auto [dcross_q, dcross_kv] = dec[l].cross_attn.backward(dy, lt.cross_attn);
            dmem += dcross_kv;
            dy += dec[l].ln2.backward(dcross_q, lt.ln2);
            auto [dself_q, dself_kv] = dec[l].self_attn.backward(dy, lt.self_attn);
            dy += dec[l].ln1.backward(dself_q + dself_kv, lt.ln1);
        }
        for (int r = 0; r < B; ++r)
            for (int p = 0; p < Ld; ++p)
                tok_emb.grad.row(
                    t.dec_ids[static_cast<std::size_t>(r) * static_cast<std::size_t>(Ld) +
                              static_cast<std::size_t>(p)]) +=
                    dy.row(static_cast<Eigen::Index>(r) * Ld + p);

        Mat dmem_flat(B, static_cast<Eigen::Index>(Lm) * H);
        for (int r = 0; r < B; ++r)
            for (int p = 0; p < Lm; ++p)
                dmem_flat.row(r).segment(static_cast<Eigen::Index>(p) * H, H) =
                    dmem.row(static_cast<Eigen::Index>(r) * Lm + p);
        return upsample.backward(dmem_flat, t.up_x);
    }

    // ---- high-level API -----------------------------------------------------

    // Deterministic eval-mode encoding.
    Mat encode(const TrainingBatch& batch) const {
        EncodeTrace t;
        return encode_forward(batch, t);
    }

    Mat encode(const std::vector<std::string>& smiles_rows) const {
        return encode(inference_batch(smiles_rows));
    }

    // Loss forward pass without parameter updates (used by the gradient
    // check and by evaluation).
    StepStats loss_forward(const TrainingBatch& batch) const {
        EncodeTrace et;
        Mat z = encode_forward(batch, et);
        StepStats s;
        s.contrastive =
            supcon_loss(z, batch.anchor_slot, batch.is_anchor, cfg.temperature, nullptr);
        DecodeTrace dt;
        Mat logits = decode_forward(z, batch, dt);
        s.reconstruction = reconstruction_loss(logits, batch, nullptr);
        s.loss = combined_loss(s.contrastive, s.reconstruction, cfg.lambda);
        return s;
    }

    // Full backward pass through both loss branches; gradients are left in
    // the parameter tensors (clipping and updates belong to the optimizer).
    StepStats forward_backward(const TrainingBatch& batch) {
        zero_grads();
        EncodeTrace et;
        Mat z = encode_forward(batch, et);

        StepStats s;
        Mat dz_contrastive;
        s.contrastive = supcon_loss(z, batch.anchor_slot, batch.is_anchor, cfg.temperature,
                                    cfg.lambda > 0.0 ? &dz_contrastive : nullptr, cfg.lambda);

        DecodeTrace dt;
        Mat logits = decode_forward(z, batch, dt);
        Mat dlogits;
        s.reconstruction = reconstruction_loss(
            logits, batch, cfg.lambda < 1.0 ? &dlogits : nullptr, 1.0 - cfg.lambda);
        s.loss = combined_loss(s.contrastive, s.reconstruction, cfg.lambda);
        if (!std::isfinite(s.loss))
            throw NumericError("train: non-finite loss (contrastive=" +
                               std::to_string(s.contrastive) +
                               ", reconstruction=" + std::to_string(s.reconstruction) + ")");

        Mat dz = Mat::Zero(z.rows(), z.cols());
        if (cfg.lambda < 1.0) dz += decode_backward(batch, dt, dlogits);
        if (cfg.lambda > 0.0) dz += dz_contrastive;
        encode_backward(batch, et, dz);
        return s;
    }

    // Autoregressive generation from a latent code. Greedy mode breaks ties
    // toward the lowest token id; sampling uses softmax with temperature.
    smiles::TokenSequence generate(const Vec& z, bool greedy, double temp, Rng& rng) const {
        if (z.size() != cfg.latent) throw DataError("generate: latent size mismatch");
        smiles::TokenSequence ids = {smiles::kStartId};
        while (static_cast<int>(ids.size()) < cfg.max_len) {
            TrainingBatch b;
            b.rows = 1;
            b.len = static_cast<int>(ids.size()) + 1;
            b.ids = ids;
            b.ids.push_back(smiles::kPadId);  // target slot, unused
            b.lengths = {b.len};
            b.anchor_slot = {-1};
            b.is_anchor = {0};
            Mat zrow = z.transpose();
            DecodeTrace dt;
            Mat logits = decode_forward(zrow, b, dt);
            RowVec last = logits.row(logits.rows() - 1);
            int next;
            if (greedy) {
                Eigen::Index arg;
                last.maxCoeff(&arg);
                next = static_cast<int>(arg);
            } else {
                double mx = last.maxCoeff();
                std::vector<double> w(static_cast<std::size_t>(last.size()));
                for (Eigen::Index i = 0; i < last.size(); ++i)
                    w[static_cast<std::size_t>(i)] = std::exp((last(i) - mx) / temp);
                next = static_cast<int>(rng.categorical(w));
            }
            ids.push_back(next);
            if (next == smiles::kEndId) break;
        }
        return ids;
    }

    // Greedy round trip for a batch of sequences; returns per-row exact-match
    // flags (used by the overfit capability check).
    std::vector<char> greedy_reconstruction_matches(const TrainingBatch& batch) const {
        Mat z = encode(batch);
        std::vector<char> out;
        Rng dummy(0);
        for (int r = 0; r < batch.rows; ++r) {
            auto gen = generate(z.row(r).transpose(), /*greedy=*/true, 1.0, dummy);
            int len = batch.lengths[static_cast<std::size_t>(r)];
            bool match = static_cast<int>(gen.size()) == len;
            for (int t = 0; match && t < len; ++t) match = gen[static_cast<std::size_t>(t)] == batch.id_at(r, t);
            out.push_back(match ? 1 : 0);
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Adam optimizer
// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<Mat> m, v;
    long step = 0;

    void ensure(const std::vector<Tensor*>& params) {
        if (!m.empty()) return;
        for (const Tensor* t : params) {
            m.push_back(Mat::Zero(t->value.rows(), t->value.cols()));
            v.push_back(Mat::Zero(t->value.rows(), t->value.cols()));
        }
    }
};

// One optimizer step over gradients already resident in the tensors.
// Returns the pre-clip global gradient norm.
inline double adam_update(std::vector<Tensor*> params, AdamState& state,
                          const TrainOptions& opt) {
    state.ensure(params);
    double sq = 0.0;
    for (const Tensor* t : params) sq += t->grad.squaredNorm();
    double norm = std::sqrt(sq);
    double scale = (opt.clip > 0.0 && norm > opt.clip) ? opt.clip / norm : 1.0;

    ++state.step;
    double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Mat g = params[i]->grad * scale;
        state.m[i] = opt.beta1 * state.m[i] + (1.0 - opt.beta1) * g;
        state.v[i] = opt.beta2 * state.v[i] + (1.0 - opt.beta2) * g.cwiseProduct(g);
        Mat mhat = state.m[i] / bc1;
        Mat vhat = state.v[i] / bc2;
        params[i]->value -=
            opt.lr * mhat.cwiseQuotient(vhat.cwiseSqrt().array().matrix() +
                                         Mat::Constant(vhat.rows(), vhat.cols(), opt.adam_eps));
    }
    return norm;
}

inline StepStats train_step(SalsaNet& net, const TrainingBatch& batch, AdamState& adam,
                            const TrainOptions& opt) {
    StepStats s = net.forward_backward(batch);
    s.grad_norm = adam_update(net.parameters(), adam, opt);
    return s;
}

// ---------------------------------------------------------------------------
// Training loop over anchor groups
// ---------------------------------------------------------------------------

// Deterministic epoch shuffling; anchors are grouped into batches of
// opt.batch_anchors with their positive sets (Fig-3-style multi-mutant
// batches). Groups without positives must be filtered out by the caller.
inline std::vector<StepStats> train(
    SalsaNet& net, const std::vector<AnchorGroup>& groups, const TrainOptions& opt,
    const std::function<void(int, const StepStats&)>& on_step = {}) {
    if (groups.empty()) throw DataError("train: no anchor groups");
    AdamState adam;
    std::vector<StepStats> history;
    std::vector<std::size_t> order(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    int step = 0;
    for (int epoch = 0; step < opt.steps; ++epoch) {
        Rng shuffle_rng(opt.seed, 0x65706f6368ULL + static_cast<std::uint64_t>(epoch));
        shuffle_rng.shuffle(order);
        for (std::size_t at = 0; at < order.size() && step < opt.steps;
             at += static_cast<std::size_t>(opt.batch_anchors)) {
            std::vector<AnchorGroup> chunk;
            for (std::size_t i = at;
                 i < std::min(order.size(), at + static_cast<std::size_t>(opt.batch_anchors));
                 ++i)
                chunk.push_back(groups[order[i]]);
            if (chunk.size() < 2 && groups.size() >= 2) continue;  // need negatives
            StepStats s = train_step(net, assemble_batch(chunk), adam, opt);
            history.push_back(s);
            ++step;
            if (on_step) on_step(step, s);
        }
    }
    return history;
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

// Central finite differences against the analytic gradients of the combined
// loss on a tiny model. Relative error uses |a - n| / max(1e-4, |a| + |n|):
// the floor puts gradients below the h = 1e-5 round-off noise floor
// (~1e-10 absolute) in an absolute-tolerance regime instead of amplifying
// that noise.
inline double gradient_check(double lambda, int min_samples = 200,
                             std::uint64_t seed = 20240817) {
    ModelConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 8;
    cfg.heads = 2;
    cfg.latent = 4;
    cfg.max_len = 10;
    cfg.ff_mult = 2;
    cfg.lambda = lambda;
    cfg.seed = seed;
    SalsaNet net(cfg);

    // Synthetic batch: 2 anchors x (1 + 2 positives), random token bodies.
    Rng rng(seed, 0x67726164ULL);
    std::vector<AnchorGroup> groups;
    auto random_body = [&](int len) {
        std::string s;
        static const std::vector<std::string> alphabet = {"C", "N", "O", "S", "c", "n",
                                                          "(", ")", "1", "=", "Cl"};
        for (int i = 0; i < len; ++i) s += alphabet[rng.index(alphabet.size())];
        return s;
    };
    for (int g = 0; g < 2; ++g) {
        AnchorGroup grp;
        grp.anchor = random_body(4 + static_cast<int>(rng.index(3)));
        grp.positives = {random_body(4 + static_cast<int>(rng.index(3))),
                         random_body(4 + static_cast<int>(rng.index(3)))};
        groups.push_back(grp);
    }
    TrainingBatch batch = assemble_batch(groups);

    net.forward_backward(batch);
    auto params = net.parameters();
    std::vector<Mat> grads;
    for (Tensor* t : params) grads.push_back(t->grad);

    const double h = 1e-5;
    double max_rel = 0.0;
    int samples_per_tensor =
        std::max(1, static_cast<int>((min_samples + params.size() - 1) / params.size()));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor* t = params[pi];
        for (int s = 0; s < samples_per_tensor; ++s) {
            Eigen::Index r = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(t->value.rows())));
            Eigen::Index c = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(t->value.cols())));
            double saved = t->value(r, c);
            t->value(r, c) = saved + h;
            double lp = net.loss_forward(batch).loss;
            t->value(r, c) = saved - h;
            double lm = net.loss_forward(batch).loss;
            t->value(r, c) = saved;
            double numeric = (lp - lm) / (2.0 * h);
            double analytic = grads[pi](r, c);
            double rel = std::abs(analytic - numeric) /
                         std::max(1e-4, std::abs(analytic) + std::abs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace salsa::model
