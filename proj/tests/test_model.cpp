#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "salsa/model.hpp"

using namespace salsa;
using namespace salsa::model;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.latent = 8;
    cfg.max_len = 16;
    cfg.ff_mult = 2;
    cfg.seed = 7;
    return cfg;
}

std::vector<AnchorGroup> toy_groups() {
    return {
        {"CCO", {"CCN", "CCC", "CC=O"}},
        {"c1ccccc1", {"Cc1ccccc1", "c1ccncc1"}},
        {"CC(C)O", {"CC(C)N", "CC(C)C"}},
    };
}

}  // namespace

TEST_CASE("encode outputs unit-norm rows") {
    SalsaNet net(tiny_config());
    auto batch = assemble_batch(toy_groups());
    Mat z = net.encode(batch);
    REQUIRE(z.rows() == batch.rows);
    for (Eigen::Index r = 0; r < z.rows(); ++r)
        REQUIRE(std::abs(z.row(r).norm() - 1.0) < 1e-6);
}

TEST_CASE("duplicate rows encode to identical codes") {
    SalsaNet net(tiny_config());
    Mat z = net.encode(std::vector<std::string>{"CCO", "CCO", "CCN"});
    REQUIRE((z.row(0) - z.row(1)).norm() == 0.0);
    REQUIRE((z.row(0) - z.row(2)).norm() > 0.0);
}

TEST_CASE("hand-traced pooling: pass-through encoder pools the shared embedding") {
    ModelConfig cfg = tiny_config();
    cfg.hidden = 8;
    cfg.latent = 8;  // identity projection possible
    cfg.heads = 2;
    SalsaNet net(cfg);

    // Zero the residual branches so every layer is an identity map, zero the
    // positional table, make every token embed to the same zero-mean row and
    // set the pooling projection to the identity.
    for (auto& l : net.enc) {
        l.attn.wo.w.value.setZero();
        l.attn.wo.b.value.setZero();
        l.ff.fc2.w.value.setZero();
        l.ff.fc2.b.value.setZero();
    }
    net.pos_enc.setZero();
    Eigen::RowVectorXd c(8);
    c << 1.0, -1.0, 2.0, -2.0, 0.5, -0.5, 3.0, -3.0;  // zero mean
    for (Eigen::Index r = 0; r < net.tok_emb.value.rows(); ++r) net.tok_emb.value.row(r) = c;
    net.pool.w.value = Mat::Identity(8, 8);
    net.pool.b.value.setZero();

    Mat z = net.encode(std::vector<std::string>{"CCO", "c1ccccc1"});
    Eigen::RowVectorXd expect = c / c.norm();
    for (Eigen::Index r = 0; r < z.rows(); ++r)
        REQUIRE((z.row(r) - expect).norm() < 1e-9);
}

TEST_CASE("decoder causality is exact") {
    SalsaNet net(tiny_config());
    auto batch = inference_batch({"CC(C)Cl"});
    Mat z = net.encode(batch);
    DecodeTrace t1, t2;
    Mat logits1 = net.decode_forward(z, batch, t1);

    // Perturb the decoder input token at position t; logits rows before t
    // must be bitwise identical.
    const int t = 3;
    TrainingBatch perturbed = batch;
    perturbed.ids[static_cast<std::size_t>(t)] = *smiles::Vocabulary::instance().id_of("N");
    Mat logits2 = net.decode_forward(z, perturbed, t2);
    for (int row = 0; row < t; ++row)
        REQUIRE((logits1.row(row) - logits2.row(row)).norm() == 0.0);
    REQUIRE((logits1.row(t) - logits2.row(t)).norm() > 0.0);
}

TEST_CASE("decoder softmax rows are proper distributions") {
    SalsaNet net(tiny_config());
    auto batch = inference_batch({"CCO", "CCCl"});
    Mat z = net.encode(batch);
    DecodeTrace t;
    Mat logits = net.decode_forward(z, batch, t);
    REQUIRE(logits.allFinite());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        double mx = logits.row(r).maxCoeff();
        double sum = (logits.row(r).array() - mx).exp().sum();
        Eigen::ArrayXd p = (logits.row(r).array() - mx).exp() / sum;
        REQUIRE(std::abs(p.sum() - 1.0) < 1e-6);
    }
}

TEST_CASE("supcon loss closed forms") {
    // One anchor with one identical positive: single-term softmax, loss 0.
    Mat z1(2, 3);
    z1 << 1, 0, 0, 1, 0, 0;
    double l0 = supcon_loss(z1, {0, 0}, {1, 0}, 1.0);
    REQUIRE(l0 == Catch::Approx(0.0).margin(1e-12));

    // Anchor e1, positive e1, negative -e1 at tau = 1:
    // -log(e / (e + e^-1)) = 0.126928...
    Mat z2(3, 3);
    z2 << 1, 0, 0, 1, 0, 0, -1, 0, 0;
    double l1 = supcon_loss(z2, {0, 0, 1}, {1, 0, 0}, 1.0);
    REQUIRE(l1 == Catch::Approx(0.1269280110429725).margin(1e-9));

    // Permuting rows (with labels) leaves the loss unchanged.
    Mat z3(3, 3);
    z3 << -1, 0, 0, 1, 0, 0, 1, 0, 0;
    double l2 = supcon_loss(z3, {1, 0, 0}, {0, 0, 1}, 1.0);
    REQUIRE(l2 == Catch::Approx(l1).margin(1e-12));
}

TEST_CASE("supcon loss rejects anchors without positives") {
    Mat z(2, 2);
    z << 1, 0, 0, 1;
    REQUIRE_THROWS_AS(supcon_loss(z, {0, 1}, {1, 1}, 1.0), DataError);
}

TEST_CASE("supcon inner terms keep the loss non-negative in batch form") {
    // P(i) subset of A(i) makes each softmax ratio <= 1.
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        Mat z(6, 4);
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
            for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = rng.normal();
            z.row(r) /= z.row(r).norm();
        }
        double l = supcon_loss(z, {0, 0, 0, 1, 1, 1}, {1, 0, 0, 1, 0, 0}, 0.7);
        REQUIRE(l >= 0.0);
    }
}

TEST_CASE("reconstruction loss closed forms") {
    // One sequence [<s> C </s>] padded to length 4: two target positions.
    TrainingBatch b;
    b.rows = 1;
    b.len = 4;
    b.ids = {smiles::kStartId, *smiles::Vocabulary::instance().id_of("C"), smiles::kEndId,
             smiles::kPadId};
    b.lengths = {3};
    b.anchor_slot = {0};
    b.is_anchor = {1};

    Mat uniform = Mat::Zero(3, smiles::kVocabSize);
    REQUIRE(reconstruction_loss(uniform, b) ==
            Catch::Approx(std::log(39.0)).margin(1e-9));

    Mat perfect = Mat::Zero(3, smiles::kVocabSize);
    perfect(0, b.ids[1]) = 60.0;
    perfect(1, b.ids[2]) = 60.0;
    REQUIRE(reconstruction_loss(perfect, b) == Catch::Approx(0.0).margin(1e-12));

    // Doubling the PAD tail changes nothing.
    TrainingBatch padded = b;
    padded.len = 8;
    padded.ids = {b.ids[0], b.ids[1], b.ids[2], 0, 0, 0, 0, 0};
    Mat uniform2 = Mat::Zero(7, smiles::kVocabSize);
    REQUIRE(reconstruction_loss(uniform2, padded) ==
            Catch::Approx(std::log(39.0)).margin(1e-12));
}

TEST_CASE("combined loss arithmetic") {
    REQUIRE(combined_loss(2.0, 4.0, 0.0) == 4.0);
    REQUIRE(combined_loss(2.0, 4.0, 1.0) == 2.0);
    REQUIRE(combined_loss(2.0, 4.0, 0.5) == 3.0);
}

TEST_CASE("gradient check against finite differences") {
    REQUIRE(gradient_check(0.0) <= 1e-5);
    REQUIRE(gradient_check(0.5) <= 1e-5);
    REQUIRE(gradient_check(1.0) <= 1e-5);
}

TEST_CASE("train_step reduces reconstruction loss on a repeated batch") {
    ModelConfig cfg = tiny_config();
    cfg.lambda = 0.0;
    SalsaNet net(cfg);
    TrainOptions opt;
    opt.lr = 1e-3;
    auto batch = assemble_batch(toy_groups());
    AdamState adam;
    std::vector<double> losses;
    for (int step = 0; step < 200; ++step)
        losses.push_back(train_step(net, batch, adam, opt).reconstruction);
    int decreases = 0;
    for (std::size_t i = 1; i < losses.size(); ++i) decreases += (losses[i] < losses[i - 1]);
    REQUIRE(decreases >= 180);  // >= 90% of consecutive pairs
    REQUIRE(losses.back() < losses.front() * 0.5);
}

TEST_CASE("lambda 0 applies no contrastive gradient") {
    ModelConfig cfg = tiny_config();
    cfg.lambda = 0.0;
    auto batch = assemble_batch(toy_groups());

    // Scrambling the anchor membership changes the contrastive loss but, at
    // lambda 0, must not change any gradient.
    SalsaNet net_a(cfg);
    StepStats sa = net_a.forward_backward(batch);
    std::vector<Mat> grads_a;
    for (Tensor* t : net_a.parameters()) grads_a.push_back(t->grad);

    // Swap one mutant between the first two groups (rows 1 and 5); every
    // anchor keeps at least one positive, but the positive sets change.
    TrainingBatch scrambled = batch;
    std::swap(scrambled.anchor_slot[1], scrambled.anchor_slot[5]);
    SalsaNet net_b(cfg);
    StepStats sb = net_b.forward_backward(scrambled);

    REQUIRE(sa.contrastive != sb.contrastive);  // the report sees the scramble
    auto params_b = net_b.parameters();
    for (std::size_t i = 0; i < params_b.size(); ++i)
        REQUIRE((grads_a[i] - params_b[i]->grad).norm() == 0.0);
}

TEST_CASE("training is bit-reproducible under a fixed seed") {
    auto run = [] {
        ModelConfig cfg = tiny_config();
        SalsaNet net(cfg);
        TrainOptions opt;
        opt.steps = 5;
        opt.batch_anchors = 2;
        std::vector<double> losses;
        train(net, toy_groups(), opt,
              [&](int, const StepStats& s) { losses.push_back(s.loss); });
        return losses;
    };
    auto a = run();
    auto b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
}

TEST_CASE("generation is deterministic") {
    SalsaNet net(tiny_config());
    Mat z = net.encode(std::vector<std::string>{"CCO"});
    Rng r1(42), r2(42), r3(43);
    auto g1 = net.generate(z.row(0).transpose(), true, 1.0, r1);
    auto g2 = net.generate(z.row(0).transpose(), true, 1.0, r2);
    REQUIRE(g1 == g2);
    REQUIRE(g1.front() == smiles::kStartId);

    auto s1 = net.generate(z.row(0).transpose(), false, 1.0, r1);
    Rng r4(42);
    r4.next_u64();  // desync on purpose? no: fresh stream, same seed
    Rng r5(42);
    auto s2 = net.generate(z.row(0).transpose(), false, 1.0, r5);
    // Same rng state streams produce the same sample only when consumed from
    // the same point; fresh equal seeds match.
    Rng r6(42);
    auto s3 = net.generate(z.row(0).transpose(), false, 1.0, r6);
    REQUIRE(s2 == s3);
}

TEST_CASE("encode is permutation equivariant over batch rows") {
    SalsaNet net(tiny_config());
    auto groups = toy_groups();
    auto batch = assemble_batch(groups);
    Mat z = net.encode(batch);
    double loss = supcon_loss(z, batch.anchor_slot, batch.is_anchor, 0.7);

    // Reverse the rows.
    TrainingBatch rev = batch;
    for (int r = 0; r < batch.rows; ++r) {
        int src = batch.rows - 1 - r;
        rev.lengths[static_cast<std::size_t>(r)] = batch.lengths[static_cast<std::size_t>(src)];
        rev.anchor_slot[static_cast<std::size_t>(r)] =
            batch.anchor_slot[static_cast<std::size_t>(src)];
        rev.is_anchor[static_cast<std::size_t>(r)] =
            batch.is_anchor[static_cast<std::size_t>(src)];
        for (int t = 0; t < batch.len; ++t)
            rev.ids[static_cast<std::size_t>(r) * static_cast<std::size_t>(batch.len) +
                    static_cast<std::size_t>(t)] = batch.id_at(src, t);
    }
    Mat zr = net.encode(rev);
    for (int r = 0; r < batch.rows; ++r)
        REQUIRE((zr.row(r) - z.row(batch.rows - 1 - r)).norm() < 1e-12);
    double loss_r = supcon_loss(zr, rev.anchor_slot, rev.is_anchor, 0.7);
    REQUIRE(loss_r == Catch::Approx(loss).margin(1e-9));
}
