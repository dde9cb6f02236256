#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

#include "salsa/cli.hpp"

using namespace salsa;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("salsa_test_" + std::to_string(Catch::rngSeed()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

struct CaptureOut {
    std::ostringstream buffer;
    std::streambuf* saved;
    CaptureOut() : saved(std::cout.rdbuf(buffer.rdbuf())) {}
    ~CaptureOut() { std::cout.rdbuf(saved); }
    std::string str() const { return buffer.str(); }
};

}  // namespace

TEST_CASE("cli canon wraps canonicalize") {
    CaptureOut cap;
    REQUIRE(cli::run({"canon", "OCC"}) == 0);
    REQUIRE(cap.str() == smiles::canonicalize("CCO") + "\n");
}

TEST_CASE("cli ged prints the oracle distance") {
    {
        CaptureOut cap;
        REQUIRE(cli::run({"ged", "--max", "3", "CC", "CCO"}) == 0);
        REQUIRE(cap.str() == "1\n");
    }
    {
        CaptureOut cap;
        REQUIRE(cli::run({"ged", "--max", "2", "C", "CCCC"}) == 0);
        REQUIRE(cap.str() == "EXCEEDS\n");
    }
}

TEST_CASE("cli exit codes") {
    CaptureOut cap;
    REQUIRE(cli::run({"no-such-command"}) == cli::kExitUsage);
    REQUIRE(cli::run({"canon", "C((C"}) == cli::kExitData);
    REQUIRE(cli::run({"encode", "--ckpt", "/nonexistent.bin", "--in", "/nonexistent.txt",
                      "--out", "/tmp/never.csv"}) == cli::kExitData);
}

TEST_CASE("gen-dataset is byte-identical under a fixed seed") {
    TempDir dir;
    io::write_file(dir.file("anchors.txt"), "CCO\nCCN\nc1ccccc1\n");
    CaptureOut cap;
    REQUIRE(cli::run({"gen-dataset", "--anchors", dir.file("anchors.txt"), "--k", "5",
                      "--seed", "7", "--out", dir.file("a.jsonl")}) == 0);
    REQUIRE(cli::run({"gen-dataset", "--anchors", dir.file("anchors.txt"), "--k", "5",
                      "--seed", "7", "--out", dir.file("b.jsonl")}) == 0);
    REQUIRE(io::read_file(dir.file("a.jsonl")) == io::read_file(dir.file("b.jsonl")));

    // Worker count must not change the bytes.
    REQUIRE(cli::run({"gen-dataset", "--anchors", dir.file("anchors.txt"), "--k", "5",
                      "--seed", "7", "--out", dir.file("c.jsonl"), "--workers", "2"}) == 0);
    REQUIRE(io::read_file(dir.file("a.jsonl")) == io::read_file(dir.file("c.jsonl")));

    // Different seed changes them.
    REQUIRE(cli::run({"gen-dataset", "--anchors", dir.file("anchors.txt"), "--k", "5",
                      "--seed", "8", "--out", dir.file("d.jsonl")}) == 0);
    REQUIRE(io::read_file(dir.file("a.jsonl")) != io::read_file(dir.file("d.jsonl")));
}

TEST_CASE("dataset records round trip through JSONL") {
    TempDir dir;
    auto dist = mutation::AtomDistribution::uniform();
    Rng rng(3);
    auto anchor = smiles::parse("CCO");
    auto records = mutation::generate_positive_set(anchor, 11, 6, rng, dist);
    io::write_records_jsonl(dir.file("r.jsonl"), records);
    auto back = io::read_records_jsonl(dir.file("r.jsonl"));
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        REQUIRE(back[i].anchor_id == records[i].anchor_id);
        REQUIRE(back[i].mutant_index == records[i].mutant_index);
        REQUIRE(back[i].smiles == records[i].smiles);
        REQUIRE(back[i].ged_nominal == records[i].ged_nominal);
        REQUIRE(back[i].verdict == records[i].verdict);
        REQUIRE(back[i].ops.size() == records[i].ops.size());
        for (std::size_t o = 0; o < records[i].ops.size(); ++o) {
            REQUIRE(back[i].ops[o].kind == records[i].ops[o].kind);
            REQUIRE(back[i].ops[o].site == records[i].ops[o].site);
            REQUIRE(back[i].ops[o].new_element == records[i].ops[o].new_element);
        }
    }
}

TEST_CASE("filter command partitions and reports") {
    TempDir dir;
    // Enough anchors for the covariance fit (>= 11).
    std::string anchors;
    for (const char* s : {"CCO", "CCN", "CCC", "CCCl", "CCF", "CC=O", "CCS", "CC(C)O",
                          "CC(C)N", "CCCC", "CCCO", "c1ccccc1"})
        anchors += std::string(s) + "\n";
    io::write_file(dir.file("anchors.txt"), anchors);
    CaptureOut cap;
    REQUIRE(cli::run({"gen-dataset", "--anchors", dir.file("anchors.txt"), "--k", "6",
                      "--seed", "4", "--out", dir.file("data.jsonl")}) == 0);
    REQUIRE(cli::run({"filter", "--data", dir.file("data.jsonl"), "--out",
                      dir.file("filtered.jsonl")}) == 0);
    auto records = io::read_records_jsonl(dir.file("filtered.jsonl"));
    int verdicts = 0;
    for (const auto& r : records) {
        if (r.mutant_index == 0) {
            REQUIRE(r.verdict == mutation::FilterVerdict::Unverified);
        } else {
            REQUIRE(r.verdict != mutation::FilterVerdict::Unverified);
            ++verdicts;
        }
    }
    REQUIRE(verdicts > 0);

    // threshold 0 marks everything faulty; infinity keeps everything.
    REQUIRE(cli::run({"filter", "--data", dir.file("data.jsonl"), "--out",
                      dir.file("zero.jsonl"), "--threshold", "0"}) == 0);
    for (const auto& r : io::read_records_jsonl(dir.file("zero.jsonl")))
        if (r.mutant_index != 0) REQUIRE(r.verdict == mutation::FilterVerdict::Faulty);
}

TEST_CASE("checkpoint round trip preserves encodings") {
    TempDir dir;
    model::ModelConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.latent = 4;
    cfg.max_len = 16;
    cfg.seed = 99;
    model::SalsaNet net(cfg);
    io::save_checkpoint(dir.file("m.bin"), net);
    auto loaded = io::load_checkpoint(dir.file("m.bin"));
    std::vector<std::string> rows = {"CCO", "c1ccccc1"};
    Eigen::MatrixXd z1 = net.encode(rows);
    Eigen::MatrixXd z2 = loaded.encode(rows);
    REQUIRE((z1 - z2).norm() == 0.0);

    // Corrupted file is a data error.
    io::write_file(dir.file("bad.bin"), "not a checkpoint");
    REQUIRE_THROWS_AS(io::load_checkpoint(dir.file("bad.bin")), DataError);
}

TEST_CASE("model config text round trip") {
    model::ModelConfig cfg;
    cfg.layers = 3;
    cfg.hidden = 48;
    cfg.heads = 6;
    cfg.latent = 12;
    cfg.max_len = 40;
    cfg.temperature = 0.55;
    cfg.lambda = 0.25;
    cfg.seed = 1234567;
    auto back = io::config_from_text(io::config_to_text(cfg));
    REQUIRE(back.layers == cfg.layers);
    REQUIRE(back.hidden == cfg.hidden);
    REQUIRE(back.heads == cfg.heads);
    REQUIRE(back.latent == cfg.latent);
    REQUIRE(back.max_len == cfg.max_len);
    REQUIRE(back.temperature == cfg.temperature);
    REQUIRE(back.lambda == cfg.lambda);
    REQUIRE(back.seed == cfg.seed);
    REQUIRE(io::config_hash(back) == io::config_hash(cfg));
    REQUIRE_THROWS_AS(io::config_from_text("layers = x\n"), DataError);
}

TEST_CASE("codes csv round trip") {
    TempDir dir;
    Eigen::MatrixXd codes(2, 3);
    codes << 0.25, -1.5, 3.0e-7, 1.0 / 3.0, 2.0, -0.125;
    io::write_codes_csv(dir.file("codes.csv"), {"CCO", "CCN"}, codes);
    auto [keys, back] = io::read_codes_csv(dir.file("codes.csv"));
    REQUIRE(keys == std::vector<std::string>{"CCO", "CCN"});
    REQUIRE((codes - back).norm() == 0.0);  // %.17g is lossless for doubles
}

TEST_CASE("train encode generate artifact flow") {
    TempDir dir;
    io::write_file(dir.file("anchors.txt"), "CCO\nCCN\nCCC\nCCCl\n");
    CaptureOut cap;
    REQUIRE(cli::run({"gen-dataset", "--anchors", dir.file("anchors.txt"), "--k", "4",
                      "--seed", "2", "--out", dir.file("data.jsonl")}) == 0);
    REQUIRE(cli::run({"train", "--data", dir.file("data.jsonl"), "--out", dir.file("m.bin"),
                      "--steps", "3", "--layers", "1", "--hidden", "16", "--heads", "2",
                      "--latent", "4", "--max-len", "24", "--batch-anchors", "2", "--seed",
                      "5", "--log-every", "0"}) == 0);
    REQUIRE(fs::exists(dir.file("m.bin")));
    REQUIRE(fs::exists(dir.file("m.bin.manifest.json")));

    io::write_file(dir.file("in.txt"), "CCO\nCCN\n");
    REQUIRE(cli::run({"encode", "--ckpt", dir.file("m.bin"), "--in", dir.file("in.txt"),
                      "--out", dir.file("codes.csv")}) == 0);
    auto [keys, codes] = io::read_codes_csv(dir.file("codes.csv"));
    REQUIRE(keys.size() == 2);
    REQUIRE(codes.cols() == 4);
    for (Eigen::Index r = 0; r < codes.rows(); ++r)
        REQUIRE(std::abs(codes.row(r).norm() - 1.0) < 1e-6);

    REQUIRE(cli::run({"generate", "--ckpt", dir.file("m.bin"), "--codes", dir.file("codes.csv"),
                      "--out", dir.file("gen.csv"), "--mode", "sample", "--n", "3", "--seed",
                      "9"}) == 0);
    auto lines = io::read_lines(dir.file("gen.csv"));
    REQUIRE(lines.size() == 1 + 2 * 3);
    REQUIRE(lines[0] == "key,sample,smiles,parses");
}

TEST_CASE("eval-ged command produces a machine-readable summary") {
    TempDir dir;
    io::write_file(dir.file("anchors.txt"), "CCO\nCCN\nCCC\nCCCl\nCCCC\nCOC\n");
    CaptureOut cap;
    REQUIRE(cli::run({"gen-dataset", "--anchors", dir.file("anchors.txt"), "--k", "3",
                      "--seed", "2", "--out", dir.file("data.jsonl")}) == 0);
    REQUIRE(cli::run({"train", "--data", dir.file("data.jsonl"), "--out", dir.file("m.bin"),
                      "--steps", "2", "--layers", "1", "--hidden", "16", "--heads", "2",
                      "--latent", "4", "--max-len", "24", "--batch-anchors", "3", "--seed",
                      "5", "--log-every", "0"}) == 0);
    REQUIRE(cli::run({"gen-supermutants", "--anchors", dir.file("anchors.txt"), "--n", "4",
                      "--seed", "3", "--out", dir.file("chains.jsonl")}) == 0);
    REQUIRE(cli::run({"eval-ged", "--ckpt", dir.file("m.bin"), "--chains",
                      dir.file("chains.jsonl"), "--out-dir", dir.file("out"), "--tag",
                      "t"}) == 0);
    auto j = nlohmann::json::parse(io::read_file(dir.file("out/report_ged_t.json")));
    REQUIRE(j.contains("model_tag"));
    REQUIRE(j.contains("mean_rho"));
    REQUIRE(j.contains("mean_tau"));
    REQUIRE(j["latent_dim"].get<int>() == 4);
    REQUIRE(j["mean_rho"].get<double>() >= -1.0);
    REQUIRE(j["mean_rho"].get<double>() <= 1.0);
}

TEST_CASE("props command emits the ten-column table") {
    TempDir dir;
    io::write_file(dir.file("in.txt"), "CCO\nc1ccccc1\n");
    CaptureOut cap;
    REQUIRE(cli::run({"props", "--in", dir.file("in.txt"), "--out", dir.file("p.csv")}) == 0);
    auto lines = io::read_lines(dir.file("p.csv"));
    REQUIRE(lines.size() == 3);
    std::string header = "smiles";
    for (const auto& n : descriptors::PropertyVector::names()) header += "," + n;
    REQUIRE(lines[0] == header);
}

TEST_CASE("vocab file round trips with a checksum") {
    TempDir dir;
    CaptureOut cap;
    REQUIRE(cli::run({"vocab", "--out", dir.file("vocab.txt")}) == 0);
    auto lines = io::read_lines(dir.file("vocab.txt"));
    REQUIRE(lines.size() == 39);
    REQUIRE(lines[0] == "<pad>");
    REQUIRE(lines[11] == "Cl");
    io::verify_vocab_file(dir.file("vocab.txt"));
    io::write_file(dir.file("bad.txt"), "x\n");
    REQUIRE_THROWS_AS(io::verify_vocab_file(dir.file("bad.txt")), DataError);
}

TEST_CASE("checkpoints refuse a foreign vocabulary checksum") {
    TempDir dir;
    model::ModelConfig cfg;
    cfg.layers = 1;
    cfg.hidden = 8;
    cfg.heads = 2;
    cfg.latent = 4;
    cfg.max_len = 12;
    model::SalsaNet net(cfg);
    io::save_checkpoint(dir.file("m.bin"), net);
    // Flip one byte inside the stored vocabulary checksum field.
    std::string data = io::read_file(dir.file("m.bin"));
    data[12] = static_cast<char>(data[12] ^ 0x1);
    io::write_file(dir.file("tampered.bin"), data);
    REQUIRE_THROWS_AS(io::load_checkpoint(dir.file("tampered.bin")), DataError);
}
