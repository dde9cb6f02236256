#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "salsa/core.hpp"
#include "salsa/eval.hpp"
#include "salsa/model.hpp"
#include "salsa/mutation.hpp"
#include "salsa/smiles.hpp"

namespace salsa::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Plain files
// ---------------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << contents;
    if (!out) throw DataError("write failed for " + path);
}

// Newline-delimited, UTF-8, no header; blank lines ignored.
inline std::vector<std::string> read_lines(const std::string& path) {
    std::string data = read_file(path);
    std::vector<std::string> out;
    std::string line;
    std::istringstream ss(data);
    while (std::getline(ss, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

inline std::uint64_t file_checksum(const std::string& path) {
    return fnv1a64(read_file(path));
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Vocabulary file (one token per line, line number = id)
// ---------------------------------------------------------------------------

inline void write_vocab_file(const std::string& path) {
    write_file(path, smiles::Vocabulary::instance().file_contents());
}

inline void verify_vocab_file(const std::string& path) {
    if (file_checksum(path) != smiles::Vocabulary::instance().checksum())
        throw DataError("vocabulary file " + path + " does not match the built-in inventory");
}

// ---------------------------------------------------------------------------
// Mutant records (JSON lines)
// ---------------------------------------------------------------------------

inline json op_to_json(const mutation::MutationOp& op) {
    json j;
    j["kind"] = mutation::kind_name(op.kind);
    j["site"] = op.site;
    if (op.new_element)
        j["new_element"] = molgraph::element_symbol(*op.new_element);
    return j;
}

inline mutation::MutationOp op_from_json(const json& j) {
    mutation::MutationOp op;
    auto kind = mutation::kind_from_name(j.at("kind").get<std::string>());
    if (!kind) throw DataError("record: unknown op kind");
    op.kind = *kind;
    op.site = j.at("site").get<int>();
    if (j.contains("new_element")) {
        std::string sym = j.at("new_element").get<std::string>();
        bool found = false;
        for (molgraph::Element e : molgraph::kConcreteElements)
            if (sym == molgraph::element_symbol(e)) {
                op.new_element = e;
                found = true;
            }
        if (!found) throw DataError("record: unknown element " + sym);
    }
    return op;
}

inline json record_to_json(const mutation::MutantRecord& r) {
    json j;
    j["anchor_id"] = r.anchor_id;
    j["j"] = r.mutant_index;
    j["ops"] = json::array();
    for (const auto& op : r.ops) j["ops"].push_back(op_to_json(op));
    j["smiles"] = r.smiles;
    j["ged_nominal"] = r.ged_nominal;
    j["verdict"] = mutation::verdict_name(r.verdict);
    return j;
}

inline mutation::MutantRecord record_from_json(const json& j) {
    mutation::MutantRecord r;
    r.anchor_id = j.at("anchor_id").get<std::int64_t>();
    r.mutant_index = j.at("j").get<int>();
    for (const auto& oj : j.at("ops")) r.ops.push_back(op_from_json(oj));
    r.smiles = j.at("smiles").get<std::string>();
    r.ged_nominal = j.at("ged_nominal").get<int>();
    auto v = mutation::verdict_from_name(j.at("verdict").get<std::string>());
    if (!v) throw DataError("record: unknown verdict");
    r.verdict = *v;
    return r;
}

inline void write_records_jsonl(const std::string& path,
                                const std::vector<mutation::MutantRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += record_to_json(r).dump();
        out += '\n';
    }
    write_file(path, out);
}

inline std::vector<mutation::MutantRecord> read_records_jsonl(const std::string& path) {
    std::vector<mutation::MutantRecord> out;
    for (const auto& line : read_lines(path)) {
        json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded()) throw DataError("malformed JSON line in " + path);
        out.push_back(record_from_json(j));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifests (no timestamps: reruns with equal seed/config are byte-identical)
// ---------------------------------------------------------------------------

struct Manifest {
    std::string command;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
};

inline void write_manifest(const std::string& path, const Manifest& m) {
    json j;
    j["tool"] = "salsa";
    j["version"] = kToolVersion;
    j["command"] = m.command;
    j["seed"] = m.seed;
    j["config_hash"] = m.config_hash;
    j["vocab_checksum"] = hex64(smiles::Vocabulary::instance().checksum());
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    write_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Model config serialization (key = value text)
// ---------------------------------------------------------------------------

inline std::string config_to_text(const model::ModelConfig& c) {
    std::ostringstream ss;
    ss << "layers = " << c.layers << "\n";
    ss << "hidden = " << c.hidden << "\n";
    ss << "heads = " << c.heads << "\n";
    ss << "latent = " << c.latent << "\n";
    ss << "max_len = " << c.max_len << "\n";
    ss << "vocab = " << c.vocab << "\n";
    ss << "ff_mult = " << c.ff_mult << "\n";
    ss << "temperature = " << format_double(c.temperature) << "\n";
    ss << "lambda = " << format_double(c.lambda) << "\n";
    ss << "dropout = " << format_double(c.dropout) << "\n";
    ss << "seed = " << c.seed << "\n";
    return ss.str();
}

inline model::ModelConfig config_from_text(const std::string& text) {
    model::ModelConfig c;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
                s.erase(s.begin());
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
            return s;
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) continue;
        try {
            if (key == "layers") c.layers = std::stoi(value);
            else if (key == "hidden") c.hidden = std::stoi(value);
            else if (key == "heads") c.heads = std::stoi(value);
            else if (key == "latent") c.latent = std::stoi(value);
            else if (key == "max_len") c.max_len = std::stoi(value);
            else if (key == "vocab") c.vocab = std::stoi(value);
            else if (key == "ff_mult") c.ff_mult = std::stoi(value);
            else if (key == "temperature") c.temperature = std::stod(value);
            else if (key == "lambda") c.lambda = std::stod(value);
            else if (key == "dropout") c.dropout = std::stod(value);
            else if (key == "seed") c.seed = std::stoull(value);
            else throw DataError("config: unknown key " + key);
        } catch (const std::invalid_argument&) {
            throw DataError("config: bad value for " + key);
        }
    }
    c.check();
    return c;
}

inline std::string config_hash(const model::ModelConfig& c) {
    return hex64(fnv1a64(config_to_text(c)));
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned binary with config text plus named tensors
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'S', 'L', 'S', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put(std::string& out, const T& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    out.append(p, sizeof(T));
}

template <typename T>
T take(const std::string& data, std::size_t& pos) {
    if (pos + sizeof(T) > data.size()) throw DataError("checkpoint: truncated file");
    T v;
    std::memcpy(&v, data.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

inline void put_string(std::string& out, const std::string& s) {
    put<std::uint64_t>(out, s.size());
    out += s;
}

inline std::string take_string(const std::string& data, std::size_t& pos) {
    auto n = take<std::uint64_t>(data, pos);
    if (pos + n > data.size()) throw DataError("checkpoint: truncated string");
    std::string s = data.substr(pos, n);
    pos += n;
    return s;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, model::SalsaNet& net) {
    std::string out;
    out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::put<std::uint32_t>(out, kCheckpointVersion);
    detail::put<std::uint64_t>(out, smiles::Vocabulary::instance().checksum());
    detail::put_string(out, config_to_text(net.cfg));
    auto params = net.parameters();
    detail::put<std::uint64_t>(out, params.size());
    for (const model::Tensor* t : params) {
        detail::put_string(out, t->name);
        detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(t->value.rows()));
        detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(t->value.cols()));
        for (Eigen::Index c = 0; c < t->value.cols(); ++c)
            for (Eigen::Index r = 0; r < t->value.rows(); ++r)
                detail::put<double>(out, t->value(r, c));
    }
    write_file(path, out);
}

inline model::SalsaNet load_checkpoint(const std::string& path) {
    std::string data = read_file(path);
    std::size_t pos = 0;
    if (data.size() < sizeof(kCheckpointMagic) ||
        std::memcmp(data.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
        throw DataError("checkpoint: bad magic in " + path);
    pos = sizeof(kCheckpointMagic);
    auto version = detail::take<std::uint32_t>(data, pos);
    if (version != kCheckpointVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    auto vocab_checksum = detail::take<std::uint64_t>(data, pos);
    if (vocab_checksum != smiles::Vocabulary::instance().checksum())
        throw DataError("checkpoint: vocabulary checksum mismatch; refusing to mix models "
                        "across vocabularies");
    model::ModelConfig cfg = config_from_text(detail::take_string(data, pos));
    model::SalsaNet net(cfg);
    auto params = net.parameters();
    auto count = detail::take<std::uint64_t>(data, pos);
    if (count != params.size()) throw DataError("checkpoint: tensor count mismatch");
    for (model::Tensor* t : params) {
        std::string name = detail::take_string(data, pos);
        if (name != t->name) throw DataError("checkpoint: tensor order mismatch at " + name);
        auto rows = detail::take<std::uint64_t>(data, pos);
        auto cols = detail::take<std::uint64_t>(data, pos);
        if (rows != static_cast<std::uint64_t>(t->value.rows()) ||
            cols != static_cast<std::uint64_t>(t->value.cols()))
            throw DataError("checkpoint: tensor shape mismatch at " + name);
        for (Eigen::Index c = 0; c < t->value.cols(); ++c)
            for (Eigen::Index r = 0; r < t->value.rows(); ++r)
                t->value(r, c) = detail::take<double>(data, pos);
    }
    return net;
}

// ---------------------------------------------------------------------------
// CSV outputs
// ---------------------------------------------------------------------------

// Latent codes keyed by the input SMILES string.
inline void write_codes_csv(const std::string& path, const std::vector<std::string>& keys,
                            const Eigen::MatrixXd& codes) {
    if (static_cast<Eigen::Index>(keys.size()) != codes.rows())
        throw DataError("write_codes_csv: key/code count mismatch");
    std::ostringstream ss;
    ss << "smiles";
    for (Eigen::Index c = 0; c < codes.cols(); ++c) ss << ",z" << c;
    ss << "\n";
    for (Eigen::Index r = 0; r < codes.rows(); ++r) {
        ss << keys[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < codes.cols(); ++c)
            ss << "," << format_double(codes(r, c));
        ss << "\n";
    }
    write_file(path, ss.str());
}

inline std::pair<std::vector<std::string>, Eigen::MatrixXd> read_codes_csv(
    const std::string& path) {
    auto lines = read_lines(path);
    if (lines.empty()) throw DataError("codes csv empty: " + path);
    std::vector<std::string> keys;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::istringstream ss(lines[i]);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 2) throw DataError("codes csv: malformed row");
        keys.push_back(cells[0]);
        std::vector<double> row;
        for (std::size_t c = 1; c < cells.size(); ++c) row.push_back(std::stod(cells[c]));
        rows.push_back(row);
    }
    Eigen::MatrixXd codes(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.front().size())
            throw DataError("codes csv: ragged rows");
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            codes(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return {keys, codes};
}

// Property table: header row with the 10 names, keyed by canonical SMILES.
inline void write_properties_csv(const std::string& path,
                                 const std::vector<std::string>& canonical,
                                 const std::vector<descriptors::PropertyVector>& props) {
    if (canonical.size() != props.size())
        throw DataError("write_properties_csv: size mismatch");
    std::ostringstream ss;
    ss << "smiles";
    for (const auto& n : descriptors::PropertyVector::names()) ss << "," << n;
    ss << "\n";
    for (std::size_t i = 0; i < props.size(); ++i) {
        ss << canonical[i];
        for (double v : props[i].values()) ss << "," << format_double(v);
        ss << "\n";
    }
    write_file(path, ss.str());
}

inline void write_correlation_report(const std::string& csv_path,
                                     const std::string& json_path,
                                     const eval::CorrelationReport& rep) {
    std::ostringstream ss;
    ss << "anchor_index,rho,tau\n";
    for (std::size_t i = 0; i < rep.rho.size(); ++i)
        ss << i << "," << format_double(rep.rho[i]) << "," << format_double(rep.tau[i])
           << "\n";
    write_file(csv_path, ss.str());

    json j;
    j["model_tag"] = rep.model_tag;
    j["latent_dim"] = rep.latent_dim;
    j["anchors_total"] = rep.anchors_total;
    j["anchors_skipped"] = rep.anchors_skipped;
    j["mean_rho"] = rep.mean_rho;
    j["std_rho"] = rep.std_rho;
    j["mean_tau"] = rep.mean_tau;
    j["std_tau"] = rep.std_tau;
    write_file(json_path, j.dump(2) + "\n");
}

inline void write_interpolation_csv(const std::string& path,
                                    const std::vector<eval::InterpolationResult>& results) {
    std::ostringstream ss;
    ss << "endpoint_a,endpoint_b,modal_interpolant,valid_decodes,total_decodes,"
          "tanimoto_to_a,tanimoto_to_b\n";
    for (const auto& r : results)
        ss << r.endpoint_a << "," << r.endpoint_b << "," << r.modal_interpolant << ","
           << r.valid_decodes << "," << r.total_decodes << ","
           << format_double(r.tanimoto_to_a) << "," << format_double(r.tanimoto_to_b) << "\n";
    write_file(path, ss.str());
}

inline void write_property_report(const std::string& csv_path,
                                  const std::string& projection_path,
                                  const eval::PropertyCorrelationReport& rep) {
    std::ostringstream ss;
    ss << "property,mean_rho,std_error,draws_used\n";
    for (const auto& row : rep.rows)
        ss << row.property << "," << format_double(row.mean_rho) << ","
           << format_double(row.std_error) << "," << row.draws_used << "\n";
    write_file(csv_path, ss.str());

    std::ostringstream pj;
    pj << "smiles,pc1,pc2\n";
    for (Eigen::Index r = 0; r < rep.projection.rows(); ++r)
        pj << rep.projection_smiles[static_cast<std::size_t>(r)] << ","
           << format_double(rep.projection(r, 0)) << "," << format_double(rep.projection(r, 1))
           << "\n";
    write_file(projection_path, pj.str());
}

}  // namespace salsa::io
