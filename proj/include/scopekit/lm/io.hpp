#pragma once

// Binary weight container, little-endian:
//   magic (4 bytes) | u32 version | u64 json_len | json bytes |
//   u64 n_tensors | { u32 name_len | name | u64 rows | u64 cols | doubles row-major }*
// "SKWT" holds full model weights, "SKAD" holds adapter factors. The JSON
// record carries the config so a file is self-describing.

#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "scopekit/core.hpp"
#include "scopekit/lm/lora.hpp"
#include "scopekit/lm/model.hpp"

namespace scopekit::lm {

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
inline void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

inline void write_tensor(std::ostream& os, const std::string& name, const Mat& m) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(os, static_cast<std::uint64_t>(m.rows()));
    write_u64(os, static_cast<std::uint64_t>(m.cols()));
    os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * 8));
}

inline std::pair<std::string, Mat> read_tensor(std::istream& is) {
    std::uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    auto rows = static_cast<Eigen::Index>(read_u64(is));
    auto cols = static_cast<Eigen::Index>(read_u64(is));
    Mat m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * 8));
    if (!is) throw DataError("weight file truncated while reading tensor " + name);
    return {name, std::move(m)};
}

inline void write_container(const std::string& path, const char magic[4], const nlohmann::json& meta,
                            const std::vector<std::pair<std::string, const Mat*>>& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for write: " + path);
    os.write(magic, 4);
    write_u32(os, 1);
    std::string j = meta.dump();
    write_u64(os, j.size());
    os.write(j.data(), static_cast<std::streamsize>(j.size()));
    write_u64(os, tensors.size());
    for (const auto& [name, m] : tensors) write_tensor(os, name, *m);
    if (!os) throw DataError("write failed: " + path);
}

inline std::pair<nlohmann::json, std::map<std::string, Mat>> read_container(const std::string& path,
                                                                            const char magic[4]) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);
    char m[4];
    is.read(m, 4);
    if (!is || std::memcmp(m, magic, 4) != 0) throw DataError("bad magic in " + path);
    std::uint32_t version = read_u32(is);
    if (version != 1) throw DataError("unsupported container version in " + path);
    std::uint64_t jlen = read_u64(is);
    std::string j(jlen, '\0');
    is.read(j.data(), static_cast<std::streamsize>(jlen));
    nlohmann::json meta = nlohmann::json::parse(j);
    std::uint64_t n = read_u64(is);
    std::map<std::string, Mat> tensors;
    for (std::uint64_t i = 0; i < n; ++i) {
        auto [name, t] = read_tensor(is);
        tensors.emplace(std::move(name), std::move(t));
    }
    return {std::move(meta), std::move(tensors)};
}

}  // namespace detail

inline nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"n_layers", c.n_layers}, {"d_model", c.d_model},       {"n_heads", c.n_heads},
            {"vocab_size", c.vocab_size}, {"max_seq_len", c.max_seq_len}, {"seed", c.seed}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.n_layers = j.at("n_layers").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

inline void save_model(const Model& m, const std::string& path) {
    std::vector<std::pair<std::string, const Mat*>> tensors;
    tensors.emplace_back("wte", &m.w.wte);
    tensors.emplace_back("wpe", &m.w.wpe);
    for (int i = 0; i < m.cfg.n_layers; ++i) {
        const LayerWeights& lw = m.w.layers[static_cast<std::size_t>(i)];
        std::string p = "layer" + std::to_string(i) + ".";
        tensors.emplace_back(p + "ln1", &lw.ln1);
        tensors.emplace_back(p + "ln2", &lw.ln2);
        tensors.emplace_back(p + "wq", &lw.wq);
        tensors.emplace_back(p + "wk", &lw.wk);
        tensors.emplace_back(p + "wv", &lw.wv);
        tensors.emplace_back(p + "wo", &lw.wo);
        tensors.emplace_back(p + "fc1", &lw.fc1);
        tensors.emplace_back(p + "fc2", &lw.fc2);
    }
    tensors.emplace_back("lnf", &m.w.lnf);
    tensors.emplace_back("lm_head", &m.w.lm_head);
    detail::write_container(path, "SKWT", {{"config", config_to_json(m.cfg)}}, tensors);
}

inline Model load_model(const std::string& path) {
    auto [meta, tensors] = detail::read_container(path, "SKWT");
    Model m;
    m.cfg = config_from_json(meta.at("config"));
    auto take = [&](const std::string& name) -> Mat {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw DataError("weight file missing tensor " + name);
        return std::move(it->second);
    };
    m.w.wte = take("wte");
    m.w.wpe = take("wpe");
    m.w.layers.resize(static_cast<std::size_t>(m.cfg.n_layers));
    for (int i = 0; i < m.cfg.n_layers; ++i) {
        LayerWeights& lw = m.w.layers[static_cast<std::size_t>(i)];
        std::string p = "layer" + std::to_string(i) + ".";
        lw.ln1 = take(p + "ln1");
        lw.ln2 = take(p + "ln2");
        lw.wq = take(p + "wq");
        lw.wk = take(p + "wk");
        lw.wv = take(p + "wv");
        lw.wo = take(p + "wo");
        lw.fc1 = take(p + "fc1");
        lw.fc2 = take(p + "fc2");
    }
    m.w.lnf = take("lnf");
    m.w.lm_head = take("lm_head");
    return m;
}

inline nlohmann::json lora_spec_to_json(const LoraSpec& s) {
    return {{"rank", s.rank},
            {"scaling_alpha", s.scaling_alpha},
            {"dropout", s.dropout},
            {"layer_begin", s.layer_begin},
            {"layer_end", s.layer_end},
            {"target_attention", s.target_attention},
            {"target_mlp", s.target_mlp}};
}

inline LoraSpec lora_spec_from_json(const nlohmann::json& j) {
    LoraSpec s;
    s.rank = j.at("rank").get<int>();
    s.scaling_alpha = j.at("scaling_alpha").get<double>();
    s.dropout = j.at("dropout").get<double>();
    s.layer_begin = j.at("layer_begin").get<int>();
    s.layer_end = j.at("layer_end").get<int>();
    s.target_attention = j.at("target_attention").get<bool>();
    s.target_mlp = j.at("target_mlp").get<bool>();
    return s;
}

inline void save_adapter(const LoraAdapter& a, const std::string& path, const nlohmann::json& extra = {}) {
    nlohmann::json meta = {{"spec", lora_spec_to_json(a.spec)}};
    if (!extra.is_null()) meta["extra"] = extra;
    std::vector<std::pair<std::string, const Mat*>> tensors;
    std::vector<std::string> names;  // keep storage alive
    names.reserve(a.entries.size() * 2);
    for (const LoraEntry& e : a.entries) {
        std::string base = "layer" + std::to_string(e.layer) + "." + target_matrix_name(e.target);
        names.push_back(base + ".A");
        tensors.emplace_back(names.back(), &e.A);
        names.push_back(base + ".B");
        tensors.emplace_back(names.back(), &e.B);
    }
    detail::write_container(path, "SKAD", meta, tensors);
}

inline LoraAdapter load_adapter(const std::string& path, nlohmann::json* extra = nullptr) {
    auto [meta, tensors] = detail::read_container(path, "SKAD");
    LoraAdapter a;
    a.spec = lora_spec_from_json(meta.at("spec"));
    if (extra && meta.contains("extra")) *extra = meta["extra"];
    std::map<std::string, std::pair<Mat, Mat>> grouped;  // base name -> (A, B)
    for (auto& [name, t] : tensors) {
        bool is_a = name.size() > 2 && name.substr(name.size() - 2) == ".A";
        std::string base = name.substr(0, name.size() - 2);
        if (is_a)
            grouped[base].first = std::move(t);
        else
            grouped[base].second = std::move(t);
    }
    for (auto& [base, ab] : grouped) {
        LoraEntry e;
        auto dot = base.find('.');
        e.layer = std::stoi(base.substr(5, dot - 5));  // "layerN.target"
        std::string tname = base.substr(dot + 1);
        bool found = false;
        for (TargetMatrix t : {TargetMatrix::Wq, TargetMatrix::Wk, TargetMatrix::Wv, TargetMatrix::Wo,
                               TargetMatrix::Fc1, TargetMatrix::Fc2}) {
            if (tname == target_matrix_name(t)) {
                e.target = t;
                found = true;
            }
        }
        if (!found) throw DataError("adapter file has unknown target " + tname);
        e.A = std::move(ab.first);
        e.B = std::move(ab.second);
        a.entries.push_back(std::move(e));
    }
    std::sort(a.entries.begin(), a.entries.end(), [](const LoraEntry& x, const LoraEntry& y) {
        return x.layer != y.layer ? x.layer < y.layer : static_cast<int>(x.target) < static_cast<int>(y.target);
    });
    return a;
}

}  // namespace scopekit::lm
