#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <system_error>

#include "pdnac/cmdp.hpp"
#include "pdnac/errors.hpp"

namespace pdnac {

using json = nlohmann::json;

/// Shortest decimal string that parses back to exactly x.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Schema helpers

/// Throws ConfigError naming the first key of obj not in allowed.
inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

inline const json& require(const json& obj, const std::string& key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(where + ": missing required key '" + key + "'");
    return *it;
}

inline double get_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(where + ": expected a finite number");
    return x;
}

inline long get_integer(const json& v, const std::string& where) {
    if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
    return v.get<long>();
}

inline std::string get_string(const json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError(where + ": expected a string");
    return v.get<std::string>();
}

inline bool get_bool(const json& v, const std::string& where) {
    if (!v.is_boolean()) throw ConfigError(where + ": expected true or false");
    return v.get<bool>();
}

// ---------------------------------------------------------------------------
// Eigen <-> JSON

inline json to_json(const VectorXd& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline json to_json(const MatrixXd& m) {
    json out = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(std::move(row));
    }
    return out;
}

inline VectorXd vector_from_json(const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
    VectorXd out(static_cast<Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i)
        out(static_cast<Index>(i)) = get_number(v[i], where + "[" + std::to_string(i) + "]");
    return out;
}

inline MatrixXd matrix_from_json(const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where + ": expected an array of rows");
    const std::size_t rows = v.size();
    const std::size_t cols = rows ? (v[0].is_array() ? v[0].size() : 0) : 0;
    MatrixXd out(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        if (!v[i].is_array() || v[i].size() != cols)
            throw ConfigError(where + ": row " + std::to_string(i) + " is not an array of length " + std::to_string(cols));
        for (std::size_t j = 0; j < cols; ++j)
            out(static_cast<Index>(i), static_cast<Index>(j)) =
                get_number(v[i][j], where + "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
    }
    return out;
}

// ---------------------------------------------------------------------------
// CMDP files
//
// {"n_states": S, "n_actions": A,
//  "transition": [[P(.|s,a)] for s, a in row-major order],
//  "reward": S x A, "cost": S x A, "initial": [rho],
//  "meta": {"seed": n, "generator": "..."}}   (meta optional)

inline json cmdp_to_json(const TabularCmdp& m) {
    return json{{"n_states", m.n_states()},
                {"n_actions", m.n_actions()},
                {"transition", to_json(m.transition())},
                {"reward", to_json(m.reward())},
                {"cost", to_json(m.cost())},
                {"initial", to_json(m.initial_dist())},
                {"meta", {{"seed", m.meta().seed}, {"generator", m.meta().generator}}}};
}

inline TabularCmdp cmdp_from_json(const json& j, const std::string& where = "cmdp") {
    reject_unknown_keys(j, {"n_states", "n_actions", "transition", "reward", "cost", "initial", "meta"}, where);
    const long ns = get_integer(require(j, "n_states", where), where + ".n_states");
    const long na = get_integer(require(j, "n_actions", where), where + ".n_actions");
    CmdpMeta meta;
    if (j.contains("meta")) {
        const json& mj = j["meta"];
        reject_unknown_keys(mj, {"seed", "generator"}, where + ".meta");
        if (mj.contains("seed")) {
            if (!mj["seed"].is_number_unsigned()) throw ConfigError(where + ".meta.seed: expected a non-negative integer");
            meta.seed = mj["seed"].get<std::uint64_t>();
        }
        if (mj.contains("generator")) meta.generator = get_string(mj["generator"], where + ".meta.generator");
    }
    return TabularCmdp(ns, na, matrix_from_json(require(j, "transition", where), where + ".transition"),
                       matrix_from_json(require(j, "reward", where), where + ".reward"),
                       matrix_from_json(require(j, "cost", where), where + ".cost"),
                       vector_from_json(require(j, "initial", where), where + ".initial"), std::move(meta));
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
}

/// Write to a sibling temporary and rename over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw ConfigError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw ConfigError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline TabularCmdp load_cmdp(const std::filesystem::path& path) {
    return cmdp_from_json(read_json_file(path), path.filename().string());
}

inline void save_cmdp(const std::filesystem::path& path, const TabularCmdp& m) {
    write_file_atomic(path, cmdp_to_json(m).dump(2) + "\n");
}

}  // namespace pdnac
