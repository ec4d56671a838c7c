#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "belllab/estimators.hpp"
#include "belllab/feasibility.hpp"
#include "belllab/models.hpp"
#include "belllab/types.hpp"

namespace belllab {

namespace io {

/// Shortest round-tripping decimal form; deterministic across runs.
inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw IoError("format_double: conversion failed");
    return std::string(buf.data(), ptr);
}

inline double parse_double_field(std::string_view token, int line, const char* column) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
    if (ec != std::errc{} || ptr != token.data() + token.size())
        throw ConfigError("trial log line " + std::to_string(line) + ": bad " + column + " '" +
                          std::string(token) + "'");
    return out;
}

inline int parse_bit_field(std::string_view token, int line, const char* column) {
    if (token == "0") return 0;
    if (token == "1") return 1;
    throw ConfigError("trial log line " + std::to_string(line) + ": " + column +
                      " must be 0 or 1, got '" + std::string(token) + "'");
}

inline std::uint64_t parse_index_field(std::string_view token, int line, const char* column) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
    if (ec != std::errc{} || ptr != token.data() + token.size())
        throw ConfigError("trial log line " + std::to_string(line) + ": bad " + column + " '" +
                          std::string(token) + "'");
    return out;
}

inline std::vector<std::string_view> split_csv_row(std::string_view line) {
    std::vector<std::string_view> fields;
    size_t start = 0;
    while (true) {
        size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

inline constexpr const char* kLogHeaderBase =
    "trial_index,alpha_slot,beta_slot,alpha_deg,beta_deg,a,b";
inline constexpr const char* kLogHeaderQuadruples =
    "trial_index,alpha_slot,beta_slot,alpha_deg,beta_deg,a,b,a0,a1,b0,b1";

} // namespace io

/// Write a trial batch as CSV. Quadruple columns a0,a1,b0,b1 appear exactly
/// when the batch carries counterfactual ground truth.
inline void write_trial_log(const std::filesystem::path& path, const TrialBatch& batch) {
    std::ofstream out(path, std::ios::binary); // binary: no platform newline surprises
    if (!out) throw IoError("cannot open trial log for writing: " + path.string());
    const bool with_quadruples = batch.quadruples.has_value();
    if (with_quadruples && batch.quadruples->size() != batch.records.size())
        throw ContractError("write_trial_log: quadruple count differs from record count");

    out << (with_quadruples ? io::kLogHeaderQuadruples : io::kLogHeaderBase) << '\n';
    for (std::size_t i = 0; i < batch.records.size(); ++i) {
        const TrialRecord& r = batch.records[i];
        out << r.trial_index << ',' << static_cast<int>(r.alpha.slot) << ','
            << static_cast<int>(r.beta.slot) << ',' << io::format_double(r.alpha.angle.degrees())
            << ',' << io::format_double(r.beta.angle.degrees()) << ',' << int{r.a.bit} << ','
            << int{r.b.bit};
        if (with_quadruples) {
            const CounterfactualQuadruple& q = (*batch.quadruples)[i];
            out << ',' << int{q.a_unprimed.bit} << ',' << int{q.a_primed.bit} << ','
                << int{q.b_unprimed.bit} << ',' << int{q.b_primed.bit};
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing trial log: " + path.string());
}

/// Read a CSV trial log back into a batch. The setting angles are
/// reconstructed from the rows; a slot never visited keeps the 0-degree
/// placeholder, which no analysis touches (its collective stays empty).
inline TrialBatch read_trial_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open trial log: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw ConfigError("trial log is empty: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();

    bool with_quadruples = false;
    if (line == io::kLogHeaderQuadruples)
        with_quadruples = true;
    else if (line != io::kLogHeaderBase)
        throw ConfigError("trial log line 1: unrecognized header '" + line + "'");

    TrialBatch batch;
    batch.source = "log:" + path.filename().string();
    if (with_quadruples) batch.quadruples.emplace();

    std::array<std::array<bool, 2>, 2> seen{}; // [side][slot]
    int line_no = 1;
    const std::size_t expected = with_quadruples ? 11u : 7u;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = io::split_csv_row(line);
        if (fields.size() != expected)
            throw ConfigError("trial log line " + std::to_string(line_no) + ": expected " +
                              std::to_string(expected) + " fields, got " +
                              std::to_string(fields.size()));

        TrialRecord rec;
        rec.trial_index = io::parse_index_field(fields[0], line_no, "trial_index");
        const int a_slot = io::parse_bit_field(fields[1], line_no, "alpha_slot");
        const int b_slot = io::parse_bit_field(fields[2], line_no, "beta_slot");
        const double a_deg = io::parse_double_field(fields[3], line_no, "alpha_deg");
        const double b_deg = io::parse_double_field(fields[4], line_no, "beta_deg");
        try {
            rec.alpha = SettingLabel{Side::Left, static_cast<Slot>(a_slot), Angle(a_deg)};
            rec.beta = SettingLabel{Side::Right, static_cast<Slot>(b_slot), Angle(b_deg)};
        } catch (const DomainError& e) {
            throw ConfigError("trial log line " + std::to_string(line_no) + ": " + e.what());
        }
        rec.a = Outcome{io::parse_bit_field(fields[5], line_no, "a")};
        rec.b = Outcome{io::parse_bit_field(fields[6], line_no, "b")};

        auto& left = a_slot == 0 ? batch.angles.left_unprimed : batch.angles.left_primed;
        auto& right = b_slot == 0 ? batch.angles.right_unprimed : batch.angles.right_primed;
        if (!seen[0][static_cast<std::size_t>(a_slot)]) {
            left = rec.alpha.angle;
            seen[0][static_cast<std::size_t>(a_slot)] = true;
        } else if (left != rec.alpha.angle) {
            throw ConfigError("trial log line " + std::to_string(line_no) +
                              ": alpha_deg changed for the same slot");
        }
        if (!seen[1][static_cast<std::size_t>(b_slot)]) {
            right = rec.beta.angle;
            seen[1][static_cast<std::size_t>(b_slot)] = true;
        } else if (right != rec.beta.angle) {
            throw ConfigError("trial log line " + std::to_string(line_no) +
                              ": beta_deg changed for the same slot");
        }

        if (with_quadruples) {
            CounterfactualQuadruple q{Outcome{io::parse_bit_field(fields[7], line_no, "a0")},
                                      Outcome{io::parse_bit_field(fields[8], line_no, "a1")},
                                      Outcome{io::parse_bit_field(fields[9], line_no, "b0")},
                                      Outcome{io::parse_bit_field(fields[10], line_no, "b1")}};
            if (q.left(rec.alpha.slot) != rec.a || q.right(rec.beta.slot) != rec.b)
                throw ConfigError("trial log line " + std::to_string(line_no) +
                                  ": quadruple disagrees with the recorded outcomes");
            batch.quadruples->push_back(q);
        }
        batch.records.push_back(rec);
    }
    if (batch.records.empty())
        throw ConfigError("trial log has a header but no data rows: " + path.string());
    return batch;
}

/// Context distribution file: per-pair outcome distributions, optionally with
/// sample sizes (which switch on the relaxed statistical solve).
struct ContextFile {
    ContextDistributions dists;
    std::optional<std::array<std::uint64_t, 4>> n_per_pair;
};

inline ContextFile read_context_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open context file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("context file " + path.string() + ": " + e.what());
    }

    ContextFile file;
    if (!j.contains("contexts") || !j["contexts"].is_object())
        throw ConfigError("context file: missing 'contexts' object");
    for (int pair = 0; pair < 4; ++pair) {
        const std::string key = pair_name(pair);
        if (!j["contexts"].contains(key))
            throw ConfigError("context file: missing context '" + key + "'");
        const auto& arr = j["contexts"][key];
        if (!arr.is_array() || arr.size() != 4)
            throw ConfigError("context file: context '" + key +
                              "' must be an array of 4 probabilities [p00, p01, p10, p11]");
        for (int o = 0; o < 4; ++o) {
            if (!arr[static_cast<std::size_t>(o)].is_number())
                throw ConfigError("context file: context '" + key + "' has a non-numeric entry");
            file.dists.p[static_cast<std::size_t>(pair)][static_cast<std::size_t>(o)] =
                arr[static_cast<std::size_t>(o)].get<double>();
        }
    }
    if (j.contains("n_per_pair")) {
        const auto& arr = j["n_per_pair"];
        if (!arr.is_array() || arr.size() != 4)
            throw ConfigError("context file: 'n_per_pair' must be an array of 4 counts");
        std::array<std::uint64_t, 4> n{};
        for (int pair = 0; pair < 4; ++pair) {
            if (!arr[static_cast<std::size_t>(pair)].is_number_unsigned())
                throw ConfigError("context file: 'n_per_pair' entries must be non-negative "
                                  "integers");
            n[static_cast<std::size_t>(pair)] = arr[static_cast<std::size_t>(pair)].get<std::uint64_t>();
        }
        file.n_per_pair = n;
    }
    return file;
}

inline nlohmann::json context_file_json(const ContextDistributions& dists,
                                        const std::optional<std::array<std::uint64_t, 4>>& n = {}) {
    nlohmann::json j;
    for (int pair = 0; pair < 4; ++pair)
        j["contexts"][pair_name(pair)] = dists.p[static_cast<std::size_t>(pair)];
    if (n) j["n_per_pair"] = *n;
    return j;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    out << content;
    if (!out) throw IoError("failed writing file: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("failed reading file: " + path.string());
    return buffer.str();
}

} // namespace belllab
