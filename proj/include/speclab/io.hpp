#pragma once

#include <openssl/evp.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "speclab/errors.hpp"
#include "speclab/pauli.hpp"

#include <json.hpp>

namespace speclab {

constexpr const char* kToolVersion = "speclab 0.1.0";

/// Fixed float formatting: 17 significant digits, round-trip exact.
inline std::string format_float(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Git-style content hash: SHA-1 of "blob <len>\0<content>".
inline std::string sha1_hex(const std::string& content) {
    const std::string payload = "blob " + std::to_string(content.size()) + '\0' + content;
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(payload.data(), payload.size(), digest, &len, EVP_sha1(), nullptr) != 1)
        throw NumericError("sha1_hex: digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

/// CSV with a mandatory header row, LF line endings, floats at 17 digits.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<std::string> cells) {
        if (cells.size() != header_.size()) throw ConfigError("CsvWriter: row width mismatch");
        rows_.push_back(std::move(cells));
    }

    std::string str() const {
        std::string out = join(header_);
        for (const auto& r : rows_) out += join(r);
        return out;
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw ConfigError("CsvWriter: cannot open " + path.string());
        f << str();
    }

    static std::string cell(double v) { return format_float(v); }
    static std::string cell(std::int64_t v) { return std::to_string(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "1" : "0"; }

private:
    static std::string join(const std::vector<std::string>& cells) {
        std::string line;
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) line += ',';
            line += cells[i];
        }
        line += '\n';
        return line;
    }
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + path.string());
    f << content;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open for reading: " + path.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

/// Dense complex matrix as interleaved little-endian doubles (row-major)
/// next to a JSON header describing it.
inline void write_dense_matrix(const std::filesystem::path& header_path,
                               const std::filesystem::path& bin_path, const DenseMatrix& M,
                               nlohmann::json header = {}) {
    header["format"] = "dense_complex128";
    header["layout"] = "row-major";
    header["rows"] = M.rows();
    header["cols"] = M.cols();
    header["data_file"] = bin_path.filename().string();
    std::ofstream f(bin_path, std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + bin_path.string());
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
            const double re = M(i, j).real(), im = M(i, j).imag();
            f.write(reinterpret_cast<const char*>(&re), sizeof(double));
            f.write(reinterpret_cast<const char*>(&im), sizeof(double));
        }
    write_text_file(header_path, header.dump(2) + "\n");
}

inline DenseMatrix read_dense_matrix(const std::filesystem::path& header_path) {
    const nlohmann::json header = nlohmann::json::parse(read_text_file(header_path));
    if (header.value("format", "") != "dense_complex128")
        throw ConfigError("read_dense_matrix: unexpected format in " + header_path.string());
    const auto rows = header.at("rows").get<Eigen::Index>();
    const auto cols = header.at("cols").get<Eigen::Index>();
    const std::filesystem::path bin_path =
        header_path.parent_path() / header.at("data_file").get<std::string>();
    std::ifstream f(bin_path, std::ios::binary);
    if (!f) throw ConfigError("cannot open for reading: " + bin_path.string());
    DenseMatrix M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            double re = 0, im = 0;
            f.read(reinterpret_cast<char*>(&re), sizeof(double));
            f.read(reinterpret_cast<char*>(&im), sizeof(double));
            M(i, j) = Complex(re, im);
        }
    if (!f) throw ConfigError("read_dense_matrix: truncated payload in " + bin_path.string());
    return M;
}

/// One manifest per run, listing every output file exactly once.
struct Manifest {
    std::string experiment;
    nlohmann::json params;
    std::uint64_t seed = 0;
    std::string config_hash;
    double wall_time_ms = 0.0;
    std::vector<std::string> outputs;

    nlohmann::json to_json() const {
        return {{"experiment", experiment}, {"params", params},   {"seed", seed},
                {"config_hash", config_hash}, {"tool_version", kToolVersion},
                {"wall_time_ms", wall_time_ms}, {"outputs", outputs}};
    }

    void write(const std::filesystem::path& path) const {
        write_text_file(path, to_json().dump(2) + "\n");
    }
};

}  // namespace speclab
