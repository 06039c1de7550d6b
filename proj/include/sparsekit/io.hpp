#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsekit/types.hpp"

namespace sparsekit {

// SPMX binary matrix format: magic "SPMX", u32 LE version=1, u64 LE rows,
// u64 LE cols, then rows*cols f64 LE column-major.

namespace detail {

template <typename T>
void write_le(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!is) throw std::invalid_argument("SPMX: truncated file");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

}  // namespace detail

inline void write_spmx(std::ostream& os, const DenseMatrix& M) {
    os.write("SPMX", 4);
    detail::write_le<std::uint32_t>(os, 1);
    detail::write_le<std::uint64_t>(os, M.rows);
    detail::write_le<std::uint64_t>(os, M.cols);
    for (double v : M.values) detail::write_le<double>(os, v);
}

inline void write_spmx(const std::string& path, const DenseMatrix& M) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::invalid_argument("cannot open for writing: " + path);
    write_spmx(f, M);
}

inline DenseMatrix read_spmx(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SPMX", 4) != 0)
        throw std::invalid_argument("SPMX: bad magic");
    const auto version = detail::read_le<std::uint32_t>(is);
    if (version != 1) throw std::invalid_argument("SPMX: unsupported version");
    const auto rows = detail::read_le<std::uint64_t>(is);
    const auto cols = detail::read_le<std::uint64_t>(is);
    DenseMatrix M(static_cast<index_t>(rows), static_cast<index_t>(cols));
    for (double& v : M.values) v = detail::read_le<double>(is);
    return M;
}

inline DenseMatrix read_spmx(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::invalid_argument("cannot open: " + path);
    return read_spmx(f);
}

// Label files: one integer per line, aligned with SPMX signal columns.

inline void write_labels(const std::string& path, const std::vector<int>& labels) {
    std::ofstream f(path);
    if (!f) throw std::invalid_argument("cannot open for writing: " + path);
    for (int l : labels) f << l << "\n";
}

inline std::vector<int> read_labels(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open: " + path);
    std::vector<int> labels;
    int v;
    while (f >> v) labels.push_back(v);
    return labels;
}

}  // namespace sparsekit
