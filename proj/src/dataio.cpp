#include "ztseg/dataio.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>

namespace ztseg {

static_assert(std::endian::native == std::endian::little,
              "matrix files are little-endian; big-endian hosts unsupported");

namespace {
constexpr char kMagic[8] = {'Z', 'T', 'S', 'E', 'G', 'M', 'A', 'T'};
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path.string());
    f.write(kMagic, 8);
    const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
    const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
    f.write(reinterpret_cast<const char*>(&rows), 8);
    f.write(reinterpret_cast<const char*>(&cols), 8);
    std::vector<double> row(m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
        f.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
    if (!f) throw std::runtime_error("short write: " + path.string());
}

Matrix read_matrix(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("bad matrix file magic: " + path.string());
    std::uint64_t rows = 0, cols = 0;
    f.read(reinterpret_cast<char*>(&rows), 8);
    f.read(reinterpret_cast<char*>(&cols), 8);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::vector<double> row(cols);
    for (std::uint64_t i = 0; i < rows; ++i) {
        f.read(reinterpret_cast<char*>(row.data()),
               static_cast<std::streamsize>(cols * sizeof(double)));
        if (!f) throw std::runtime_error("truncated matrix file: " + path.string());
        for (std::uint64_t j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
    return m;
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (f) {
        f.read(buf, sizeof(buf));
        const std::streamsize got = f.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    static const char* hex = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = hex[h & 0xF];
        h >>= 4;
    }
    buf[16] = '\0';
    return std::string(buf);
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    CsvTable table;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool first_line = true;
    auto end_field = [&] {
        fields.push_back(field);
        field.clear();
    };
    auto end_line = [&] {
        end_field();
        // skip fully empty lines
        if (!(fields.size() == 1 && fields[0].empty())) {
            if (first_line) {
                table.header = fields;
                first_line = false;
            } else {
                table.rows.push_back(fields);
            }
        }
        fields.clear();
    };
    for (std::size_t i = 0; i < content.size(); ++i) {
        const char c = content[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_line();
        } else {
            field += c;
        }
    }
    if (!field.empty() || !fields.empty()) end_line();
    if (table.header.empty()) throw std::runtime_error("empty CSV: " + path.string());
    return table;
}

}  // namespace ztseg
