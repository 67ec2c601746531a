#include "cpstream/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace cpstream {

namespace {

constexpr char kDenseMagic[4] = {'O', 'C', 'T', '1'};

// Shortest decimal form that round-trips a double.
std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace

void write_tensor_coo(const SparseTensor& t, const std::string& path) {
    std::ofstream out = open_out(path);
    out << t.shape().order();
    for (std::int64_t d : t.shape().dims) out << ' ' << d;
    out << '\n';
    for (const SparseTensor::Entry& e : t.entries()) {
        for (std::int64_t i : e.index) out << (i + 1) << ' ';
        out << fmt_double(e.value) << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

SparseTensor read_tensor_coo(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("'" + path + "': empty file");
    std::istringstream header(line);
    int order = 0;
    if (!(header >> order) || order < 2) throw IoError("'" + path + "': bad header");
    Shape shape;
    shape.dims.resize(static_cast<std::size_t>(order));
    for (int n = 0; n < order; ++n)
        if (!(header >> shape.dims[static_cast<std::size_t>(n)]))
            throw IoError("'" + path + "': header lists fewer extents than the order");

    std::vector<SparseTensor::Entry> entries;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        SparseTensor::Entry e;
        e.index.resize(static_cast<std::size_t>(order));
        for (int n = 0; n < order; ++n) {
            if (!(row >> e.index[static_cast<std::size_t>(n)]))
                throw IoError("'" + path + "': malformed entry at line " + std::to_string(line_no));
            e.index[static_cast<std::size_t>(n)] -= 1;  // file is 1-based
        }
        if (!(row >> e.value))
            throw IoError("'" + path + "': missing value at line " + std::to_string(line_no));
        entries.push_back(std::move(e));
    }
    try {
        return SparseTensor(std::move(shape), std::move(entries));
    } catch (const Error& e) {
        throw IoError("'" + path + "': " + e.what());
    }
}

void write_tensor_dense(const DenseTensor& t, const std::string& path) {
    std::ofstream out = open_out(path, std::ios::binary);
    out.write(kDenseMagic, 4);
    const std::uint32_t order = static_cast<std::uint32_t>(t.order());
    out.write(reinterpret_cast<const char*>(&order), sizeof order);
    for (std::int64_t d : t.shape().dims) {
        const std::uint64_t v = static_cast<std::uint64_t>(d);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(sizeof(double) * t.values().size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

DenseTensor read_tensor_dense(const std::string& path) {
    std::ifstream in = open_in(path, std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kDenseMagic, 4) != 0)
        throw IoError("'" + path + "': not a dense tensor file");
    std::uint32_t order = 0;
    in.read(reinterpret_cast<char*>(&order), sizeof order);
    if (!in || order < 2 || order > 16) throw IoError("'" + path + "': bad order");
    Shape shape;
    shape.dims.resize(order);
    for (std::uint32_t n = 0; n < order; ++n) {
        std::uint64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!in) throw IoError("'" + path + "': truncated header");
        shape.dims[n] = static_cast<std::int64_t>(v);
    }
    std::vector<double> values(static_cast<std::size_t>(shape.num_elements()));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(sizeof(double) * values.size()));
    if (!in) throw IoError("'" + path + "': truncated payload");
    return DenseTensor(std::move(shape), std::move(values));
}

DenseTensor read_tensor_any(const std::string& path) {
    {
        std::ifstream probe = open_in(path, std::ios::binary);
        char magic[4] = {0, 0, 0, 0};
        probe.read(magic, 4);
        if (probe && std::memcmp(magic, kDenseMagic, 4) == 0) return read_tensor_dense(path);
    }
    return read_tensor_coo(path).to_dense();
}

void write_kruskal(const KruskalModel& m, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "kruskal " << m.order() << ' ' << m.rank() << '\n';
    for (const Matrix& f : m.factors) {
        out << f.rows() << '\n';
        for (Eigen::Index r = 0; r < f.rows(); ++r) {
            for (Eigen::Index c = 0; c < f.cols(); ++c)
                out << (c ? " " : "") << fmt_double(f(r, c));
            out << '\n';
        }
    }
    for (int r = 0; r < m.rank(); ++r) out << (r ? " " : "") << fmt_double(m.lambda(r));
    out << '\n';
    if (!out) throw IoError("write failed for '" + path + "'");
}

KruskalModel read_kruskal(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string tag;
    int order = 0, rank = 0;
    if (!(in >> tag >> order >> rank) || tag != "kruskal" || order < 2 || rank < 1)
        throw IoError("'" + path + "': bad model header");
    KruskalModel m;
    m.factors.resize(static_cast<std::size_t>(order));
    for (int n = 0; n < order; ++n) {
        std::int64_t rows = 0;
        if (!(in >> rows) || rows < 0) throw IoError("'" + path + "': bad factor block");
        Matrix f(rows, rank);
        for (std::int64_t r = 0; r < rows; ++r)
            for (int c = 0; c < rank; ++c)
                if (!(in >> f(r, c))) throw IoError("'" + path + "': truncated factor block");
        m.factors[static_cast<std::size_t>(n)] = std::move(f);
    }
    m.lambda = Vector(rank);
    for (int r = 0; r < rank; ++r)
        if (!(in >> m.lambda(r))) throw IoError("'" + path + "': missing weight line");
    return m;
}

}  // namespace cpstream
