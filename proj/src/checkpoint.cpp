#include <array>
#include <cstring>
#include <fstream>
#include <ostream>

#include "cpstream/streaming.hpp"

namespace cpstream {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr char kMagic[4] = {'O', 'C', 'T', 'S'};

// CRC-64/ECMA-182, bit-reflected.
std::uint64_t crc64(const std::uint8_t* data, std::size_t len) {
    static const std::array<std::uint64_t, 256> table = [] {
        std::array<std::uint64_t, 256> t{};
        constexpr std::uint64_t poly = 0xC96C5795D7870F42ULL;
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint64_t crc = i;
            for (int b = 0; b < 8; ++b) crc = (crc >> 1) ^ ((crc & 1) ? poly : 0);
            t[i] = crc;
        }
        return t;
    }();
    std::uint64_t crc = ~0ULL;
    for (std::size_t i = 0; i < len; ++i)
        crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return ~crc;
}

class Writer {
public:
    std::vector<std::uint8_t> bytes;

    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void i64(std::int64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }

    void matrix(const Matrix& m) {
        i64(m.rows());
        i64(m.cols());
        raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    }
    void vector(const Vector& v) {
        i64(v.size());
        raw(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
    }
    void doubles(const std::vector<double>& v) {
        u64(v.size());
        raw(v.data(), sizeof(double) * v.size());
    }
    void dims(const std::vector<std::int64_t>& d) {
        u64(d.size());
        raw(d.data(), sizeof(std::int64_t) * d.size());
    }

private:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes.insert(bytes.end(), b, b + n);
    }
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t len) : data_(data), len_(len) {}

    std::uint8_t u8() { return read<std::uint8_t>(); }
    std::uint32_t u32() { return read<std::uint32_t>(); }
    std::uint64_t u64() { return read<std::uint64_t>(); }
    std::int64_t i64() { return read<std::int64_t>(); }
    double f64() { return read<double>(); }

    Matrix matrix() {
        const std::int64_t rows = i64(), cols = i64();
        if (rows < 0 || cols < 0) throw IoError("checkpoint: negative matrix extent");
        Matrix m(rows, cols);
        raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
        return m;
    }
    Vector vector() {
        const std::int64_t n = i64();
        if (n < 0) throw IoError("checkpoint: negative vector length");
        Vector v(n);
        raw(v.data(), sizeof(double) * static_cast<std::size_t>(n));
        return v;
    }
    std::vector<double> doubles() {
        const std::uint64_t n = u64();
        std::vector<double> v(n);
        raw(v.data(), sizeof(double) * n);
        return v;
    }
    std::vector<std::int64_t> dims() {
        const std::uint64_t n = u64();
        std::vector<std::int64_t> d(n);
        raw(d.data(), sizeof(std::int64_t) * n);
        return d;
    }

    bool exhausted() const { return pos_ == len_; }

private:
    template <class T>
    T read() {
        T v;
        raw(&v, sizeof v);
        return v;
    }
    void raw(void* p, std::size_t n) {
        if (pos_ + n > len_) throw IoError("checkpoint: truncated payload");
        std::memcpy(p, data_ + pos_, n);
        pos_ += n;
    }

    const std::uint8_t* data_;
    std::size_t len_;
    std::size_t pos_ = 0;
};

void write_config(Writer& w, const StreamConfig& c) {
    w.u32(static_cast<std::uint32_t>(c.rank));
    w.u32(static_cast<std::uint32_t>(c.p));
    w.u32(static_cast<std::uint32_t>(c.q));
    w.u32(static_cast<std::uint32_t>(c.shared));
    w.u32(static_cast<std::uint32_t>(c.temporal_mode));
    w.u64(c.seed);
    w.u8(c.enforce_bounds ? 1 : 0);
    // Worker count is an execution preference, not stream state; persisting
    // it would make otherwise identical serial/parallel runs serialize
    // differently.
    w.u32(0);
    w.u8(c.strict ? 1 : 0);
    w.f64(c.residual_warning);
    w.u32(static_cast<std::uint32_t>(c.als.rank));
    w.u32(static_cast<std::uint32_t>(c.als.max_iters));
    w.f64(c.als.rel_tol);
    w.u32(static_cast<std::uint32_t>(c.als.n_restarts));
    w.u64(c.als.seed);
}

StreamConfig read_config(Reader& r) {
    StreamConfig c;
    c.rank = static_cast<int>(r.u32());
    c.p = static_cast<int>(r.u32());
    c.q = static_cast<int>(r.u32());
    c.shared = static_cast<int>(r.u32());
    c.temporal_mode = static_cast<int>(r.u32());
    c.seed = r.u64();
    c.enforce_bounds = r.u8() != 0;
    c.workers = static_cast<int>(r.u32());
    c.strict = r.u8() != 0;
    c.residual_warning = r.f64();
    c.als.rank = static_cast<int>(r.u32());
    c.als.max_iters = static_cast<int>(r.u32());
    c.als.rel_tol = r.f64();
    c.als.n_restarts = static_cast<int>(r.u32());
    c.als.seed = r.u64();
    return c;
}

}  // namespace

std::vector<std::uint8_t> checkpoint_save(const StreamState& st) {
    Writer w;
    write_config(w, st.config);

    // Replicas.
    w.u64(st.replicas.seed);
    w.u32(static_cast<std::uint32_t>(st.replicas.q));
    w.u32(static_cast<std::uint32_t>(st.replicas.shared));
    w.u32(static_cast<std::uint32_t>(st.replicas.temporal_mode));
    w.i64(st.replicas.batches_drawn);
    w.dims(st.replicas.nontemporal_dims);
    w.matrix(st.replicas.temporal_shared_gram);
    w.u32(static_cast<std::uint32_t>(st.replicas.p()));
    for (const CompressionReplica& rep : st.replicas.replicas) {
        w.u32(static_cast<std::uint32_t>(rep.replica_id));
        w.u64(rep.nontemporal.size());
        for (const Matrix& m : rep.nontemporal) w.matrix(m);
        w.i64(rep.temporal_window_start);
        w.i64(rep.temporal_rows_total);
        w.matrix(rep.temporal);
    }

    // Summaries and history accumulators.
    w.i64(st.summaries.batches_seen);
    w.u64(st.summaries.y.size());
    for (std::size_t i = 0; i < st.summaries.y.size(); ++i) {
        w.dims(st.summaries.y[i].shape().dims);
        w.doubles(st.summaries.y[i].values());
        w.matrix(st.summaries.history[i]);
    }

    // Model.
    w.u32(static_cast<std::uint32_t>(st.model.order()));
    for (const Matrix& f : st.model.factors) w.matrix(f);
    w.vector(st.model.lambda);
    w.i64(st.slices_seen);

    // Batch log, deterministic fields only.
    w.u64(st.log.size());
    for (const BatchRecord& rec : st.log) {
        w.i64(rec.batch_index);
        w.i64(rec.t_new);
        w.f64(rec.temporal_residual);
        w.f64(rec.min_match_similarity);
        w.f64(rec.max_offdiag_similarity);
        w.u8(rec.warned ? 1 : 0);
    }

    std::vector<std::uint8_t> out;
    out.reserve(w.bytes.size() + 24);
    out.insert(out.end(), kMagic, kMagic + 4);
    Writer header;
    header.u32(kVersion);
    header.u64(w.bytes.size());
    header.u64(crc64(w.bytes.data(), w.bytes.size()));
    out.insert(out.end(), header.bytes.begin(), header.bytes.end());
    out.insert(out.end(), w.bytes.begin(), w.bytes.end());
    return out;
}

StreamState checkpoint_load(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 24 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw IoError("checkpoint: bad magic");
    Reader head(bytes.data() + 4, 20);
    const std::uint32_t version = head.u32();
    if (version != kVersion)
        throw IoError("checkpoint: unsupported format version " + std::to_string(version));
    const std::uint64_t payload_len = head.u64();
    const std::uint64_t stored_crc = head.u64();
    if (bytes.size() != 24 + payload_len)
        throw IoError("checkpoint: payload length mismatch (corrupt or truncated)");
    if (crc64(bytes.data() + 24, payload_len) != stored_crc)
        throw IoError("checkpoint: checksum mismatch");

    Reader r(bytes.data() + 24, payload_len);
    StreamState st;
    st.config = read_config(r);

    st.replicas.seed = r.u64();
    st.replicas.q = static_cast<int>(r.u32());
    st.replicas.shared = static_cast<int>(r.u32());
    st.replicas.temporal_mode = static_cast<int>(r.u32());
    st.replicas.batches_drawn = r.i64();
    st.replicas.nontemporal_dims = r.dims();
    st.replicas.temporal_shared_gram = r.matrix();
    const std::uint32_t p = r.u32();
    st.replicas.replicas.resize(p);
    for (std::uint32_t i = 0; i < p; ++i) {
        CompressionReplica& rep = st.replicas.replicas[i];
        rep.replica_id = static_cast<int>(r.u32());
        const std::uint64_t n_mats = r.u64();
        rep.nontemporal.resize(n_mats);
        for (std::uint64_t m = 0; m < n_mats; ++m) rep.nontemporal[m] = r.matrix();
        rep.temporal_window_start = r.i64();
        rep.temporal_rows_total = r.i64();
        rep.temporal = r.matrix();
    }

    st.summaries.batches_seen = r.i64();
    const std::uint64_t n_summaries = r.u64();
    st.summaries.y.reserve(n_summaries);
    st.summaries.history.resize(n_summaries);
    for (std::uint64_t i = 0; i < n_summaries; ++i) {
        Shape shape(r.dims());
        st.summaries.y.emplace_back(shape, r.doubles());
        st.summaries.history[i] = r.matrix();
    }

    const std::uint32_t order = r.u32();
    st.model.factors.resize(order);
    for (std::uint32_t n = 0; n < order; ++n) st.model.factors[n] = r.matrix();
    st.model.lambda = r.vector();
    st.slices_seen = r.i64();

    const std::uint64_t n_log = r.u64();
    st.log.resize(n_log);
    for (std::uint64_t i = 0; i < n_log; ++i) {
        BatchRecord& rec = st.log[i];
        rec.batch_index = r.i64();
        rec.t_new = r.i64();
        rec.temporal_residual = r.f64();
        rec.min_match_similarity = r.f64();
        rec.max_offdiag_similarity = r.f64();
        rec.warned = r.u8() != 0;
    }
    if (!r.exhausted()) throw IoError("checkpoint: trailing bytes after payload");
    return st;
}

void checkpoint_save_file(const StreamState& state, const std::string& path) {
    const auto bytes = checkpoint_save(state);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("checkpoint: write failed for '" + path + "'");
}

StreamState checkpoint_load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw IoError("checkpoint: read failed for '" + path + "'");
    return checkpoint_load(bytes);
}

void describe_checkpoint(const StreamState& st, std::ostream& out) {
    out << "format=OCTS version=" << kVersion << "\n";
    out << "rank=" << st.config.rank << " p=" << st.config.p << " q=" << st.config.q
        << " shared=" << st.config.shared << " seed=" << st.config.seed << "\n";
    out << "order=" << st.order() << " temporal_mode=" << st.temporal_mode() + 1
        << " slices_seen=" << st.slices_seen << " batches=" << st.summaries.batches_seen << "\n";
    out << "model:";
    for (const Matrix& f : st.model.factors) out << " " << f.rows() << "x" << f.cols();
    out << "\n";
    for (const BatchRecord& rec : st.log)
        out << "batch=" << rec.batch_index << " t_new=" << rec.t_new
            << " residual=" << rec.temporal_residual
            << " min_similarity=" << rec.min_match_similarity
            << " max_offdiag=" << rec.max_offdiag_similarity << " warned=" << rec.warned << "\n";
}

}  // namespace cpstream
