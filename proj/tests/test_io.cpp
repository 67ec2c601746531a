#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "cpstream/io.hpp"
#include "cpstream/rng.hpp"

using namespace cpstream;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

DenseTensor random_tensor(Shape shape, std::uint64_t seed) {
    rng::Substream s(seed);
    std::vector<double> vals(static_cast<std::size_t>(shape.num_elements()));
    for (double& v : vals) v = s.uniform01() * 2.0 - 1.0;
    return DenseTensor(std::move(shape), std::move(vals));
}

}  // namespace

TEST_CASE("coo text round trip") {
    DenseTensor t = DenseTensor::zeros({3, 4, 2});
    std::vector<std::int64_t> i1 = {0, 1, 0}, i2 = {2, 3, 1};
    t.at(i1) = 0.123456789012345678;
    t.at(i2) = -42.5;
    const SparseTensor sp = SparseTensor::from_dense(t);

    const std::string path = temp_path("cpstream_test.coo");
    write_tensor_coo(sp, path);
    const SparseTensor back = read_tensor_coo(path);
    CHECK(back.nnz() == sp.nnz());
    CHECK(back.to_dense() == t);

    // Header carries order then extents; indices are 1-based.
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "3 3 4 2");
    std::string first_entry;
    std::getline(in, first_entry);
    CHECK(first_entry.substr(0, 6) == "1 2 1 ");
    std::remove(path.c_str());
}

TEST_CASE("coo rejects malformed files") {
    const std::string path = temp_path("cpstream_bad.coo");
    {
        std::ofstream out(path);
        out << "3 2 2 2\n1 1 1\n";  // missing value
    }
    CHECK_THROWS_AS(read_tensor_coo(path), IoError);
    {
        std::ofstream out(path);
        out << "3 2 2 2\n5 1 1 3.0\n";  // index out of bounds
    }
    CHECK_THROWS_AS(read_tensor_coo(path), IoError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_tensor_coo(path), IoError);  // missing file
}

TEST_CASE("dense binary round trip is bit exact") {
    const DenseTensor t = random_tensor({5, 4, 3, 2}, 11);
    const std::string path = temp_path("cpstream_test.bin");
    write_tensor_dense(t, path);
    CHECK(read_tensor_dense(path) == t);
    CHECK(read_tensor_any(path) == t);

    // Magic check: first four bytes.
    std::ifstream in(path, std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    CHECK(std::string(magic, 4) == "OCT1");
    std::remove(path.c_str());
}

TEST_CASE("dense binary detects truncation") {
    const DenseTensor t = random_tensor({4, 4, 4}, 3);
    const std::string path = temp_path("cpstream_trunc.bin");
    write_tensor_dense(t, path);
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 9);
    CHECK_THROWS_AS(read_tensor_dense(path), IoError);
    std::remove(path.c_str());
}

TEST_CASE("read_tensor_any falls back to the text format") {
    DenseTensor t = DenseTensor::zeros({2, 2, 2});
    std::vector<std::int64_t> idx = {1, 1, 1};
    t.at(idx) = 3.5;
    const std::string path = temp_path("cpstream_any.coo");
    write_tensor_coo(SparseTensor::from_dense(t), path);
    CHECK(read_tensor_any(path) == t);
    std::remove(path.c_str());
}

TEST_CASE("kruskal model round trip") {
    rng::Substream s(8);
    KruskalModel m;
    for (std::int64_t d : {4, 3, 5}) {
        Matrix f(d, 2);
        s.fill_uniform(f);
        m.factors.push_back(f);
    }
    m.lambda = Vector(2);
    m.lambda << 1.5, 0.25;

    const std::string path = temp_path("cpstream_model.txt");
    write_kruskal(m, path);
    const KruskalModel back = read_kruskal(path);
    REQUIRE(back.order() == 3);
    REQUIRE(back.rank() == 2);
    for (int n = 0; n < 3; ++n) CHECK(back.factors[static_cast<std::size_t>(n)] == m.factors[static_cast<std::size_t>(n)]);
    CHECK(back.lambda == m.lambda);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "kruskal 3 2");
    std::remove(path.c_str());
}

TEST_CASE("kruskal reader rejects bad headers") {
    const std::string path = temp_path("cpstream_badmodel.txt");
    {
        std::ofstream out(path);
        out << "tucker 3 2\n";
    }
    CHECK_THROWS_AS(read_kruskal(path), IoError);
    std::remove(path.c_str());
}
