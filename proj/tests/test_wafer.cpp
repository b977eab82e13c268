#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>
#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "hqmv/wafer.hpp"

using namespace hqmv;
using namespace hqmv::wafer;

namespace {

std::string temp_path(const std::string& tag) {
    return "/tmp/hqmv_wafer_test_" + tag + "_" + std::to_string(::getpid());
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(data.data(), std::streamsize(data.size()));
    REQUIRE(bool(out));
}

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    return h;
}

// Minimal NPY v1 record.
std::string make_npy(const std::string& shape_txt,
                     const std::vector<std::uint8_t>& data,
                     const std::string& descr = "|u1") {
    std::string dict = "{'descr': '" + descr +
                       "', 'fortran_order': False, 'shape': " + shape_txt + ", }";
    while ((10 + dict.size() + 1) % 16 != 0) dict += ' ';
    dict += '\n';
    std::string out = "\x93NUMPY";
    out += '\x01';
    out += '\x00';
    out += char(dict.size() & 0xff);
    out += char(dict.size() >> 8);
    out += dict;
    out.append(reinterpret_cast<const char*>(data.data()), data.size());
    return out;
}

void put16(std::string& b, std::uint16_t v) {
    b += char(v & 0xff);
    b += char(v >> 8);
}
void put32(std::string& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b += char((v >> (8 * i)) & 0xff);
}

// Builds a zip archive with stored or deflated members.
std::string make_zip(const std::vector<std::pair<std::string, std::string>>& files,
                     bool deflate_members) {
    std::string out;
    struct Rec {
        std::string name;
        std::uint32_t crc, csize, usize, offset;
        std::uint16_t method;
    };
    std::vector<Rec> recs;
    for (const auto& [name, content] : files) {
        Rec r;
        r.name = name;
        r.offset = std::uint32_t(out.size());
        r.usize = std::uint32_t(content.size());
        r.crc = std::uint32_t(
            crc32(0, reinterpret_cast<const Bytef*>(content.data()),
                  uInt(content.size())));
        std::string payload = content;
        r.method = 0;
        if (deflate_members) {
            uLongf cap = compressBound(uLong(content.size())) + 64;
            std::string comp(cap, '\0');
            z_stream zs{};
            deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -15, 8,
                         Z_DEFAULT_STRATEGY);
            zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(content.data()));
            zs.avail_in = uInt(content.size());
            zs.next_out = reinterpret_cast<Bytef*>(comp.data());
            zs.avail_out = uInt(cap);
            deflate(&zs, Z_FINISH);
            comp.resize(zs.total_out);
            deflateEnd(&zs);
            payload = comp;
            r.method = 8;
        }
        r.csize = std::uint32_t(payload.size());
        out += "PK\x03\x04";
        put16(out, 20);
        put16(out, 0);
        put16(out, r.method);
        put16(out, 0);
        put16(out, 0);
        put32(out, r.crc);
        put32(out, r.csize);
        put32(out, r.usize);
        put16(out, std::uint16_t(name.size()));
        put16(out, 0);
        out += name;
        out += payload;
        recs.push_back(r);
    }
    const std::uint32_t cd_start = std::uint32_t(out.size());
    for (const auto& r : recs) {
        out += "PK\x01\x02";
        put16(out, 20);
        put16(out, 20);
        put16(out, 0);
        put16(out, r.method);
        put16(out, 0);
        put16(out, 0);
        put32(out, r.crc);
        put32(out, r.csize);
        put32(out, r.usize);
        put16(out, std::uint16_t(r.name.size()));
        put16(out, 0);
        put16(out, 0);
        put16(out, 0);
        put16(out, 0);
        put32(out, 0);
        put32(out, r.offset);
        out += r.name;
    }
    const std::uint32_t cd_size = std::uint32_t(out.size()) - cd_start;
    out += "PK\x05\x06";
    put16(out, 0);
    put16(out, 0);
    put16(out, std::uint16_t(recs.size()));
    put16(out, std::uint16_t(recs.size()));
    put32(out, cd_size);
    put32(out, cd_start);
    put16(out, 0);
    return out;
}

bool in_disk(std::size_t r, std::size_t c, std::size_t H, std::size_t W) {
    const double cy = double(H - 1) / 2.0, cx = double(W - 1) / 2.0;
    const double R = double(std::min(H, W)) / 2.0;
    const double dy = double(r) - cy, dx = double(c) - cx;
    return std::sqrt(dy * dy + dx * dx) <= R;
}

}  // namespace

TEST_CASE("class names and indices are fixed") {
    CHECK(std::string(kClassNames[0]) == "Center");
    CHECK(std::string(kClassNames[5]) == "Near_Full");
    CHECK(std::string(kClassNames[7]) == "Random");
    CHECK(class_index("Scratch") == 6);
    CHECK(class_index("Edge_Ring") == 3);
    CHECK(class_index("nonsense") == -1);
}

TEST_CASE("golden scratch mask, seed 12345 on 26x26") {
    Rng rng(12345);
    auto mask = render_defect(Defect::Scratch, rng, 26, 26);
    std::size_t count = 0, first = mask.size(), last = 0;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) {
            ++count;
            first = std::min(first, i);
            last = i;
        }
    CHECK(count == 31);
    CHECK(first == 10);
    CHECK(last == 254);
}

TEST_CASE("golden single-class sample, derived stream (7, 1)") {
    DatasetConfig cfg;
    cfg.H = 16;
    cfg.W = 16;
    cfg.noise_rate = 0.0;
    cfg.seed = 7;
    Rng rng = Rng::derive(7, 1);
    WaferSample s = compose_sample({Defect::Center}, rng, cfg);
    CHECK(s.label_bits() == "10000000");
    CHECK(s.defect_count() == 4);
    CHECK(fnv1a(s.grid) == 772810063179658495ULL);
}

TEST_CASE("defects never land outside the wafer disk") {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        Rng rng(seed);
        const Defect kind = Defect(seed % kNumClasses);
        auto mask = render_defect(kind, rng, 26, 26);
        for (std::size_t r = 0; r < 26; ++r)
            for (std::size_t c = 0; c < 26; ++c)
                if (mask[r * 26 + c]) CHECK(in_disk(r, c, 26, 26));
    }
}

TEST_CASE("near-full coverage stays above 60 percent") {
    for (std::uint64_t seed = 100; seed < 140; ++seed) {
        Rng rng(seed);
        auto mask = render_defect(Defect::NearFull, rng, 26, 26);
        std::size_t disk_cells = 0, hit = 0;
        for (std::size_t r = 0; r < 26; ++r)
            for (std::size_t c = 0; c < 26; ++c)
                if (in_disk(r, c, 26, 26)) {
                    ++disk_cells;
                    hit += mask[r * 26 + c];
                }
        CHECK(double(hit) >= 0.6 * double(disk_cells));
    }
}

TEST_CASE("tiny grids are rejected") {
    Rng rng(1);
    CHECK_THROWS_AS(render_defect(Defect::Center, rng, 8, 8),
                    std::invalid_argument);
}

TEST_CASE("compose rejects invalid combinations") {
    DatasetConfig cfg;
    Rng rng(3);
    CHECK_THROWS_AS(compose_sample({}, rng, cfg), std::invalid_argument);
    CHECK_THROWS_AS(compose_sample({Defect::NearFull, Defect::Loc}, rng, cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(compose_sample({Defect::Loc, Defect::Loc}, rng, cfg),
                    std::invalid_argument);
    DatasetConfig noisy = cfg;
    noisy.noise_rate = 0.5;
    CHECK_THROWS_AS(compose_sample({Defect::Loc}, rng, noisy),
                    std::invalid_argument);
}

TEST_CASE("noise-free composition is the union of the class masks") {
    DatasetConfig cfg;
    cfg.noise_rate = 0.0;
    cfg.seed = 5;
    Rng rng = Rng::derive(5, 3);
    Rng rng_copy = rng;
    WaferSample s = compose_sample({Defect::Center, Defect::Scratch}, rng, cfg);
    auto m1 = render_defect(Defect::Center, rng_copy, cfg.H, cfg.W);
    auto m2 = render_defect(Defect::Scratch, rng_copy, cfg.H, cfg.W);
    for (std::size_t r = 0; r < cfg.H; ++r)
        for (std::size_t c = 0; c < cfg.W; ++c) {
            const std::size_t i = r * cfg.W + c;
            if (!in_disk(r, c, cfg.H, cfg.W)) {
                CHECK(s.grid[i] == 0);
            } else {
                CHECK(s.grid[i] == ((m1[i] || m2[i]) ? 2 : 1));
            }
        }
    CHECK(s.label_bits() == "10000010");
}

TEST_CASE("default profile layout") {
    DatasetConfig cfg = DatasetConfig::default_profile(42);
    CHECK(cfg.counts.size() == 44);  // 7 singles + NearFull + 21 pairs + 10 + 5
    CHECK(cfg.total_count() == 4875);
    std::size_t near_full = 0;
    for (const auto& [kinds, count] : cfg.counts)
        for (auto k : kinds)
            if (k == Defect::NearFull) {
                near_full += count;
                CHECK(kinds.size() == 1);
            }
    CHECK(near_full == 20);
}

TEST_CASE("generation is deterministic for a given seed") {
    DatasetConfig cfg;
    cfg.seed = 99;
    cfg.counts = {{{Defect::Center}, 5}, {{Defect::Donut, Defect::Loc}, 5}};
    auto a = generate_dataset(cfg);
    auto b = generate_dataset(cfg);
    REQUIRE(a.size() == 10);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].grid == b[i].grid);
        CHECK(a[i].label == b[i].label);
    }
    cfg.seed = 100;
    auto c = generate_dataset(cfg);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].grid != c[i].grid) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("labels are sound across seeds") {
    // Every rendered topology must put at least one defect on the wafer.
    std::size_t failures = 0, trials = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        Rng rng(seed * 2654435761ULL + 1);
        const Defect kind = Defect(seed % kNumClasses);
        auto mask = render_defect(kind, rng, 26, 26);
        std::size_t hit = 0;
        for (auto m : mask) hit += m;
        ++trials;
        if (hit == 0) ++failures;
    }
    CHECK(double(failures) < 0.01 * double(trials));
}

TEST_CASE("native container round trip") {
    DatasetConfig cfg;
    cfg.seed = 11;
    cfg.counts = {{{Defect::Scratch}, 3}, {{Defect::NearFull}, 2}};
    auto samples = generate_dataset(cfg);
    const std::string path = temp_path("roundtrip") + ".wfr";
    save_native(path, samples);
    auto back = load_native(path);
    REQUIRE(back.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(back[i].grid == samples[i].grid);
        CHECK(back[i].label == samples[i].label);
    }
    std::remove(path.c_str());
}

TEST_CASE("native container golden bytes") {
    WaferSample s;
    s.H = 16;
    s.W = 16;
    s.grid.assign(256, 0);
    s.grid[0] = 1;
    s.grid[255] = 2;
    s.label[0] = 1;
    s.label[6] = 1;
    const std::string path = temp_path("golden") + ".wfr";
    save_native(path, {s});
    const std::string bytes = slurp(path);
    REQUIRE(bytes.size() == 12 + 256 + 1);
    CHECK(bytes.compare(0, 4, "WFR1") == 0);
    CHECK(std::uint8_t(bytes[4]) == 1);  // N, little-endian u32
    CHECK(std::uint8_t(bytes[5]) == 0);
    CHECK(std::uint8_t(bytes[8]) == 16);   // H
    CHECK(std::uint8_t(bytes[10]) == 16);  // W
    CHECK(std::uint8_t(bytes[12]) == 1);
    CHECK(std::uint8_t(bytes[12 + 255]) == 2);
    CHECK(std::uint8_t(bytes[12 + 256]) == 0b01000001);  // bit 0 and bit 6
    std::remove(path.c_str());
}

TEST_CASE("empty native container is just the header") {
    const std::string path = temp_path("empty") + ".wfr";
    save_native(path, {});
    CHECK(slurp(path).size() == 12);
    CHECK(load_native(path).empty());
    std::remove(path.c_str());
}

TEST_CASE("native loader rejects corruption") {
    const std::string path = temp_path("bad") + ".wfr";
    spit(path, "NOPE");
    CHECK_THROWS_WITH_AS(load_native(path), doctest::Contains("bad magic"),
                         std::runtime_error);
    WaferSample s;
    s.H = 16;
    s.W = 16;
    s.grid.assign(256, 1);
    save_native(path, {s});
    std::string bytes = slurp(path);
    bytes.resize(bytes.size() - 5);
    spit(path, bytes);
    CHECK_THROWS_WITH_AS(load_native(path), doctest::Contains("truncated"),
                         std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("manifest lists ids, label bits and defect counts") {
    DatasetConfig cfg;
    cfg.seed = 21;
    cfg.counts = {{{Defect::Center}, 2}};
    auto samples = generate_dataset(cfg);
    const std::string path = temp_path("manifest") + ".csv";
    export_manifest(path, samples);
    const std::string csv = slurp(path);
    CHECK(csv.rfind("sample_id,label_bits,defect_count\n", 0) == 0);
    CHECK(csv.find("0,10000000,") != std::string::npos);
    CHECK(csv.find("1,10000000,") != std::string::npos);
    std::remove(path.c_str());
}

TEST_CASE("archive loader handles stored and deflated members") {
    const std::size_t N = 2, H = 16, W = 16;
    std::vector<std::uint8_t> maps(N * H * W, 1);
    maps[5] = 2;
    maps[H * W + 7] = 0;
    std::vector<std::uint8_t> labels(N * 8, 0);
    labels[0] = 1;
    labels[8 + 6] = 1;
    const auto npy_maps = make_npy("(2, 16, 16)", maps);
    const auto npy_labels = make_npy("(2, 8)", labels);

    for (bool deflated : {false, true}) {
        const std::string path = temp_path(deflated ? "zipd" : "zips") + ".npz";
        spit(path, make_zip({{"arr_0.npy", npy_maps}, {"arr_1.npy", npy_labels}},
                            deflated));
        auto samples = load_archive(path);
        REQUIRE(samples.size() == 2);
        CHECK(samples[0].grid[5] == 2);
        CHECK(samples[1].grid[7] == 0);
        CHECK(samples[0].label_bits() == "10000000");
        CHECK(samples[1].label_bits() == "00000010");
        std::remove(path.c_str());
    }
}

TEST_CASE("archive loader rejects malformed records with positions") {
    const std::vector<std::uint8_t> maps(1 * 16 * 16, 1);
    const std::vector<std::uint8_t> labels(8, 0);

    const std::string path = temp_path("badzip") + ".npz";

    SUBCASE("missing record") {
        spit(path, make_zip({{"arr_0.npy", make_npy("(1, 16, 16)", maps)}}, false));
        CHECK_THROWS_WITH_AS(load_archive(path), doctest::Contains("arr_1"),
                             std::runtime_error);
    }
    SUBCASE("bad npy magic") {
        std::string broken = make_npy("(1, 16, 16)", maps);
        broken[0] = 'X';
        spit(path, make_zip({{"arr_0.npy", broken},
                             {"arr_1.npy", make_npy("(1, 8)", labels)}},
                            false));
        CHECK_THROWS_WITH_AS(load_archive(path),
                             doctest::Contains("byte offset"), std::runtime_error);
    }
    SUBCASE("wrong dtype") {
        spit(path, make_zip({{"arr_0.npy", make_npy("(1, 16, 16)", maps, "<f8")},
                             {"arr_1.npy", make_npy("(1, 8)", labels)}},
                            false));
        CHECK_THROWS_WITH_AS(load_archive(path), doctest::Contains("uint8"),
                             std::runtime_error);
    }
    SUBCASE("wrong label width") {
        std::vector<std::uint8_t> wide(9, 0);
        spit(path, make_zip({{"arr_0.npy", make_npy("(1, 16, 16)", maps)},
                             {"arr_1.npy", make_npy("(1, 9)", wide)}},
                            false));
        CHECK_THROWS_WITH_AS(load_archive(path),
                             doctest::Contains("label width must be 8"),
                             std::runtime_error);
    }
    SUBCASE("grid value out of range") {
        std::vector<std::uint8_t> hot = maps;
        hot[40] = 3;
        spit(path, make_zip({{"arr_0.npy", make_npy("(1, 16, 16)", hot)},
                             {"arr_1.npy", make_npy("(1, 8)", labels)}},
                            false));
        CHECK_THROWS_WITH_AS(load_archive(path),
                             doctest::Contains("outside {0,1,2}"),
                             std::runtime_error);
    }
    SUBCASE("no end-of-central-directory") {
        spit(path, "this is not a zip file at all, padded to pass size checks");
        CHECK_THROWS_WITH_AS(load_archive(path),
                             doctest::Contains("end-of-central-directory"),
                             std::runtime_error);
    }
    std::remove(path.c_str());
}
