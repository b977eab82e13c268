#include "hqmv/wafer.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hqmv::wafer {

const std::array<const char*, kNumClasses> kClassNames = {
    "Center", "Donut", "Edge_Loc", "Edge_Ring",
    "Loc",    "Near_Full", "Scratch", "Random"};

int class_index(const std::string& name) {
    for (std::size_t i = 0; i < kNumClasses; ++i)
        if (name == kClassNames[i]) return int(i);
    return -1;
}

std::size_t WaferSample::defect_count() const {
    return std::count(grid.begin(), grid.end(), std::uint8_t(2));
}

std::string WaferSample::label_bits() const {
    std::string s(kNumClasses, '0');
    for (std::size_t i = 0; i < kNumClasses; ++i)
        if (label[i]) s[i] = '1';
    return s;
}

namespace {

struct Disk {
    double cy, cx, R;
    bool inside(std::size_t r, std::size_t c) const {
        const double dy = double(r) - cy, dx = double(c) - cx;
        return std::sqrt(dy * dy + dx * dx) <= R;
    }
    double ratio(std::size_t r, std::size_t c) const {
        const double dy = double(r) - cy, dx = double(c) - cx;
        return std::sqrt(dy * dy + dx * dx) / R;
    }
    double angle(std::size_t r, std::size_t c) const {
        return std::atan2(double(r) - cy, double(c) - cx);
    }
};

Disk make_disk(std::size_t H, std::size_t W) {
    return {double(H - 1) / 2.0, double(W - 1) / 2.0,
            double(std::min(H, W)) / 2.0};
}

double angle_diff(double a, double b) {
    double d = a - b;
    const double pi = 3.14159265358979323846;
    while (d > pi) d -= 2 * pi;
    while (d < -pi) d += 2 * pi;
    return d;
}

void mark_blob(std::vector<std::uint8_t>& mask, const Disk& disk, std::size_t H,
               std::size_t W, double cy, double cx, double radius) {
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c) {
            if (!disk.inside(r, c)) continue;
            const double dy = double(r) - cy, dx = double(c) - cx;
            if (std::sqrt(dy * dy + dx * dx) <= radius) mask[r * W + c] = 1;
        }
}

}  // namespace

std::vector<std::uint8_t> render_defect(Defect kind, Rng& rng, std::size_t H,
                                        std::size_t W) {
    if (H < 16 || W < 16)
        throw std::invalid_argument("render_defect: grid must be at least 16x16");
    const Disk disk = make_disk(H, W);
    std::vector<std::uint8_t> mask(H * W, 0);
    const double pi = 3.14159265358979323846;

    switch (kind) {
        case Defect::Center: {
            const double rr = rng.uniform(0.15, 0.3) * disk.R;
            mark_blob(mask, disk, H, W, disk.cy, disk.cx, rr);
            break;
        }
        case Defect::Donut: {
            const double inner = rng.uniform(0.25, 0.33);
            const double outer = rng.uniform(inner + 0.08, 0.45);
            for (std::size_t r = 0; r < H; ++r)
                for (std::size_t c = 0; c < W; ++c) {
                    if (!disk.inside(r, c)) continue;
                    const double rt = disk.ratio(r, c);
                    if (rt >= inner && rt <= outer) mask[r * W + c] = 1;
                }
            break;
        }
        case Defect::EdgeRing: {
            const double lo = rng.uniform(0.85, 0.9);
            for (std::size_t r = 0; r < H; ++r)
                for (std::size_t c = 0; c < W; ++c) {
                    if (!disk.inside(r, c)) continue;
                    if (disk.ratio(r, c) >= lo) mask[r * W + c] = 1;
                }
            break;
        }
        case Defect::EdgeLoc: {
            const double a0 = rng.uniform(-pi, pi);
            const double span = rng.uniform(pi / 6.0, pi * 4.0 / 9.0);
            for (std::size_t r = 0; r < H; ++r)
                for (std::size_t c = 0; c < W; ++c) {
                    if (!disk.inside(r, c)) continue;
                    if (disk.ratio(r, c) < 0.8) continue;
                    if (std::fabs(angle_diff(disk.angle(r, c), a0)) <= span / 2.0)
                        mask[r * W + c] = 1;
                }
            break;
        }
        case Defect::Loc: {
            const double off = rng.uniform(0.3, 0.6) * disk.R;
            const double ang = rng.uniform(-pi, pi);
            const double rr = rng.uniform(0.1, 0.2) * disk.R + 1.0;
            mark_blob(mask, disk, H, W, disk.cy + off * std::sin(ang),
                      disk.cx + off * std::cos(ang), rr);
            break;
        }
        case Defect::Scratch: {
            const int width = rng.bernoulli(0.5) ? 1 : 2;
            double y = disk.cy + rng.uniform(-0.5, 0.5) * disk.R;
            double x = disk.cx + rng.uniform(-0.5, 0.5) * disk.R;
            double ang = rng.uniform(-pi, pi);
            const std::size_t steps = std::size_t(rng.uniform(0.6, 1.1) * double(H));
            for (std::size_t s = 0; s < steps; ++s) {
                for (int dy = 0; dy < width; ++dy)
                    for (int dx = 0; dx < width; ++dx) {
                        const long r = std::lround(y) + dy;
                        const long c = std::lround(x) + dx;
                        if (r < 0 || c < 0 || r >= long(H) || c >= long(W)) continue;
                        if (disk.inside(std::size_t(r), std::size_t(c)))
                            mask[std::size_t(r) * W + std::size_t(c)] = 1;
                    }
                y += std::sin(ang);
                x += std::cos(ang);
                ang += rng.normal(0.0, 0.15);
            }
            break;
        }
        case Defect::Random: {
            for (std::size_t r = 0; r < H; ++r)
                for (std::size_t c = 0; c < W; ++c)
                    if (disk.inside(r, c) && rng.bernoulli(0.08))
                        mask[r * W + c] = 1;
            break;
        }
        case Defect::NearFull: {
            std::vector<std::size_t> in_disk, clear;
            for (std::size_t r = 0; r < H; ++r)
                for (std::size_t c = 0; c < W; ++c)
                    if (disk.inside(r, c)) {
                        in_disk.push_back(r * W + c);
                        if (rng.bernoulli(rng.uniform(0.7, 0.9)))
                            mask[r * W + c] = 1;
                        else
                            clear.push_back(r * W + c);
                    }
            // generator contract: coverage >= 60% of in-disk cells
            std::size_t covered = in_disk.size() - clear.size();
            const std::size_t need = (in_disk.size() * 6 + 9) / 10;
            while (covered < need && !clear.empty()) {
                const std::size_t pick = rng.below(clear.size());
                mask[clear[pick]] = 1;
                clear.erase(clear.begin() + long(pick));
                ++covered;
            }
            break;
        }
        default:
            throw std::invalid_argument("render_defect: unknown kind");
    }
    return mask;
}

WaferSample compose_sample(const std::vector<Defect>& kinds, Rng& rng,
                           const DatasetConfig& cfg) {
    if (kinds.empty() || kinds.size() > 4)
        throw std::invalid_argument("compose_sample: need 1..4 classes");
    bool has_near_full = false;
    for (auto k : kinds)
        if (k == Defect::NearFull) has_near_full = true;
    if (has_near_full && kinds.size() > 1)
        throw std::invalid_argument(
            "compose_sample: Near_Full composes with nothing else");
    if (cfg.noise_rate < 0.0 || cfg.noise_rate > 0.2)
        throw std::invalid_argument("compose_sample: noise rate must be in [0, 0.2]");

    const std::size_t H = cfg.H, W = cfg.W;
    const Disk disk = make_disk(H, W);

    WaferSample s;
    s.H = cfg.H;
    s.W = cfg.W;
    s.grid.assign(H * W, 0);
    for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c)
            if (disk.inside(r, c)) s.grid[r * W + c] = 1;

    for (auto k : kinds) {
        if (s.label[std::size_t(k)])
            throw std::invalid_argument("compose_sample: duplicate class");
        s.label[std::size_t(k)] = 1;
        const auto mask = render_defect(k, rng, H, W);
        for (std::size_t i = 0; i < H * W; ++i)
            if (mask[i]) s.grid[i] = 2;
    }

    if (cfg.noise_rate > 0.0) {
        for (std::size_t i = 0; i < H * W; ++i)
            if (s.grid[i] != 0 && rng.bernoulli(cfg.noise_rate))
                s.grid[i] = s.grid[i] == 1 ? 2 : 1;
    }
    return s;
}

DatasetConfig DatasetConfig::default_profile(std::uint64_t seed, std::uint16_t H,
                                             std::uint16_t W) {
    DatasetConfig cfg;
    cfg.H = H;
    cfg.W = W;
    cfg.seed = seed;
    // Local classes only; Near_Full stays exclusive and rarest (long tail).
    const std::vector<Defect> locals = {Defect::Center,  Defect::Donut,
                                        Defect::EdgeLoc, Defect::EdgeRing,
                                        Defect::Loc,     Defect::Scratch,
                                        Defect::Random};
    for (auto k : locals) cfg.counts.push_back({{k}, 400});
    cfg.counts.push_back({{Defect::NearFull}, 20});
    for (std::size_t i = 0; i < locals.size(); ++i)
        for (std::size_t j = i + 1; j < locals.size(); ++j)
            cfg.counts.push_back({{locals[i], locals[j]}, 80});
    // A fixed sampled subset of triples and quads, drawn once per seed.
    Rng combo_rng = Rng::derive(seed, 0x434f4d42ULL);
    for (int t = 0; t < 10; ++t) {
        std::vector<Defect> combo;
        while (combo.size() < 3) {
            const Defect k = locals[combo_rng.below(locals.size())];
            if (std::find(combo.begin(), combo.end(), k) == combo.end())
                combo.push_back(k);
        }
        cfg.counts.push_back({combo, 30});
    }
    for (int t = 0; t < 5; ++t) {
        std::vector<Defect> combo;
        while (combo.size() < 4) {
            const Defect k = locals[combo_rng.below(locals.size())];
            if (std::find(combo.begin(), combo.end(), k) == combo.end())
                combo.push_back(k);
        }
        cfg.counts.push_back({combo, 15});
    }
    return cfg;
}

std::size_t DatasetConfig::total_count() const {
    std::size_t n = 0;
    for (const auto& [kinds, count] : counts) n += count;
    return n;
}

std::vector<WaferSample> generate_dataset(const DatasetConfig& cfg) {
    std::vector<WaferSample> out;
    out.reserve(cfg.total_count());
    std::uint64_t index = 0;
    for (const auto& [kinds, count] : cfg.counts) {
        for (std::size_t i = 0; i < count; ++i) {
            Rng rng = Rng::derive(cfg.seed, 1 + index);
            out.push_back(compose_sample(kinds, rng, cfg));
            ++index;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Native WFR1 container
// ---------------------------------------------------------------------------

namespace {

void put_u16(std::string& b, std::uint16_t v) {
    b.push_back(char(v & 0xff));
    b.push_back(char(v >> 8));
}
void put_u32(std::string& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(char((v >> (8 * i)) & 0xff));
}
std::uint16_t get_u16(const std::string& b, std::size_t off) {
    return std::uint16_t(std::uint8_t(b[off])) |
           std::uint16_t(std::uint8_t(b[off + 1])) << 8;
}
std::uint32_t get_u32(const std::string& b, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= std::uint32_t(std::uint8_t(b[off + i])) << (8 * i);
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return data;
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out.write(data.data(), std::streamsize(data.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

void save_native(const std::string& path, const std::vector<WaferSample>& samples) {
    std::string buf = "WFR1";
    put_u32(buf, std::uint32_t(samples.size()));
    const std::uint16_t H = samples.empty() ? 0 : samples[0].H;
    const std::uint16_t W = samples.empty() ? 0 : samples[0].W;
    put_u16(buf, H);
    put_u16(buf, W);
    for (const auto& s : samples) {
        if (s.H != H || s.W != W)
            throw std::invalid_argument("save_native: mixed grid sizes");
        buf.append(reinterpret_cast<const char*>(s.grid.data()), s.grid.size());
        std::uint8_t bits = 0;
        for (std::size_t i = 0; i < kNumClasses; ++i)
            if (s.label[i]) bits |= std::uint8_t(1u << i);
        buf.push_back(char(bits));
    }
    write_file(path, buf);
}

std::vector<WaferSample> load_native(const std::string& path) {
    const std::string buf = read_file(path);
    if (buf.size() < 12 || buf.compare(0, 4, "WFR1") != 0)
        throw std::runtime_error("load_native: bad magic in " + path);
    const std::uint32_t n = get_u32(buf, 4);
    const std::uint16_t H = get_u16(buf, 8);
    const std::uint16_t W = get_u16(buf, 10);
    const std::size_t per = std::size_t(H) * W + 1;
    if (buf.size() != 12 + std::size_t(n) * per)
        throw std::runtime_error("load_native: truncated file " + path);
    std::vector<WaferSample> out(n);
    std::size_t off = 12;
    for (auto& s : out) {
        s.H = H;
        s.W = W;
        s.grid.assign(buf.begin() + long(off), buf.begin() + long(off + per - 1));
        const std::uint8_t bits = std::uint8_t(buf[off + per - 1]);
        for (std::size_t i = 0; i < kNumClasses; ++i)
            s.label[i] = (bits >> i) & 1;
        off += per;
    }
    return out;
}

void export_manifest(const std::string& path, const std::vector<WaferSample>& samples) {
    std::string csv = "sample_id,label_bits,defect_count\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        csv += std::to_string(i) + "," + samples[i].label_bits() + "," +
               std::to_string(samples[i].defect_count()) + "\n";
    }
    write_file(path, csv);
}

// ---------------------------------------------------------------------------
// Zip-of-NPY archive loader
// ---------------------------------------------------------------------------

namespace {

struct NpyArray {
    std::vector<std::size_t> shape;
    std::vector<std::uint8_t> data;
};

std::string inflate_raw(const char* src, std::size_t src_len, std::size_t dst_len,
                        const std::string& record) {
    std::string out(dst_len, '\0');
    z_stream zs{};
    if (inflateInit2(&zs, -15) != Z_OK)
        throw std::runtime_error("archive: zlib init failed for " + record);
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(src));
    zs.avail_in = uInt(src_len);
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = uInt(dst_len);
    const int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END)
        throw std::runtime_error("archive: deflate stream corrupt in " + record);
    return out;
}

// Parses one NPY record located at `offset` in the archive byte stream.
NpyArray parse_npy(const std::string& bytes, std::size_t offset,
                   const std::string& record) {
    const std::string where = record + " at byte offset " + std::to_string(offset);
    if (bytes.size() < 10)
        throw std::runtime_error("archive: record too short: " + where);
    if (bytes.compare(0, 6, "\x93NUMPY", 6) != 0)
        throw std::runtime_error("archive: missing \\x93NUMPY magic in " + where);
    const unsigned major = std::uint8_t(bytes[6]);
    std::size_t header_len, header_off;
    if (major == 1) {
        header_len = get_u16(bytes, 8);
        header_off = 10;
    } else if (major == 2 || major == 3) {
        if (bytes.size() < 12)
            throw std::runtime_error("archive: truncated header in " + where);
        header_len = get_u32(bytes, 8);
        header_off = 12;
    } else {
        throw std::runtime_error("archive: unsupported NPY version " +
                                 std::to_string(major) + " in " + where);
    }
    if (bytes.size() < header_off + header_len)
        throw std::runtime_error("archive: truncated header in " + where);
    const std::string header = bytes.substr(header_off, header_len);

    auto dict_value = [&](const std::string& key) -> std::string {
        const auto kpos = header.find("'" + key + "'");
        if (kpos == std::string::npos)
            throw std::runtime_error("archive: header missing '" + key + "' in " + where);
        auto pos = header.find(':', kpos);
        ++pos;
        while (pos < header.size() && header[pos] == ' ') ++pos;
        std::size_t end = pos;
        int depth = 0;
        while (end < header.size()) {
            const char ch = header[end];
            if (ch == '(' || ch == '[') ++depth;
            if (ch == ')' || ch == ']') {
                if (depth == 0) break;
                --depth;
                ++end;
                continue;
            }
            if ((ch == ',' || ch == '}') && depth == 0) break;
            ++end;
        }
        return header.substr(pos, end - pos);
    };

    const std::string descr = dict_value("descr");
    if (descr.find("u1") == std::string::npos)
        throw std::runtime_error("archive: dtype must be uint8, got " + descr +
                                 " in " + where);
    if (dict_value("fortran_order").find("True") != std::string::npos)
        throw std::runtime_error("archive: fortran order unsupported in " + where);

    std::string shape_txt = dict_value("shape");
    NpyArray arr;
    std::size_t pos = 0;
    while (pos < shape_txt.size()) {
        while (pos < shape_txt.size() && !std::isdigit(std::uint8_t(shape_txt[pos])))
            ++pos;
        if (pos >= shape_txt.size()) break;
        std::size_t v = 0;
        while (pos < shape_txt.size() && std::isdigit(std::uint8_t(shape_txt[pos])))
            v = v * 10 + std::size_t(shape_txt[pos++] - '0');
        arr.shape.push_back(v);
    }
    std::size_t count = 1;
    for (auto d : arr.shape) count *= d;
    if (bytes.size() < header_off + header_len + count)
        throw std::runtime_error("archive: data truncated in " + where);
    const char* src = bytes.data() + header_off + header_len;
    arr.data.assign(src, src + count);
    return arr;
}

struct ZipEntry {
    std::string name;
    std::uint16_t method = 0;
    std::uint32_t comp_size = 0, uncomp_size = 0, local_offset = 0;
};

std::vector<ZipEntry> read_central_directory(const std::string& zip,
                                             const std::string& path) {
    // End-of-central-directory scan from the tail.
    if (zip.size() < 22) throw std::runtime_error("archive: too small: " + path);
    std::size_t eocd = std::string::npos;
    const std::size_t lo = zip.size() > 22 + 65536 ? zip.size() - 22 - 65536 : 0;
    for (std::size_t i = zip.size() - 22 + 1; i-- > lo;) {
        if (zip.compare(i, 4, "PK\x05\x06", 4) == 0) {
            eocd = i;
            break;
        }
    }
    if (eocd == std::string::npos)
        throw std::runtime_error("archive: no end-of-central-directory in " + path);
    const std::uint16_t n_entries = get_u16(zip, eocd + 10);
    std::size_t off = get_u32(zip, eocd + 16);

    std::vector<ZipEntry> entries;
    for (std::uint16_t e = 0; e < n_entries; ++e) {
        if (off + 46 > zip.size() || zip.compare(off, 4, "PK\x01\x02", 4) != 0)
            throw std::runtime_error("archive: bad central directory entry at byte offset " +
                                     std::to_string(off) + " in " + path);
        ZipEntry ent;
        ent.method = get_u16(zip, off + 10);
        ent.comp_size = get_u32(zip, off + 20);
        ent.uncomp_size = get_u32(zip, off + 24);
        const std::uint16_t name_len = get_u16(zip, off + 28);
        const std::uint16_t extra_len = get_u16(zip, off + 30);
        const std::uint16_t comment_len = get_u16(zip, off + 32);
        ent.local_offset = get_u32(zip, off + 42);
        ent.name = zip.substr(off + 46, name_len);
        entries.push_back(ent);
        off += 46u + name_len + extra_len + comment_len;
    }
    return entries;
}

std::string zip_entry_bytes(const std::string& zip, const ZipEntry& ent,
                            const std::string& path) {
    const std::size_t off = ent.local_offset;
    if (off + 30 > zip.size() || zip.compare(off, 4, "PK\x03\x04", 4) != 0)
        throw std::runtime_error("archive: bad local header for " + ent.name +
                                 " at byte offset " + std::to_string(off) + " in " + path);
    const std::uint16_t name_len = get_u16(zip, off + 26);
    const std::uint16_t extra_len = get_u16(zip, off + 28);
    const std::size_t data_off = off + 30 + name_len + extra_len;
    if (data_off + ent.comp_size > zip.size())
        throw std::runtime_error("archive: truncated data for " + ent.name + " in " + path);
    if (ent.method == 0)
        return zip.substr(data_off, ent.comp_size);
    if (ent.method == 8)
        return inflate_raw(zip.data() + data_off, ent.comp_size, ent.uncomp_size,
                           ent.name);
    throw std::runtime_error("archive: unsupported compression method " +
                             std::to_string(ent.method) + " for " + ent.name);
}

}  // namespace

std::vector<WaferSample> load_archive(const std::string& path) {
    const std::string zip = read_file(path);
    const auto entries = read_central_directory(zip, path);

    auto find_entry = [&](const std::string& base) -> const ZipEntry* {
        for (const auto& e : entries)
            if (e.name == base || e.name == base + ".npy") return &e;
        return nullptr;
    };
    const ZipEntry* maps_ent = find_entry("arr_0");
    const ZipEntry* labels_ent = find_entry("arr_1");
    if (!maps_ent) throw std::runtime_error("archive: missing record arr_0 in " + path);
    if (!labels_ent)
        throw std::runtime_error("archive: missing record arr_1 in " + path);

    const NpyArray maps = parse_npy(zip_entry_bytes(zip, *maps_ent, path),
                                    maps_ent->local_offset, "arr_0");
    const NpyArray labels = parse_npy(zip_entry_bytes(zip, *labels_ent, path),
                                      labels_ent->local_offset, "arr_1");

    if (maps.shape.size() != 3)
        throw std::runtime_error("archive: arr_0 must be N x H x W, got rank " +
                                 std::to_string(maps.shape.size()));
    if (labels.shape.size() != 2)
        throw std::runtime_error("archive: arr_1 must be N x 8, got rank " +
                                 std::to_string(labels.shape.size()));
    if (labels.shape[1] != kNumClasses)
        throw std::runtime_error("archive: arr_1 label width must be 8, got " +
                                 std::to_string(labels.shape[1]));
    if (maps.shape[0] != labels.shape[0])
        throw std::runtime_error("archive: arr_0 and arr_1 sample counts differ");

    const std::size_t n = maps.shape[0], H = maps.shape[1], W = maps.shape[2];
    std::vector<WaferSample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = out[i];
        s.H = std::uint16_t(H);
        s.W = std::uint16_t(W);
        s.grid.assign(maps.data.begin() + long(i * H * W),
                      maps.data.begin() + long((i + 1) * H * W));
        for (std::size_t j = 0; j < s.grid.size(); ++j)
            if (s.grid[j] > 2)
                throw std::runtime_error(
                    "archive: arr_0 value " + std::to_string(s.grid[j]) +
                    " outside {0,1,2} at byte offset " + std::to_string(i * H * W + j));
        for (std::size_t c = 0; c < kNumClasses; ++c)
            s.label[c] = labels.data[i * kNumClasses + c] ? 1 : 0;
    }
    return out;
}

}  // namespace hqmv::wafer
