// Minimal reader for NumPy .npz archives (zip of .npy arrays), enough for the
// CSR graph files published with the gnn-benchmark datasets.

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include <zlib.h>

#include "ogcil/dataset.hpp"

namespace ogcil {

namespace {

using Bytes = std::vector<unsigned char>;

std::uint64_t read_le(const Bytes& b, std::size_t pos, int width) {
    if (pos + static_cast<std::size_t>(width) > b.size()) throw DatasetError("npz: truncated archive");
    std::uint64_t v = 0;
    for (int i = width - 1; i >= 0; --i) v = (v << 8) | b[pos + static_cast<std::size_t>(i)];
    return v;
}

struct ZipEntry {
    std::string name;
    std::uint16_t method = 0;
    std::uint64_t compressed = 0;
    std::uint64_t uncompressed = 0;
    std::uint64_t local_offset = 0;
};

std::vector<ZipEntry> central_directory(const Bytes& b) {
    if (b.size() < 22) throw DatasetError("npz: file too small");
    std::size_t eocd = std::string::npos;
    const std::size_t stop = b.size() > 65557 ? b.size() - 65557 : 0;
    for (std::size_t i = b.size() - 22 + 1; i-- > stop;)
        if (read_le(b, i, 4) == 0x06054b50) {
            eocd = i;
            break;
        }
    if (eocd == std::string::npos) throw DatasetError("npz: end of central directory not found");
    std::uint64_t entries = read_le(b, eocd + 10, 2);
    std::uint64_t cd_offset = read_le(b, eocd + 16, 4);
    if (cd_offset == 0xFFFFFFFFULL || entries == 0xFFFFULL) {
        if (eocd < 20 || read_le(b, eocd - 20, 4) != 0x07064b50) throw DatasetError("npz: missing zip64 locator");
        const std::uint64_t z64 = read_le(b, eocd - 20 + 8, 8);
        if (read_le(b, z64, 4) != 0x06064b50) throw DatasetError("npz: bad zip64 end record");
        entries = read_le(b, z64 + 32, 8);
        cd_offset = read_le(b, z64 + 48, 8);
    }
    std::vector<ZipEntry> out;
    std::size_t p = cd_offset;
    for (std::uint64_t k = 0; k < entries; ++k) {
        if (read_le(b, p, 4) != 0x02014b50) throw DatasetError("npz: bad central directory entry");
        ZipEntry e;
        e.method = static_cast<std::uint16_t>(read_le(b, p + 10, 2));
        e.compressed = read_le(b, p + 20, 4);
        e.uncompressed = read_le(b, p + 24, 4);
        const auto name_len = read_le(b, p + 28, 2);
        const auto extra_len = read_le(b, p + 30, 2);
        const auto comment_len = read_le(b, p + 32, 2);
        e.local_offset = read_le(b, p + 42, 4);
        e.name.assign(reinterpret_cast<const char*>(&b[p + 46]), name_len);
        std::size_t x = p + 46 + name_len;
        const std::size_t x_end = x + extra_len;
        while (x + 4 <= x_end) {
            const auto id = read_le(b, x, 2);
            const auto len = read_le(b, x + 2, 2);
            if (id == 0x0001) {
                std::size_t q = x + 4;
                if (e.uncompressed == 0xFFFFFFFFULL) { e.uncompressed = read_le(b, q, 8); q += 8; }
                if (e.compressed == 0xFFFFFFFFULL) { e.compressed = read_le(b, q, 8); q += 8; }
                if (e.local_offset == 0xFFFFFFFFULL) { e.local_offset = read_le(b, q, 8); }
            }
            x += 4 + len;
        }
        out.push_back(std::move(e));
        p += 46 + name_len + extra_len + comment_len;
    }
    return out;
}

Bytes extract(const Bytes& b, const ZipEntry& e) {
    const std::size_t h = e.local_offset;
    if (read_le(b, h, 4) != 0x04034b50) throw DatasetError("npz: bad local header for " + e.name);
    const std::size_t data = h + 30 + read_le(b, h + 26, 2) + read_le(b, h + 28, 2);
    if (data + e.compressed > b.size()) throw DatasetError("npz: truncated entry " + e.name);
    Bytes out(e.uncompressed);
    if (e.method == 0) {
        std::memcpy(out.data(), &b[data], e.uncompressed);
        return out;
    }
    if (e.method != 8) throw DatasetError("npz: unsupported compression method for " + e.name);
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw DatasetError("npz: inflateInit failed");
    zs.next_in = const_cast<Bytef*>(&b[data]);
    zs.avail_in = static_cast<uInt>(e.compressed);
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END) throw DatasetError("npz: inflate failed for " + e.name);
    return out;
}

struct NpyArray {
    std::string descr;
    std::vector<std::size_t> shape;
    Bytes raw;  // element data, little endian

    std::size_t count() const {
        std::size_t n = 1;
        for (auto s : shape) n *= s;
        return n;
    }

    double at(std::size_t i) const {
        const char kind = descr.size() > 1 ? descr[1] : '?';
        const int width = descr.size() > 2 ? std::stoi(descr.substr(2)) : 0;
        const unsigned char* p = raw.data() + i * static_cast<std::size_t>(width);
        if (kind == 'f' && width == 8) { double v; std::memcpy(&v, p, 8); return v; }
        if (kind == 'f' && width == 4) { float v; std::memcpy(&v, p, 4); return v; }
        if ((kind == 'i' || kind == 'u' || kind == 'b') && width >= 1 && width <= 8) {
            std::uint64_t u = 0;
            for (int k = width - 1; k >= 0; --k) u = (u << 8) | p[k];
            if (kind == 'i' && width < 8 && (u >> (8 * width - 1)) & 1U) u |= ~0ULL << (8 * width);
            return kind == 'u' || kind == 'b' ? static_cast<double>(u) : static_cast<double>(static_cast<std::int64_t>(u));
        }
        throw DatasetError("npz: unsupported dtype " + descr);
    }
};

NpyArray parse_npy(const Bytes& b, const std::string& name) {
    if (b.size() < 10 || std::memcmp(b.data(), "\x93NUMPY", 6) != 0) throw DatasetError("npz: " + name + " is not .npy");
    const int major = b[6];
    const std::size_t header_len = major == 1 ? read_le(b, 8, 2) : read_le(b, 8, 4);
    const std::size_t header_start = major == 1 ? 10 : 12;
    const std::string header(reinterpret_cast<const char*>(&b[header_start]), header_len);
    NpyArray a;
    auto field = [&](const std::string& key) {
        const auto k = header.find("'" + key + "'");
        if (k == std::string::npos) throw DatasetError("npz: " + name + " header lacks " + key);
        return header.find(':', k) + 1;
    };
    {
        auto p = header.find('\'', field("descr"));
        a.descr = header.substr(p + 1, header.find('\'', p + 1) - p - 1);
        if (a.descr.size() > 1 && a.descr[0] == '>') throw DatasetError("npz: big-endian arrays are not supported");
        if (a.descr[0] == '|') a.descr[0] = '<';
    }
    if (header.find("True", field("fortran_order")) == header.find_first_not_of(' ', field("fortran_order")))
        throw DatasetError("npz: Fortran-ordered arrays are not supported");
    {
        auto open = header.find('(', field("shape"));
        auto close = header.find(')', open);
        std::string dims = header.substr(open + 1, close - open - 1);
        std::size_t i = 0;
        while (i < dims.size()) {
            while (i < dims.size() && (dims[i] == ' ' || dims[i] == ',')) ++i;
            std::size_t j = i;
            while (j < dims.size() && std::isdigit(static_cast<unsigned char>(dims[j]))) ++j;
            if (j > i) a.shape.push_back(std::stoull(dims.substr(i, j - i)));
            i = j + 1;
        }
    }
    a.raw.assign(b.begin() + static_cast<long>(header_start + header_len), b.end());
    const int width = std::stoi(a.descr.substr(2));
    if (a.raw.size() < a.count() * static_cast<std::size_t>(width)) throw DatasetError("npz: " + name + " data truncated");
    return a;
}

}  // namespace

Graph load_npz_graph(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + path.string());
    const Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    std::map<std::string, NpyArray> arrays;
    const std::set<std::string> wanted = {"adj_data",    "adj_indices", "adj_indptr", "adj_shape", "attr_data",
                                          "attr_indices", "attr_indptr", "attr_shape", "labels"};
    for (const auto& e : central_directory(bytes)) {
        std::string key = e.name;
        if (key.size() > 4 && key.substr(key.size() - 4) == ".npy") key.resize(key.size() - 4);
        if (wanted.count(key)) arrays.emplace(key, parse_npy(extract(bytes, e), e.name));
    }
    for (const auto& k : wanted)
        if (!arrays.count(k)) throw DatasetError("npz: missing array '" + k + "' in " + path.string());

    const auto n = static_cast<std::size_t>(arrays.at("adj_shape").at(0));
    const auto f = static_cast<std::size_t>(arrays.at("attr_shape").at(1));
    Graph g;
    g.num_nodes = n;
    g.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
    {
        const auto& ptr = arrays.at("attr_indptr");
        const auto& idx = arrays.at("attr_indices");
        const auto& val = arrays.at("attr_data");
        for (std::size_t r = 0; r < n; ++r)
            for (auto k = static_cast<std::size_t>(ptr.at(r)); k < static_cast<std::size_t>(ptr.at(r + 1)); ++k)
                g.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(idx.at(k))) = val.at(k);
    }
    {
        const auto& ptr = arrays.at("adj_indptr");
        const auto& idx = arrays.at("adj_indices");
        std::set<std::pair<int, int>> seen;
        for (std::size_t r = 0; r < n; ++r)
            for (auto k = static_cast<std::size_t>(ptr.at(r)); k < static_cast<std::size_t>(ptr.at(r + 1)); ++k) {
                const int u = static_cast<int>(r);
                const int v = static_cast<int>(idx.at(k));
                if (u == v) continue;
                if (seen.emplace(std::min(u, v), std::max(u, v)).second) g.edges.push_back({std::min(u, v), std::max(u, v)});
            }
    }
    const auto& labels = arrays.at("labels");
    if (labels.count() != n) throw DatasetError("npz: label count does not match node count");
    for (std::size_t i = 0; i < n; ++i) g.labels.push_back(static_cast<int>(labels.at(i)));
    g.validate();
    return g;
}

}  // namespace ogcil
