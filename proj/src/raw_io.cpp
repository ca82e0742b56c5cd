#include "ctforge/raw_io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ctforge/error.hpp"

namespace ctforge {

namespace {

void append(std::vector<std::uint8_t>& out, const std::string& s) {
    out.insert(out.end(), s.begin(), s.end());
}

// Reads one '\n'-terminated line from bytes starting at pos; advances pos.
std::string take_line(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
    std::string line;
    while (pos < bytes.size()) {
        const char c = static_cast<char>(bytes[pos++]);
        if (c == '\n') return line;
        line.push_back(c);
    }
    throw HeaderMismatch("raw: truncated header");
}

std::string expect_field(const std::string& line, const std::string& key) {
    const std::string prefix = key + "=";
    if (line.rfind(prefix, 0) != 0) {
        throw HeaderMismatch("raw: expected '" + key + "=' line, got: " + line);
    }
    return line.substr(prefix.size());
}

void parse_triplet(const std::string& s, double out[3], const char* what) {
    std::stringstream ss(s);
    std::string item;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(ss, item, ',')) {
            throw HeaderMismatch(std::string("raw: bad ") + what + ": " + s);
        }
        try {
            std::size_t used = 0;
            out[i] = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw HeaderMismatch(std::string("raw: bad ") + what + ": " + s);
        }
    }
    if (std::getline(ss, item, ',')) {
        throw HeaderMismatch(std::string("raw: bad ") + what + ": " + s);
    }
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<std::uint8_t> write_raw(const Volume& volume) {
    std::vector<std::uint8_t> out;
    out.reserve(volume.voxel_count() * 2 + 128);
    append(out, "dims=" + std::to_string(volume.dims().x) + "," +
                    std::to_string(volume.dims().y) + "," +
                    std::to_string(volume.dims().z) + "\n");
    append(out, "spacing=" + format_double(volume.spacing().x) + "," +
                    format_double(volume.spacing().y) + "," +
                    format_double(volume.spacing().z) + "\n");
    append(out, "type=int16le\n");
    append(out, "series=" + volume.series_id() + "\n");
    append(out, "\n");
    for (std::int16_t v : volume.voxels()) {
        const auto u = static_cast<std::uint16_t>(v);
        out.push_back(static_cast<std::uint8_t>(u & 0xff));
        out.push_back(static_cast<std::uint8_t>(u >> 8));
    }
    return out;
}

Volume read_raw(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    const std::string dims_s = expect_field(take_line(bytes, pos), "dims");
    const std::string spacing_s = expect_field(take_line(bytes, pos), "spacing");
    const std::string type_s = expect_field(take_line(bytes, pos), "type");
    const std::string series = expect_field(take_line(bytes, pos), "series");
    const std::string blank = take_line(bytes, pos);
    if (!blank.empty()) throw HeaderMismatch("raw: missing blank separator line");
    if (type_s != "int16le") throw HeaderMismatch("raw: unsupported type " + type_s);

    double d[3];
    parse_triplet(dims_s, d, "dims");
    for (double v : d) {
        if (v <= 0 || v != static_cast<double>(static_cast<int>(v))) {
            throw HeaderMismatch("raw: dims must be positive integers");
        }
    }
    const Vec3i dims{static_cast<int>(d[0]), static_cast<int>(d[1]),
                     static_cast<int>(d[2])};
    double s[3];
    parse_triplet(spacing_s, s, "spacing");

    const std::size_t n =
        static_cast<std::size_t>(dims.x) * dims.y * dims.z;
    if (bytes.size() - pos != n * 2) {
        throw HeaderMismatch("raw: payload size " +
                             std::to_string(bytes.size() - pos) +
                             " does not match dims product " + std::to_string(n));
    }
    std::vector<std::int16_t> voxels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint16_t lo = bytes[pos + 2 * i];
        const std::uint16_t hi = bytes[pos + 2 * i + 1];
        voxels[i] = static_cast<std::int16_t>(lo | (hi << 8));
    }
    return Volume(dims, {s[0], s[1], s[2]}, std::move(voxels), series);
}

void write_raw_file(const Volume& volume, const std::string& path) {
    const auto bytes = write_raw(volume);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

Volume read_raw_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return read_raw(bytes);
}

}  // namespace ctforge
