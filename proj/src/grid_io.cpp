#include "pavetex/grid_io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "pavetex/errors.hpp"

namespace pavetex {

namespace {

bool host_is_little_endian() {
    return std::endian::native == std::endian::little;
}

float byteswap_float(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    bits = ((bits & 0x000000ffu) << 24) | ((bits & 0x0000ff00u) << 8) |
           ((bits & 0x00ff0000u) >> 8) | ((bits & 0xff000000u) >> 24);
    std::memcpy(&v, &bits, 4);
    return v;
}

// PFM stores rows bottom-to-top; the scale sign encodes endianness.
DepthMap read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    std::string magic;
    int width = 0, height = 0;
    double scale = 0.0;
    in >> magic >> width >> height >> scale;
    if (!in || magic != "Pf") throw ParseError(path + ": not a grayscale PFM (expected 'Pf')");
    if (width < 1 || height < 1) throw ParseError(path + ": invalid PFM dimensions");
    in.get();  // single whitespace byte after the scale field

    const bool file_little = scale < 0.0;
    std::vector<float> row(static_cast<std::size_t>(width));
    DepthMap map(width, height);
    for (int r = height - 1; r >= 0; --r) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
        if (!in) throw ParseError(path + ": truncated PFM pixel data");
        for (int x = 0; x < width; ++x) {
            float v = row[static_cast<std::size_t>(x)];
            if (file_little != host_is_little_endian()) v = byteswap_float(v);
            if (!std::isfinite(v)) throw ParseError(path + ": non-finite depth value");
            map.at(x, r) = v;
        }
    }
    return map;
}

void write_pfm(const DepthMap& map, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "Pf\n" << map.width << " " << map.height << "\n-1.0\n";
    std::vector<float> row(static_cast<std::size_t>(map.width));
    for (int r = map.height - 1; r >= 0; --r) {
        for (int x = 0; x < map.width; ++x) {
            float v = map.at(x, r);
            if (!host_is_little_endian()) v = byteswap_float(v);
            row[static_cast<std::size_t>(x)] = v;
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * 4));
    }
    if (!out) throw IoError("failed writing " + path);
}

DepthMap read_csv_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::vector<std::vector<float>> rows;
    std::string line;
    int line_no = 0;
    int declared_width = -1, declared_height = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hdr(line.substr(1));
            hdr >> declared_width >> declared_height;
            continue;
        }
        std::vector<float> row;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                const float v = std::stof(cell, &pos);
                while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
                if (pos != cell.size()) throw std::invalid_argument(cell);
                if (!std::isfinite(v)) throw ParseError(path + ": non-finite value at line " +
                                                        std::to_string(line_no));
                row.push_back(v);
            } catch (const std::logic_error&) {
                throw ParseError(path + ": bad number '" + cell + "' at line " +
                                 std::to_string(line_no));
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ParseError(path + ": row at line " + std::to_string(line_no) + " has " +
                             std::to_string(row.size()) + " values, expected " +
                             std::to_string(rows.front().size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(path + ": no data rows");

    const int width = static_cast<int>(rows.front().size());
    const int height = static_cast<int>(rows.size());
    if (declared_width >= 0 && (declared_width != width || declared_height != height)) {
        throw ParseError(path + ": header declares " + std::to_string(declared_width) + "x" +
                         std::to_string(declared_height) + " but data is " +
                         std::to_string(width) + "x" + std::to_string(height));
    }
    DepthMap map(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) map.at(x, y) = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
    }
    return map;
}

void write_csv_grid(const DepthMap& map, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "# " << map.width << " " << map.height << "\n";
    char buf[48];
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            // 9 significant digits round-trips any finite float32 exactly
            std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(map.at(x, y)));
            if (x) out << ',';
            out << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace

MapFormat map_format_from_path(const std::string& path) {
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".pfm") return MapFormat::pfm32;
    if (ext == ".csv") return MapFormat::csv_grid;
    throw ConfigError("cannot infer map format from '" + path + "' (use .pfm or .csv)");
}

DepthMap read_depth_map(const std::string& path, MapFormat format) {
    DepthMap map = format == MapFormat::pfm32 ? read_pfm(path) : read_csv_grid(path);
    map.validate();
    return map;
}

void write_depth_map(const DepthMap& map, const std::string& path, MapFormat format) {
    map.validate();
    if (format == MapFormat::pfm32) {
        write_pfm(map, path);
    } else {
        write_csv_grid(map, path);
    }
}

}  // namespace pavetex
