#pragma once

// PLY point-cloud reader/writer. Reads ASCII and binary-little-endian files
// with x,y,z vertex positions and optional red,green,blue 8-bit colors.
// Writes binary-little-endian with float positions.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pcdm/io/binary.hpp"
#include "pcdm/io/errors.hpp"
#include "pcdm/point_cloud.hpp"

namespace pcdm {

namespace detail {

enum class PlyFormat { Ascii, BinaryLE };

enum class PlyScalar { Char, UChar, Short, UShort, Int, UInt, Float, Double };

inline bool ply_scalar_from_name(const std::string& s, PlyScalar& out) {
    if (s == "char" || s == "int8") out = PlyScalar::Char;
    else if (s == "uchar" || s == "uint8") out = PlyScalar::UChar;
    else if (s == "short" || s == "int16") out = PlyScalar::Short;
    else if (s == "ushort" || s == "uint16") out = PlyScalar::UShort;
    else if (s == "int" || s == "int32") out = PlyScalar::Int;
    else if (s == "uint" || s == "uint32") out = PlyScalar::UInt;
    else if (s == "float" || s == "float32") out = PlyScalar::Float;
    else if (s == "double" || s == "float64") out = PlyScalar::Double;
    else return false;
    return true;
}

inline std::size_t ply_scalar_size(PlyScalar t) {
    switch (t) {
        case PlyScalar::Char:
        case PlyScalar::UChar: return 1;
        case PlyScalar::Short:
        case PlyScalar::UShort: return 2;
        case PlyScalar::Int:
        case PlyScalar::UInt:
        case PlyScalar::Float: return 4;
        case PlyScalar::Double: return 8;
    }
    return 0;
}

struct PlyProperty {
    std::string name;
    PlyScalar type = PlyScalar::Float;
    bool is_list = false;
};

struct PlyElement {
    std::string name;
    long count = 0;
    std::vector<PlyProperty> props;

    bool has_list() const {
        for (const auto& p : props)
            if (p.is_list) return true;
        return false;
    }
    std::size_t stride() const {
        std::size_t s = 0;
        for (const auto& p : props) s += ply_scalar_size(p.type);
        return s;
    }
};

struct PlyHeader {
    PlyFormat format = PlyFormat::Ascii;
    std::vector<PlyElement> elements;
    int end_line = 0;  // line number of end_header, 1-based
};

inline std::string ply_getline(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("unexpected end of PLY header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

inline PlyHeader parse_ply_header(std::istream& is) {
    int line_no = 1;
    if (ply_getline(is) != "ply")
        throw ParseError("line 1: not a PLY file (missing \"ply\" magic)");

    PlyHeader hdr;
    bool saw_format = false;
    while (true) {
        ++line_no;
        const std::string line = ply_getline(is);
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word.empty() || word == "comment" || word == "obj_info") continue;
        if (word == "end_header") {
            hdr.end_line = line_no;
            break;
        }
        if (word == "format") {
            std::string fmt, ver;
            ss >> fmt >> ver;
            if (fmt == "ascii") hdr.format = PlyFormat::Ascii;
            else if (fmt == "binary_little_endian") hdr.format = PlyFormat::BinaryLE;
            else
                throw ParseError("line " + std::to_string(line_no) +
                                 ": unsupported PLY format \"" + fmt + "\"");
            saw_format = true;
            continue;
        }
        if (word == "element") {
            PlyElement el;
            if (!(ss >> el.name >> el.count) || el.count < 0)
                throw ParseError("line " + std::to_string(line_no) +
                                 ": malformed element declaration");
            hdr.elements.push_back(std::move(el));
            continue;
        }
        if (word == "property") {
            if (hdr.elements.empty())
                throw ParseError("line " + std::to_string(line_no) +
                                 ": property before any element");
            PlyProperty prop;
            std::string type_name;
            ss >> type_name;
            if (type_name == "list") {
                std::string count_type, value_type;
                if (!(ss >> count_type >> value_type >> prop.name))
                    throw ParseError("line " + std::to_string(line_no) +
                                     ": malformed list property");
                prop.is_list = true;
            } else {
                if (!ply_scalar_from_name(type_name, prop.type) || !(ss >> prop.name))
                    throw ParseError("line " + std::to_string(line_no) +
                                     ": unsupported property type \"" + type_name + "\"");
            }
            hdr.elements.back().props.push_back(std::move(prop));
            continue;
        }
        throw ParseError("line " + std::to_string(line_no) + ": unknown header keyword \"" +
                         word + "\"");
    }
    if (!saw_format) throw ParseError("PLY header missing format declaration");
    return hdr;
}

inline double decode_ply_scalar(const unsigned char* p, PlyScalar t) {
    auto u16 = [&] { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); };
    auto u32 = [&] {
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) |
               (static_cast<std::uint32_t>(p[3]) << 24);
    };
    switch (t) {
        case PlyScalar::Char: return static_cast<double>(static_cast<signed char>(p[0]));
        case PlyScalar::UChar: return static_cast<double>(p[0]);
        case PlyScalar::Short: return static_cast<double>(static_cast<std::int16_t>(u16()));
        case PlyScalar::UShort: return static_cast<double>(u16());
        case PlyScalar::Int: return static_cast<double>(static_cast<std::int32_t>(u32()));
        case PlyScalar::UInt: return static_cast<double>(u32());
        case PlyScalar::Float: return static_cast<double>(std::bit_cast<float>(u32()));
        case PlyScalar::Double: {
            std::uint64_t v = 0;
            for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
            return std::bit_cast<double>(v);
        }
    }
    return 0.0;
}

}  // namespace detail

inline PointCloud load_ply(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    const detail::PlyHeader hdr = detail::parse_ply_header(is);

    std::size_t vertex_idx = hdr.elements.size();
    for (std::size_t i = 0; i < hdr.elements.size(); ++i)
        if (hdr.elements[i].name == "vertex") {
            vertex_idx = i;
            break;
        }
    if (vertex_idx == hdr.elements.size())
        throw ParseError(path + ": no vertex element in PLY header");
    const detail::PlyElement& vert = hdr.elements[vertex_idx];
    if (vert.has_list())
        throw ParseError(path + ": list properties on vertex element are unsupported");

    int pos_col[3] = {-1, -1, -1};
    int col_col[3] = {-1, -1, -1};
    std::size_t pos_off[3] = {0, 0, 0};
    std::size_t col_off[3] = {0, 0, 0};
    detail::PlyScalar pos_type[3] = {};
    std::size_t offset = 0;
    for (std::size_t i = 0; i < vert.props.size(); ++i) {
        const auto& p = vert.props[i];
        const std::string axes = "xyz";
        const char* rgb[3] = {"red", "green", "blue"};
        for (int a = 0; a < 3; ++a) {
            if (p.name == std::string(1, axes[static_cast<std::size_t>(a)])) {
                if (p.type != detail::PlyScalar::Float && p.type != detail::PlyScalar::Double)
                    throw ParseError(path + ": vertex property " + p.name +
                                     " must be float or double");
                pos_col[a] = static_cast<int>(i);
                pos_off[a] = offset;
                pos_type[a] = p.type;
            }
            if (p.name == rgb[a]) {
                if (p.type != detail::PlyScalar::UChar)
                    throw ParseError(path + ": vertex property " + p.name +
                                     " must be uchar");
                col_col[a] = static_cast<int>(i);
                col_off[a] = offset;
            }
        }
        offset += detail::ply_scalar_size(p.type);
    }
    for (int a = 0; a < 3; ++a)
        if (pos_col[a] < 0)
            throw ParseError(path + ": vertex element lacks x,y,z properties");
    const bool has_colors = col_col[0] >= 0 && col_col[1] >= 0 && col_col[2] >= 0;

    const int n = static_cast<int>(vert.count);
    Tensor positions({n, 3});
    Tensor colors = has_colors ? Tensor({n, 3}) : Tensor();

    if (hdr.format == detail::PlyFormat::Ascii) {
        int line_no = hdr.end_line;
        // Elements appear in declaration order, one row per line.
        for (std::size_t e = 0; e < vertex_idx; ++e)
            for (long r = 0; r < hdr.elements[e].count; ++r) {
                ++line_no;
                std::string skip;
                if (!std::getline(is, skip))
                    throw ParseError(path + ": line " + std::to_string(line_no) +
                                     ": truncated element data");
            }
        for (int r = 0; r < n; ++r) {
            ++line_no;
            std::string line;
            if (!std::getline(is, line))
                throw ParseError(path + ": line " + std::to_string(line_no) +
                                 ": truncated vertex data");
            std::istringstream ss(line);
            std::vector<double> row;
            double v;
            while (ss >> v) row.push_back(v);
            if (row.size() < vert.props.size())
                throw ParseError(path + ": line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(vert.props.size()) + " values, got " +
                                 std::to_string(row.size()));
            for (int a = 0; a < 3; ++a) {
                positions.at(r, a) = row[static_cast<std::size_t>(pos_col[a])];
                if (has_colors)
                    colors.at(r, a) = row[static_cast<std::size_t>(col_col[a])] / 255.0;
            }
        }
    } else {
        for (std::size_t e = 0; e < vertex_idx; ++e) {
            const auto& el = hdr.elements[e];
            if (el.has_list())
                throw ParseError(path + ": cannot skip list element \"" + el.name +
                                 "\" before vertex data");
            is.seekg(static_cast<std::streamoff>(el.stride() * static_cast<std::size_t>(el.count)),
                     std::ios::cur);
        }
        const std::size_t stride = vert.stride();
        std::vector<unsigned char> buf(stride * static_cast<std::size_t>(n));
        const auto at = is.tellg();
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(is.gcount()) != buf.size())
            throw ParseError(path + ": truncated vertex data at byte offset " +
                             std::to_string(static_cast<long long>(at) + is.gcount()) +
                             " (need " + std::to_string(buf.size()) + " bytes)");
        for (int r = 0; r < n; ++r) {
            const unsigned char* base = buf.data() + stride * static_cast<std::size_t>(r);
            for (int a = 0; a < 3; ++a) {
                positions.at(r, a) = detail::decode_ply_scalar(base + pos_off[a], pos_type[a]);
                if (has_colors) colors.at(r, a) = base[col_off[a]] / 255.0;
            }
        }
    }

    PointCloud cloud(std::move(positions));
    if (has_colors) cloud.set_colors(std::move(colors));
    return cloud;
}

/// Write binary-little-endian PLY: float positions, uchar colors if present.
inline void save_ply(const std::string& path, const PointCloud& cloud) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path + " for writing");

    os << "ply\nformat binary_little_endian 1.0\n";
    os << "element vertex " << cloud.size() << "\n";
    os << "property float x\nproperty float y\nproperty float z\n";
    if (cloud.has_colors())
        os << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    os << "end_header\n";

    for (int r = 0; r < cloud.size(); ++r) {
        for (int a = 0; a < 3; ++a)
            detail::write_f32_le(os, static_cast<float>(cloud.positions.at(r, a)));
        if (cloud.has_colors())
            for (int a = 0; a < 3; ++a) {
                const double c = cloud.colors.at(r, a);
                detail::write_u8(os, static_cast<std::uint8_t>(std::lround(c * 255.0)));
            }
    }
    if (!os) throw IoError("write failed for " + path);
}

}  // namespace pcdm
