#pragma once

// Wavefront OBJ subset: `v x y z`, `vt u v`, triangular `f` records whose
// vt index (when present) equals the v index. Normals, groups and material
// statements are skipped; polygons with more than three corners are rejected.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "bipar/mesh.hpp"

namespace bipar {

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

inline double parse_double(std::string_view tok, std::size_t line) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError(line, "malformed number '" + std::string(tok) + "'");
    return value;
}

inline long parse_long(std::string_view tok, std::size_t line) {
    long value = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError(line, "malformed index '" + std::string(tok) + "'");
    return value;
}

// Shortest decimal string that parses back to the identical double.
inline void append_double(std::string& out, double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

}  // namespace detail

inline Mesh parse_obj(std::string_view text) {
    std::vector<double> v, vt;
    std::vector<int> f;
    struct PendingRef {
        long index;
        std::size_t line;
    };
    std::vector<PendingRef> refs;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        const auto tok = detail::split_ws(line);
        if (tok.empty() || tok[0].front() == '#') continue;

        if (tok[0] == "v") {
            if (tok.size() < 4) throw ParseError(line_no, "vertex needs 3 coordinates");
            for (int c = 1; c <= 3; ++c) v.push_back(detail::parse_double(tok[c], line_no));
        } else if (tok[0] == "vt") {
            if (tok.size() < 3) throw ParseError(line_no, "texture coordinate needs 2 values");
            for (int c = 1; c <= 2; ++c) vt.push_back(detail::parse_double(tok[c], line_no));
        } else if (tok[0] == "f") {
            if (tok.size() != 4)
                throw ParseError(line_no, "only triangles are supported, got " +
                                              std::to_string(tok.size() - 1) + " corners");
            for (int c = 1; c <= 3; ++c) {
                const std::string_view ref = tok[c];
                const auto slash = ref.find('/');
                long vi = detail::parse_long(ref.substr(0, slash), line_no);
                const long defined = static_cast<long>(v.size() / 3);
                if (vi < 0) vi = defined + vi + 1;
                if (slash != std::string_view::npos) {
                    const auto rest = ref.substr(slash + 1);
                    const auto slash2 = rest.find('/');
                    const auto vt_tok = rest.substr(0, slash2);
                    if (!vt_tok.empty()) {
                        long ti = detail::parse_long(vt_tok, line_no);
                        if (ti < 0) ti = static_cast<long>(vt.size() / 2) + ti + 1;
                        if (ti != vi)
                            throw ParseError(line_no, "vt index " + std::to_string(ti) +
                                                          " differs from v index " +
                                                          std::to_string(vi));
                    }
                }
                refs.push_back({vi, line_no});
            }
        }
        // vn, o, g, s, mtllib, usemtl and anything else: ignored
    }

    const auto n = static_cast<long>(v.size() / 3);
    for (const auto& r : refs) {
        if (r.index < 1 || r.index > n)
            throw Error(ErrorKind::index_out_of_range,
                        "line " + std::to_string(r.line) + ": vertex index " +
                            std::to_string(r.index) + " out of range [1, " + std::to_string(n) +
                            "]");
        f.push_back(static_cast<int>(r.index - 1));
    }

    Mesh mesh;
    mesh.vertices = Eigen::Map<const Points>(v.data(), n, 3);
    mesh.faces = Eigen::Map<const Faces>(f.data(), static_cast<Eigen::Index>(f.size() / 3), 3);
    if (vt.empty()) {
        mesh.uvs = UVs::Zero(n, 2);
        mesh.uvs_missing = true;
    } else {
        if (static_cast<long>(vt.size() / 2) != n)
            throw ParseError(line_no, "vt count " + std::to_string(vt.size() / 2) +
                                          " differs from v count " + std::to_string(n));
        mesh.uvs = Eigen::Map<const UVs>(vt.data(), n, 2);
    }
    for (Eigen::Index i = 0; i < mesh.faces.rows(); ++i) {
        const auto t = mesh.faces.row(i);
        if (t(0) == t(1) || t(1) == t(2) || t(0) == t(2))
            throw Error(ErrorKind::invalid_argument,
                        "face " + std::to_string(i) + " has repeated indices");
    }
    return mesh;
}

inline std::string format_obj(const Mesh& mesh) {
    validate(mesh);
    std::string out;
    out.reserve(static_cast<std::size_t>(mesh.vertices.rows()) * 80);
    for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
        out += 'v';
        for (int c = 0; c < 3; ++c) {
            out += ' ';
            detail::append_double(out, mesh.vertices(i, c));
        }
        out += '\n';
    }
    const bool with_uv = !mesh.uvs_missing;
    if (with_uv) {
        for (Eigen::Index i = 0; i < mesh.uvs.rows(); ++i) {
            out += "vt";
            for (int c = 0; c < 2; ++c) {
                out += ' ';
                detail::append_double(out, mesh.uvs(i, c));
            }
            out += '\n';
        }
    }
    for (Eigen::Index i = 0; i < mesh.faces.rows(); ++i) {
        out += 'f';
        for (int c = 0; c < 3; ++c) {
            const auto idx = std::to_string(mesh.faces(i, c) + 1);
            out += ' ';
            out += idx;
            if (with_uv) {
                out += '/';
                out += idx;
            }
        }
        out += '\n';
    }
    return out;
}

inline Mesh load_mesh(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_obj(ss.str());
}

inline void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
    const std::string text = format_obj(mesh);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

}  // namespace bipar
