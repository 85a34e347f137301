#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bipar/error.hpp"

namespace bipar {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;
using UVs = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

// Triangle mesh on a fixed topology. Vertex i, uv i and row i of any
// per-vertex table (skinning weights, displacement components) all refer to
// the same point of the shared template.
struct Mesh {
    Points vertices;
    Faces faces;
    UVs uvs;
    // Set by the loader when the file carried no texture coordinates; uvs are
    // then all zero.
    bool uvs_missing = false;

    Eigen::Index vertex_count() const { return vertices.rows(); }
    Eigen::Index face_count() const { return faces.rows(); }
};

// Throws if any structural invariant is violated.
inline void validate(const Mesh& mesh) {
    const auto n = mesh.vertices.rows();
    require(mesh.uvs.rows() == n, ErrorKind::dimension_mismatch,
            "uv count " + std::to_string(mesh.uvs.rows()) + " differs from vertex count " +
                std::to_string(n));
    for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
        for (int c = 0; c < 3; ++c) {
            const int idx = mesh.faces(f, c);
            require(idx >= 0 && idx < n, ErrorKind::index_out_of_range,
                    "face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                        " (vertex count " + std::to_string(n) + ")");
        }
        const int a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
        require(a != b && b != c && a != c, ErrorKind::invalid_argument,
                "face " + std::to_string(f) + " has repeated indices");
    }
}

inline Mesh make_mesh(Points vertices, Faces faces, UVs uvs) {
    Mesh m{std::move(vertices), std::move(faces), std::move(uvs), false};
    validate(m);
    return m;
}

inline Mesh make_mesh(Points vertices, Faces faces) {
    UVs uvs = UVs::Zero(vertices.rows(), 2);
    Mesh m{std::move(vertices), std::move(faces), std::move(uvs), true};
    validate(m);
    return m;
}

// Flattened view of vertex coordinates as x0 y0 z0 x1 ... (length 3N).
inline Eigen::Map<const Eigen::VectorXd> flat(const Points& p) {
    return {p.data(), p.size()};
}

inline Points unflat(const Eigen::Ref<const Eigen::VectorXd>& v) {
    Points p(v.size() / 3, 3);
    Eigen::Map<Eigen::VectorXd>(p.data(), p.size()) = v;
    return p;
}

struct TopologySignature {
    std::uint64_t vertex_count = 0;
    std::uint64_t face_count = 0;
    std::uint64_t edge_count = 0;
    std::uint64_t adjacency_hash = 0;

    friend bool operator==(const TopologySignature&, const TopologySignature&) = default;
};

namespace detail {

// FNV-1a, 64 bit.
class Fnv1a {
public:
    void update(std::uint32_t word) {
        for (int i = 0; i < 4; ++i) {
            state_ ^= static_cast<std::uint8_t>(word >> (8 * i));
            state_ *= 0x100000001b3ULL;
        }
    }
    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace detail

// Each triple is rotated so its smallest index comes first (winding is kept),
// then triples are sorted, so the digest ignores face order only.
inline TopologySignature topology_signature(const Mesh& mesh) {
    std::vector<std::array<int, 3>> tris;
    tris.reserve(static_cast<std::size_t>(mesh.faces.rows()));
    std::vector<std::pair<int, int>> edges;
    edges.reserve(3 * static_cast<std::size_t>(mesh.faces.rows()));
    for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
        std::array<int, 3> t{mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)};
        const auto lo = std::min_element(t.begin(), t.end());
        std::rotate(t.begin(), lo, t.end());
        tris.push_back(t);
        for (int c = 0; c < 3; ++c) {
            const int a = t[c], b = t[(c + 1) % 3];
            edges.emplace_back(std::min(a, b), std::max(a, b));
        }
    }
    std::sort(tris.begin(), tris.end());
    std::sort(edges.begin(), edges.end());
    const auto unique_edges = std::unique(edges.begin(), edges.end()) - edges.begin();

    detail::Fnv1a h;
    for (const auto& t : tris)
        for (int idx : t) h.update(static_cast<std::uint32_t>(idx));

    TopologySignature sig;
    sig.vertex_count = static_cast<std::uint64_t>(mesh.vertices.rows());
    sig.face_count = static_cast<std::uint64_t>(mesh.faces.rows());
    sig.edge_count = static_cast<std::uint64_t>(unique_edges);
    sig.adjacency_hash = h.digest();
    return sig;
}

struct ConsistencyReport {
    bool consistent = true;
    // Empty when consistent, otherwise one line "FIELD expected=X got=Y".
    std::string report;

    explicit operator bool() const { return consistent; }
};

inline ConsistencyReport check_consistency(const Mesh& a, const Mesh& b) {
    const auto sa = topology_signature(a);
    const auto sb = topology_signature(b);
    const std::pair<const char*, std::pair<std::uint64_t, std::uint64_t>> fields[] = {
        {"vertex_count", {sa.vertex_count, sb.vertex_count}},
        {"face_count", {sa.face_count, sb.face_count}},
        {"edge_count", {sa.edge_count, sb.edge_count}},
        {"adjacency_hash", {sa.adjacency_hash, sb.adjacency_hash}},
    };
    for (const auto& [name, values] : fields) {
        if (values.first != values.second) {
            return {false, std::string(name) + " expected=" + std::to_string(values.first) +
                               " got=" + std::to_string(values.second)};
        }
    }
    return {};
}

}  // namespace bipar
