#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <string>

#include <Eigen/Core>

#include "bipar/mesh.hpp"
#include "bipar/pca.hpp"

namespace bipar {

// Row-major RGB image with real channels; row 0 is addressed by v = 0.
struct TextureImage {
    int width = 0;
    int height = 0;
    Eigen::VectorXd pixels;  // width * height * 3

    Eigen::Index channel_count() const { return static_cast<Eigen::Index>(width) * height * 3; }

    Eigen::Vector3d texel(int x, int y) const {
        return pixels.segment<3>(3 * (static_cast<Eigen::Index>(y) * width + x));
    }

    static TextureImage filled(int w, int h, const Eigen::Vector3d& rgb) {
        TextureImage img{w, h, Eigen::VectorXd(static_cast<Eigen::Index>(w) * h * 3)};
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(w) * h; ++i)
            img.pixels.segment<3>(3 * i) = rgb;
        return img;
    }
};

inline void validate(const TextureImage& img) {
    require(img.width > 0 && img.height > 0, ErrorKind::invalid_argument, "empty texture");
    require(img.pixels.size() == img.channel_count(), ErrorKind::dimension_mismatch,
            "texture pixel buffer does not match its dimensions");
}

struct TextureModel {
    int width = 0;
    int height = 0;
    Eigen::VectorXd mean;
    RowMatrix components;
    Eigen::VectorXd singular_values;
    Eigen::Index training_count = 0;
    bool clamped = false;

    Eigen::Index n_components() const { return components.rows(); }

    Eigen::VectorXd sigma() const {
        if (training_count < 2) return Eigen::VectorXd::Zero(singular_values.size());
        return singular_values / std::sqrt(static_cast<double>(training_count - 1));
    }
};

inline TextureModel fit_texture_pca(std::span<const TextureImage> images, Eigen::Index n_tex) {
    require(images.size() >= 2, ErrorKind::invalid_argument, "PCA needs at least 2 textures");
    const int w = images.front().width, h = images.front().height;
    for (std::size_t i = 0; i < images.size(); ++i) {
        validate(images[i]);
        require(images[i].width == w && images[i].height == h, ErrorKind::dimension_mismatch,
                "texture " + std::to_string(i) + " is " + std::to_string(images[i].width) + "x" +
                    std::to_string(images[i].height) + ", expected " + std::to_string(w) + "x" +
                    std::to_string(h));
    }
    RowMatrix data(static_cast<Eigen::Index>(images.size()), images.front().channel_count());
    for (std::size_t i = 0; i < images.size(); ++i)
        data.row(static_cast<Eigen::Index>(i)) = images[i].pixels.transpose();

    PcaBasis basis = fit_pca_basis(data, n_tex);
    TextureModel m;
    m.width = w;
    m.height = h;
    m.mean = std::move(basis.mean);
    m.components = std::move(basis.components);
    m.singular_values = std::move(basis.singular_values);
    m.training_count = basis.sample_count;
    m.clamped = basis.clamped;
    return m;
}

// mean + sum_i c_i component_i, without clamping.
inline TextureImage eval_texture_linear(const TextureModel& model, const Eigen::VectorXd& coeffs) {
    require(coeffs.size() == model.n_components(), ErrorKind::dimension_mismatch,
            "expected " + std::to_string(model.n_components()) + " texture coefficients, got " +
                std::to_string(coeffs.size()));
    TextureImage img{model.width, model.height, model.mean};
    img.pixels += model.components.transpose() * coeffs;
    return img;
}

inline TextureImage eval_texture(const TextureModel& model, const Eigen::VectorXd& coeffs) {
    TextureImage img = eval_texture_linear(model, coeffs);
    img.pixels = img.pixels.cwiseMax(0.0).cwiseMin(1.0);
    return img;
}

inline Eigen::VectorXd project_texture(const TextureModel& model, const TextureImage& img) {
    require(img.width == model.width && img.height == model.height,
            ErrorKind::dimension_mismatch, "texture size does not match model");
    return model.components * (img.pixels - model.mean);
}

// Bilinear lookup with texel centers at ((x + 0.5) / W, (y + 0.5) / H) and
// clamp-to-edge addressing.
inline Eigen::Vector3d sample_bilinear(const TextureImage& tex, double u, double v) {
    const double fx = std::clamp(u * tex.width - 0.5, 0.0, static_cast<double>(tex.width - 1));
    const double fy = std::clamp(v * tex.height - 0.5, 0.0, static_cast<double>(tex.height - 1));
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const int x1 = std::min(x0 + 1, tex.width - 1);
    const int y1 = std::min(y0 + 1, tex.height - 1);
    const double tx = fx - x0, ty = fy - y0;
    const Eigen::Vector3d top = (1.0 - tx) * tex.texel(x0, y0) + tx * tex.texel(x1, y0);
    const Eigen::Vector3d bottom = (1.0 - tx) * tex.texel(x0, y1) + tx * tex.texel(x1, y1);
    return (1.0 - ty) * top + ty * bottom;
}

// A mesh bound to a texture image.
struct TexturedMesh {
    Mesh mesh;
    std::shared_ptr<const TextureImage> texture;

    Eigen::Vector3d sample_at_vertex(Eigen::Index i) const {
        return sample_bilinear(*texture, mesh.uvs(i, 0), mesh.uvs(i, 1));
    }
};

inline TexturedMesh apply_texture(Mesh mesh, std::shared_ptr<const TextureImage> tex) {
    require(!mesh.uvs_missing && mesh.uvs.rows() == mesh.vertices.rows(),
            ErrorKind::invalid_argument, "mesh has no texture coordinates");
    require(tex != nullptr, ErrorKind::invalid_argument, "no texture");
    validate(*tex);
    return {std::move(mesh), std::move(tex)};
}

inline TexturedMesh apply_texture(Mesh mesh, TextureImage tex) {
    return apply_texture(std::move(mesh), std::make_shared<const TextureImage>(std::move(tex)));
}

struct TextureMetrics {
    double mse = 0.0;
    // +infinity for identical images.
    double psnr = std::numeric_limits<double>::infinity();
};

// Peak value 1.0.
inline TextureMetrics texture_metrics(const TextureImage& a, const TextureImage& b) {
    require(a.width == b.width && a.height == b.height && a.pixels.size() == b.pixels.size(),
            ErrorKind::dimension_mismatch, "texture sizes differ");
    TextureMetrics m;
    if (a.pixels.size() == 0) return m;
    m.mse = (a.pixels - b.pixels).squaredNorm() / static_cast<double>(a.pixels.size());
    if (m.mse > 0.0) m.psnr = 10.0 * std::log10(1.0 / m.mse);
    return m;
}

}  // namespace bipar
